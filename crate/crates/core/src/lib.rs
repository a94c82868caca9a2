//! Finite cell discretization of the Poisson problem on an immersed disk
//! with Nitsche-imposed Dirichlet conditions, eigenvalue-based estimates of
//! the Nitsche stabilization parameter, and an adaptive geometric multigrid
//! solver on 2:1-balanced quadtrees.
//!
//! All numerical code is generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
mod error;
pub mod experiments;
pub mod geometry;
pub mod mesh;
pub mod multigrid;
pub mod numerics;
pub mod quadrature;
mod scalar;
pub mod stabilization;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geometry::Point<f64>;
pub type Rect = geometry::Rect<f64>;
pub type ImplicitDomain = geometry::ImplicitDomain<f64>;
pub type SurfaceQuadrature = geometry::SurfaceQuadrature<f64>;
pub type QuadratureRule = quadrature::QuadratureRule<f64>;
pub type CsrMatrix = numerics::CsrMatrix<f64>;
pub type DenseMatrix = numerics::DenseMatrix<f64>;
pub type ConstraintMap = mesh::ConstraintMap<f64>;
pub type Discretization<'g> = assembly::Discretization<'g, f64>;
pub type StabilizationField = stabilization::StabilizationField<f64>;
pub type EigenPencil = stabilization::EigenPencil<f64>;
pub type MgLevel = multigrid::MgLevel<f64>;
pub type Multigrid = multigrid::Multigrid<f64>;
pub type SolveReport = multigrid::SolveReport<f64>;
