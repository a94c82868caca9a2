//! Geometric multigrid on nested quadtree grids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assembly::{shape_eval, Discretization, QuadratureSettings};
use crate::geometry::Geometry;
use crate::mesh::{build_dof_map, Grid, GridHierarchy};
use crate::numerics::{norm2, BandLu, CsrMatrix, DenseLu, Triplet};
use crate::stabilization::{build_field, Scheme, StabilizationField};
use crate::{Error, Real, Result};

/// How coarse-level matrices are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseOp {
    /// Galerkin product `PᵀAP`.
    Rap,
    /// Re-assembly on the coarse grid with its own estimate of `λ`.
    Assembly,
}

impl std::str::FromStr for CoarseOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rap" => Ok(CoarseOp::Rap),
            "assembly" => Ok(CoarseOp::Assembly),
            other => Err(Error::Parse(format!("unknown coarse operator '{other}'"))),
        }
    }
}

impl std::fmt::Display for CoarseOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            CoarseOp::Rap => "rap",
            CoarseOp::Assembly => "assembly",
        })
    }
}

/// Which cells get a block subdomain in the Schwarz smoother.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubdomainRule {
    /// Every cell cut by the boundary.
    AllCut,
    /// Only cells cut by the Dirichlet part.
    DirichletCut,
}

/// Prolongation `P` from a coarse to a fine grid; restriction is `Pᵀ`.
#[derive(Debug, Clone)]
pub struct TransferOperator<T> {
    p: CsrMatrix<T>,
    pt: CsrMatrix<T>,
}

impl<T: Real> TransferOperator<T> {
    pub fn new(p: CsrMatrix<T>) -> Self {
        let pt = p.transpose();
        Self { p, pt }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.p
    }

    pub fn prolongate(&self, xc: &[T]) -> Result<Vec<T>> {
        self.p.spmv(xc)
    }

    pub fn restrict(&self, xf: &[T]) -> Result<Vec<T>> {
        self.pt.spmv(xf)
    }
}

/// Interpolates the coarse finite element space at the fine free nodes.
pub fn build_prolongation<T: Real>(coarse: &Grid, fine: &Grid) -> Result<TransferOperator<T>> {
    if !fine.is_nested_in(coarse) {
        return Err(Error::NotNested(
            "fine grid is not a refinement of the coarse grid".into(),
        ));
    }
    let (cdofs, ccons) = build_dof_map::<T>(coarse)?;
    let (fdofs, _) = build_dof_map::<T>(fine)?;
    let mut triplets: Vec<Triplet<T>> = Vec::with_capacity(4 * fdofs.n_dof());
    let two = T::lit(2.0);
    for (row, &(x, y)) in fdofs.nodes().iter().enumerate() {
        let leaf = coarse
            .leaf_containing_point(x, y)
            .ok_or_else(|| Error::NotNested(format!("node ({x}, {y}) outside coarse grid")))?;
        let size = T::from_u32(leaf.size()).expect("lattice size fits");
        let xi = two * T::from_u32(x - leaf.x).expect("offset fits") / size - T::one();
        let eta = two * T::from_u32(y - leaf.y).expect("offset fits") / size - T::one();
        let (v, _) = shape_eval(xi, eta);
        let map = cdofs.element_map(&ccons, &leaf)?;
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(6);
        for k in 0..4 {
            if v[k] == T::zero() {
                continue;
            }
            for &(a, w) in &map.local[k] {
                let g = map.globals[a];
                match entries.iter_mut().find(|e| e.0 == g) {
                    Some(e) => e.1 += w * v[k],
                    None => entries.push((g, w * v[k])),
                }
            }
        }
        triplets.extend(entries.into_iter().map(|(g, w)| (row, g, w)));
    }
    Ok(TransferOperator::new(CsrMatrix::from_triplets(
        fdofs.n_dof(),
        cdofs.n_dof(),
        triplets,
    )))
}

/// `PᵀAP`
pub fn coarse_rap<T: Real>(
    a: &CsrMatrix<T>,
    transfer: &TransferOperator<T>,
) -> Result<CsrMatrix<T>> {
    CsrMatrix::triple_product(&transfer.p, a)
}

/// Estimates `λ` on the grid of `disc` and assembles the matrix there.
pub fn coarse_assemble<T: Real>(
    disc: &Discretization<'_, T>,
    scheme: Scheme,
    safety: T,
    rank_tol: T,
) -> Result<CsrMatrix<T>> {
    let field = stabilization_for(disc, scheme, safety, rank_tol)?;
    disc.assemble_matrix(&field)
}

/// Field for `disc`; grids without Dirichlet-cut cells need no values.
pub fn stabilization_for<T: Real>(
    disc: &Discretization<'_, T>,
    scheme: Scheme,
    safety: T,
    rank_tol: T,
) -> Result<StabilizationField<T>> {
    if disc.dirichlet_cut_cells().is_empty() {
        return Ok(StabilizationField::local(Default::default(), safety));
    }
    build_field(disc, scheme, safety, rank_tol)
}

#[derive(Debug, Clone)]
enum Block<T> {
    Single { dof: usize, inv_diag: T },
    Dense { dofs: Vec<usize>, lu: DenseLu<T> },
}

/// Multiplicative Schwarz smoother with block and singleton subdomains.
#[derive(Debug, Clone)]
pub struct SchwarzSmoother<T> {
    blocks: Vec<Block<T>>,
}

impl<T: Real> SchwarzSmoother<T> {
    /// Block subdomains are taken in the given order; every DoF not covered
    /// by one of them becomes a singleton, in ascending order.
    pub fn new(a: &CsrMatrix<T>, subdomains: Vec<Vec<usize>>) -> Result<Self> {
        let n = a.nrows();
        let mut covered = vec![false; n];
        let mut blocks = Vec::with_capacity(subdomains.len());
        for dofs in subdomains {
            if dofs.is_empty() {
                continue;
            }
            for &d in &dofs {
                if d >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "subdomain DoF {d} out of range {n}"
                    )));
                }
                covered[d] = true;
            }
            let lu = a.submatrix(&dofs).lu()?;
            blocks.push(Block::Dense { dofs, lu });
        }
        for (d, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            let diag = a.get(d, d);
            if diag == T::zero() {
                return Err(Error::ZeroDiagonal(d));
            }
            blocks.push(Block::Single {
                dof: d,
                inv_diag: T::one() / diag,
            });
        }
        Ok(Self { blocks })
    }

    /// Singleton subdomains only: a Gauss-Seidel sweep.
    pub fn point(a: &CsrMatrix<T>) -> Result<Self> {
        Self::new(a, Vec::new())
    }

    pub fn n_subdomains(&self) -> usize {
        self.blocks.len()
    }

    /// DoF sets in traversal order.
    pub fn subdomains(&self) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Single { dof, .. } => vec![*dof],
                Block::Dense { dofs, .. } => dofs.clone(),
            })
            .collect()
    }
}

/// One multiplicative sweep over all subdomains in order.
pub fn smooth_schwarz<T: Real>(
    a: &CsrMatrix<T>,
    smoother: &SchwarzSmoother<T>,
    x: &mut [T],
    b: &[T],
) {
    let mut r = Vec::new();
    let mut scratch = Vec::new();
    for block in &smoother.blocks {
        match block {
            Block::Single { dof, inv_diag } => {
                let d = *dof;
                x[d] += (b[d] - a.row_dot(d, x)) * *inv_diag;
            }
            Block::Dense { dofs, lu } => {
                r.clear();
                r.extend(dofs.iter().map(|&d| b[d] - a.row_dot(d, x)));
                lu.solve_in_place(&mut r, &mut scratch);
                for (&d, &e) in dofs.iter().zip(&r) {
                    x[d] += e;
                }
            }
        }
    }
}

/// `x ← x + ω D⁻¹ (b - A x)`
pub fn smooth_jacobi<T: Real>(a: &CsrMatrix<T>, x: &mut [T], b: &[T], omega: T) -> Result<()> {
    let inv = inverse_diagonal(a)?;
    jacobi_sweep(a, &inv, x, b, omega);
    Ok(())
}

fn inverse_diagonal<T: Real>(a: &CsrMatrix<T>) -> Result<Vec<T>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d == T::zero() {
                Err(Error::ZeroDiagonal(i))
            } else {
                Ok(T::one() / d)
            }
        })
        .collect()
}

fn jacobi_sweep<T: Real>(a: &CsrMatrix<T>, inv_diag: &[T], x: &mut [T], b: &[T], omega: T) {
    let r: Vec<T> = (0..x.len()).map(|i| b[i] - a.row_dot(i, x)).collect();
    for i in 0..x.len() {
        x[i] += omega * inv_diag[i] * r[i];
    }
}

#[derive(Debug, Clone)]
pub enum Smoother<T> {
    Schwarz(SchwarzSmoother<T>),
    Jacobi {
        inv_diag: Vec<T>,
        omega: T,
    },
    /// Exact solve, for testing the coarse-grid correction in isolation.
    Direct(BandLu<T>),
}

impl<T: Real> Smoother<T> {
    pub fn jacobi(a: &CsrMatrix<T>, omega: T) -> Result<Self> {
        Ok(Smoother::Jacobi {
            inv_diag: inverse_diagonal(a)?,
            omega,
        })
    }

    fn apply(&self, a: &CsrMatrix<T>, x: &mut [T], b: &[T]) {
        match self {
            Smoother::Schwarz(s) => smooth_schwarz(a, s, x, b),
            Smoother::Jacobi { inv_diag, omega } => jacobi_sweep(a, inv_diag, x, b, *omega),
            Smoother::Direct(lu) => {
                let mut r: Vec<T> = (0..x.len()).map(|i| b[i] - a.row_dot(i, x)).collect();
                lu.solve_in_place(&mut r);
                for (xi, ri) in x.iter_mut().zip(&r) {
                    *xi += *ri;
                }
            }
        }
    }
}

/// One level of the hierarchy. Level 0 carries the factorization and no
/// smoother; every other level a smoother and the transfer from below.
#[derive(Debug, Clone)]
pub struct MgLevel<T> {
    pub matrix: CsrMatrix<T>,
    pub smoother: Option<Smoother<T>>,
    pub transfer: Option<TransferOperator<T>>,
    pub base: Option<BandLu<T>>,
}

impl<T: Real> MgLevel<T> {
    pub fn base(matrix: CsrMatrix<T>) -> Result<Self> {
        let lu = BandLu::factor(&matrix)?;
        Ok(Self {
            matrix,
            smoother: None,
            transfer: None,
            base: Some(lu),
        })
    }

    pub fn smoothed(
        matrix: CsrMatrix<T>,
        smoother: Smoother<T>,
        transfer: TransferOperator<T>,
    ) -> Self {
        Self {
            matrix,
            smoother: Some(smoother),
            transfer: Some(transfer),
            base: None,
        }
    }

    pub fn n_dof(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Residual history of an iterative solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub residuals: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

impl<T: Real> SolveReport<T> {
    pub fn from_residuals(residuals: Vec<T>, converged: bool, diverged: bool) -> Self {
        Self {
            iterations: residuals.len().saturating_sub(1),
            residuals,
            converged,
            diverged,
        }
    }

    /// `(r_n / r_0)^{1/n}`; `None` before the first iteration.
    pub fn rate(&self) -> Option<T> {
        let n = self.iterations;
        if n == 0 {
            return None;
        }
        let r0 = self.residuals[0];
        let rn = self.residuals[n];
        if r0 == T::zero() {
            return Some(T::zero());
        }
        Some((rn / r0).powf(T::one() / T::from_usize_lossy(n)))
    }

    pub fn relative_residual(&self) -> T {
        let r0 = self.residuals[0];
        let rn = *self
            .residuals
            .last()
            .expect("at least the initial residual");
        if r0 == T::zero() {
            T::zero()
        } else {
            rn / r0
        }
    }

    /// `k residual` per line, then `converged rate iterations`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, r) in self.residuals.iter().enumerate() {
            writeln!(w, "{k} {:.6e}", r.to_f64_lossy())?;
        }
        let rate = self
            .rate()
            .map_or("nan".to_string(), |r| format!("{:.6}", r.to_f64_lossy()));
        writeln!(w, "{} {rate} {}", self.converged, self.iterations)?;
        Ok(())
    }
}

/// Smoothing parameters of the V-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions<T> {
    pub nu1: usize,
    pub nu2: usize,
    pub omega: T,
    pub subdomains: SubdomainRule,
}

impl<T: Real> Default for CycleOptions<T> {
    fn default() -> Self {
        Self {
            nu1: 3,
            nu2: 3,
            omega: T::lit(2.0 / 3.0),
            subdomains: SubdomainRule::AllCut,
        }
    }
}

/// Residual growth beyond this multiple of `r_0` aborts the iteration.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct Multigrid<T> {
    levels: Vec<MgLevel<T>>,
    nu1: usize,
    nu2: usize,
}

impl<T: Real> Multigrid<T> {
    pub fn new(levels: Vec<MgLevel<T>>, nu1: usize, nu2: usize) -> Result<Self> {
        match levels.first() {
            Some(l) if l.base.is_some() => {}
            _ => return Err(Error::Config("level 0 must hold a factorization".into())),
        }
        if levels[1..]
            .iter()
            .any(|l| l.smoother.is_none() || l.transfer.is_none())
        {
            return Err(Error::Config(
                "levels above 0 need a smoother and a transfer".into(),
            ));
        }
        Ok(Self { levels, nu1, nu2 })
    }

    pub fn levels(&self) -> &[MgLevel<T>] {
        &self.levels
    }

    pub fn finest(&self) -> &MgLevel<T> {
        self.levels.last().expect("non-empty")
    }

    /// One V-cycle on level `l`, updating `x` in place.
    pub fn v_cycle(&self, l: usize, x: &mut [T], b: &[T]) -> Result<()> {
        let level = &self.levels[l];
        if l == 0 {
            let lu = level.base.as_ref().expect("checked in new");
            let mut r: Vec<T> = (0..x.len())
                .map(|i| b[i] - level.matrix.row_dot(i, x))
                .collect();
            lu.solve_in_place(&mut r);
            for (xi, ri) in x.iter_mut().zip(&r) {
                *xi += *ri;
            }
            return Ok(());
        }
        let a = &level.matrix;
        let smoother = level.smoother.as_ref().expect("checked in new");
        let transfer = level.transfer.as_ref().expect("checked in new");
        for _ in 0..self.nu1 {
            smoother.apply(a, x, b);
        }
        let r: Vec<T> = (0..x.len()).map(|i| b[i] - a.row_dot(i, x)).collect();
        let rc = transfer.restrict(&r)?;
        let mut ec = vec![T::zero(); rc.len()];
        self.v_cycle(l - 1, &mut ec, &rc)?;
        let ef = transfer.prolongate(&ec)?;
        for (xi, e) in x.iter_mut().zip(&ef) {
            *xi += *e;
        }
        for _ in 0..self.nu2 {
            smoother.apply(a, x, b);
        }
        Ok(())
    }

    /// V-cycles from a zero initial guess until `‖r‖/‖r_0‖ ≤ tol`.
    pub fn solve(&self, b: &[T], tol: T, max_iter: usize) -> Result<(Vec<T>, SolveReport<T>)> {
        let a = &self.finest().matrix;
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} against {} unknowns",
                b.len(),
                a.nrows()
            )));
        }
        let top = self.levels.len() - 1;
        let mut x = vec![T::zero(); b.len()];
        let r0 = norm2(b);
        let mut residuals = vec![r0];
        if r0 == T::zero() {
            return Ok((x, SolveReport::from_residuals(residuals, true, false)));
        }
        let guard = T::lit(DIVERGENCE_FACTOR) * r0;
        for _ in 0..max_iter {
            self.v_cycle(top, &mut x, b)?;
            let r = norm2(&crate::numerics::residual(a, &x, b)?);
            residuals.push(r);
            if r <= tol * r0 {
                return Ok((x, SolveReport::from_residuals(residuals, true, false)));
            }
            if !r.is_finite() || r > guard {
                return Ok((x, SolveReport::from_residuals(residuals, false, true)));
            }
        }
        Ok((x, SolveReport::from_residuals(residuals, false, false)))
    }
}

/// Convenience wrapper of [`Multigrid::solve`].
pub fn mg_solve<T: Real>(
    mg: &Multigrid<T>,
    b: &[T],
    tol: T,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    Ok(mg.solve(b, tol, max_iter)?.1)
}

/// Block subdomains of the smoother on `disc`: the constrained DoFs of
/// every selected cut cell, in Morton order.
pub fn cell_subdomains<T: Real>(
    disc: &Discretization<'_, T>,
    rule: SubdomainRule,
) -> Vec<Vec<usize>> {
    let cells = match rule {
        SubdomainRule::AllCut => disc.cut_cells(),
        SubdomainRule::DirichletCut => disc.dirichlet_cut_cells(),
    };
    cells
        .into_iter()
        .map(|c| disc.element_map(c).globals.clone())
        .collect()
}

/// Discretizations, raw stabilization estimates and transfers of a hierarchy.
pub struct MgProblem<'g, T: Real> {
    pub discs: Vec<Discretization<'g, T>>,
    /// Raw estimates with safety applied; `None` where never needed.
    pub fields: Vec<Option<StabilizationField<T>>>,
    pub transfers: Vec<TransferOperator<T>>,
    pub scheme: Scheme,
    pub coarse_op: CoarseOp,
}

impl<'g, T: Real> MgProblem<'g, T> {
    /// Estimates `λ` on the finest grid and, for re-assembly, on every
    /// coarser grid as well.
    pub fn new(
        hierarchy: &GridHierarchy,
        geometry: &'g dyn Geometry<T>,
        quadrature: QuadratureSettings,
        scheme: Scheme,
        coarse_op: CoarseOp,
        safety: T,
        rank_tol: T,
    ) -> Result<Self> {
        let grids = hierarchy.grids();
        let top = grids.len() - 1;
        let mut discs = Vec::with_capacity(grids.len());
        let mut fields = Vec::with_capacity(grids.len());
        for (l, g) in grids.iter().enumerate() {
            let disc = Discretization::new(g.clone(), geometry, quadrature)?;
            let field = if l == top || coarse_op == CoarseOp::Assembly {
                Some(stabilization_for(&disc, scheme, safety, rank_tol)?)
            } else {
                None
            };
            discs.push(disc);
            fields.push(field);
        }
        let transfers = grids
            .windows(2)
            .map(|w| build_prolongation(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            discs,
            fields,
            transfers,
            scheme,
            coarse_op,
        })
    }

    pub fn fine(&self) -> &Discretization<'g, T> {
        self.discs.last().expect("non-empty")
    }

    pub fn fine_field(&self) -> &StabilizationField<T> {
        self.fields
            .last()
            .and_then(|f| f.as_ref())
            .expect("finest field is always built")
    }

    /// Matrices of all levels with every assembled `λ` multiplied by `factor`.
    pub fn matrices(&self, factor: T) -> Result<Vec<CsrMatrix<T>>> {
        let top = self.discs.len() - 1;
        let mut mats: Vec<CsrMatrix<T>> = Vec::with_capacity(top + 1);
        mats.push(self.discs[top].assemble_matrix(&self.fine_field().clone().with_factor(factor))?);
        for l in (0..top).rev() {
            let a = match self.coarse_op {
                CoarseOp::Rap => coarse_rap(mats.last().expect("non-empty"), &self.transfers[l])?,
                CoarseOp::Assembly => {
                    let field = self.fields[l].as_ref().expect("built for re-assembly");
                    self.discs[l].assemble_matrix(&field.clone().with_factor(factor))?
                }
            };
            mats.push(a);
        }
        mats.reverse();
        Ok(mats)
    }

    /// Multigrid with Schwarz smoothing on the finest level and damped
    /// Jacobi below; a single-grid problem reduces to the direct solver.
    pub fn multigrid(&self, factor: T, options: &CycleOptions<T>) -> Result<Multigrid<T>> {
        let mats = self.matrices(factor)?;
        let top = mats.len() - 1;
        let mut levels = Vec::with_capacity(mats.len());
        for (l, a) in mats.into_iter().enumerate() {
            if l == 0 {
                levels.push(MgLevel::base(a)?);
                continue;
            }
            let smoother = if l == top {
                Smoother::Schwarz(SchwarzSmoother::new(
                    &a,
                    cell_subdomains(&self.discs[l], options.subdomains),
                )?)
            } else {
                Smoother::jacobi(&a, options.omega)?
            };
            levels.push(MgLevel::smoothed(
                a,
                smoother,
                self.transfers[l - 1].clone(),
            ));
        }
        Multigrid::new(levels, options.nu1, options.nu2)
    }
}

/// Builds the complete solver in one call.
#[allow(clippy::too_many_arguments)]
pub fn build_levels<T: Real>(
    hierarchy: &GridHierarchy,
    geometry: &dyn Geometry<T>,
    quadrature: QuadratureSettings,
    scheme: Scheme,
    coarse_op: CoarseOp,
    safety: T,
    rank_tol: T,
    options: &CycleOptions<T>,
) -> Result<Multigrid<T>> {
    MgProblem::new(
        hierarchy, geometry, quadrature, scheme, coarse_op, safety, rank_tol,
    )?
    .multigrid(T::one(), options)
}
