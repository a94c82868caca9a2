//! Nitsche stabilization from generalized eigenvalue problems `K v = Λ M v`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::mesh::Quadrant;
use crate::numerics::{sym_eig, DenseMatrix};
use crate::{Error, Real, Result};

/// Relative cut-off below which eigenvalues of `M` count as kernel.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Global,
    Local,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(Scheme::Global),
            "local" => Ok(Scheme::Local),
            other => Err(Error::Parse(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Scheme::Global => "global",
            Scheme::Local => "local",
        })
    }
}

/// Boundary flux matrix `K` and α-weighted stiffness `M` over a scope.
///
/// `dofs` are global DoF numbers for the global scope and corner numbers
/// `0..4` for a single cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPencil<T> {
    pub k: DenseMatrix<T>,
    pub m: DenseMatrix<T>,
    pub dofs: Vec<usize>,
}

impl<T: Real> EigenPencil<T> {
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }
}

fn dense4<T: Real>(a: &[[T; 4]; 4]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(4, |i, j| a[i][j])
}

/// Pencil of one Dirichlet-cut leaf in its unconstrained bilinear basis.
pub fn local_pencil<T: Real>(disc: &Discretization<'_, T>, leaf: usize) -> Result<EigenPencil<T>> {
    let ints = disc.integrals(leaf);
    if !ints.is_dirichlet_cut() {
        return Err(Error::EmptyScope(format!(
            "leaf {leaf} is not cut by the Dirichlet boundary"
        )));
    }
    Ok(EigenPencil {
        k: dense4(&ints.flux_flux),
        m: dense4(&ints.stiffness),
        dofs: (0..4).collect(),
    })
}

/// Pencil over the constrained DoFs of all Dirichlet-cut leaves, with both
/// matrices integrated over exactly those leaves.
pub fn global_pencil<T: Real>(disc: &Discretization<'_, T>) -> Result<EigenPencil<T>> {
    let cells = disc.dirichlet_cut_cells();
    if cells.is_empty() {
        return Err(Error::EmptyScope("no Dirichlet-cut cells".into()));
    }
    let mut dofs: Vec<usize> = cells
        .iter()
        .flat_map(|&c| disc.element_map(c).globals.iter().copied())
        .collect();
    dofs.sort_unstable();
    dofs.dedup();
    let pos: HashMap<usize, usize> = dofs.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let n = dofs.len();
    let mut k = DenseMatrix::zeros(n);
    let mut m = DenseMatrix::zeros(n);
    for &c in &cells {
        let ints = disc.integrals(c);
        let map = disc.element_map(c);
        let kb = map.constrain_matrix(&ints.flux_flux);
        let mb = map.constrain_matrix(&ints.stiffness);
        for (a, &ga) in map.globals.iter().enumerate() {
            let i = pos[&ga];
            for (b, &gb) in map.globals.iter().enumerate() {
                let j = pos[&gb];
                k[(i, j)] += kb[a][b];
                m[(i, j)] += mb[a][b];
            }
        }
    }
    Ok(EigenPencil { k, m, dofs })
}

/// Largest finite generalized eigenvalue of `(K, M)`.
///
/// `M = V W Vᵀ` is truncated to eigenvalues above `rank_tol · max(W)`; the
/// answer is the top eigenvalue of `W^{-1/2} Vᵀ K V W^{-1/2}`.
pub fn max_generalized_eig<T: Real>(p: &EigenPencil<T>, rank_tol: T) -> Result<T> {
    let n = p.m.dim();
    if p.k.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "K is {}x{}, M is {n}x{n}",
            p.k.dim(),
            p.k.dim()
        )));
    }
    let eig = sym_eig(&p.m)?;
    let wmax = eig.values.iter().copied().fold(T::zero(), T::max);
    if !(wmax > T::zero()) || wmax <= T::epsilon() * p.m.max_abs() {
        return Err(Error::ZeroMass);
    }
    let cut = rank_tol * wmax;
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > cut).collect();
    let r = keep.len();
    // columns V_i / sqrt(w_i)
    let mut u = vec![T::zero(); n * r];
    for (c, &i) in keep.iter().enumerate() {
        let s = T::one() / eig.values[i].sqrt();
        for row in 0..n {
            u[row * r + c] = eig.vectors[(row, i)] * s;
        }
    }
    // K U
    let mut ku = vec![T::zero(); n * r];
    for i in 0..n {
        let krow = p.k.row(i);
        let out = &mut ku[i * r..(i + 1) * r];
        for (l, &kil) in krow.iter().enumerate() {
            if kil == T::zero() {
                continue;
            }
            let urow = &u[l * r..(l + 1) * r];
            for c in 0..r {
                out[c] += kil * urow[c];
            }
        }
    }
    let mut b = DenseMatrix::zeros(r);
    for l in 0..n {
        let urow = &u[l * r..(l + 1) * r];
        let krow = &ku[l * r..(l + 1) * r];
        for a in 0..r {
            let ua = urow[a];
            if ua == T::zero() {
                continue;
            }
            for c in a..r {
                b[(a, c)] += ua * krow[c];
            }
        }
    }
    for a in 0..r {
        for c in 0..a {
            b[(a, c)] = b[(c, a)];
        }
    }
    let top = crate::numerics::sym_eigvals(&b)?;
    Ok(top.last().copied().unwrap_or(T::zero()).max(T::zero()))
}

pub fn estimate_global<T: Real>(disc: &Discretization<'_, T>, rank_tol: T) -> Result<T> {
    max_generalized_eig(&global_pencil(disc)?, rank_tol)
}

/// One estimate per Dirichlet-cut leaf.
pub fn estimate_local<T: Real>(
    disc: &Discretization<'_, T>,
    rank_tol: T,
) -> Result<BTreeMap<Quadrant, T>> {
    disc.dirichlet_cut_cells()
        .into_iter()
        .map(|c| {
            Ok((
                disc.leaves()[c],
                max_generalized_eig(&local_pencil(disc, c)?, rank_tol)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues<T> {
    Global(T),
    Local(BTreeMap<Quadrant, T>),
}

/// Raw eigenvalue estimates scaled by `safety · factor` on query.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationField<T> {
    values: FieldValues<T>,
    safety: T,
    factor: T,
}

impl<T: Real> StabilizationField<T> {
    pub fn global(c: T, safety: T) -> Self {
        Self {
            values: FieldValues::Global(c),
            safety,
            factor: T::one(),
        }
    }

    pub fn local(map: BTreeMap<Quadrant, T>, safety: T) -> Self {
        Self {
            values: FieldValues::Local(map),
            safety,
            factor: T::one(),
        }
    }

    /// Extra multiplier on top of the safety factor.
    pub fn with_factor(mut self, factor: T) -> Self {
        self.factor = factor;
        self
    }

    pub fn scheme(&self) -> Scheme {
        match self.values {
            FieldValues::Global(_) => Scheme::Global,
            FieldValues::Local(_) => Scheme::Local,
        }
    }

    pub fn raw(&self) -> &FieldValues<T> {
        &self.values
    }

    pub fn safety(&self) -> T {
        self.safety
    }

    pub fn factor(&self) -> T {
        self.factor
    }

    /// `λ` for `cell`, or `None` if a local field has no entry for it.
    pub fn value(&self, cell: &Quadrant) -> Option<T> {
        let c = match &self.values {
            FieldValues::Global(c) => *c,
            FieldValues::Local(m) => *m.get(cell)?,
        };
        Some(self.safety * self.factor * c)
    }

    /// Effective values over the given cells.
    pub fn effective(&self, cells: &[Quadrant]) -> Vec<T> {
        cells.iter().filter_map(|q| self.value(q)).collect()
    }
}

/// Estimates `C` on `disc` and wraps it with safety `s`.
pub fn build_field<T: Real>(
    disc: &Discretization<'_, T>,
    scheme: Scheme,
    safety: T,
    rank_tol: T,
) -> Result<StabilizationField<T>> {
    if !(safety > T::zero()) {
        return Err(Error::Config("safety factor must be positive".into()));
    }
    Ok(match scheme {
        Scheme::Global => StabilizationField::global(estimate_global(disc, rank_tol)?, safety),
        Scheme::Local => StabilizationField::local(estimate_local(disc, rank_tol)?, safety),
    })
}

/// Min, mean and max of a non-empty list.
pub fn summarize<T: Real>(values: &[T]) -> Option<(T, T, T)> {
    if values.is_empty() {
        return None;
    }
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let mean = values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len());
    Some((min, mean, max))
}

/// Per-cell report: `level,x0,y0,h,lambda` with the cell's lower-left corner.
pub fn write_report<T: Real, W: Write>(out: &mut W, values: &BTreeMap<Quadrant, T>) -> Result<()> {
    writeln!(out, "level,x0,y0,h,lambda")?;
    let mut cells: Vec<_> = values.iter().collect();
    cells.sort_by_key(|(q, _)| q.morton());
    for (q, v) in cells {
        let r = q.rect::<f64>();
        writeln!(
            out,
            "{},{:.12},{:.12},{:.12},{:.10e}",
            q.level,
            r.x0,
            r.y0,
            r.width(),
            v.to_f64_lossy()
        )?;
    }
    Ok(())
}
