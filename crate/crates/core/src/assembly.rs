//! Q1 finite cell discretization with Nitsche boundary terms.
//!
//! For a leaf `K` the element matrix is
//! `S - F + λ G` with
//! `S_ij = ∫_K α ∇φ_i·∇φ_j`,
//! `F_ij = ∫_{Γ_D∩K} φ_i ∂_n φ_j + φ_j ∂_n φ_i` and
//! `G_ij = ∫_{Γ_D∩K} φ_i φ_j`; the load vector collects
//! `∫ α φ_i f + ∫_{Γ_N} φ_i t - ∫_{Γ_D} g ∂_n φ_i + λ ∫_{Γ_D} φ_i g`.

use crate::geometry::{BoundaryKind, CellClass, Geometry, Point, Rect, SurfaceQuadrature};
use crate::mesh::{build_dof_map, ConstraintMap, DofMap, ElementMap, Grid, Quadrant};
use crate::numerics::{CsrMatrix, Triplet};
use crate::quadrature::{gauss_legendre, visit_volume_rule};
use crate::stabilization::StabilizationField;
use crate::{Error, Real, Result};

pub use crate::numerics::residual;

pub type Mat4<T> = [[T; 4]; 4];

const REF_CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Bilinear basis on the reference square, corners counterclockwise from
/// `(-1, -1)`. Returns values and reference gradients.
pub fn shape_eval<T: Real>(xi: T, eta: T) -> ([T; 4], [[T; 2]; 4]) {
    let quarter = T::lit(0.25);
    let mut values = [T::zero(); 4];
    let mut grads = [[T::zero(); 2]; 4];
    for (k, &(xk, ek)) in REF_CORNERS.iter().enumerate() {
        let (xk, ek) = (T::lit(xk), T::lit(ek));
        let fx = T::one() + xk * xi;
        let fy = T::one() + ek * eta;
        values[k] = quarter * fx * fy;
        grads[k] = [quarter * xk * fy, quarter * ek * fx];
    }
    (values, grads)
}

/// Basis values and physical gradients at `p` inside `rect`.
pub fn shape_at<T: Real>(rect: &Rect<T>, p: Point<T>) -> ([T; 4], [[T; 2]; 4]) {
    let two = T::lit(2.0);
    let (hx, hy) = (rect.width(), rect.height());
    let xi = two * (p.x - rect.x0) / hx - T::one();
    let eta = two * (p.y - rect.y0) / hy - T::one();
    let (v, g) = shape_eval(xi, eta);
    let (sx, sy) = (two / hx, two / hy);
    let mut pg = [[T::zero(); 2]; 4];
    for k in 0..4 {
        pg[k] = [g[k][0] * sx, g[k][1] * sy];
    }
    (v, pg)
}

/// Integration controls shared by the volume and boundary rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSettings {
    /// Levels of adaptive subdivision below each cut leaf.
    pub max_depth: usize,
    /// Gauss points per direction on every terminal sub-cell.
    pub gauss_order: usize,
    /// Gauss points per boundary arc inside a leaf.
    pub points_per_arc: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            max_depth: 8,
            gauss_order: 2,
            points_per_arc: 4,
        }
    }
}

/// Integrals of one leaf that do not depend on the stabilization parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementIntegrals<T> {
    pub class: CellClass,
    /// `∫ α ∇φ_i·∇φ_j` over the whole leaf.
    pub stiffness: Mat4<T>,
    /// Symmetric Nitsche consistency `∫_{Γ_D} φ_i ∂_n φ_j + φ_j ∂_n φ_i`.
    pub consistency: Mat4<T>,
    /// `∫_{Γ_D} φ_i φ_j`
    pub boundary_mass: Mat4<T>,
    /// `∫_{Γ_D} ∂_n φ_i ∂_n φ_j`
    pub flux_flux: Mat4<T>,
    pub surface: SurfaceQuadrature<T>,
}

impl<T: Real> ElementIntegrals<T> {
    /// Integrates over `rect` using an explicit volume point visitor and
    /// boundary rule; used directly for synthetic cut configurations.
    pub fn from_rules(
        rect: &Rect<T>,
        class: CellClass,
        volume: impl FnOnce(&mut dyn FnMut(Point<T>, T, T)),
        surface: SurfaceQuadrature<T>,
    ) -> Self {
        let mut stiffness = [[T::zero(); 4]; 4];
        volume(&mut |p, w, alpha| {
            let (_, g) = shape_at(rect, p);
            let aw = alpha * w;
            for i in 0..4 {
                for j in i..4 {
                    stiffness[i][j] += aw * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        });
        let mut consistency = [[T::zero(); 4]; 4];
        let mut boundary_mass = [[T::zero(); 4]; 4];
        let mut flux_flux = [[T::zero(); 4]; 4];
        for k in 0..surface.len() {
            if surface.kinds[k] != BoundaryKind::Dirichlet {
                continue;
            }
            let (v, g) = shape_at(rect, surface.points[k]);
            let n = surface.normals[k];
            let w = surface.weights[k];
            let dn: [T; 4] = std::array::from_fn(|i| g[i][0] * n.x + g[i][1] * n.y);
            for i in 0..4 {
                for j in i..4 {
                    consistency[i][j] += w * (v[i] * dn[j] + v[j] * dn[i]);
                    boundary_mass[i][j] += w * v[i] * v[j];
                    flux_flux[i][j] += w * dn[i] * dn[j];
                }
            }
        }
        for m in [
            &mut stiffness,
            &mut consistency,
            &mut boundary_mass,
            &mut flux_flux,
        ] {
            for i in 0..4 {
                for j in 0..i {
                    m[i][j] = m[j][i];
                }
            }
        }
        Self {
            class,
            stiffness,
            consistency,
            boundary_mass,
            flux_flux,
            surface,
        }
    }

    pub fn compute<G: Geometry<T> + ?Sized>(
        rect: &Rect<T>,
        geometry: &G,
        settings: &QuadratureSettings,
    ) -> Self {
        let (nodes, weights) = gauss_legendre::<T>(settings.gauss_order);
        let class = geometry.classify_cell(rect);
        let surface = if class == CellClass::Cut {
            geometry.boundary_quadrature(rect, settings.points_per_arc)
        } else {
            SurfaceQuadrature::default()
        };
        Self::from_rules(
            rect,
            class,
            |visit| {
                visit_volume_rule(
                    rect,
                    geometry,
                    settings.max_depth,
                    &nodes,
                    &weights,
                    &mut |p, w, a| visit(p, w, a),
                )
            },
            surface,
        )
    }

    pub fn is_cut(&self) -> bool {
        self.class == CellClass::Cut
    }

    pub fn is_dirichlet_cut(&self) -> bool {
        self.surface.has_dirichlet()
    }

    /// `S - F + λ G`
    pub fn matrix(&self, lambda: T) -> Mat4<T> {
        let mut a = self.stiffness;
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += lambda * self.boundary_mass[i][j] - self.consistency[i][j];
            }
        }
        a
    }
}

/// Local element matrix and load vector before constraint elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices<T> {
    pub matrix: Mat4<T>,
    pub load: [T; 4],
}

/// Distributes hanging corners to their masters: returns the global DoFs of
/// the element and `Cᵀ A_e C`, `Cᵀ b_e` over them.
pub fn apply_constraints<T: Real>(
    local: &ElementMatrices<T>,
    map: &ElementMap<T>,
) -> (Vec<usize>, Vec<Vec<T>>, Vec<T>) {
    (
        map.globals.clone(),
        map.constrain_matrix(&local.matrix),
        map.constrain_vector(&local.load),
    )
}

type ScalarFn<T> = Box<dyn Fn(Point<T>) -> T + Send + Sync>;

/// Right-hand side data; `None` stands for the zero function.
#[derive(Default)]
pub struct ProblemData<T> {
    pub source: Option<ScalarFn<T>>,
    pub dirichlet: Option<ScalarFn<T>>,
    pub neumann: Option<ScalarFn<T>>,
}

impl<T: Real> ProblemData<T> {
    pub fn zero() -> Self {
        Self {
            source: None,
            dirichlet: None,
            neumann: None,
        }
    }

    /// `f = 0`, `t = 0`, `g ≡ value`.
    pub fn constant_dirichlet(value: T) -> Self {
        Self {
            dirichlet: Some(Box::new(move |_| value)),
            ..Self::zero()
        }
    }

    pub fn with_source(mut self, f: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.source = Some(Box::new(f));
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.dirichlet = Some(Box::new(g));
        self
    }

    pub fn with_neumann(mut self, t: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        self.neumann = Some(Box::new(t));
        self
    }
}

/// A grid together with its DoF layout and cached element integrals.
pub struct Discretization<'g, T: Real> {
    grid: Grid,
    geometry: &'g dyn Geometry<T>,
    settings: QuadratureSettings,
    dofs: DofMap,
    constraints: ConstraintMap<T>,
    maps: Vec<ElementMap<T>>,
    integrals: Vec<ElementIntegrals<T>>,
}

impl<'g, T: Real> Discretization<'g, T> {
    pub fn new(
        grid: Grid,
        geometry: &'g dyn Geometry<T>,
        settings: QuadratureSettings,
    ) -> Result<Self> {
        let (dofs, constraints) = build_dof_map::<T>(&grid)?;
        let maps = grid
            .leaves()
            .iter()
            .map(|q| dofs.element_map(&constraints, q))
            .collect::<Result<Vec<_>>>()?;
        let integrals = grid
            .leaves()
            .iter()
            .map(|q| ElementIntegrals::compute(&q.rect(), geometry, &settings))
            .collect();
        Ok(Self {
            grid,
            geometry,
            settings,
            dofs,
            constraints,
            maps,
            integrals,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn geometry(&self) -> &'g dyn Geometry<T> {
        self.geometry
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn constraints(&self) -> &ConstraintMap<T> {
        &self.constraints
    }

    pub fn n_dof(&self) -> usize {
        self.dofs.n_dof()
    }

    pub fn leaves(&self) -> &[Quadrant] {
        self.grid.leaves()
    }

    pub fn element_map(&self, leaf: usize) -> &ElementMap<T> {
        &self.maps[leaf]
    }

    pub fn integrals(&self, leaf: usize) -> &ElementIntegrals<T> {
        &self.integrals[leaf]
    }

    /// Leaf indices (Morton order) cut by the Dirichlet boundary.
    pub fn dirichlet_cut_cells(&self) -> Vec<usize> {
        (0..self.integrals.len())
            .filter(|&k| self.integrals[k].is_dirichlet_cut())
            .collect()
    }

    /// Leaf indices cut by any part of the boundary.
    pub fn cut_cells(&self) -> Vec<usize> {
        (0..self.integrals.len())
            .filter(|&k| self.integrals[k].is_cut())
            .collect()
    }

    fn lambda_for(&self, field: &StabilizationField<T>, leaf: usize) -> Result<T> {
        field
            .value(&self.grid.leaves()[leaf])
            .ok_or(Error::MissingStabilization(leaf))
    }

    /// Global system matrix for the given stabilization field.
    pub fn assemble_matrix(&self, field: &StabilizationField<T>) -> Result<CsrMatrix<T>> {
        let mut triplets: Vec<Triplet<T>> = Vec::with_capacity(self.integrals.len() * 20);
        for (k, (ints, map)) in self.integrals.iter().zip(&self.maps).enumerate() {
            let ae = if ints.is_dirichlet_cut() {
                ints.matrix(self.lambda_for(field, k)?)
            } else {
                ints.stiffness
            };
            scatter_matrix(&ae, map, &mut triplets);
        }
        let n = self.n_dof();
        Ok(CsrMatrix::from_triplets(n, n, triplets))
    }

    /// Load vector; zero data contributes exact zeros.
    pub fn assemble_load(
        &self,
        field: &StabilizationField<T>,
        data: &ProblemData<T>,
    ) -> Result<Vec<T>> {
        let mut b = vec![T::zero(); self.n_dof()];
        let (nodes, weights) = gauss_legendre::<T>(self.settings.gauss_order);
        for (k, (ints, map)) in self.integrals.iter().zip(&self.maps).enumerate() {
            let rect = self.grid.leaves()[k].rect::<T>();
            let mut be = [T::zero(); 4];
            if let Some(f) = &data.source {
                visit_volume_rule(
                    &rect,
                    self.geometry,
                    self.settings.max_depth,
                    &nodes,
                    &weights,
                    &mut |p, w, a| {
                        let (v, _) = shape_at(&rect, p);
                        let s = a * w * f(p);
                        for i in 0..4 {
                            be[i] += s * v[i];
                        }
                    },
                );
            }
            let lambda = if ints.is_dirichlet_cut() && data.dirichlet.is_some() {
                Some(self.lambda_for(field, k)?)
            } else {
                None
            };
            let s = &ints.surface;
            for q in 0..s.len() {
                let (v, g) = shape_at(&rect, s.points[q]);
                let w = s.weights[q];
                match s.kinds[q] {
                    BoundaryKind::Neumann => {
                        if let Some(t) = &data.neumann {
                            let tv = w * t(s.points[q]);
                            for i in 0..4 {
                                be[i] += tv * v[i];
                            }
                        }
                    }
                    BoundaryKind::Dirichlet => {
                        if let (Some(gd), Some(lam)) = (&data.dirichlet, lambda) {
                            let gv = w * gd(s.points[q]);
                            let n = s.normals[q];
                            for i in 0..4 {
                                let dn = g[i][0] * n.x + g[i][1] * n.y;
                                be[i] += gv * (lam * v[i] - dn);
                            }
                        }
                    }
                }
            }
            for i in 0..4 {
                for &(a, w) in &map.local[i] {
                    b[map.globals[a]] += w * be[i];
                }
            }
        }
        Ok(b)
    }

    pub fn assemble_system(
        &self,
        field: &StabilizationField<T>,
        data: &ProblemData<T>,
    ) -> Result<(CsrMatrix<T>, Vec<T>)> {
        Ok((
            self.assemble_matrix(field)?,
            self.assemble_load(field, data)?,
        ))
    }

    /// Value of the discrete function `x` at `p` inside leaf `leaf`.
    pub fn evaluate(&self, x: &[T], leaf: usize, p: Point<T>) -> T {
        let rect = self.grid.leaves()[leaf].rect::<T>();
        let (v, _) = shape_at(&rect, p);
        let c = self.maps[leaf].corner_values(x);
        (0..4).map(|i| v[i] * c[i]).sum()
    }

    /// `‖u_h - u‖_{L2(Ω)}` over physical quadrature points only.
    pub fn physical_l2_error(&self, x: &[T], exact: impl Fn(Point<T>) -> T) -> T {
        let (nodes, weights) = gauss_legendre::<T>(self.settings.gauss_order.max(3));
        let mut err = T::zero();
        for (k, q) in self.grid.leaves().iter().enumerate() {
            let rect = q.rect::<T>();
            let c = self.maps[k].corner_values(x);
            visit_volume_rule(
                &rect,
                self.geometry,
                self.settings.max_depth,
                &nodes,
                &weights,
                &mut |p, w, a| {
                    if a != T::one() {
                        return;
                    }
                    let (v, _) = shape_at(&rect, p);
                    let uh: T = (0..4).map(|i| v[i] * c[i]).sum();
                    let d = uh - exact(p);
                    err += w * d * d;
                },
            );
        }
        err.sqrt()
    }

    /// DoFs whose constrained basis function has support touching the
    /// physical domain.
    pub fn physical_dofs(&self) -> Vec<bool> {
        let mut phys = vec![false; self.n_dof()];
        for (ints, map) in self.integrals.iter().zip(&self.maps) {
            if ints.class != CellClass::Outside {
                for &g in &map.globals {
                    phys[g] = true;
                }
            }
        }
        phys
    }
}

fn scatter_matrix<T: Real>(ae: &Mat4<T>, map: &ElementMap<T>, out: &mut Vec<Triplet<T>>) {
    if !map.has_hanging() {
        for i in 0..4 {
            let gi = map.globals[map.local[i][0].0];
            for j in 0..4 {
                out.push((gi, map.globals[map.local[j][0].0], ae[i][j]));
            }
        }
        return;
    }
    let block = map.constrain_matrix(ae);
    for (a, row) in block.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            out.push((map.globals[a], map.globals[b], v));
        }
    }
}
