#![allow(dead_code)]

use fcmg::geometry::{BoundaryKind, CellClass, Geometry, Point, Rect, SurfaceQuadrature};
use fcmg::quadrature::gauss_legendre;

/// Physical region `x >= c`; the whole line `x = c` is Dirichlet boundary.
pub struct HalfPlane {
    pub c: f64,
    pub alpha_fict: f64,
}

impl Geometry<f64> for HalfPlane {
    fn signed_distance(&self, p: Point<f64>) -> f64 {
        self.c - p.x
    }

    fn classify_cell(&self, cell: &Rect<f64>) -> CellClass {
        if cell.x0 > self.c {
            CellClass::Inside
        } else if cell.x1 < self.c {
            CellClass::Outside
        } else {
            CellClass::Cut
        }
    }

    fn boundary_quadrature(&self, cell: &Rect<f64>, n: usize) -> SurfaceQuadrature<f64> {
        let mut q = SurfaceQuadrature::default();
        if self.c < cell.x0 || self.c > cell.x1 {
            return q;
        }
        let (x, w) = gauss_legendre::<f64>(n);
        let half = 0.5 * cell.height();
        let mid = 0.5 * (cell.y0 + cell.y1);
        for (xi, wi) in x.iter().zip(&w) {
            q.push(
                Point::new(self.c, mid + half * xi),
                wi * half,
                Point::new(-1.0, 0.0),
                BoundaryKind::Dirichlet,
            );
        }
        q
    }

    fn alpha_fict(&self) -> f64 {
        self.alpha_fict
    }
}

/// Largest eigenvalue of `(K, M + δI)`, `δ = 1e-12 ‖M‖`, by Cholesky
/// reduction with nalgebra.
pub fn perturbed_max_eig(k: &fcmg::DenseMatrix, m: &fcmg::DenseMatrix) -> f64 {
    use nalgebra::DMatrix;
    let n = k.dim();
    let km = DMatrix::from_fn(n, n, |i, j| k[(i, j)]);
    let norm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]).norm();
    let mm = DMatrix::from_fn(n, n, |i, j| {
        m[(i, j)] + if i == j { 1e-12 * norm } else { 0.0 }
    });
    let chol = nalgebra::Cholesky::new(mm).expect("perturbed mass is SPD");
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .expect("triangular factor is invertible");
    let b = &linv * km * linv.transpose();
    let b = (&b + b.transpose()) * 0.5;
    b.symmetric_eigenvalues().max()
}
