//! Gauss rules and adaptive space-tree volume quadrature for cut cells.

use crate::geometry::{CellClass, Geometry, Point, Rect};
use crate::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z_old = z;
            z = z_old - p1 / dp;
            if (z - z_old).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (
        nodes.into_iter().map(T::lit).collect(),
        weights.into_iter().map(T::lit).collect(),
    )
}

/// Volume integration points of one cell with their penalization factors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadratureRule<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub alphas: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `Σ α w`
    pub fn penalized_measure(&self) -> T {
        self.weights
            .iter()
            .zip(&self.alphas)
            .map(|(&w, &a)| w * a)
            .sum()
    }

    /// Weight carried by points with `α = 1`.
    pub fn physical_measure(&self) -> T {
        self.weights
            .iter()
            .zip(&self.alphas)
            .filter(|(_, &a)| a == T::one())
            .map(|(&w, _)| w)
            .sum()
    }
}

/// Tensor Gauss rule on a rectangle.
pub fn tensor_rule<T: Real>(
    rect: &Rect<T>,
    nodes: &[T],
    weights: &[T],
    mut emit: impl FnMut(Point<T>, T),
) {
    let half = T::lit(0.5);
    let (cx, cy) = (half * (rect.x0 + rect.x1), half * (rect.y0 + rect.y1));
    let (hx, hy) = (half * rect.width(), half * rect.height());
    for (&eta, &wy) in nodes.iter().zip(weights) {
        for (&xi, &wx) in nodes.iter().zip(weights) {
            emit(Point::new(cx + hx * xi, cy + hy * eta), wx * wy * hx * hy);
        }
    }
}

/// Visits the points of the adaptive volume rule without materializing it.
///
/// Sub-cells are split into four while they are cut by the boundary and
/// their depth below `cell` is less than `max_depth`; terminal sub-cells get
/// a tensor Gauss rule with `α` sampled per point.
pub fn visit_volume_rule<T: Real, G: Geometry<T> + ?Sized>(
    cell: &Rect<T>,
    geometry: &G,
    max_depth: usize,
    nodes: &[T],
    weights: &[T],
    visit: &mut impl FnMut(Point<T>, T, T),
) {
    fn recurse<T: Real, G: Geometry<T> + ?Sized>(
        sub: &Rect<T>,
        depth: usize,
        geometry: &G,
        max_depth: usize,
        nodes: &[T],
        weights: &[T],
        visit: &mut impl FnMut(Point<T>, T, T),
    ) {
        let class = geometry.classify_cell(sub);
        if class == CellClass::Cut && depth < max_depth {
            for child in sub.children() {
                recurse(
                    &child,
                    depth + 1,
                    geometry,
                    max_depth,
                    nodes,
                    weights,
                    visit,
                );
            }
            return;
        }
        match class {
            CellClass::Inside => tensor_rule(sub, nodes, weights, |p, w| visit(p, w, T::one())),
            CellClass::Outside => {
                let a = geometry.alpha_fict();
                tensor_rule(sub, nodes, weights, |p, w| visit(p, w, a))
            }
            CellClass::Cut => tensor_rule(sub, nodes, weights, |p, w| {
                visit(p, w, geometry.alpha_at(p))
            }),
        }
    }
    recurse(cell, 0, geometry, max_depth, nodes, weights, visit);
}

/// Adaptive volume rule on `cell` with `gauss_order` points per direction
/// on every terminal sub-cell.
pub fn volume_rule<T: Real, G: Geometry<T> + ?Sized>(
    cell: &Rect<T>,
    geometry: &G,
    max_depth: usize,
    gauss_order: usize,
) -> QuadratureRule<T> {
    let (nodes, weights) = gauss_legendre::<T>(gauss_order);
    let mut rule = QuadratureRule::default();
    visit_volume_rule(
        cell,
        geometry,
        max_depth,
        &nodes,
        &weights,
        &mut |p, w, a| {
            rule.points.push(p);
            rule.weights.push(w);
            rule.alphas.push(a);
        },
    );
    rule
}
