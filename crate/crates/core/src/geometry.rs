//! Implicit geometry of the physical domain inside the unit square.

use serde::{Deserialize, Serialize};

use crate::quadrature::gauss_legendre;
use crate::{Error, Real, Result};

/// Angular sub-intervals shorter than this are treated as tangential contact.
const TANGENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point<T> {
        let half = T::lit(0.5);
        Point::new(half * (self.x0 + self.x1), half * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn corners(&self) -> [Point<T>; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ]
    }

    /// The four quadrants in Morton order (SW, SE, NW, NE).
    pub fn children(&self) -> [Rect<T>; 4] {
        let c = self.center();
        [
            Rect::new(self.x0, self.y0, c.x, c.y),
            Rect::new(c.x, self.y0, self.x1, c.y),
            Rect::new(self.x0, c.y, c.x, self.y1),
            Rect::new(c.x, c.y, self.x1, self.y1),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Inside,
    Outside,
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Boundary integration points restricted to one cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceQuadrature<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub normals: Vec<Point<T>>,
    pub kinds: Vec<BoundaryKind>,
}

impl<T: Real> SurfaceQuadrature<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.kinds.contains(&BoundaryKind::Dirichlet)
    }

    pub fn push(&mut self, p: Point<T>, w: T, n: Point<T>, kind: BoundaryKind) {
        self.points.push(p);
        self.weights.push(w);
        self.normals.push(n);
        self.kinds.push(kind);
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

/// What the discretization needs to know about the physical domain.
pub trait Geometry<T: Real>: Send + Sync {
    /// Negative inside, zero on the boundary, positive outside.
    fn signed_distance(&self, p: Point<T>) -> T;

    fn classify_cell(&self, cell: &Rect<T>) -> CellClass;

    /// Boundary points inside `cell`; empty when the boundary misses it.
    fn boundary_quadrature(&self, cell: &Rect<T>, points_per_arc: usize) -> SurfaceQuadrature<T>;

    /// Penalization factor of the fictitious-domain formulation.
    fn alpha_fict(&self) -> T;

    fn alpha_at(&self, p: Point<T>) -> T {
        if self.signed_distance(p) <= T::zero() {
            T::one()
        } else {
            self.alpha_fict()
        }
    }
}

/// A disk `|p - center| <= radius` inside the unit square whose boundary is
/// Dirichlet on the arc `[theta_a, theta_b)` and Neumann elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitDomain<T> {
    center: Point<T>,
    radius: T,
    theta_a: T,
    theta_b: T,
    alpha_fict: T,
}

impl<T: Real> ImplicitDomain<T> {
    pub fn new(center: Point<T>, radius: T, theta_a: T, theta_b: T, alpha_fict: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidGeometry(format!(
                "radius {radius} must be positive"
            )));
        }
        let inside = |c: T| c - radius > T::zero() && c + radius < T::one();
        if !inside(center.x) || !inside(center.y) {
            return Err(Error::InvalidGeometry(
                "disk must lie strictly inside the unit square".into(),
            ));
        }
        if !(theta_b >= theta_a) {
            return Err(Error::InvalidGeometry(format!(
                "Dirichlet arc [{theta_a}, {theta_b}) is reversed"
            )));
        }
        if !(alpha_fict > T::zero() && alpha_fict <= T::one()) {
            return Err(Error::InvalidGeometry(format!(
                "alpha_fict {alpha_fict} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            center,
            radius,
            theta_a,
            theta_b,
            alpha_fict,
        })
    }

    pub fn center(&self) -> Point<T> {
        self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dirichlet_arc(&self) -> (T, T) {
        (self.theta_a, self.theta_b)
    }

    /// Same circle with a different Dirichlet arc.
    pub fn with_dirichlet_arc(&self, theta_a: T, theta_b: T) -> Result<Self> {
        Self::new(self.center, self.radius, theta_a, theta_b, self.alpha_fict)
    }

    pub fn is_dirichlet_angle(&self, theta: T) -> bool {
        let span = self.theta_b - self.theta_a;
        if span >= T::two_pi() {
            return true;
        }
        let t = wrap_angle(theta - self.theta_a);
        t < span
    }

    pub fn boundary_kind(&self, theta: T) -> BoundaryKind {
        if self.is_dirichlet_angle(theta) {
            BoundaryKind::Dirichlet
        } else {
            BoundaryKind::Neumann
        }
    }

    pub fn point_at(&self, theta: T) -> Point<T> {
        Point::new(
            self.center.x + self.radius * theta.cos(),
            self.center.y + self.radius * theta.sin(),
        )
    }

    /// Angular intervals `[a, b) ⊂ [0, 2π)` of the circle inside `cell`,
    /// split at the Dirichlet arc ends so each carries a single kind.
    pub fn arc_intervals(&self, cell: &Rect<T>) -> Vec<(T, T)> {
        let two_pi = T::two_pi();
        let (cx, cy, r) = (self.center.x, self.center.y, self.radius);
        let mut breaks = vec![
            T::zero(),
            two_pi,
            wrap_angle(self.theta_a),
            wrap_angle(self.theta_b),
        ];
        for c in [cell.x0, cell.x1] {
            let d = (c - cx) / r;
            if d.abs() <= T::one() {
                let base = d.acos();
                breaks.push(wrap_angle(base));
                breaks.push(wrap_angle(-base));
            }
        }
        for c in [cell.y0, cell.y1] {
            let d = (c - cy) / r;
            if d.abs() <= T::one() {
                let base = d.asin();
                breaks.push(wrap_angle(base));
                breaks.push(wrap_angle(T::pi() - base));
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
        breaks.dedup();

        let tol = T::lit(TANGENCY_TOL);
        let half = T::lit(0.5);
        breaks
            .windows(2)
            .map(|w| (w[0], w[1]))
            .filter(|&(a, b)| b - a > tol && cell.contains(self.point_at(half * (a + b))))
            .collect()
    }
}

impl ImplicitDomain<f64> {
    /// Circle of radius 0.3 centered in the unit square, Dirichlet on the
    /// left quarter `[3π/4, 5π/4)`, fictitious penalization `1e-10`.
    pub fn default_circle() -> Self {
        use std::f64::consts::PI;
        Self::new(Point::new(0.5, 0.5), 0.3, 0.75 * PI, 1.25 * PI, 1e-10)
            .expect("default geometry is valid")
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut t = theta % two_pi;
    if t < T::zero() {
        t += two_pi;
    }
    if t >= two_pi {
        t -= two_pi;
    }
    t
}

impl<T: Real> Geometry<T> for ImplicitDomain<T> {
    fn signed_distance(&self, p: Point<T>) -> T {
        p.dist(self.center) - self.radius
    }

    fn classify_cell(&self, cell: &Rect<T>) -> CellClass {
        let (cx, cy) = (self.center.x, self.center.y);
        let nearest = Point::new(cx.max(cell.x0).min(cell.x1), cy.max(cell.y0).min(cell.y1));
        let dmin = nearest.dist(self.center);
        let far_x = if (cx - cell.x0).abs() > (cx - cell.x1).abs() {
            cell.x0
        } else {
            cell.x1
        };
        let far_y = if (cy - cell.y0).abs() > (cy - cell.y1).abs() {
            cell.y0
        } else {
            cell.y1
        };
        let dmax = Point::new(far_x, far_y).dist(self.center);
        if dmax <= self.radius {
            CellClass::Inside
        } else if dmin > self.radius {
            CellClass::Outside
        } else {
            CellClass::Cut
        }
    }

    fn boundary_quadrature(&self, cell: &Rect<T>, points_per_arc: usize) -> SurfaceQuadrature<T> {
        let mut q = SurfaceQuadrature::default();
        if self.classify_cell(cell) != CellClass::Cut {
            return q;
        }
        let (nodes, weights) = gauss_legendre::<T>(points_per_arc);
        let half = T::lit(0.5);
        for (a, b) in self.arc_intervals(cell) {
            let mid = half * (a + b);
            let half_len = half * (b - a);
            let kind = self.boundary_kind(mid);
            for (&xi, &w) in nodes.iter().zip(&weights) {
                let theta = mid + half_len * xi;
                let normal = Point::new(theta.cos(), theta.sin());
                q.push(
                    self.point_at(theta),
                    w * self.radius * half_len,
                    normal,
                    kind,
                );
            }
        }
        q
    }

    fn alpha_fict(&self) -> T {
        self.alpha_fict
    }

    /// Points within rounding of the circle count as physical.
    fn alpha_at(&self, p: Point<T>) -> T {
        let slack = T::lit(8.0) * T::epsilon() * self.radius;
        if self.signed_distance(p) <= slack {
            T::one()
        } else {
            self.alpha_fict
        }
    }
}

/// The whole embedding square as physical domain: no immersed boundary and
/// no penalization. Used for boundary-conforming reference problems.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WholeSquare;

impl<T: Real> Geometry<T> for WholeSquare {
    fn signed_distance(&self, p: Point<T>) -> T {
        let d = [p.x, T::one() - p.x, p.y, T::one() - p.y];
        -d.into_iter().fold(T::infinity(), T::min)
    }

    fn classify_cell(&self, _cell: &Rect<T>) -> CellClass {
        CellClass::Inside
    }

    fn boundary_quadrature(&self, _cell: &Rect<T>, _points_per_arc: usize) -> SurfaceQuadrature<T> {
        SurfaceQuadrature::default()
    }

    fn alpha_fict(&self) -> T {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn domain() -> ImplicitDomain<f64> {
        ImplicitDomain::default_circle()
    }

    #[test]
    fn signed_distance_examples() {
        let d = domain();
        assert!((d.signed_distance(Point::new(0.5, 0.5)) + 0.3).abs() < 1e-15);
        assert!(d.signed_distance(Point::new(0.8, 0.5)).abs() < 1e-15);
        let expect = 0.5f64.sqrt() - 0.3;
        assert!((d.signed_distance(Point::new(0.0, 0.0)) - expect).abs() < 1e-15);
    }

    #[test]
    fn classify_examples() {
        let d = domain();
        assert_eq!(
            d.classify_cell(&Rect::new(0.0, 0.0, 0.25, 0.25)),
            CellClass::Outside
        );
        assert_eq!(
            d.classify_cell(&Rect::new(0.375, 0.375, 0.625, 0.625)),
            CellClass::Inside
        );
        assert_eq!(
            d.classify_cell(&Rect::new(0.6875, 0.4375, 0.8125, 0.5625)),
            CellClass::Cut
        );
    }

    #[test]
    fn alpha_examples() {
        let d = domain();
        assert_eq!(d.alpha_at(Point::new(0.5, 0.5)), 1.0);
        assert_eq!(d.alpha_at(Point::new(0.05, 0.05)), 1e-10);
        assert_eq!(d.alpha_at(Point::new(0.8, 0.5)), 1.0);
    }

    #[test]
    fn invalid_domains_rejected() {
        let c = Point::new(0.5, 0.5);
        assert!(ImplicitDomain::new(c, 0.0, 0.0, 1.0, 1e-10).is_err());
        assert!(ImplicitDomain::new(c, 0.5, 0.0, 1.0, 1e-10).is_err());
        assert!(ImplicitDomain::new(Point::new(0.2, 0.5), 0.3, 0.0, 1.0, 1e-10).is_err());
        assert!(ImplicitDomain::new(c, 0.3, 1.0, 0.0, 1e-10).is_err());
        assert!(ImplicitDomain::new(c, 0.3, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn dirichlet_classification_partitions_angles() {
        let d = domain();
        assert!(d.is_dirichlet_angle(PI));
        assert!(d.is_dirichlet_angle(0.75 * PI));
        assert!(!d.is_dirichlet_angle(1.25 * PI));
        assert!(!d.is_dirichlet_angle(0.0));
        assert!(d.is_dirichlet_angle(PI - 2.0 * PI));

        let wrap = d.with_dirichlet_arc(1.5 * PI, 2.5 * PI).unwrap();
        assert!(wrap.is_dirichlet_angle(0.0));
        assert!(wrap.is_dirichlet_angle(1.9 * PI));
        assert!(!wrap.is_dirichlet_angle(PI));

        let full = d.with_dirichlet_arc(0.0, 2.0 * PI).unwrap();
        assert!((0..100).all(|k| full.is_dirichlet_angle(k as f64 * 0.0731)));
    }

    #[test]
    fn uncut_cell_has_empty_boundary_rule() {
        let d = domain();
        assert!(d
            .boundary_quadrature(&Rect::new(0.0, 0.0, 0.25, 0.25), 4)
            .is_empty());
        assert!(d
            .boundary_quadrature(&Rect::new(0.4, 0.4, 0.6, 0.6), 4)
            .is_empty());
    }

    #[test]
    fn normal_at_angle_zero_is_radial() {
        let d = domain();
        // cell whose left edge passes near the rightmost point so that a
        // Gauss point sits close to theta = 0
        let q = d.boundary_quadrature(&Rect::new(0.75, 0.45, 0.85, 0.55), 4);
        assert!(!q.is_empty());
        for (p, n) in q.points.iter().zip(&q.normals) {
            assert!(((n.x * n.x + n.y * n.y) - 1.0).abs() < 1e-14);
            let radial = Point::new((p.x - 0.5) / 0.3, (p.y - 0.5) / 0.3);
            assert!((radial.x - n.x).abs() < 1e-12 && (radial.y - n.y).abs() < 1e-12);
        }
        let n0 = Point::new(0.0f64.cos(), 0.0f64.sin());
        assert_eq!(d.point_at(0.0), Point::new(0.8, 0.5));
        assert_eq!(n0, Point::new(1.0, 0.0));
    }

    #[test]
    fn circumference_is_recovered_on_a_uniform_grid() {
        let d = domain();
        for level in [3u32, 5, 6] {
            let n = 1usize << level;
            let h = 1.0 / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let cell = Rect::new(
                        i as f64 * h,
                        j as f64 * h,
                        (i + 1) as f64 * h,
                        (j + 1) as f64 * h,
                    );
                    let q = d.boundary_quadrature(&cell, 4);
                    assert!(q.weights.iter().all(|&w| w > 0.0));
                    total += q.total_weight();
                }
            }
            let exact = 2.0 * PI * 0.3;
            assert!(
                ((total - exact) / exact).abs() < 1e-10,
                "level {level}: {total}"
            );
        }
    }

    #[test]
    fn mirror_symmetry_across_horizontal_axis() {
        let d = domain().with_dirichlet_arc(0.0, 2.0 * PI).unwrap();
        let cell = Rect::new(0.25, 0.6875, 0.3125, 0.75);
        let mirrored = Rect::new(0.25, 0.25, 0.3125, 0.3125);
        let q = d.boundary_quadrature(&cell, 3);
        let m = d.boundary_quadrature(&mirrored, 3);
        assert_eq!(q.len(), m.len());
        assert!(!q.is_empty());
        let key = |p: &Point<f64>| (p.x * 1e9).round() as i64;
        let mut a: Vec<_> = q.points.iter().zip(&q.normals).zip(&q.weights).collect();
        let mut b: Vec<_> = m.points.iter().zip(&m.normals).zip(&m.weights).collect();
        a.sort_by_key(|((p, _), _)| key(p));
        b.sort_by_key(|((p, _), _)| key(p));
        for (((pa, na), wa), ((pb, nb), wb)) in a.into_iter().zip(b) {
            assert!((pa.x - pb.x).abs() < 1e-13);
            assert!((pa.y - (1.0 - pb.y)).abs() < 1e-13);
            assert!((na.x - nb.x).abs() < 1e-13 && (na.y + nb.y).abs() < 1e-13);
            assert!((wa - wb).abs() < 1e-14);
        }
    }

    #[test]
    fn arc_kinds_follow_dirichlet_arc() {
        let d = domain();
        // cell straddling theta = 3π/4 on the upper left
        let p = d.point_at(0.75 * PI);
        let cell = Rect::new(p.x - 0.02, p.y - 0.02, p.x + 0.02, p.y + 0.02);
        let q = d.boundary_quadrature(&cell, 2);
        let angle = |pt: &Point<f64>| wrap_angle((pt.y - 0.5).atan2(pt.x - 0.5));
        for (pt, kind) in q.points.iter().zip(&q.kinds) {
            let expected = if angle(pt) >= 0.75 * PI && angle(pt) < 1.25 * PI {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            };
            assert_eq!(*kind, expected);
        }
        assert!(q.kinds.contains(&BoundaryKind::Dirichlet));
        assert!(q.kinds.contains(&BoundaryKind::Neumann));
    }

    #[test]
    fn generic_over_f32() {
        let d = ImplicitDomain::<f32>::new(Point::new(0.5, 0.5), 0.3, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(
            d.classify_cell(&Rect::new(0.0, 0.0, 0.25, 0.25)),
            CellClass::Outside
        );
        let q = d.boundary_quadrature(&Rect::new(0.75, 0.45, 0.85, 0.55), 2);
        assert!(!q.is_empty());
    }
}
