use crate::geometry::Rect;
use crate::{Error, Real, Result};

/// Deepest admissible refinement level.
pub const DEPTH_MAX: u8 = 29;
/// Side length of the unit square in lattice units.
pub const LATTICE: u32 = 1 << DEPTH_MAX;

/// A square cell of the quadtree; `x`, `y` is its lower-left corner in
/// lattice units.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct Quadrant {
    pub level: u8,
    pub x: u32,
    pub y: u32,
}

impl Quadrant {
    pub const fn root() -> Self {
        Self {
            level: 0,
            x: 0,
            y: 0,
        }
    }

    #[inline]
    pub(crate) const fn new(level: u8, x: u32, y: u32) -> Self {
        Self { level, x, y }
    }

    pub fn checked(level: u8, x: u32, y: u32) -> Result<Self> {
        if level > DEPTH_MAX {
            return Err(Error::DepthExceeded {
                level,
                max: DEPTH_MAX,
            });
        }
        let size = LATTICE >> level;
        if !x.is_multiple_of(size) || !y.is_multiple_of(size) || x >= LATTICE || y >= LATTICE {
            return Err(Error::Parse(format!("misaligned quadrant {level} {x} {y}")));
        }
        Ok(Self { level, x, y })
    }

    /// Side length in lattice units.
    #[inline]
    pub fn size(&self) -> u32 {
        LATTICE >> self.level
    }

    /// Side length in embedding units.
    pub fn h<T: Real>(&self) -> T {
        T::lit(1.0 / (1u64 << self.level) as f64)
    }

    pub fn rect<T: Real>(&self) -> Rect<T> {
        let s = self.size();
        Rect::new(
            lattice_coord(self.x),
            lattice_coord(self.y),
            lattice_coord(self.x + s),
            lattice_coord(self.y + s),
        )
    }

    pub fn parent(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        let ps = LATTICE >> (self.level - 1);
        Some(Self {
            level: self.level - 1,
            x: self.x / ps * ps,
            y: self.y / ps * ps,
        })
    }

    /// Children in Morton order (SW, SE, NW, NE).
    pub fn children(&self) -> Result<[Self; 4]> {
        if self.level >= DEPTH_MAX {
            return Err(Error::DepthExceeded {
                level: self.level + 1,
                max: DEPTH_MAX,
            });
        }
        let l = self.level + 1;
        let s = LATTICE >> l;
        Ok([
            Self::new(l, self.x, self.y),
            Self::new(l, self.x + s, self.y),
            Self::new(l, self.x, self.y + s),
            Self::new(l, self.x + s, self.y + s),
        ])
    }

    /// Same-size neighbors across each edge that lie inside the square.
    pub fn edge_neighbors(&self) -> impl Iterator<Item = Self> + '_ {
        let s = self.size() as i64;
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter_map(move |(dx, dy)| {
                let nx = self.x as i64 + dx * s;
                let ny = self.y as i64 + dy * s;
                let inside = |v: i64| v >= 0 && v < LATTICE as i64;
                (inside(nx) && inside(ny)).then(|| Self::new(self.level, nx as u32, ny as u32))
            })
    }

    /// Whether `other` is equal to or a descendant of `self`.
    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level
            && other.x >= self.x
            && other.x < self.x + self.size()
            && other.y >= self.y
            && other.y < self.y + self.size()
    }

    /// Corner lattice points counterclockwise from the lower left.
    pub fn corners(&self) -> [(u32, u32); 4] {
        let s = self.size();
        [
            (self.x, self.y),
            (self.x + s, self.y),
            (self.x + s, self.y + s),
            (self.x, self.y + s),
        ]
    }

    /// Z-order key of the anchor.
    pub fn morton(&self) -> u64 {
        spread(self.x) | (spread(self.y) << 1)
    }
}

fn spread(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Lattice coordinate to embedding coordinate.
pub fn lattice_coord<T: Real>(v: u32) -> T {
    T::lit(v as f64 / LATTICE as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_child_roundtrip() {
        let q = Quadrant::new(3, 3 * (LATTICE >> 3), 5 * (LATTICE >> 3));
        for c in q.children().unwrap() {
            assert_eq!(c.parent(), Some(q));
            assert!(q.contains(&c));
            assert!(!c.contains(&q));
        }
        assert_eq!(Quadrant::root().parent(), None);
        assert!(Quadrant::new(DEPTH_MAX, 0, 0).children().is_err());
    }

    #[test]
    fn morton_order_of_children() {
        let kids = Quadrant::root().children().unwrap();
        let keys: Vec<u64> = kids.iter().map(Quadrant::morton).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn neighbors_stay_inside() {
        let corner = Quadrant::new(2, 0, 0);
        assert_eq!(corner.edge_neighbors().count(), 2);
        let inner = Quadrant::new(2, LATTICE / 4, LATTICE / 4);
        assert_eq!(inner.edge_neighbors().count(), 4);
    }

    #[test]
    fn rect_of_quadrant() {
        let q = Quadrant::new(2, LATTICE / 2, LATTICE / 4);
        let r = q.rect::<f64>();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (0.5, 0.25, 0.75, 0.5));
        assert_eq!(q.h::<f64>(), 0.25);
        assert!(Quadrant::checked(2, 1, 0).is_err());
    }
}
