//! Quadtree leaf meshes of the unit square: adaptive refinement, 2:1 edge
//! balance, coarsening and nested hierarchies.

mod dofs;
mod quadrant;

pub use dofs::{build_dof_map, ConstraintMap, DofMap, ElementMap, Node, NodeDofs};
pub use quadrant::{lattice_coord, Quadrant, DEPTH_MAX, LATTICE};

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};

use crate::geometry::{CellClass, Geometry};
use crate::{Error, Real, Result};

/// A set of quadtree leaves tiling the unit square, kept in Morton order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    leaves: Vec<Quadrant>,
    lookup: HashSet<Quadrant>,
}

impl Grid {
    /// Builds a grid from leaves; the leaves must tile the unit square.
    pub fn from_leaves(leaves: impl IntoIterator<Item = Quadrant>) -> Result<Self> {
        let grid = Self::from_leaves_unchecked(leaves);
        grid.check_tiling()?;
        Ok(grid)
    }

    fn from_leaves_unchecked(leaves: impl IntoIterator<Item = Quadrant>) -> Self {
        let mut leaves: Vec<Quadrant> = leaves.into_iter().collect();
        leaves.sort_by_key(|q| q.morton());
        leaves.dedup();
        let lookup = leaves.iter().copied().collect();
        Self { leaves, lookup }
    }

    fn check_tiling(&self) -> Result<()> {
        let area: u128 = self.leaves.iter().map(|q| (q.size() as u128).pow(2)).sum();
        if area != (LATTICE as u128).pow(2) {
            return Err(Error::NotNested(
                "leaves do not cover the unit square".into(),
            ));
        }
        for q in &self.leaves {
            let mut a = *q;
            while let Some(p) = a.parent() {
                if self.lookup.contains(&p) {
                    return Err(Error::NotNested(format!("leaf {q:?} overlaps leaf {p:?}")));
                }
                a = p;
            }
        }
        Ok(())
    }

    /// `4^levels` congruent leaves.
    pub fn uniform(levels: u8) -> Result<Self> {
        if levels > DEPTH_MAX {
            return Err(Error::DepthExceeded {
                level: levels,
                max: DEPTH_MAX,
            });
        }
        let n = 1u32 << levels;
        let size = LATTICE >> levels;
        let leaves =
            (0..n).flat_map(|j| (0..n).map(move |i| Quadrant::new(levels, i * size, j * size)));
        Ok(Self::from_leaves_unchecked(leaves))
    }

    pub fn leaves(&self) -> &[Quadrant] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn contains_leaf(&self, q: &Quadrant) -> bool {
        self.lookup.contains(q)
    }

    pub fn max_level(&self) -> u8 {
        self.leaves.iter().map(|q| q.level).max().unwrap_or(0)
    }

    pub fn min_level(&self) -> u8 {
        self.leaves.iter().map(|q| q.level).min().unwrap_or(0)
    }

    /// The leaf equal to or containing `q`, if `q` is not strictly refined.
    pub fn leaf_covering(&self, q: &Quadrant) -> Option<Quadrant> {
        let mut a = *q;
        loop {
            if self.lookup.contains(&a) {
                return Some(a);
            }
            a = a.parent()?;
        }
    }

    /// A leaf whose closure contains the lattice point `(x, y)`.
    pub fn leaf_containing_point(&self, x: u32, y: u32) -> Option<Quadrant> {
        let cx = x.min(LATTICE - 1);
        let cy = y.min(LATTICE - 1);
        self.leaf_covering(&Quadrant::new(DEPTH_MAX, cx, cy))
    }

    /// Splits every leaf for which `pred` holds, then restores balance.
    pub fn refine_where(&self, mut pred: impl FnMut(&Quadrant) -> bool) -> Result<Self> {
        let mut out = Vec::with_capacity(self.leaves.len());
        for q in &self.leaves {
            if pred(q) {
                out.extend(q.children()?);
            } else {
                out.push(*q);
            }
        }
        Self::from_leaves_unchecked(out).enforce_balance()
    }

    /// Splits every leaf cut by the boundary of `geometry` once.
    pub fn refine_toward_boundary<T: Real, G: Geometry<T> + ?Sized>(
        &self,
        geometry: &G,
    ) -> Result<Self> {
        self.refine_where(|q| geometry.classify_cell(&q.rect::<T>()) == CellClass::Cut)
    }

    /// Leaves that violate the 2:1 edge balance against a finer neighbor.
    fn balance_violations(&self) -> BTreeSet<Quadrant> {
        let mut split = BTreeSet::new();
        for q in &self.leaves {
            if q.level < 2 {
                continue;
            }
            for n in q.edge_neighbors() {
                if let Some(a) = self.leaf_covering(&n) {
                    if a.level + 1 < q.level {
                        split.insert(a);
                    }
                }
            }
        }
        split
    }

    pub fn is_balanced(&self) -> bool {
        self.balance_violations().is_empty()
    }

    /// Minimal refinement making edge-adjacent leaves differ by at most one level.
    pub fn enforce_balance(&self) -> Result<Self> {
        let mut grid = self.clone();
        loop {
            let split = grid.balance_violations();
            if split.is_empty() {
                return Ok(grid);
            }
            let mut leaves = Vec::with_capacity(grid.leaves.len() + 3 * split.len());
            for q in &grid.leaves {
                if split.contains(q) {
                    leaves.extend(q.children()?);
                } else {
                    leaves.push(*q);
                }
            }
            grid = Self::from_leaves_unchecked(leaves);
        }
    }

    /// Merges every complete sibling quadruple at the maximum level.
    pub fn coarsen_max_level(&self) -> Result<Self> {
        if self.leaves.len() <= 1 {
            return Err(Error::Coarsen("grid has a single leaf".into()));
        }
        if !self.is_balanced() {
            return Err(Error::Unbalanced);
        }
        let max = self.max_level();
        let mut merged = BTreeSet::new();
        for q in self.leaves.iter().filter(|q| q.level == max) {
            let parent = q.parent().expect("max level is positive");
            if !merged.contains(&parent)
                && parent
                    .children()
                    .expect("parent is above max depth")
                    .iter()
                    .all(|c| self.lookup.contains(c))
            {
                merged.insert(parent);
            }
        }
        let leaves = self
            .leaves
            .iter()
            .filter(|q| q.level != max || !merged.contains(&q.parent().expect("positive level")))
            .copied()
            .chain(merged.iter().copied());
        Self::from_leaves_unchecked(leaves).enforce_balance()
    }

    /// Every leaf of `self` lies inside exactly one leaf of `coarse`.
    pub fn is_nested_in(&self, coarse: &Grid) -> bool {
        self.leaves
            .iter()
            .all(|q| coarse.leaf_covering(q).is_some())
    }

    /// Writes one `level x_anchor y_anchor` line per leaf (anchors in lattice units).
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        for q in &self.leaves {
            writeln!(w, "{} {} {}", q.level, q.x, q.y)?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let mut leaves = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Parse(format!("bad grid line `{line}`")))
                })
                .collect::<Result<_>>()?;
            let [level, x, y] = fields[..] else {
                return Err(Error::Parse(format!("bad grid line `{line}`")));
            };
            let level = u8::try_from(level).map_err(|_| Error::Parse(line.clone()))?;
            leaves.push(Quadrant::checked(level, x, y)?);
        }
        Self::from_leaves(leaves)
    }
}

/// Nested grids ordered coarse to fine.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    grids: Vec<Grid>,
}

impl GridHierarchy {
    /// `[τ_0, …, τ_{n-1}]` with `τ_{n-1} = fine`, each coarser grid obtained
    /// by coarsening the maximum level of the next finer one.
    pub fn build(fine: Grid, n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::Coarsen(format!(
                "a hierarchy needs at least two levels, got {n_levels}"
            )));
        }
        let mut grids = vec![fine];
        while grids.len() < n_levels {
            let next = grids.last().expect("non-empty").coarsen_max_level()?;
            grids.push(next);
        }
        grids.reverse();
        Ok(Self { grids })
    }

    pub fn from_grids(grids: Vec<Grid>) -> Result<Self> {
        for pair in grids.windows(2) {
            if !pair[1].is_nested_in(&pair[0]) {
                return Err(Error::NotNested("consecutive grids are not nested".into()));
            }
        }
        Ok(Self { grids })
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn finest(&self) -> &Grid {
        self.grids.last().expect("hierarchy is never empty")
    }

    pub fn into_grids(self) -> Vec<Grid> {
        self.grids
    }
}

/// Uniform refinement to `uniform_levels` followed by `adaptive_levels`
/// rounds of refinement toward the boundary.
pub fn adaptive_grid<T: Real, G: Geometry<T> + ?Sized>(
    geometry: &G,
    uniform_levels: u8,
    adaptive_levels: u8,
) -> Result<Grid> {
    let mut g = Grid::uniform(uniform_levels)?;
    for _ in 0..adaptive_levels {
        g = g.refine_toward_boundary::<T, G>(geometry)?;
    }
    Ok(g)
}
