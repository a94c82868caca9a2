use std::collections::{HashMap, HashSet};

use super::{Grid, Quadrant};
use crate::{Error, Real, Result};

/// Lattice coordinates of a mesh vertex.
pub type Node = (u32, u32);

/// Global numbering of the non-hanging vertices, ordered by `(y, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    index: HashMap<Node, usize>,
    nodes: Vec<Node>,
}

impl DofMap {
    pub fn n_dof(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, node: Node) -> Option<usize> {
        self.index.get(&node).copied()
    }

    /// Vertex of a global DoF.
    pub fn node(&self, dof: usize) -> Node {
        self.nodes[dof]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

/// Hanging vertices and their two edge-endpoint masters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMap<T> {
    hanging: HashMap<Node, [(usize, T); 2]>,
}

impl<T: Real> ConstraintMap<T> {
    pub fn len(&self) -> usize {
        self.hanging.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hanging.is_empty()
    }

    pub fn masters(&self, node: Node) -> Option<&[(usize, T); 2]> {
        self.hanging.get(&node)
    }

    /// Hanging vertices sorted by `(y, x)`.
    pub fn hanging_nodes(&self) -> Vec<Node> {
        let mut v: Vec<Node> = self.hanging.keys().copied().collect();
        v.sort_by_key(|&(x, y)| (y, x));
        v
    }
}

/// How a vertex value is expressed in global DoFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeDofs<T> {
    Free(usize),
    Hanging([(usize, T); 2]),
}

/// Identifies shared vertices, detects hanging vertices on the edges of
/// coarser neighbors and numbers the remaining vertices contiguously.
pub fn build_dof_map<T: Real>(grid: &Grid) -> Result<(DofMap, ConstraintMap<T>)> {
    if !grid.is_balanced() {
        return Err(Error::Unbalanced);
    }
    let nodes: HashSet<Node> = grid.leaves().iter().flat_map(|q| q.corners()).collect();
    let mut hanging_edges: HashMap<Node, (Node, Node)> = HashMap::new();
    for q in grid.leaves() {
        let half = q.size() / 2;
        if half == 0 {
            continue;
        }
        let c = q.corners();
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            let mid = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
            if nodes.contains(&mid) {
                hanging_edges.insert(mid, (a, b));
            }
        }
    }
    let mut free: Vec<Node> = nodes
        .into_iter()
        .filter(|n| !hanging_edges.contains_key(n))
        .collect();
    free.sort_by_key(|&(x, y)| (y, x));
    let index: HashMap<Node, usize> = free.iter().enumerate().map(|(i, &n)| (n, i)).collect();

    let half = T::lit(0.5);
    let mut hanging = HashMap::with_capacity(hanging_edges.len());
    for (node, (a, b)) in hanging_edges {
        let ia = index
            .get(&a)
            .ok_or(Error::UnresolvedHanging(node.0, node.1))?;
        let ib = index
            .get(&b)
            .ok_or(Error::UnresolvedHanging(node.0, node.1))?;
        hanging.insert(node, [(*ia, half), (*ib, half)]);
    }
    Ok((DofMap { index, nodes: free }, ConstraintMap { hanging }))
}

impl DofMap {
    pub fn node_dofs<T: Real>(
        &self,
        constraints: &ConstraintMap<T>,
        node: Node,
    ) -> Result<NodeDofs<T>> {
        if let Some(i) = self.index_of(node) {
            return Ok(NodeDofs::Free(i));
        }
        constraints
            .masters(node)
            .map(|m| NodeDofs::Hanging(*m))
            .ok_or(Error::UnresolvedHanging(node.0, node.1))
    }

    /// Constraint-resolved DoF layout of one leaf.
    pub fn element_map<T: Real>(
        &self,
        constraints: &ConstraintMap<T>,
        leaf: &Quadrant,
    ) -> Result<ElementMap<T>> {
        let mut globals: Vec<usize> = Vec::with_capacity(6);
        let mut local: [Vec<(usize, T)>; 4] = Default::default();
        let slot = |g: usize, globals: &mut Vec<usize>| {
            globals.iter().position(|&x| x == g).unwrap_or_else(|| {
                globals.push(g);
                globals.len() - 1
            })
        };
        for (k, node) in leaf.corners().into_iter().enumerate() {
            match self.node_dofs(constraints, node)? {
                NodeDofs::Free(i) => local[k].push((slot(i, &mut globals), T::one())),
                NodeDofs::Hanging(m) => {
                    for (i, w) in m {
                        local[k].push((slot(i, &mut globals), w));
                    }
                }
            }
        }
        Ok(ElementMap { globals, local })
    }
}

/// Local-to-global map of a leaf with hanging corners expanded to masters.
///
/// `local[k]` lists `(position in globals, weight)` for corner `k`; the
/// implied constraint matrix `C` has `C[k][pos] = weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMap<T> {
    pub globals: Vec<usize>,
    pub local: [Vec<(usize, T)>; 4],
}

impl<T: Real> ElementMap<T> {
    pub fn has_hanging(&self) -> bool {
        self.local.iter().any(|l| l.len() > 1)
    }

    /// `Cᵀ A_e C` as a dense block over `globals`.
    pub fn constrain_matrix(&self, ae: &[[T; 4]; 4]) -> Vec<Vec<T>> {
        let m = self.globals.len();
        let mut out = vec![vec![T::zero(); m]; m];
        for i in 0..4 {
            for j in 0..4 {
                let v = ae[i][j];
                if v == T::zero() {
                    continue;
                }
                for &(a, wa) in &self.local[i] {
                    for &(b, wb) in &self.local[j] {
                        out[a][b] += wa * wb * v;
                    }
                }
            }
        }
        out
    }

    /// `Cᵀ b_e` over `globals`.
    pub fn constrain_vector(&self, be: &[T; 4]) -> Vec<T> {
        let mut out = vec![T::zero(); self.globals.len()];
        for i in 0..4 {
            for &(a, wa) in &self.local[i] {
                out[a] += wa * be[i];
            }
        }
        out
    }

    /// Values at the four corners of a global coefficient vector.
    pub fn corner_values(&self, x: &[T]) -> [T; 4] {
        let mut v = [T::zero(); 4];
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = self.local[k]
                .iter()
                .map(|&(a, w)| w * x[self.globals[a]])
                .sum();
        }
        v
    }
}
