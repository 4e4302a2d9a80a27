use crate::error::{domain, Result};

use super::measure::{merge_atoms, DensityPiece, TreeMeasure, VertexMeasure};
use super::metric::{MetricTree, TreeBuilder, TreePoint, POINT_TOL};
use super::OrderedTree;

/// Where a host edge sits inside the subtree: host offsets `>= base` on the
/// edge map to sub point `(edge, offset + (host_offset - base))`.
#[derive(Debug, Clone, Copy)]
struct HostSlot {
    edge: usize,
    offset: f64,
    base: f64,
}

/// The subtree spanned by the root and a list of target points of a metric
/// tree, with degree-2 points contracted. The targets become its marks.
#[derive(Debug, Clone)]
pub struct MetricSubtree {
    tree: MetricTree,
    host_targets: Vec<TreePoint>,
    host_nodes: Vec<TreePoint>,
    slots: Vec<Option<HostSlot>>,
    host_root: usize,
    host_fingerprint: (usize, u64),
}

/// Builds the union of root paths to `targets`.
pub fn spanning_subtree(t: &MetricTree, targets: &[TreePoint]) -> Result<MetricSubtree> {
    if targets.is_empty() {
        return domain("spanning subtree needs at least one target");
    }
    let targets = targets
        .iter()
        .map(|p| t.point(p.edge, p.offset))
        .collect::<Result<Vec<_>>>()?;
    let n = t.len();
    let mut full = vec![false; n];
    // Lowest covered offset on edges that are only partly covered.
    let mut partial = vec![f64::INFINITY; n];
    for p in &targets {
        if p.is_node() {
            let mut v = p.edge;
            while !full[v] {
                full[v] = true;
                match t.parent(v) {
                    Some(u) => v = u,
                    None => break,
                }
            }
        } else {
            partial[p.edge] = partial[p.edge].min(p.offset);
            let mut v = t.parent(p.edge).unwrap();
            while !full[v] {
                full[v] = true;
                match t.parent(v) {
                    Some(u) => v = u,
                    None => break,
                }
            }
        }
    }
    full[t.root()] = true;

    let mut b = TreeBuilder::new();
    let mut bid = vec![usize::MAX; n];
    // (builder node, host node, base offset) for every edge piece.
    let mut entries = vec![(b.root(), t.root(), 0.0)];
    let mut host_of_builder = vec![TreePoint::node(t.root())];
    bid[t.root()] = b.root();
    for v in t.preorder() {
        let Some(p) = t.parent(v) else { continue };
        if full[v] {
            bid[v] = b.add_child(bid[p], t.edge_length(v));
            entries.push((bid[v], v, 0.0));
            host_of_builder.push(TreePoint::node(v));
        } else if partial[v].is_finite() {
            let lo = partial[v];
            let id = b.add_child(bid[p], t.edge_length(v) - lo);
            entries.push((id, v, lo));
            host_of_builder.push(TreePoint { edge: v, offset: lo });
        }
    }
    let ids: Vec<usize> = (0..b.len()).collect();
    let (tree, pts) = b.finish(&ids, &[]);
    let mut slots = vec![None; n];
    for &(id, v, base) in &entries {
        slots[v] = Some(HostSlot {
            edge: pts[id].edge,
            offset: pts[id].offset,
            base,
        });
    }
    let mut host_nodes = vec![TreePoint::node(t.root()); tree.len()];
    for (id, p) in pts.iter().enumerate() {
        if p.is_node() {
            host_nodes[p.edge] = host_of_builder[id];
        }
    }
    let mut sub = MetricSubtree {
        tree,
        host_targets: targets.clone(),
        host_nodes,
        slots,
        host_root: t.root(),
        host_fingerprint: t.fingerprint(),
    };
    // A target may sit above the lowest covered point of its edge, so marks
    // are placed through the host-to-subtree map.
    let marks = targets.iter().map(|&p| sub.locate_unchecked(p)).collect::<Result<Vec<_>>>()?;
    sub.tree = sub.tree.with_marks(marks)?;
    Ok(sub)
}

impl MetricSubtree {
    pub fn tree(&self) -> &MetricTree {
        &self.tree
    }

    pub fn host_targets(&self) -> &[TreePoint] {
        &self.host_targets
    }

    /// The host point of a subtree node.
    pub fn host_point_of_node(&self, v: usize) -> TreePoint {
        self.host_nodes[v]
    }

    fn check_host(&self, t: &MetricTree) -> Result<()> {
        if t.fingerprint() != self.host_fingerprint {
            return domain("subtree was not built from this tree");
        }
        Ok(())
    }

    /// The nearest point of the subtree to `p`, in host coordinates.
    pub fn project(&self, t: &MetricTree, p: TreePoint) -> Result<TreePoint> {
        self.check_host(t)?;
        let p = t.point(p.edge, p.offset)?;
        Ok(self.project_unchecked(t, p))
    }

    fn project_unchecked(&self, t: &MetricTree, p: TreePoint) -> TreePoint {
        let mut best = TreePoint::node(self.host_root);
        let mut best_depth = 0.0;
        for &s in &self.host_targets {
            let m = t.meet(p, s);
            let d = t.depth(m);
            if d > best_depth {
                best = m;
                best_depth = d;
            }
        }
        best
    }

    /// Converts a host point lying on the subtree to subtree coordinates.
    pub fn locate(&self, t: &MetricTree, p: TreePoint) -> Result<TreePoint> {
        self.check_host(t)?;
        let p = t.point(p.edge, p.offset)?;
        self.locate_unchecked(p)
    }

    fn locate_unchecked(&self, p: TreePoint) -> Result<TreePoint> {
        if p.edge == self.host_root {
            return Ok(TreePoint::node(self.tree.root()));
        }
        match self.slots[p.edge] {
            Some(s) if p.offset >= s.base - POINT_TOL => {
                let off = s.offset + (p.offset - s.base).max(0.0);
                self.tree.point(s.edge, off.min(self.tree.edge_length(s.edge)))
            }
            _ => domain("point does not lie on the subtree"),
        }
    }

    /// Converts a subtree point back to host coordinates.
    pub fn host_point(&self, t: &MetricTree, p: TreePoint) -> Result<TreePoint> {
        self.check_host(t)?;
        let p = self.tree.point(p.edge, p.offset)?;
        Ok(t.climb(self.host_nodes[p.edge], p.offset))
    }

    /// Projection in subtree coordinates.
    pub fn project_to_sub(&self, t: &MetricTree, p: TreePoint) -> Result<TreePoint> {
        let q = self.project(t, p)?;
        self.locate_unchecked(q)
    }

    /// Largest distance from a host point to its projection. Attained at
    /// host nodes, so only those are checked.
    pub fn max_projection_distance(&self, t: &MetricTree) -> Result<f64> {
        self.check_host(t)?;
        Ok((0..t.len())
            .map(|v| {
                let p = TreePoint::node(v);
                t.distance(p, self.project_unchecked(t, p))
            })
            .fold(0.0, f64::max))
    }

    /// The image of `mu` under the projection, as a measure on the subtree.
    pub fn pushforward(&self, t: &MetricTree, mu: &TreeMeasure) -> Result<TreeMeasure> {
        self.check_host(t)?;
        if mu.node_count() != t.len() {
            return domain("measure lives on a different tree");
        }
        let mut atoms = Vec::new();
        for &(p, m) in mu.atoms() {
            atoms.push((self.locate_unchecked(self.project_unchecked(t, p))?, m));
        }
        let mut pieces: Vec<Vec<DensityPiece>> = vec![Vec::new(); self.tree.len()];
        for v in t.edges() {
            let list = mu.pieces(v);
            if list.is_empty() {
                continue;
            }
            match self.slots[v] {
                Some(s) => {
                    let uncovered = mu.density_mass_between(v, 0.0, s.base);
                    if uncovered > 0.0 {
                        let at = self.locate_unchecked(t.point(v, s.base)?)?;
                        atoms.push((at, uncovered));
                    }
                    for piece in list {
                        let from = piece.from.max(s.base);
                        if piece.to <= from {
                            continue;
                        }
                        pieces[s.edge].push(DensityPiece {
                            from: s.offset + from - s.base,
                            to: s.offset + piece.to - s.base,
                            density: piece.density,
                        });
                    }
                }
                None => {
                    let mass: f64 = list.iter().map(DensityPiece::mass).sum();
                    let q = self.project_unchecked(t, TreePoint::node(v));
                    atoms.push((self.locate_unchecked(q)?, mass));
                }
            }
        }
        // Clamp rounding spill at edge tops before validation.
        for (z, list) in pieces.iter_mut().enumerate() {
            let len = self.tree.edge_length(z);
            for p in list.iter_mut() {
                p.to = p.to.min(len);
                p.from = p.from.clamp(0.0, len);
            }
        }
        TreeMeasure::new(&self.tree, merge_atoms(atoms), pieces)
    }
}

/// The vertex-induced subtree of a graph tree spanned by the root and a list
/// of target vertices, with the nearest-point projection of every vertex.
#[derive(Debug, Clone)]
pub struct GraphSubtree {
    members: Vec<bool>,
    proj: Vec<u32>,
    sub_degree: Vec<u32>,
    edge_count: usize,
    targets: Vec<usize>,
    host_len: usize,
}

pub fn spanning_subtree_graph(t: &OrderedTree, targets: &[usize]) -> Result<GraphSubtree> {
    if targets.is_empty() {
        return domain("spanning subtree needs at least one target");
    }
    let n = t.len();
    let mut members = vec![false; n];
    members[t.root()] = true;
    for &s in targets {
        if s >= n {
            return domain(format!("target {s} out of range"));
        }
        let mut v = s;
        while !members[v] {
            members[v] = true;
            v = t.parent(v).unwrap();
        }
    }
    let mut proj = vec![0u32; n];
    for v in t.preorder() {
        proj[v] = if members[v] {
            v as u32
        } else {
            proj[t.parent(v).unwrap()]
        };
    }
    let mut sub_degree = vec![0u32; n];
    let mut edge_count = 0;
    for v in 0..n {
        if let Some(p) = t.parent(v) {
            if members[v] {
                sub_degree[v] += 1;
                sub_degree[p] += 1;
                edge_count += 1;
            }
        }
    }
    Ok(GraphSubtree {
        members,
        proj,
        sub_degree,
        edge_count,
        targets: targets.to_vec(),
        host_len: n,
    })
}

impl GraphSubtree {
    /// The whole tree as its own subtree.
    pub fn full(t: &OrderedTree) -> Self {
        let leaves: Vec<usize> = (0..t.len()).filter(|&v| t.is_leaf(v)).collect();
        spanning_subtree_graph(t, &leaves).expect("every tree has a leaf")
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members[v]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.members.len()).filter(move |&v| self.members[v])
    }

    pub fn vertex_count(&self) -> usize {
        self.edge_count + 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn host_len(&self) -> usize {
        self.host_len
    }

    /// Degree inside the subtree.
    pub fn degree(&self, v: usize) -> usize {
        self.sub_degree[v] as usize
    }

    #[inline]
    pub fn project(&self, v: usize) -> usize {
        self.proj[v] as usize
    }

    /// Largest graph distance from a vertex to its projection.
    pub fn max_projection_distance(&self, t: &OrderedTree) -> usize {
        (0..t.len())
            .map(|v| t.depth(v) - t.depth(self.project(v)))
            .max()
            .unwrap_or(0)
    }

    /// Edge count scaled by the distance normalization `alpha_n`.
    pub fn scaled_length(&self, alpha_n: f64) -> f64 {
        self.edge_count as f64 / alpha_n
    }

    /// Moves every vertex's mass to its projection.
    pub fn pushforward(&self, mu: &VertexMeasure) -> Result<VertexMeasure> {
        if mu.0.len() != self.host_len {
            return domain("measure lives on a different tree");
        }
        let mut out = vec![0.0; self.host_len];
        for (v, &m) in mu.0.iter().enumerate() {
            out[self.project(v)] += m;
        }
        Ok(VertexMeasure(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y123() -> MetricTree {
        MetricTree::star(&[1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn single_target_gives_segment() {
        let t = y123();
        let s = spanning_subtree(&t, &[TreePoint::node(1)]).unwrap();
        assert_eq!(s.tree().len(), 2);
        assert!((s.tree().total_length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_targets_keep_mark_order() {
        let t = y123();
        let s = spanning_subtree(&t, &[TreePoint::node(2), TreePoint::node(1)]).unwrap();
        let st = s.tree();
        assert!((st.total_length() - 3.0).abs() < 1e-12);
        let m = st.marks();
        assert!((st.depth(m[0]) - 2.0).abs() < 1e-12);
        assert!((st.depth(m[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_third_arm_is_centre() {
        let t = y123();
        let s = spanning_subtree(&t, &[TreePoint::node(1), TreePoint::node(2)]).unwrap();
        let p = t.point(3, 1.0).unwrap();
        assert_eq!(s.project(&t, p).unwrap(), TreePoint::node(0));
        let q = t.point(2, 0.5).unwrap();
        assert_eq!(s.project(&t, q).unwrap(), q);
    }

    #[test]
    fn internal_target_is_a_leaf_of_subtree() {
        let t = MetricTree::segment(2.0).unwrap();
        let s = spanning_subtree(&t, &[t.point(1, 0.5).unwrap()]).unwrap();
        assert!((s.tree().total_length() - 1.5).abs() < 1e-12);
        let p = s.project_to_sub(&t, TreePoint::node(1)).unwrap();
        assert_eq!(p, TreePoint::node(1));
        assert!(s.locate(&t, TreePoint::node(1)).is_err());
    }

    #[test]
    fn pushforward_of_length_onto_one_arm() {
        let t = y123();
        let mu = TreeMeasure::uniform_length(&t, 1.0).unwrap();
        let s = spanning_subtree(&t, &[TreePoint::node(1)]).unwrap();
        let nu = s.pushforward(&t, &mu).unwrap();
        assert_eq!(nu.atoms().len(), 1);
        assert_eq!(nu.atoms()[0].0, TreePoint::node(s.tree().root()));
        assert!((nu.atoms()[0].1 - 5.0).abs() < 1e-12);
        assert!((nu.density_mass() - 1.0).abs() < 1e-12);
        assert!((nu.total_mass() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn foreign_tree_is_rejected() {
        let t = y123();
        let s = spanning_subtree(&t, &[TreePoint::node(1)]).unwrap();
        let other = MetricTree::segment(1.0).unwrap();
        assert!(s.project(&other, TreePoint::node(0)).is_err());
    }

    #[test]
    fn graph_projection_on_path() {
        let t = OrderedTree::path(3).unwrap();
        let s = spanning_subtree_graph(&t, &[1]).unwrap();
        assert_eq!(s.project(2), 1);
        assert_eq!(s.project(0), 0);
        let mu = s.pushforward(&VertexMeasure::uniform(3)).unwrap();
        assert!((mu.mass(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((mu.mass(1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.max_projection_distance(&t), 1);
    }

    #[test]
    fn empty_targets_rejected() {
        let t = y123();
        assert!(spanning_subtree(&t, &[]).is_err());
        assert!(spanning_subtree_graph(&OrderedTree::path(2).unwrap(), &[]).is_err());
    }
}
