use crate::error::{domain, Result};

use super::OrderedTree;

/// Absolute tolerance used to identify coincident points on a metric tree.
pub const POINT_TOL: f64 = 1e-12;

/// A point on a [`MetricTree`].
///
/// Every non-root node `v` owns the edge joining it to its parent, so edges
/// are identified by their lower node. `offset` is measured upward from that
/// node and lies in `[0, length)`; a point at the top of an edge is stored as
/// the parent node with offset 0. Nodes are therefore `TreePoint { edge: v,
/// offset: 0.0 }`, the root included.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TreePoint {
    pub edge: usize,
    pub offset: f64,
}

impl TreePoint {
    pub fn node(v: usize) -> Self {
        Self { edge: v, offset: 0.0 }
    }

    pub fn is_node(&self) -> bool {
        self.offset == 0.0
    }
}

impl PartialEq for TreePoint {
    fn eq(&self, other: &Self) -> bool {
        self.edge == other.edge && (self.offset - other.offset).abs() <= POINT_TOL
    }
}

/// A finite rooted real tree: nodes joined by edges of positive length.
///
/// Non-root nodes have either no children (leaves) or at least two, so every
/// internal node other than the root has degree at least three. The tree also
/// carries an ordered sequence of designated points ("marks"), the
/// `σ_1, …, σ_k` used to build spanning subtrees and embeddings.
#[derive(Debug, Clone)]
pub struct MetricTree {
    root: usize,
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    children: Vec<Vec<usize>>,
    depth: Vec<f64>,
    level: Vec<usize>,
    marks: Vec<TreePoint>,
}

impl MetricTree {
    /// Builds a tree from a parent array and the length of each node's
    /// parent edge (ignored for the root). Children keep index order.
    pub fn new(parents: &[Option<usize>], lengths: &[f64], marks: Vec<TreePoint>) -> Result<Self> {
        let n = parents.len();
        if n == 0 || lengths.len() != n {
            return domain("parent and length arrays must be non-empty and of equal size");
        }
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match p {
                None if root.is_some() => return domain("more than one root"),
                None => root = Some(v),
                Some(p) if *p >= n || *p == v => return domain(format!("bad parent for node {v}")),
                Some(p) => children[*p].push(v),
            }
        }
        let Some(root) = root else {
            return domain("no root");
        };
        Self::from_children(root, children, lengths.to_vec(), marks)
    }

    pub(crate) fn from_children(
        root: usize,
        children: Vec<Vec<usize>>,
        mut length: Vec<f64>,
        marks: Vec<TreePoint>,
    ) -> Result<Self> {
        let n = children.len();
        let mut parent = vec![None; n];
        for (v, kids) in children.iter().enumerate() {
            for &c in kids {
                if c >= n || c == root || parent[c].is_some() {
                    return domain(format!("invalid child {c} of node {v}"));
                }
                parent[c] = Some(v);
            }
        }
        length[root] = 0.0;
        let mut depth = vec![f64::NAN; n];
        let mut level = vec![usize::MAX; n];
        depth[root] = 0.0;
        level[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if level[c] != usize::MAX {
                    return domain("cycle in metric tree");
                }
                if !(length[c] > 0.0) || !length[c].is_finite() {
                    return domain(format!("edge above node {c} has non-positive length {}", length[c]));
                }
                depth[c] = depth[v] + length[c];
                level[c] = level[v] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return domain("metric tree is disconnected");
        }
        for v in 0..n {
            if v != root && children[v].len() == 1 {
                return domain(format!("non-root node {v} has degree 2"));
            }
        }
        let tree = Self {
            root,
            parent,
            length,
            children,
            depth,
            level,
            marks: Vec::new(),
        };
        let marks = marks
            .into_iter()
            .map(|p| tree.point(p.edge, p.offset))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { marks, ..tree })
    }

    /// A star: the root joined to one leaf per arm. Leaves are marked in order.
    pub fn star(arms: &[f64]) -> Result<Self> {
        if arms.is_empty() {
            return domain("a star needs at least one arm");
        }
        let mut parents = vec![None];
        let mut lengths = vec![0.0];
        for &a in arms {
            parents.push(Some(0));
            lengths.push(a);
        }
        let marks = (1..=arms.len()).map(TreePoint::node).collect();
        Self::new(&parents, &lengths, marks)
    }

    /// The segment `[0, len]` rooted at 0, with the far end marked.
    pub fn segment(len: f64) -> Result<Self> {
        Self::star(&[len])
    }

    /// The graph tree with unit edge lengths, degree-2 vertices contracted.
    /// Returns the tree and the point of each original vertex.
    pub fn from_ordered(t: &OrderedTree) -> (Self, Vec<TreePoint>) {
        let mut b = TreeBuilder::new();
        let mut id = vec![0; t.len()];
        for v in t.preorder() {
            id[v] = match t.parent(v) {
                None => b.root(),
                Some(p) => b.add_child(id[p], 1.0),
            };
        }
        b.finish(&id, &[])
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Length of the edge above `v` (0 for the root).
    pub fn edge_length(&self, v: usize) -> f64 {
        self.length[v]
    }

    pub fn node_depth(&self, v: usize) -> f64 {
        self.depth[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    pub fn marks(&self) -> &[TreePoint] {
        &self.marks
    }

    pub fn with_marks(&self, marks: Vec<TreePoint>) -> Result<Self> {
        let marks = marks
            .into_iter()
            .map(|p| self.point(p.edge, p.offset))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { marks, ..self.clone() })
    }

    /// Non-root nodes, i.e. edge identifiers.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&v| v != self.root)
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.edges().filter(|&v| self.children[v].is_empty()).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges().map(|v| self.length[v]).sum()
    }

    pub fn shortest_edge(&self) -> Option<f64> {
        self.edges().map(|v| self.length[v]).min_by(f64::total_cmp)
    }

    /// Nodes in preorder.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        order
    }

    /// Validates and canonicalizes a point.
    pub fn point(&self, edge: usize, offset: f64) -> Result<TreePoint> {
        if edge >= self.len() {
            return domain(format!("edge {edge} out of range"));
        }
        let len = self.length[edge];
        if !offset.is_finite() || offset < -POINT_TOL || offset > len + POINT_TOL {
            return domain(format!("offset {offset} outside edge {edge} of length {len}"));
        }
        if edge == self.root {
            if offset.abs() > POINT_TOL {
                return domain("the root has no edge");
            }
            return Ok(TreePoint::node(edge));
        }
        Ok(self.canon(edge, offset))
    }

    fn canon(&self, edge: usize, offset: f64) -> TreePoint {
        if offset <= POINT_TOL {
            TreePoint::node(edge)
        } else if offset >= self.length[edge] - POINT_TOL {
            TreePoint::node(self.parent[edge].unwrap_or(self.root))
        } else {
            TreePoint { edge, offset }
        }
    }

    /// Distance from the root.
    pub fn depth(&self, p: TreePoint) -> f64 {
        self.depth[p.edge] - p.offset
    }

    pub fn lca_node(&self, mut a: usize, mut b: usize) -> usize {
        while self.level[a] > self.level[b] {
            a = self.parent[a].unwrap();
        }
        while self.level[b] > self.level[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Branch point of `p`, `q` and the root: the deepest common point of
    /// their root paths.
    pub fn meet(&self, p: TreePoint, q: TreePoint) -> TreePoint {
        let c = self.lca_node(p.edge, q.edge);
        match (c == p.edge, c == q.edge) {
            (true, true) => {
                if p.offset >= q.offset {
                    p
                } else {
                    q
                }
            }
            (true, false) => p,
            (false, true) => q,
            (false, false) => TreePoint::node(c),
        }
    }

    /// Whether `p` lies on the root path of `q`.
    pub fn is_ancestor(&self, p: TreePoint, q: TreePoint) -> bool {
        self.meet(p, q) == p
    }

    pub fn distance(&self, p: TreePoint, q: TreePoint) -> f64 {
        let m = self.meet(p, q);
        (self.depth(p) + self.depth(q) - 2.0 * self.depth(m)).max(0.0)
    }

    /// Moves `s ≥ 0` toward the root, stopping at the root.
    pub fn climb(&self, p: TreePoint, s: f64) -> TreePoint {
        let mut node = p.edge;
        let mut off = p.offset + s;
        while node != self.root && off >= self.length[node] - POINT_TOL {
            off -= self.length[node];
            node = self.parent[node].unwrap();
        }
        if node == self.root {
            return TreePoint::node(node);
        }
        self.canon(node, off.max(0.0))
    }

    /// The point at distance `s` from `p` along the geodesic to `q`.
    pub fn along(&self, p: TreePoint, q: TreePoint, s: f64) -> TreePoint {
        let m = self.meet(p, q);
        let up = self.depth(p) - self.depth(m);
        let total = up + self.depth(q) - self.depth(m);
        let s = s.clamp(0.0, total);
        if s <= up {
            self.climb(p, s)
        } else {
            self.climb(q, total - s)
        }
    }

    /// The unique point common to the three geodesics between `a`, `b`, `c`.
    pub fn branch_point(&self, a: TreePoint, b: TreePoint, c: TreePoint) -> TreePoint {
        let s = 0.5 * (self.distance(a, b) + self.distance(a, c) - self.distance(b, c));
        self.along(a, b, s)
    }

    pub fn diameter(&self) -> f64 {
        // Two sweeps: the farthest node from the root, then from it.
        let far = |from: TreePoint| {
            (0..self.len())
                .map(|v| (v, self.distance(from, TreePoint::node(v))))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
        };
        let (a, _) = far(TreePoint::node(self.root));
        far(TreePoint::node(a)).1
    }

    /// Multiplies every edge length by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return domain("scale factor must be positive");
        }
        let mut t = self.clone();
        for v in 0..t.len() {
            t.length[v] *= c;
            t.depth[v] *= c;
        }
        for m in &mut t.marks {
            m.offset *= c;
        }
        Ok(t)
    }

    /// Points spaced at most `spacing` apart along every edge, nodes included.
    pub fn net(&self, spacing: f64) -> Vec<TreePoint> {
        let mut pts: Vec<TreePoint> = (0..self.len()).map(TreePoint::node).collect();
        for v in self.edges() {
            let len = self.length[v];
            let pieces = (len / spacing).ceil().max(1.0) as usize;
            for j in 1..pieces {
                pts.push(TreePoint {
                    edge: v,
                    offset: len * j as f64 / pieces as f64,
                });
            }
        }
        pts
    }

    /// Two trees are the same host when their shapes and lengths agree.
    pub(crate) fn fingerprint(&self) -> (usize, u64) {
        (self.len(), self.total_length().to_bits())
    }
}

/// Incremental construction of a metric tree that may pass through
/// degree-2 points; [`TreeBuilder::finish`] contracts them away.
#[derive(Debug, Clone, Default)]
pub(crate) struct TreeBuilder {
    parent: Vec<Option<usize>>,
    length: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self {
            parent: vec![None],
            length: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn add_child(&mut self, parent: usize, length: f64) -> usize {
        let id = self.parent.len();
        self.parent.push(Some(parent));
        self.length.push(length);
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    /// Climbs `s` from node `v`, splitting an edge when the target falls
    /// strictly inside it. Returns the node at the target.
    pub fn climb_split(&mut self, mut v: usize, mut s: f64, tol: f64) -> usize {
        loop {
            if s <= tol {
                return v;
            }
            let Some(p) = self.parent[v] else {
                return v;
            };
            let len = self.length[v];
            if s >= len - tol {
                s -= len;
                v = p;
                continue;
            }
            // New node `m` at distance s above v.
            let m = self.parent.len();
            self.parent.push(Some(p));
            self.length.push(len - s);
            self.children.push(vec![v]);
            let slot = self.children[p].iter().position(|&c| c == v).unwrap();
            self.children[p][slot] = m;
            self.parent[v] = Some(m);
            self.length[v] = s;
            return m;
        }
    }

    /// Contracts non-root nodes with exactly one child. `points` are builder
    /// nodes to report as points of the result; `marks` become its marks.
    pub fn finish(self, points: &[usize], marks: &[usize]) -> (MetricTree, Vec<TreePoint>) {
        let n = self.parent.len();
        let keep: Vec<bool> = (0..n)
            .map(|v| self.parent[v].is_none() || self.children[v].len() != 1)
            .collect();
        let mut new_id = vec![usize::MAX; n];
        let mut order = Vec::new();
        for v in 0..n {
            if keep[v] {
                new_id[v] = order.len();
                order.push(v);
            }
        }
        // Lower kept node and accumulated offset for every builder node.
        let mut below = vec![(usize::MAX, 0.0); n];
        let mut stack = vec![0usize];
        let mut pre = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            pre.push(v);
            stack.extend(self.children[v].iter().copied());
        }
        for &v in pre.iter().rev() {
            if keep[v] {
                below[v] = (v, 0.0);
            } else {
                let c = self.children[v][0];
                let (z, off) = below[c];
                below[v] = (z, off + self.length[c]);
            }
        }
        let mut parents = vec![None; order.len()];
        let mut lengths = vec![0.0; order.len()];
        for (i, &v) in order.iter().enumerate() {
            if let Some(p) = self.parent[v] {
                // Climb through contracted nodes to the next kept ancestor.
                let mut len = self.length[v];
                let mut a = p;
                while !keep[a] {
                    len += self.length[a];
                    a = self.parent[a].unwrap();
                }
                parents[i] = Some(new_id[a]);
                lengths[i] = len;
            }
        }
        let to_point = |v: usize| {
            let (z, off) = below[v];
            TreePoint {
                edge: new_id[z],
                offset: off,
            }
        };
        let mark_pts = marks.iter().map(|&v| to_point(v)).collect();
        let tree = MetricTree::new(&parents, &lengths, mark_pts).expect("builder produces a valid tree");
        let pts = points
            .iter()
            .map(|&v| {
                let p = to_point(v);
                tree.point(p.edge, p.offset).expect("builder point on tree")
            })
            .collect();
        (tree, pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Y-tree rooted at its centre with arms 1, 2, 3.
    fn y123() -> MetricTree {
        MetricTree::star(&[1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn canonicalizes_endpoints() {
        let t = y123();
        assert_eq!(t.point(1, 1.0).unwrap(), TreePoint::node(0));
        assert_eq!(t.point(2, 0.0).unwrap(), TreePoint::node(2));
        assert!(t.point(2, 2.5).is_err());
        assert!(t.point(9, 0.0).is_err());
    }

    #[test]
    fn rejects_degree_two_and_zero_length() {
        assert!(MetricTree::new(&[None, Some(0), Some(1)], &[0.0, 1.0, 1.0], vec![]).is_err());
        assert!(MetricTree::new(&[None, Some(0)], &[0.0, 0.0], vec![]).is_err());
    }

    #[test]
    fn distances_on_y() {
        let t = y123();
        let (a, b, c) = (TreePoint::node(1), TreePoint::node(2), TreePoint::node(3));
        assert!((t.distance(a, b) - 3.0).abs() < 1e-12);
        assert!((t.distance(b, c) - 5.0).abs() < 1e-12);
        let mid = t.point(3, 1.5).unwrap();
        assert!((t.distance(a, mid) - 2.5).abs() < 1e-12);
        assert!((t.distance(mid, c) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn branch_point_of_tips_is_centre() {
        let t = y123();
        let b = t.branch_point(TreePoint::node(1), TreePoint::node(2), TreePoint::node(3));
        assert_eq!(b, TreePoint::node(0));
    }

    #[test]
    fn branch_point_collinear_and_degenerate() {
        let t = MetricTree::segment(2.0).unwrap();
        let tip = TreePoint::node(1);
        let s = t.point(1, 0.7).unwrap();
        let root = TreePoint::node(0);
        assert_eq!(t.branch_point(root, s, tip), s);
        assert_eq!(t.branch_point(s, s, tip), s);
    }

    #[test]
    fn climb_and_along() {
        let t = y123();
        let p = t.climb(TreePoint::node(3), 4.0);
        assert_eq!(p, TreePoint::node(0));
        let q = t.along(TreePoint::node(1), TreePoint::node(3), 2.0);
        assert_eq!(q, t.point(3, 2.0).unwrap());
    }

    #[test]
    fn builder_contracts_degree_two() {
        let mut b = TreeBuilder::new();
        let a = b.add_child(0, 1.0);
        let c = b.add_child(a, 1.0);
        let d = b.add_child(a, 2.0);
        let e = b.add_child(0, 1.5);
        let f = b.add_child(e, 0.5);
        let (t, pts) = b.finish(&[a, c, d, e, f], &[f]);
        assert_eq!(t.len(), 5);
        assert_eq!(t.marks().len(), 1);
        // e lies 0.5 above f on a contracted edge of length 2.
        assert!((t.edge_length(pts[4].edge) - 2.0).abs() < 1e-12);
        assert!((pts[3].offset - 0.5).abs() < 1e-12);
        assert!((t.distance(pts[1], pts[4]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn from_ordered_keeps_graph_distances() {
        let g = OrderedTree::from_children(0, vec![vec![1, 3], vec![2], vec![], vec![]]).unwrap();
        let (t, pts) = MetricTree::from_ordered(&g);
        for u in 0..g.len() {
            for v in 0..g.len() {
                let d = g.graph_distance(u, v).unwrap() as f64;
                assert!((t.distance(pts[u], pts[v]) - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diameter_of_y() {
        assert!((y123().diameter() - 5.0).abs() < 1e-12);
    }
}
