//! Leaf-by-leaf isometric embedding of a marked metric tree into ℓ¹.

use std::fmt::Write as _;

use crate::error::{domain, Result};
use crate::trees::{spanning_subtree, MetricTree, TreePoint};

/// A finitely supported point of ℓ¹; missing trailing coordinates are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct L1Point(pub Vec<f64>);

impl L1Point {
    pub fn coord(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn distance(&self, other: &L1Point) -> f64 {
        let n = self.0.len().max(other.0.len());
        (0..n).map(|i| (self.coord(i) - other.coord(i)).abs()).sum()
    }

    /// Keeps the first `k` coordinates and zeroes the rest.
    pub fn truncate(&self, k: usize) -> L1Point {
        L1Point(self.0.iter().take(k).copied().collect())
    }

    pub fn scaled(&self, c: f64) -> L1Point {
        L1Point(self.0.iter().map(|x| x * c).collect())
    }
}

/// The sequential embedding of `T(k)`, the subtree spanned by the root and
/// the marks `σ_1, …, σ_k`. Coordinate `i` measures progress along the
/// segment that `σ_i` adds to `T(i-1)`.
#[derive(Debug, Clone)]
pub struct Embedding {
    tree: MetricTree,
    attach: Vec<TreePoint>,
    attach_coords: Vec<L1Point>,
}

impl Embedding {
    pub fn new(t: &MetricTree) -> Result<Self> {
        let marks = t.marks();
        if marks.is_empty() {
            return domain("embedding needs a non-empty mark sequence");
        }
        let mut emb = Self {
            tree: t.clone(),
            attach: Vec::with_capacity(marks.len()),
            attach_coords: Vec::with_capacity(marks.len()),
        };
        for i in 0..marks.len() {
            let a = if i == 0 {
                TreePoint::node(t.root())
            } else {
                spanning_subtree(t, &marks[..i])?.project(t, marks[i])?
            };
            let coords = if i == 0 { L1Point::default() } else { emb.embed_prefix(a, i)? };
            emb.attach.push(a);
            emb.attach_coords.push(coords);
        }
        Ok(emb)
    }

    pub fn tree(&self) -> &MetricTree {
        &self.tree
    }

    pub fn dimension(&self) -> usize {
        self.attach.len()
    }

    /// Length of the segment carried by each coordinate.
    pub fn segment_lengths(&self) -> Vec<f64> {
        let m = self.tree.marks();
        (0..self.dimension())
            .map(|i| self.tree.depth(m[i]) - self.tree.depth(self.attach[i]))
            .collect()
    }

    fn embed_prefix(&self, p: TreePoint, k: usize) -> Result<L1Point> {
        let t = &self.tree;
        for (i, &s) in t.marks()[..k].iter().enumerate() {
            if t.is_ancestor(p, s) {
                let mut x = self.attach_coords[i].clone();
                x.0.resize(i + 1, 0.0);
                x.0[i] = (t.depth(p) - t.depth(self.attach[i])).max(0.0);
                return Ok(x);
            }
        }
        domain("point is not on the spanned subtree")
    }

    /// The image of a point of `T(k)`.
    pub fn embed(&self, p: TreePoint) -> Result<L1Point> {
        let p = self.tree.point(p.edge, p.offset)?;
        self.embed_prefix(p, self.dimension())
    }

    /// Images of a point list, as CSV rows `point-id,coord-1,…,coord-k`.
    pub fn to_csv(&self, points: &[TreePoint], comments: &[String]) -> Result<String> {
        let k = self.dimension();
        let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
        out.push_str("point-id");
        for i in 1..=k {
            let _ = write!(out, ",coord-{i}");
        }
        out.push('\n');
        for (id, &p) in points.iter().enumerate() {
            let x = self.embed(p)?;
            let _ = write!(out, "{id}");
            for i in 0..k {
                let _ = write!(out, ",{}", x.coord(i));
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Images of a net of `T(k)` with the given spacing (default one
    /// hundredth of the diameter).
    pub fn embedded_net(&self, spacing: Option<f64>) -> Result<Vec<L1Point>> {
        let sub = spanning_subtree(&self.tree, self.tree.marks())?;
        let st = sub.tree();
        let diam = st.diameter();
        let h = spacing.unwrap_or(1e-2 * diam);
        if !(h > 0.0) {
            if diam == 0.0 {
                return Ok(vec![L1Point::default()]);
            }
            return domain("net spacing must be positive");
        }
        st.net(h)
            .into_iter()
            .map(|p| self.embed(sub.host_point(&self.tree, p)?))
            .collect()
    }
}

/// Hausdorff distance between two finite sets under the ℓ¹ metric.
pub fn hausdorff_distance_l1(a: &[L1Point], b: &[L1Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return domain("Hausdorff distance needs non-empty sets");
    }
    let directed = |x: &[L1Point], y: &[L1Point]| {
        x.iter()
            .map(|p| y.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
