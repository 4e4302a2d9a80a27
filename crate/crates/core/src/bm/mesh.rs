use std::fmt::Write as _;

use rand::Rng as _;

use crate::error::{domain, Result};
use crate::rng::Rng;
use crate::trees::{MetricTree, TreeMeasure, TreePoint};

/// A metric tree with every edge cut into equal segments no longer than `h`.
///
/// The walk on mesh nodes jumps to a neighbour with probability proportional
/// to the inverse segment length, which makes it the exact trace of
/// Brownian motion on the nodes. Each visit to node `v` is charged the mean
/// exit time of its star, `(Σ h_i) / (Σ 1/h_i) / Λ`, where `Λ` is the total
/// length, so the clock runs at the speed of the normalized length measure.
#[derive(Debug, Clone)]
pub struct MeshGraph {
    host: MetricTree,
    spacing: f64,
    points: Vec<TreePoint>,
    adj_start: Vec<u32>,
    adj: Vec<u32>,
    cum: Vec<f64>,
    uniform: Vec<bool>,
    hold: Vec<f64>,
    lt_weight: Vec<f64>,
    cell_mass: Vec<f64>,
    // Mesh nodes along each host edge, bottom to top.
    chains: Vec<Vec<u32>>,
}

/// Segment count for an edge of length `len`: `⌈len / h⌉`, with a small
/// allowance so exact multiples are not rounded up.
pub fn segment_count(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

impl MeshGraph {
    pub fn new(t: &MetricTree, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return domain(format!("mesh spacing must be positive, got {h}"));
        }
        let Some(shortest) = t.shortest_edge() else {
            return domain("cannot mesh a single-point tree");
        };
        if h > shortest * (1.0 + 1e-12) {
            return domain(format!("mesh spacing {h} exceeds the shortest edge {shortest}"));
        }
        let total = t.total_length();
        let mut points: Vec<TreePoint> = (0..t.len()).map(TreePoint::node).collect();
        let mut nbrs: Vec<Vec<(u32, f64)>> = vec![Vec::new(); t.len()];
        let mut chains = vec![Vec::new(); t.len()];
        for v in t.edges() {
            let len = t.edge_length(v);
            let k = segment_count(len, h);
            let s = len / k as f64;
            let mut chain = vec![v as u32];
            for j in 1..k {
                chain.push(points.len() as u32);
                points.push(TreePoint {
                    edge: v,
                    offset: j as f64 * s,
                });
                nbrs.push(Vec::new());
            }
            chain.push(t.parent(v).unwrap() as u32);
            for w in chain.windows(2) {
                nbrs[w[0] as usize].push((w[1], s));
                nbrs[w[1] as usize].push((w[0], s));
            }
            chains[v] = chain;
        }
        let m = points.len();
        let mut adj_start = Vec::with_capacity(m + 1);
        let mut adj = Vec::new();
        let mut cum = Vec::new();
        let mut uniform = Vec::with_capacity(m);
        let mut hold = Vec::with_capacity(m);
        let mut lt_weight = Vec::with_capacity(m);
        let mut cell_mass = Vec::with_capacity(m);
        for list in &nbrs {
            adj_start.push(adj.len() as u32);
            let sum_len: f64 = list.iter().map(|x| x.1).sum();
            let conductance: f64 = list.iter().map(|x| 1.0 / x.1).sum();
            let mut acc = 0.0;
            for &(u, s) in list {
                adj.push(u);
                acc += 1.0 / s / conductance;
                cum.push(acc);
            }
            if let Some(last) = cum.last_mut() {
                *last = 1.0;
            }
            uniform.push(list.windows(2).all(|w| w[0].1 == w[1].1));
            hold.push(sum_len / conductance / total);
            lt_weight.push(2.0 / conductance);
            cell_mass.push(sum_len / (2.0 * total));
        }
        adj_start.push(adj.len() as u32);
        Ok(Self {
            host: t.clone(),
            spacing: h,
            points,
            adj_start,
            adj,
            cum,
            uniform,
            hold,
            lt_weight,
            cell_mass,
            chains,
        })
    }

    pub fn host(&self) -> &MetricTree {
        &self.host
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Host coordinates of a mesh node. Host nodes keep their ids.
    pub fn point(&self, v: usize) -> TreePoint {
        self.points[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.adj_start[v + 1] - self.adj_start[v]) as usize
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.adj_start[v] as usize..self.adj_start[v + 1] as usize]
    }

    /// Mesh nodes along a host edge, from its lower node to its upper node.
    pub fn chain(&self, edge: usize) -> &[u32] {
        &self.chains[edge]
    }

    /// Mean clock time charged per visit.
    pub fn hold(&self, v: usize) -> f64 {
        self.hold[v]
    }

    pub fn holds(&self) -> &[f64] {
        &self.hold
    }

    /// Local time added per visit.
    pub fn local_time_weight(&self, v: usize) -> f64 {
        self.lt_weight[v]
    }

    /// Normalized length of the cell around a node (half of each segment).
    pub fn cell_mass(&self, v: usize) -> f64 {
        self.cell_mass[v]
    }

    /// The mesh node closest to a host point.
    pub fn nearest_node(&self, p: TreePoint) -> Result<usize> {
        let p = self.host.point(p.edge, p.offset)?;
        if p.is_node() {
            return Ok(p.edge);
        }
        let chain = &self.chains[p.edge];
        let k = chain.len() - 1;
        let s = self.host.edge_length(p.edge) / k as f64;
        let j = ((p.offset / s).round() as usize).min(k);
        Ok(chain[j] as usize)
    }

    #[inline]
    pub fn step(&self, v: usize, rng: &mut Rng) -> usize {
        let s = self.adj_start[v] as usize;
        let e = self.adj_start[v + 1] as usize;
        match e - s {
            0 => v,
            1 => self.adj[s] as usize,
            2 if self.uniform[v] => self.adj[s + rng.random::<bool>() as usize] as usize,
            d if self.uniform[v] => self.adj[s + rng.random_range(0..d)] as usize,
            d => {
                let u: f64 = rng.random();
                let i = self.cum[s..e].partition_point(|&c| c <= u).min(d - 1);
                self.adj[s + i] as usize
            }
        }
    }

    /// `∫ hat_v dν` for every node, where `hat_v` is the piecewise-linear
    /// function equal to one at `v` and zero at the other nodes. Atoms go to
    /// their nearest node.
    pub fn hat_integrals(&self, nu: &TreeMeasure) -> Result<Vec<f64>> {
        if nu.node_count() != self.host.len() {
            return domain("measure lives on a different tree");
        }
        let mut w = vec![0.0; self.len()];
        for &(p, m) in nu.atoms() {
            w[self.nearest_node(p)?] += m;
        }
        for v in self.host.edges() {
            let pieces = nu.pieces(v);
            if pieces.is_empty() {
                continue;
            }
            let chain = &self.chains[v];
            let k = chain.len() - 1;
            let s = self.host.edge_length(v) / k as f64;
            for j in 0..k {
                let (a, b) = (j as f64 * s, (j + 1) as f64 * s);
                for piece in pieces {
                    let x0 = piece.from.max(a);
                    let x1 = piece.to.min(b);
                    if x1 <= x0 {
                        continue;
                    }
                    let lower = ((b - x0).powi(2) - (b - x1).powi(2)) / (2.0 * s);
                    let upper = ((x1 - a).powi(2) - (x0 - a).powi(2)) / (2.0 * s);
                    w[chain[j] as usize] += piece.density * lower;
                    w[chain[j + 1] as usize] += piece.density * upper;
                }
            }
        }
        Ok(w)
    }

    /// Additive-functional increment per visit for the time change to `ν`:
    /// local time per visit times `∫ hat_v dν`.
    pub fn visit_increments(&self, nu: &TreeMeasure) -> Result<Vec<f64>> {
        if !(nu.total_mass() > 0.0) {
            return domain("time change needs a measure of positive mass");
        }
        let w = self.hat_integrals(nu)?;
        Ok(w.iter().zip(&self.lt_weight).map(|(w, l)| w * l).collect())
    }
}

/// A mesh-walk trajectory with the clock time at which each node is entered.
#[derive(Debug, Clone, PartialEq)]
pub struct BmPath {
    pub nodes: Vec<u32>,
    pub clock: Vec<f64>,
}

/// Runs the mesh walk from the node nearest `start` until the clock first
/// reaches `duration`.
pub fn run_bm(mesh: &MeshGraph, duration: f64, start: TreePoint, rng: &mut Rng) -> Result<BmPath> {
    if !(duration >= 0.0) {
        return domain("duration must be non-negative");
    }
    let mut v = mesh.nearest_node(start)?;
    let mut nodes = vec![v as u32];
    let mut clock = vec![0.0];
    let mut c = 0.0;
    while c < duration {
        c += mesh.hold[v];
        v = mesh.step(v, rng);
        nodes.push(v as u32);
        clock.push(c);
    }
    Ok(BmPath { nodes, clock })
}

/// Node occupied at clock time `duration`, without storing the path.
pub fn bm_position(mesh: &MeshGraph, duration: f64, start: usize, rng: &mut Rng) -> usize {
    let mut v = start;
    let mut c = mesh.hold[v];
    while c <= duration {
        v = mesh.step(v, rng);
        c += mesh.hold[v];
    }
    v
}

/// Result of running the mesh walk until it enters a target set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Index into the target list.
    pub target: usize,
    /// Sum of per-visit increments over the visits before the hit.
    pub clock: f64,
    pub steps: u64,
}

/// Walks from `start` until a target node is entered, charging
/// `increments[v]` for every visit to `v` before that.
pub fn run_until_hit(mesh: &MeshGraph, start: usize, targets: &[usize], increments: &[f64], rng: &mut Rng) -> Hit {
    let mut which = vec![u32::MAX; mesh.len()];
    for (i, &t) in targets.iter().enumerate().rev() {
        which[t] = i as u32;
    }
    let mut v = start;
    let mut clock = 0.0;
    let mut steps = 0;
    while which[v] == u32::MAX {
        clock += increments[v];
        v = mesh.step(v, rng);
        steps += 1;
    }
    Hit {
        target: which[v] as usize,
        clock,
        steps,
    }
}

impl BmPath {
    /// The same visit sequence re-timed by the additive functional of `ν`:
    /// node `m` is entered at `Â` = the sum of increments of earlier visits.
    pub fn time_changed(&self, mesh: &MeshGraph, nu: &TreeMeasure) -> Result<BmPath> {
        let inc = mesh.visit_increments(nu)?;
        let mut clock = Vec::with_capacity(self.nodes.len());
        let mut a = 0.0;
        clock.push(0.0);
        for &v in &self.nodes[..self.nodes.len() - 1] {
            a += inc[v as usize];
            clock.push(a);
        }
        Ok(BmPath {
            nodes: self.nodes.clone(),
            clock,
        })
    }

    /// Node occupied at time `s`: the last node entered at or before `s`.
    pub fn at_time(&self, s: f64) -> u32 {
        let i = self.clock.partition_point(|&c| c <= s).saturating_sub(1);
        self.nodes[i]
    }

    /// CSV rows `clock,edge,offset` in host coordinates.
    pub fn to_csv(&self, mesh: &MeshGraph, comments: &[String]) -> String {
        let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
        out.push_str("clock,edge,offset\n");
        for (&v, &c) in self.nodes.iter().zip(&self.clock) {
            let p = mesh.point(v as usize);
            let _ = writeln!(out, "{c},{},{}", p.edge, p.offset);
        }
        out
    }
}

/// Mesh-node local times of a path up to clock time `t`, with the visit in
/// progress at `t` counted in proportion to the time spent.
#[derive(Debug, Clone)]
pub struct LocalTimeField {
    values: Vec<f64>,
    time: f64,
}

impl LocalTimeField {
    pub fn from_path(mesh: &MeshGraph, path: &BmPath, t: f64) -> Result<Self> {
        let last = *path.clock.last().unwrap();
        if t > last + 1e-12 {
            return domain(format!("path only runs to clock time {last}"));
        }
        let mut values = vec![0.0; mesh.len()];
        for m in 0..path.nodes.len() {
            let v = path.nodes[m] as usize;
            let enter = path.clock[m];
            if enter >= t {
                break;
            }
            let leave = path.clock.get(m + 1).copied().unwrap_or(enter + mesh.hold[v]);
            let frac = ((t - enter) / (leave - enter)).min(1.0);
            values[v] += frac * mesh.lt_weight[v];
        }
        Ok(Self { values, time: t })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn node_value(&self, v: usize) -> f64 {
        self.values[v]
    }

    /// Linear interpolation between the mesh nodes around a host point.
    pub fn at_point(&self, mesh: &MeshGraph, p: TreePoint) -> Result<f64> {
        let host = mesh.host();
        let p = host.point(p.edge, p.offset)?;
        if p.is_node() {
            return Ok(self.values[p.edge]);
        }
        let chain = mesh.chain(p.edge);
        let k = chain.len() - 1;
        let s = host.edge_length(p.edge) / k as f64;
        let j = ((p.offset / s).floor() as usize).min(k - 1);
        let f = p.offset / s - j as f64;
        Ok((1.0 - f) * self.values[chain[j] as usize] + f * self.values[chain[j + 1] as usize])
    }

    /// `∫ L̂ dν` with `L̂` interpolated linearly between nodes.
    pub fn integrate(&self, mesh: &MeshGraph, nu: &TreeMeasure) -> Result<f64> {
        let w = mesh.hat_integrals(nu)?;
        Ok(self.values.iter().zip(&w).map(|(l, w)| l * w).sum())
    }

    /// `∫ L̂ dλ` against the normalized length measure.
    pub fn occupation(&self, mesh: &MeshGraph) -> f64 {
        self.values.iter().zip(&mesh.cell_mass).map(|(l, c)| l * c).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn unit_segment_quarter_mesh() {
        let t = MetricTree::segment(1.0).unwrap();
        let m = MeshGraph::new(&t, 0.25).unwrap();
        assert_eq!(m.len(), 5);
        assert!((m.hold(2) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn y_tree_half_mesh() {
        let t = MetricTree::star(&[1.0, 1.0, 1.0]).unwrap();
        let m = MeshGraph::new(&t, 0.5).unwrap();
        assert_eq!(m.len(), 7);
        assert_eq!(m.degree(0), 3);
    }

    #[test]
    fn uneven_edge_is_split_evenly() {
        let t = MetricTree::star(&[1.1, 2.0]).unwrap();
        let m = MeshGraph::new(&t, 0.25).unwrap();
        // ⌈1.1 / 0.25⌉ = 5 segments of 0.22.
        assert_eq!(m.chain(1).len(), 6);
        let p = m.point(m.chain(1)[1] as usize);
        assert!((p.offset - 0.22).abs() < 1e-12);
    }

    #[test]
    fn spacing_larger_than_shortest_edge_rejected() {
        let t = MetricTree::star(&[0.1, 1.0]).unwrap();
        assert!(MeshGraph::new(&t, 0.2).is_err());
        assert!(MeshGraph::new(&t, 0.0).is_err());
    }

    #[test]
    fn branch_transitions_follow_conductance() {
        let u = MetricTree::new(&[None, Some(0), Some(0)], &[0.0, 1.0, 0.75], vec![]).unwrap();
        let m = MeshGraph::new(&u, 0.5).unwrap();
        // Segments 0.5 and 0.375 at the root: conductances 2 and 8/3.
        let mut rng = replica_rng(3, 0);
        let trials = 100_000;
        let up = (0..trials)
            .filter(|_| m.point(m.step(0, &mut rng)).edge == 1)
            .count() as f64
            / trials as f64;
        let p = 2.0 / (2.0 + 8.0 / 3.0);
        assert!((up - p).abs() < 5.0 * (p * (1.0 - p) / trials as f64).sqrt());
        assert!((m.hold(0) - 0.875 / (2.0 + 8.0 / 3.0) / 1.75).abs() < 1e-15);
    }

    #[test]
    fn occupation_identity_is_exact() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let m = MeshGraph::new(&t, 0.05).unwrap();
        let path = run_bm(&m, 1.0, TreePoint::node(0), &mut replica_rng(4, 0)).unwrap();
        for s in [0.25, 0.5, 1.0] {
            let lt = LocalTimeField::from_path(&m, &path, s).unwrap();
            assert!((lt.occupation(&m) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn hat_integrals_preserve_mass() {
        let t = MetricTree::star(&[1.0, 2.0]).unwrap();
        let m = MeshGraph::new(&t, 0.3).unwrap();
        let nu = TreeMeasure::normalized_length(&t).unwrap();
        let w = m.hat_integrals(&nu).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for v in 0..m.len() {
            assert!((w[v] - m.cell_mass(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn time_change_by_length_is_identity() {
        let t = MetricTree::segment(1.0).unwrap();
        let m = MeshGraph::new(&t, 0.1).unwrap();
        let path = run_bm(&m, 0.5, TreePoint::node(1), &mut replica_rng(8, 0)).unwrap();
        let nu = TreeMeasure::normalized_length(&t).unwrap();
        let changed = path.time_changed(&m, &nu).unwrap();
        for (a, b) in changed.clock.iter().zip(&path.clock) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = TreeMeasure::atoms_only(&t, vec![]).unwrap();
        assert!(path.time_changed(&m, &zero).is_err());
    }
}
