//! Simple random walk on ordered trees, its trace on a spanning subtree,
//! discrete local times and the time change they drive.

use std::fmt::Write as _;

use rand::Rng as _;

use crate::error::{domain, Result};
use crate::rng::Rng;
use crate::trees::{GraphSubtree, OrderedTree, VertexMeasure};

/// One uniform step to a neighbour. A single-vertex tree stays put.
#[inline]
pub fn srw_step(t: &OrderedTree, v: usize, rng: &mut Rng) -> usize {
    let nb = t.neighbors(v);
    match nb.len() {
        0 => v,
        1 => nb[0] as usize,
        d => nb[rng.random_range(0..d)] as usize,
    }
}

/// Position after `steps` steps from the root, without storing the path.
pub fn srw_position(t: &OrderedTree, steps: u64, rng: &mut Rng) -> usize {
    let mut v = t.root();
    for _ in 0..steps {
        v = srw_step(t, v, rng);
    }
    v
}

/// A simple random walk trajectory started at the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath(pub Vec<u32>);

pub fn run_srw(t: &OrderedTree, steps: usize, rng: &mut Rng) -> WalkPath {
    let mut path = Vec::with_capacity(steps + 1);
    let mut v = t.root();
    path.push(v as u32);
    for _ in 0..steps {
        v = srw_step(t, v, rng);
        path.push(v as u32);
    }
    WalkPath(path)
}

impl WalkPath {
    /// Little-endian `u32` vertex ids.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
        out.push_str("step,vertex\n");
        for (m, v) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{m},{v}");
        }
        out
    }
}

/// The projection of a walk onto a subtree, recorded at its changes: the
/// jump chain `J` and the times `A` at which it is entered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedWalk {
    pub jumps: Vec<u32>,
    pub times: Vec<u64>,
}

pub fn observe_on_subtree(x: &WalkPath, sub: &GraphSubtree) -> Result<ObservedWalk> {
    let Some(&first) = x.0.first() else {
        return domain("empty walk");
    };
    if x.0.iter().any(|&v| v as usize >= sub.host_len()) {
        return domain("walk leaves the subtree's host tree");
    }
    let mut jumps = vec![sub.project(first as usize) as u32];
    let mut times = vec![0];
    for (m, &v) in x.0.iter().enumerate().skip(1) {
        let p = sub.project(v as usize) as u32;
        if p != *jumps.last().unwrap() {
            jumps.push(p);
            times.push(m as u64);
        }
    }
    Ok(ObservedWalk { jumps, times })
}

/// `τ(m) = max{l : A_l <= m}` for non-decreasing `A` with `A_0 <= m`.
pub fn last_index_at_most(a: &[f64], m: f64) -> usize {
    a.partition_point(|&x| x <= m).saturating_sub(1)
}

impl ObservedWalk {
    /// Rebuilds the projected walk of length `steps + 1` as `J_{τ(m)}`.
    pub fn reconstruct(&self, steps: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut l = 0;
        for m in 0..=steps as u64 {
            while l + 1 < self.times.len() && self.times[l + 1] <= m {
                l += 1;
            }
            out.push(self.jumps[l]);
        }
        out
    }
}

/// Visit indices of the jump chain per vertex, from which
/// `L_m(σ) = (2 / deg(σ)) #{l <= m : J_l = σ}` is read off.
#[derive(Debug, Clone)]
pub struct DiscreteLocalTimes {
    visits: Vec<Vec<u32>>,
    weight: Vec<f64>,
    jumps: Vec<u32>,
}

pub fn local_times_discrete(obs: &ObservedWalk, sub: &GraphSubtree) -> Result<DiscreteLocalTimes> {
    let n = sub.host_len();
    let mut visits = vec![Vec::new(); n];
    for (l, &v) in obs.jumps.iter().enumerate() {
        let v = v as usize;
        if v >= n || !sub.contains(v) {
            return domain(format!("jump chain visits vertex {v} outside the subtree"));
        }
        visits[v].push(l as u32);
    }
    let mut weight = vec![0.0; n];
    for v in sub.members() {
        let d = sub.degree(v);
        if d == 0 {
            return domain("local times need a subtree with at least one edge");
        }
        weight[v] = 2.0 / d as f64;
    }
    Ok(DiscreteLocalTimes {
        visits,
        weight,
        jumps: obs.jumps.clone(),
    })
}

impl DiscreteLocalTimes {
    /// Number of jump-chain steps `M + 1`.
    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    /// `L_m(v)`.
    pub fn at(&self, m: usize, v: usize) -> f64 {
        let count = self.visits[v].partition_point(|&l| l as usize <= m);
        self.weight[v] * count as f64
    }

    /// Vertices visited at least once.
    pub fn visited(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.visits.len()).filter(move |&v| !self.visits[v].is_empty())
    }
}

/// `Â_0 = 0` and `Â_m = n ∫ L_{m-1} dμ`, one value per jump-chain step.
pub fn additive_functional_discrete(
    lt: &DiscreteLocalTimes,
    mu: &VertexMeasure,
    sub: &GraphSubtree,
    n: usize,
) -> Result<Vec<f64>> {
    if mu.0.len() != sub.host_len() {
        return domain("measure lives on a different tree");
    }
    if let Some(v) = (0..mu.0.len()).find(|&v| mu.0[v] != 0.0 && !sub.contains(v)) {
        return domain(format!("measure charges vertex {v} outside the subtree"));
    }
    let mut a = Vec::with_capacity(lt.len());
    a.push(0.0);
    let mut acc = 0.0;
    for &v in &lt.jumps[..lt.len().saturating_sub(1)] {
        let v = v as usize;
        acc += n as f64 * lt.weight[v] * mu.0[v];
        a.push(acc);
    }
    Ok(a)
}

/// `X̂_m = J_{τ̂(m)}` with `τ̂(m) = max{l : Â_l <= m}`, for
/// `m = 0, …, ⌊Â_last⌋`.
pub fn time_changed_walk(obs: &ObservedWalk, a: &[f64]) -> Result<Vec<u32>> {
    if a.len() != obs.jumps.len() || a.is_empty() {
        return domain("clock and jump chain lengths differ");
    }
    if a[0] != 0.0 || a.windows(2).any(|w| w[1] < w[0]) {
        return domain("clock must start at 0 and be non-decreasing");
    }
    let end = a[a.len() - 1].floor() as usize;
    let mut out = Vec::with_capacity(end + 1);
    let mut l = 0;
    for m in 0..=end {
        let m = m as f64;
        while l + 1 < a.len() && a[l + 1] <= m {
            l += 1;
        }
        out.push(obs.jumps[l]);
    }
    Ok(out)
}

/// CSV rows `m,A_m`.
pub fn functional_csv(a: &[f64], comments: &[String]) -> String {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    out.push_str("m,a\n");
    for (m, x) in a.iter().enumerate() {
        let _ = writeln!(out, "{m},{x}");
    }
    out
}
