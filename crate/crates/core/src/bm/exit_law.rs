//! Exit law from a small neighbourhood of a branch point.

use crate::error::{domain, Result};
use crate::trees::{MetricTree, TreePoint};

/// Exit probabilities for Brownian motion started at distance `ε/2` from a
/// point `b` along direction `C`, stopped on reaching distance `ε` from `b`.
///
/// `probs[c][j]` is the chance of leaving through direction `j` when started
/// in direction `c`: `(1 + d) / (2d)` for `j = c` and `1 / (2d)` otherwise,
/// where `d` is the number of directions at `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitLaw {
    pub probs: Vec<Vec<f64>>,
}

impl ExitLaw {
    pub fn degree(&self) -> usize {
        self.probs.len()
    }
}

/// Half the smallest distance between distinct vertices around `b`: the
/// tree's nodes together with `b` itself.
pub fn exit_radius_bound(t: &MetricTree, b: TreePoint) -> Result<f64> {
    let b = t.point(b.edge, b.offset)?;
    let mut min = t.shortest_edge().unwrap_or(f64::INFINITY);
    if !b.is_node() {
        min = min.min(b.offset).min(t.edge_length(b.edge) - b.offset);
    }
    Ok(0.5 * min)
}

/// Number of directions at a point: the node degree, or 2 inside an edge.
pub fn directions(t: &MetricTree, b: TreePoint) -> usize {
    if b.is_node() {
        t.degree(b.edge)
    } else {
        2
    }
}

pub fn branch_exit_law(t: &MetricTree, b: TreePoint, eps: f64) -> Result<ExitLaw> {
    let bound = exit_radius_bound(t, b)?;
    if !(eps > 0.0 && eps < bound) {
        return domain(format!("exit radius {eps} must lie in (0, {bound})"));
    }
    let b = t.point(b.edge, b.offset)?;
    let d = directions(t, b);
    if d == 0 {
        return domain("a single-point tree has no exits");
    }
    let same = (1.0 + d as f64) / (2.0 * d as f64);
    let other = 1.0 / (2.0 * d as f64);
    let probs = (0..d)
        .map(|c| (0..d).map(|j| if j == c { same } else { other }).collect())
        .collect();
    Ok(ExitLaw { probs })
}

/// A resistor network with some nodes held at fixed voltages.
#[derive(Debug, Clone, Default)]
pub struct ResistorNetwork {
    nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl ResistorNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { nodes, edges: Vec::new() }
    }

    pub fn add_resistor(&mut self, a: usize, b: usize, resistance: f64) {
        self.edges.push((a, b, resistance));
    }

    /// Voltages with `fixed` nodes clamped, by Gaussian elimination with
    /// partial pivoting on the free nodes' Kirchhoff equations.
    pub fn voltages(&self, fixed: &[(usize, f64)]) -> Result<Vec<f64>> {
        let n = self.nodes;
        let mut clamp = vec![None; n];
        for &(v, x) in fixed {
            clamp[v] = Some(x);
        }
        let free: Vec<usize> = (0..n).filter(|&v| clamp[v].is_none()).collect();
        let mut idx = vec![usize::MAX; n];
        for (i, &v) in free.iter().enumerate() {
            idx[v] = i;
        }
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m];
        for &(u, v, r) in &self.edges {
            let g = 1.0 / r;
            for (x, y) in [(u, v), (v, u)] {
                if idx[x] == usize::MAX {
                    continue;
                }
                let i = idx[x];
                a[i][i] += g;
                match clamp[y] {
                    Some(val) => a[i][m] += g * val,
                    None => a[i][idx[y]] -= g,
                }
            }
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            if a[piv][col].abs() < 1e-300 {
                return domain("network has a floating component");
            }
            a.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    if f != 0.0 {
                        for c in col..=m {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; n];
        for v in 0..n {
            out[v] = match clamp[v] {
                Some(x) => x,
                None => a[idx[v]][m] / a[idx[v]][idx[v]],
            };
        }
        Ok(out)
    }
}

/// Exit probabilities from the electrical network on the `d`-star of radius
/// `eps`: start node `x` sits `eps/2` out along direction `c`.
pub fn exit_law_electrical(d: usize, eps: f64) -> Result<ExitLaw> {
    // Node 0 is the centre, 1 is x, 2.. are the exits y_0 .. y_{d-1}.
    let mut probs = Vec::with_capacity(d);
    for c in 0..d {
        let mut net = ResistorNetwork::new(d + 2);
        net.add_resistor(0, 1, eps / 2.0);
        for j in 0..d {
            if j == c {
                net.add_resistor(1, 2 + j, eps / 2.0);
            } else {
                net.add_resistor(0, 2 + j, eps);
            }
        }
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let fixed: Vec<(usize, f64)> = (0..d).map(|i| (2 + i, if i == j { 1.0 } else { 0.0 })).collect();
            row.push(net.voltages(&fixed)?[1]);
        }
        probs.push(row);
    }
    Ok(ExitLaw { probs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_three_table() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let law = branch_exit_law(&t, TreePoint::node(0), 0.2).unwrap();
        assert_eq!(law.probs[0], vec![2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]);
    }

    #[test]
    fn endpoint_continues_surely() {
        let t = MetricTree::segment(1.0).unwrap();
        let law = branch_exit_law(&t, TreePoint::node(1), 0.2).unwrap();
        assert_eq!(law.probs, vec![vec![1.0]]);
    }

    #[test]
    fn radius_must_be_small() {
        let t = MetricTree::star(&[1.0, 0.4, 3.0]).unwrap();
        assert!(branch_exit_law(&t, TreePoint::node(0), 0.2).is_err());
        assert!(branch_exit_law(&t, TreePoint::node(0), 0.0).is_err());
        assert!(branch_exit_law(&t, TreePoint::node(0), 0.19).is_ok());
        let mid = t.point(3, 0.5).unwrap();
        assert!(branch_exit_law(&t, mid, 0.3).is_err());
    }

    #[test]
    fn electrical_degree_four() {
        let law = exit_law_electrical(4, 0.1).unwrap();
        let want = [5.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0];
        for (got, want) in law.probs[0].iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
