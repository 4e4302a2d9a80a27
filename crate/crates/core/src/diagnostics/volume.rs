use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::trees::{MetricTree, OrderedTree, TreeMeasure, TreePoint, VertexMeasure};

/// Smallest ball mass over a set of centres, for each radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeProfile {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return domain("need at least one radius");
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return domain("radii must be positive");
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return domain("radii must be increasing");
    }
    Ok(())
}

/// Distances from `p` to every node, and whether each node is reached from
/// one of its children (so that `p` lies below it).
fn node_distances(t: &MetricTree, p: TreePoint) -> (Vec<f64>, Vec<bool>) {
    let n = t.len();
    let mut dist = vec![f64::NAN; n];
    let mut from_below = vec![false; n];
    let mut stack = Vec::new();
    dist[p.edge] = p.offset;
    stack.push(p.edge);
    if !p.is_node() {
        let up = t.parent(p.edge).unwrap();
        dist[up] = t.edge_length(p.edge) - p.offset;
        from_below[up] = true;
        stack.push(up);
    }
    while let Some(v) = stack.pop() {
        if let Some(u) = t.parent(v) {
            if dist[u].is_nan() {
                dist[u] = dist[v] + t.edge_length(v);
                from_below[u] = true;
                stack.push(u);
            }
        }
        for &c in t.children(v) {
            if dist[c].is_nan() {
                dist[c] = dist[v] + t.edge_length(c);
                stack.push(c);
            }
        }
    }
    (dist, from_below)
}

/// `μ(B(p, r))` for the open ball, computed edge by edge.
pub fn ball_mass(t: &MetricTree, mu: &TreeMeasure, p: TreePoint, r: f64) -> f64 {
    let (dist, from_below) = node_distances(t, p);
    ball_mass_with(t, mu, p, r, &dist, &from_below)
}

fn ball_mass_with(t: &MetricTree, mu: &TreeMeasure, p: TreePoint, r: f64, dist: &[f64], from_below: &[bool]) -> f64 {
    let mut mass: f64 = mu.atoms().iter().filter(|a| t.distance(p, a.0) < r).map(|a| a.1).sum();
    for v in t.edges() {
        if mu.pieces(v).is_empty() {
            continue;
        }
        let len = t.edge_length(v);
        let (lo, hi) = if !p.is_node() && p.edge == v {
            (p.offset - r, p.offset + r)
        } else if from_below[v] || p.edge == v {
            (0.0, r - dist[v])
        } else {
            let up = dist[t.parent(v).unwrap()];
            (len - (r - up), len)
        };
        let (lo, hi) = (lo.max(0.0), hi.min(len));
        if hi > lo {
            mass += mu.density_mass_between(v, lo, hi);
        }
    }
    mass
}

/// Minimum ball mass over a net of centres with the given spacing (default
/// a quarter of the smallest radius) plus all nodes.
pub fn ball_volume_profile(t: &MetricTree, mu: &TreeMeasure, radii: &[f64], spacing: Option<f64>) -> Result<VolumeProfile> {
    check_radii(radii)?;
    let h = spacing.unwrap_or(radii[0] / 4.0);
    if !(h > 0.0) {
        return domain("net spacing must be positive");
    }
    let mut volumes = vec![f64::INFINITY; radii.len()];
    for p in t.net(h) {
        let (dist, from_below) = node_distances(t, p);
        for (i, &r) in radii.iter().enumerate() {
            volumes[i] = volumes[i].min(ball_mass_with(t, mu, p, r, &dist, &from_below));
        }
    }
    Ok(VolumeProfile {
        radii: radii.to_vec(),
        volumes,
    })
}

/// Exact profile over all vertices of a graph tree with graph distance.
pub fn graph_ball_volume_profile(t: &OrderedTree, mu: &VertexMeasure, radii: &[f64]) -> Result<VolumeProfile> {
    check_radii(radii)?;
    if mu.0.len() != t.len() {
        return domain("measure lives on a different tree");
    }
    let n = t.len();
    let mut volumes = vec![f64::INFINITY; radii.len()];
    let mut hist = vec![0.0; n];
    for s in 0..n {
        let dist = t.distances_from(s);
        hist.iter_mut().for_each(|x| *x = 0.0);
        for (v, &d) in dist.iter().enumerate() {
            hist[d] += mu.0[v];
        }
        // Open ball: distances d < r, i.e. d <= ⌈r⌉ - 1.
        let mut acc = 0.0;
        let mut d = 0usize;
        for (i, &r) in radii.iter().enumerate() {
            let bound = (r.ceil() as usize).min(n);
            while d < bound {
                acc += hist[d];
                d += 1;
            }
            volumes[i] = volumes[i].min(acc);
        }
    }
    Ok(VolumeProfile {
        radii: radii.to_vec(),
        volumes,
    })
}

/// Minimal number of open balls of radius `r` covering the whole tree.
///
/// Greedy bottom-up sweep with closed balls of radius just below `r`: a
/// centre is placed only when some uncovered point would otherwise fall out
/// of reach, and as high as possible.
pub fn covering_number(t: &MetricTree, r: f64) -> Result<usize> {
    if !(r > 0.0) || !r.is_finite() {
        return domain("covering radius must be positive");
    }
    #[derive(Clone, Copy)]
    enum State {
        // Farthest uncovered point below, at this distance.
        Uncovered(f64),
        // Everything below is covered; a ball reaches this far above.
        Covered(f64),
    }
    let rad = r * (1.0 - 1e-9);
    let mut count = 0usize;
    let mut state = vec![State::Uncovered(0.0); t.len()];
    for &v in t.preorder().iter().rev() {
        // Merge the children's states, already carried up to v.
        let mut need: Option<f64> = None;
        let mut reach: Option<f64> = None;
        for &c in t.children(v) {
            let mut left = t.edge_length(c);
            let mut s = state[c];
            let top = loop {
                match s {
                    State::Uncovered(u) if u + left <= rad => break State::Uncovered(u + left),
                    State::Uncovered(u) => {
                        count += 1;
                        left -= rad - u;
                        s = State::Covered(rad);
                    }
                    State::Covered(x) if x >= left => break State::Covered(x - left),
                    State::Covered(x) => {
                        left -= x;
                        s = State::Uncovered(0.0);
                    }
                }
            };
            match top {
                State::Uncovered(u) => need = Some(need.map_or(u, |n: f64| n.max(u))),
                State::Covered(x) => reach = Some(reach.map_or(x, |m: f64| m.max(x))),
            }
        }
        state[v] = match (need, reach) {
            (None, None) => State::Uncovered(0.0),
            (None, Some(x)) => State::Covered(x),
            (Some(u), Some(x)) if x >= u => State::Covered(x),
            (Some(u), _) => State::Uncovered(u),
        };
    }
    if let State::Uncovered(_) = state[t.root()] {
        count += 1;
    }
    Ok(count)
}

/// Least-squares fit of `ln v` against `ln r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln v(r) + γ ln ln(1/r) = intercept + slope · ln r`, where `γ` is
/// the optional log-correction exponent (which needs all radii below 1).
pub fn exponent_fit(profile: &VolumeProfile, log_correction: Option<f64>) -> Result<ExponentFit> {
    let (r, v) = (&profile.radii, &profile.volumes);
    if r.len() < 4 || r.len() != v.len() {
        return domain("exponent fit needs at least four radii");
    }
    let (rmin, rmax) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if rmax / rmin < 10.0 * (1.0 - 1e-12) {
        return domain("radii must span at least one decade");
    }
    if v.iter().any(|x| !(*x > 0.0)) {
        return domain("volumes must be positive to take logarithms");
    }
    if log_correction.is_some() && rmax >= 1.0 {
        return domain("log correction needs radii below 1");
    }
    let xs: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = r
        .iter()
        .zip(v)
        .map(|(&r, &v)| v.ln() + log_correction.map_or(0.0, |g| g * (1.0 / r).ln().ln()))
        .collect();
    Ok(least_squares(&xs, &ys))
}

pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> ExponentFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    ExponentFit {
        slope,
        intercept,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_profile() {
        let t = MetricTree::segment(1.0).unwrap();
        let mu = TreeMeasure::normalized_length(&t).unwrap();
        let p = ball_volume_profile(&t, &mu, &[0.1, 0.5, 2.0], None).unwrap();
        assert!((p.volumes[0] - 0.1).abs() < 1e-12);
        assert!((p.volumes[1] - 0.5).abs() < 1e-12);
        assert!((p.volumes[2] - 1.0).abs() < 1e-12);
        assert!(ball_volume_profile(&t, &mu, &[], None).is_err());
    }

    #[test]
    fn ball_mass_crosses_branch() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let mu = TreeMeasure::uniform_length(&t, 1.0).unwrap();
        let p = t.point(1, 0.5).unwrap();
        // 0.5 on arm 1 either side, then 0.5 into arms 2 and 3.
        assert!((ball_mass(&t, &mu, p, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn graph_path_profile() {
        let n = 10;
        let t = OrderedTree::path(n).unwrap();
        let p = graph_ball_volume_profile(&t, &VertexMeasure::uniform(n), &[1.0, 2.5, 4.0]).unwrap();
        for (v, want) in p.volumes.iter().zip([0.1, 0.3, 0.4]) {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn covering_examples() {
        let seg = MetricTree::segment(1.0).unwrap();
        assert_eq!(covering_number(&seg, 0.3).unwrap(), 2);
        assert_eq!(covering_number(&seg, 0.51).unwrap(), 1);
        let y = MetricTree::star(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(covering_number(&y, 0.5).unwrap(), 4);
        assert_eq!(covering_number(&y, 1.01).unwrap(), 1);
        assert!(covering_number(&y, 0.0).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let radii: Vec<f64> = (0..6).map(|i| 0.01 * 2f64.powi(i)).collect();
        let cube = VolumeProfile {
            volumes: radii.iter().map(|r| r.powi(3)).collect(),
            radii: radii.clone(),
        };
        let f = exponent_fit(&cube, None).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-9);
        let sq = VolumeProfile {
            volumes: radii.iter().map(|r| 0.5 * r * r).collect(),
            radii: radii.clone(),
        };
        let f = exponent_fit(&sq, None).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9);
        assert!((f.intercept - 0.5f64.ln()).abs() < 1e-9);
        let corrected = VolumeProfile {
            volumes: radii.iter().map(|r| r.powi(3) * (1.0 / r).ln().powf(-3.0)).collect(),
            radii,
        };
        let f = exponent_fit(&corrected, Some(3.0)).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_profiles_rejected() {
        let p = VolumeProfile {
            radii: vec![1.0, 2.0, 3.0, 4.0],
            volumes: vec![1.0; 4],
        };
        assert!(exponent_fit(&p, None).is_err());
        let z = VolumeProfile {
            radii: vec![1.0, 2.0, 5.0, 10.0],
            volumes: vec![0.0, 1.0, 1.0, 1.0],
        };
        assert!(exponent_fit(&z, None).is_err());
    }
}
