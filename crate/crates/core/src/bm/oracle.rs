//! Closed-form hitting probabilities and mean hitting times of Brownian
//! motion on a metric tree.

use crate::error::{domain, Result};
use crate::trees::{MetricTree, TreeMeasure, TreePoint};

/// `P_σ(hit σ1 before σ2) = d(b(σ, σ1, σ2), σ2) / d(σ1, σ2)`.
pub fn hitting_probability_exact(t: &MetricTree, s: TreePoint, s1: TreePoint, s2: TreePoint) -> Result<f64> {
    let s = t.point(s.edge, s.offset)?;
    let s1 = t.point(s1.edge, s1.offset)?;
    let s2 = t.point(s2.edge, s2.offset)?;
    if s1 == s2 {
        return domain("hitting probability needs two distinct targets");
    }
    let b = t.branch_point(s, s1, s2);
    Ok((t.distance(b, s2) / t.distance(s1, s2)).clamp(0.0, 1.0))
}

/// `E_{σ1} h(σ2) = 2 ∫ d(b(σ, σ1, σ2), σ2) μ(dσ)`, where time runs at the
/// speed of `μ`.
pub fn mean_hitting_time_exact(t: &MetricTree, mu: &TreeMeasure, s1: TreePoint, s2: TreePoint) -> Result<f64> {
    if mu.node_count() != t.len() {
        return domain("measure lives on a different tree");
    }
    let s1 = t.point(s1.edge, s1.offset)?;
    let s2 = t.point(s2.edge, s2.offset)?;
    if s1 == s2 {
        return Ok(0.0);
    }
    let f = |p: TreePoint| t.distance(t.branch_point(p, s1, s2), s2);
    let mut total: f64 = mu.atoms().iter().map(|&(p, m)| m * f(p)).sum();
    for v in t.edges() {
        // The integrand is linear between these breaks, so the midpoint
        // rule on each sub-interval is exact.
        let mut breaks: Vec<f64> = [s1, s2]
            .iter()
            .filter(|p| p.edge == v && p.offset > 0.0)
            .map(|p| p.offset)
            .collect();
        breaks.sort_by(f64::total_cmp);
        for piece in mu.pieces(v) {
            let mut cuts = vec![piece.from];
            cuts.extend(breaks.iter().copied().filter(|&x| x > piece.from && x < piece.to));
            cuts.push(piece.to);
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                total += piece.density * (w[1] - w[0]) * f(TreePoint { edge: v, offset: mid });
            }
        }
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::DensityPiece;

    #[test]
    fn segment_hitting_probability() {
        let t = MetricTree::segment(1.0).unwrap();
        let s = t.point(1, 0.7).unwrap(); // distance 0.3 from the root
        let p = hitting_probability_exact(&t, s, TreePoint::node(0), TreePoint::node(1)).unwrap();
        assert!((p - 0.7).abs() < 1e-15);
        let q = hitting_probability_exact(&t, TreePoint::node(0), TreePoint::node(0), TreePoint::node(1)).unwrap();
        assert_eq!(q, 1.0);
        assert!(hitting_probability_exact(&t, s, s, s).is_err());
    }

    #[test]
    fn y_tree_hitting_probability() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let p = hitting_probability_exact(&t, TreePoint::node(0), TreePoint::node(1), TreePoint::node(2)).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_hitting_times() {
        let seg = MetricTree::segment(1.0).unwrap();
        let leb = TreeMeasure::normalized_length(&seg).unwrap();
        let e = mean_hitting_time_exact(&seg, &leb, TreePoint::node(0), TreePoint::node(1)).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
        assert_eq!(mean_hitting_time_exact(&seg, &leb, TreePoint::node(0), TreePoint::node(0)).unwrap(), 0.0);

        let y = MetricTree::star(&[1.0, 1.0, 1.0]).unwrap();
        let lam = TreeMeasure::normalized_length(&y).unwrap();
        let e = mean_hitting_time_exact(&y, &lam, TreePoint::node(0), TreePoint::node(1)).unwrap();
        assert!((e - 5.0 / 3.0).abs() < 1e-14);

        // Density 2 on the half of the segment nearest 0. Offsets run up from
        // the tip, so that half is [0.5, 1].
        let nu = TreeMeasure::new(
            &seg,
            vec![],
            vec![vec![], vec![DensityPiece { from: 0.5, to: 1.0, density: 2.0 }]],
        )
        .unwrap();
        let e = mean_hitting_time_exact(&seg, &nu, TreePoint::node(0), TreePoint::node(1)).unwrap();
        assert!((e - 1.5).abs() < 1e-14);
    }
}
