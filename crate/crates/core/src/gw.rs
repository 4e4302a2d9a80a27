//! Critical Galton-Watson trees conditioned on their size.

use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::Rng;
use crate::trees::OrderedTree;

/// Offspring laws with mean one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "offspring", rename_all = "kebab-case")]
pub enum OffspringLaw {
    /// `p_k = 2^{-(k+1)}`.
    GeometricHalf,
    /// `p_k = e^{-1} / k!`.
    PoissonOne,
    /// `p_k = c k^{-(1+alpha)}` for `k >= k0`, with `p_0` and `p_1` solved so
    /// that the law sums to one with mean one.
    #[serde(rename_all = "kebab-case")]
    StableTail { alpha: f64, tail_c: f64, k0: u32 },
}

impl OffspringLaw {
    pub const DEFAULT_STABLE: OffspringLaw = OffspringLaw::StableTail {
        alpha: 1.5,
        tail_c: 0.5,
        k0: 2,
    };

    pub fn name(&self) -> &'static str {
        match self {
            OffspringLaw::GeometricHalf => "geometric-half",
            OffspringLaw::PoissonOne => "poisson-1",
            OffspringLaw::StableTail { .. } => "stable-tail",
        }
    }
}

/// Hurwitz zeta `sum_{k >= q} k^{-s}` for `s > 1`, `q >= 1`, by direct
/// summation followed by an Euler-Maclaurin tail.
pub fn hurwitz_zeta(s: f64, q: u64) -> f64 {
    const N: u64 = 24;
    // B_{2j} / (2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let start = q + N;
    let mut sum: f64 = (q..start).map(|k| (k as f64).powf(-s)).sum();
    let x = start as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Rising product s (s+1) ... (s+2j-2) times x^{-s-2j+1}.
    let mut fact = s;
    let mut pow = x.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * fact * pow;
        let m = 2.0 * j as f64;
        fact *= (s + m + 1.0) * (s + m + 2.0);
        pow /= x * x;
    }
    sum
}

/// A validated offspring law with a constant-time sampler.
#[derive(Debug, Clone)]
pub struct OffspringDistribution {
    law: OffspringLaw,
    head: Vec<f64>,
    tail_mass: f64,
    alias: WeightedAliasIndex<f64>,
}

/// Probabilities below this index are tabulated; larger values are drawn
/// from the exact conditional tail.
const HEAD: usize = 64;

impl OffspringDistribution {
    pub fn new(law: OffspringLaw) -> Result<Self> {
        let (head, tail_mass) = match law {
            OffspringLaw::GeometricHalf => {
                let head: Vec<f64> = (0..HEAD).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
                (head, 0.5f64.powi(HEAD as i32))
            }
            OffspringLaw::PoissonOne => {
                let mut head = Vec::with_capacity(HEAD);
                let mut p = (-1.0f64).exp();
                for k in 0..HEAD {
                    head.push(p);
                    p /= (k + 1) as f64;
                }
                // Remaining terms are below 1e-89; sum them directly.
                let mut tail = 0.0;
                for k in HEAD..HEAD + 40 {
                    tail += p;
                    p /= (k + 1) as f64;
                }
                (head, tail)
            }
            OffspringLaw::StableTail { alpha, tail_c, k0 } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return domain(format!("stable-tail alpha must lie in (1, 2), got {alpha}"));
                }
                if !(tail_c > 0.0) || !tail_c.is_finite() {
                    return domain("stable-tail tail-c must be positive");
                }
                if k0 < 2 || k0 as usize >= HEAD {
                    return domain(format!("stable-tail k0 must lie in [2, {HEAD}), got {k0}"));
                }
                let k0 = k0 as u64;
                let tail_total = tail_c * hurwitz_zeta(1.0 + alpha, k0);
                let tail_mean = tail_c * hurwitz_zeta(alpha, k0);
                let p1 = 1.0 - tail_mean;
                if p1 < 0.0 {
                    return domain(format!(
                        "stable-tail tail-c = {tail_c} puts mean {tail_mean} above one on k >= {k0}"
                    ));
                }
                let p0 = tail_mean - tail_total;
                let mut head = vec![0.0; HEAD];
                head[0] = p0;
                head[1] = p1;
                for (k, slot) in head.iter_mut().enumerate().skip(k0 as usize) {
                    *slot = tail_c * (k as f64).powf(-(1.0 + alpha));
                }
                (head, tail_c * hurwitz_zeta(1.0 + alpha, HEAD as u64))
            }
        };
        let mut weights = head.clone();
        weights.push(tail_mass);
        let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::Domain(format!("offspring table: {e}")))?;
        Ok(Self {
            law,
            head,
            tail_mass,
            alias,
        })
    }

    pub fn law(&self) -> OffspringLaw {
        self.law
    }

    pub fn pmf(&self, k: usize) -> f64 {
        if k < HEAD {
            return self.head[k];
        }
        match self.law {
            OffspringLaw::GeometricHalf => 0.5f64.powf(k as f64 + 1.0),
            OffspringLaw::PoissonOne => {
                let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
                (-1.0 - ln_fact).exp()
            }
            OffspringLaw::StableTail { alpha, tail_c, .. } => tail_c * (k as f64).powf(-(1.0 + alpha)),
        }
    }

    /// Tail index: 2 for finite variance.
    pub fn tail_index(&self) -> f64 {
        match self.law {
            OffspringLaw::StableTail { alpha, .. } => alpha,
            _ => 2.0,
        }
    }

    /// Total mass and mean from the tabulated head plus analytic tails.
    pub fn mass_and_mean(&self) -> (f64, f64) {
        let mass: f64 = self.head.iter().sum::<f64>() + self.tail_mass;
        let head_mean: f64 = self.head.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let tail_mean = match self.law {
            // sum_{k>=K} k 2^{-(k+1)} = (K + 1) 2^{-K}
            OffspringLaw::GeometricHalf => (HEAD as f64 + 1.0) * 0.5f64.powi(HEAD as i32),
            OffspringLaw::PoissonOne => (HEAD..HEAD + 40).map(|k| k as f64 * self.pmf(k)).sum(),
            OffspringLaw::StableTail { alpha, tail_c, .. } => tail_c * hurwitz_zeta(alpha, HEAD as u64),
        };
        (mass, head_mean + tail_mean)
    }

    /// The tabulated probabilities `p_0 .. p_63`.
    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn sample(&self, rng: &mut Rng) -> u64 {
        let i = self.alias.sample(rng);
        if i < HEAD {
            return i as u64;
        }
        let k = HEAD as u64;
        match self.law {
            OffspringLaw::GeometricHalf => {
                // Memoryless: the excess over K is again geometric.
                let mut extra = 0;
                while rng.random::<bool>() {
                    extra += 1;
                }
                k + extra
            }
            OffspringLaw::PoissonOne => {
                let mut u = rng.random::<f64>() * self.tail_mass;
                let mut j = HEAD;
                loop {
                    let p = self.pmf(j);
                    if u < p || p == 0.0 {
                        return j as u64;
                    }
                    u -= p;
                    j += 1;
                }
            }
            OffspringLaw::StableTail { alpha, .. } => sample_power_tail(alpha, k, rng),
        }
    }
}

/// Draws `j >= k` with probability proportional to `j^{-(1+alpha)}` by
/// rejection from the floor of a Pareto variable.
fn sample_power_tail(alpha: f64, k: u64, rng: &mut Rng) -> u64 {
    let kf = k as f64;
    let bound = (1.0 + 1.0 / kf).powf(1.0 + alpha);
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let y = kf * u.powf(-1.0 / alpha);
        if y >= 1e18 {
            return u64::MAX / 4;
        }
        let j = y.floor();
        // Pareto floor mass: j^{-alpha} - (j+1)^{-alpha}, computed stably.
        let prop = j.powf(-alpha) * -(-alpha * (1.0 / j).ln_1p()).exp_m1();
        let ratio = alpha * j.powf(-(1.0 + alpha)) / prop;
        if rng.random::<f64>() * bound < ratio {
            return j as u64;
        }
    }
}

/// Steps `offspring - 1` of a depth-first vertex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LukasiewiczPath(pub Vec<i64>);

impl LukasiewiczPath {
    /// Validates that the partial sums stay non-negative and end at `-1`.
    pub fn new(steps: Vec<i64>) -> Result<Self> {
        let mut s = 0i64;
        for (i, &x) in steps.iter().enumerate() {
            if x < -1 {
                return domain(format!("step {x} below -1"));
            }
            s += x;
            if s < 0 && i + 1 != steps.len() {
                return domain(format!("path hits -1 early, at step {}", i + 1));
            }
        }
        if s != -1 {
            return domain(format!("path must end at -1, ends at {s}"));
        }
        Ok(Self(steps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The ordered tree whose depth-first vertex `i` has `steps[i] + 1`
    /// children; vertices are labelled in preorder.
    pub fn decode(&self) -> Result<OrderedTree> {
        let n = self.0.len();
        if n == 0 {
            return domain("empty path");
        }
        let mut children = vec![Vec::new(); n];
        // (vertex, children still to attach)
        let mut stack: Vec<(usize, i64)> = Vec::new();
        for (i, &x) in self.0.iter().enumerate() {
            if i > 0 {
                let Some(top) = stack.last_mut() else {
                    return domain(format!("path hits -1 early, at step {i}"));
                };
                children[top.0].push(i);
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            if x < -1 {
                return domain(format!("step {x} below -1"));
            }
            if x >= 0 {
                stack.push((i, x + 1));
            }
        }
        if !stack.is_empty() {
            return domain("path does not end at -1");
        }
        OrderedTree::from_children(0, children)
    }
}

/// Encodes a tree by its depth-first offspring counts.
pub fn lukasiewicz(t: &OrderedTree) -> LukasiewiczPath {
    LukasiewiczPath(t.preorder().iter().map(|&v| t.children(v).len() as i64 - 1).collect())
}

/// Every Łukasiewicz path of length `n`, i.e. every ordered tree with `n`
/// vertices, in lexicographic order of steps.
pub fn enumerate_lukasiewicz(n: usize) -> Vec<LukasiewiczPath> {
    fn go(n: usize, sum: i64, cur: &mut Vec<i64>, out: &mut Vec<LukasiewiczPath>) {
        let left = (n - cur.len()) as i64;
        if left == 0 {
            if sum == -1 {
                out.push(LukasiewiczPath(cur.clone()));
            }
            return;
        }
        // Each later step is at least -1, so the sum after this step may
        // not exceed left - 2.
        for x in -1..=(left - 2 - sum) {
            let s = sum + x;
            if (left > 1 && s < 0) || (left == 1 && s != -1) {
                continue;
            }
            cur.push(x);
            go(n, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        go(n, 0, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Rotation making an increment sequence with sum `-1` a Łukasiewicz path:
/// start right after the first position where the partial sum is minimal.
pub fn cycle_lemma_rotation(steps: &[i64]) -> Result<usize> {
    if steps.iter().sum::<i64>() != -1 {
        return domain("cycle lemma needs increments summing to -1");
    }
    let mut s = 0;
    let mut best = (i64::MAX, 0);
    for (i, &x) in steps.iter().enumerate() {
        s += x;
        if s < best.0 {
            best = (s, i);
        }
    }
    Ok((best.1 + 1) % steps.len())
}

pub const DEFAULT_RETRY_BUDGET: u64 = 10_000_000;

/// Exact draw from the law of the tree conditioned to have `n` vertices.
pub fn sample_conditioned_tree(dist: &OffspringDistribution, n: usize, rng: &mut Rng) -> Result<OrderedTree> {
    sample_conditioned_tree_with_budget(dist, n, rng, DEFAULT_RETRY_BUDGET)
}

pub fn sample_conditioned_tree_with_budget(
    dist: &OffspringDistribution,
    n: usize,
    rng: &mut Rng,
    budget: u64,
) -> Result<OrderedTree> {
    Ok(sample_conditioned_path(dist, n, rng, budget)?.decode()?)
}

/// Rejection on the event that `n` offspring counts sum to `n - 1`, then
/// the cycle-lemma rotation.
pub fn sample_conditioned_path(
    dist: &OffspringDistribution,
    n: usize,
    rng: &mut Rng,
    budget: u64,
) -> Result<LukasiewiczPath> {
    if n == 0 {
        return domain("tree size must be positive");
    }
    let target = (n - 1) as u64;
    let mut xi = vec![0u64; n];
    for _ in 0..budget {
        let mut sum = 0u64;
        let mut ok = true;
        for slot in xi.iter_mut() {
            *slot = dist.sample(rng);
            sum = sum.saturating_add(*slot);
            if sum > target {
                ok = false;
                break;
            }
        }
        if !ok || sum != target {
            continue;
        }
        let steps: Vec<i64> = xi.iter().map(|&k| k as i64 - 1).collect();
        let r = cycle_lemma_rotation(&steps)?;
        let rotated = steps[r..].iter().chain(&steps[..r]).copied().collect();
        return LukasiewiczPath::new(rotated);
    }
    Err(Error::RetryExhausted { attempts: budget })
}

/// The pair `(a_n, alpha_n)` with `alpha_n = n / a_n`.
///
/// Finite-variance laws use `a_n = sqrt(n)`. For the stable tail, `a_n`
/// solves `a_n^alpha = n c Γ(2 - alpha) / (alpha (alpha - 1))`, which makes
/// the centred sum of `n` offspring counts over `a_n` converge to the
/// stable law with Laplace exponent `λ^alpha`. Size one gives `(1, 1)`.
pub fn scaling_sequence(law: &OffspringLaw, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return domain("size must be positive");
    }
    if n == 1 {
        return Ok((1.0, 1.0));
    }
    let nf = n as f64;
    let a = match *law {
        OffspringLaw::GeometricHalf | OffspringLaw::PoissonOne => nf.sqrt(),
        OffspringLaw::StableTail { alpha, tail_c, .. } => {
            let g = statrs::function::gamma::gamma(2.0 - alpha);
            (nf * tail_c * g / (alpha * (alpha - 1.0))).powf(1.0 / alpha)
        }
    };
    Ok((a, nf / a))
}

/// Conditional probability of each tree shape under the size-`n` law,
/// alongside the shapes' Łukasiewicz paths.
pub fn shape_probabilities(dist: &OffspringDistribution, n: usize) -> Vec<(LukasiewiczPath, f64)> {
    let paths = enumerate_lukasiewicz(n);
    let weights: Vec<f64> = paths
        .iter()
        .map(|p| p.0.iter().map(|&x| dist.pmf((x + 1) as usize)).product())
        .collect();
    let z: f64 = weights.iter().sum();
    paths.into_iter().zip(weights).map(|(p, w)| (p, w / z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    fn cherry() -> OrderedTree {
        OrderedTree::from_children(0, vec![vec![1, 2], vec![], vec![]]).unwrap()
    }

    #[test]
    fn hurwitz_matches_riemann_values() {
        // ζ(2) = π²/6, ζ(4) = π⁴/90
        let pi = std::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1) - pi * pi / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(4.0, 1) - pi.powi(4) / 90.0).abs() < 1e-14);
        assert!((hurwitz_zeta(2.0, 3) - (pi * pi / 6.0 - 1.25)).abs() < 1e-14);
    }

    #[test]
    fn laws_are_critical_probability_laws() {
        for law in [OffspringLaw::GeometricHalf, OffspringLaw::PoissonOne, OffspringLaw::DEFAULT_STABLE] {
            let d = OffspringDistribution::new(law).unwrap();
            let (mass, mean) = d.mass_and_mean();
            assert!((mass - 1.0).abs() < 1e-9, "{law:?} mass {mass}");
            assert!((mean - 1.0).abs() < 1e-9, "{law:?} mean {mean}");
        }
        let d = OffspringDistribution::new(OffspringLaw::DEFAULT_STABLE).unwrap();
        assert!((d.pmf(0) - 0.6349).abs() < 1e-3);
        assert!((d.pmf(1) - 0.1937).abs() < 1e-3);
    }

    #[test]
    fn invalid_stable_parameters() {
        let bad = |alpha, tail_c, k0| OffspringDistribution::new(OffspringLaw::StableTail { alpha, tail_c, k0 }).is_err();
        assert!(bad(2.5, 0.5, 2));
        assert!(bad(1.0, 0.5, 2));
        assert!(bad(1.5, 5.0, 2));
        assert!(bad(1.5, 0.5, 1));
    }

    #[test]
    fn lukasiewicz_examples() {
        assert_eq!(lukasiewicz(&OrderedTree::path(3).unwrap()).0, vec![0, 0, -1]);
        assert_eq!(lukasiewicz(&cherry()).0, vec![1, -1, -1]);
        assert_eq!(LukasiewiczPath(vec![1, -1, -1]).decode().unwrap(), cherry());
        assert!(LukasiewiczPath(vec![-1, 1, -1]).decode().is_err());
        assert!(LukasiewiczPath::new(vec![0, -1, 0]).is_err());
    }

    #[test]
    fn enumeration_counts_are_catalan() {
        let catalan = [1, 1, 2, 5, 14, 42, 132, 429, 1430];
        for n in 1..=9 {
            assert_eq!(enumerate_lukasiewicz(n).len(), catalan[n - 1], "n = {n}");
        }
    }

    #[test]
    fn cycle_lemma_unique_rotation_exhaustive() {
        // Every sequence of n steps in {-1, .., n-1} summing to -1.
        for n in 1..=8usize {
            let mut steps = vec![-1i64; n];
            loop {
                if steps.iter().sum::<i64>() == -1 {
                    let valid: Vec<usize> = (0..n)
                        .filter(|&r| {
                            let rot: Vec<i64> = steps[r..].iter().chain(&steps[..r]).copied().collect();
                            LukasiewiczPath::new(rot).is_ok()
                        })
                        .collect();
                    assert_eq!(valid, vec![cycle_lemma_rotation(&steps).unwrap()], "{steps:?}");
                }
                // Odometer increment over {-1, .., n-1}^n.
                let mut i = 0;
                while i < n && steps[i] == n as i64 - 1 {
                    steps[i] = -1;
                    i += 1;
                }
                if i == n {
                    break;
                }
                steps[i] += 1;
            }
        }
    }

    #[test]
    fn shape_probabilities_for_three_vertices() {
        let geo = OffspringDistribution::new(OffspringLaw::GeometricHalf).unwrap();
        for (_, p) in shape_probabilities(&geo, 3) {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let poi = OffspringDistribution::new(OffspringLaw::PoissonOne).unwrap();
        for (path, p) in shape_probabilities(&poi, 3) {
            let want = if path.0 == vec![0, 0, -1] { 2.0 / 3.0 } else { 1.0 / 3.0 };
            assert!((p - want).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_trees_have_requested_size() {
        let mut rng = replica_rng(11, 0);
        for law in [OffspringLaw::GeometricHalf, OffspringLaw::PoissonOne, OffspringLaw::DEFAULT_STABLE] {
            let d = OffspringDistribution::new(law).unwrap();
            for n in [1, 2, 7, 200] {
                assert_eq!(sample_conditioned_tree(&d, n, &mut rng).unwrap().len(), n);
            }
        }
        let d = OffspringDistribution::new(OffspringLaw::GeometricHalf).unwrap();
        assert!(sample_conditioned_tree(&d, 0, &mut rng).is_err());
        match sample_conditioned_tree_with_budget(&d, 1000, &mut rng, 1) {
            Err(Error::RetryExhausted { attempts: 1 }) | Ok(_) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_tail_sampler_matches_law() {
        // Conditional law on j >= 4 of j^{-2.5}: check P(j = 4).
        let mut rng = replica_rng(5, 0);
        let trials = 200_000;
        let hits = (0..trials).filter(|_| sample_power_tail(1.5, 4, &mut rng) == 4).count();
        let p = 4f64.powf(-2.5) / hurwitz_zeta(2.5, 4);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn scaling_sequences() {
        let (a, al) = scaling_sequence(&OffspringLaw::GeometricHalf, 100).unwrap();
        assert!((a - 10.0).abs() < 1e-12 && (al - 10.0).abs() < 1e-12);
        assert_eq!(scaling_sequence(&OffspringLaw::DEFAULT_STABLE, 1).unwrap(), (1.0, 1.0));
        let (_, a1) = scaling_sequence(&OffspringLaw::DEFAULT_STABLE, 1000).unwrap();
        let (_, a2) = scaling_sequence(&OffspringLaw::DEFAULT_STABLE, 8000).unwrap();
        // alpha_n grows like n^{1 - 1/alpha} = n^{1/3}.
        assert!((a2 / a1 - 2.0).abs() < 1e-9);
    }
}
