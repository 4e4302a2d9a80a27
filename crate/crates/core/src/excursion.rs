//! Piecewise-linear excursions, the tree pseudo-metric they induce, and the
//! depth-first (search-depth) encoding of ordered trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::trees::{MetricTree, OrderedTree, TreeBuilder};

/// A continuous piecewise-linear function on `[0, 1]` vanishing at both ends.
#[derive(Debug, Clone)]
pub struct Excursion {
    times: Vec<f64>,
    values: Vec<f64>,
    // sparse[j][i] = min of values[i .. i + 2^j]
    sparse: Vec<Vec<f64>>,
}

impl Excursion {
    /// Requires a strictly increasing grid from 0 to 1, zero end values and
    /// strictly positive values at every interior breakpoint.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let e = Self::new_nonnegative(times, values)?;
        let m = e.values.len();
        if let Some(i) = (1..m - 1).find(|&i| e.values[i] <= 0.0) {
            return domain(format!("excursion vanishes at interior time {}", e.times[i]));
        }
        Ok(e)
    }

    /// Like [`Excursion::new`] but allows interior zeros, as in the
    /// search-depth function of a tree whose root has several children.
    pub fn new_nonnegative(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = times.len();
        if m < 2 || values.len() != m {
            return domain("an excursion needs matching grids of at least two points");
        }
        if times[0] != 0.0 || times[m - 1] != 1.0 {
            return domain("excursion grid must run from 0 to 1");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("excursion grid must be strictly increasing");
        }
        if values[0] != 0.0 || values[m - 1] != 0.0 {
            return domain("excursion must vanish at 0 and 1");
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain("excursion values must be finite and non-negative");
        }
        let mut sparse = vec![values.clone()];
        let mut width = 1;
        while 2 * width <= m {
            let prev = sparse.last().unwrap();
            let next = (0..=m - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            sparse.push(next);
            width *= 2;
        }
        Ok(Self { times, values, sparse })
    }

    /// The tent `min(t, 1 - t)`.
    pub fn triangle() -> Self {
        Self::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.0]).unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn check_time(s: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&s) {
            return domain(format!("time {s} outside [0, 1]"));
        }
        Ok(())
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Self::check_time(s)?;
        Ok(self.eval(s))
    }

    fn eval(&self, s: f64) -> f64 {
        let i = self.times.partition_point(|&t| t <= s);
        if i == 0 {
            return self.values[0];
        }
        if i == self.times.len() {
            return self.values[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (s - t0) / (t1 - t0)
    }

    fn range_min(&self, lo: usize, hi: usize) -> f64 {
        let j = (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize;
        self.sparse[j][lo].min(self.sparse[j][hi + 1 - (1 << j)])
    }

    /// Infimum of the function over the closed interval between `s` and `t`.
    pub fn inf_between(&self, s: f64, t: f64) -> Result<f64> {
        Self::check_time(s)?;
        Self::check_time(t)?;
        Ok(self.inf_unchecked(s.min(t), s.max(t)))
    }

    fn inf_unchecked(&self, s: f64, t: f64) -> f64 {
        let mut m = self.eval(s).min(self.eval(t));
        let lo = self.times.partition_point(|&x| x <= s);
        let hi = self.times.partition_point(|&x| x < t);
        if lo < hi {
            m = m.min(self.range_min(lo, hi - 1));
        }
        m
    }

    /// The tree pseudo-distance `w(s) + w(t) - 2 inf_{[s∧t, s∨t]} w`.
    pub fn distance(&self, s: f64, t: f64) -> Result<f64> {
        let m = self.inf_between(s, t)?;
        Ok((self.eval(s) + self.eval(t) - 2.0 * m).max(0.0))
    }

    /// CSV with a `t,value` header.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
        out.push_str("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        match rows.next() {
            Some((_, h)) if h.trim() == "t,value" => {}
            Some((i, _)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected header `t,value`".into(),
                })
            }
            None => return domain("empty excursion file"),
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, l) in rows {
            let bad = || Error::Parse {
                line: i + 1,
                message: format!("expected two numbers, got `{l}`"),
            };
            let (a, b) = l.trim().split_once(',').ok_or_else(bad)?;
            times.push(a.trim().parse::<f64>().map_err(|_| bad())?);
            values.push(b.trim().parse::<f64>().map_err(|_| bad())?);
        }
        Self::new_nonnegative(times, values)
    }
}

/// The metric tree spanned by the root `0` and the classes of the sample
/// times `u`, with `u` as its marks in the given order.
pub fn tree_from_excursion(w: &Excursion, u: &[f64]) -> Result<MetricTree> {
    if u.is_empty() {
        return domain("leaf sample must be non-empty");
    }
    for &s in u {
        Excursion::check_time(s)?;
    }
    let tol = 1e-12 * w.max_value().max(1.0);
    let mut b = TreeBuilder::new();
    // Inserted sample times with their builder node and height.
    let mut placed: BTreeMap<u64, (f64, usize, f64)> = BTreeMap::new();
    let mut marks = Vec::with_capacity(u.len());
    for &s in u {
        // Adding zero folds -0.0 into 0.0 so bit order matches numeric order.
        let s = s + 0.0;
        let key = s.to_bits();
        if placed.contains_key(&key) {
            return domain(format!("duplicate sample time {s}"));
        }
        let h = w.eval(s);
        // The deepest meet with earlier leaves is attained at a neighbour in
        // time order, since the infimum only shrinks on wider intervals.
        let mut best: Option<(f64, usize, f64)> = None;
        let left = placed.range(..key).next_back().map(|(_, v)| *v);
        let right = placed.range(key..).next().map(|(_, v)| *v);
        for (t, node, ht) in left.into_iter().chain(right) {
            let g = w.inf_unchecked(s.min(t), s.max(t));
            if best.is_none_or(|bst| g > bst.0) {
                best = Some((g, node, ht));
            }
        }
        let attach = match best {
            None => b.root(),
            Some((g, node, ht)) => b.climb_split(node, ht - g, tol),
        };
        let base = match best {
            None => 0.0,
            Some((g, _, _)) => g,
        };
        let node = if h - base > tol { b.add_child(attach, h - base) } else { attach };
        placed.insert(key, (s, node, h));
        marks.push(node);
    }
    Ok(b.finish(&[], &marks).0)
}

/// The depth-first walk of an ordered tree and its search-depth function.
#[derive(Debug, Clone)]
pub struct SearchDepth {
    excursion: Excursion,
    walk: Vec<usize>,
}

/// Depth-first traversal visiting children in order, each edge once down and
/// once up; the final steps up to `2n` hold at the root.
pub fn search_depth(t: &OrderedTree) -> SearchDepth {
    let n = t.len();
    let mut walk = Vec::with_capacity(2 * n + 1);
    // (vertex, index of next child to visit)
    let mut stack = vec![(t.root(), 0usize)];
    walk.push(t.root());
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        if *next < t.children(v).len() {
            let c = t.children(v)[*next];
            *next += 1;
            walk.push(c);
            stack.push((c, 0));
        } else {
            stack.pop();
            if let Some(&(p, _)) = stack.last() {
                walk.push(p);
            }
        }
    }
    walk.resize(2 * n + 1, t.root());
    let m = 2 * n;
    let times = (0..=m).map(|i| i as f64 / m as f64).collect();
    let values = walk.iter().map(|&v| t.depth(v) as f64).collect();
    let excursion = Excursion::new_nonnegative(times, values).expect("depth-first walk is a valid excursion");
    SearchDepth { excursion, walk }
}

impl SearchDepth {
    pub fn excursion(&self) -> &Excursion {
        &self.excursion
    }

    /// Vertices visited at grid steps `0..=2n`.
    pub fn walk(&self) -> &[usize] {
        &self.walk
    }

    fn steps(&self) -> usize {
        self.walk.len() - 1
    }

    /// Grid index chosen for time `s`: the neighbouring grid point with the
    /// floor kept when its depth is at least that of the ceiling.
    pub fn grid_index(&self, s: f64) -> Result<usize> {
        Excursion::check_time(s)?;
        let m = self.steps() as f64;
        let x = s * m;
        let lo = x.floor() as usize;
        let hi = (x.ceil() as usize).min(self.steps());
        let v = self.excursion.values();
        Ok(if v[lo] >= v[hi] { lo } else { hi })
    }

    /// The rounded time `γ_n(s)`.
    pub fn rounded_time(&self, s: f64) -> Result<f64> {
        Ok(self.grid_index(s)? as f64 / self.steps() as f64)
    }

    /// The vertex coded by time `s`. Uniform `s` gives the uniform vertex law.
    pub fn point_at(&self, s: f64) -> Result<usize> {
        Ok(self.walk[self.grid_index(s)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::TreePoint;

    #[test]
    fn triangle_distances() {
        let w = Excursion::triangle();
        assert!((w.distance(0.2, 0.6).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(w.distance(0.3, 0.3).unwrap(), 0.0);
        assert!((w.distance(0.0, 0.7).unwrap() - w.value(0.7).unwrap()).abs() < 1e-15);
        assert!(w.distance(-0.1, 0.5).is_err());
    }

    #[test]
    fn strict_constructor_rejects_interior_zero() {
        assert!(Excursion::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.0]).is_err());
        assert!(Excursion::new_nonnegative(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.0]).is_ok());
        assert!(Excursion::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 1.0, 1.0, 0.0]).is_err());
        assert!(Excursion::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn single_leaf_is_segment() {
        let t = tree_from_excursion(&Excursion::triangle(), &[0.5]).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.total_length() - 0.5).abs() < 1e-15);
        assert!(tree_from_excursion(&Excursion::triangle(), &[]).is_err());
        assert!(tree_from_excursion(&Excursion::triangle(), &[0.2, 0.2]).is_err());
    }

    #[test]
    fn two_peaks_give_cherry() {
        // Peaks 3 at 0.25 and 2 at 0.75, valley 1 at 0.5.
        let w = Excursion::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![0.0, 3.0, 1.0, 2.0, 0.0]).unwrap();
        let t = tree_from_excursion(&w, &[0.25, 0.75]).unwrap();
        assert_eq!(t.len(), 4);
        let m = t.marks();
        assert!((t.depth(m[0]) - 3.0).abs() < 1e-12);
        assert!((t.depth(m[1]) - 2.0).abs() < 1e-12);
        assert!((t.distance(m[0], m[1]) - 3.0).abs() < 1e-12);
        assert!((t.depth(t.meet(m[0], m[1])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn internal_sample_becomes_internal_mark() {
        let w = Excursion::triangle();
        let t = tree_from_excursion(&w, &[0.5, 0.25]).unwrap();
        assert_eq!(t.len(), 2);
        let m = t.marks();
        assert_eq!(m[1], TreePoint { edge: 1, offset: 0.25 });
    }

    #[test]
    fn search_depth_of_path_and_cherry() {
        let path = OrderedTree::path(3).unwrap();
        assert_eq!(search_depth(&path).excursion().values(), &[0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0]);
        let cherry = OrderedTree::from_children(0, vec![vec![1, 2], vec![], vec![]]).unwrap();
        assert_eq!(search_depth(&cherry).excursion().values(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let single = OrderedTree::path(1).unwrap();
        assert_eq!(search_depth(&single).excursion().values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn point_at_rounding_rule() {
        let path = OrderedTree::path(3).unwrap();
        let sd = search_depth(&path);
        assert_eq!(sd.point_at(0.26).unwrap(), 2);
        assert_eq!(sd.point_at(2.0 / 6.0).unwrap(), 2);
        assert_eq!(sd.point_at(1.0).unwrap(), 0);
        assert!(sd.point_at(1.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = Excursion::new(vec![0.0, 0.25, 1.0], vec![0.0, 0.75, 0.0]).unwrap();
        let back = Excursion::from_csv(&w.to_csv(&["seed=3".into()])).unwrap();
        assert_eq!(back.times(), w.times());
        assert_eq!(back.values(), w.values());
        assert!(Excursion::from_csv("0,0\n1,0\n").is_err());
    }
}
