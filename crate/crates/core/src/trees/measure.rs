use crate::error::{domain, Result};

use super::metric::{MetricTree, TreePoint, POINT_TOL};

/// Constant density on the sub-interval `[from, to]` of an edge, with offsets
/// measured upward from the edge's lower node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub from: f64,
    pub to: f64,
    pub density: f64,
}

impl DensityPiece {
    pub fn mass(&self) -> f64 {
        (self.to - self.from) * self.density
    }
}

/// A finite measure on a metric tree: point masses plus piecewise-constant
/// densities with respect to length along each edge.
#[derive(Debug, Clone)]
pub struct TreeMeasure {
    atoms: Vec<(TreePoint, f64)>,
    pieces: Vec<Vec<DensityPiece>>,
    total: f64,
}

impl TreeMeasure {
    /// Validates and normalizes the parts. Atoms at the same point are merged;
    /// pieces must lie inside their edge and not overlap.
    pub fn new(t: &MetricTree, atoms: Vec<(TreePoint, f64)>, pieces: Vec<Vec<DensityPiece>>) -> Result<Self> {
        if pieces.len() != t.len() {
            return domain("need one piece list per node");
        }
        let mut canon = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            if !(m > 0.0) || !m.is_finite() {
                return domain(format!("atom mass {m} must be positive"));
            }
            canon.push((t.point(p.edge, p.offset)?, m));
        }
        let mut cleaned = vec![Vec::new(); t.len()];
        for (v, list) in pieces.into_iter().enumerate() {
            let len = t.edge_length(v);
            let mut list: Vec<_> = list.into_iter().filter(|p| p.density != 0.0 && p.to > p.from).collect();
            list.sort_by(|a, b| a.from.total_cmp(&b.from));
            for (i, p) in list.iter().enumerate() {
                if !(p.density > 0.0) || !p.density.is_finite() {
                    return domain(format!("density {} on edge {v} must be non-negative", p.density));
                }
                if p.from < -POINT_TOL || p.to > len + POINT_TOL {
                    return domain(format!("density piece [{}, {}] outside edge {v}", p.from, p.to));
                }
                if i > 0 && p.from < list[i - 1].to - POINT_TOL {
                    return domain(format!("overlapping density pieces on edge {v}"));
                }
            }
            cleaned[v] = list;
        }
        let mut m = Self {
            atoms: merge_atoms(canon),
            pieces: cleaned,
            total: 0.0,
        };
        m.total = m.atom_mass() + m.density_mass();
        Ok(m)
    }

    /// Length measure scaled by `density` on every edge.
    pub fn uniform_length(t: &MetricTree, density: f64) -> Result<Self> {
        let pieces = (0..t.len())
            .map(|v| {
                if v == t.root() {
                    Vec::new()
                } else {
                    vec![DensityPiece {
                        from: 0.0,
                        to: t.edge_length(v),
                        density,
                    }]
                }
            })
            .collect();
        Self::new(t, Vec::new(), pieces)
    }

    /// Length measure normalized to total mass one.
    pub fn normalized_length(t: &MetricTree) -> Result<Self> {
        let total = t.total_length();
        if !(total > 0.0) {
            return domain("a single-point tree has no length measure");
        }
        Self::uniform_length(t, 1.0 / total)
    }

    pub fn atoms_only(t: &MetricTree, atoms: Vec<(TreePoint, f64)>) -> Result<Self> {
        Self::new(t, atoms, vec![Vec::new(); t.len()])
    }

    pub fn atoms(&self) -> &[(TreePoint, f64)] {
        &self.atoms
    }

    pub fn pieces(&self, edge: usize) -> &[DensityPiece] {
        &self.pieces[edge]
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn density_mass(&self) -> f64 {
        self.pieces.iter().flatten().map(DensityPiece::mass).sum()
    }

    pub fn node_count(&self) -> usize {
        self.pieces.len()
    }

    /// Mass of the closed sub-arc `[lo, hi]` of an edge from densities alone.
    pub fn density_mass_between(&self, edge: usize, lo: f64, hi: f64) -> f64 {
        self.pieces[edge]
            .iter()
            .map(|p| (p.to.min(hi) - p.from.max(lo)).max(0.0) * p.density)
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(p, m)| (p, m * c)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|l| l.iter().map(|p| DensityPiece { density: p.density * c, ..*p }).collect())
                .collect(),
            total: self.total * c,
        }
    }
}

pub(crate) fn merge_atoms(mut atoms: Vec<(TreePoint, f64)>) -> Vec<(TreePoint, f64)> {
    atoms.sort_by(|a, b| a.0.edge.cmp(&b.0.edge).then(a.0.offset.total_cmp(&b.0.offset)));
    let mut out: Vec<(TreePoint, f64)> = Vec::with_capacity(atoms.len());
    for (p, m) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == p => last.1 += m,
            _ => out.push((p, m)),
        }
    }
    out
}

/// A finite measure on the vertices of a graph tree.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMeasure(pub Vec<f64>);

impl VertexMeasure {
    /// The uniform probability measure on `n` vertices.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn total_mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.0[v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_length_has_unit_mass() {
        let t = MetricTree::star(&[1.0, 2.0, 3.0]).unwrap();
        let m = TreeMeasure::normalized_length(&t).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merges_coincident_atoms() {
        let t = MetricTree::segment(1.0).unwrap();
        let m = TreeMeasure::atoms_only(
            &t,
            vec![(TreePoint::node(0), 0.5), (TreePoint { edge: 1, offset: 1.0 }, 0.25)],
        )
        .unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atoms()[0].1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parts() {
        let t = MetricTree::segment(1.0).unwrap();
        assert!(TreeMeasure::atoms_only(&t, vec![(TreePoint::node(0), -1.0)]).is_err());
        let over = vec![
            Vec::new(),
            vec![
                DensityPiece { from: 0.0, to: 0.6, density: 1.0 },
                DensityPiece { from: 0.5, to: 1.0, density: 1.0 },
            ],
        ];
        assert!(TreeMeasure::new(&t, Vec::new(), over).is_err());
        let outside = vec![Vec::new(), vec![DensityPiece { from: 0.0, to: 2.0, density: 1.0 }]];
        assert!(TreeMeasure::new(&t, Vec::new(), outside).is_err());
    }

    #[test]
    fn partial_edge_mass() {
        let t = MetricTree::segment(1.0).unwrap();
        let m = TreeMeasure::uniform_length(&t, 2.0).unwrap();
        assert!((m.density_mass_between(1, 0.25, 0.5) - 0.5).abs() < 1e-15);
    }
}
