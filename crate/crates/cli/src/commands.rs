//! Command bodies. Each returns the artifacts it wrote, in order.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use dendrite::bm::{hitting_probability_exact, mean_hitting_time_exact, run_bm, run_until_hit, MeshGraph};
use dendrite::diagnostics::{
    ball_volume_profile, convergence_experiment, covering_number, exponent_fit, graph_ball_volume_profile,
    samples_csv, SampleSummary, VolumeProfile,
};
use dendrite::embedding::Embedding;
use dendrite::excursion::{search_depth, tree_from_excursion};
use dendrite::gw::{sample_conditioned_tree_with_budget, scaling_sequence, OffspringDistribution};
use dendrite::rng::{replica_rng, Rng};
use dendrite::trees::format::{write_metric_tree, write_ordered_tree};
use dendrite::trees::{spanning_subtree, spanning_subtree_graph, VertexMeasure};
use dendrite::walks::{additive_functional_discrete, functional_csv, local_times_discrete, observe_on_subtree, run_srw};
use dendrite::{MetricTree, Result, TreeMeasure, TreePoint};
use rand::Rng as _;
use serde_json::{json, Value};

use crate::validate::{Job, Settings, TreeFile};

/// Stream group for oracle fixture `i` of the bm command.
fn fixture_stream(i: usize, r: usize) -> u64 {
    ((i as u64 + 1) << 40) | r as u64
}

pub struct Artifact {
    pub path: PathBuf,
    pub summary: String,
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Extra lines for stdout, such as runtimes.
    pub notes: Vec<String>,
    /// False when a check ran and failed.
    pub passed: bool,
}

struct Writer<'a> {
    settings: &'a Settings,
    hash: &'a str,
    artifacts: Vec<Artifact>,
}

impl Writer<'_> {
    fn stamp(&self) -> String {
        match self.settings.seed {
            Some(s) => format!("config-hash={} seed={s}", self.hash),
            None => format!("config-hash={} seed=none", self.hash),
        }
    }

    fn comments(&self) -> Vec<String> {
        vec![self.stamp()]
    }

    fn path(&self, suffix: &str) -> PathBuf {
        let seed = self.settings.seed.map_or("none".to_string(), |s| s.to_string());
        self.settings
            .out
            .join(format!("{}-{}-{seed}{suffix}", self.settings.command, &self.hash[..12]))
    }

    fn write(&mut self, suffix: &str, bytes: impl AsRef<[u8]>, summary: String) -> Result<()> {
        let path = self.path(suffix);
        std::fs::write(&path, bytes)?;
        self.artifacts.push(Artifact { path, summary });
        Ok(())
    }

    fn write_json(&mut self, suffix: &str, mut v: Value, summary: String) -> Result<()> {
        let obj = v.as_object_mut().expect("artifact JSON is an object");
        obj.insert("config-hash".into(), self.hash.into());
        obj.insert("seed".into(), self.settings.seed.map_or(Value::Null, Value::from));
        let text = serde_json::to_string_pretty(&v).expect("JSON serializes") + "\n";
        self.write(suffix, text, summary)
    }

    fn rng(&self, index: u64) -> Rng {
        replica_rng(self.settings.seed.expect("validated seed"), index)
    }
}

pub fn execute(settings: &Settings, hash: &str) -> Result<Outcome> {
    std::fs::create_dir_all(&settings.out)?;
    let mut w = Writer {
        settings,
        hash,
        artifacts: Vec::new(),
    };
    let mut notes = Vec::new();
    let mut passed = true;
    match &settings.job {
        Job::GenerateTree { law, n, budget } => {
            let dist = OffspringDistribution::new(*law)?;
            let tree = sample_conditioned_tree_with_budget(&dist, *n, &mut w.rng(0), *budget)?;
            let (a_n, alpha_n) = scaling_sequence(law, *n)?;
            let max_degree = (0..tree.len()).map(|v| tree.children(v).len()).max().unwrap_or(0);
            let leaves = (0..tree.len()).filter(|&v| tree.is_leaf(v)).count();
            w.write(
                ".tree",
                write_ordered_tree(&tree, &w.comments()),
                format!("tree with {} vertices, height {}", tree.len(), tree.height()),
            )?;
            let meta = json!({
                "law": law,
                "n": n,
                "a-n": a_n,
                "alpha-n": alpha_n,
                "height": tree.height(),
                "leaves": leaves,
                "max-children": max_degree,
            });
            w.write_json(".json", meta, format!("metadata for {} tree, alpha_n {alpha_n:.4}", law.name()))?;
        }
        Job::Encode { tree } => {
            let sd = search_depth(tree);
            let ex = sd.excursion();
            w.write(
                ".csv",
                ex.to_csv(&w.comments()),
                format!("excursion with {} grid points, max depth {}", ex.times().len(), ex.max_value()),
            )?;
        }
        Job::Decode { excursion, times } => {
            let tree = tree_from_excursion(excursion, times)?;
            w.write(
                ".tree",
                write_metric_tree(&tree, &w.comments()),
                format!("metric tree with {} nodes, total length {:.6}", tree.len(), tree.total_length()),
            )?;
        }
        Job::Embed { tree, marks, spacing } => embed(&mut w, tree, *marks, *spacing)?,
        Job::Walk {
            tree,
            steps,
            targets,
            binary,
        } => {
            let path = run_srw(tree, *steps, &mut w.rng(0));
            if *binary {
                let mut bytes = format!("# {}\n", w.stamp()).into_bytes();
                bytes.extend(path.to_bytes());
                w.write(".bin", bytes, format!("{steps} steps as little-endian u32 after one header line"))?;
            } else {
                w.write(".csv", path.to_csv(&w.comments()), format!("{steps} steps"))?;
            }
            if let Some(targets) = targets {
                let sub = spanning_subtree_graph(tree, targets)?;
                let obs = observe_on_subtree(&path, &sub)?;
                let mut csv: String = w.comments().iter().map(|c| format!("# {c}\n")).collect();
                csv.push_str("jump,vertex,entered\n");
                for (j, (v, t)) in obs.jumps.iter().zip(&obs.times).enumerate() {
                    let _ = writeln!(csv, "{j},{v},{t}");
                }
                w.write(
                    "-observed.csv",
                    csv,
                    format!("{} jumps on a subtree of {} vertices", obs.jumps.len(), sub.vertex_count()),
                )?;
                let mu = sub.pushforward(&VertexMeasure::uniform(tree.len()))?;
                let lt = local_times_discrete(&obs, &sub)?;
                let a = additive_functional_discrete(&lt, &mu, &sub, tree.len())?;
                let last = a.last().copied().unwrap_or(0.0);
                w.write(
                    "-functional.csv",
                    functional_csv(&a, &w.comments()),
                    format!("additive functional, final value {last:.4}"),
                )?;
            }
        }
        Job::Bm {
            tree,
            h,
            duration,
            start,
            check_oracles,
            replicas,
        } => {
            let mesh = MeshGraph::new(tree, *h)?;
            let path = run_bm(&mesh, *duration, *start, &mut w.rng(0))?;
            w.write(
                ".csv",
                path.to_csv(&mesh, &w.comments()),
                format!("{} mesh moves over clock time {duration}", path.nodes.len() - 1),
            )?;
            if *check_oracles {
                passed = bm_oracles(&mut w, tree, &mesh, *start, *replicas)?;
            }
        }
        Job::Volume {
            tree,
            radii,
            spacing,
            covering,
            fit,
            log_correction,
        } => {
            let profile = match tree {
                TreeFile::Ordered(t) => graph_ball_volume_profile(t, &VertexMeasure::uniform(t.len()), radii)?,
                TreeFile::Metric(t) => ball_volume_profile(t, &TreeMeasure::normalized_length(t)?, radii, *spacing)?,
            };
            let counts = if *covering {
                let m = tree.metric();
                Some(radii.iter().map(|&r| covering_number(&m, r)).collect::<Result<Vec<_>>>()?)
            } else {
                None
            };
            w.write(".csv", volume_csv(&profile, counts.as_deref(), &w.comments()), format!("{} radii", radii.len()))?;
            if *fit {
                let f = exponent_fit(&profile, *log_correction)?;
                let summary = format!("slope {:.4}, r-squared {:.4}", f.slope, f.r_squared);
                let v = json!({ "fit": f, "log-correction": log_correction, "radii": radii });
                w.write_json("-fit.json", v, summary)?;
            }
        }
        Job::Converge { config, samples } => {
            let started = Instant::now();
            let outcome = convergence_experiment(config)?;
            notes.push(format!("converge: runtime {:.2}s", started.elapsed().as_secs_f64()));
            let worst = outcome
                .report
                .ks
                .iter()
                .map(|k| k.distance)
                .fold(0.0f64, f64::max);
            let report = serde_json::to_value(&outcome.report).expect("report serializes");
            w.write_json(
                ".json",
                report,
                format!("{} KS comparisons, largest distance {worst:.4}", outcome.report.ks.len()),
            )?;
            if *samples {
                let rows: usize = outcome.samples.iter().map(|s| s.values.len()).sum();
                w.write("-samples.csv", samples_csv(&outcome.samples, &w.comments()), format!("{rows} sample rows"))?;
            }
        }
    }
    Ok(Outcome {
        artifacts: w.artifacts,
        notes,
        passed,
    })
}

fn volume_csv(p: &VolumeProfile, covering: Option<&[usize]>, comments: &[String]) -> String {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    out.push_str(if covering.is_some() { "radius,volume,covering\n" } else { "radius,volume\n" });
    for (i, (r, v)) in p.radii.iter().zip(&p.volumes).enumerate() {
        let _ = write!(out, "{r},{v}");
        if let Some(c) = covering {
            let _ = write!(out, ",{}", c[i]);
        }
        out.push('\n');
    }
    out
}

/// A point uniform under the length measure.
fn uniform_point(t: &MetricTree, rng: &mut Rng) -> TreePoint {
    let mut u = rng.random::<f64>() * t.total_length();
    for e in t.edges() {
        let len = t.edge_length(e);
        if u < len {
            return TreePoint { edge: e, offset: u };
        }
        u -= len;
    }
    TreePoint::node(t.leaves()[0])
}

fn embed(w: &mut Writer, file: &TreeFile, marks: Option<usize>, spacing: Option<f64>) -> Result<()> {
    let (tree, drawn) = match (file, marks) {
        (TreeFile::Ordered(t), Some(k)) => {
            // Marks at vertices coded by uniform search-depth times.
            let (m, points) = MetricTree::from_ordered(t);
            let sd = search_depth(t);
            let mut rng = w.rng(0);
            let ms = (0..k)
                .map(|_| Ok(points[sd.point_at(rng.random::<f64>())?]))
                .collect::<Result<Vec<_>>>()?;
            (m.with_marks(ms)?, true)
        }
        (TreeFile::Metric(t), Some(k)) => {
            let mut rng = w.rng(0);
            let ms = (0..k).map(|_| uniform_point(t, &mut rng)).collect();
            (t.with_marks(ms)?, true)
        }
        (TreeFile::Metric(t), None) => (t.clone(), false),
        (TreeFile::Ordered(_), None) => unreachable!("validated"),
    };
    if drawn {
        w.write(
            ".tree",
            write_metric_tree(&tree, &w.comments()),
            format!("tree with {} drawn marks", tree.marks().len()),
        )?;
    }
    let emb = Embedding::new(&tree)?;
    let sub = spanning_subtree(&tree, tree.marks())?;
    let st = sub.tree();
    let h = spacing.unwrap_or(1e-2 * st.diameter());
    let net: Vec<TreePoint> = if h > 0.0 {
        st.net(h)
            .into_iter()
            .map(|p| sub.host_point(&tree, p))
            .collect::<Result<_>>()?
    } else {
        vec![tree.marks()[0]]
    };
    let k = emb.dimension();
    let mut out: String = w.comments().iter().map(|c| format!("# {c}\n")).collect();
    out.push_str("point-id,edge,offset");
    for i in 1..=k {
        let _ = write!(out, ",coord-{i}");
    }
    out.push('\n');
    for (id, &p) in net.iter().enumerate() {
        let x = emb.embed(p)?;
        let _ = write!(out, "{id},{},{}", p.edge, p.offset);
        for i in 0..k {
            let _ = write!(out, ",{}", x.coord(i));
        }
        out.push('\n');
    }
    w.write(".csv", out, format!("{} net points in {k} coordinates", net.len()))
}

struct OracleRow {
    check: &'static str,
    start: TreePoint,
    first: TreePoint,
    second: Option<TreePoint>,
    exact: f64,
    empirical: f64,
    tolerance: f64,
}

/// Hitting probabilities between leaf pairs (tolerance max(0.02, 4 SE)) and
/// mean hitting times of leaves under normalized length (tolerance
/// max(3% relative, 4 SE)).
/// Exact values use the mesh node the walk actually starts from.
fn bm_oracles(w: &mut Writer, tree: &MetricTree, mesh: &MeshGraph, start: TreePoint, replicas: usize) -> Result<bool> {
    let s = mesh.nearest_node(start)?;
    let sp = mesh.point(s);
    let mut ends: Vec<TreePoint> = tree.leaves().into_iter().take(3).map(TreePoint::node).collect();
    if ends.len() < 2 {
        ends.insert(0, TreePoint::node(tree.root()));
    }
    let mut pairs = Vec::new();
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            pairs.push((ends[i], ends[j]));
        }
    }
    let seed = w.settings.seed.expect("validated seed");
    let mut rows = Vec::new();
    let mut fixture = 0;
    for (a, b) in pairs {
        let exact = hitting_probability_exact(tree, sp, a, b)?;
        let targets = [mesh.nearest_node(a)?, mesh.nearest_node(b)?];
        let f = fixture;
        let hits: usize = rayon_count(replicas, |r| {
            run_until_hit(mesh, s, &targets, mesh.holds(), &mut replica_rng(seed, fixture_stream(f, r))).target == 0
        });
        fixture += 1;
        let se = (exact * (1.0 - exact) / replicas as f64).sqrt();
        rows.push(OracleRow {
            check: "hitting-probability",
            start: sp,
            first: a,
            second: Some(b),
            exact,
            empirical: hits as f64 / replicas as f64,
            tolerance: (4.0 * se).max(0.02),
        });
    }
    let mu = TreeMeasure::normalized_length(tree)?;
    let inc = mesh.visit_increments(&mu)?;
    for &target in &ends {
        let g = mesh.nearest_node(target)?;
        if g == s {
            continue;
        }
        let exact = mean_hitting_time_exact(tree, &mu, sp, target)?;
        let f = fixture;
        let clocks = rayon_collect(replicas, |r| run_until_hit(mesh, s, &[g], &inc, &mut replica_rng(seed, fixture_stream(f, r))).clock);
        fixture += 1;
        let summary = SampleSummary::of(&clocks);
        let se = summary.sd / (replicas as f64).sqrt();
        rows.push(OracleRow {
            check: "mean-hitting-time",
            start: sp,
            first: target,
            second: None,
            exact,
            empirical: summary.mean,
            tolerance: (0.03 * exact).max(4.0 * se),
        });
    }
    let mut out: String = w.comments().iter().map(|c| format!("# {c}\n")).collect();
    out.push_str("check,start-edge,start-offset,first-edge,first-offset,second-edge,second-offset,exact,empirical,tolerance,pass\n");
    let mut failed = 0;
    for r in &rows {
        let pass = (r.empirical - r.exact).abs() <= r.tolerance;
        failed += usize::from(!pass);
        let (se, so) = r.second.map_or((String::new(), String::new()), |p| (p.edge.to_string(), p.offset.to_string()));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{se},{so},{},{},{},{pass}",
            r.check, r.start.edge, r.start.offset, r.first.edge, r.first.offset, r.exact, r.empirical, r.tolerance
        );
    }
    let summary = format!("{} of {} oracle checks passed", rows.len() - failed, rows.len());
    w.write("-oracles.csv", out, summary)?;
    Ok(failed == 0)
}

fn rayon_count(n: usize, f: impl Fn(usize) -> bool + Sync) -> usize {
    use rayon::prelude::*;
    (0..n).into_par_iter().filter(|&r| f(r)).count()
}

/// Values in replica order, so sums do not depend on the worker count.
fn rayon_collect(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
