//! Typed settings from a merged config document, with every problem
//! reported against its key. Input files are read here; nothing is written.

use std::path::PathBuf;

use dendrite::bm::MeshGraph;
use dendrite::diagnostics::ExperimentConfig;
use dendrite::excursion::Excursion;
use dendrite::gw::{OffspringDistribution, OffspringLaw, DEFAULT_RETRY_BUDGET};
use dendrite::trees::format::{parse_metric_tree, parse_ordered_tree};
use dendrite::{Error, MetricTree, OrderedTree, TreePoint};
use serde_json::{Map, Value};

use crate::schema::{check_keys, needs_seed};

#[derive(Debug, Clone)]
pub enum TreeFile {
    Ordered(OrderedTree),
    Metric(MetricTree),
}

impl TreeFile {
    /// The metric tree, with unit edge lengths for an ordered tree.
    pub fn metric(&self) -> MetricTree {
        match self {
            TreeFile::Ordered(t) => MetricTree::from_ordered(t).0,
            TreeFile::Metric(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Job {
    GenerateTree {
        law: OffspringLaw,
        n: usize,
        budget: u64,
    },
    Encode {
        tree: OrderedTree,
    },
    Decode {
        excursion: Excursion,
        times: Vec<f64>,
    },
    Embed {
        tree: TreeFile,
        marks: Option<usize>,
        spacing: Option<f64>,
    },
    Walk {
        tree: OrderedTree,
        steps: usize,
        targets: Option<Vec<usize>>,
        binary: bool,
    },
    Bm {
        tree: MetricTree,
        h: f64,
        duration: f64,
        start: TreePoint,
        check_oracles: bool,
        replicas: usize,
    },
    Volume {
        tree: TreeFile,
        radii: Vec<f64>,
        spacing: Option<f64>,
        covering: bool,
        fit: bool,
        log_correction: Option<f64>,
    },
    Converge {
        config: ExperimentConfig,
        samples: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub command: String,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub job: Job,
}

struct Doc<'a> {
    map: &'a Map<String, Value>,
    errs: Vec<String>,
}

impl Doc<'_> {
    fn u64(&self, k: &str) -> Option<u64> {
        self.map.get(k).and_then(Value::as_u64)
    }

    fn f64(&self, k: &str) -> Option<f64> {
        self.map.get(k).and_then(Value::as_f64)
    }

    fn bool(&self, k: &str) -> bool {
        self.map.get(k).and_then(Value::as_bool).unwrap_or(false)
    }

    fn str(&self, k: &str) -> Option<&str> {
        self.map.get(k).and_then(Value::as_str)
    }

    fn floats(&self, k: &str) -> Option<Vec<f64>> {
        self.map
            .get(k)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
    }

    fn uints(&self, k: &str) -> Option<Vec<usize>> {
        self.map
            .get(k)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_u64).map(|x| x as usize).collect())
    }

    fn err(&mut self, k: &str, msg: impl std::fmt::Display) {
        self.errs.push(format!("{k}: {msg}"));
    }

    fn read(&mut self, k: &str) -> Option<String> {
        let path = self.str(k)?.to_string();
        match std::fs::read_to_string(&path) {
            Ok(s) => Some(s),
            Err(e) => {
                self.err(k, format!("cannot read {path}: {e}"));
                None
            }
        }
    }

    fn tree_file(&mut self, k: &str) -> Option<TreeFile> {
        let text = self.read(k)?;
        let metric = text.lines().any(|l| l.trim_start().starts_with("edge "));
        let parsed = if metric {
            parse_metric_tree(&text).map(TreeFile::Metric)
        } else {
            parse_ordered_tree(&text).map(TreeFile::Ordered)
        };
        parsed.map_err(|e| self.err(k, e)).ok()
    }

    fn positive(&mut self, k: &str, default: f64) -> f64 {
        let x = self.f64(k).unwrap_or(default);
        if !(x > 0.0) || !x.is_finite() {
            self.err(k, "must be positive");
        }
        x
    }
}

fn law(doc: &mut Doc) -> Option<OffspringLaw> {
    let name = doc.str("offspring")?.to_string();
    let stable_keys = ["alpha", "tail-c", "k0"];
    let law = match name.as_str() {
        "geometric-half" => OffspringLaw::GeometricHalf,
        "poisson-1" => OffspringLaw::PoissonOne,
        "stable-tail" => {
            let OffspringLaw::StableTail { alpha, tail_c, k0 } = OffspringLaw::DEFAULT_STABLE else {
                unreachable!()
            };
            let alpha = doc.f64("alpha").unwrap_or(alpha);
            if !(alpha > 1.0 && alpha < 2.0) {
                doc.err("alpha", format!("{alpha} is outside (1, 2)"));
                return None;
            }
            OffspringLaw::StableTail {
                alpha,
                tail_c: doc.f64("tail-c").unwrap_or(tail_c),
                k0: doc.u64("k0").map_or(k0, |k| k as u32),
            }
        }
        other => {
            doc.err("offspring", format!("unknown law `{other}` (geometric-half, poisson-1, stable-tail)"));
            return None;
        }
    };
    if !matches!(law, OffspringLaw::StableTail { .. }) {
        for k in stable_keys {
            if doc.map.contains_key(k) {
                doc.err(k, "only applies to stable-tail");
            }
        }
    }
    if let Err(e) = OffspringDistribution::new(law) {
        doc.err("offspring", e);
        return None;
    }
    Some(law)
}

fn job(command: &str, doc: &mut Doc) -> Option<Job> {
    match command {
        "generate-tree" => {
            let law = law(doc);
            let n = doc.u64("n");
            if n == Some(0) {
                doc.err("n", "must be at least 1");
            }
            let budget = doc.u64("retry-budget").unwrap_or(DEFAULT_RETRY_BUDGET);
            if budget == 0 {
                doc.err("retry-budget", "must be positive");
            }
            Some(Job::GenerateTree {
                law: law?,
                n: n.filter(|&n| n > 0)? as usize,
                budget,
            })
        }
        "search-depth" => match (doc.map.contains_key("tree"), doc.map.contains_key("excursion")) {
            (true, false) => {
                if doc.map.contains_key("times") {
                    doc.err("times", "only used when decoding an excursion");
                }
                match doc.tree_file("tree")? {
                    TreeFile::Ordered(tree) => Some(Job::Encode { tree }),
                    TreeFile::Metric(_) => {
                        doc.err("tree", "expected an ordered tree file");
                        None
                    }
                }
            }
            (false, true) => {
                let text = doc.read("excursion");
                let excursion = text.and_then(|t| Excursion::from_csv(&t).map_err(|e| doc.err("excursion", e)).ok());
                let times = doc.floats("times");
                match &times {
                    None => doc.err("times", "required when decoding an excursion"),
                    Some(t) if t.is_empty() => doc.err("times", "need at least one time"),
                    Some(t) if t.iter().any(|s| !(0.0..=1.0).contains(s)) => doc.err("times", "times must lie in [0, 1]"),
                    _ => {}
                }
                Some(Job::Decode {
                    excursion: excursion?,
                    times: times?,
                })
            }
            _ => {
                doc.err("tree", "give exactly one of `tree` and `excursion`");
                None
            }
        },
        "embed" => {
            let tree = doc.tree_file("tree");
            let marks = doc.u64("marks").map(|k| k as usize);
            if marks == Some(0) {
                doc.err("marks", "must be positive");
            }
            if marks.is_some() && doc.u64("seed").is_none() {
                doc.err("seed", "required when marks are drawn");
            }
            let spacing = doc.f64("spacing");
            if spacing.is_some_and(|s| !(s > 0.0)) {
                doc.err("spacing", "must be positive");
            }
            let tree = tree?;
            let has_marks = matches!(&tree, TreeFile::Metric(t) if !t.marks().is_empty());
            if !has_marks && marks.is_none() {
                doc.err("marks", "the tree has no marks; give a number of marks to draw");
            }
            if tree.metric().len() < 2 && marks.is_some() {
                doc.err("tree", "cannot draw marks on a single-point tree");
            }
            Some(Job::Embed { tree, marks, spacing })
        }
        "walk" => {
            let tree = match doc.tree_file("tree") {
                Some(TreeFile::Ordered(t)) => Some(t),
                Some(TreeFile::Metric(_)) => {
                    doc.err("tree", "expected an ordered tree file");
                    None
                }
                None => None,
            };
            let targets = doc.uints("targets");
            if let (Some(t), Some(ts)) = (&tree, &targets) {
                if ts.is_empty() {
                    doc.err("targets", "need at least one vertex");
                }
                if let Some(v) = ts.iter().find(|&&v| v >= t.len()) {
                    doc.err("targets", format!("vertex {v} is not in the tree"));
                }
            }
            let binary = match doc.str("format").unwrap_or("csv") {
                "csv" => false,
                "bin" => true,
                other => {
                    doc.err("format", format!("unknown format `{other}` (csv, bin)"));
                    false
                }
            };
            Some(Job::Walk {
                tree: tree?,
                steps: doc.u64("steps")? as usize,
                targets,
                binary,
            })
        }
        "bm" => {
            let h = doc.positive("h", 0.01);
            let duration = doc.positive("duration", 1.0);
            let replicas = doc.u64("replicas").unwrap_or(10_000) as usize;
            if replicas == 0 {
                doc.err("replicas", "must be positive");
            }
            let tree = doc.tree_file("tree")?.metric();
            if let Err(e) = MeshGraph::new(&tree, h) {
                doc.err("h", e);
            }
            let edge = doc.u64("start-edge").map_or(tree.root(), |e| e as usize);
            let offset = doc.f64("start-offset").unwrap_or(0.0);
            let start = if edge >= tree.len() {
                doc.err("start-edge", format!("node {edge} is not in the tree"));
                None
            } else {
                tree.point(edge, offset).map_err(|e| doc.err("start-offset", e)).ok()
            };
            if doc.bool("check-oracles") && tree.leaves().is_empty() {
                doc.err("tree", "oracle checks need a leaf");
            }
            Some(Job::Bm {
                start: start?,
                tree,
                h,
                duration,
                check_oracles: doc.bool("check-oracles"),
                replicas,
            })
        }
        "volume-profile" => {
            let tree = doc.tree_file("tree");
            let radii = doc.floats("radii").unwrap_or_default();
            if radii.is_empty() {
                doc.err("radii", "need at least one radius");
            } else if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
                doc.err("radii", "must be positive and increasing");
            }
            let spacing = doc.f64("spacing");
            if spacing.is_some_and(|s| !(s > 0.0)) {
                doc.err("spacing", "must be positive");
            }
            let fit = doc.bool("fit");
            let log_correction = doc.f64("log-correction");
            if log_correction.is_some() && !fit {
                doc.err("log-correction", "only used with fit");
            }
            if fit && radii.len() < 4 {
                doc.err("radii", "a fit needs at least four radii");
            }
            if matches!(tree, Some(TreeFile::Ordered(_))) && spacing.is_some() {
                doc.err("spacing", "graph profiles use every vertex; no net spacing");
            }
            Some(Job::Volume {
                tree: tree?,
                radii,
                spacing,
                covering: doc.bool("covering"),
                fit,
                log_correction,
            })
        }
        "converge" => {
            let mut sub = doc.map.clone();
            for k in ["out", "workers", "samples"] {
                sub.remove(k);
            }
            let config: ExperimentConfig = match serde_json::from_value(Value::Object(sub)) {
                Ok(c) => c,
                Err(e) => {
                    doc.err("config", e);
                    return None;
                }
            };
            match config.validate() {
                Err(Error::Config(list)) => {
                    doc.errs.extend(list);
                    None
                }
                Err(e) => {
                    doc.err("config", e);
                    None
                }
                Ok(()) => Some(Job::Converge {
                    config,
                    samples: doc.bool("samples"),
                }),
            }
        }
        other => {
            doc.err("command", format!("unknown command `{other}`"));
            None
        }
    }
}

/// Checks a merged document for `command` and builds its settings, or
/// returns every problem found.
pub fn validate_config(command: &str, map: &Map<String, Value>) -> Result<Settings, Vec<String>> {
    let errs = check_keys(command, map);
    if !errs.is_empty() {
        return Err(errs);
    }
    let mut doc = Doc { map, errs };
    let workers = doc.u64("workers").map(|w| w as usize);
    if workers == Some(0) {
        doc.err("workers", "must be positive");
    }
    let job = job(command, &mut doc);
    if !doc.errs.is_empty() {
        return Err(doc.errs);
    }
    let seed = doc.u64("seed");
    debug_assert!(!needs_seed(command) || seed.is_some());
    Ok(Settings {
        command: command.to_string(),
        seed,
        out: PathBuf::from(doc.str("out").unwrap_or(".")),
        workers,
        job: job.expect("no errors means a job"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn errors(command: &str, v: Value) -> Vec<String> {
        validate_config(command, v.as_object().unwrap()).unwrap_err()
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let e = errors("generate-tree", json!({}));
        for k in ["seed", "offspring", "n"] {
            assert!(e.iter().any(|m| m.starts_with(&format!("{k}:"))), "{e:?}");
        }
        let e = errors("converge", json!({}));
        for k in ["seed", "tree", "scales", "replicas"] {
            assert!(e.iter().any(|m| m.starts_with(&format!("{k}:"))), "{e:?}");
        }
    }

    #[test]
    fn unknown_keys_and_types() {
        let e = errors("generate-tree", json!({"seed": 1, "offspring": "poisson-1", "n": "ten", "colour": 1}));
        assert!(e.contains(&"colour: unknown key".to_string()));
        assert!(e.iter().any(|m| m.starts_with("n: expected")));
    }

    #[test]
    fn stable_alpha_range() {
        let e = errors("generate-tree", json!({"seed": 1, "offspring": "stable-tail", "n": 10, "alpha": 2.5}));
        assert_eq!(e, vec!["alpha: 2.5 is outside (1, 2)".to_string()]);
        let e = errors("generate-tree", json!({"seed": 1, "offspring": "poisson-1", "n": 10, "alpha": 1.5}));
        assert_eq!(e, vec!["alpha: only applies to stable-tail".to_string()]);
    }

    #[test]
    fn mesh_spacing_checked_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.tree");
        let y = MetricTree::star(&[0.3, 1.0]).unwrap();
        std::fs::write(&p, dendrite::trees::format::write_metric_tree(&y, &[])).unwrap();
        let e = errors("bm", json!({"seed": 1, "tree": p.to_str().unwrap(), "h": 0.5}));
        assert_eq!(e.len(), 1);
        assert!(e[0].starts_with("h: "), "{e:?}");
    }

    #[test]
    fn seed_optional_for_deterministic_commands() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tree");
        std::fs::write(&p, "n 2\n0 - 0\n1 0 0\n").unwrap();
        let s = validate_config("search-depth", json!({"tree": p.to_str().unwrap()}).as_object().unwrap()).unwrap();
        assert_eq!(s.seed, None);
    }
}
