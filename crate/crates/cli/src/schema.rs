//! Per-command config keys. Every key can be set in the config document or
//! as a `--key` flag, and flags win.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    UInt,
    Float,
    Bool,
    Str,
    UIntList,
    FloatList,
    /// Any JSON value; on the command line it is given as JSON text.
    Json,
}

impl Ty {
    fn describe(self) -> &'static str {
        match self {
            Ty::UInt => "a non-negative integer",
            Ty::Float => "a number",
            Ty::Bool => "true or false",
            Ty::Str => "a string",
            Ty::UIntList => "a list of non-negative integers",
            Ty::FloatList => "a list of numbers",
            Ty::Json => "a JSON value",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            Ty::UInt => v.as_u64().is_some(),
            Ty::Float => v.as_f64().is_some(),
            Ty::Bool => v.is_boolean(),
            Ty::Str => v.is_string(),
            Ty::UIntList => v.as_array().is_some_and(|a| a.iter().all(|x| x.as_u64().is_some())),
            Ty::FloatList => v.as_array().is_some_and(|a| a.iter().all(|x| x.as_f64().is_some())),
            Ty::Json => true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub ty: Ty,
    pub required: bool,
    pub help: &'static str,
}

const fn key(name: &'static str, ty: Ty, required: bool, help: &'static str) -> Key {
    Key {
        name,
        ty,
        required,
        help,
    }
}

const OUT: Key = key("out", Ty::Str, false, "output directory (default: current directory)");
const WORKERS: Key = key("workers", Ty::UInt, false, "worker threads (default: all cores)");
const SEED: Key = key("seed", Ty::UInt, true, "random seed");
const SEED_OPT: Key = key("seed", Ty::UInt, false, "random seed");

pub const COMMANDS: &[(&str, &str)] = &[
    ("generate-tree", "sample a conditioned Galton-Watson tree"),
    ("search-depth", "search-depth excursion of a tree, or a tree from an excursion"),
    ("embed", "sequential l1 embedding of a marked metric tree"),
    ("walk", "simple random walk, optionally observed on a spanned subtree"),
    ("bm", "mesh Brownian motion on a metric tree, with oracle checks"),
    ("volume-profile", "inf ball-volume profile, covering numbers and exponent fit"),
    ("converge", "rescaled-walk convergence experiment"),
];

/// Commands that draw random numbers and so need a seed.
pub fn needs_seed(command: &str) -> bool {
    matches!(command, "generate-tree" | "walk" | "bm" | "converge")
}

pub fn keys(command: &str) -> Vec<Key> {
    let seed = if needs_seed(command) { SEED } else { SEED_OPT };
    let mut k = vec![seed, OUT, WORKERS];
    k.extend(match command {
        "generate-tree" => vec![
            key("offspring", Ty::Str, true, "geometric-half, poisson-1 or stable-tail"),
            key("n", Ty::UInt, true, "number of vertices"),
            key("alpha", Ty::Float, false, "stable-tail index in (1, 2) (default 1.5)"),
            key("tail-c", Ty::Float, false, "stable-tail constant (default 0.5)"),
            key("k0", Ty::UInt, false, "first tail index (default 2)"),
            key("retry-budget", Ty::UInt, false, "rejection attempts before giving up"),
        ],
        "search-depth" => vec![
            key("tree", Ty::Str, false, "ordered tree file to encode"),
            key("excursion", Ty::Str, false, "excursion CSV to decode"),
            key("times", Ty::FloatList, false, "sample times in [0, 1] for decoding"),
        ],
        "embed" => vec![
            key("tree", Ty::Str, true, "tree file (metric with marks, or any tree plus --marks)"),
            key("marks", Ty::UInt, false, "number of random marks to draw"),
            key("spacing", Ty::Float, false, "net spacing (default diameter / 100)"),
        ],
        "walk" => vec![
            key("tree", Ty::Str, true, "ordered tree file"),
            key("steps", Ty::UInt, true, "number of steps"),
            key("targets", Ty::UIntList, false, "vertices spanning the observed subtree"),
            key("format", Ty::Str, false, "path format: csv (default) or bin"),
        ],
        "bm" => vec![
            key("tree", Ty::Str, true, "metric tree file"),
            key("h", Ty::Float, false, "mesh spacing, at most the shortest edge (default 0.01)"),
            key("duration", Ty::Float, false, "clock time to simulate (default 1)"),
            key("start-edge", Ty::UInt, false, "edge of the start point (default: root)"),
            key("start-offset", Ty::Float, false, "offset of the start point (default 0)"),
            key("check-oracles", Ty::Bool, false, "compare hitting laws with exact values"),
            key("replicas", Ty::UInt, false, "replicas per oracle check (default 10000)"),
        ],
        "volume-profile" => vec![
            key("tree", Ty::Str, true, "tree file (ordered: graph distance, metric: length)"),
            key("radii", Ty::FloatList, true, "increasing positive radii"),
            key("spacing", Ty::Float, false, "net spacing for metric trees"),
            key("covering", Ty::Bool, false, "also count covering balls (metric trees)"),
            key("fit", Ty::Bool, false, "fit the log-log slope"),
            key("log-correction", Ty::Float, false, "log-correction exponent for the fit"),
        ],
        "converge" => vec![
            key("tree", Ty::Json, true, "tree spec, e.g. {\"kind\":\"star\",\"arms\":[1,2,3]}"),
            key("scales", Ty::UIntList, true, "edge scales m (fixed tree) or sizes n (random)"),
            key("replicas", Ty::UInt, true, "replicas per scale"),
            key("times", Ty::FloatList, false, "limit times (default 0.5)"),
            key("coordinates", Ty::UInt, false, "embedded coordinates to record"),
            key("bm-spacing", Ty::Float, false, "mesh spacing of the reference motion"),
            key("hitting-replicas", Ty::UInt, false, "replicas of the hitting check"),
            key("ks-threshold", Ty::Float, false, "KS threshold recorded in the report"),
            key("volume-trees", Ty::UInt, false, "trees per size for volume fits"),
            key("volume-radii", Ty::FloatList, false, "volume-fit radii as multiples of alpha_n"),
            key("samples", Ty::Bool, false, "also write raw samples as CSV"),
        ],
        _ => vec![],
    });
    k
}

/// Turns command-line text into a JSON value of the key's type.
pub fn coerce(k: &Key, text: &str) -> Result<Value, String> {
    let bad = || format!("{}: expected {}, got `{text}`", k.name, k.ty.describe());
    let list = |parse: &dyn Fn(&str) -> Option<Value>| -> Result<Value, String> {
        if text.trim().is_empty() {
            return Ok(Value::Array(vec![]));
        }
        text.split(',').map(|s| parse(s.trim()).ok_or_else(bad)).collect::<Result<_, _>>().map(Value::Array)
    };
    match k.ty {
        Ty::UInt => text.parse::<u64>().map(Value::from).map_err(|_| bad()),
        Ty::Float => text.parse::<f64>().map(Value::from).map_err(|_| bad()),
        Ty::Bool => text.parse::<bool>().map(Value::from).map_err(|_| bad()),
        Ty::Str => Ok(Value::from(text)),
        Ty::UIntList => list(&|s| s.parse::<u64>().ok().map(Value::from)),
        Ty::FloatList => list(&|s| s.parse::<f64>().ok().map(Value::from)),
        Ty::Json => serde_json::from_str(text).map_err(|e| format!("{}: invalid JSON: {e}", k.name)),
    }
}

/// Unknown keys, missing required keys and type mismatches.
pub fn check_keys(command: &str, doc: &Map<String, Value>) -> Vec<String> {
    let ks = keys(command);
    let mut errs = Vec::new();
    for name in doc.keys() {
        if !ks.iter().any(|k| k.name == name) {
            errs.push(format!("{name}: unknown key"));
        }
    }
    for k in &ks {
        match doc.get(k.name) {
            None if k.required => errs.push(format!("{}: missing required key", k.name)),
            Some(v) if !k.ty.accepts(v) => errs.push(format!("{}: expected {}", k.name, k.ty.describe())),
            _ => {}
        }
    }
    errs
}
