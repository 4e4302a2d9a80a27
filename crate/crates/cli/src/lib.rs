//! The `dendrite` command line: a JSON config document per run, with a
//! `--key` flag for every document key. Flags override the document.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (including failed
//! oracle checks), 2 on an invalid command line or config.

mod commands;
mod schema;
mod validate;

use std::ffi::OsString;

use clap::{Arg, ArgAction, Command};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub use commands::{Artifact, Outcome};
pub use schema::{keys, Key, Ty, COMMANDS};
pub use validate::{validate_config, Job, Settings, TreeFile};

fn cli() -> Command {
    let mut cmd = Command::new("dendrite")
        .about("Random trees, walks and Brownian motion on metric trees")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("JSON config document"),
        );
        for k in keys(name) {
            let arg = Arg::new(k.name).long(k.name).help(k.help);
            sub = sub.arg(if k.ty == Ty::Bool {
                arg.action(ArgAction::SetTrue)
            } else {
                arg.value_name("VALUE")
            });
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Hex SHA-256 of the compact JSON document without `out` and `workers`,
/// which do not affect results. Keys are sorted, so the text is canonical.
pub fn config_hash(doc: &Map<String, Value>) -> String {
    let mut d = doc.clone();
    d.remove("out");
    d.remove("workers");
    let text = serde_json::to_string(&Value::Object(d)).expect("JSON serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// The config document after applying command-line overrides.
fn merged_doc(command: &str, m: &clap::ArgMatches) -> Result<Map<String, Value>, Vec<String>> {
    let mut doc = match m.get_one::<String>("config") {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| vec![format!("config: cannot read {path}: {e}")])?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(vec!["config: document must be a JSON object".into()]),
                Err(e) => return Err(vec![format!("config: invalid JSON: {e}")]),
            }
        }
    };
    let mut errs = Vec::new();
    for k in keys(command) {
        if k.ty == Ty::Bool {
            if m.get_flag(k.name) {
                doc.insert(k.name.into(), Value::Bool(true));
            }
        } else if let Some(text) = m.get_one::<String>(k.name) {
            match schema::coerce(&k, text) {
                Ok(v) => {
                    doc.insert(k.name.into(), v);
                }
                Err(e) => errs.push(e),
            }
        }
    }
    if errs.is_empty() {
        Ok(doc)
    } else {
        Err(errs)
    }
}

/// Runs one command line and returns the process exit code. All output goes
/// through this function's thread: summaries to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (command, sub) = matches.subcommand().expect("subcommand required");
    let settings = merged_doc(command, sub).and_then(|doc| validate_config(command, &doc).map(|s| (s, doc)));
    let (settings, doc) = match settings {
        Ok(x) => x,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return 2;
        }
    };
    let hash = config_hash(&doc);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = settings.workers {
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return 1;
        }
    };
    match pool.install(|| commands::execute(&settings, &hash)) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}: {}", a.path.display(), a.summary);
            }
            for n in &outcome.notes {
                println!("{n}");
            }
            if outcome.passed {
                0
            } else {
                eprintln!("error: oracle checks failed");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_ignores_output_location() {
        let a = json!({"seed": 1, "n": 5, "out": "x", "workers": 3});
        let b = json!({"n": 5, "seed": 1});
        assert_eq!(config_hash(a.as_object().unwrap()), config_hash(b.as_object().unwrap()));
        let c = json!({"n": 6, "seed": 1});
        assert_ne!(config_hash(b.as_object().unwrap()), config_hash(c.as_object().unwrap()));
    }

    #[test]
    fn clap_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_override_document() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"seed": 1, "n": 5, "offspring": "poisson-1"}"#).unwrap();
        let m = cli()
            .try_get_matches_from(["dendrite", "generate-tree", "--config", cfg.to_str().unwrap(), "--n", "9"])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let doc = merged_doc("generate-tree", sub).unwrap();
        assert_eq!(doc["n"], json!(9));
        assert_eq!(doc["seed"], json!(1));
    }
}
