//! Line-oriented text format for trees.
//!
//! ```text
//! # optional comment lines
//! n 3
//! 0 - 0
//! 1 0 0
//! 2 0 1
//! edge 0 1 1.5
//! edge 0 2 0.25
//! mark 2 0
//! ```
//!
//! The header gives the vertex count. Each vertex line is `id parent
//! child-order`, with `-` as the root's parent, listed in preorder. Metric
//! trees add one `edge parent child length` line per edge and optional
//! `mark edge offset` lines for the designated points, in order.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::metric::{MetricTree, TreePoint};
use super::OrderedTree;

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        message: message.into(),
    })
}

fn write_structure(out: &mut String, n: usize, root: usize, preorder: &[usize], parent: impl Fn(usize) -> Option<usize>, children: impl Fn(usize) -> Vec<usize>) {
    let _ = writeln!(out, "n {n}");
    for &v in preorder {
        match parent(v) {
            None => {
                debug_assert_eq!(v, root);
                let _ = writeln!(out, "{v} - 0");
            }
            Some(p) => {
                let pos = children(p).iter().position(|&c| c == v).unwrap();
                let _ = writeln!(out, "{v} {p} {pos}");
            }
        }
    }
}

fn comment_block(comments: &[String]) -> String {
    comments.iter().map(|c| format!("# {c}\n")).collect()
}

pub fn write_ordered_tree(t: &OrderedTree, comments: &[String]) -> String {
    let mut out = comment_block(comments);
    write_structure(&mut out, t.len(), t.root(), &t.preorder(), |v| t.parent(v), |v| t.children(v).to_vec());
    out
}

pub fn write_metric_tree(t: &MetricTree, comments: &[String]) -> String {
    let mut out = comment_block(comments);
    let order = t.preorder();
    write_structure(&mut out, t.len(), t.root(), &order, |v| t.parent(v), |v| t.children(v).to_vec());
    for &v in &order {
        if let Some(p) = t.parent(v) {
            let _ = writeln!(out, "edge {p} {v} {}", t.edge_length(v));
        }
    }
    for m in t.marks() {
        let _ = writeln!(out, "mark {} {}", m.edge, m.offset);
    }
    out
}

struct Parsed {
    root: usize,
    children: Vec<Vec<usize>>,
    lengths: Vec<Option<(usize, f64)>>,
    marks: Vec<TreePoint>,
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    match tok.map(str::parse) {
        Some(Ok(x)) => Ok(x),
        _ => parse_err(line, format!("expected {what}")),
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut n: Option<usize> = None;
    let mut slots: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut seen = Vec::new();
    let mut root = None;
    let mut lengths = Vec::new();
    let mut marks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let mut toks = s.split_whitespace();
        let head = toks.next().unwrap();
        match (head, n) {
            ("n", None) => {
                let count: usize = field(toks.next(), line, "vertex count")?;
                if count == 0 {
                    return parse_err(line, "vertex count must be positive");
                }
                n = Some(count);
                slots = vec![Vec::new(); count];
                seen = vec![false; count];
                lengths = vec![None; count];
            }
            (_, None) => return parse_err(line, "missing `n <count>` header"),
            ("n", Some(_)) => return parse_err(line, "duplicate header"),
            ("edge", Some(count)) => {
                let p: usize = field(toks.next(), line, "edge parent")?;
                let c: usize = field(toks.next(), line, "edge child")?;
                let len: f64 = field(toks.next(), line, "edge length")?;
                if p >= count || c >= count {
                    return parse_err(line, "edge endpoint out of range");
                }
                lengths[c] = Some((p, len));
            }
            ("mark", Some(count)) => {
                let e: usize = field(toks.next(), line, "mark edge")?;
                let off: f64 = field(toks.next(), line, "mark offset")?;
                if e >= count {
                    return parse_err(line, "mark edge out of range");
                }
                marks.push(TreePoint { edge: e, offset: off });
            }
            (_, Some(count)) => {
                let v: usize = field(Some(head), line, "vertex id")?;
                if v >= count {
                    return parse_err(line, format!("vertex {v} out of range"));
                }
                if seen[v] {
                    return parse_err(line, format!("vertex {v} listed twice"));
                }
                seen[v] = true;
                let ptok = toks.next();
                let order: usize = field(toks.next(), line, "child order")?;
                if ptok == Some("-") {
                    if root.is_some() {
                        return parse_err(line, "more than one root");
                    }
                    root = Some(v);
                } else {
                    let p: usize = field(ptok, line, "parent id")?;
                    if p >= count {
                        return parse_err(line, format!("parent {p} out of range"));
                    }
                    slots[p].push((order, v));
                }
            }
        }
        if toks.next().is_some() {
            return parse_err(line, "trailing fields");
        }
    }
    let Some(count) = n else {
        return parse_err(0, "empty tree file");
    };
    if let Some(v) = seen.iter().position(|s| !s) {
        return parse_err(0, format!("vertex {v} missing"));
    }
    let Some(root) = root else {
        return parse_err(0, "no root");
    };
    let mut children = Vec::with_capacity(count);
    for mut s in slots {
        s.sort_unstable();
        if s.iter().enumerate().any(|(i, &(o, _))| o != i) {
            return parse_err(0, "child orders must be 0, 1, 2, ... per parent");
        }
        children.push(s.into_iter().map(|(_, c)| c).collect());
    }
    Ok(Parsed {
        root,
        children,
        lengths,
        marks,
    })
}

pub fn parse_ordered_tree(text: &str) -> Result<OrderedTree> {
    let p = parse(text)?;
    OrderedTree::from_children(p.root, p.children)
}

pub fn parse_metric_tree(text: &str) -> Result<MetricTree> {
    let p = parse(text)?;
    let mut lengths = vec![0.0; p.children.len()];
    for (v, l) in p.lengths.iter().enumerate() {
        match *l {
            Some((u, _)) if !p.children[u].contains(&v) => {
                return parse_err(0, format!("edge line {u} {v} does not match the vertex lines"))
            }
            Some((_, len)) => lengths[v] = len,
            None if v != p.root => return parse_err(0, format!("no edge line for vertex {v}")),
            None => {}
        }
    }
    MetricTree::from_children(p.root, p.children, lengths, p.marks)
}
