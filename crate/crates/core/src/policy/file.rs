//! Text format for policies.
//!
//! ```text
//! (policy NAME
//!   (decision D
//!     (split X
//!       (x1 (leaf action=a p=0.5 dist=(0.75 0.25) ev=(1 0)))
//!       (x2 (leaf action=b p=0.5 dist=(0.25 0.75) ev=(0 1) default=true))))
//!   (dp-table E
//!     (parents X Y)
//!     (row (x1 y1) a)
//!     ...))
//! ```
//!
//! Names and labels are the diagram's; reals use the shortest round-trip decimal. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::TablePolicy;
use crate::inference::CompiledNetwork;
use crate::model::{Context, InfluenceDiagram, VarId};
use crate::policy::{DecisionRule, DecisionTree, LeafData, Policy};

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom { text: String, line: usize, col: usize },
    List { items: Vec<Sexp>, line: usize, col: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.pos();
        Error::parse(l, c, message)
    }

    fn atom(&self) -> Result<&str> {
        match self {
            Sexp::Atom { text, .. } => Ok(text),
            Sexp::List { .. } => Err(self.err("expected an atom")),
        }
    }

    fn list(&self) -> Result<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Ok(items),
            Sexp::Atom { .. } => Err(self.err("expected a list")),
        }
    }

    /// The list's items after checking its head atom.
    fn form(&self, head: &str) -> Result<&[Sexp]> {
        let items = self.list()?;
        match items.first() {
            Some(h) if h.atom().ok() == Some(head) => Ok(&items[1..]),
            _ => Err(self.err(format!("expected `({head} ...)`"))),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Sexp>> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = vec![(Vec::new(), 0, 0)];
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c == '(' {
                stack.push((Vec::new(), line, col));
                i += 1;
            } else if c == ')' {
                if stack.len() == 1 {
                    return Err(Error::parse(line, col, "unbalanced `)`"));
                }
                let (items, l, cl) = stack.pop().expect("nonempty stack");
                stack.last_mut().expect("root").0.push(Sexp::List {
                    items,
                    line: l,
                    col: cl,
                });
                i += 1;
            } else {
                let start = i;
                // `key=(` leaves the `(` to open the following list.
                while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '(' && chars[i] != ')' {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                stack.last_mut().expect("root").0.push(Sexp::Atom { text, line, col });
            }
        }
    }
    if stack.len() != 1 {
        let (_, l, c) = stack.pop().expect("open list");
        return Err(Error::parse(l, c, "unclosed `(`"));
    }
    Ok(stack.pop().expect("root").0)
}

fn fmt_reals(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

fn write_tree(out: &mut String, d: &InfluenceDiagram, dvar: VarId, tree: &DecisionTree, indent: usize) {
    let pad = " ".repeat(indent);
    match tree {
        DecisionTree::Leaf(l) => {
            let _ = write!(
                out,
                "{pad}(leaf action={} p={} dist=({}) ev=({})",
                d.node(dvar).var.domain[l.best],
                l.p,
                fmt_reals(&l.dist),
                fmt_reals(&l.action_evs)
            );
            if l.default {
                out.push_str(" default=true");
            }
            out.push(')');
        }
        DecisionTree::Internal { var, children, .. } => {
            let _ = write!(out, "{pad}(split {}", d.node(*var).name());
            for (x, c) in children.iter().enumerate() {
                let _ = write!(out, "\n{pad}  ({}\n", d.node(*var).var.domain[x]);
                write_tree(out, d, dvar, c, indent + 4);
                out.push(')');
            }
            out.push(')');
        }
    }
}

/// Serializes a tree policy. `header` lines are emitted as `#` comments.
pub fn write_policy(d: &InfluenceDiagram, name: &str, policy: &Policy, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    let _ = write!(out, "(policy {name}");
    for (k, tree) in policy.trees().iter().enumerate() {
        let dvar = policy.decisions()[k];
        let _ = writeln!(out, "\n  (decision {}", d.node(dvar).name());
        write_tree(&mut out, d, dvar, tree, 4);
        out.push(')');
    }
    out.push_str(")\n");
    out
}

/// Serializes deterministic full tables, one `dp-table` block per decision.
pub fn write_tables(d: &InfluenceDiagram, name: &str, tables: &TablePolicy, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    let _ = write!(out, "(policy {name}");
    for k in 0..tables.len() {
        let dvar = d.decisions()[k];
        let info = tables.info(k);
        let parents: Vec<&str> = info.iter().map(|&v| d.node(v).name()).collect();
        let _ = write!(
            out,
            "\n  (dp-table {}\n    (parents {})",
            d.node(dvar).name(),
            parents.join(" ")
        );
        let cards: Vec<usize> = info.iter().map(|&v| d.card(v)).collect();
        for (row, &a) in tables.actions(k).iter().enumerate() {
            let w = crate::model::InformationState::from_index(info, &cards, row);
            let labels: Vec<&str> = info
                .iter()
                .zip(&w.values)
                .map(|(&v, &x)| d.node(v).var.domain[x].as_str())
                .collect();
            let _ = write!(out, "\n    (row ({}) {})", labels.join(" "), d.node(dvar).var.domain[a]);
        }
        out.push(')');
    }
    out.push_str(")\n");
    out
}

/// A policy read from a file and checked against a diagram.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedPolicy {
    Trees(Policy),
    Tables(TablePolicy),
}

impl LoadedPolicy {
    pub fn install(&self, net: &mut CompiledNetwork) -> Result<()> {
        match self {
            LoadedPolicy::Trees(p) => p.install_all(net),
            LoadedPolicy::Tables(t) => {
                for k in 0..t.len() {
                    net.install_decision_cpt(k, &t.cpt(k))?;
                }
                Ok(())
            }
        }
    }
}

impl DecisionRule for LoadedPolicy {
    fn distribution(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> Vec<f64> {
        match self {
            LoadedPolicy::Trees(p) => p.distribution(k, value_of),
            LoadedPolicy::Tables(t) => t.distribution(k, value_of),
        }
    }
}

fn mismatch(msg: impl Into<String>) -> Error {
    Error::PolicyMismatch(msg.into())
}

fn label_index(d: &InfluenceDiagram, var: VarId, s: &Sexp) -> Result<usize> {
    let label = s.atom()?;
    d.node(var)
        .var
        .index_of(label)
        .ok_or_else(|| mismatch(format!("`{label}` is not an outcome of `{}`", d.node(var).name())))
}

fn reals(s: &Sexp) -> Result<Vec<f64>> {
    s.list()?
        .iter()
        .map(|x| {
            let t = x.atom()?;
            t.parse::<f64>().map_err(|_| x.err(format!("`{t}` is not a number")))
        })
        .collect()
}

struct TreeReader<'a> {
    d: &'a InfluenceDiagram,
    net: &'a CompiledNetwork,
    k: usize,
    next_id: u64,
}

impl TreeReader<'_> {
    fn read(&mut self, s: &Sexp, context: &Context) -> Result<DecisionTree> {
        let items = s.list()?;
        let head = items.first().ok_or_else(|| s.err("empty list"))?.atom()?;
        let dvar = self.net.decisions()[self.k];
        match head {
            "leaf" => self.read_leaf(s, &items[1..], context, dvar),
            "split" => {
                let name_s = items.get(1).ok_or_else(|| s.err("split needs a variable"))?;
                let name = name_s.atom()?;
                let var = self
                    .d
                    .find(name)
                    .ok_or_else(|| mismatch(format!("unknown variable `{name}`")))?;
                if !self.net.info(self.k).contains(&var) {
                    return Err(mismatch(format!(
                        "`{name}` is not observed by `{}`",
                        self.d.node(dvar).name()
                    )));
                }
                if context.contains(var) {
                    return Err(mismatch(format!("`{name}` split twice on one path")));
                }
                let card = self.d.card(var);
                let mut children: Vec<Option<DecisionTree>> = vec![None; card];
                for branch in &items[2..] {
                    let b = branch.list()?;
                    if b.len() != 2 {
                        return Err(branch.err("branch must be `(outcome subtree)`"));
                    }
                    let x = label_index(self.d, var, &b[0])?;
                    if children[x].is_some() {
                        return Err(branch.err("repeated outcome"));
                    }
                    children[x] = Some(self.read(&b[1], &context.with(var, x))?);
                }
                let children = children
                    .into_iter()
                    .map(|c| {
                        c.map(std::sync::Arc::new)
                            .ok_or_else(|| mismatch(format!("split on `{name}` misses an outcome")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DecisionTree::Internal {
                    var,
                    children,
                    branch_probs: vec![1.0 / card as f64; card],
                })
            }
            other => Err(s.err(format!("unexpected `{other}`"))),
        }
    }

    fn read_leaf(&mut self, s: &Sexp, items: &[Sexp], context: &Context, dvar: VarId) -> Result<DecisionTree> {
        let n = self.d.card(dvar);
        let (mut action, mut p, mut dist, mut evs, mut default) = (None, None, None, None, false);
        let mut i = 0;
        while i < items.len() {
            let key = items[i].atom()?;
            match key.split_once('=') {
                Some(("action", l)) => {
                    action =
                        Some(self.d.node(dvar).var.index_of(l).ok_or_else(|| {
                            mismatch(format!("`{l}` is not an action of `{}`", self.d.node(dvar).name()))
                        })?)
                }
                Some(("p", v)) => p = Some(v.parse::<f64>().map_err(|_| items[i].err("bad p"))?),
                Some(("default", v)) => default = v == "true",
                Some(("dist", "")) | Some(("ev", "")) => {
                    let list = items.get(i + 1).ok_or_else(|| items[i].err("missing list"))?;
                    let xs = reals(list)?;
                    if xs.len() != n {
                        return Err(mismatch(format!("leaf lists {} values for {n} actions", xs.len())));
                    }
                    if key == "dist=" {
                        dist = Some(xs);
                    } else {
                        evs = Some(xs);
                    }
                    i += 1;
                }
                _ => return Err(items[i].err(format!("unexpected `{key}`"))),
            }
            i += 1;
        }
        let best = action.ok_or_else(|| s.err("leaf needs action="))?;
        let p = p.unwrap_or(1.0);
        let mut r = vec![0.0; n];
        r[best] = 1.0;
        let dist = dist.unwrap_or_else(|| r.clone());
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&x| x < 0.0) {
            return Err(s.err("leaf distribution must sum to 1"));
        }
        let id = self.next_id;
        self.next_id += 1;
        Ok(DecisionTree::leaf(LeafData {
            id,
            context: context.clone(),
            action_evs: evs.unwrap_or_else(|| vec![0.0; n]),
            best,
            m: dist.clone(),
            p,
            dist,
            prob: 0.0,
            reachable: !default,
            default,
        }))
    }
}

/// Parses a policy file and resolves it against `d`; every decision must appear once and
/// all blocks must be of one kind.
pub fn read_policy(text: &str, d: &InfluenceDiagram, net: &CompiledNetwork) -> Result<LoadedPolicy> {
    let top = tokenize(text)?;
    let root = match top.as_slice() {
        [one] => one,
        [] => return Err(Error::parse(1, 1, "empty policy file")),
        [_, second, ..] => return Err(second.err("expected a single `(policy ...)` form")),
    };
    let items = root.form("policy")?;
    let blocks = items.get(1..).unwrap_or(&[]);
    let n = d.decisions().len();
    let mut trees: Vec<Option<DecisionTree>> = vec![None; n];
    let mut tables: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut next_id = 0;
    for block in blocks {
        let b = block.list()?;
        let head = b.first().ok_or_else(|| block.err("empty block"))?.atom()?;
        let name_s = b.get(1).ok_or_else(|| block.err("block needs a decision name"))?;
        let name = name_s.atom()?;
        let k = d
            .decisions()
            .iter()
            .position(|&v| d.node(v).name() == name)
            .ok_or_else(|| mismatch(format!("`{name}` is not a decision")))?;
        if trees[k].is_some() || tables[k].is_some() {
            return Err(block.err(format!("decision `{name}` appears twice")));
        }
        match head {
            "decision" => {
                let body = b.get(2).ok_or_else(|| block.err("decision block needs a tree"))?;
                let mut reader = TreeReader { d, net, k, next_id };
                trees[k] = Some(reader.read(body, &Context::new())?);
                next_id = reader.next_id;
            }
            "dp-table" => tables[k] = Some(read_table(d, net, k, &b[2..], block)?),
            other => return Err(block.err(format!("unexpected `{other}`"))),
        }
    }
    let have_trees = trees.iter().filter(|t| t.is_some()).count();
    let have_tables = tables.iter().filter(|t| t.is_some()).count();
    if have_trees == n {
        let trees = trees.into_iter().map(|t| t.expect("checked")).collect();
        Ok(LoadedPolicy::Trees(Policy::from_trees(net, trees, next_id)))
    } else if have_tables == n {
        let actions = tables.into_iter().map(|t| t.expect("checked")).collect();
        Ok(LoadedPolicy::Tables(TablePolicy::new(d, actions)))
    } else {
        Err(mismatch(format!(
            "policy covers {} of {n} decisions",
            have_trees.max(have_tables)
        )))
    }
}

fn read_table(
    d: &InfluenceDiagram,
    net: &CompiledNetwork,
    k: usize,
    items: &[Sexp],
    block: &Sexp,
) -> Result<Vec<usize>> {
    let info = net.info(k);
    let dvar = net.decisions()[k];
    let parents = items
        .first()
        .ok_or_else(|| block.err("dp-table needs (parents ...)"))?
        .form("parents")?;
    let names: Vec<&str> = parents.iter().map(|p| p.atom()).collect::<Result<_>>()?;
    let expected: Vec<&str> = info.iter().map(|&v| d.node(v).name()).collect();
    if names != expected {
        return Err(mismatch(format!(
            "dp-table for `{}` lists parents ({}) but the diagram has ({})",
            d.node(dvar).name(),
            names.join(" "),
            expected.join(" ")
        )));
    }
    let cards: Vec<usize> = info.iter().map(|&v| d.card(v)).collect();
    let rows: usize = cards.iter().product();
    let mut actions: Vec<Option<usize>> = vec![None; rows];
    for row in &items[1..] {
        let r = row.form("row")?;
        if r.len() != 2 {
            return Err(row.err("row must be `(row (labels) action)`"));
        }
        let labels = r[0].list()?;
        if labels.len() != info.len() {
            return Err(row.err("row has the wrong number of labels"));
        }
        let mut idx = 0;
        for ((&v, s), &c) in info.iter().zip(labels).zip(&cards) {
            idx = idx * c + label_index(d, v, s)?;
        }
        actions[idx] = Some(label_index(d, dvar, &r[1])?);
    }
    actions
        .into_iter()
        .map(|a| a.ok_or_else(|| mismatch(format!("dp-table for `{}` is missing rows", d.node(dvar).name()))))
        .collect()
}
