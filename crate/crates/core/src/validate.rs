use std::collections::HashSet;
use std::fmt;

use crate::model::{InfluenceDiagram, NodeKind, VarId};

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateName,
    BadDomain,
    BadParent,
    Cycle,
    ValueNodeCount,
    ValueNodeHasChild,
    MalformedTable,
    ProbabilityOutOfRange,
    RowNotNormalized,
    NonFiniteValue,
    DecisionOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "{}: {}", n, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Advisory findings that do not make the diagram ill-formed.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, node: Option<&str>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            node: node.map(str::to_owned),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

pub fn validate_diagram(d: &InfluenceDiagram) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = d.len();

    let mut seen = HashSet::new();
    for node in d.nodes() {
        if !seen.insert(node.name()) {
            report.push(
                ViolationKind::DuplicateName,
                Some(node.name()),
                format!("duplicate node name `{}`", node.name()),
            );
        }
    }

    let mut structural_ok = true;
    for (i, node) in d.nodes().iter().enumerate() {
        let name = node.name();
        if !node.is_value() {
            if node.var.domain.is_empty() {
                report.push(ViolationKind::BadDomain, Some(name), "empty domain");
            }
            let labels: HashSet<&str> = node.var.domain.iter().map(String::as_str).collect();
            if labels.len() != node.var.domain.len() {
                report.push(ViolationKind::BadDomain, Some(name), "duplicate outcome label");
            }
        }
        let mut parents = HashSet::new();
        for &p in &node.parents {
            if p >= n {
                report.push(
                    ViolationKind::BadParent,
                    Some(name),
                    format!("parent index {p} out of range"),
                );
                structural_ok = false;
            } else if p == i {
                report.push(ViolationKind::BadParent, Some(name), "node is its own parent");
                structural_ok = false;
            } else if !parents.insert(p) {
                report.push(
                    ViolationKind::BadParent,
                    Some(name),
                    format!("parent `{}` listed twice", d.node(p).name()),
                );
            }
            if p < n && d.node(p).is_value() {
                report.push(
                    ViolationKind::ValueNodeHasChild,
                    Some(d.node(p).name()),
                    format!("value node has child `{name}`"),
                );
            }
        }
    }

    let value_count = d.nodes().iter().filter(|x| x.is_value()).count();
    if value_count != 1 {
        report.push(
            ViolationKind::ValueNodeCount,
            None,
            format!("expected exactly one value node, found {value_count}"),
        );
    }

    if !structural_ok {
        return report;
    }

    let acyclic = d.topological_order().is_some();
    if !acyclic {
        report.push(ViolationKind::Cycle, None, "the arcs contain a cycle");
    }

    for i in 0..n {
        check_table(d, i, &mut report);
    }

    if acyclic {
        check_decision_order(d, &mut report);
    }
    no_forgetting_warnings(d, &mut report);
    report
}

fn check_table(d: &InfluenceDiagram, id: VarId, report: &mut ValidationReport) {
    let node = d.node(id);
    let name = node.name();
    let rows = d.row_count(id);
    match &node.kind {
        NodeKind::Chance { cpt } => {
            let card = node.var.card();
            if card == 0 {
                return;
            }
            if cpt.len() != rows * card {
                report.push(
                    ViolationKind::MalformedTable,
                    Some(name),
                    format!("table has {} entries, expected {}", cpt.len(), rows * card),
                );
                return;
            }
            for row in 0..rows {
                let entries = &cpt[row * card..(row + 1) * card];
                let labels = d.row_labels(id, row).join(" ");
                if entries.iter().any(|x| x.is_nan()) {
                    report.push(
                        ViolationKind::MalformedTable,
                        Some(name),
                        format!("row ({labels}) missing or non-numeric"),
                    );
                    continue;
                }
                if entries.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    report.push(
                        ViolationKind::ProbabilityOutOfRange,
                        Some(name),
                        format!("row ({labels}) has an entry outside [0, 1]"),
                    );
                }
                let sum: f64 = entries.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    report.push(
                        ViolationKind::RowNotNormalized,
                        Some(name),
                        format!("row ({labels}) not normalized: sums to {sum}"),
                    );
                }
            }
        }
        NodeKind::Value { values } => {
            if values.len() != rows {
                report.push(
                    ViolationKind::MalformedTable,
                    Some(name),
                    format!("value table has {} entries, expected {rows}", values.len()),
                );
                return;
            }
            for (row, v) in values.iter().enumerate() {
                if !v.is_finite() {
                    let labels = d.row_labels(id, row).join(" ");
                    report.push(
                        ViolationKind::NonFiniteValue,
                        Some(name),
                        format!("row ({labels}) is missing or not finite"),
                    );
                }
            }
        }
        NodeKind::Decision => {}
    }
}

/// Decision `j` may not be an ancestor of an earlier decision `i < j`.
fn check_decision_order(d: &InfluenceDiagram, report: &mut ValidationReport) {
    let decisions = d.decisions();
    for (i, &di) in decisions.iter().enumerate() {
        let ancestors = ancestors(d, di);
        for &dj in &decisions[i + 1..] {
            if ancestors.contains(&dj) {
                report.push(
                    ViolationKind::DecisionOrder,
                    Some(d.node(di).name()),
                    format!(
                        "decision order inconsistent with arcs: later decision `{}` is an ancestor",
                        d.node(dj).name()
                    ),
                );
            }
        }
    }
}

fn ancestors(d: &InfluenceDiagram, id: VarId) -> HashSet<VarId> {
    let mut seen = HashSet::new();
    let mut stack: Vec<VarId> = d.node(id).parents.clone();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(d.node(v).parents.iter().copied());
        }
    }
    seen
}

fn no_forgetting_warnings(d: &InfluenceDiagram, report: &mut ValidationReport) {
    let decisions = d.decisions();
    for w in decisions.windows(2) {
        let (prev, next) = (w[0], w[1]);
        let next_info = &d.node(next).parents;
        let mut missing: Vec<&str> = d
            .node(prev)
            .parents
            .iter()
            .chain(std::iter::once(&prev))
            .filter(|p| !next_info.contains(p))
            .map(|&p| d.node(p).name())
            .collect();
        missing.dedup();
        if !missing.is_empty() {
            report.warnings.push(format!(
                "{}: no-forgetting arcs missing from {}",
                d.node(next).name(),
                missing.join(", ")
            ));
        }
    }
}
