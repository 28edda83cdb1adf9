//! Discrete influence diagrams: chance, decision and value nodes over finite domains.
//!
//! Every node lives in one arena and is addressed by its [`VarId`] (the position in
//! declaration order). Tables are dense, row-major over the parents in declared order
//! (first parent most significant), with the node's own outcome varying fastest.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::validate::{self, ValidationReport};

pub type VarId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, domain: impl IntoIterator<Item = S>) -> Self {
        Variable {
            name: name.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        }
    }

    pub fn card(&self) -> usize {
        self.domain.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.domain.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    /// Conditional probability table, one row per parent assignment.
    Chance {
        cpt: Vec<f64>,
    },
    Decision,
    /// Utility per parent assignment.
    Value {
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub var: Variable,
    pub parents: Vec<VarId>,
    pub kind: NodeKind,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.var.name
    }

    pub fn is_chance(&self) -> bool {
        matches!(self.kind, NodeKind::Chance { .. })
    }

    pub fn is_decision(&self) -> bool {
        matches!(self.kind, NodeKind::Decision)
    }

    pub fn is_value(&self) -> bool {
        matches!(self.kind, NodeKind::Value { .. })
    }
}

/// An influence diagram. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceDiagram {
    name: String,
    nodes: Vec<Node>,
    decisions: Vec<VarId>,
    metadata: BTreeMap<String, String>,
}

impl InfluenceDiagram {
    /// Builds a diagram without checking it; see [`InfluenceDiagram::validate`].
    pub fn new(name: impl Into<String>, nodes: Vec<Node>) -> Self {
        let decisions = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_decision())
            .map(|(i, _)| i)
            .collect();
        InfluenceDiagram {
            name: name.into(),
            nodes,
            decisions,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: VarId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn card(&self, id: VarId) -> usize {
        self.nodes[id].var.card()
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.nodes.iter().position(|n| n.name() == name)
    }

    /// Decision nodes in temporal order.
    pub fn decisions(&self) -> &[VarId] {
        &self.decisions
    }

    pub fn decision(&self, k: usize) -> Result<VarId> {
        self.decisions.get(k).copied().ok_or(Error::DecisionOutOfRange {
            index: k,
            count: self.decisions.len(),
        })
    }

    /// The first value node, if any.
    pub fn value_node(&self) -> Option<VarId> {
        self.nodes.iter().position(Node::is_value)
    }

    /// Information predecessors of decision `k` (0-based), in declared order.
    pub fn information_predecessors(&self, k: usize) -> Result<&[VarId]> {
        let d = self.decision(k)?;
        Ok(&self.nodes[d].parents)
    }

    pub fn children(&self, id: VarId) -> Vec<VarId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.parents.contains(&id))
            .map(|(i, _)| i)
            .collect()
    }

    /// A topological order of all nodes, or `None` if the arcs contain a cycle.
    /// Ties are broken by declaration order.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                if p < n {
                    indegree[i] += 1;
                    children[p].push(i);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<VarId> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Number of rows in the node's table (product of parent domain sizes).
    pub fn row_count(&self, id: VarId) -> usize {
        self.nodes[id]
            .parents
            .iter()
            .map(|&p| self.nodes.get(p).map_or(0, |n| n.var.card()))
            .product()
    }

    /// Labels of the parent assignment for a row index, for messages.
    pub fn row_labels(&self, id: VarId, row: usize) -> Vec<String> {
        let parents = &self.nodes[id].parents;
        let mut labels = vec![String::new(); parents.len()];
        let mut rest = row;
        for (slot, &p) in parents.iter().enumerate().rev() {
            let card = self.card(p).max(1);
            labels[slot] = self.nodes[p].var.domain.get(rest % card).cloned().unwrap_or_default();
            rest /= card;
        }
        labels
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate_diagram(self)
    }
}

/// Incremental construction of a diagram by [`VarId`].
#[derive(Default)]
pub struct DiagramBuilder {
    name: String,
    nodes: Vec<Node>,
}

impl DiagramBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        DiagramBuilder {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    pub fn chance(&mut self, var: Variable, parents: &[VarId], cpt: Vec<f64>) -> VarId {
        self.push(Node {
            var,
            parents: parents.to_vec(),
            kind: NodeKind::Chance { cpt },
        })
    }

    pub fn decision(&mut self, var: Variable, info: &[VarId]) -> VarId {
        self.push(Node {
            var,
            parents: info.to_vec(),
            kind: NodeKind::Decision,
        })
    }

    pub fn value(&mut self, name: impl Into<String>, parents: &[VarId], values: Vec<f64>) -> VarId {
        self.push(Node {
            var: Variable::new(name, Vec::<String>::new()),
            parents: parents.to_vec(),
            kind: NodeKind::Value { values },
        })
    }

    pub fn push(&mut self, node: Node) -> VarId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn card(&self, id: VarId) -> usize {
        self.nodes[id].var.card()
    }

    pub fn build(self) -> InfluenceDiagram {
        InfluenceDiagram::new(self.name, self.nodes)
    }
}

/// A partial assignment of outcome indices to variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    bindings: BTreeMap<VarId, usize>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        Context {
            bindings: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.bindings.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.bindings.contains_key(&var)
    }

    /// Adds a binding; rebinding a variable to a different outcome is an error.
    pub fn bind(&mut self, var: VarId, value: usize) -> Result<()> {
        match self.bindings.insert(var, value) {
            Some(old) if old != value => {
                self.bindings.insert(var, old);
                Err(Error::AlreadyBound(var.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// Copy of this context with one more binding (overriding any existing one).
    pub fn with(&self, var: VarId, value: usize) -> Context {
        let mut c = self.clone();
        c.bindings.insert(var, value);
        c
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.bindings.iter().map(|(&v, &x)| (v, x))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.bindings.keys().copied()
    }

    /// True if every binding here agrees with `value_of`.
    pub fn covers(&self, value_of: impl Fn(VarId) -> usize) -> bool {
        self.bindings.iter().all(|(&v, &x)| value_of(v) == x)
    }

    pub fn describe(&self, d: &InfluenceDiagram) -> String {
        let parts: Vec<String> = self
            .iter()
            .map(|(v, x)| format!("{}={}", d.node(v).name(), d.node(v).var.domain[x]))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A total assignment to one decision's information predecessors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InformationState {
    pub vars: Vec<VarId>,
    pub values: Vec<usize>,
}

impl InformationState {
    pub fn get(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|&v| v == var).map(|i| self.values[i])
    }

    /// Row-major index over the given cardinalities.
    pub fn index(&self, cards: &[usize]) -> usize {
        self.values.iter().zip(cards).fold(0, |acc, (&x, &c)| acc * c + x)
    }

    /// Decodes a row-major index.
    pub fn from_index(vars: &[VarId], cards: &[usize], mut index: usize) -> Self {
        let mut values = vec![0; vars.len()];
        for i in (0..vars.len()).rev() {
            values[i] = index % cards[i];
            index /= cards[i];
        }
        InformationState {
            vars: vars.to_vec(),
            values,
        }
    }
}
