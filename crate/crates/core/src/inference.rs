//! Influence diagram to Bayesian network compilation and exact queries by variable
//! elimination.
//!
//! The value node becomes a binary chance node `{v, not_v}` whose CPT is the value
//! function rescaled to `[0, 1]`; each decision becomes a chance node with an installable
//! CPT (uniform and parentless at compile time). Every public query increments the
//! network's [`QueryLedger`] under the current [`QueryKind`].

use std::fmt;

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::model::{Context, InfluenceDiagram, NodeKind, VarId};

/// Probabilities at or below this are treated as zero.
pub const NONZERO: f64 = 1e-12;

/// Values within this (on the `[0, 1]` scale) of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Outcome index of `v` in the value node's binary domain.
pub const V: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryKind {
    Initialization,
    ExtensionEvaluation,
    GlobalUpdate,
    PolicyEvaluation,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [
        QueryKind::Initialization,
        QueryKind::ExtensionEvaluation,
        QueryKind::GlobalUpdate,
        QueryKind::PolicyEvaluation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QueryKind::Initialization => "initialization",
            QueryKind::ExtensionEvaluation => "extension-evaluation",
            QueryKind::GlobalUpdate => "global-update",
            QueryKind::PolicyEvaluation => "policy-evaluation",
        }
    }
}

/// Query counts by category.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLedger {
    counts: [u64; 4],
}

impl QueryLedger {
    pub fn record(&mut self, kind: QueryKind) {
        self.counts[kind as usize] += 1;
    }

    pub fn count(&self, kind: QueryKind) -> u64 {
        self.counts[kind as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count\n");
        for k in QueryKind::ALL {
            out.push_str(&format!("{},{}\n", k.label(), self.count(k)));
        }
        out
    }
}

impl fmt::Display for QueryLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = QueryKind::ALL
            .iter()
            .map(|&k| format!("{}={}", k.label(), self.count(k)))
            .collect();
        write!(f, "{} (total {})", parts.join(" "), self.total())
    }
}

/// Range of the original value function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueBounds {
    pub min: f64,
    pub max: f64,
}

impl ValueBounds {
    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn normalize(&self, value: f64) -> f64 {
        if self.is_degenerate() {
            0.5
        } else {
            ((value - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    pub fn unnormalize(&self, p: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            self.min + p.clamp(0.0, 1.0) * (self.max - self.min)
        }
    }
}

/// Rescales a value table to `P(v | row)`; returns `[P(v), P(not v)]` pairs row by row.
/// A constant table maps every row to 0.5.
pub fn normalize_value(values: &[f64]) -> (Vec<f64>, ValueBounds) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounds = if values.is_empty() {
        ValueBounds { min: 0.0, max: 0.0 }
    } else {
        ValueBounds { min, max }
    };
    let mut table = Vec::with_capacity(values.len() * 2);
    for &v in values {
        let p = bounds.normalize(v);
        table.push(p);
        table.push(1.0 - p);
    }
    (table, bounds)
}

/// Index of the largest entry; entries within `tol` of the maximum tie and the lowest
/// index wins.
pub fn argmax_tol(values: &[f64], tol: f64) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= max - tol).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Marginal {
    Distribution(Vec<f64>),
    /// The evidence has zero probability.
    Inconsistent,
}

impl Marginal {
    pub fn distribution(self) -> Option<Vec<f64>> {
        match self {
            Marginal::Distribution(d) => Some(d),
            Marginal::Inconsistent => None,
        }
    }
}

/// MEV action in a context plus the expected value of every action, in original units.
#[derive(Clone, Debug, PartialEq)]
pub struct MevResult {
    pub action: usize,
    pub evs: Vec<f64>,
}

/// Outcome of re-evaluating a leaf during a sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum Reevaluation {
    Values(MevResult),
    /// The context itself has zero probability.
    Unreachable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EliminationOrder {
    #[default]
    MinDegree,
    /// Ascending variable id.
    Declaration,
}

#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    names: Vec<String>,
    cards: Vec<usize>,
    /// One factor per node; the node's own variable is last in its scope.
    factors: Vec<Factor>,
    parents: Vec<Vec<VarId>>,
    decisions: Vec<VarId>,
    info: Vec<Vec<VarId>>,
    value_var: VarId,
    bounds: ValueBounds,
    ledger: QueryLedger,
    category: QueryKind,
    order: EliminationOrder,
}

impl CompiledNetwork {
    /// Compiles a validated diagram; decisions start uniform and parentless.
    pub fn compile(d: &InfluenceDiagram) -> Result<Self> {
        let report = d.validate();
        if !report.is_ok() {
            return Err(Error::Invalid(report));
        }
        let value_var = d.value_node().expect("validated diagram has a value node");
        let mut cards: Vec<usize> = d.nodes().iter().map(|n| n.var.card()).collect();
        cards[value_var] = 2;

        let mut factors = Vec::with_capacity(d.len());
        let mut bounds = ValueBounds { min: 0.0, max: 0.0 };
        for (id, node) in d.nodes().iter().enumerate() {
            let mut scope = node.parents.clone();
            scope.push(id);
            let fcards: Vec<usize> = scope.iter().map(|&v| cards[v]).collect();
            let factor = match &node.kind {
                NodeKind::Chance { cpt } => Factor::new(scope, fcards, cpt.clone())?,
                NodeKind::Decision => uniform_factor(id, cards[id]),
                NodeKind::Value { values } => {
                    let (table, b) = normalize_value(values);
                    bounds = b;
                    Factor::new(scope, fcards, table)?
                }
            };
            factors.push(factor);
        }
        let parents = factors.iter().map(|f| parent_scope(f).to_vec()).collect();
        let mut names: Vec<String> = d.nodes().iter().map(|n| n.name().to_owned()).collect();
        names[value_var] = d.node(value_var).name().to_owned();
        Ok(CompiledNetwork {
            names,
            cards,
            factors,
            parents,
            decisions: d.decisions().to_vec(),
            info: d.decisions().iter().map(|&k| d.node(k).parents.clone()).collect(),
            value_var,
            bounds,
            ledger: QueryLedger::default(),
            category: QueryKind::Initialization,
            order: EliminationOrder::MinDegree,
        })
    }

    pub fn bounds(&self) -> ValueBounds {
        self.bounds
    }

    pub fn value_var(&self) -> VarId {
        self.value_var
    }

    pub fn card(&self, var: VarId) -> usize {
        self.cards[var]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn name(&self, var: VarId) -> &str {
        &self.names[var]
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn decisions(&self) -> &[VarId] {
        &self.decisions
    }

    pub fn decision_var(&self, k: usize) -> Result<VarId> {
        self.decisions.get(k).copied().ok_or(Error::DecisionOutOfRange {
            index: k,
            count: self.decisions.len(),
        })
    }

    pub fn info(&self, k: usize) -> &[VarId] {
        &self.info[k]
    }

    pub fn decision_factor(&self, k: usize) -> &Factor {
        &self.factors[self.decisions[k]]
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn query_count(&self) -> u64 {
        self.ledger.total()
    }

    pub fn category(&self) -> QueryKind {
        self.category
    }

    /// Sets the category that subsequent queries are charged to.
    pub fn set_category(&mut self, kind: QueryKind) {
        self.category = kind;
    }

    pub fn set_elimination_order(&mut self, order: EliminationOrder) {
        self.order = order;
    }

    fn check_var(&self, var: VarId) -> Result<()> {
        if var < self.cards.len() {
            Ok(())
        } else {
            Err(Error::UnknownVariable(var.to_string()))
        }
    }

    fn check_evidence(&self, evidence: &Context) -> Result<()> {
        for (v, x) in evidence.iter() {
            self.check_var(v)?;
            if x >= self.cards[v] {
                return Err(Error::UnknownVariable(format!("{}={x}", self.names[v])));
            }
        }
        Ok(())
    }

    /// Posterior of `target` given `evidence`. One query.
    pub fn query_marginal(&mut self, target: VarId, evidence: &Context) -> Result<Marginal> {
        self.check_var(target)?;
        self.check_evidence(evidence)?;
        self.ledger.record(self.category);
        let table = self.eliminate(Some(target), evidence);
        let total: f64 = table.iter().sum();
        if total <= NONZERO {
            return Ok(Marginal::Inconsistent);
        }
        Ok(Marginal::Distribution(table.iter().map(|p| p / total).collect()))
    }

    /// `P(evidence)`. One query.
    pub fn prob_of_evidence(&mut self, evidence: &Context) -> Result<f64> {
        self.check_evidence(evidence)?;
        self.ledger.record(self.category);
        Ok(self.eliminate(None, evidence)[0])
    }

    /// Expected value (original units) of the installed policy given `evidence`. One query.
    pub fn expected_value(&mut self, evidence: &Context) -> Result<f64> {
        match self.query_marginal(self.value_var, evidence)? {
            Marginal::Distribution(p) => Ok(self.bounds.unnormalize(p[V])),
            Marginal::Inconsistent => Err(Error::InconsistentContext),
        }
    }

    /// MEV action for decision `k` in `context`, with every action's expected value.
    ///
    /// Three queries: `P(v, context)`, `P(D | v, context)` and `P(v | d*, context)`, all
    /// with the rows of D's CPT covering `context` held uniform.
    pub fn mev_action(&mut self, k: usize, context: &Context) -> Result<MevResult> {
        self.decision_var(k)?;
        self.check_evidence(context)?;
        self.with_neutral(k, context, |net| {
            let pv = net.prob_of_evidence(&context.with(net.value_var, V))?;
            if pv <= NONZERO {
                return Err(Error::InconsistentContext);
            }
            match net.mev_queries(k, context)? {
                Reevaluation::Values(r) => Ok(r),
                Reevaluation::Unreachable => Err(Error::InconsistentContext),
            }
        })
    }

    /// The two-query leaf refresh used by global sweeps: `P(D | v, context)` then
    /// `P(v | d*, context)` under the same neutrality as [`Self::mev_action`]. When `v` is
    /// impossible in a reachable context every action gets the minimum value.
    pub fn reevaluate(&mut self, k: usize, context: &Context) -> Result<Reevaluation> {
        self.decision_var(k)?;
        self.check_evidence(context)?;
        self.with_neutral(k, context, |net| net.mev_queries(k, context))
    }

    fn mev_queries(&mut self, k: usize, context: &Context) -> Result<Reevaluation> {
        let d = self.decisions[k];
        let n = self.cards[d];
        let posterior = match self.query_marginal(d, &context.with(self.value_var, V))? {
            Marginal::Distribution(p) => p,
            Marginal::Inconsistent => {
                return Ok(match self.query_marginal(self.value_var, &context.with(d, 0))? {
                    Marginal::Distribution(_) => Reevaluation::Values(MevResult {
                        action: 0,
                        evs: vec![self.bounds.unnormalize(0.0); n],
                    }),
                    Marginal::Inconsistent => Reevaluation::Unreachable,
                });
            }
        };
        let provisional = argmax_tol(&posterior, TIE_TOLERANCE);
        let pv_best = match self.query_marginal(self.value_var, &context.with(d, provisional))? {
            Marginal::Distribution(p) => p[V],
            Marginal::Inconsistent => return Ok(Reevaluation::Unreachable),
        };
        // Under a uniform decision row, P(v | d_i, ctx) is proportional to P(d_i | v, ctx).
        let normalized: Vec<f64> = posterior
            .iter()
            .map(|&q| (q / posterior[provisional] * pv_best).clamp(0.0, 1.0))
            .collect();
        let action = argmax_tol(&normalized, TIE_TOLERANCE);
        let evs = normalized.iter().map(|&p| self.bounds.unnormalize(p)).collect();
        Ok(Reevaluation::Values(MevResult { action, evs }))
    }

    /// Expected value of taking `action` at decision `k` in `context`. One query.
    pub fn expected_value_of_action(&mut self, k: usize, action: usize, context: &Context) -> Result<f64> {
        let d = self.decision_var(k)?;
        if action >= self.cards[d] {
            return Err(Error::UnknownVariable(format!("{}={action}", self.names[d])));
        }
        self.check_evidence(context)?;
        self.with_neutral(k, context, |net| net.expected_value(&context.with(d, action)))
    }

    /// Runs `f` with the rows of decision `k`'s CPT that cover `context` set uniform,
    /// restoring the CPT afterwards.
    fn with_neutral<R>(&mut self, k: usize, context: &Context, f: impl FnOnce(&mut Self) -> R) -> R {
        let d = self.decisions[k];
        let neutral = neutral_factor(&self.factors[d], context);
        let saved = std::mem::replace(&mut self.factors[d], neutral);
        let out = f(self);
        self.factors[d] = saved;
        out
    }

    /// Installs a full decision table over `info(k)` followed by the decision itself.
    /// Not counted as a query.
    pub fn install_decision_cpt(&mut self, k: usize, cpt: &[f64]) -> Result<()> {
        let d = self.decision_var(k)?;
        let mut scope = self.info[k].clone();
        scope.push(d);
        let cards: Vec<usize> = scope.iter().map(|&v| self.cards[v]).collect();
        let factor = Factor::new(scope, cards, cpt.to_vec())?;
        self.install_decision_factor(k, factor)
    }

    /// Installs a decision CPT whose parents are any subset of `info(k)`; the decision
    /// variable must come last in the scope. Not counted as a query.
    pub fn install_decision_factor(&mut self, k: usize, factor: Factor) -> Result<()> {
        let d = self.decision_var(k)?;
        let (last, parents) = factor
            .scope()
            .split_last()
            .ok_or_else(|| Error::MalformedCpt("empty scope".into()))?;
        if *last != d {
            return Err(Error::MalformedCpt(
                "decision variable must be last in the scope".into(),
            ));
        }
        if let Some(p) = parents.iter().find(|p| !self.info[k].contains(p)) {
            return Err(Error::MalformedCpt(format!(
                "`{}` is not an information predecessor of `{}`",
                self.names[*p], self.names[d]
            )));
        }
        for (&v, &c) in factor.scope().iter().zip(factor.cards()) {
            if c != self.cards[v] {
                return Err(Error::MalformedCpt(format!(
                    "cardinality mismatch for `{}`",
                    self.names[v]
                )));
            }
        }
        let n = self.cards[d];
        for (i, row) in factor.values().chunks(n).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedCpt(format!("row {i} sums to {s}")));
            }
        }
        self.parents[d] = parents.to_vec();
        self.factors[d] = factor;
        Ok(())
    }

    /// Unnormalized table over `target` (or a one-entry table holding `P(evidence)`).
    fn eliminate(&self, target: Option<VarId>, evidence: &Context) -> Vec<f64> {
        let n = self.cards.len();

        // Only ancestors of the query and evidence matter; everything else sums to one.
        let mut relevant = vec![false; n];
        let mut stack: Vec<VarId> = evidence.vars().chain(target).collect();
        while let Some(v) = stack.pop() {
            if !relevant[v] {
                relevant[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }

        let mut factors: Vec<Factor> = (0..n)
            .filter(|&v| relevant[v])
            .map(|v| self.factors[v].reduce(evidence))
            .collect();
        let mut remaining: Vec<VarId> = (0..n)
            .filter(|&v| relevant[v] && Some(v) != target && !evidence.contains(v))
            .collect();

        while !remaining.is_empty() {
            let pick = match self.order {
                EliminationOrder::Declaration => 0,
                EliminationOrder::MinDegree => min_degree(&factors, &remaining, n),
            };
            let var = remaining.remove(pick);
            let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
            factors = without;
            if !with.is_empty() {
                let refs: Vec<&Factor> = with.iter().collect();
                factors.push(Factor::combine(&refs, Some(var)));
            }
        }

        let refs: Vec<&Factor> = factors.iter().collect();
        let result = Factor::product(&refs);
        match target {
            Some(t) => match evidence.get(t) {
                Some(x) => {
                    let mut out = vec![0.0; self.cards[t]];
                    out[x] = result.total();
                    out
                }
                None if result.scope().is_empty() => {
                    // Target has no relevant factor; cannot happen for a compiled node.
                    vec![result.total() / self.cards[t] as f64; self.cards[t]]
                }
                None => result.values().to_vec(),
            },
            None => vec![result.total()],
        }
    }
}

fn uniform_factor(var: VarId, card: usize) -> Factor {
    Factor::new(vec![var], vec![card], vec![1.0 / card as f64; card]).expect("uniform factor")
}

fn parent_scope(f: &Factor) -> &[VarId] {
    &f.scope()[..f.scope().len() - 1]
}

/// Copy of a decision CPT with every row consistent with `context` made uniform.
fn neutral_factor(f: &Factor, context: &Context) -> Factor {
    let parents = parent_scope(f);
    let pcards = &f.cards()[..parents.len()];
    let n = *f.cards().last().expect("decision factor");
    let mut out = f.clone();
    let rows = f.values().len() / n;
    let mut assign = vec![0usize; parents.len()];
    for row in 0..rows {
        let consistent = parents
            .iter()
            .zip(&assign)
            .all(|(&v, &x)| context.get(v).is_none_or(|c| c == x));
        if consistent {
            out.values_mut()[row * n..(row + 1) * n].fill(1.0 / n as f64);
        }
        for j in (0..parents.len()).rev() {
            assign[j] += 1;
            if assign[j] < pcards[j] {
                break;
            }
            assign[j] = 0;
        }
    }
    out
}

/// Greedy min-degree choice (ties to the lowest id) over the factors' interaction graph.
fn min_degree(factors: &[Factor], remaining: &[VarId], n: usize) -> usize {
    let words = n.div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = factors
        .iter()
        .map(|f| {
            let mut m = vec![0u64; words];
            for &v in f.scope() {
                m[v / 64] |= 1 << (v % 64);
            }
            m
        })
        .collect();
    let mut best = (usize::MAX, 0);
    let mut acc = vec![0u64; words];
    for (i, &v) in remaining.iter().enumerate() {
        acc.fill(0);
        for m in &masks {
            if m[v / 64] & (1 << (v % 64)) != 0 {
                for (a, b) in acc.iter_mut().zip(m) {
                    *a |= b;
                }
            }
        }
        let degree: usize = acc.iter().map(|w| w.count_ones() as usize).sum();
        if degree < best.0 {
            best = (degree, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagramBuilder, Variable};

    fn chain() -> (InfluenceDiagram, VarId, VarId) {
        let mut b = DiagramBuilder::new("chain");
        let a = b.chance(Variable::new("A", ["a1", "a2"]), &[], vec![0.3, 0.7]);
        let bb = b.chance(Variable::new("B", ["b1", "b2"]), &[a], vec![0.9, 0.1, 0.2, 0.8]);
        b.value("V", &[bb], vec![1.0, 0.0]);
        (b.build(), a, bb)
    }

    #[test]
    fn normalize_value_examples() {
        let (t, b) = normalize_value(&[-10.0, 0.0, 30.0]);
        assert_eq!(b, ValueBounds { min: -10.0, max: 30.0 });
        assert_eq!(t, vec![0.0, 1.0, 0.25, 0.75, 1.0, 0.0]);

        let (t, _) = normalize_value(&[1.0, 0.0, 0.0]);
        assert_eq!(t, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);

        let (t, b) = normalize_value(&[5.0, 5.0]);
        assert_eq!(t, vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(b, ValueBounds { min: 5.0, max: 5.0 });
        assert_eq!(b.unnormalize(0.5), 5.0);
    }

    #[test]
    fn chain_marginals() {
        let (d, a, b) = chain();
        let mut net = CompiledNetwork::compile(&d).unwrap();
        let m = net.query_marginal(b, &Context::new()).unwrap().distribution().unwrap();
        assert!((m[0] - 0.41).abs() < 1e-12 && (m[1] - 0.59).abs() < 1e-12);
        let m = net
            .query_marginal(a, &Context::from_pairs([(a, 0)]))
            .unwrap()
            .distribution()
            .unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
        assert_eq!(net.query_count(), 2);
    }

    #[test]
    fn prob_of_evidence_edges() {
        let mut bld = DiagramBuilder::new("det");
        let a = bld.chance(Variable::new("A", ["0", "1"]), &[], vec![0.5, 0.5]);
        let b = bld.chance(Variable::new("B", ["0", "1"]), &[a], vec![1.0, 0.0, 0.0, 1.0]);
        bld.value("V", &[b], vec![0.0, 1.0]);
        let mut net = CompiledNetwork::compile(&bld.build()).unwrap();
        assert_eq!(net.prob_of_evidence(&Context::new()).unwrap(), 1.0);
        assert_eq!(
            net.prob_of_evidence(&Context::from_pairs([(a, 0), (b, 1)])).unwrap(),
            0.0
        );
        assert_eq!(
            net.query_marginal(a, &Context::from_pairs([(b, 1), (a, 0)])).unwrap(),
            Marginal::Inconsistent
        );
    }

    #[test]
    fn compile_installs_uniform_decisions() {
        let mut b = DiagramBuilder::new("five");
        let s = b.chance(Variable::new("S", ["0", "1"]), &[], vec![0.5, 0.5]);
        let d = b.decision(Variable::new("D", ["N", "S", "E", "W", "stay"]), &[s]);
        b.value("V", &[d], vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let net = CompiledNetwork::compile(&b.build()).unwrap();
        assert_eq!(net.decision_factor(0).values(), &[0.2; 5]);
        assert_eq!(net.decision_factor(0).scope(), &[d]);
        assert_eq!(net.query_count(), 0);
    }

    #[test]
    fn mev_prefers_dominant_action_and_costs_three() {
        // One decision, two actions; `a` is worth 10 in both states, `b` only 4 or 6.
        let mut b = DiagramBuilder::new("dominant");
        let s = b.chance(Variable::new("S", ["s1", "s2"]), &[], vec![0.4, 0.6]);
        let d = b.decision(Variable::new("D", ["a", "b"]), &[]);
        b.value("U", &[s, d], vec![10.0, 4.0, 10.0, 6.0]);
        let mut net = CompiledNetwork::compile(&b.build()).unwrap();
        let r = net.mev_action(0, &Context::new()).unwrap();
        assert_eq!(r.action, 0);
        assert!((r.evs[0] - 10.0).abs() < 1e-12);
        // 0.4 * 4 + 0.6 * 6
        assert!((r.evs[1] - 5.2).abs() < 1e-12);
        assert_eq!(net.query_count(), 3);
    }

    #[test]
    fn mev_tie_goes_to_lowest_index() {
        let mut b = DiagramBuilder::new("tie");
        let s = b.chance(Variable::new("S", ["0", "1"]), &[], vec![0.5, 0.5]);
        let d = b.decision(Variable::new("D", ["x", "y"]), &[]);
        b.value("U", &[s, d], vec![1.0, 0.0, 0.0, 1.0]);
        let mut net = CompiledNetwork::compile(&b.build()).unwrap();
        let r = net.mev_action(0, &Context::new()).unwrap();
        assert_eq!(r.action, 0);
        assert!((r.evs[0] - r.evs[1]).abs() < 1e-12);
    }

    #[test]
    fn mev_inconsistent_context() {
        let mut b = DiagramBuilder::new("zero");
        let s = b.chance(Variable::new("S", ["0", "1"]), &[], vec![1.0, 0.0]);
        let d = b.decision(Variable::new("D", ["x", "y"]), &[s]);
        b.value("U", &[s, d], vec![1.0, 0.0, 0.0, 1.0]);
        let mut net = CompiledNetwork::compile(&b.build()).unwrap();
        let err = net.mev_action(0, &Context::from_pairs([(s, 1)])).unwrap_err();
        assert!(matches!(err, Error::InconsistentContext));
        assert_eq!(net.query_count(), 1);
    }

    #[test]
    fn delta_and_constant_value_functions() {
        let mut b = DiagramBuilder::new("delta");
        let d = b.decision(Variable::new("D", ["a1", "a2"]), &[]);
        b.value("U", &[d], vec![1.0, 0.0]);
        let mut net = CompiledNetwork::compile(&b.build()).unwrap();
        assert_eq!(net.expected_value_of_action(0, 0, &Context::new()).unwrap(), 1.0);
        assert_eq!(net.expected_value_of_action(0, 1, &Context::new()).unwrap(), 0.0);
        assert_eq!(net.query_count(), 2);

        let mut b = DiagramBuilder::new("const");
        let d = b.decision(Variable::new("D", ["a1", "a2"]), &[]);
        b.value("U", &[d], vec![7.5, 7.5]);
        let mut net = CompiledNetwork::compile(&b.build()).unwrap();
        for a in 0..2 {
            assert_eq!(net.expected_value_of_action(0, a, &Context::new()).unwrap(), 7.5);
        }
    }

    #[test]
    fn install_deterministic_and_uniform() {
        let mut b = DiagramBuilder::new("install");
        let s = b.chance(Variable::new("S", ["0", "1", "2"]), &[], vec![0.2, 0.3, 0.5]);
        let d = b.decision(Variable::new("D", ["a", "b"]), &[s]);
        b.value("U", &[s, d], vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let diagram = b.build();
        let mut net = CompiledNetwork::compile(&diagram).unwrap();
        let fresh = net.query_marginal(d, &Context::new()).unwrap();

        net.install_decision_cpt(0, &[0.5; 6]).unwrap();
        assert_eq!(net.query_marginal(d, &Context::new()).unwrap(), fresh);

        net.install_decision_cpt(0, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let m = net.query_marginal(d, &Context::new()).unwrap().distribution().unwrap();
        assert_eq!(m, vec![1.0, 0.0]);
        assert_eq!(net.query_count(), 3);

        assert!(net.install_decision_cpt(0, &[0.7, 0.7, 0.5, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn ledger_csv_lists_every_category() {
        let mut l = QueryLedger::default();
        l.record(QueryKind::GlobalUpdate);
        l.record(QueryKind::GlobalUpdate);
        l.record(QueryKind::Initialization);
        assert_eq!(
            l.to_csv(),
            "category,count\ninitialization,1\nextension-evaluation,0\nglobal-update,2\npolicy-evaluation,0\n"
        );
        assert_eq!(l.total(), 3);
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax_tol(&[0.2, 0.5, 0.5], 0.0), 1);
        assert_eq!(argmax_tol(&[0.5, 0.5 + 1e-15], 1e-12), 0);
        assert_eq!(argmax_tol(&[0.1, 0.9], 1e-12), 1);
    }
}
