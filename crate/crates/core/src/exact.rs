//! Brute-force oracles: the full joint table, exhaustive backward induction and exact
//! policy evaluation by enumeration. Desk scale only; every entry point checks a size
//! guard before allocating or looping.

use crate::error::{Error, Result};
use crate::inference::{argmax_tol, CompiledNetwork, Marginal, NONZERO};
use crate::model::{Context, InfluenceDiagram, InformationState, NodeKind, VarId};
use crate::policy::{one_hot, DecisionRule};

pub const DEFAULT_GUARD: u128 = 1 << 22;

fn state_space(cards: impl IntoIterator<Item = usize>) -> u128 {
    cards.into_iter().fold(1u128, |acc, c| acc.saturating_mul(c as u128))
}

fn check_guard(size: u128, limit: u128) -> Result<()> {
    if size > limit {
        Err(Error::GuardExceeded { size, limit })
    } else {
        Ok(())
    }
}

/// Visits every assignment of `cards` in row-major order (last fastest).
fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut assign = vec![0usize; cards.len()];
    if cards.contains(&0) {
        return;
    }
    loop {
        f(&assign);
        let mut j = cards.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            assign[j] += 1;
            if assign[j] < cards[j] {
                break;
            }
            assign[j] = 0;
        }
    }
}

/// Normalized product of every factor of a compiled network over all its variables.
#[derive(Clone, Debug)]
pub struct JointTable {
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let mut out = Vec::with_capacity(self.probs.len());
        let mut i = 0;
        for_each_assignment(&self.cards, |a| {
            out.push((a.to_vec(), self.probs[i]));
            i += 1;
        });
        out.into_iter()
    }

    pub fn prob(&self, evidence: &Context) -> f64 {
        self.entries()
            .filter(|(a, _)| evidence.covers(|v| a[v]))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn marginal(&self, target: VarId, evidence: &Context) -> Marginal {
        let mut out = vec![0.0; self.cards[target]];
        for (a, p) in self.entries() {
            if evidence.covers(|v| a[v]) {
                out[a[target]] += p;
            }
        }
        let total: f64 = out.iter().sum();
        if total <= NONZERO {
            return Marginal::Inconsistent;
        }
        Marginal::Distribution(out.iter().map(|x| x / total).collect())
    }
}

pub fn enumerate_joint(net: &CompiledNetwork) -> Result<JointTable> {
    enumerate_joint_with_guard(net, DEFAULT_GUARD)
}

pub fn enumerate_joint_with_guard(net: &CompiledNetwork, guard: u128) -> Result<JointTable> {
    let cards = net.cards().to_vec();
    check_guard(state_space(cards.iter().copied()), guard)?;
    let mut probs = Vec::new();
    for_each_assignment(&cards, |a| {
        probs.push(net.factors().iter().map(|f| f.value_at(|v| a[v])).product::<f64>());
    });
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in &mut probs {
            *p /= total;
        }
    }
    Ok(JointTable { cards, probs })
}

/// Deterministic decision functions as full tables over each decision's predecessors.
#[derive(Clone, Debug, PartialEq)]
pub struct TablePolicy {
    info: Vec<Vec<VarId>>,
    info_cards: Vec<Vec<usize>>,
    action_cards: Vec<usize>,
    actions: Vec<Vec<usize>>,
}

impl TablePolicy {
    /// `actions[k][row]` is the action index for row `row` of decision `k`'s table.
    pub fn new(d: &InfluenceDiagram, actions: Vec<Vec<usize>>) -> Self {
        let info: Vec<Vec<VarId>> = d.decisions().iter().map(|&k| d.node(k).parents.clone()).collect();
        TablePolicy {
            info_cards: info.iter().map(|i| i.iter().map(|&v| d.card(v)).collect()).collect(),
            action_cards: d.decisions().iter().map(|&k| d.card(k)).collect(),
            info,
            actions,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn info(&self, k: usize) -> &[VarId] {
        &self.info[k]
    }

    pub fn actions(&self, k: usize) -> &[usize] {
        &self.actions[k]
    }

    /// One-hot rows, the layout expected by `install_decision_cpt`.
    pub fn cpt(&self, k: usize) -> Vec<f64> {
        self.actions[k]
            .iter()
            .flat_map(|&a| one_hot(self.action_cards[k], a))
            .collect()
    }

    pub fn tables(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.cpt(k)).collect()
    }

    fn row(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> usize {
        self.info[k]
            .iter()
            .zip(&self.info_cards[k])
            .fold(0, |acc, (&v, &c)| acc * c + value_of(v))
    }
}

impl DecisionRule for TablePolicy {
    fn distribution(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> Vec<f64> {
        one_hot(self.action_cards[k], self.actions[k][self.row(k, value_of)])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPolicyResult {
    pub policy: TablePolicy,
    pub ev: f64,
    /// Number of reachable `(information state, action)` pairs evaluated.
    pub steps: u64,
}

/// Enumerates every non-value assignment with its weight from chance CPTs and the
/// supplied decision weights, passing the assignment, weight and value.
fn enumerate_id(
    d: &InfluenceDiagram,
    guard: u128,
    decision_weight: &mut dyn FnMut(usize, &[usize]) -> f64,
    visit: &mut dyn FnMut(&[usize], f64, f64),
) -> Result<()> {
    let value_id = d.value_node().ok_or_else(|| Error::Invalid(d.validate()))?;
    let cards: Vec<usize> = (0..d.len())
        .map(|v| if v == value_id { 1 } else { d.card(v) })
        .collect();
    check_guard(state_space(cards.iter().copied()), guard)?;
    let order = d.topological_order().ok_or_else(|| Error::Invalid(d.validate()))?;
    let decision_index: Vec<Option<usize>> = (0..d.len())
        .map(|v| d.decisions().iter().position(|&k| k == v))
        .collect();
    let row_of =
        |v: VarId, a: &[usize]| -> usize { d.node(v).parents.iter().fold(0, |acc, &p| acc * d.card(p) + a[p]) };
    for_each_assignment(&cards, |a| {
        let mut w = 1.0;
        for &v in &order {
            let node = d.node(v);
            match &node.kind {
                NodeKind::Chance { cpt } => w *= cpt[row_of(v, a) * d.card(v) + a[v]],
                NodeKind::Decision => w *= decision_weight(decision_index[v].expect("decision"), a),
                NodeKind::Value { .. } => {}
            }
            if w == 0.0 {
                return;
            }
        }
        let NodeKind::Value { values } = &d.node(value_id).kind else {
            unreachable!()
        };
        visit(a, w, values[row_of(value_id, a)]);
    });
    Ok(())
}

/// Row index of decision `k`'s information state inside a full assignment.
fn info_row(d: &InfluenceDiagram, k: usize, a: &[usize]) -> usize {
    d.node(d.decisions()[k])
        .parents
        .iter()
        .fold(0, |acc, &p| acc * d.card(p) + a[p])
}

/// Expected value of a (possibly stochastic) policy given as full tables: `tables[k]`
/// holds one row per information state of decision `k` followed by the decision.
pub fn evaluate_policy_exact(d: &InfluenceDiagram, tables: &[Vec<f64>]) -> Result<f64> {
    evaluate_policy_exact_with_guard(d, tables, DEFAULT_GUARD)
}

pub fn evaluate_policy_exact_with_guard(d: &InfluenceDiagram, tables: &[Vec<f64>], guard: u128) -> Result<f64> {
    for (k, &dv) in d.decisions().iter().enumerate() {
        let rows = d.row_count(dv);
        let table = tables
            .get(k)
            .ok_or_else(|| Error::PolicyMismatch(format!("no table for decision {k}")))?;
        if table.len() != rows * d.card(dv) {
            return Err(Error::PolicyMismatch(format!(
                "table for `{}` has {} entries, expected {}",
                d.node(dv).name(),
                table.len(),
                rows * d.card(dv)
            )));
        }
    }
    let mut ev = 0.0;
    enumerate_id(
        d,
        guard,
        &mut |k, a| {
            let dv = d.decisions()[k];
            tables[k][info_row(d, k, a) * d.card(dv) + a[dv]]
        },
        &mut |_, w, v| ev += w * v,
    )?;
    Ok(ev)
}

/// Expected value of any [`DecisionRule`] by enumeration.
pub fn evaluate_rule_exact(d: &InfluenceDiagram, rule: &dyn DecisionRule) -> Result<f64> {
    let mut ev = 0.0;
    enumerate_id(
        d,
        DEFAULT_GUARD,
        &mut |k, a| {
            let dv = d.decisions()[k];
            rule.distribution(k, &|v| a[v])[a[dv]]
        },
        &mut |_, w, v| ev += w * v,
    )?;
    Ok(ev)
}

pub fn solve_dp(d: &InfluenceDiagram) -> Result<OptimalPolicyResult> {
    solve_dp_with_guard(d, DEFAULT_GUARD)
}

/// Backward induction over full information states. While solving decision `k` the
/// earlier decisions act uniformly and the later ones follow the tables already solved;
/// for diagrams with no-forgetting arcs this yields the optimal policy.
pub fn solve_dp_with_guard(d: &InfluenceDiagram, guard: u128) -> Result<OptimalPolicyResult> {
    let report = d.validate();
    if !report.is_ok() {
        return Err(Error::Invalid(report));
    }
    let n = d.decisions().len();
    let value_id = d.value_node().expect("validated");
    let NodeKind::Value { values } = &d.node(value_id).kind else {
        unreachable!()
    };
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (vmax - vmin).abs().max(1.0);

    let mut actions: Vec<Vec<usize>> = d.decisions().iter().map(|&dv| vec![0; d.row_count(dv)]).collect();
    let mut steps = 0u64;
    for k in (0..n).rev() {
        let dk = d.decisions()[k];
        let nd = d.card(dk);
        let rows = d.row_count(dk);
        check_guard(state_space([rows, nd]), guard)?;
        let mut q = vec![0.0; rows * nd];
        let mut p = vec![0.0; rows * nd];
        let solved = &actions;
        enumerate_id(
            d,
            guard,
            &mut |j, a| {
                let dv = d.decisions()[j];
                if j <= k {
                    1.0 / d.card(dv) as f64
                } else if solved[j][info_row(d, j, a)] == a[dv] {
                    1.0
                } else {
                    0.0
                }
            },
            &mut |a, w, v| {
                let i = info_row(d, k, a) * nd + a[dk];
                q[i] += w * v;
                p[i] += w;
            },
        )?;
        for row in 0..rows {
            let ps = &p[row * nd..(row + 1) * nd];
            if ps.iter().all(|&x| x <= 0.0) {
                actions[k][row] = 0;
                continue;
            }
            let evs: Vec<f64> = (0..nd)
                .map(|a| {
                    if ps[a] > 0.0 {
                        q[row * nd + a] / ps[a]
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            steps += ps.iter().filter(|&&x| x > 0.0).count() as u64;
            actions[k][row] = argmax_tol(&evs, tol);
        }
    }
    let policy = TablePolicy::new(d, actions);
    let ev = evaluate_policy_exact_with_guard(d, &policy.tables(), guard)?;
    Ok(OptimalPolicyResult { policy, ev, steps })
}

/// Labels of one row of decision `k`'s table, for reports.
pub fn describe_row(d: &InfluenceDiagram, k: usize, row: usize) -> String {
    let dv = d.decisions()[k];
    let info = &d.node(dv).parents;
    let cards: Vec<usize> = info.iter().map(|&v| d.card(v)).collect();
    let w = InformationState::from_index(info, &cards, row);
    let ctx = Context::from_pairs(info.iter().copied().zip(w.values));
    ctx.describe(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagramBuilder, Variable};

    #[test]
    fn chain_joint() {
        let mut b = DiagramBuilder::new("chain");
        let a = b.chance(Variable::new("A", ["a1", "a2"]), &[], vec![0.3, 0.7]);
        let bb = b.chance(Variable::new("B", ["b1", "b2"]), &[a], vec![0.9, 0.1, 0.2, 0.8]);
        b.value("V", &[bb], vec![1.0, 0.0]);
        let net = CompiledNetwork::compile(&b.build()).unwrap();
        let j = enumerate_joint(&net).unwrap();
        let m = j.marginal(bb, &Context::new()).distribution().unwrap();
        assert!((m[0] - 0.41).abs() < 1e-15 && (m[1] - 0.59).abs() < 1e-15);
    }

    #[test]
    fn uniform_node_with_constant_value() {
        let mut b = DiagramBuilder::new("flat");
        let x = b.chance(Variable::new("X", ["0", "1"]), &[], vec![0.5, 0.5]);
        b.value("V", &[x], vec![3.0, 3.0]);
        let net = CompiledNetwork::compile(&b.build()).unwrap();
        assert_eq!(enumerate_joint(&net).unwrap().probs(), &[0.25; 4]);
    }

    #[test]
    fn perfect_information_dp() {
        let mut b = DiagramBuilder::new("reveal");
        let s = b.chance(Variable::new("S", ["s0", "s1"]), &[], vec![0.4, 0.6]);
        let o = b.chance(Variable::new("O", ["o0", "o1"]), &[s], vec![1.0, 0.0, 0.0, 1.0]);
        let d = b.decision(Variable::new("D", ["d0", "d1"]), &[o]);
        b.value("U", &[s, d], vec![1.0, 0.0, 0.0, 1.0]);
        let id = b.build();
        let r = solve_dp(&id).unwrap();
        assert!((r.ev - 1.0).abs() < 1e-12);
        assert_eq!(r.policy.actions(0), &[0, 1]);
        assert_eq!(r.steps, 4);
    }

    #[test]
    fn useless_information_dp() {
        let mut b = DiagramBuilder::new("noise");
        let s = b.chance(Variable::new("S", ["s0", "s1"]), &[], vec![0.3, 0.7]);
        let o = b.chance(Variable::new("O", ["o0", "o1"]), &[], vec![0.5, 0.5]);
        let d = b.decision(Variable::new("D", ["d0", "d1"]), &[o]);
        b.value("U", &[s, d], vec![1.0, 0.0, 0.0, 1.0]);
        let r = solve_dp(&b.build()).unwrap();
        assert!((r.ev - 0.7).abs() < 1e-12);
        assert_eq!(r.policy.actions(0), &[1, 1]);
    }

    #[test]
    fn mixture_is_linear() {
        let mut b = DiagramBuilder::new("mix");
        let s = b.chance(Variable::new("S", ["s0", "s1"]), &[], vec![0.3, 0.7]);
        let d = b.decision(Variable::new("D", ["d0", "d1", "d2"]), &[s]);
        b.value("U", &[s, d], vec![1.0, 0.2, 0.0, 0.0, 0.5, 0.9]);
        let id = b.build();
        let det = vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let m = vec![0.2, 0.5, 0.3, 0.6, 0.1, 0.3];
        let p = 0.35;
        let mix: Vec<f64> = det.iter().zip(&m).map(|(a, b)| p * a + (1.0 - p) * b).collect();
        let e_det = evaluate_policy_exact(&id, &[det]).unwrap();
        let e_m = evaluate_policy_exact(&id, &[m]).unwrap();
        let e_mix = evaluate_policy_exact(&id, &[mix]).unwrap();
        assert!((e_mix - (p * e_det + (1.0 - p) * e_m)).abs() < 1e-12);
    }

    #[test]
    fn guard_is_explicit() {
        let mut b = DiagramBuilder::new("wide");
        let mut vars = Vec::new();
        for i in 0..24 {
            vars.push(b.chance(Variable::new(format!("X{i}"), ["0", "1"]), &[], vec![0.5, 0.5]));
        }
        b.value("V", &vars[..1], vec![0.0, 1.0]);
        let id = b.build();
        let err = evaluate_policy_exact(&id, &[]).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { size, limit } if size == 1 << 24 && limit == DEFAULT_GUARD));
        let net = CompiledNetwork::compile(&id).unwrap();
        assert!(matches!(enumerate_joint(&net), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn dp_policy_evaluates_to_its_ev() {
        let mut b = DiagramBuilder::new("two");
        let s = b.chance(Variable::new("S", ["s0", "s1"]), &[], vec![0.5, 0.5]);
        let o = b.chance(Variable::new("O", ["o0", "o1"]), &[s], vec![0.8, 0.2, 0.3, 0.7]);
        let t = b.decision(Variable::new("T", ["look", "skip"]), &[]);
        let o2 = b.chance(
            Variable::new("O2", ["a", "b", "none"]),
            &[s, t],
            vec![0.9, 0.1, 0.0, 0.0, 0.0, 1.0, 0.1, 0.9, 0.0, 0.0, 0.0, 1.0],
        );
        let d = b.decision(Variable::new("D", ["d0", "d1"]), &[o, t, o2]);
        b.value(
            "U",
            &[s, t, d],
            [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
                .iter()
                .zip([0.9, 0.9, 1.0, 1.0, 0.9, 0.9, 1.0, 1.0])
                .map(|(a, c)| a * c)
                .collect(),
        );
        let id = b.build();
        let r = solve_dp(&id).unwrap();
        let again = evaluate_rule_exact(&id, &r.policy).unwrap();
        assert!((r.ev - again).abs() < 1e-12);
        assert!(r.ev >= 0.75 - 1e-12);
    }
}
