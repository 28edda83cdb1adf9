//! Stochastic decision trees, one per decision node.
//!
//! Trees are persistent: extending a leaf rebuilds only the path to it and shares every
//! other subtree, so earlier versions stay valid.

pub mod file;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::inference::{argmax_tol, CompiledNetwork, MevResult, QueryKind, ValueBounds, TIE_TOLERANCE};
use crate::model::{Context, VarId};

/// `m_i` proportional to the value-normalized EVs; uniform when they are all zero.
pub fn membership_weights(action_evs: &[f64], bounds: ValueBounds) -> Vec<f64> {
    let u: Vec<f64> = action_evs.iter().map(|&v| bounds.normalize(v)).collect();
    let total: f64 = u.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / u.len() as f64; u.len()];
    }
    u.iter().map(|x| x / total).collect()
}

/// `p * r + (1 - p) * m`.
pub fn action_distribution(r: &[f64], m: &[f64], p: f64) -> Vec<f64> {
    r.iter().zip(m).map(|(ri, mi)| p * ri + (1.0 - p) * mi).collect()
}

pub fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    r[i] = 1.0;
    r
}

/// Index of the best action under the global tie-break, judged on the `[0, 1]` scale.
pub fn best_action(action_evs: &[f64], bounds: ValueBounds) -> usize {
    let u: Vec<f64> = action_evs.iter().map(|&v| bounds.normalize(v)).collect();
    argmax_tol(&u, TIE_TOLERANCE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeafData {
    /// Unique within a [`Policy`]; used to recognise stale queue entries.
    pub id: u64,
    pub context: Context,
    /// Expected value of each action in this context, original units.
    pub action_evs: Vec<f64>,
    /// MEV action (the 1 in `r`).
    pub best: usize,
    pub m: Vec<f64>,
    pub p: f64,
    pub dist: Vec<f64>,
    /// `P(context)` under the installed policy.
    pub prob: f64,
    pub reachable: bool,
    /// The action label was not computed in this leaf's own context.
    pub default: bool,
}

impl LeafData {
    pub fn evaluated(id: u64, context: Context, action_evs: Vec<f64>, bounds: ValueBounds, p: f64, prob: f64) -> Self {
        let best = best_action(&action_evs, bounds);
        let m = membership_weights(&action_evs, bounds);
        let dist = action_distribution(&one_hot(action_evs.len(), best), &m, p);
        LeafData {
            id,
            context,
            action_evs,
            best,
            m,
            p,
            dist,
            prob,
            reachable: true,
            default: false,
        }
    }

    pub fn from_mev(id: u64, context: Context, mev: MevResult, bounds: ValueBounds, p: f64, prob: f64) -> Self {
        let mut leaf = Self::evaluated(id, context, mev.evs, bounds, p, prob);
        leaf.best = mev.action;
        leaf.dist = action_distribution(&leaf.r(), &leaf.m, p);
        leaf
    }

    /// A frozen leaf for a zero-probability context; it keeps `label`'s action values.
    pub fn unreachable(id: u64, context: Context, label: &LeafData) -> Self {
        let n = label.action_evs.len();
        LeafData {
            id,
            context,
            action_evs: label.action_evs.clone(),
            best: label.best,
            m: vec![1.0 / n as f64; n],
            p: label.p,
            dist: vec![1.0 / n as f64; n],
            prob: 0.0,
            reachable: false,
            default: true,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.action_evs.len()
    }

    pub fn r(&self) -> Vec<f64> {
        one_hot(self.num_actions(), self.best)
    }

    /// Same leaf marked unreachable: uniform and frozen.
    pub fn frozen(&self) -> Self {
        let n = self.num_actions();
        LeafData {
            m: vec![1.0 / n as f64; n],
            dist: vec![1.0 / n as f64; n],
            prob: 0.0,
            reachable: false,
            default: true,
            ..self.clone()
        }
    }

    /// Same leaf with commitment `p` (unreachable leaves stay uniform).
    pub fn with_p(&self, p: f64) -> Self {
        let mut out = self.clone();
        out.p = p;
        if out.reachable {
            out.dist = action_distribution(&out.r(), &out.m, p);
        }
        out
    }

    /// Deterministic version: `p = 1`, so the distribution is `r`.
    pub fn committed(&self) -> Self {
        LeafData {
            p: 1.0,
            dist: self.r(),
            ..self.clone()
        }
    }

    /// Expected value of this leaf's committed action.
    pub fn best_ev(&self) -> f64 {
        self.action_evs[self.best]
    }

    /// Normalized EV of the runner-up action (equal to the best when tied).
    pub fn runner_up(&self, bounds: ValueBounds) -> f64 {
        let mut u: Vec<f64> = self.action_evs.iter().map(|&v| bounds.normalize(v)).collect();
        if u.len() < 2 {
            return u.first().copied().unwrap_or(0.0);
        }
        u.remove(self.best);
        u.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecisionTree {
    Leaf(Arc<LeafData>),
    Internal {
        var: VarId,
        children: Vec<Arc<DecisionTree>>,
        /// Cached `P(var = x | path context)` per outcome.
        branch_probs: Vec<f64>,
    },
}

impl DecisionTree {
    pub fn leaf(data: LeafData) -> Self {
        DecisionTree::Leaf(Arc::new(data))
    }

    /// Leaves in depth-first order, outcomes ascending.
    pub fn leaves(&self) -> Vec<&Arc<LeafData>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Arc<LeafData>>) {
        match self {
            DecisionTree::Leaf(l) => out.push(l),
            DecisionTree::Internal { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn num_internal(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Internal { children, .. } => 1 + children.iter().map(|c| c.num_internal()).sum::<usize>(),
        }
    }

    /// Split variables used anywhere in the tree, ascending and deduplicated.
    pub fn split_vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.collect_splits(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_splits(&self, out: &mut Vec<VarId>) {
        if let DecisionTree::Internal { var, children, .. } = self {
            out.push(*var);
            for c in children {
                c.collect_splits(out);
            }
        }
    }

    /// The leaf covering a full assignment of the split variables.
    pub fn lookup(&self, value_of: &dyn Fn(VarId) -> usize) -> &LeafData {
        match self {
            DecisionTree::Leaf(l) => l,
            DecisionTree::Internal { var, children, .. } => children[value_of(*var)].lookup(value_of),
        }
    }

    pub fn find_leaf(&self, id: u64) -> Option<&Arc<LeafData>> {
        match self {
            DecisionTree::Leaf(l) => (l.id == id).then_some(l),
            DecisionTree::Internal { children, .. } => children.iter().find_map(|c| c.find_leaf(id)),
        }
    }

    /// New tree with leaf `id` replaced by `subtree`; other subtrees are shared.
    pub fn replace_leaf(&self, id: u64, subtree: DecisionTree) -> Result<DecisionTree> {
        let mut slot = Some(subtree);
        let out = self.replace_inner(id, &mut slot);
        if slot.is_some() {
            return Err(Error::NoSuchLeaf);
        }
        Ok(out)
    }

    fn replace_inner(&self, id: u64, slot: &mut Option<DecisionTree>) -> DecisionTree {
        match self {
            DecisionTree::Leaf(l) if l.id == id => slot.take().unwrap_or_else(|| self.clone()),
            DecisionTree::Leaf(_) => self.clone(),
            DecisionTree::Internal {
                var,
                children,
                branch_probs,
            } => {
                let mut new_children = Vec::with_capacity(children.len());
                for c in children {
                    if slot.is_some() && c.find_leaf(id).is_some() {
                        new_children.push(Arc::new(c.replace_inner(id, slot)));
                    } else {
                        new_children.push(Arc::clone(c));
                    }
                }
                DecisionTree::Internal {
                    var: *var,
                    children: new_children,
                    branch_probs: branch_probs.clone(),
                }
            }
        }
    }

    /// Applies `f` to every leaf, rebuilding the tree.
    pub fn map_leaves(&self, f: &mut dyn FnMut(&LeafData) -> LeafData) -> DecisionTree {
        match self {
            DecisionTree::Leaf(l) => DecisionTree::leaf(f(l)),
            DecisionTree::Internal {
                var,
                children,
                branch_probs,
            } => DecisionTree::Internal {
                var: *var,
                children: children.iter().map(|c| Arc::new(c.map_leaves(f))).collect(),
                branch_probs: branch_probs.clone(),
            },
        }
    }
}

/// Variables of `info` not bound in the leaf's context (`ξ`), in information order.
pub fn possible_extensions(leaf: &LeafData, info: &[VarId]) -> Vec<VarId> {
    info.iter().copied().filter(|&v| !leaf.context.contains(v)).collect()
}

pub fn extensible(leaf: &LeafData, info: &[VarId]) -> bool {
    leaf.reachable && info.iter().any(|&v| !leaf.context.contains(v))
}

/// Replaces leaf `leaf_id` by a split on `var`, one new leaf per outcome.
pub fn extend_leaf(
    tree: &DecisionTree,
    leaf_id: u64,
    var: VarId,
    branches: Vec<(LeafData, f64)>,
) -> Result<DecisionTree> {
    let leaf = tree.find_leaf(leaf_id).ok_or(Error::NoSuchLeaf)?;
    if leaf.context.contains(var) {
        return Err(Error::AlreadyBound(var.to_string()));
    }
    let (children, branch_probs) = branches
        .into_iter()
        .map(|(l, p)| (Arc::new(DecisionTree::leaf(l)), p))
        .unzip();
    tree.replace_leaf(
        leaf_id,
        DecisionTree::Internal {
            var,
            children,
            branch_probs,
        },
    )
}

/// Anything that yields an action distribution for a decision given an assignment.
pub trait DecisionRule {
    fn distribution(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    trees: Vec<DecisionTree>,
    decisions: Vec<VarId>,
    info: Vec<Vec<VarId>>,
    cards: Vec<usize>,
    next_leaf: u64,
}

impl Policy {
    /// A policy shaped for `net` with every tree a single placeholder leaf.
    fn skeleton(net: &CompiledNetwork) -> Self {
        let n = net.decisions().len();
        Policy {
            trees: Vec::with_capacity(n),
            decisions: net.decisions().to_vec(),
            info: (0..n).map(|k| net.info(k).to_vec()).collect(),
            cards: net.cards().to_vec(),
            next_leaf: 0,
        }
    }

    /// Wraps existing trees; `next_leaf` must exceed every leaf id in them.
    pub fn from_trees(net: &CompiledNetwork, trees: Vec<DecisionTree>, next_leaf: u64) -> Self {
        let mut p = Policy::skeleton(net);
        p.trees = trees;
        p.next_leaf = next_leaf;
        p
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn tree(&self, k: usize) -> &DecisionTree {
        &self.trees[k]
    }

    pub fn set_tree(&mut self, k: usize, tree: DecisionTree) {
        self.trees[k] = tree;
    }

    pub fn decisions(&self) -> &[VarId] {
        &self.decisions
    }

    pub fn info(&self, k: usize) -> &[VarId] {
        &self.info[k]
    }

    pub fn card(&self, var: VarId) -> usize {
        self.cards[var]
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn fresh_leaf_id(&mut self) -> u64 {
        let id = self.next_leaf;
        self.next_leaf += 1;
        id
    }

    pub fn num_internal(&self) -> usize {
        self.trees.iter().map(|t| t.num_internal()).sum()
    }

    /// `(leaf, action distribution)` for a full information state of decision `k`.
    pub fn lookup(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> (&LeafData, &[f64]) {
        let leaf = self.trees[k].lookup(value_of);
        (leaf, &leaf.dist)
    }

    /// Full table over `info(k)` then the decision.
    pub fn tree_to_cpt(&self, k: usize) -> Vec<f64> {
        let info = &self.info[k];
        let cards: Vec<usize> = info.iter().map(|&v| self.cards[v]).collect();
        table_from_tree(&self.trees[k], info, &cards)
    }

    /// Compact CPT over the tree's split variables only (in information order) then the
    /// decision; equivalent to [`Self::tree_to_cpt`] since the rows do not depend on the
    /// other predecessors.
    pub fn to_factor(&self, k: usize) -> Factor {
        let splits = self.trees[k].split_vars();
        let scope_vars: Vec<VarId> = self.info[k].iter().copied().filter(|v| splits.contains(v)).collect();
        let cards: Vec<usize> = scope_vars.iter().map(|&v| self.cards[v]).collect();
        let values = table_from_tree(&self.trees[k], &scope_vars, &cards);
        let d = self.decisions[k];
        let mut scope = scope_vars;
        scope.push(d);
        let mut fcards = cards;
        fcards.push(self.cards[d]);
        Factor::new(scope, fcards, values).expect("tree rows are distributions")
    }

    /// Installs decision `k`'s tree into the network. Not a query.
    pub fn install(&self, net: &mut CompiledNetwork, k: usize) -> Result<()> {
        net.install_decision_factor(k, self.to_factor(k))
    }

    pub fn install_all(&self, net: &mut CompiledNetwork) -> Result<()> {
        (0..self.trees.len()).try_for_each(|k| self.install(net, k))
    }

    /// Every leaf with `p = 1`.
    pub fn committed(&self) -> Policy {
        let mut out = self.clone();
        for t in &mut out.trees {
            *t = t.map_leaves(&mut |l| l.committed());
        }
        out
    }
}

impl DecisionRule for Policy {
    fn distribution(&self, k: usize, value_of: &dyn Fn(VarId) -> usize) -> Vec<f64> {
        self.trees[k].lookup(value_of).dist.clone()
    }
}

fn table_from_tree(tree: &DecisionTree, vars: &[VarId], cards: &[usize]) -> Vec<f64> {
    let rows: usize = cards.iter().product();
    let mut out = Vec::new();
    let mut assign = vec![0usize; vars.len()];
    for _ in 0..rows {
        let value_of = |v: VarId| assign[vars.iter().position(|&u| u == v).expect("split var in scope")];
        out.extend_from_slice(&tree.lookup(&value_of).dist);
        for j in (0..vars.len()).rev() {
            assign[j] += 1;
            if assign[j] < cards[j] {
                break;
            }
            assign[j] = 0;
        }
    }
    out
}

/// Single-leaf trees from the MEV action in the empty context, D_n down to D_1, each
/// installed as soon as it is computed. Three queries per decision.
pub fn init_policy(net: &mut CompiledNetwork, p: f64) -> Result<Policy> {
    let mut policy = Policy::skeleton(net);
    let n = net.decisions().len();
    let mut trees: Vec<Option<DecisionTree>> = vec![None; n];
    net.set_category(QueryKind::Initialization);
    let bounds = net.bounds();
    for k in (0..n).rev() {
        let mev = net.mev_action(k, &Context::new())?;
        let id = policy.fresh_leaf_id();
        let leaf = LeafData::from_mev(id, Context::new(), mev, bounds, p, 1.0);
        let d = net.decision_var(k)?;
        let factor = Factor::new(vec![d], vec![net.card(d)], leaf.dist.clone())?;
        net.install_decision_factor(k, factor)?;
        trees[k] = Some(DecisionTree::leaf(leaf));
    }
    policy.trees = trees
        .into_iter()
        .map(|t| t.expect("every decision initialised"))
        .collect();
    Ok(policy)
}

/// Sets `p = 1` everywhere, reinstalls, and returns the deterministic policy with its EV
/// (one policy-evaluation query).
pub fn finalize_policy(policy: &Policy, net: &mut CompiledNetwork) -> Result<(Policy, f64)> {
    let out = policy.committed();
    out.install_all(net)?;
    net.set_category(QueryKind::PolicyEvaluation);
    let ev = net.expected_value(&Context::new())?;
    Ok((out, ev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagramBuilder, Variable};

    const B01: ValueBounds = ValueBounds { min: 0.0, max: 1.0 };

    #[test]
    fn membership_examples() {
        assert_eq!(membership_weights(&[0.8, 0.2], B01), vec![0.8, 0.2]);
        assert_eq!(membership_weights(&[0.0, 0.0], B01), vec![0.5, 0.5]);
        let m = membership_weights(&[0.5, 0.3, 0.2], B01);
        assert!(m.iter().zip([0.5, 0.3, 0.2]).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn mixing_examples() {
        let r = [1.0, 0.0];
        let m = [0.6, 0.4];
        assert_eq!(action_distribution(&r, &m, 1.0), vec![1.0, 0.0]);
        assert_eq!(action_distribution(&r, &m, 0.0), vec![0.6, 0.4]);
        let d = action_distribution(&r, &m, 0.5);
        assert!((d[0] - 0.8).abs() < 1e-15 && (d[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn leaf_reconstruction_and_runner_up() {
        let l = LeafData::evaluated(0, Context::new(), vec![0.9, 0.8, 0.1], B01, 0.3, 1.0);
        assert_eq!(l.best, 0);
        let expect = action_distribution(&l.r(), &l.m, 0.3);
        assert_eq!(l.dist, expect);
        assert!((l.dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((l.runner_up(B01) - 0.8).abs() < 1e-15);
        let tie = LeafData::evaluated(1, Context::new(), vec![0.6, 0.6], B01, 0.0, 1.0);
        assert_eq!(tie.best, 0);
        assert!((tie.runner_up(B01) - 0.6).abs() < 1e-15);
    }

    fn leaf(id: u64, ctx: &[(VarId, usize)], best: usize) -> LeafData {
        let mut evs = vec![0.0; 2];
        evs[best] = 1.0;
        LeafData::evaluated(id, Context::from_pairs(ctx.iter().copied()), evs, B01, 1.0, 0.5)
    }

    fn depth_two() -> DecisionTree {
        let t = DecisionTree::leaf(leaf(0, &[], 0));
        let t = extend_leaf(
            &t,
            0,
            3,
            vec![(leaf(1, &[(3, 0)], 0), 0.5), (leaf(2, &[(3, 1)], 1), 0.5)],
        )
        .unwrap();
        extend_leaf(
            &t,
            2,
            5,
            vec![
                (leaf(3, &[(3, 1), (5, 0)], 1), 0.5),
                (leaf(4, &[(3, 1), (5, 1)], 0), 0.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn lookup_partitions_information_states() {
        let t = depth_two();
        assert_eq!(t.leaves().len(), 3);
        for x3 in 0..2 {
            for x5 in 0..2 {
                let w = move |v: VarId| if v == 3 { x3 } else { x5 };
                let covering: Vec<_> = t.leaves().into_iter().filter(|l| l.context.covers(w)).collect();
                assert_eq!(covering.len(), 1);
                assert_eq!(t.lookup(&w).id, covering[0].id);
            }
        }
    }

    #[test]
    fn extension_is_persistent_and_rejects_rebinding() {
        let t = DecisionTree::leaf(leaf(0, &[], 0));
        let t2 = extend_leaf(
            &t,
            0,
            3,
            vec![(leaf(1, &[(3, 0)], 0), 0.4), (leaf(2, &[(3, 1)], 1), 0.6)],
        )
        .unwrap();
        assert_eq!(t.leaves().len(), 1);
        assert_eq!(t2.leaves().len(), 2);
        let err = extend_leaf(&t2, 1, 3, vec![]).unwrap_err();
        assert!(matches!(err, Error::AlreadyBound(_)));
        assert!(matches!(extend_leaf(&t2, 0, 4, vec![]).unwrap_err(), Error::NoSuchLeaf));
    }

    #[test]
    fn extensibility() {
        let info = [1, 2, 3, 4];
        let l = leaf(0, &[(1, 0), (3, 1)], 0);
        assert_eq!(possible_extensions(&l, &info), vec![2, 4]);
        assert!(extensible(&l, &info));
        assert!(!extensible(&leaf(1, &[(1, 0), (2, 0), (3, 0), (4, 0)], 0), &info));
        assert!(!extensible(&l.frozen(), &info));
    }

    fn car_buyer_like() -> (crate::model::InfluenceDiagram, VarId, VarId) {
        // First test result feeds the second-test decision and the purchase.
        let mut b = DiagramBuilder::new("buyer");
        let c = b.chance(Variable::new("Condition", ["peach", "lemon"]), &[], vec![0.8, 0.2]);
        let r1 = b.chance(
            Variable::new("FirstTest", ["no_defect", "one_defect"]),
            &[c],
            vec![0.9, 0.1, 0.4, 0.6],
        );
        let t2 = b.decision(Variable::new("SecondTest", ["test", "no_test"]), &[r1]);
        let buy = b.decision(Variable::new("Purchase", ["buy", "dont"]), &[r1, t2]);
        b.value("U", &[c, buy], vec![60.0, 0.0, -100.0, 0.0]);
        (b.build(), r1, t2)
    }

    #[test]
    fn figure_two_shaped_lookup() {
        let (d, r1, t2) = car_buyer_like();
        let net = CompiledNetwork::compile(&d).unwrap();
        let mut policy = Policy::skeleton(&net);
        let b = ValueBounds { min: -100.0, max: 60.0 };
        let mk = |id, ctx: Context, best: usize| {
            let mut evs = vec![0.0, 0.0];
            evs[best] = 10.0;
            LeafData::evaluated(id, ctx, evs, b, 1.0, 0.5)
        };
        policy.trees.push(DecisionTree::leaf(mk(0, Context::new(), 0)));
        let root = DecisionTree::leaf(mk(1, Context::new(), 0));
        let t = extend_leaf(
            &root,
            1,
            r1,
            vec![
                (mk(2, Context::from_pairs([(r1, 0)]), 0), 0.8),
                (mk(3, Context::from_pairs([(r1, 1)]), 1), 0.2),
            ],
        )
        .unwrap();
        let t = extend_leaf(
            &t,
            3,
            t2,
            vec![
                (mk(4, Context::from_pairs([(r1, 1), (t2, 0)]), 0), 0.5),
                (mk(5, Context::from_pairs([(r1, 1), (t2, 1)]), 1), 0.5),
            ],
        )
        .unwrap();
        policy.trees.push(t);
        let w = |v: VarId| if v == r1 { 1 } else { 0 };
        let (leaf, dist) = policy.lookup(1, &w);
        assert_eq!(leaf.best, 0, "one defect, second test taken: buy");
        assert_eq!(dist, &[1.0, 0.0]);
    }

    #[test]
    fn cpt_and_factor_agree() {
        let (d, _, _) = car_buyer_like();
        let mut net = CompiledNetwork::compile(&d).unwrap();
        let mut policy = init_policy(&mut net, 0.0).unwrap();
        assert_eq!(net.query_count(), 6);
        assert_eq!(policy.tree_to_cpt(1).len(), 8);
        let single = policy.tree(1).leaves()[0].dist.clone();
        for row in policy.tree_to_cpt(1).chunks(2) {
            assert_eq!(row, &single[..]);
        }
        let t = depth_two_on(&mut policy, 1);
        policy.set_tree(1, t);
        let full = policy.tree_to_cpt(1);
        let f = policy.to_factor(1);
        let info = policy.info(1).to_vec();
        for row in 0..4 {
            let w = crate::model::InformationState::from_index(&info, &[2, 2], row);
            let value_of = |v: VarId| w.get(v).unwrap_or(0);
            for a in 0..2 {
                let fv = f.value_at(|v| if v == policy.decisions()[1] { a } else { value_of(v) });
                assert_eq!(fv, full[row * 2 + a]);
            }
        }
    }

    fn depth_two_on(policy: &mut Policy, k: usize) -> DecisionTree {
        let info = policy.info(k).to_vec();
        let root_id = policy.tree(k).leaves()[0].id;
        let a = policy.fresh_leaf_id();
        let b = policy.fresh_leaf_id();
        let mut l0 = leaf(a, &[(info[0], 0)], 0);
        l0.dist = vec![0.25, 0.75];
        extend_leaf(
            policy.tree(k),
            root_id,
            info[0],
            vec![(l0, 0.5), (leaf(b, &[(info[0], 1)], 1), 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn finalize_is_idempotent() {
        let (d, _, _) = car_buyer_like();
        let mut net = CompiledNetwork::compile(&d).unwrap();
        let policy = init_policy(&mut net, 0.0).unwrap();
        let (fin, ev) = finalize_policy(&policy, &mut net).unwrap();
        let (again, ev2) = finalize_policy(&fin, &mut net).unwrap();
        assert_eq!(fin, again);
        assert_eq!(ev, ev2);
        for t in fin.trees() {
            for l in t.leaves() {
                assert_eq!(l.dist, l.r());
            }
        }
    }
}
