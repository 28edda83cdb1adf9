//! The anytime refinement loop.
//!
//! Extensible leaves of every decision tree sit in one priority queue. Each step pops the
//! best-scored leaf, splits it on an information variable chosen by the extension
//! strategy, refreshes branch probabilities downstream of the refined decision, sweeps
//! expected values backwards over all trees, and records the exact value of the current
//! stochastic policy.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{
    CompiledNetwork, EliminationOrder, Marginal, QueryKind, QueryLedger, Reevaluation, ValueBounds, NONZERO,
};
use crate::model::{Context, InfluenceDiagram, VarId};
use crate::policy::{extend_leaf, extensible, init_policy, possible_extensions, DecisionTree, LeafData, Policy};

pub const DEFAULT_C: f64 = 10.0;

/// Greedy accepts the first split whose predicted value beats the leaf by more than this.
pub const GREEDY_MARGIN: f64 = 1e-9;

/// EV changes at or below this do not trigger rescoring.
const CHANGE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Heuristic {
    #[default]
    SecondBest,
    HighestProbability,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    Maximal,
    Greedy,
    Random,
}

impl Heuristic {
    pub fn label(self) -> &'static str {
        match self {
            Heuristic::SecondBest => "second-best",
            Heuristic::HighestProbability => "highest-probability",
            Heuristic::Random => "random",
        }
    }
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Maximal => "maximal",
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "second-best" => Ok(Heuristic::SecondBest),
            "highest-probability" => Ok(Heuristic::HighestProbability),
            "random" => Ok(Heuristic::Random),
            _ => Err(Error::Config(format!("unknown heuristic `{s}`"))),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximal" => Ok(Strategy::Maximal),
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Budget {
    pub max_extensions: Option<usize>,
    pub max_queries: Option<u64>,
    pub max_time: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementConfig {
    pub heuristic: Heuristic,
    pub strategy: Strategy,
    /// Commitment schedule constant: `p = N / (N + c)`.
    pub c: f64,
    pub seed: u64,
    pub budget: Budget,
    /// Multiply the second-best score by the leaf's context probability.
    pub weight_by_probability: bool,
    /// Record wall-clock milliseconds in the profile (otherwise 0, for reproducible output).
    pub record_time: bool,
    pub elimination_order: EliminationOrder,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            heuristic: Heuristic::default(),
            strategy: Strategy::default(),
            c: DEFAULT_C,
            seed: 0,
            budget: Budget::default(),
            weight_by_probability: false,
            record_time: false,
            elimination_order: EliminationOrder::default(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "schedule constant c must be positive, got {}",
                self.c
            )));
        }
        Ok(())
    }

    /// `key=value` lines describing the configuration.
    pub fn describe(&self) -> Vec<String> {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        vec![
            format!("heuristic={}", self.heuristic),
            format!("strategy={}", self.strategy),
            format!("c={}", self.c),
            format!("seed={}", self.seed),
            format!("weight_by_probability={}", self.weight_by_probability),
            format!(
                "max_extensions={}",
                opt(self.budget.max_extensions.map(|x| x.to_string()))
            ),
            format!("max_queries={}", opt(self.budget.max_queries.map(|x| x.to_string()))),
            format!(
                "max_seconds={}",
                opt(self.budget.max_time.map(|x| x.as_secs_f64().to_string()))
            ),
        ]
    }
}

/// `N / (N + c)`.
pub fn commitment(n: usize, c: f64) -> f64 {
    n as f64 / (n as f64 + c)
}

/// Queue priority for an extensible leaf. Uses only values cached at the leaf.
pub fn heuristic_score(
    kind: Heuristic,
    leaf: &LeafData,
    bounds: ValueBounds,
    weight_by_probability: bool,
    rng: &mut impl Rng,
) -> f64 {
    match kind {
        Heuristic::SecondBest => {
            let s = leaf.runner_up(bounds);
            if weight_by_probability {
                s * leaf.prob
            } else {
                s
            }
        }
        Heuristic::HighestProbability => leaf.prob,
        Heuristic::Random => rng.gen::<f64>(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePoint {
    pub n: usize,
    pub queries: u64,
    pub ev: f64,
    pub ev_normalized: f64,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Profile {
    pub header: Vec<String>,
    pub points: Vec<ProfilePoint>,
    pub final_ev: Option<f64>,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for h in &self.header {
            out.push_str(&format!("# {h}\n"));
        }
        out.push_str("N,queries,ev,ev_normalized,wall_ms\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.n, p.queries, p.ev, p.ev_normalized, p.wall_ms
            ));
        }
        if let Some(ev) = self.final_ev {
            out.push_str(&format!("# final_ev={ev}\n"));
        }
        out
    }

    pub fn last(&self) -> Option<&ProfilePoint> {
        self.points.last()
    }
}

/// A chosen split with the leaves it would create.
#[derive(Clone, Debug, PartialEq)]
pub struct Extension {
    pub var: VarId,
    /// One `(leaf, P(x | context))` per outcome; leaf ids are placeholders until applied.
    pub branches: Vec<(LeafData, f64)>,
    /// `sum_x P(x | context) * u(d*_x | context, x)`.
    pub predicted: f64,
}

impl Extension {
    /// Predicted value minus the leaf's committed value.
    pub fn gain(&self, leaf: &LeafData) -> f64 {
        self.predicted - leaf.best_ev()
    }
}

/// Evaluates splitting `leaf` of decision `k` on `var`: one query for `P(var | context)`
/// and an MEV computation for every outcome with positive probability.
pub fn evaluate_split(net: &mut CompiledNetwork, k: usize, leaf: &LeafData, var: VarId, p: f64) -> Result<Extension> {
    let bounds = net.bounds();
    let card = net.card(var);
    let probs = match net.query_marginal(var, &leaf.context)? {
        Marginal::Distribution(ps) => ps,
        Marginal::Inconsistent => vec![0.0; card],
    };
    let mut branches = Vec::with_capacity(card);
    let mut predicted = 0.0;
    for (x, &px) in probs.iter().enumerate() {
        let ctx = leaf.context.with(var, x);
        if px <= NONZERO {
            branches.push((LeafData::unreachable(0, ctx, leaf), 0.0));
            continue;
        }
        let evs = match net.mev_action(k, &ctx) {
            Ok(mev) => {
                let l = LeafData::from_mev(0, ctx, mev, bounds, p, leaf.prob * px);
                predicted += px * l.best_ev();
                branches.push((l, px));
                continue;
            }
            // Reachable, but the value can only be at its minimum here.
            Err(Error::InconsistentContext) => vec![bounds.min; leaf.num_actions()],
            Err(e) => return Err(e),
        };
        let l = LeafData::evaluated(0, ctx, evs, bounds, p, leaf.prob * px);
        predicted += px * l.best_ev();
        branches.push((l, px));
    }
    Ok(Extension {
        var,
        branches,
        predicted,
    })
}

/// Picks the split for an extensible leaf according to `strategy`.
pub fn select_extension(
    strategy: Strategy,
    net: &mut CompiledNetwork,
    k: usize,
    leaf: &LeafData,
    p: f64,
    rng: &mut impl Rng,
) -> Result<Extension> {
    let xi = possible_extensions(leaf, net.info(k));
    if xi.is_empty() {
        return Err(Error::Config("leaf has no possible extensions".into()));
    }
    match strategy {
        Strategy::Random => {
            let var = xi[rng.gen_range(0..xi.len())];
            evaluate_split(net, k, leaf, var, p)
        }
        Strategy::Maximal | Strategy::Greedy => {
            let mut best: Option<Extension> = None;
            for var in xi {
                let ext = evaluate_split(net, k, leaf, var, p)?;
                if strategy == Strategy::Greedy && ext.gain(leaf) > GREEDY_MARGIN {
                    return Ok(ext);
                }
                if best
                    .as_ref()
                    .is_none_or(|b| ext.predicted > b.predicted + CHANGE_TOLERANCE)
                {
                    best = Some(ext);
                }
            }
            Ok(best.expect("nonempty extension set"))
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    score: f64,
    seq: u64,
    k: usize,
    leaf: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max score first; equal scores pop in insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Extended,
    /// No extensible leaf remains.
    Complete,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct RefinementResult {
    /// Deterministic (p = 1) policy after the final backward sweep.
    pub policy: Policy,
    /// Stochastic policy as it stood when the loop stopped.
    pub stochastic: Policy,
    pub profile: Profile,
    pub ledger: QueryLedger,
    pub final_ev: f64,
    pub extensions: usize,
}

/// Leaves whose values changed during a sweep, by decision.
type Changed = Vec<(usize, u64)>;

pub struct Refiner {
    net: CompiledNetwork,
    policy: Policy,
    config: RefinementConfig,
    queue: BinaryHeap<Candidate>,
    /// Sequence number of each leaf's live queue entry.
    live: HashMap<(usize, u64), u64>,
    seq: u64,
    n: usize,
    profile: Profile,
    rng: ChaCha8Rng,
    start: Instant,
}

impl Refiner {
    /// Compiles the diagram, builds the initial policy and records the first profile point.
    pub fn new(d: &InfluenceDiagram, config: RefinementConfig) -> Result<Self> {
        config.validate()?;
        let mut net = CompiledNetwork::compile(d)?;
        net.set_elimination_order(config.elimination_order);
        let start = Instant::now();
        let policy = init_policy(&mut net, commitment(0, config.c))?;
        let mut r = Refiner {
            net,
            policy,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            profile: Profile {
                header: config.describe(),
                ..Profile::default()
            },
            config,
            queue: BinaryHeap::new(),
            live: HashMap::new(),
            seq: 0,
            n: 0,
            start,
        };
        r.record_point()?;
        for k in 0..r.policy.len() {
            let ids: Vec<u64> = r.policy.tree(k).leaves().iter().map(|l| l.id).collect();
            for id in ids {
                r.enqueue(k, id);
            }
        }
        Ok(r)
    }

    pub fn network(&self) -> &CompiledNetwork {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut CompiledNetwork {
        &mut self.net
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn extensions(&self) -> usize {
        self.n
    }

    pub fn queue_len(&self) -> usize {
        self.live.len()
    }

    fn enqueue(&mut self, k: usize, leaf_id: u64) {
        let Some(leaf) = self.policy.tree(k).find_leaf(leaf_id).cloned() else {
            return;
        };
        if !extensible(&leaf, self.policy.info(k)) {
            self.live.remove(&(k, leaf_id));
            return;
        }
        let score = heuristic_score(
            self.config.heuristic,
            &leaf,
            self.net.bounds(),
            self.config.weight_by_probability,
            &mut self.rng,
        );
        self.seq += 1;
        self.live.insert((k, leaf_id), self.seq);
        self.queue.push(Candidate {
            score,
            seq: self.seq,
            k,
            leaf: leaf_id,
        });
    }

    fn budget_exhausted(&self) -> bool {
        let b = &self.config.budget;
        b.max_extensions.is_some_and(|m| self.n >= m)
            || b.max_queries.is_some_and(|m| self.net.query_count() >= m)
            || b.max_time.is_some_and(|m| self.start.elapsed() >= m)
    }

    /// Exact value of the installed stochastic policy. One query.
    pub fn policy_value(&mut self) -> Result<f64> {
        policy_value(&mut self.net)
    }

    fn record_point(&mut self) -> Result<()> {
        let ev = self.policy_value()?;
        let wall_ms = if self.config.record_time {
            self.start.elapsed().as_millis()
        } else {
            0
        };
        self.profile.points.push(ProfilePoint {
            n: self.n,
            queries: self.net.query_count(),
            ev,
            ev_normalized: self.net.bounds().normalize(ev),
            wall_ms,
        });
        Ok(())
    }

    /// One iteration of the loop: pop, extend, update, rescore, record.
    pub fn step(&mut self) -> Result<StepOutcome> {
        loop {
            if self.budget_exhausted() {
                return Ok(StepOutcome::BudgetExhausted);
            }
            let Some(c) = self.queue.pop() else {
                if self.refresh_all()? {
                    continue;
                }
                return Ok(StepOutcome::Complete);
            };
            if self.live.get(&(c.k, c.leaf)) != Some(&c.seq) {
                continue;
            }
            self.live.remove(&(c.k, c.leaf));
            let Some(leaf) = self.policy.tree(c.k).find_leaf(c.leaf).cloned() else {
                continue;
            };
            if !extensible(&leaf, self.policy.info(c.k)) {
                continue;
            }
            self.extend(c.k, &leaf)?;
            return Ok(StepOutcome::Extended);
        }
    }

    fn extend(&mut self, k: usize, leaf: &LeafData) -> Result<()> {
        self.net.set_category(QueryKind::ExtensionEvaluation);
        let p = commitment(self.n, self.config.c);
        let ext = select_extension(self.config.strategy, &mut self.net, k, leaf, p, &mut self.rng)?;
        let mut branches = ext.branches;
        let mut new_ids = Vec::with_capacity(branches.len());
        for (l, _) in &mut branches {
            l.id = self.policy.fresh_leaf_id();
            new_ids.push(l.id);
        }
        let tree = extend_leaf(self.policy.tree(k), leaf.id, ext.var, branches)?;
        self.policy.set_tree(k, tree);
        self.n += 1;
        self.policy.install(&mut self.net, k)?;

        let mut changed = self.update_observation_probs(k + 1)?;
        changed.extend(self.update_expected_values()?);
        for id in new_ids {
            changed.push((k, id));
        }
        self.rescore(changed);
        self.record_point()
    }

    fn rescore(&mut self, mut changed: Changed) {
        changed.sort_unstable();
        changed.dedup();
        for (k, id) in changed {
            self.enqueue(k, id);
        }
    }

    /// Refreshes branch probabilities in trees `from..n`, depth first, one query per
    /// internal vertex whose context is reachable. Leaves whose context probability
    /// drops to zero are frozen; frozen leaves that become reachable again are revived.
    pub fn update_observation_probs(&mut self, from: usize) -> Result<Changed> {
        self.net.set_category(QueryKind::GlobalUpdate);
        let mut changed = Vec::new();
        for j in from..self.policy.len() {
            let tree = self.policy.tree(j).clone();
            let refreshed = refresh_tree(&mut self.net, &tree, &Context::new(), 1.0, true, &mut |id| {
                changed.push((j, id))
            })?;
            if refreshed != tree {
                self.policy.set_tree(j, refreshed);
                self.policy.install(&mut self.net, j)?;
            }
        }
        Ok(changed)
    }

    /// Backward sweep D_n..D_1: two queries per reachable leaf, then the tree is
    /// reinstalled before moving to the earlier decision.
    pub fn update_expected_values(&mut self) -> Result<Changed> {
        self.net.set_category(QueryKind::GlobalUpdate);
        let p = commitment(self.n, self.config.c);
        let bounds = self.net.bounds();
        let uses_prob = self.config.heuristic == Heuristic::HighestProbability || self.config.weight_by_probability;
        let mut changed = Vec::new();
        for j in (0..self.policy.len()).rev() {
            let leaves: Vec<LeafData> = self.policy.tree(j).leaves().iter().map(|l| (***l).clone()).collect();
            let mut updated: HashMap<u64, LeafData> = HashMap::new();
            for old in leaves {
                let new = if old.reachable {
                    match self.net.reevaluate(j, &old.context)? {
                        Reevaluation::Values(mev) => {
                            LeafData::from_mev(old.id, old.context.clone(), mev, bounds, p, old.prob)
                        }
                        Reevaluation::Unreachable => old.frozen(),
                    }
                } else {
                    old.with_p(p)
                };
                let moved = new.reachable != old.reachable
                    || new.best != old.best
                    || new
                        .action_evs
                        .iter()
                        .zip(&old.action_evs)
                        .any(|(a, b)| (a - b).abs() > CHANGE_TOLERANCE)
                    || (uses_prob && (new.prob - old.prob).abs() > CHANGE_TOLERANCE);
                if moved {
                    changed.push((j, old.id));
                }
                updated.insert(old.id, new);
            }
            let tree = self
                .policy
                .tree(j)
                .map_leaves(&mut |l| updated.remove(&l.id).expect("every leaf updated"));
            self.policy.set_tree(j, tree);
            self.policy.install(&mut self.net, j)?;
        }
        Ok(changed)
    }

    /// When the queue runs dry: refresh every tree's branch probabilities, and if that
    /// revives any leaf, re-sweep values and requeue. Returns whether work was found.
    fn refresh_all(&mut self) -> Result<bool> {
        let revived_before: Vec<(usize, u64)> = self.unreachable_leaves();
        if revived_before.is_empty() {
            return Ok(false);
        }
        let changed = self.update_observation_probs(0)?;
        let revived: Vec<(usize, u64)> = changed
            .into_iter()
            .filter(|&(k, id)| self.policy.tree(k).find_leaf(id).is_some_and(|l| l.reachable))
            .collect();
        if revived.is_empty() {
            return Ok(false);
        }
        let mut changed = self.update_expected_values()?;
        changed.extend(revived);
        self.rescore(changed);
        Ok(!self.live.is_empty())
    }

    fn unreachable_leaves(&self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for k in 0..self.policy.len() {
            for l in self.policy.tree(k).leaves() {
                if !l.reachable {
                    out.push((k, l.id));
                }
            }
        }
        out
    }

    /// Steps until the budget runs out or every tree is complete.
    pub fn run(&mut self) -> Result<StepOutcome> {
        loop {
            match self.step()? {
                StepOutcome::Extended => continue,
                other => return Ok(other),
            }
        }
    }

    /// One backward MEV sweep committing every leaf (p = 1), then the final policy value.
    pub fn finalize(mut self) -> Result<RefinementResult> {
        let stochastic = self.policy.clone();
        self.net.set_category(QueryKind::GlobalUpdate);
        let bounds = self.net.bounds();
        for j in (0..self.policy.len()).rev() {
            let leaves: Vec<LeafData> = self.policy.tree(j).leaves().iter().map(|l| (***l).clone()).collect();
            let mut updated: HashMap<u64, LeafData> = HashMap::new();
            for old in leaves {
                let new = match self.net.reevaluate(j, &old.context)? {
                    Reevaluation::Values(mev) => {
                        LeafData::from_mev(old.id, old.context.clone(), mev, bounds, 1.0, old.prob)
                    }
                    Reevaluation::Unreachable => old.frozen().committed(),
                };
                updated.insert(old.id, new);
            }
            let tree = self
                .policy
                .tree(j)
                .map_leaves(&mut |l| updated.remove(&l.id).expect("every leaf updated"));
            self.policy.set_tree(j, tree);
            self.policy.install(&mut self.net, j)?;
        }
        let final_ev = self.policy_value()?;
        self.profile.final_ev = Some(final_ev);
        Ok(RefinementResult {
            policy: self.policy,
            stochastic,
            profile: self.profile,
            ledger: self.net.ledger().clone(),
            final_ev,
            extensions: self.n,
        })
    }
}

/// Exact value of whatever policy is installed. One policy-evaluation query.
pub fn policy_value(net: &mut CompiledNetwork) -> Result<f64> {
    net.set_category(QueryKind::PolicyEvaluation);
    net.expected_value(&Context::new())
}

fn refresh_tree(
    net: &mut CompiledNetwork,
    node: &DecisionTree,
    ctx: &Context,
    prob: f64,
    reachable: bool,
    changed: &mut dyn FnMut(u64),
) -> Result<DecisionTree> {
    match node {
        DecisionTree::Leaf(l) => {
            let out = if !reachable {
                if l.reachable {
                    changed(l.id);
                }
                l.frozen()
            } else {
                let mut out = (**l).clone();
                if !l.reachable {
                    out.reachable = true;
                    out.default = false;
                    changed(l.id);
                }
                out.prob = prob;
                out
            };
            Ok(DecisionTree::leaf(out))
        }
        DecisionTree::Internal {
            var,
            children,
            branch_probs,
        } => {
            let probs = if reachable {
                match net.query_marginal(*var, ctx)? {
                    Marginal::Distribution(ps) => ps,
                    Marginal::Inconsistent => vec![0.0; children.len()],
                }
            } else {
                branch_probs.clone()
            };
            let mut new_children = Vec::with_capacity(children.len());
            for (x, c) in children.iter().enumerate() {
                let live = reachable && probs[x] > NONZERO;
                let child = refresh_tree(net, c, &ctx.with(*var, x), prob * probs[x], live, changed)?;
                new_children.push(std::sync::Arc::new(child));
            }
            Ok(DecisionTree::Internal {
                var: *var,
                children: new_children,
                branch_probs: probs,
            })
        }
    }
}

/// Runs the whole loop and finalizes.
pub fn refine(d: &InfluenceDiagram, config: RefinementConfig) -> Result<RefinementResult> {
    let mut r = Refiner::new(d, config)?;
    r.run()?;
    r.finalize()
}
