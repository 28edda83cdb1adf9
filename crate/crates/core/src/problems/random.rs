//! Random small diagrams for property tests. Every CPT entry is at least
//! [`MIN_ENTRY`], so every context has positive probability.

use rand::Rng;

use crate::model::{DiagramBuilder, InfluenceDiagram, VarId, Variable};

pub const MIN_ENTRY: f64 = 0.05;

fn distribution(rng: &mut impl Rng, card: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..card).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let free = 1.0 - MIN_ENTRY * card as f64;
    let mut row: Vec<f64> = w.iter().map(|x| MIN_ENTRY + free * x / total).collect();
    let head: f64 = row[..card - 1].iter().sum();
    row[card - 1] = 1.0 - head;
    row
}

fn cpt(rng: &mut impl Rng, rows: usize, card: usize) -> Vec<f64> {
    (0..rows).flat_map(|_| distribution(rng, card)).collect()
}

fn values(rng: &mut impl Rng, rows: usize) -> Vec<f64> {
    (0..rows)
        .map(|_| (rng.gen_range(-10.0..10.0_f64) * 100.0).round() / 100.0)
        .collect()
}

fn rows_of(b: &DiagramBuilder, parents: &[VarId]) -> usize {
    parents.iter().map(|&p| b.card(p)).product()
}

fn pick_parents(rng: &mut impl Rng, pool: &[VarId], max: usize) -> Vec<VarId> {
    let mut out: Vec<VarId> = pool.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    while out.len() > max {
        out.remove(rng.gen_range(0..out.len()));
    }
    out
}

/// A random diagram with chance and decision nodes whose total state space, including
/// the binary value variable, is at most `2^max_bits`. Decisions observe random subsets of
/// earlier nodes, not necessarily with no-forgetting.
pub fn random_diagram(rng: &mut impl Rng, max_bits: f64) -> InfluenceDiagram {
    let mut b = DiagramBuilder::new("random");
    let mut ids: Vec<VarId> = Vec::new();
    let mut bits = 1.0;
    let target = rng.gen_range(3..=10);
    let mut decisions = 0;
    for i in 0..target {
        let card = if rng.gen_bool(0.3) { 3 } else { 2 };
        let cost = (card as f64).log2();
        if bits + cost > max_bits + 1e-9 {
            break;
        }
        bits += cost;
        let is_decision = i > 0 && decisions < 2 && rng.gen_bool(0.25);
        if is_decision {
            let info = pick_parents(rng, &ids, 3);
            ids.push(b.decision(
                Variable::new(format!("D{i}"), (0..card).map(|x| format!("d{x}"))),
                &info,
            ));
            decisions += 1;
        } else {
            let parents = pick_parents(rng, &ids, 3);
            let rows = rows_of(&b, &parents);
            let table = cpt(rng, rows, card);
            ids.push(b.chance(
                Variable::new(format!("X{i}"), (0..card).map(|x| format!("x{x}"))),
                &parents,
                table,
            ));
        }
    }
    let mut vparents = pick_parents(rng, &ids, 3);
    if vparents.is_empty() {
        vparents.push(*ids.last().expect("at least one node"));
    }
    let rows = rows_of(&b, &vparents);
    let v = values(rng, rows);
    b.value("U", &vparents, v);
    b.build()
}

/// A hidden state, one to three noisy observations of it, and one decision that sees the
/// observations (and possibly an irrelevant coin).
pub fn random_single_stage(rng: &mut impl Rng) -> InfluenceDiagram {
    let mut b = DiagramBuilder::new("single");
    let sc = rng.gen_range(2..=3);
    let p = distribution(rng, sc);
    let s = b.chance(Variable::new("S", (0..sc).map(|x| format!("s{x}"))), &[], p);
    let mut obs = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let oc = rng.gen_range(2..=3);
        let table = cpt(rng, sc, oc);
        obs.push(b.chance(
            Variable::new(format!("O{i}"), (0..oc).map(|x| format!("o{x}"))),
            &[s],
            table,
        ));
    }
    if rng.gen_bool(0.3) {
        let p = distribution(rng, 2);
        obs.push(b.chance(Variable::new("Coin", ["h", "t"]), &[], p));
    }
    let dc = rng.gen_range(2..=4);
    let d = b.decision(Variable::new("D", (0..dc).map(|x| format!("a{x}"))), &obs);
    let v = values(rng, sc * dc);
    b.value("U", &[s, d], v);
    b.build()
}

/// Two stages with no-forgetting: `D2` sees everything `D1` saw, `D1` itself, and a later
/// observation whose distribution depends on `D1`. At most three binary observations are
/// visible to each decision.
pub fn random_two_stage(rng: &mut impl Rng) -> InfluenceDiagram {
    let mut b = DiagramBuilder::new("two-stage");
    let sc = rng.gen_range(2..=3);
    let p = distribution(rng, sc);
    let s1 = b.chance(Variable::new("S1", (0..sc).map(|x| format!("s{x}"))), &[], p);
    let k1 = rng.gen_range(1..=2);
    let mut first = Vec::new();
    for i in 0..k1 {
        let table = cpt(rng, sc, 2);
        first.push(b.chance(Variable::new(format!("O1_{i}"), ["lo", "hi"]), &[s1], table));
    }
    let d1c = rng.gen_range(2..=3);
    let d1 = b.decision(Variable::new("D1", (0..d1c).map(|x| format!("a{x}"))), &first);
    let table = cpt(rng, sc * d1c, sc);
    let s2 = b.chance(Variable::new("S2", (0..sc).map(|x| format!("s{x}"))), &[s1, d1], table);
    let k2 = rng.gen_range(1..=(3 - k1));
    let mut second = Vec::new();
    for i in 0..k2 {
        let table = cpt(rng, sc, 2);
        second.push(b.chance(Variable::new(format!("O2_{i}"), ["lo", "hi"]), &[s2], table));
    }
    let mut info = first.clone();
    info.push(d1);
    info.extend(&second);
    let d2c = rng.gen_range(2..=3);
    let d2 = b.decision(Variable::new("D2", (0..d2c).map(|x| format!("b{x}"))), &info);
    let v = values(rng, sc * d1c * d2c);
    b.value("U", &[s2, d1, d2], v);
    b.build()
}
