use inforef::exact::{enumerate_joint, evaluate_policy_exact};
use inforef::inference::{CompiledNetwork, EliminationOrder, Marginal};
use inforef::problems::random::random_diagram;
use inforef::refinement::{policy_value, Budget, RefinementConfig, Refiner};
use inforef::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn random_context(rng: &mut impl Rng, net: &CompiledNetwork, skip: usize, max: usize) -> Context {
    let mut ctx = Context::new();
    for _ in 0..rng.gen_range(0..=max) {
        let v = rng.gen_range(0..net.num_vars());
        if v != skip && !ctx.contains(v) {
            ctx.bind(v, rng.gen_range(0..net.card(v))).unwrap();
        }
    }
    ctx
}

fn check_queries(net: &mut CompiledNetwork, rng: &mut impl Rng) {
    let joint = enumerate_joint(net).unwrap();
    for _ in 0..6 {
        let target = rng.gen_range(0..net.num_vars());
        let ev = random_context(rng, net, target, 3);
        let got = net.query_marginal(target, &ev).unwrap();
        let want = joint.marginal(target, &ev);
        match (got, want) {
            (Marginal::Distribution(a), Marginal::Distribution(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= TOL, "{} | {ev:?}: {a:?} vs {b:?}", net.name(target));
                }
            }
            (Marginal::Inconsistent, Marginal::Inconsistent) => {}
            (a, b) => panic!("disagreement on consistency: {a:?} vs {b:?}"),
        }
        let p = net.prob_of_evidence(&ev).unwrap();
        assert!((p - joint.prob(&ev)).abs() <= TOL);
    }
}

fn installed_tables(net: &CompiledNetwork, policy: &inforef::policy::Policy) -> Vec<Vec<f64>> {
    (0..net.decisions().len()).map(|k| policy.tree_to_cpt(k)).collect()
}

#[test]
fn variable_elimination_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..220 {
        let d = random_diagram(&mut rng, 12.0);
        for order in [EliminationOrder::MinDegree, EliminationOrder::Declaration] {
            let mut net = CompiledNetwork::compile(&d).unwrap();
            net.set_elimination_order(order);
            check_queries(&mut net, &mut rng);

            let ev = policy_value(&mut net).unwrap();
            let tables: Vec<Vec<f64>> = d
                .decisions()
                .iter()
                .enumerate()
                .map(|(k, &dv)| {
                    let rows: usize = d
                        .information_predecessors(k)
                        .unwrap()
                        .iter()
                        .map(|&p| d.card(p))
                        .product();
                    vec![1.0 / d.card(dv) as f64; rows * d.card(dv)]
                })
                .collect();
            let want = evaluate_policy_exact(&d, &tables).unwrap();
            assert!((ev - want).abs() <= TOL, "diagram {i}: uniform policy {ev} vs {want}");
        }
    }
}

#[test]
fn stochastic_policies_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 200 {
        let d = random_diagram(&mut rng, 12.0);
        if d.decisions().is_empty() {
            continue;
        }
        let config = RefinementConfig {
            budget: Budget {
                max_extensions: Some(rng.gen_range(0..6)),
                ..Budget::default()
            },
            ..RefinementConfig::default()
        };
        let mut refiner = Refiner::new(&d, config).unwrap();
        refiner.run().unwrap();
        let policy = refiner.policy().clone();
        for order in [EliminationOrder::MinDegree, EliminationOrder::Declaration] {
            let mut net = CompiledNetwork::compile(&d).unwrap();
            net.set_elimination_order(order);
            policy.install_all(&mut net).unwrap();
            let ev = policy_value(&mut net).unwrap();
            let want = evaluate_policy_exact(&d, &installed_tables(&net, &policy)).unwrap();
            assert!((ev - want).abs() <= TOL, "stochastic policy {ev} vs {want}");
            check_queries(&mut net, &mut rng);
        }
        checked += 1;
    }
}
