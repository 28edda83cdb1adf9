use inforef::exact::{evaluate_policy_exact, solve_dp};
use inforef::format::{parse_diagram, serialize_diagram};
use inforef::inference::CompiledNetwork;
use inforef::policy::file::{read_policy, write_policy, write_tables, LoadedPolicy};
use inforef::problems::random::{random_diagram, random_two_stage};
use inforef::refinement::{policy_value, refine, Budget, RefinementConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn diagram_text_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_diagram(&mut rng, 12.0);
        let text = serialize_diagram(&d);
        let back = parse_diagram(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_diagram(&back), text);
    }

    #[test]
    fn refined_policy_round_trips(seed in any::<u64>(), budget in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_two_stage(&mut rng);
        let config = RefinementConfig {
            budget: Budget { max_extensions: Some(budget), ..Budget::default() },
            ..RefinementConfig::default()
        };
        let r = refine(&d, config).unwrap();
        let text = write_policy(&d, d.name(), &r.policy, &["test".to_string()]);
        let mut net = CompiledNetwork::compile(&d).unwrap();
        let loaded = read_policy(&text, &d, &net).unwrap();
        let LoadedPolicy::Trees(p) = &loaded else { panic!("expected trees") };
        for k in 0..d.decisions().len() {
            prop_assert_eq!(p.tree_to_cpt(k), r.policy.tree_to_cpt(k));
        }
        loaded.install(&mut net).unwrap();
        prop_assert!((policy_value(&mut net).unwrap() - r.final_ev).abs() <= 1e-9);
    }
}

#[test]
fn dp_tables_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let d = random_two_stage(&mut rng);
        let dp = solve_dp(&d).unwrap();
        let text = write_tables(&d, d.name(), &dp.policy, &[]);
        let mut net = CompiledNetwork::compile(&d).unwrap();
        let loaded = read_policy(&text, &d, &net).unwrap();
        let LoadedPolicy::Tables(t) = &loaded else {
            panic!("expected tables")
        };
        assert_eq!(t, &dp.policy);
        loaded.install(&mut net).unwrap();
        assert!((policy_value(&mut net).unwrap() - dp.ev).abs() <= 1e-9);
        assert!((evaluate_policy_exact(&d, &t.tables()).unwrap() - dp.ev).abs() <= 1e-12);
    }
}

#[test]
fn shipped_fixture_parses() {
    let text = include_str!("../fixtures/weather.id");
    let d = parse_diagram(text).unwrap();
    assert!(d.validate().is_ok());
    assert_eq!(parse_diagram(&serialize_diagram(&d)).unwrap(), d);
}
