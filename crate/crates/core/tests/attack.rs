use std::collections::HashSet;
use std::time::{Duration, Instant};

use migp_core::attack::{
    greedy_attack, synth_distribution, BallIndex, OracleAnswer, OracleState, PasswordDistribution, RuleModel,
};
use migp_core::similarity::dasr_ruleset;
use proptest::prelude::*;

#[test]
fn greedy_run_at_full_size_is_fast() {
    let dist = synth_distribution(5, 10_000, 1.0).unwrap();
    let model = RuleModel::new(dasr_ruleset(), 10);
    let none = HashSet::new();
    let t = Instant::now();
    let idx = BallIndex::build(&dist, &model, &none);
    let target = "no-such-password-anywhere";
    let oracle = OracleState::new(target, &model, 1000, 1, &none).unwrap();
    let out = greedy_attack(&idx, oracle, 1, true).unwrap();
    assert!(!out.success);
    assert!(out.transcript.len() <= 1000);
    assert!(t.elapsed() < Duration::from_secs(60), "{:?}", t.elapsed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_is_normalized(weights in prop::collection::vec(0.0f64..100.0, 1..40)) {
        prop_assume!(weights.iter().any(|w| *w > 0.0));
        let entries: Vec<(String, f64)> = weights.iter().enumerate().map(|(i, w)| (format!("w{i}"), *w)).collect();
        let d = PasswordDistribution::new(entries).unwrap();
        let total: f64 = d.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(d.probabilities().iter().all(|p| *p >= 0.0));
        prop_assert!(d.probabilities().windows(2).all(|w| w[0] >= w[1]));
        let unique: HashSet<&String> = d.support().iter().collect();
        prop_assert_eq!(unique.len(), d.len());
    }

    #[test]
    fn oracle_budget_and_transcript(q in 1usize..12, calls in 0usize..20, m in 1usize..4, seed in 0u64..1000) {
        let model = RuleModel::new(dasr_ruleset(), 3);
        let none = HashSet::new();
        let mut o = OracleState::new("secret1", &model, q, m, &none).unwrap();
        for i in 0..calls {
            let g = vec![format!("g{}", (seed as usize + i) % 7); m];
            let before = o.budget();
            let a = o.query(&g).unwrap();
            prop_assert!(o.budget() <= before);
            if before <= 1 {
                prop_assert_eq!(a, OracleAnswer::Exhausted);
            }
        }
        prop_assert!(o.transcript().len() <= q);
    }

    #[test]
    fn match_answer_points_at_target(seed in 0u64..200, q in 2usize..50, m in 1usize..4) {
        let dist = synth_distribution(seed, 150, 1.0).unwrap();
        let model = RuleModel::new(dasr_ruleset(), 4);
        let none = HashSet::new();
        let idx = BallIndex::build(&dist, &model, &none);
        let target = dist.support()[(seed as usize * 7) % dist.len()].clone();
        let oracle = OracleState::new(&target, &model, q, m, &none).unwrap();
        let out = greedy_attack(&idx, oracle, m, true).unwrap();
        for e in &out.transcript {
            if let OracleAnswer::Match(i) = e.answer {
                prop_assert_eq!(&e.guesses[i - 1], &target);
            }
        }
        let mut centers = HashSet::new();
        for e in &out.transcript {
            for g in &e.guesses {
                prop_assert!(centers.insert(g.clone()), "repeated {}", g);
            }
        }
    }
}
