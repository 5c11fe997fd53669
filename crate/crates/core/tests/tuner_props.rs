use mtc_traffic::tuner::{suggest, tune_with, HyperParams, SearchSpace, SuggestOptions, TrialResult, TuneOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lr_only() -> SearchSpace {
    let mut s = SearchSpace::pinned(&HyperParams::paper_best());
    s.learning_rate = SearchSpace::paper().learning_rate;
    s
}

fn quad(hp: &HyperParams) -> f64 {
    -(hp.learning_rate.log10() - 0.01f64.log10()).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suggestions_stay_in_space(seed in any::<u64>(), n in 0usize..9) {
        let space = SearchSpace::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let history: Vec<TrialResult> = (0..n)
            .map(|i| {
                let hp = space.sample(&mut rng);
                TrialResult { index: i, objective: Some(hp.dropout), hyperparams: hp, error: None, wall_time_s: 0.0, seed: 0 }
            })
            .collect();
        let opts = SuggestOptions { candidates: 64, ..Default::default() };
        prop_assert!(space.contains(&suggest(&history, &space, &mut rng, &opts)));
    }
}

#[test]
fn bayesian_search_concentrates_near_the_peak() {
    let out = tune_with(&lr_only(), &TuneOptions { budget: 20, seed: 4, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
    let late: Vec<f64> = out.log[10..].iter().map(|t| t.hyperparams.learning_rate.log10()).collect();
    let near = late.iter().filter(|v| (*v + 2.0).abs() < 0.3).count();
    assert!(near >= 7, "{late:?}");
    assert!(out.best.objective.unwrap() > -0.01);
}

#[test]
fn beats_random_search_on_a_quadratic() {
    let space = lr_only();
    let mut wins = 0;
    for seed in 0..20u64 {
        let bo = tune_with(&space, &TuneOptions { budget: 10, seed, ..Default::default() }, |hp, _| Ok(quad(hp))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let random = (0..10).map(|_| quad(&space.sample(&mut rng))).fold(f64::NEG_INFINITY, f64::max);
        if bo.best.objective.unwrap() >= random {
            wins += 1;
        }
    }
    assert!(wins >= 15, "{wins} of 20");
}

#[test]
fn tuned_trials_lie_in_the_reference_ranges() {
    let space = SearchSpace::paper();
    let out = tune_with(&space, &TuneOptions { budget: 12, seed: 9, ..Default::default() }, |hp, _| {
        Ok(-(hp.batch_size as f64 - 113.0).abs() - hp.dropout)
    })
    .unwrap();
    for t in &out.log {
        assert!(space.contains(&t.hyperparams));
    }
}
