use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plrank::metrics::{self, Prediction};
use plrank::recovery::rum_recovery_experiment;
use plrank::rum::{self, LatentUtilities, NoiseKind};
use plrank::sampler;
use plrank::train::{train, train_resampling};
use plrank::{
    generate_scene, pl, DepthMap, OptimizerKind, SamplerConfig, SceneKind, SceneSpec, Scorer,
    TabularScorer, TrainConfig,
};

fn ramp(height: usize, width: usize, max_depth: f64) -> DepthMap {
    generate_scene(&SceneSpec {
        kind: SceneKind::RampHorizontal,
        height,
        width,
        min_depth: 0.0,
        max_depth,
        seed: 0,
    })
    .unwrap()
}

#[test]
fn top_three_of_fifteen_on_small_ramp() {
    let map = ramp(4, 4, 3.0);
    let cfg = SamplerConfig {
        ranking_size: 2,
        rankings_per_image: 3,
        oversample: 5,
        ..SamplerConfig::default()
    };
    let candidates =
        sampler::draw_candidates(&map, &cfg, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    assert_eq!(candidates.len(), 15);
    let chosen = sampler::sample_rankings(&map, &cfg, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();

    let mut all: Vec<f64> = candidates
        .iter()
        .map(|c| {
            let d: Vec<f64> = c.iter().map(|&l| map.depth(l).unwrap()).collect();
            let gap = (d[0] - d[1]).abs();
            if sampler::near_equal(d[0], d[1], cfg.tau) {
                gap + cfg.penalty
            } else {
                gap
            }
        })
        .collect();
    all.sort_by(|a, b| b.total_cmp(a));
    let kept: Vec<f64> = chosen.iter().map(|s| s.informativeness).collect();
    assert_eq!(kept, all[..3]);
    let worst_kept = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(all[3..].iter().all(|&r| r <= worst_kept));
}

#[test]
fn default_sampling_yields_four_hundred() {
    let map = ramp(64, 64, 10.0);
    let samples = sampler::sample_rankings(
        &map,
        &SamplerConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    assert_eq!(samples.len(), 400);
    assert!(samples.iter().all(|s| s.len() == 5));
    assert!(samples
        .windows(2)
        .all(|w| w[0].informativeness >= w[1].informativeness));
}

#[test]
fn trained_mode_reproduces_training_rankings() {
    let map = ramp(16, 16, 10.0);
    let samples = sampler::sample_rankings(
        &map,
        &SamplerConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    let trained = train(
        TabularScorer::zeros(16, 16).unwrap(),
        &samples,
        &TrainConfig::default(),
    )
    .unwrap();
    assert!(trained.trace.last().unwrap() < &trained.trace[0]);
    let hits = samples
        .iter()
        .filter(|s| pl::mode(&trained.scorer.forward(&s.locations).unwrap()) == s.ground_truth)
        .count();
    assert!(
        hits as f64 >= 0.99 * samples.len() as f64,
        "{hits} of {}",
        samples.len()
    );
}

#[test]
fn trained_ordering_agrees_on_probed_pairs() {
    let map = ramp(32, 32, 10.0);
    let cfg = TrainConfig {
        seed: 4,
        ..TrainConfig::default()
    };
    let trained = train_resampling(
        TabularScorer::zeros(32, 32).unwrap(),
        &map,
        &SamplerConfig::default(),
        &cfg,
    )
    .unwrap();
    let pairs =
        metrics::sample_eval_pairs(&map, 20_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let grid = trained.scorer.score_grid();
    let err = metrics::ordinal_error(Prediction::score(&grid), &map, &pairs).unwrap();
    assert!(err.error <= 0.01, "agreement {:.4}", 1.0 - err.error);
}

#[test]
fn uniform_noise_predictor_is_a_coin_flip() {
    use rand::Rng;
    let map = ramp(64, 64, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pairs = metrics::sample_eval_pairs(&map, 50_000, &mut rng).unwrap();
    let noise =
        plrank::Grid::new(64, 64, (0..4096).map(|_| rng.random::<f64>()).collect()).unwrap();
    let err = metrics::ordinal_error(Prediction::depth(&noise), &map, &pairs)
        .unwrap()
        .error;
    assert!((err - 0.5).abs() <= 0.02, "{err}");
}

#[test]
fn recovery_is_shift_invariant() {
    let z = vec![0.0, 1.0, 2.0, 3.0, 4.0];
    let cfg = TrainConfig {
        epochs: 150,
        learning_rate: 2.0,
        optimizer: OptimizerKind::Sgd,
        ..TrainConfig::default()
    };
    let base = LatentUtilities::new(z.clone(), NoiseKind::Gumbel, 1.0).unwrap();
    let shifted = base.shifted(10.0).unwrap();
    let a = rum_recovery_experiment(&base, 3000, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let b =
        rum_recovery_experiment(&shifted, 3000, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    assert_eq!(a.scores, b.scores);
    assert!((a.rmse - b.rmse).abs() < 1e-9, "{} vs {}", a.rmse, b.rmse);
    assert!((b.fit.shift - a.fit.shift - 10.0).abs() < 1e-9);
}

#[test]
fn exchangeable_latents_give_uniform_rankings() {
    const DRAWS: usize = 60_000;
    let u = LatentUtilities::new(vec![1.5; 3], NoiseKind::Gumbel, 1.0).unwrap();
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for r in rum::dataset(&u, DRAWS, &mut ChaCha8Rng::seed_from_u64(12)).unwrap() {
        *counts.entry(r.into_inner()).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    let p = 1.0 / 6.0;
    let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
    for (r, &c) in &counts {
        assert!(
            (c as f64 - DRAWS as f64 * p).abs() <= 3.0 * sigma,
            "{r:?}: {c}"
        );
    }
}

#[test]
fn evaluation_and_sampling_defaults() {
    assert_eq!(metrics::DEFAULT_EVAL_PAIRS, 50_000);
    assert_eq!(metrics::DEFAULT_RANKING_SETS, 100);
    assert_eq!(metrics::DEFAULT_RANKING_SET_SIZE, 500);
    let cfg = SamplerConfig::default();
    assert_eq!(
        (cfg.ranking_size, cfg.rankings_per_image, cfg.oversample),
        (5, 400, 5)
    );
    assert_eq!((cfg.tau, cfg.penalty), (0.03, -10.0));
}
