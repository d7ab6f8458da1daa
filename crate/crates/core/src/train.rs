//! Maximum-likelihood training of scorers on ranking samples.
//!
//! The objective is the mean PL negative log-likelihood of the samples'
//! ground-truth rankings under the scorer's outputs. Per-sample gradients are
//! evaluated in parallel and reduced in sample order, so runs are
//! reproducible bit for bit given the seed.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::depth::DepthMap;
use crate::error::{domain, Error, Result};
use crate::pl;
use crate::sampler::{sample_rankings, RankingSample, SamplerConfig};
use crate::scorer::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.05,
            batch_size: 400,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(domain(format!(
                "learning rate must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(domain("batch size must be at least 1"));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl Optimizer {
    pub(crate) fn new(kind: OptimizerKind, lr: f64, params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                m: vec![0.0; params],
                v: vec![0.0; params],
                t: 0,
            },
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for i in 0..params.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= *lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Negative log-likelihood of one sample's ground-truth ranking.
pub fn sample_nll<S: Scorer + ?Sized>(scorer: &S, sample: &RankingSample) -> Result<f64> {
    check_sample(sample)?;
    let scores = scorer.forward(&sample.locations)?;
    Ok(-pl::log_probability(&sample.ground_truth, &scores)?)
}

pub fn mean_nll<S: Scorer + Sync + ?Sized>(scorer: &S, samples: &[RankingSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(domain("no samples to evaluate"));
    }
    let per: Vec<f64> = samples
        .par_iter()
        .map(|s| sample_nll(scorer, s))
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / samples.len() as f64)
}

fn check_sample(sample: &RankingSample) -> Result<()> {
    if sample.locations.len() < 2 || sample.ground_truth.len() != sample.locations.len() {
        return Err(domain(format!(
            "degenerate sample: {} locations, ranking of {}",
            sample.locations.len(),
            sample.ground_truth.len()
        )));
    }
    Ok(())
}

/// Mean NLL and its gradient with respect to the scorer parameters over
/// `samples`, reduced in slice order.
pub fn batch_gradient<S: Scorer + Sync + ?Sized>(
    scorer: &S,
    samples: &[&RankingSample],
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(domain("empty batch"));
    }
    let contributions: Vec<(f64, Vec<(usize, f64)>)> = samples
        .par_iter()
        .map(|s| {
            check_sample(s)?;
            let scores = scorer.forward(&s.locations)?;
            let (nll, g) = pl::nll_with_gradient(&s.ground_truth, &scores)?;
            let mut terms = Vec::with_capacity(s.locations.len());
            scorer.backward(&s.locations, &g, &mut |i, v| terms.push((i, v)))?;
            Ok((nll, terms))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / samples.len() as f64;
    let mut grad = vec![0.0; scorer.params().len()];
    let mut nll = 0.0;
    for (n, terms) in contributions {
        nll += n;
        for (i, v) in terms {
            grad[i] += v;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((nll * scale, grad))
}

/// A trained scorer and its loss history.
#[derive(Debug, Clone)]
pub struct Trained<S> {
    pub scorer: S,
    /// `trace[0]` is the mean NLL before training; `trace[e]` the mean NLL
    /// after epoch `e`, each over that epoch's samples.
    pub trace: Vec<f64>,
}

impl<S> Trained<S> {
    /// `epoch,mean_nll` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,mean_nll\n");
        for (e, v) in self.trace.iter().enumerate() {
            out.push_str(&format!("{e},{v}\n"));
        }
        out
    }
}

/// Where each epoch's samples come from.
enum Source<'a> {
    Fixed(&'a [RankingSample]),
    Resample {
        map: &'a DepthMap,
        cfg: &'a SamplerConfig,
    },
}

fn run<S: Scorer + Sync>(
    mut scorer: S,
    source: Source<'_>,
    cfg: &TrainConfig,
) -> Result<Trained<S>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, scorer.params().len());
    let mut trace = Vec::with_capacity(cfg.epochs + 1);

    let draw = |rng: &mut ChaCha8Rng| -> Result<Cow<'_, [RankingSample]>> {
        match &source {
            Source::Fixed(s) => Ok(Cow::Borrowed(*s)),
            Source::Resample { map, cfg } => Ok(Cow::Owned(sample_rankings(map, cfg, rng)?)),
        }
    };
    let mut samples = draw(&mut rng)?;
    if samples.is_empty() {
        return Err(domain("no training samples"));
    }
    samples.iter().try_for_each(check_sample)?;
    trace.push(mean_nll(&scorer, &samples)?);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        if epoch > 0 && matches!(source, Source::Resample { .. }) {
            samples = draw(&mut rng)?;
            order = (0..samples.len()).collect();
        }
        if cfg.batch_size < samples.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&RankingSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (_, grad) = batch_gradient(&scorer, &batch)?;
            optimizer.step(scorer.params_mut(), &grad);
        }
        trace.push(mean_nll(&scorer, &samples)?);
    }
    if scorer.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain(
            "training produced non-finite parameters".into(),
        ));
    }
    Ok(Trained { scorer, trace })
}

/// Minimizes the mean NLL of a fixed sample set.
pub fn train<S: Scorer + Sync>(
    scorer: S,
    samples: &[RankingSample],
    cfg: &TrainConfig,
) -> Result<Trained<S>> {
    run(scorer, Source::Fixed(samples), cfg)
}

/// Like [`train`], but draws a fresh set of rankings from `map` every epoch.
pub fn train_resampling<S: Scorer + Sync>(
    scorer: S,
    map: &DepthMap,
    sampler: &SamplerConfig,
    cfg: &TrainConfig,
) -> Result<Trained<S>> {
    sampler.validate()?;
    run(scorer, Source::Resample { map, cfg: sampler }, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::{generate_scene, Location, SceneKind, SceneSpec};
    use crate::pl::Ranking;
    use crate::scorer::{LinearFeatureScorer, TabularScorer};

    fn ramp() -> DepthMap {
        generate_scene(&SceneSpec {
            kind: SceneKind::RampHorizontal,
            height: 8,
            width: 8,
            min_depth: 0.0,
            max_depth: 7.0,
            seed: 0,
        })
        .unwrap()
    }

    fn samples(n: usize) -> Vec<RankingSample> {
        let cfg = SamplerConfig {
            ranking_size: 3,
            rankings_per_image: n,
            ..Default::default()
        };
        sample_rankings(&ramp(), &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let data = samples(20);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 0.0,
            batch_size: 7,
            ..Default::default()
        };
        let out = train(TabularScorer::zeros(8, 8).unwrap(), &data, &cfg).unwrap();
        assert!(out.scorer.params().iter().all(|&p| p == 0.0));
        assert!(out.trace.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(out.trace.len(), 6);
    }

    #[test]
    fn full_batch_sgd_is_monotone() {
        let data = samples(40);
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            batch_size: data.len(),
            optimizer: OptimizerKind::Sgd,
            seed: 1,
        };
        let out = train(TabularScorer::zeros(8, 8).unwrap(), &data, &cfg).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.trace.last() < out.trace.first());
    }

    #[test]
    fn deterministic_with_minibatches() {
        let data = samples(30);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 4,
            ..Default::default()
        };
        let a = train(LinearFeatureScorer::zeros(8, 8).unwrap(), &data, &cfg).unwrap();
        let b = train(LinearFeatureScorer::zeros(8, 8).unwrap(), &data, &cfg).unwrap();
        assert_eq!(a.scorer, b.scorer);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn rejects_degenerate_samples() {
        let bad = vec![RankingSample {
            locations: vec![Location::new(0, 0)],
            ground_truth: Ranking::identity(1),
            informativeness: 0.0,
        }];
        let err = train(
            TabularScorer::zeros(8, 8).unwrap(),
            &bad,
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(train(TabularScorer::zeros(8, 8).unwrap(), &samples(3), &cfg).is_err());
    }

    #[test]
    fn adam_learns_ramp_direction() {
        let data = samples(60);
        let cfg = TrainConfig {
            epochs: 100,
            learning_rate: 0.1,
            batch_size: 60,
            ..Default::default()
        };
        let out = train(LinearFeatureScorer::zeros(8, 8).unwrap(), &data, &cfg).unwrap();
        // closer (smaller column) must score higher
        assert!(out.scorer.coefficients()[1] < 0.0);
    }

    #[test]
    fn trace_csv_layout() {
        let t = Trained {
            scorer: (),
            trace: vec![1.5, 0.25],
        };
        assert_eq!(t.trace_csv(), "epoch,mean_nll\n0,1.5\n1,0.25\n");
    }
}
