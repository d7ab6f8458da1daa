//! Metric depth from learned scores.
//!
//! PL scores identify latent depth only up to an additive constant, and the
//! unit Gumbel scale fixes an arbitrary unit, so depth is read off as an
//! affine function of the log-domain scores, `ẑ = s · w + t`, with `(s, t)`
//! fitted by least squares against reference depth on the map at hand. The
//! scale is unconstrained; with closest-first scores it comes out negative.

use std::collections::BTreeMap;

use rand::Rng;

use crate::depth::{DepthMap, Grid};
use crate::error::{domain, Error, Result};
use crate::pl::{self, Ranking, ScoreVector};
use crate::rum::{self, LatentUtilities, NoiseKind};
use crate::train::{Optimizer, TrainConfig};

/// Floor applied to recovered depth before ratio metrics.
pub const DEPTH_FLOOR: f64 = 1e-6;

/// Score spread (log domain) beyond which a fit is declared divergent.
pub const MAX_SCORE_SPREAD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub scale: f64,
    pub shift: f64,
}

impl AffineFit {
    pub const IDENTITY: AffineFit = AffineFit {
        scale: 1.0,
        shift: 0.0,
    };

    pub fn new(scale: f64, shift: f64) -> Result<Self> {
        if !(scale.is_finite() && shift.is_finite()) {
            return Err(domain("affine fit must be finite"));
        }
        Ok(Self { scale, shift })
    }

    #[inline]
    pub fn apply(&self, w: f64) -> f64 {
        self.scale * w + self.shift
    }
}

/// `s · w + t` at every pixel, without the floor.
pub fn apply_affine(scores: &Grid, fit: AffineFit) -> Grid {
    scores.map(|w| fit.apply(w))
}

/// `max(s · w + t, DEPTH_FLOOR)` at every pixel.
pub fn recover_depth(scores: &Grid, fit: AffineFit) -> Grid {
    scores.map(|w| fit.apply(w).max(DEPTH_FLOOR))
}

/// Sum of squared residuals `Σ (s · w + t - d)²`.
pub fn residual(pred: &[f64], truth: &[f64], fit: AffineFit) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(&w, &d)| (fit.apply(w) - d).powi(2))
        .sum()
}

/// Least-squares `(s, t)` minimizing `Σ (s · pred + t - truth)²`.
///
/// The 2×2 normal equations are solved in centered form, where the system
/// decouples into `s = Sxy / Sxx` and `t = ȳ - s · x̄`.
pub fn fit_affine_values(pred: &[f64], truth: &[f64]) -> Result<AffineFit> {
    if pred.len() != truth.len() {
        return Err(domain(format!(
            "{} predictions against {} reference values",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!(
            "{n} points cannot fix two parameters"
        )));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(domain("fit inputs must be finite"));
    }
    let nf = n as f64;
    let mean_x = pred.iter().sum::<f64>() / nf;
    let mean_y = truth.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in pred.iter().zip(truth) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let max_abs = pred.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let noise = nf * (16.0 * f64::EPSILON * max_abs).powi(2);
    if sxx <= noise {
        return Err(Error::DegenerateFit("predictions are constant".into()));
    }
    let scale = sxy / sxx;
    AffineFit::new(scale, mean_y - scale * mean_x)
}

/// [`fit_affine_values`] over the valid pixels of `truth`.
pub fn fit_affine(pred: &Grid, truth: &DepthMap) -> Result<AffineFit> {
    if (pred.height(), pred.width()) != (truth.height(), truth.width()) {
        return Err(domain("prediction and reference maps differ in size"));
    }
    let valid = truth.valid_indices();
    let x: Vec<f64> = valid.iter().map(|&i| pred.values()[i]).collect();
    let y: Vec<f64> = valid.iter().map(|&i| truth.values()[i] as f64).collect();
    fit_affine_values(&x, &y)
}

/// Whether some item can be ranked above every other item, directly or
/// transitively, and vice versa. Without this the PL likelihood has no finite
/// maximizer.
pub fn rankings_identifiable(rankings: &[Ranking], items: usize) -> bool {
    if items < 2 {
        return false;
    }
    // beats[a] lists items ranked directly below a somewhere
    let mut beats = vec![Vec::new(); items];
    let mut beaten_by = vec![Vec::new(); items];
    for r in rankings {
        for w in r.as_slice().windows(2) {
            beats[w[0]].push(w[1]);
            beaten_by[w[1]].push(w[0]);
        }
    }
    let reaches_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; items];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reaches_all(&beats) && reaches_all(&beaten_by)
}

/// Maximum-likelihood PL scores for `items` free items, one parameter each,
/// starting from zero.
///
/// Identical rankings are pooled with their multiplicity, so the objective
/// is the mean NLL over all observations at the cost of the distinct ones.
/// Every epoch takes one full-batch optimizer step; `cfg.batch_size` is not
/// used. Returns the scores and the per-epoch mean NLL, or
/// [`Error::NonIdentifiable`] once the score spread passes
/// [`MAX_SCORE_SPREAD`].
pub fn fit_free_scores(
    rankings: &[Ranking],
    items: usize,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if rankings.is_empty() {
        return Err(domain("no rankings to fit"));
    }
    let mut pooled: BTreeMap<&Ranking, usize> = BTreeMap::new();
    for r in rankings {
        *pooled.entry(r).or_default() += 1;
    }
    let total = rankings.len() as f64;
    let mut w = vec![0.0; items];
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, items);
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    let objective = |w: &[f64]| -> Result<(f64, Vec<f64>)> {
        let scores = ScoreVector::new(w.to_vec())?;
        let mut nll = 0.0;
        let mut grad = vec![0.0; items];
        for (r, &count) in &pooled {
            let weight = count as f64 / total;
            let (n, g) = pl::nll_with_gradient(r, &scores)?;
            nll += weight * n;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += weight * gi;
            }
        }
        Ok((nll, grad))
    };
    let (mut nll, mut grad) = objective(&w)?;
    trace.push(nll);
    for _ in 0..cfg.epochs {
        optimizer.step(&mut w, &grad);
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if (hi - lo).is_nan() || hi - lo > MAX_SCORE_SPREAD {
            return Err(Error::NonIdentifiable(format!(
                "score spread exceeded {MAX_SCORE_SPREAD}"
            )));
        }
        (nll, grad) = objective(&w)?;
        trace.push(nll);
    }
    Ok((w, trace))
}

#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    /// Fitted log-domain scores, one per item.
    pub scores: Vec<f64>,
    pub fit: AffineFit,
    /// `s · w + t` per item.
    pub recovered: Vec<f64>,
    /// Root-mean-square error of `recovered` against the latent values.
    pub rmse: f64,
    pub trace: Vec<f64>,
}

/// Simulates noisy rankings of `u`, fits free PL scores by NLL minimization,
/// aligns them to the latent values and reports the error.
pub fn rum_recovery_experiment<R: Rng + ?Sized>(
    u: &LatentUtilities,
    num_rankings: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<RecoveryOutcome> {
    if u.noise() != NoiseKind::Gumbel {
        return Err(domain("metric recovery assumes Gumbel noise"));
    }
    let rankings = rum::dataset(u, num_rankings, rng)?;
    if !rankings_identifiable(&rankings, u.len()) {
        return Err(Error::NonIdentifiable(
            "observed rankings never reverse some pair ordering; scores diverge".into(),
        ));
    }
    let (scores, trace) = fit_free_scores(&rankings, u.len(), cfg)?;
    let fit = fit_affine_values(&scores, u.values())?;
    let recovered: Vec<f64> = scores.iter().map(|&w| fit.apply(w)).collect();
    let rmse = (residual(&scores, u.values(), fit) / scores.len() as f64).sqrt();
    Ok(RecoveryOutcome {
        scores,
        fit,
        recovered,
        rmse,
        trace,
    })
}
