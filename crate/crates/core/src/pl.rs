//! Plackett-Luce model over rankings of scored items.
//!
//! Items carry raw log-domain scores `w_i`; the PL parameter of item `i` is
//! `v_i = exp(w_i)`. The probability of observing the ranking
//! `π(1) ≻ π(2) ≻ … ≻ π(n)` is
//!
//! ```text
//! P(π | v) = ∏_{i=1}^{n-1} v_{π(i)} / Σ_{k=i}^{n} v_{π(k)}
//! ```
//!
//! A ranking over a subset of the items is scored with the marginal model,
//! which is again PL with the parameters of the ranked items. All routines
//! work in the log domain with suffix log-sum-exp accumulation, so the
//! scores never need to be exponentiated directly.
//!
//! Indices are zero-based throughout.

use std::cmp::Ordering;

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{capacity, domain, Result};

/// Largest item count accepted by [`enumerate`].
pub const MAX_ENUMERATE: usize = 8;

/// Raw per-item scores `w` (log-domain PL parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(domain("score vector must hold at least one item"));
        }
        if let Some(i) = scores.iter().position(|w| !w.is_finite()) {
            return Err(domain(format!("score {i} is not finite")));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// PL parameters `v_i = exp(w_i)`.
    pub fn parameters(&self) -> Vec<f64> {
        self.0.iter().map(|w| w.exp()).collect()
    }

    /// Scores of the given items, in the given order.
    pub fn restrict(&self, items: &[usize]) -> Result<ScoreVector> {
        let mut out = Vec::with_capacity(items.len());
        for &i in items {
            out.push(
                *self
                    .0
                    .get(i)
                    .ok_or_else(|| domain(format!("item {i} out of range")))?,
            );
        }
        ScoreVector::new(out)
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A ranking of distinct item indices, top rank (closest item) first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = order.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(domain(format!("item {} appears twice in ranking", w[0])));
        }
        Ok(Self(order))
    }

    /// The identity ranking `0, 1, …, n-1`.
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Position of `item` in the ranking, if present.
    pub fn position(&self, item: usize) -> Option<usize> {
        self.0.iter().position(|&i| i == item)
    }

    fn check_against(&self, k: usize) -> Result<()> {
        if self.0.len() < 2 {
            return Err(domain("likelihood needs a ranking of at least two items"));
        }
        if let Some(&i) = self.0.iter().find(|&&i| i >= k) {
            return Err(domain(format!("item {i} out of range for {k} scores")));
        }
        Ok(())
    }
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `lse[i] = log Σ_{k ≥ i} exp(w_{π(k)})` for every position of the ranking.
fn suffix_log_sum_exp(order: &[usize], w: &[f64]) -> Vec<f64> {
    let mut lse = vec![0.0; order.len()];
    let mut acc = f64::NEG_INFINITY;
    for (i, &item) in order.iter().enumerate().rev() {
        acc = log_add_exp(acc, w[item]);
        lse[i] = acc;
    }
    lse
}

/// `log P(π | exp(w))` under the PL marginal on the ranked items.
pub fn log_probability(ranking: &Ranking, scores: &ScoreVector) -> Result<f64> {
    ranking.check_against(scores.len())?;
    let w = scores.as_slice();
    let order = ranking.as_slice();
    let lse = suffix_log_sum_exp(order, w);
    let mut total = 0.0;
    for i in 0..order.len() - 1 {
        total += w[order[i]] - lse[i];
    }
    Ok(total.min(0.0))
}

/// Gradient of `-log P(π | exp(w))` with respect to every raw score.
///
/// For the item at position `p < n-1`, `g = Σ_{i ≤ p} exp(w - lse_i) - 1`;
/// the last item gets `Σ_{i < n-1} exp(w - lse_i)`. The inner sum is a
/// running log-sum-exp over `-lse_i`. Unranked items receive zero.
pub fn nll_gradient(ranking: &Ranking, scores: &ScoreVector) -> Result<Vec<f64>> {
    nll_with_gradient(ranking, scores).map(|(_, g)| g)
}

/// `-log P(π | exp(w))` together with its gradient, sharing one suffix pass.
pub fn nll_with_gradient(ranking: &Ranking, scores: &ScoreVector) -> Result<(f64, Vec<f64>)> {
    ranking.check_against(scores.len())?;
    let w = scores.as_slice();
    let order = ranking.as_slice();
    let lse = suffix_log_sum_exp(order, w);
    let mut grad = vec![0.0; w.len()];
    let mut log_p = 0.0;
    let mut inv_acc = f64::NEG_INFINITY;
    let last = order.len() - 1;
    for (p, &item) in order.iter().enumerate() {
        if p == last {
            // the final single-item suffix contributes exactly zero
            grad[item] = (w[item] + inv_acc).exp();
        } else {
            log_p += w[item] - lse[p];
            inv_acc = log_add_exp(inv_acc, -lse[p]);
            grad[item] = (w[item] + inv_acc).exp() - 1.0;
        }
    }
    Ok((-log_p.min(0.0), grad))
}

/// Draws the top `n` ranks of a PL ranking over all items.
///
/// Each score is perturbed by independent standard Gumbel noise and the `n`
/// largest perturbed items are returned in decreasing order. The result is an
/// exact draw from the PL distribution of the first `n` ranks; with `n = K`
/// it is a full PL ranking.
pub fn sample<R: Rng + ?Sized>(scores: &ScoreVector, n: usize, rng: &mut R) -> Result<Ranking> {
    if n > scores.len() {
        return Err(domain(format!(
            "cannot rank {n} items out of {}",
            scores.len()
        )));
    }
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel is valid");
    let mut keyed: Vec<(f64, usize)> = scores
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, w)| (w + gumbel.sample(rng), i))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Ranking(keyed.into_iter().take(n).map(|(_, i)| i).collect()))
}

/// Most probable full ranking: indices by decreasing score, ties by index.
pub fn mode(scores: &ScoreVector) -> Ranking {
    let w = scores.as_slice();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| match w[b].partial_cmp(&w[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    Ranking(order)
}

/// Probability of every full ranking, in lexicographic order of rankings.
pub fn enumerate(scores: &ScoreVector) -> Result<Vec<(Ranking, f64)>> {
    let k = scores.len();
    if k > MAX_ENUMERATE {
        return Err(capacity(format!(
            "refusing to enumerate {k}! rankings (limit {MAX_ENUMERATE} items)"
        )));
    }
    if k == 1 {
        return Ok(vec![(Ranking(vec![0]), 1.0)]);
    }
    (0..k)
        .permutations(k)
        .map(|order| {
            let ranking = Ranking(order);
            let p = log_probability(&ranking, scores)?.exp();
            Ok((ranking, p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sv(w: &[f64]) -> ScoreVector {
        ScoreVector::new(w.to_vec()).unwrap()
    }

    fn rk(o: &[usize]) -> Ranking {
        Ranking::new(o.to_vec()).unwrap()
    }

    #[test]
    fn two_items() {
        let lp = log_probability(&rk(&[0, 1]), &sv(&[2f64.ln(), 0.0])).unwrap();
        assert!((lp - (2.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn uniform_three_items() {
        for (r, _) in enumerate(&sv(&[0.0; 3])).unwrap() {
            let lp = log_probability(&r, &sv(&[0.0; 3])).unwrap();
            assert!((lp - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn three_items_by_hand() {
        let w = sv(&[3f64.ln(), 2f64.ln(), 0.0]);
        let lp = log_probability(&rk(&[0, 1, 2]), &w).unwrap();
        assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_rankings() {
        let w = sv(&[0.0, 1.0, 2.0]);
        assert!(log_probability(&Ranking(vec![0, 3]), &w).is_err());
        assert!(Ranking::new(vec![1, 1]).is_err());
        assert!(log_probability(&rk(&[1]), &w).is_err());
        assert!(nll_gradient(&Ranking(vec![0, 7]), &w).is_err());
        assert!(ScoreVector::new(vec![]).is_err());
        assert!(ScoreVector::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn gradient_two_items() {
        let g = nll_gradient(&rk(&[0, 1]), &sv(&[0.0, 0.0])).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_uniform_sums_to_zero() {
        let g = nll_gradient(&rk(&[2, 0, 1]), &sv(&[0.0; 3])).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_for_unranked() {
        let g = nll_gradient(&rk(&[3, 1]), &sv(&[0.3, -1.0, 2.0, 0.5])).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert!((g[1] + g[3]).abs() < 1e-12);
    }

    #[test]
    fn mode_sorts_descending() {
        assert_eq!(mode(&sv(&[0.5, 2.0, 1.0])), rk(&[1, 2, 0]));
        assert_eq!(mode(&sv(&[1.0, 1.0])), rk(&[0, 1]));
        assert_eq!(
            mode(&sv(&[0.5 + 7.0, 2.0 + 7.0, 1.0 + 7.0])),
            rk(&[1, 2, 0])
        );
    }

    #[test]
    fn enumerate_two_items() {
        let table = enumerate(&sv(&[2f64.ln(), 0.0])).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[0].0, rk(&[0, 1]));
        assert!((table[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((table[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn enumerate_guard() {
        assert!(matches!(
            enumerate(&sv(&[0.0; 9])),
            Err(crate::Error::Capacity(_))
        ));
    }

    #[test]
    fn sample_single_item() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample(&sv(&[4.0]), 1, &mut rng).unwrap(), rk(&[0]));
        assert!(sample(&sv(&[4.0]), 2, &mut rng).is_err());
    }

    #[test]
    fn sample_matches_enumeration() {
        let w = sv(&[2.0, 1.0, 0.0]);
        let table = enumerate(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 60_000;
        let mut counts = vec![0usize; table.len()];
        for _ in 0..draws {
            let r = sample(&w, 3, &mut rng).unwrap();
            counts[table.iter().position(|(t, _)| *t == r).unwrap()] += 1;
        }
        for ((_, p), c) in table.iter().zip(counts) {
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sigma);
        }
    }
}
