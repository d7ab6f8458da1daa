//! Thurstone random-utility simulator.
//!
//! Latent depths `z_i` are observed through additive noise, `X_i = z_i + ε_i`,
//! and the observed ranking lists items by ascending `X` (closest first).
//!
//! With [`NoiseKind::Gumbel`] the error terms follow the reflected (minimum)
//! Gumbel law, `ε = -scale · G` with `G` standard Gumbel. Ascending order of
//! `X` is then descending order of `-z/scale + G`, so the rankings are exactly
//! PL with parameters `v_i = exp(-z_i / scale)`. [`NoiseKind::Gaussian`] is a
//! control: it yields a ranking law close to, but measurably different from,
//! PL.

use rand::Rng;
use rand_distr::{Distribution, Gumbel, Normal};

use crate::error::{domain, Result};
use crate::pl::{Ranking, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gumbel,
    Gaussian,
}

/// Latent values with their measurement-noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentUtilities {
    z: Vec<f64>,
    noise: NoiseKind,
    noise_scale: f64,
}

impl LatentUtilities {
    pub fn new(z: Vec<f64>, noise: NoiseKind, noise_scale: f64) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(domain("latent values must be finite"));
        }
        if !(noise_scale > 0.0 && noise_scale.is_finite()) {
            return Err(domain(format!(
                "noise scale must be positive, got {noise_scale}"
            )));
        }
        Ok(Self {
            z,
            noise,
            noise_scale,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// The same values moved by a constant.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(
            self.z.iter().map(|v| v + c).collect(),
            self.noise,
            self.noise_scale,
        )
    }

    /// Log-domain PL scores equivalent to Gumbel noise: `w_i = -z_i / scale`.
    pub fn pl_scores(&self) -> Result<ScoreVector> {
        ScoreVector::new(self.z.iter().map(|v| -v / self.noise_scale).collect())
    }
}

/// One noisy observation of the latent order.
pub fn sample_ranking<R: Rng + ?Sized>(u: &LatentUtilities, rng: &mut R) -> Result<Ranking> {
    if u.len() < 2 {
        return Err(domain("a ranking needs at least two latent values"));
    }
    let measured: Vec<f64> = match u.noise {
        NoiseKind::Gumbel => {
            let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel is valid");
            u.z.iter()
                .map(|z| z - u.noise_scale * g.sample(rng))
                .collect()
        }
        NoiseKind::Gaussian => {
            let n = Normal::new(0.0, u.noise_scale).expect("scale checked positive");
            u.z.iter().map(|z| z + n.sample(rng)).collect()
        }
    };
    let mut order: Vec<usize> = (0..measured.len()).collect();
    order.sort_by(|&a, &b| measured[a].total_cmp(&measured[b]).then(a.cmp(&b)));
    Ranking::new(order)
}

/// `count` independent draws of [`sample_ranking`].
pub fn dataset<R: Rng + ?Sized>(
    u: &LatentUtilities,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Ranking>> {
    if count == 0 {
        return Err(domain("dataset size must be at least one"));
    }
    (0..count).map(|_| sample_ranking(u, rng)).collect()
}
