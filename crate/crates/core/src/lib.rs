//! Plackett-Luce listwise ranking for depth ordering.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`pl`]: exact PL probabilities, NLL gradients, sampling and mode.
//! - [`rum`]: a Thurstone random-utility simulator for noisy rankings.
//! - [`depth`] and [`pfm`]: depth maps, synthetic scenes and PFM/PGM I/O.
//! - [`sampler`]: informativeness-guided sampling of training rankings.
//! - [`scorer`] and [`train`]: pixel scorers fitted by NLL minimization.
//! - [`recovery`]: affine recovery of metric depth from scores.
//! - [`metrics`]: ordinal error, nDCG, RMSE and the δ > 1.25 ratio metric.

pub mod depth;
mod error;
pub mod metrics;
pub mod pfm;
pub mod pl;
pub mod recovery;
pub mod rum;
pub mod sampler;
pub mod scorer;
pub mod train;

pub use depth::{generate_scene, DepthMap, Grid, Location, SceneKind, SceneSpec};
pub use error::{Error, Result};
pub use pfm::Endian;
pub use pl::{Ranking, ScoreVector};
pub use recovery::AffineFit;
pub use sampler::{RankingSample, SamplerConfig};
pub use scorer::{LinearFeatureScorer, Scorer, TabularScorer};
pub use train::{OptimizerKind, TrainConfig};
