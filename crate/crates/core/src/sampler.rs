//! Informativeness-guided sampling of n-ary rankings from a depth map.
//!
//! For `R` rankings per map, `N · R` candidate sets of `n` valid pixels are
//! drawn uniformly. Each set is ordered by ground-truth depth and scored by
//! the sum of adjacent depth gaps along that order, with `penalty` added for
//! every adjacent pair whose depth ratio is below `1 + tau`. The `R` best
//! sets are kept.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::depth::{DepthMap, Location};
use crate::error::{capacity, domain, format, Error, Result};
use crate::pl::Ranking;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Items per ranking (`n`).
    pub ranking_size: usize,
    /// Rankings kept per map (`R`).
    pub rankings_per_image: usize,
    /// Candidate sets drawn per kept ranking (`N`).
    pub oversample: usize,
    /// Relative depth tolerance below which a pair counts as near-equal.
    pub tau: f64,
    /// Added to the informativeness once per near-equal adjacent pair.
    pub penalty: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            ranking_size: 5,
            rankings_per_image: 400,
            oversample: 5,
            tau: 0.03,
            penalty: -10.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ranking_size < 2 {
            return Err(domain("ranking size must be at least 2"));
        }
        if self.rankings_per_image < 1 {
            return Err(domain("at least one ranking per image is required"));
        }
        if self.oversample < 2 {
            return Err(domain("oversample factor must exceed 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(domain(format!("tau must be positive, got {}", self.tau)));
        }
        if !self.penalty.is_finite() {
            return Err(domain("penalty must be finite"));
        }
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.oversample * self.rankings_per_image
    }
}

/// Pixel locations in ground-truth order (closest first) with their score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingSample {
    pub locations: Vec<Location>,
    pub ground_truth: Ranking,
    pub informativeness: f64,
}

impl RankingSample {
    /// Locations listed closest first.
    pub fn ordered_locations(&self) -> Vec<Location> {
        self.ground_truth
            .as_slice()
            .iter()
            .map(|&i| self.locations[i])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Whether two depths are too close to order reliably.
///
/// A zero depth against a positive one is never near-equal; two zeros have
/// ratio one, which is near-equal for any positive `tau`.
pub fn near_equal(a: f64, b: f64, tau: f64) -> bool {
    let ratio = match (a == 0.0, b == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => return false,
        (false, false) => (a / b).max(b / a),
    };
    ratio < 1.0 + tau
}

/// Ground-truth ranking of `locations` and its informativeness.
///
/// Equal depths are ordered by ascending linear pixel index.
pub fn score_candidate(
    locations: &[Location],
    map: &DepthMap,
    cfg: &SamplerConfig,
) -> Result<(Ranking, f64)> {
    if locations.len() < 2 {
        return Err(domain("a candidate set needs at least two locations"));
    }
    let mut keyed = Vec::with_capacity(locations.len());
    for (i, &loc) in locations.iter().enumerate() {
        keyed.push((map.depth(loc)?, map.index_of(loc)?, i));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some(w) = keyed.windows(2).find(|w| w[0].1 == w[1].1) {
        let loc = map.location_of(w[0].1);
        return Err(domain(format!(
            "location ({}, {}) repeated in candidate set",
            loc.row, loc.col
        )));
    }
    let mut info = 0.0;
    for w in keyed.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        info += (b - a).abs();
        if near_equal(a, b, cfg.tau) {
            info += cfg.penalty;
        }
    }
    let ranking = Ranking::new(keyed.into_iter().map(|(_, _, i)| i).collect())?;
    Ok((ranking, info))
}

/// The seeded stream of `N · R` candidate sets, each `n` distinct valid
/// pixels drawn uniformly.
pub fn draw_candidates<R: Rng + ?Sized>(
    map: &DepthMap,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<Vec<Location>>> {
    cfg.validate()?;
    let valid = map.valid_indices();
    if valid.len() < cfg.ranking_size {
        return Err(capacity(format!(
            "map has {} valid pixels, ranking size is {}",
            valid.len(),
            cfg.ranking_size
        )));
    }
    Ok((0..cfg.candidate_count())
        .map(|_| {
            index::sample(rng, valid.len(), cfg.ranking_size)
                .into_iter()
                .map(|k| map.location_of(valid[k]))
                .collect()
        })
        .collect())
}

/// Scores candidates and keeps the `R` most informative, best first.
/// Equal scores keep stream order.
pub fn select_top(
    candidates: Vec<Vec<Location>>,
    map: &DepthMap,
    cfg: &SamplerConfig,
) -> Result<Vec<RankingSample>> {
    let scored: Vec<(Ranking, f64)> = candidates
        .par_iter()
        .map(|c| score_candidate(c, map, cfg))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
    order.truncate(cfg.rankings_per_image);
    let mut scored: Vec<Option<(Ranking, f64)>> = scored.into_iter().map(Some).collect();
    let mut candidates: Vec<Option<Vec<Location>>> = candidates.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .map(|k| {
            let (ground_truth, informativeness) = scored[k].take().expect("index used once");
            RankingSample {
                locations: candidates[k].take().expect("index used once"),
                ground_truth,
                informativeness,
            }
        })
        .collect())
}

/// Draws `N · R` candidate sets and returns the `R` most informative.
pub fn sample_rankings<R: Rng + ?Sized>(
    map: &DepthMap,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<RankingSample>> {
    let candidates = draw_candidates(map, cfg, rng)?;
    select_top(candidates, map, cfg)
}

/// One line per sample: `row,col;row,col;... | informativeness`, locations
/// closest first.
pub fn format_line(sample: &RankingSample) -> String {
    let mut line = String::new();
    for (i, loc) in sample.ordered_locations().iter().enumerate() {
        if i > 0 {
            line.push(';');
        }
        write!(line, "{},{}", loc.row, loc.col).expect("writing to a String");
    }
    write!(line, " | {}", sample.informativeness).expect("writing to a String");
    line
}

pub fn format_samples(samples: &[RankingSample]) -> String {
    samples.iter().map(|s| format_line(s) + "\n").collect()
}

impl FromStr for RankingSample {
    type Err = Error;

    /// Parses one line of the text format. Locations come back in ground
    /// truth order, so the ranking is the identity.
    fn from_str(line: &str) -> Result<Self> {
        let (locs, info) = line
            .split_once('|')
            .ok_or_else(|| format(format!("missing '|' in {line:?}")))?;
        let informativeness: f64 = info
            .trim()
            .parse()
            .map_err(|_| format(format!("bad informativeness {:?}", info.trim())))?;
        let mut locations = Vec::new();
        for pair in locs.trim().split(';') {
            let (r, c) = pair
                .split_once(',')
                .ok_or_else(|| format(format!("bad location {pair:?}")))?;
            let row = r
                .trim()
                .parse()
                .map_err(|_| format(format!("bad row {r:?}")))?;
            let col = c
                .trim()
                .parse()
                .map_err(|_| format(format!("bad column {c:?}")))?;
            locations.push(Location::new(row, col));
        }
        if locations.len() < 2 {
            return Err(format(format!("ranking needs two locations: {line:?}")));
        }
        let mut seen = locations.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != locations.len() {
            return Err(format(format!("repeated location in {line:?}")));
        }
        let n = locations.len();
        Ok(RankingSample {
            locations,
            ground_truth: Ranking::identity(n),
            informativeness,
        })
    }
}

/// Parses the text format, skipping blank lines.
pub fn parse_samples(text: &str) -> Result<Vec<RankingSample>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}
