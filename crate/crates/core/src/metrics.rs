//! Ordinal and metric evaluation of dense predictions against a depth map.
//!
//! Predictions come either as depth-like maps (smaller is closer) or as PL
//! score maps (larger is closer); [`Orientation`] tells the evaluator which,
//! and everything is compared in the closer-first convention of the truth.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::depth::{DepthMap, Grid, Location};
use crate::error::{capacity, domain, Error, Result};

/// Default number of location pairs for the ordinal error.
pub const DEFAULT_EVAL_PAIRS: usize = 50_000;
/// Default number of ranking sets for nDCG.
pub const DEFAULT_RANKING_SETS: usize = 100;
/// Default size of each nDCG ranking set.
pub const DEFAULT_RANKING_SET_SIZE: usize = 500;
/// Ratio threshold of the δ metric.
pub const DELTA_THRESHOLD: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OrdinalRelation {
    /// The first location is farther away.
    Farther = 1,
    Equal = 0,
    /// The first location is closer.
    Closer = -1,
}

impl OrdinalRelation {
    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn reversed(self) -> Self {
        match self {
            OrdinalRelation::Farther => OrdinalRelation::Closer,
            OrdinalRelation::Equal => OrdinalRelation::Equal,
            OrdinalRelation::Closer => OrdinalRelation::Farther,
        }
    }
}

/// `+1` when `a > b`, `-1` when `b > a`, `0` otherwise. With a positive
/// `threshold`, pairs whose ratio is below `1 + threshold` count as equal.
pub fn compare_depths(a: f64, b: f64, threshold: f64) -> OrdinalRelation {
    if threshold > 0.0 && crate::sampler::near_equal(a, b, threshold) {
        return OrdinalRelation::Equal;
    }
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => OrdinalRelation::Farther,
        Some(std::cmp::Ordering::Less) => OrdinalRelation::Closer,
        _ => OrdinalRelation::Equal,
    }
}

/// Ground-truth relation of two valid locations.
pub fn ordinal_relation(
    l1: Location,
    l2: Location,
    map: &DepthMap,
    threshold: f64,
) -> Result<OrdinalRelation> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(domain("threshold must be nonnegative"));
    }
    Ok(compare_depths(map.depth(l1)?, map.depth(l2)?, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Larger values are farther away (depth maps).
    Depth,
    /// Larger values are closer (PL scores).
    Score,
}

/// A dense prediction with its orientation.
#[derive(Debug, Clone, Copy)]
pub struct Prediction<'a> {
    pub grid: &'a Grid,
    pub orientation: Orientation,
}

impl<'a> Prediction<'a> {
    pub fn depth(grid: &'a Grid) -> Self {
        Self {
            grid,
            orientation: Orientation::Depth,
        }
    }

    pub fn score(grid: &'a Grid) -> Self {
        Self {
            grid,
            orientation: Orientation::Score,
        }
    }

    /// Value at `loc`, oriented so that smaller means closer.
    fn depth_like(&self, loc: Location) -> Result<f64> {
        let v = self.grid.get(loc)?;
        Ok(match self.orientation {
            Orientation::Depth => v,
            Orientation::Score => -v,
        })
    }

    fn check_frame(&self, truth: &DepthMap) -> Result<()> {
        if (self.grid.height(), self.grid.width()) != (truth.height(), truth.width()) {
            return Err(domain(format!(
                "prediction is {}x{} but truth is {}x{}",
                self.grid.height(),
                self.grid.width(),
                truth.height(),
                truth.width()
            )));
        }
        Ok(())
    }
}

/// Ordinal error and the number of pairs it was computed on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrdinalScore {
    pub error: f64,
    pub pairs_used: usize,
}

/// Fraction of pairs whose predicted relation differs from the truth.
/// Pairs that are equal in the truth are skipped.
pub fn ordinal_error(
    pred: Prediction<'_>,
    truth: &DepthMap,
    pairs: &[(Location, Location)],
) -> Result<OrdinalScore> {
    pred.check_frame(truth)?;
    let mut used = 0usize;
    let mut wrong = 0usize;
    for &(a, b) in pairs {
        let gt = ordinal_relation(a, b, truth, 0.0)?;
        if gt == OrdinalRelation::Equal {
            continue;
        }
        used += 1;
        let p = compare_depths(pred.depth_like(a)?, pred.depth_like(b)?, 0.0);
        if p != gt {
            wrong += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "every sampled pair is equal in the ground truth".into(),
        ));
    }
    Ok(OrdinalScore {
        error: wrong as f64 / used as f64,
        pairs_used: used,
    })
}

/// Relevance of a pixel at depth `d`: `1 / (d + 1)`.
pub fn relevance(d: f64) -> f64 {
    1.0 / (d + 1.0)
}

/// `Σ_i rel_i / log2(i + 1)` over relevances listed in rank order.
pub fn dcg(relevances: impl IntoIterator<Item = f64>) -> f64 {
    relevances
        .into_iter()
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG of one set: predicted closer-first order against the best order.
pub fn ndcg_of_set(pred: Prediction<'_>, truth: &DepthMap, set: &[Location]) -> Result<f64> {
    if set.len() < 2 {
        return Err(domain("an nDCG set needs at least two locations"));
    }
    let mut keyed = Vec::with_capacity(set.len());
    for (i, &loc) in set.iter().enumerate() {
        keyed.push((pred.depth_like(loc)?, truth.depth(loc)?, i));
    }
    let mut idx: Vec<usize> = keyed
        .iter()
        .map(|k| truth.index_of(set[k.2]))
        .collect::<Result<_>>()?;
    idx.sort_unstable();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return Err(domain("nDCG set repeats a location"));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let got = dcg(keyed.iter().map(|k| relevance(k.1)));
    let mut ideal: Vec<f64> = keyed.iter().map(|k| relevance(k.1)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    Ok(got / dcg(ideal))
}

/// Mean nDCG over `sets`.
pub fn ndcg(pred: Prediction<'_>, truth: &DepthMap, sets: &[Vec<Location>]) -> Result<f64> {
    pred.check_frame(truth)?;
    if sets.is_empty() {
        return Err(Error::UndefinedMetric("no ranking sets".into()));
    }
    let mut total = 0.0;
    for s in sets {
        total += ndcg_of_set(pred, truth, s)?;
    }
    Ok(total / sets.len() as f64)
}

/// RMSE between prediction and truth after dividing both by `capacity`,
/// over valid pixels.
pub fn rmse(pred: &Grid, truth: &DepthMap, capacity: f64) -> Result<f64> {
    Prediction::depth(pred).check_frame(truth)?;
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(domain(format!(
            "depth capacity must be positive, got {capacity}"
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in truth.valid_indices() {
        let d = pred.values()[i] / capacity - truth.values()[i] as f64 / capacity;
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no valid pixels".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// δ metric result: percentage above threshold and how many valid pixels
/// were skipped for having zero true depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaScore {
    pub percent: f64,
    pub pixels_used: usize,
    pub zero_depth_excluded: usize,
}

/// Percentage of valid pixels with `max(ẑ/z, z/ẑ) > 1.25`. Pixels with zero
/// true depth are excluded.
pub fn delta_metric(pred: &Grid, truth: &DepthMap) -> Result<DeltaScore> {
    Prediction::depth(pred).check_frame(truth)?;
    let mut over = 0usize;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for i in truth.valid_indices() {
        let z = truth.values()[i] as f64;
        if z == 0.0 {
            excluded += 1;
            continue;
        }
        let p = pred.values()[i];
        if p.is_nan() || p <= 0.0 {
            return Err(domain(format!("prediction at pixel {i} is not positive")));
        }
        used += 1;
        if (p / z).max(z / p) > DELTA_THRESHOLD {
            over += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "no valid pixels with positive depth".into(),
        ));
    }
    Ok(DeltaScore {
        percent: 100.0 * over as f64 / used as f64,
        pixels_used: used,
        zero_depth_excluded: excluded,
    })
}

fn valid_or_capacity(map: &DepthMap, need: usize) -> Result<Vec<usize>> {
    let valid = map.valid_indices();
    if valid.len() < need {
        return Err(capacity(format!(
            "need {need} valid pixels, map has {}",
            valid.len()
        )));
    }
    Ok(valid)
}

/// `count` pairs of distinct valid locations, uniform over valid pixels.
pub fn sample_eval_pairs<R: Rng + ?Sized>(
    map: &DepthMap,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(Location, Location)>> {
    let valid = valid_or_capacity(map, 2)?;
    Ok((0..count)
        .map(|_| {
            let ij = index::sample(rng, valid.len(), 2);
            (
                map.location_of(valid[ij.index(0)]),
                map.location_of(valid[ij.index(1)]),
            )
        })
        .collect())
}

/// `count` sets of `size` distinct valid locations.
pub fn sample_eval_ranking_sets<R: Rng + ?Sized>(
    map: &DepthMap,
    count: usize,
    size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Location>>> {
    if size < 2 {
        return Err(domain("ranking sets need at least two locations"));
    }
    let valid = valid_or_capacity(map, size)?;
    Ok((0..count)
        .map(|_| {
            index::sample(rng, valid.len(), size)
                .into_iter()
                .map(|k| map.location_of(valid[k]))
                .collect()
        })
        .collect())
}

/// One row of evaluation results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ordinal_error: f64,
    pub ndcg: f64,
    pub rmse: f64,
    /// Percentage in `[0, 100]`.
    pub delta_gt_1_25: f64,
    pub pair_count: usize,
    pub ranking_count: usize,
    pub zero_depth_excluded: usize,
}

/// Sample protocol for [`evaluate`].
pub struct EvalProtocol<'a> {
    pub pairs: &'a [(Location, Location)],
    pub ranking_sets: &'a [Vec<Location>],
    pub capacity: f64,
}

/// Full report: ordinal error and nDCG on `pred` in its own orientation,
/// RMSE and δ on the depth-valued `metric` map.
pub fn evaluate(
    pred: Prediction<'_>,
    metric: &Grid,
    truth: &DepthMap,
    protocol: &EvalProtocol<'_>,
) -> Result<EvalReport> {
    let ord = ordinal_error(pred, truth, protocol.pairs)?;
    let nd = ndcg(pred, truth, protocol.ranking_sets)?;
    let rm = rmse(metric, truth, protocol.capacity)?;
    let delta = delta_metric(metric, truth)?;
    Ok(EvalReport {
        ordinal_error: ord.error,
        ndcg: nd,
        rmse: rm,
        delta_gt_1_25: delta.percent,
        pair_count: ord.pairs_used,
        ranking_count: protocol.ranking_sets.len(),
        zero_depth_excluded: delta.zero_depth_excluded,
    })
}

const CSV_HEADER: &str =
    "model,dataset,ordinal_error,ndcg,rmse,delta_gt_1_25,pair_count,ranking_count,zero_depth_excluded";

/// A labelled report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub model: String,
    pub dataset: String,
    pub report: EvalReport,
}

pub fn reports_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.dataset,
            e.ordinal_error,
            e.ndcg,
            e.rmse,
            e.delta_gt_1_25,
            e.pair_count,
            e.ranking_count,
            e.zero_depth_excluded
        )
        .expect("writing to a String");
    }
    out
}

/// Plain-text table: one row per model, one column group per dataset with
/// ord / nDCG / RMSE / δ>1.25 columns.
pub fn reports_table(rows: &[ReportRow]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    const METRICS: [&str; 4] = ["ord", "nDCG", "RMSE", "δ>1.25"];
    let mut header = vec!["model".to_string()];
    for d in &datasets {
        for m in METRICS {
            header.push(format!("{d} {m}"));
        }
    }
    let mut body: Vec<Vec<String>> = Vec::new();
    for m in &models {
        let mut line = vec![m.to_string()];
        for d in &datasets {
            match rows.iter().find(|r| r.model == *m && r.dataset == *d) {
                Some(r) => {
                    let e = &r.report;
                    line.push(format!("{:.4}", e.ordinal_error));
                    line.push(format!("{:.4}", e.ndcg));
                    line.push(format!("{:.4}", e.rmse));
                    line.push(format!("{:.2}", e.delta_gt_1_25));
                }
                None => line.extend(std::iter::repeat_n("-".to_string(), METRICS.len())),
            }
        }
        body.push(line);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let render = |row: &[String]| {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| {
                let pad = w - cell.chars().count();
                if c == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        cells.join("  ").trim_end().to_string()
    };
    let mut out = render(&header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&render(row));
        out.push('\n');
    }
    out
}
