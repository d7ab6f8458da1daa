use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "plrank", version, about = "Listwise depth-ordering toolkit")]
pub struct Cli {
    /// Worker threads for parallel scoring and gradients.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Render a synthetic depth map.
    Generate(GenerateArgs),
    /// Draw informative ranking samples from a depth map.
    Sample(SampleArgs),
    /// Fit a scorer to ranking samples.
    Train(TrainArgs),
    /// Align a trained scorer to a ground-truth map.
    Recover(RecoverArgs),
    /// Score a prediction against a ground-truth map.
    Eval(EvalArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Sample(_) => "sample",
            Command::Train(_) => "train",
            Command::Recover(_) => "recover",
            Command::Eval(_) => "eval",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Generate(a) => Some(a.seed),
            Command::Sample(a) => Some(a.seed),
            Command::Train(a) => Some(a.seed),
            Command::Eval(a) => Some(a.seed),
            Command::Recover(_) | Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    RampH,
    RampV,
    Bowl,
    Steps,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndianArg {
    #[default]
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    Tabular,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationArg {
    /// Smaller values are closer.
    Depth,
    /// Larger values are closer.
    Score,
}

/// `WIDTHxHEIGHT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad dimension {v:?} in {s:?}"))
        };
        let size = Size {
            width: parse(w)?,
            height: parse(h)?,
        };
        if size.width < 4 || size.height < 4 {
            return Err(format!("size must be at least 4x4, got {s}"));
        }
        Ok(size)
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// `MIN:MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl FromStr for DepthRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad depth {v:?} in {s:?}"))
        };
        let range = DepthRange {
            min: parse(lo)?,
            max: parse(hi)?,
        };
        if !(range.min >= 0.0 && range.max > range.min && range.max.is_finite()) {
            return Err(format!("range must satisfy 0 <= MIN < MAX, got {s}"));
        }
        Ok(range)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value = "64x64")]
    pub size: Size,
    #[arg(long, default_value = "0:10")]
    pub range: DepthRange,
    #[arg(long, env = "PLRANK_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub endian: EndianArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SamplerArgs {
    /// Locations per ranking.
    #[arg(long = "n", default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub ranking_size: u64,
    /// Rankings kept per image.
    #[arg(long = "r", default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    pub rankings_per_image: u64,
    /// Candidate sets drawn per kept ranking.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub oversample: u64,
    /// Relative gap below which adjacent depths count as near-equal.
    #[arg(long, default_value_t = 0.03)]
    pub tau: f64,
    /// Score added per near-equal adjacent pair.
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub penalty: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, env = "PLRANK_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Depth map the rankings come from; fixes the scorer frame.
    #[arg(long)]
    pub scene: PathBuf,
    /// Fixed ranking file written by `sample`.
    #[arg(
        long,
        conflicts_with = "resample",
        required_unless_present = "resample"
    )]
    pub rankings: Option<PathBuf>,
    /// Draw fresh rankings from the scene every epoch.
    #[arg(long)]
    pub resample: bool,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum, default_value = "tabular")]
    pub scorer: ScorerKind,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, env = "PLRANK_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Scorer output: a PFM for `tabular`, a coefficient file for `linear`.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV; defaults to `<out>.nll.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RecoverArgs {
    /// Trained scorer; `.pfm` files are tabular, anything else linear.
    #[arg(long)]
    pub scorer: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Recovered depth PFM; the fit goes to `<out>.fit.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Prediction PFM, depth-valued or score-valued.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "depth")]
    pub orientation: OrientationArg,
    #[arg(long, default_value_t = 50_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 100)]
    pub ranking_sets: usize,
    #[arg(long, default_value_t = 500)]
    pub ranking_size: usize,
    /// RMSE normalizer; defaults to the largest valid truth depth.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Affinely align the prediction to the truth before RMSE and δ.
    /// Always on for score-oriented predictions.
    #[arg(long)]
    pub align: bool,
    #[arg(long, env = "PLRANK_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Row label; defaults to the prediction file stem.
    #[arg(long)]
    pub model: Option<String>,
    /// Column label; defaults to the truth file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// CSV report path.
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        assert_eq!(
            "64x32".parse::<Size>().unwrap(),
            Size {
                width: 64,
                height: 32
            }
        );
        assert_eq!("8X8".parse::<Size>().unwrap().to_string(), "8x8");
        for bad in ["64", "64x", "x64", "3x8", "-4x4", "64by64"] {
            assert!(bad.parse::<Size>().is_err(), "{bad}");
        }
    }

    #[test]
    fn range_parsing() {
        let r: DepthRange = "0:10".parse().unwrap();
        assert_eq!((r.min, r.max), (0.0, 10.0));
        for bad in ["10:0", "1:1", "-1:3", "0-10", "a:b", "0:inf"] {
            assert!(bad.parse::<DepthRange>().is_err(), "{bad}");
        }
    }

    #[test]
    fn sampler_flags_default_to_protocol_values() {
        let cli =
            Cli::try_parse_from(["plrank", "sample", "--map", "m.pfm", "--out", "r.txt"]).unwrap();
        let Command::Sample(a) = cli.command else {
            panic!("wrong subcommand")
        };
        let s = a.sampler;
        assert_eq!(
            (s.ranking_size, s.rankings_per_image, s.oversample),
            (5, 400, 5)
        );
        assert_eq!((s.tau, s.penalty), (0.03, -10.0));
    }

    #[test]
    fn train_needs_exactly_one_sample_source() {
        let base = ["plrank", "train", "--scene", "s.pfm", "--out", "w.pfm"];
        assert!(Cli::try_parse_from(base).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--resample"])).is_ok());
        assert!(
            Cli::try_parse_from(base.iter().chain(&["--rankings", "r.txt", "--resample"])).is_err()
        );
    }
}
