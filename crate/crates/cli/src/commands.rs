use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plrank::metrics::{self, EvalProtocol, Prediction, ReportRow};
use plrank::recovery::{self, DEPTH_FLOOR};
use plrank::sampler::{self, SamplerConfig};
use plrank::{
    generate_scene, DepthMap, Endian, Grid, LinearFeatureScorer, OptimizerKind, SceneKind,
    SceneSpec, Scorer, TabularScorer, TrainConfig,
};
use plrank::{pfm, train};

use crate::args::*;
use crate::manifest::RunManifest;

/// A failed run and the process exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or values outside a domain: exit 2.
    Usage(String),
    /// Unreadable, unwritable or malformed files: exit 3.
    Io(String),
    /// Valid inputs on which the computation has no answer: exit 1.
    Compute(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Compute(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Compute(m) => m,
        }
    }
}

impl From<plrank::Error> for Failure {
    fn from(e: plrank::Error) -> Self {
        use plrank::Error::*;
        let msg = e.to_string();
        match e {
            Domain(_) | Capacity(_) => Failure::Usage(msg),
            Io(_) | Format(_) => Failure::Io(msg),
            DegenerateFit(_) | UndefinedMetric(_) | NonIdentifiable(_) => Failure::Compute(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Attaches `path` to errors from reading or writing it.
fn at<T>(path: &Path, r: plrank::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Io(m) => Failure::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn record(command: &Command, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Outcome {
    let path = RunManifest::path_for(&outputs[0]);
    RunManifest::new(command, inputs, outputs)
        .write(&path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn run(command: &Command) -> Outcome {
    match command {
        Command::Generate(a) => generate(command, a),
        Command::Sample(a) => sample(command, a),
        Command::Train(a) => train_cmd(command, a),
        Command::Recover(a) => recover(command, a),
        Command::Eval(a) => eval(command, a),
        Command::Replay(a) => replay(a),
    }
}

fn generate(command: &Command, a: &GenerateArgs) -> Outcome {
    let spec = SceneSpec {
        kind: match a.kind {
            Kind::RampH => SceneKind::RampHorizontal,
            Kind::RampV => SceneKind::RampVertical,
            Kind::Bowl => SceneKind::RadialBowl,
            Kind::Steps => SceneKind::Steps,
            Kind::Smooth => SceneKind::RandomSmooth,
        },
        height: a.size.height,
        width: a.size.width,
        min_depth: a.range.min,
        max_depth: a.range.max,
        seed: a.seed,
    };
    let map = generate_scene(&spec)?;
    let endian = match a.endian {
        EndianArg::Little => Endian::Little,
        EndianArg::Big => Endian::Big,
    };
    at(&a.out, map.write_pfm(&a.out, endian))?;
    println!(
        "wrote {} {} scene ({} valid pixels) to {}",
        a.size,
        a.kind.to_possible_value_name(),
        map.valid_count(),
        a.out.display()
    );
    record(command, vec![], vec![a.out.clone(), pfm::mask_path(&a.out)])
}

fn sampler_config(a: &SamplerArgs) -> Result<SamplerConfig, Failure> {
    let cfg = SamplerConfig {
        ranking_size: a.ranking_size as usize,
        rankings_per_image: a.rankings_per_image as usize,
        oversample: a.oversample as usize,
        tau: a.tau,
        penalty: a.penalty,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sample(command: &Command, a: &SampleArgs) -> Outcome {
    let cfg = sampler_config(&a.sampler)?;
    let map = at(&a.map, DepthMap::read_pfm(&a.map))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = sampler::sample_rankings(&map, &cfg, &mut rng)?;
    write_file(&a.out, sampler::format_samples(&samples))?;
    println!("wrote {} rankings to {}", samples.len(), a.out.display());
    record(command, vec![a.map.clone()], vec![a.out.clone()])
}

fn train_cmd(command: &Command, a: &TrainArgs) -> Outcome {
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size as usize,
        optimizer: match a.optimizer {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        },
        seed: a.seed,
    };
    cfg.validate()?;
    let sampler_cfg = sampler_config(&a.sampler)?;
    let map = at(&a.scene, DepthMap::read_pfm(&a.scene))?;
    let (h, w) = (map.height(), map.width());

    let mut inputs = vec![a.scene.clone()];
    let fixed = match &a.rankings {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            inputs.push(path.clone());
            Some(at(path, sampler::parse_samples(&text))?)
        }
        None => None,
    };

    fn fit<S: Scorer + Sync>(
        scorer: S,
        fixed: Option<&[sampler::RankingSample]>,
        map: &DepthMap,
        sampler_cfg: &SamplerConfig,
        cfg: &TrainConfig,
    ) -> plrank::Result<train::Trained<S>> {
        match fixed {
            Some(samples) => train::train(scorer, samples, cfg),
            None => train::train_resampling(scorer, map, sampler_cfg, cfg),
        }
    }

    let fixed = fixed.as_deref();
    let trace_path = a
        .trace
        .clone()
        .unwrap_or_else(|| suffixed(&a.out, ".nll.csv"));
    let (trace_csv, first, last) = match a.scorer {
        ScorerKind::Tabular => {
            let t = fit(TabularScorer::zeros(h, w)?, fixed, &map, &sampler_cfg, &cfg)?;
            at(&a.out, t.scorer.write_pfm(&a.out, Endian::Little))?;
            (t.trace_csv(), t.trace[0], *t.trace.last().unwrap())
        }
        ScorerKind::Linear => {
            let t = fit(
                LinearFeatureScorer::zeros(h, w)?,
                fixed,
                &map,
                &sampler_cfg,
                &cfg,
            )?;
            at(&a.out, t.scorer.write_text(&a.out))?;
            (t.trace_csv(), t.trace[0], *t.trace.last().unwrap())
        }
    };
    write_file(&trace_path, trace_csv)?;
    println!(
        "trained {:?} scorer for {} epochs: mean NLL {first:.6} -> {last:.6}; wrote {}",
        a.scorer,
        cfg.epochs,
        a.out.display()
    );
    record(command, inputs, vec![a.out.clone(), trace_path])
}

/// Score grid of a scorer file on the frame of `truth`.
fn load_scores(path: &Path, truth: &DepthMap) -> Result<Grid, Failure> {
    let is_pfm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    let grid = if is_pfm {
        at(path, TabularScorer::read_pfm(path))?.score_grid()
    } else {
        at(
            path,
            LinearFeatureScorer::read_text(path, truth.height(), truth.width()),
        )?
        .score_grid()
    };
    if (grid.height(), grid.width()) != (truth.height(), truth.width()) {
        return Err(Failure::Usage(format!(
            "scorer is {}x{} but truth is {}x{}",
            grid.width(),
            grid.height(),
            truth.width(),
            truth.height()
        )));
    }
    Ok(grid)
}

fn recover(command: &Command, a: &RecoverArgs) -> Outcome {
    let truth = at(&a.truth, DepthMap::read_pfm(&a.truth))?;
    let scores = load_scores(&a.scorer, &truth)?;
    let fit = recovery::fit_affine(&scores, &truth)?;
    let depth = recovery::recover_depth(&scores, fit);
    let map = DepthMap::from_grid(&depth)?;
    at(&a.out, map.write_pfm(&a.out, Endian::Little))?;
    let fit_path = suffixed(&a.out, ".fit.json");
    let json = serde_json::json!({ "scale": fit.scale, "shift": fit.shift });
    write_file(
        &fit_path,
        serde_json::to_string_pretty(&json).unwrap() + "\n",
    )?;
    println!(
        "depth = {} * score + {}; wrote {}",
        fit.scale,
        fit.shift,
        a.out.display()
    );
    record(
        command,
        vec![a.scorer.clone(), a.truth.clone()],
        vec![a.out.clone(), pfm::mask_path(&a.out), fit_path],
    )
}

fn eval(command: &Command, a: &EvalArgs) -> Outcome {
    let truth = at(&a.truth, DepthMap::read_pfm(&a.truth))?;
    let image = at(&a.pred, pfm::read(&a.pred))?;
    if (image.height, image.width) != (truth.height(), truth.width()) {
        return Err(Failure::Usage(format!(
            "prediction is {}x{} but truth is {}x{}",
            image.width,
            image.height,
            truth.width(),
            truth.height()
        )));
    }
    let grid = Grid::new(
        image.height,
        image.width,
        image.data.iter().map(|&v| v as f64).collect(),
    )?;
    let pred = match a.orientation {
        OrientationArg::Depth => Prediction::depth(&grid),
        OrientationArg::Score => Prediction::score(&grid),
    };
    let metric = if a.align || a.orientation == OrientationArg::Score {
        let fit = recovery::fit_affine(&grid, &truth)?;
        recovery::recover_depth(&grid, fit)
    } else {
        grid.map(|v| v.max(DEPTH_FLOOR))
    };
    let capacity = match a.capacity {
        Some(c) => c,
        None => truth
            .max_valid_depth()
            .ok_or_else(|| Failure::Usage("truth has no valid pixels".into()))?,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let pairs = metrics::sample_eval_pairs(&truth, a.pairs, &mut rng)?;
    let sets = metrics::sample_eval_ranking_sets(&truth, a.ranking_sets, a.ranking_size, &mut rng)?;
    let protocol = EvalProtocol {
        pairs: &pairs,
        ranking_sets: &sets,
        capacity,
    };
    let report = metrics::evaluate(pred, &metric, &truth, &protocol)?;
    let label = |given: &Option<String>, path: &Path| {
        given.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    };
    let rows = [ReportRow {
        model: label(&a.model, &a.pred),
        dataset: label(&a.dataset, &a.truth),
        report,
    }];
    write_file(&a.csv, metrics::reports_csv(&rows))?;
    print!("{}", metrics::reports_table(&rows));
    record(
        command,
        vec![a.pred.clone(), a.truth.clone()],
        vec![a.csv.clone()],
    )
}

fn replay(a: &ReplayArgs) -> Outcome {
    let manifest = RunManifest::read(&a.manifest).map_err(Failure::Io)?;
    if let Command::Replay(_) = manifest.command {
        return Err(Failure::Usage(
            "a manifest cannot replay another replay".into(),
        ));
    }
    if !manifest.cwd.as_os_str().is_empty() {
        std::env::set_current_dir(&manifest.cwd)
            .map_err(|e| Failure::Io(format!("{}: {e}", manifest.cwd.display())))?;
    }
    run(&manifest.command)
}

trait PossibleValueName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> PossibleValueName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}
