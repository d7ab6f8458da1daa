use std::fs;
use std::path::Path;
use std::process::{Command, Output};

/// Runs the binary in `dir` with whitespace-separated `args`.
fn plrank(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plrank"))
        .args(args.split_whitespace())
        .current_dir(dir)
        .env_remove("PLRANK_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = plrank(dir, args);
    assert!(
        out.status.success(),
        "{args} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &str) -> Option<i32> {
    plrank(dir, args).status.code()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn generate(dir: &Path) {
    ok(
        dir,
        "generate --kind ramp-h --size 64x64 --range 0:10 --seed 1 --out scene.pfm",
    );
}

/// `ordinal_error` column of a one-row eval CSV.
fn ordinal_error(dir: &Path, csv: &str) -> f64 {
    let text = fs::read_to_string(dir.join(csv)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "ordinal_error").unwrap();
    row[col].parse().unwrap()
}

#[test]
fn generate_writes_map_mask_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    for name in ["scene.pfm", "scene.pfm.mask.pgm", "scene.pfm.manifest.json"] {
        assert!(d.join(name).exists(), "{name} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(d, "scene.pfm.manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "generate");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["command"]["kind"], "ramp-h");
}

#[test]
fn same_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let first = read(d, "scene.pfm");
    generate(d);
    assert_eq!(first, read(d, "scene.pfm"));

    ok(d, "sample --map scene.pfm --seed 4 --out a.txt");
    ok(d, "sample --map scene.pfm --seed 4 --out b.txt");
    assert_eq!(read(d, "a.txt"), read(d, "b.txt"));
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let run = |seed_env: Option<&str>, extra: &str, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_plrank"));
        cmd.current_dir(d).env_remove("PLRANK_SEED");
        if let Some(s) = seed_env {
            cmd.env("PLRANK_SEED", s);
        }
        let status = cmd
            .args(["sample", "--map", "scene.pfm", "--out", out])
            .args(extra.split_whitespace())
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        read(d, out)
    };
    let by_env = run(Some("7"), "", "env.txt");
    let by_flag = run(None, "--seed 7", "flag.txt");
    let flag_wins = run(Some("99"), "--seed 7", "both.txt");
    assert_eq!(by_env, by_flag);
    assert_eq!(flag_wins, by_flag);
    assert_ne!(run(None, "", "zero.txt"), by_flag);
}

#[test]
fn default_sampling_writes_four_hundred_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    ok(d, "sample --map scene.pfm --out rankings.txt");
    let text = String::from_utf8(read(d, "rankings.txt")).unwrap();
    assert_eq!(text.lines().count(), 400);
    assert!(text
        .lines()
        .all(|l| l.split('|').next().unwrap().split(';').count() == 5));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);

    assert_eq!(code(d, "sample --map scene.pfm --n 1 --out x.txt"), Some(2));
    let bad_size = plrank(d, "generate --kind bowl --size 64by64 --out y.pfm");
    assert_eq!(bad_size.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_size.stderr).contains("Usage:"));
    assert_eq!(
        code(d, "generate --kind bowl --size 3x3 --out y.pfm"),
        Some(2)
    );
    assert_eq!(
        code(d, "sample --map scene.pfm --tau 0 --out x.txt"),
        Some(2)
    );
    assert_eq!(code(d, "train --scene scene.pfm --out w.pfm"), Some(2));
    assert_eq!(code(d, "sample --map missing.pfm --out x.txt"), Some(3));
    fs::write(d.join("colour.pfm"), b"PF\n1 1\n-1.0\n").unwrap();
    assert_eq!(code(d, "sample --map colour.pfm --out x.txt"), Some(3));
    assert_eq!(code(d, "replay missing.json"), Some(3));
    assert_eq!(
        code(d, "sample --map scene.pfm --out no/such/dir/x.txt"),
        Some(3)
    );
}

#[test]
fn end_to_end_ramp_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    ok(d, "sample --map scene.pfm --seed 2 --out rankings.txt");

    ok(
        d,
        "train --scene scene.pfm --rankings rankings.txt --scorer linear --seed 3 --out linear.txt",
    );
    ok(
        d,
        "recover --scorer linear.txt --truth scene.pfm --out linear_depth.pfm",
    );
    ok(
        d,
        "eval --pred linear_depth.pfm --truth scene.pfm --csv linear.csv",
    );
    let linear = ordinal_error(d, "linear.csv");
    assert!(linear <= 0.02, "linear scorer ordinal error {linear}");

    ok(
        d,
        "train --scene scene.pfm --resample --seed 3 --out tabular.pfm",
    );
    ok(
        d,
        "recover --scorer tabular.pfm --truth scene.pfm --out tabular_depth.pfm",
    );
    ok(
        d,
        "eval --pred tabular.pfm --truth scene.pfm --orientation score --csv tabular.csv",
    );
    let tabular = ordinal_error(d, "tabular.csv");
    assert!(tabular <= 0.02, "tabular scorer ordinal error {tabular}");

    let trace = String::from_utf8(read(d, "tabular.pfm.nll.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("epoch,mean_nll"));
    assert_eq!(trace.lines().count(), 502);
    let fit: serde_json::Value =
        serde_json::from_slice(&read(d, "tabular_depth.pfm.fit.json")).unwrap();
    assert!(fit["scale"].as_f64().unwrap() < 0.0);
}

#[test]
fn eval_prints_protocol_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    let table = ok(
        d,
        "eval --pred scene.pfm --truth scene.pfm --pairs 50000 --ranking-sets 100 \
         --ranking-size 500 --csv self.csv",
    );
    assert!(table.contains("scene nDCG"));
    assert_eq!(ordinal_error(d, "self.csv"), 0.0);
    let csv = String::from_utf8(read(d, "self.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "100");
}

#[test]
fn replay_reproduces_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    ok(
        d,
        "sample --map scene.pfm --seed 2 --n 4 --r 50 --out rankings.txt",
    );
    ok(
        d,
        "train --scene scene.pfm --rankings rankings.txt --epochs 20 --batch-size 16 --out w.pfm",
    );
    ok(
        d,
        "recover --scorer w.pfm --truth scene.pfm --out depth.pfm",
    );
    ok(
        d,
        "eval --pred depth.pfm --truth scene.pfm --pairs 2000 --ranking-sets 5 \
         --ranking-size 50 --csv eval.csv",
    );

    let outputs = [
        "scene.pfm",
        "scene.pfm.mask.pgm",
        "rankings.txt",
        "w.pfm",
        "w.pfm.nll.csv",
        "depth.pfm",
        "depth.pfm.fit.json",
        "eval.csv",
    ];
    let before: Vec<Vec<u8>> = outputs.iter().map(|o| read(d, o)).collect();
    for o in outputs {
        fs::remove_file(d.join(o)).unwrap();
    }
    let elsewhere = tempfile::tempdir().unwrap();
    for stage in [
        "scene.pfm",
        "rankings.txt",
        "w.pfm",
        "depth.pfm",
        "eval.csv",
    ] {
        let manifest = d.join(format!("{stage}.manifest.json"));
        ok(elsewhere.path(), &format!("replay {}", manifest.display()));
    }
    for (o, bytes) in outputs.iter().zip(&before) {
        assert_eq!(&read(d, o), bytes, "{o} differs after replay");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d);
    ok(d, "sample --map scene.pfm --seed 2 --r 60 --out r.txt");
    let train = "train --scene scene.pfm --rankings r.txt --epochs 30 --batch-size 8";
    ok(d, &format!("--threads 1 {train} --out one.pfm"));
    ok(d, &format!("--threads 3 {train} --out three.pfm"));
    assert_eq!(read(d, "one.pfm"), read(d, "three.pfm"));
}
