use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use reprocs::frames::read_frames;
use reprocs::report::SUMMARY_HEADER;

fn reprocs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reprocs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = reprocs(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A tiny uniform-support scenario: `n = 8`, rank 3, `t0 + horizon` frames.
fn tiny(t0: usize, horizon: usize) -> Vec<String> {
    [
        "lowrank.n=8".to_string(),
        "lowrank.ladder_count=3".into(),
        "lowrank.events=[]".into(),
        "sparse.rows=8".into(),
        "sparse.size=2".into(),
        format!("run.t0={t0}"),
        format!("run.horizon={horizon}"),
    ]
    .into_iter()
    .flat_map(|s| ["--set".to_string(), s])
    .collect()
}

fn with<'a>(base: &[&'a str], extra: &'a [String]) -> Vec<&'a str> {
    base.iter().copied().chain(extra.iter().map(String::as_str)).collect()
}

#[test]
fn show_lists_presets_and_prints_toml() {
    let list = String::from_utf8(ok(&["show", "--list"]).stdout).unwrap();
    assert!(list.lines().any(|l| l == "twoblocks_modcs"));
    let text = String::from_utf8(ok(&["show", "table1_large", "--case", "9pct"]).stdout).unwrap();
    let cfg = reprocs::config::Config::from_toml(&text).unwrap();
    assert_eq!(cfg.name, "9pct");
    assert_eq!(code(&reprocs(&["show", "nope"])), 2);
}

#[test]
fn run_writes_summary_and_case_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["run", "table1_large", "--case", "36pct", "--mc-runs", "2", "--t0", "300", "--horizon", "6", "--out", p(dir.path())]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("36pct,reprocs,2,0,12,0,"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    let case = dir.path().join("36pct");
    for f in ["summary.csv", "frames.csv", "plot_nmse.csv", "plot_support.csv", "plot_alignment.csv", "tracks.csv", "config.toml"] {
        assert!(case.join(f).is_file(), "{f}");
    }
    assert!(!case.join("errors.csv").exists());
    // frames.csv: header plus one row per run and frame.
    assert_eq!(fs::read_to_string(case.join("frames.csv")).unwrap().lines().count(), 13);
}

#[test]
fn malformed_configs_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = String::from_utf8(ok(&["show", "table1_large", "--case", "9pct"]).stdout).unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, text.replace("mc_runs =", "mc_rnus =")).unwrap();
    let out = reprocs(&["run", "--config", p(&path), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.mc_rnus"));

    let out = reprocs(&["run", "table1_large", "--set", "recovery.a=0.5", "--set", "recovery.gamma=1", "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("recovery.gamma"));

    assert_eq!(code(&reprocs(&["run", "table1_large", "--case", "nope"])), 2);
    assert_eq!(code(&reprocs(&["run", "table1_large", "--jobs", "0", "--out", p(dir.path())])), 2);
    assert_eq!(code(&reprocs(&["run", "--config", p(&dir.path().join("missing.toml"))])), 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(k.to_string());
        ok(&["run", "table1_large", "--mc-runs", "10", "--seed", "7", "--out", p(&out)]);
        summaries.push(fs::read(out.join("summary.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
    let text = String::from_utf8(summaries.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn generate_writes_framed_binaries_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let set = tiny(2, 1);
    let mut contents = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(k.to_string());
        ok(&with(&["generate", "--spec", "table2_random", "--case", "small_25", "--out", p(&out)], &set));
        let files: Vec<Vec<u8>> = reprocs::cli::GENERATED_FILES.iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
        for bytes in &files {
            assert_eq!(bytes.len(), 16 + 3 * 8 * 8);
        }
        let m = read_frames(&out.join("M.bin")).unwrap();
        let l = read_frames(&out.join("L.bin")).unwrap();
        let s = read_frames(&out.join("S.bin")).unwrap();
        assert_eq!(m, l + s);
        let support = read_frames(&out.join("support.bin")).unwrap();
        assert_eq!(support.column(2).sum(), 2.0);
        assert_eq!(support.columns(0, 2).sum(), 0.0);
        contents.push(files);
    }
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn full_scale_blocks_have_full_support() {
    let dir = tempfile::tempdir().unwrap();
    let set: Vec<String> = ["run.t0=1", "run.horizon=3", "lowrank.ladder_count=4", "lowrank.events=[]"]
        .iter()
        .flat_map(|s| ["--set".to_string(), s.to_string()])
        .collect();
    ok(&with(&["generate", "--spec", "twoblocks_modcs", "--full-scale", "--out", p(dir.path())], &set));
    let support = read_frames(&dir.path().join("support.bin")).unwrap();
    assert_eq!(support.nrows(), 64 * 80);
    for t in 1..4 {
        assert_eq!(support.column(t).sum(), 2610.0, "frame {t}");
    }
}

#[test]
fn ingest_recovers_the_generator_rank() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&with(&["generate", "--spec", "table2_random", "--case", "small_25", "--out", p(&gen)], &tiny(40, 1)));
    let l = gen.join("L.bin");
    let cp = dir.path().join("basis.bin");
    let out = ok(&["ingest", "--frames", p(&l), "--train", "40", "--alpha0", "1e-6", "--out", p(&cp)]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "rank 3");
    let cp_csv = dir.path().join("basis.csv");
    ok(&["ingest", "--frames", p(&l), "--train", "40", "--alpha0", "1e-6", "--out", p(&cp_csv)]);
    assert!(fs::read_to_string(&cp_csv).unwrap().lines().count() > 1);

    assert_eq!(code(&reprocs(&["ingest", "--frames", p(&l), "--train", "0", "--alpha0", "1", "--out", p(&cp)])), 2);
    assert_eq!(code(&reprocs(&["ingest", "--frames", p(&l), "--train", "42", "--alpha0", "1", "--out", p(&cp)])), 2);
    let corrupt = dir.path().join("corrupt.bin");
    let mut bytes = fs::read(&l).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&corrupt, bytes).unwrap();
    let out = reprocs(&["ingest", "--frames", p(&corrupt), "--train", "4", "--alpha0", "1", "--out", p(&cp)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt.bin"));
}

#[test]
fn overlay_runs_on_recorded_frames_and_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let short = ["--set", "run.t0=30", "--set", "run.horizon=5"];
    let gen = dir.path().join("gen");
    ok(&[&["generate", "--spec", "overlay_realbg", "--out", p(&gen)][..], &short].concat());
    let cp = dir.path().join("basis.bin");
    ok(&["ingest", "--frames", p(&gen.join("L.bin")), "--train", "30", "--alpha0", "1", "--out", p(&cp)]);
    let bg = format!("lowrank.background_file={}", p(&gen.join("L.bin")));
    let ck = format!("subspace.checkpoint={}", p(&cp));
    let out = dir.path().join("run");
    ok(&[
        &["run", "overlay_realbg", "--mc-runs", "1", "--out", p(&out), "--set", &bg, "--set", &ck][..],
        &short,
    ]
    .concat());
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.contains("block,modcs,1,0,5,0,"));
}
