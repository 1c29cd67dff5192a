//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use reprocs_core::pipeline::FrameSource;
use reprocs_core::{InitThreshold, SubspaceEstimate, UpdateParams, UpdateTrigger};

use crate::checkpoint::{write_checkpoint, Checkpoint};
use crate::config::Config;
use crate::error::CliError;
use crate::frames::{read_frames, write_frames};
use crate::presets::{preset, Scale, PRESETS};
use crate::report::{summary_rows, write_case, write_csv, SUMMARY_HEADER};
use crate::runner::run_config;

#[derive(Debug, Parser)]
#[command(name = "reprocs", version, about = "Sparse + low-rank separation of frame sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo experiment and write CSV results.
    Run(RunArgs),
    /// Write the synthetic frames of one run as binary frame files.
    Generate(GenerateArgs),
    /// Estimate a background subspace from recorded frames.
    Ingest(IngestArgs),
    /// Print the configuration of a preset as TOML.
    Show(ShowArgs),
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Run only these cases of a preset.
    #[arg(long = "case", value_name = "NAME")]
    pub cases: Vec<String>,
    /// Use the full-size version of a preset.
    #[arg(long)]
    pub full_scale: bool,
    /// Override any configuration key, e.g. `run.t0=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Preset name; see `reprocs show --list`.
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    pub preset: Option<String>,
    /// TOML configuration file describing one case.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub select: Selection,
    #[arg(long)]
    pub mc_runs: Option<usize>,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Preset name or path to a TOML configuration.
    #[arg(long)]
    pub spec: String,
    #[command(flatten)]
    pub select: Selection,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Binary frame file.
    #[arg(long)]
    pub frames: PathBuf,
    /// Number of leading frames used for training.
    #[arg(long)]
    pub train: usize,
    /// Keep singular values above this.
    #[arg(long)]
    pub alpha0: f64,
    /// Update period stored in the checkpoint.
    #[arg(long, default_value_t = 10)]
    pub tau: usize,
    /// Update threshold stored in the checkpoint.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Checkpoint path; a `.csv` extension selects the text format.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    #[arg(required_unless_present = "list")]
    pub preset: Option<String>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub full_scale: bool,
    /// List preset names.
    #[arg(long)]
    pub list: bool,
}

fn config_error(key: &str, reason: impl ToString) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Cases named by a preset or a config file, with overrides applied. The
/// second value is the directory relative paths resolve against.
fn load_cases(source: &str, from_file: bool, select: &Selection) -> Result<(Vec<Config>, PathBuf), CliError> {
    let (cases, base) = if from_file || !PRESETS.contains(&source) {
        let path = Path::new(source);
        if !from_file && !path.exists() {
            return Err(config_error("preset", format!("unknown preset `{source}`; expected one of {}", PRESETS.join(", "))));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (vec![Config::from_toml(&text)?], base)
    } else {
        let scale = if select.full_scale { Scale::Full } else { Scale::Desk };
        (preset(source, scale).expect("listed preset"), PathBuf::from("."))
    };
    for name in &select.cases {
        if !cases.iter().any(|c| &c.name == name) {
            let names: Vec<&str> = cases.iter().map(|c| c.name.as_str()).collect();
            return Err(config_error("case", format!("unknown case `{name}`; expected one of {}", names.join(", "))));
        }
    }
    let mut out = Vec::new();
    for cfg in cases {
        if !select.cases.is_empty() && !select.cases.contains(&cfg.name) {
            continue;
        }
        let mut cfg = cfg.with_overrides(&select.overrides)?;
        if let Some(seed) = select.seed {
            cfg.run.seed = seed;
        }
        out.push(cfg);
    }
    Ok((out, base))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (source, from_file) = match (&args.preset, &args.config) {
        (_, Some(path)) => (path.to_string_lossy().into_owned(), true),
        (Some(name), None) => (name.clone(), false),
        (None, None) => return Err(config_error("preset", "give a preset or --config")),
    };
    let (mut cases, base) = load_cases(&source, from_file, &args.select)?;
    for cfg in &mut cases {
        if let Some(k) = args.mc_runs {
            cfg.run.mc_runs = k;
        }
        if let Some(t0) = args.t0 {
            cfg.run.t0 = t0;
        }
        if let Some(h) = args.horizon {
            cfg.run.horizon = h;
        }
    }
    // Validate every case before spending time on any of them.
    for cfg in &cases {
        cfg.to_spec(&base)?.validate()?;
    }
    if args.jobs == Some(0) {
        return Err(config_error("jobs", "must be at least 1"));
    }

    fs::create_dir_all(&args.out).map_err(|e| CliError::output(&args.out, e))?;
    let mut summary = Vec::new();
    let (mut failed, mut total) = (0, 0);
    for cfg in &cases {
        eprintln!("{}: {} runs", cfg.name, cfg.run.mc_runs);
        let report = run_config(cfg, &base, args.jobs)?;
        let dir = args.out.join(&cfg.name);
        write_case(&dir, &cfg.name, cfg.run.t0, &report)?;
        let config_path = dir.join("config.toml");
        fs::write(&config_path, cfg.to_toml()).map_err(|e| CliError::output(&config_path, e))?;
        let rows = summary_rows(&cfg.name, &report);
        for row in &rows {
            println!("{}", row.join(","));
        }
        summary.extend(rows);
        failed += report.failed_runs();
        total += report.runs.len();
    }
    write_csv(&args.out.join("summary.csv"), &SUMMARY_HEADER, &summary)?;
    if failed > 0 {
        return Err(CliError::RunsFailed { failed, total });
    }
    Ok(())
}

/// Frame files written by `generate`.
pub const GENERATED_FILES: [&str; 5] = ["M.bin", "L.bin", "S.bin", "O.bin", "support.bin"];

fn generate_case(cfg: &Config, base: &Path, dir: &Path) -> Result<(), CliError> {
    let spec = cfg.to_spec(base)?;
    spec.validate()?;
    let sc = &spec.scenario;
    let total = sc.t0 + sc.horizon;
    let n = sc.background.dim();
    let p = sc.support.dim();
    let mut m = DMatrix::zeros(n, total);
    let mut l = DMatrix::zeros(n, total);
    let mut s = DMatrix::zeros(p, total);
    let mut o = DMatrix::zeros(n, total);
    let mut support = DMatrix::zeros(p, total);
    let mut source = FrameSource::new(sc, cfg.run.seed)?;
    while let Some(f) = source.next_frame()? {
        let k = f.t - 1;
        m.set_column(k, &f.m);
        l.set_column(k, &f.l);
        s.set_column(k, &f.s);
        o.set_column(k, &f.foreground());
        for i in f.support.iter() {
            support[(i, k)] = 1.0;
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    for (name, data) in GENERATED_FILES.iter().zip([&m, &l, &s, &o, &support]) {
        write_frames(&dir.join(name), data)?;
    }
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(|e| CliError::output(&config_path, e))
}

/// A single selected case is written to `out`; several go to `out/<case>`.
pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let from_file = !PRESETS.contains(&args.spec.as_str());
    let (cases, base) = load_cases(&args.spec, from_file, &args.select)?;
    let single = cases.len() == 1;
    for cfg in &cases {
        let dir = if single { args.out.clone() } else { args.out.join(&cfg.name) };
        generate_case(cfg, &base, &dir)?;
        eprintln!("{}: wrote {}", cfg.name, dir.display());
    }
    Ok(())
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    if args.train == 0 {
        return Err(config_error("train", "must be at least 1"));
    }
    let frames = read_frames(&args.frames)?;
    if args.train > frames.ncols() {
        return Err(config_error(
            "train",
            format!("{} training frames requested but the file holds {}", args.train, frames.ncols()),
        ));
    }
    let params = UpdateParams {
        tau: args.tau,
        alpha: args.alpha,
        trigger: UpdateTrigger::Periodic,
    };
    let training = frames.columns(0, args.train).into_owned();
    let est = SubspaceEstimate::init_truncated_svd(&training, InitThreshold::Absolute(args.alpha0), true, params)?;
    write_checkpoint(&args.out, &Checkpoint::from_estimate(&est))?;
    println!("rank {}", est.rank());
    Ok(())
}

pub fn cmd_show(args: &ShowArgs) -> Result<(), CliError> {
    if args.list {
        for name in PRESETS {
            println!("{name}");
        }
        return Ok(());
    }
    let name = args.preset.as_deref().unwrap_or_default();
    let select = Selection {
        cases: args.case.iter().cloned().collect(),
        full_scale: args.full_scale,
        overrides: Vec::new(),
        seed: None,
    };
    if !PRESETS.contains(&name) {
        return Err(config_error("preset", format!("unknown preset `{name}`")));
    }
    let (cases, _) = load_cases(name, false, &select)?;
    for (k, cfg) in cases.iter().enumerate() {
        if k > 0 {
            println!();
        }
        print!("{}", cfg.to_toml());
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Show(a) => cmd_show(a),
    }
}
