//! CSV output. Every file has a fixed header; alignment files append one
//! column per alignment set.

use std::fs;
use std::path::Path;

use reprocs_core::pipeline::{ExperimentReport, FrameMetrics, Mode, Summary, TrackRecord};

use crate::config::mode_label;
use crate::error::CliError;

pub const SUMMARY_HEADER: [&str; 15] = [
    "case",
    "mode",
    "runs",
    "failed_runs",
    "frames",
    "failed_frames",
    "nmse_s",
    "nmse_l",
    "nmse_o",
    "mean_frame_nmse_s",
    "mean_support_size",
    "mean_misses",
    "mean_extras",
    "mean_predicted_misses",
    "mean_predicted_extras",
];

pub const FRAMES_HEADER: [&str; 24] = [
    "run",
    "seed",
    "mode",
    "t",
    "nmse_s",
    "nmse_l",
    "nmse_o",
    "err_s",
    "energy_s",
    "err_l",
    "energy_l",
    "err_o",
    "energy_o",
    "support_size",
    "misses",
    "extras",
    "predicted_misses",
    "predicted_extras",
    "rank",
    "epsilon",
    "iterations",
    "failed",
    "clipped",
    "subspace_updated",
];

pub const PLOT_NMSE_HEADER: [&str; 6] = ["mode", "t", "runs", "nmse_s", "nmse_l", "nmse_o"];

pub const PLOT_SUPPORT_HEADER: [&str; 7] = [
    "mode",
    "t",
    "mean_support_size",
    "mean_misses",
    "mean_extras",
    "mean_predicted_misses",
    "mean_predicted_extras",
];

pub const TRACKS_HEADER: [&str; 19] = [
    "run",
    "mode",
    "t",
    "object",
    "row",
    "row_velocity",
    "row_var",
    "row_cov",
    "row_velocity_var",
    "col",
    "col_velocity",
    "col_var",
    "col_cov",
    "col_velocity_var",
    "observed_row",
    "observed_col",
    "true_row",
    "true_col",
    "bound",
];

pub const ERRORS_HEADER: [&str; 4] = ["run", "seed", "mode", "error"];

/// Shortest round-trip scientific notation, with `-0` written as `0e0`.
fn num(x: f64) -> String {
    format!("{:e}", x + 0.0)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

/// Writes `rows` under `header` to `path`.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::output(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::output(path, e))
}

fn modes_with_runs(report: &ExperimentReport) -> Vec<(Mode, usize)> {
    report
        .modes()
        .into_iter()
        .map(|m| (m, report.runs.iter().filter(|r| r.mode == m).count()))
        .collect()
}

/// One summary row per mode.
pub fn summary_rows(case: &str, report: &ExperimentReport) -> Vec<Vec<String>> {
    modes_with_runs(report)
        .into_iter()
        .map(|(mode, runs)| {
            let s = report.summary(mode);
            let failed = report.runs.iter().filter(|r| r.mode == mode && r.error.is_some()).count();
            vec![
                case.to_string(),
                mode_label(mode).to_string(),
                runs.to_string(),
                failed.to_string(),
                s.frames.to_string(),
                s.failures.to_string(),
                num(s.nmse_s()),
                num(s.nmse_l()),
                num(s.nmse_o()),
                num(s.mean_frame_nmse_s()),
                num(s.mean_support_size()),
                num(s.mean_misses()),
                num(s.mean_extras()),
                num(s.mean_predicted_misses()),
                num(s.mean_predicted_extras()),
            ]
        })
        .collect()
}

fn frame_row(run: usize, seed: u64, mode: Mode, f: &FrameMetrics) -> Vec<String> {
    let mut row = vec![
        run.to_string(),
        seed.to_string(),
        mode_label(mode).to_string(),
        f.t.to_string(),
        num(f.nmse_s()),
        num(f.nmse_l()),
        num(f.nmse_o()),
        num(f.err_s),
        num(f.energy_s),
        num(f.err_l),
        num(f.energy_l),
        num(f.err_o),
        num(f.energy_o),
        f.support_size.to_string(),
        f.misses.to_string(),
        f.extras.to_string(),
        opt(f.predicted_misses),
        opt(f.predicted_extras),
        f.rank.to_string(),
        num(f.epsilon),
        f.iterations.to_string(),
        flag(f.failed),
        flag(f.clipped),
        flag(f.subspace_updated),
    ];
    row.extend(f.alignment.iter().map(|a| num(*a)));
    row
}

fn track_row(run: usize, mode: Mode, r: &TrackRecord) -> Vec<String> {
    let (obs_row, obs_col) = match r.observed {
        Some((a, b)) => (num(a), num(b)),
        None => (String::new(), String::new()),
    };
    vec![
        run.to_string(),
        mode_label(mode).to_string(),
        r.t.to_string(),
        r.object.to_string(),
        num(r.row.position),
        num(r.row.velocity),
        num(r.row.cov[0][0]),
        num(r.row.cov[0][1]),
        num(r.row.cov[1][1]),
        num(r.col.position),
        num(r.col.velocity),
        num(r.col.cov[0][0]),
        num(r.col.cov[0][1]),
        num(r.col.cov[1][1]),
        obs_row,
        obs_col,
        num(r.truth.0),
        num(r.truth.1),
        num(r.bound),
    ]
}

fn per_frame_rows(report: &ExperimentReport, t0: usize, row: impl Fn(&Summary) -> Vec<String>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (mode, _) in modes_with_runs(report) {
        for (k, s) in report.per_frame(mode).iter().enumerate() {
            let mut r = vec![mode_label(mode).to_string(), (t0 + k + 1).to_string()];
            r.extend(row(s));
            rows.push(r);
        }
    }
    rows
}

/// Writes every per-case file into `dir`: `summary.csv`, `frames.csv`,
/// `plot_nmse.csv`, `plot_support.csv`, `plot_alignment.csv`, `tracks.csv`
/// and, if any run failed, `errors.csv`.
pub fn write_case(dir: &Path, case: &str, t0: usize, report: &ExperimentReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    let align: Vec<String> = report.alignment_names.iter().map(|n| format!("align_{n}")).collect();

    write_csv(&dir.join("summary.csv"), &SUMMARY_HEADER, &summary_rows(case, report))?;

    let mut header: Vec<String> = FRAMES_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(align.iter().cloned());
    let rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .flat_map(|r| r.frames.iter().map(move |f| frame_row(r.run, r.seed, r.mode, f)))
        .collect();
    write_csv(&dir.join("frames.csv"), &header, &rows)?;

    let rows = per_frame_rows(report, t0, |s| {
        vec![s.frames.to_string(), num(s.nmse_s()), num(s.nmse_l()), num(s.nmse_o())]
    });
    write_csv(&dir.join("plot_nmse.csv"), &PLOT_NMSE_HEADER, &rows)?;

    let rows = per_frame_rows(report, t0, |s| {
        vec![
            num(s.mean_support_size()),
            num(s.mean_misses()),
            num(s.mean_extras()),
            num(s.mean_predicted_misses()),
            num(s.mean_predicted_extras()),
        ]
    });
    write_csv(&dir.join("plot_support.csv"), &PLOT_SUPPORT_HEADER, &rows)?;

    let mut header = vec!["mode".to_string(), "t".to_string()];
    header.extend(align);
    let rows = per_frame_rows(report, t0, |s| s.mean_alignment().into_iter().map(num).collect());
    write_csv(&dir.join("plot_alignment.csv"), &header, &rows)?;

    let rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .flat_map(|r| r.tracks.iter().map(move |tr| track_row(r.run, r.mode, tr)))
        .collect();
    write_csv(&dir.join("tracks.csv"), &TRACKS_HEADER, &rows)?;

    let rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .filter_map(|r| {
            let e = r.error.as_ref()?;
            Some(vec![r.run.to_string(), r.seed.to_string(), mode_label(r.mode).to_string(), e.to_string()])
        })
        .collect();
    if !rows.is_empty() {
        write_csv(&dir.join("errors.csv"), &ERRORS_HEADER, &rows)?;
    }
    Ok(())
}
