//! TOML experiment configuration and its translation into an
//! [`ExperimentSpec`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use reprocs_core::pipeline::{AlignmentSet, Background, ExperimentSpec, Mode, PipelineConfig, Scenario, TrackingInit, TrackingSpec};
use reprocs_core::synth::{variance_ladder, ComposeMode, LowRankSpec, Motion, ObjectSpec, ScheduleEvent, SupportProcessSpec};
use reprocs_core::tracker::{FrameShape, IntensityRange, ObserveMode};
use reprocs_core::{InitThreshold, SolveConfig, UpdateParams, UpdateTrigger};

use crate::error::CliError;
use crate::checkpoint::read_checkpoint;
use crate::frames::read_frames;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub run: RunSection,
    pub lowrank: LowRankSection,
    pub sparse: SparseSection,
    pub subspace: SubspaceSection,
    pub recovery: RecoverySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Reprocs,
    Modcs,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Mode {
        match m {
            ModeName::Reprocs => Mode::Reprocs,
            ModeName::Modcs => Mode::ModCs,
        }
    }
}

pub fn mode_label(m: Mode) -> &'static str {
    match m {
        Mode::Reprocs => "reprocs",
        Mode::ModCs => "modcs",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub mc_runs: usize,
    /// Training frames.
    pub t0: usize,
    /// Test frames.
    pub horizon: usize,
    pub modes: Vec<ModeName>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    /// Frame offset from `t0`.
    pub after_t0: usize,
    /// Variances of new directions; they take the next unused basis columns.
    #[serde(default)]
    pub add: Vec<f64>,
    /// Ladder positions (0-based) that start to decay.
    #[serde(default)]
    pub decay: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LowRankSection {
    pub n: usize,
    /// Recorded background frames; replaces the synthetic model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_file: Option<PathBuf>,
    pub ladder_top: f64,
    pub ladder_ratio: f64,
    pub ladder_count: usize,
    pub f: f64,
    pub f_d: f64,
    pub theta: f64,
    /// Constant added to every synthetic background entry.
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub events: Vec<EventSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SparseKind {
    RandomWalk,
    ConstantVelocity,
    Uniform,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ComposeName {
    #[default]
    Additive,
    Overlay,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub half_height: usize,
    pub half_width: usize,
    /// `[row, col]`, 0-based.
    pub center: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SparseSection {
    pub kind: SparseKind,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub compose: ComposeName,
    #[serde(default)]
    pub p_up: f64,
    #[serde(default)]
    pub p_down: f64,
    #[serde(default)]
    pub p_left: f64,
    #[serde(default)]
    pub p_right: f64,
    /// Velocity-change variance of the generator, per axis.
    #[serde(default)]
    pub q_row: f64,
    #[serde(default)]
    pub q_col: f64,
    /// Uniform supports only.
    #[serde(default)]
    pub size: usize,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default)]
    pub objects: Vec<ObjectSection>,
}

impl SparseSection {
    pub fn min_magnitude(&self) -> f64 {
        match self.kind {
            SparseKind::Uniform => self.magnitude.abs(),
            _ => self.objects.iter().map(|o| o.magnitude.abs()).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriggerName {
    #[default]
    Periodic,
    Projected,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubspaceSection {
    /// Keep training singular values above this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    /// Or keep this percentage of the training energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Start from a stored basis instead of the training SVD; takes
    /// precedence over `alpha0` and `energy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub tau: usize,
    pub alpha: f64,
    #[serde(default)]
    pub trigger: TriggerName,
    #[serde(default)]
    pub projected_threshold: f64,
    #[serde(default)]
    pub subtract_mean: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObserveName {
    Centroid,
    #[default]
    Median,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    /// Absolute support threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Or a fraction of the smallest object magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "default_alpha_add")]
    pub alpha_add: f64,
    #[serde(default = "default_alpha_del")]
    pub alpha_del: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_epsilon_floor")]
    pub epsilon_floor: f64,
    #[serde(default)]
    pub observe: ObserveName,
}

fn default_alpha_add() -> f64 {
    0.5
}
fn default_alpha_del() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    SolveConfig::default().max_iters
}
fn default_tol() -> f64 {
    SolveConfig::default().tol
}
fn default_epsilon_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackingInitName {
    #[default]
    Truth,
    Warmup,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrackingSection {
    #[serde(default)]
    pub init: TrackingInitName,
    #[serde(default)]
    pub warmup_frames: usize,
    pub r: f64,
    #[serde(default)]
    pub q_row: f64,
    #[serde(default)]
    pub q_col: f64,
    /// One `[lo, hi)` band per object.
    pub intensity_ranges: Vec<[f64; 2]>,
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Config {
    /// Parses TOML text, naming the offending key on failure.
    pub fn from_toml(text: &str) -> Result<Config, CliError> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid("<document>", e.message().to_string()))?;
        Config::from_value(toml::Value::Table(value))
    }

    pub fn from_value(value: toml::Value) -> Result<Config, CliError> {
        serde_path_to_error::deserialize(value).map_err(|e| invalid(&e.path().to_string(), e.inner().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies `key.path=value` overrides; values parse as TOML and fall
    /// back to strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Config, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = toml::Value::try_from(self).expect("configuration serializes");
        for item in overrides {
            let (path, raw) = item.split_once('=').ok_or_else(|| invalid(item, "expected key=value"))?;
            let parsed = parse_scalar(raw.trim());
            let keys: Vec<&str> = path.trim().split('.').collect();
            let mut slot = &mut value;
            for (depth, key) in keys.iter().enumerate() {
                let table = slot
                    .as_table_mut()
                    .ok_or_else(|| invalid(&keys[..depth].join("."), "not a table"))?;
                if depth + 1 == keys.len() {
                    table.insert(key.to_string(), parsed.clone());
                    break;
                }
                slot = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        Config::from_value(value)
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.run.modes.iter().map(|&m| m.into()).collect()
    }

    /// `seed, seed + 1, …` for each Monte-Carlo run.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.mc_runs as u64).map(|i| self.run.seed.wrapping_add(i)).collect()
    }

    pub fn gamma(&self) -> Result<f64, CliError> {
        match (self.recovery.gamma, self.recovery.a) {
            (Some(g), None) => Ok(g),
            (None, Some(a)) => Ok(a * self.sparse.min_magnitude()),
            (Some(_), Some(_)) => Err(invalid("recovery.gamma", "set either gamma or a, not both")),
            (None, None) => Err(invalid("recovery.gamma", "one of gamma or a is required")),
        }
    }

    fn lowrank_spec(&self) -> Result<LowRankSpec, CliError> {
        let lr = &self.lowrank;
        let mut variances = variance_ladder(lr.ladder_top, lr.ladder_ratio, lr.ladder_count);
        let initial: Vec<usize> = (0..lr.ladder_count).collect();
        let mut schedule = Vec::new();
        for (k, e) in lr.events.iter().enumerate() {
            let first = variances.len();
            variances.extend_from_slice(&e.add);
            if let Some(&bad) = e.decay.iter().find(|&&d| d >= lr.ladder_count) {
                return Err(invalid(&format!("lowrank.events[{k}].decay"), format!("ladder position {bad} out of range")));
            }
            schedule.push(ScheduleEvent {
                time: self.run.t0 + e.after_t0,
                added: (first..variances.len()).collect(),
                decayed: e.decay.clone(),
            });
        }
        if variances.len() > lr.n {
            return Err(invalid("lowrank.ladder_count", "more latent directions than n"));
        }
        Ok(LowRankSpec {
            n: lr.n,
            variances,
            f: lr.f,
            f_d: lr.f_d,
            theta: lr.theta,
            initial,
            schedule,
        })
    }

    /// Generator basis columns added and decayed by each event.
    fn alignment_sets(&self) -> Vec<AlignmentSet> {
        let mut next = self.lowrank.ladder_count;
        let mut out = Vec::new();
        for (k, e) in self.lowrank.events.iter().enumerate() {
            if !e.add.is_empty() {
                out.push(AlignmentSet {
                    name: format!("added_{k}"),
                    columns: (next..next + e.add.len()).collect(),
                });
            }
            next += e.add.len();
            if !e.decay.is_empty() {
                out.push(AlignmentSet {
                    name: format!("decayed_{k}"),
                    columns: e.decay.clone(),
                });
            }
        }
        out
    }

    fn support_spec(&self) -> SupportProcessSpec {
        let sp = &self.sparse;
        let shape = FrameShape::new(sp.rows, sp.cols);
        let objects = sp
            .objects
            .iter()
            .map(|o| ObjectSpec {
                half_height: o.half_height,
                half_width: o.half_width,
                center: (o.center[0], o.center[1]),
                velocity: (o.velocity[0], o.velocity[1]),
                magnitude: o.magnitude,
            })
            .collect();
        match sp.kind {
            SparseKind::Uniform => SupportProcessSpec::Uniform {
                n: shape.len(),
                size: sp.size,
                magnitude: sp.magnitude,
            },
            SparseKind::RandomWalk => SupportProcessSpec::Objects {
                shape,
                motion: Motion::RandomWalk {
                    up: sp.p_up,
                    down: sp.p_down,
                    left: sp.p_left,
                    right: sp.p_right,
                },
                objects,
            },
            SparseKind::ConstantVelocity => SupportProcessSpec::Objects {
                shape,
                motion: Motion::ConstantVelocity {
                    q_row: sp.q_row,
                    q_col: sp.q_col,
                },
                objects,
            },
        }
    }

    fn background(&self, base_dir: &Path) -> Result<Background, CliError> {
        match &self.lowrank.background_file {
            Some(path) => {
                let frames = read_frames(&resolve(base_dir, path))?;
                if frames.nrows() != self.lowrank.n {
                    return Err(invalid("lowrank.n", format!("background file has frames of length {}", frames.nrows())));
                }
                Ok(Background::Recorded(Arc::new(frames)))
            }
            None => Ok(Background::Synthetic(self.lowrank_spec()?)),
        }
    }

    /// Builds the experiment; relative file paths resolve against `base_dir`.
    pub fn to_spec(&self, base_dir: &Path) -> Result<ExperimentSpec, CliError> {
        let sub = &self.subspace;
        // A checkpoint replaces the training SVD, so its threshold is unused.
        let init = match (sub.alpha0, sub.energy, &sub.checkpoint) {
            (_, _, Some(_)) => InitThreshold::Absolute(0.0),
            (Some(a), None, None) => InitThreshold::Absolute(a),
            (None, Some(p), None) => InitThreshold::Energy(p),
            _ => return Err(invalid("subspace.alpha0", "set exactly one of alpha0 or energy, or give a checkpoint")),
        };
        let trigger = match sub.trigger {
            TriggerName::Periodic => UpdateTrigger::Periodic,
            TriggerName::Projected => UpdateTrigger::ProjectedEnergy {
                threshold: sub.projected_threshold,
            },
        };
        let update = UpdateParams {
            tau: sub.tau,
            alpha: sub.alpha,
            trigger,
        };
        let initial = match &sub.checkpoint {
            Some(path) => Some(read_checkpoint(&resolve(base_dir, path))?.into_estimate(update)?),
            None => None,
        };
        let rec = &self.recovery;
        let pipeline = PipelineConfig {
            mode: Mode::Reprocs,
            gamma: self.gamma()?,
            alpha_add: rec.alpha_add,
            alpha_del: rec.alpha_del,
            solver: SolveConfig {
                max_iters: rec.max_iters,
                tol: rec.tol,
                ..SolveConfig::default()
            },
            observe: match rec.observe {
                ObserveName::Centroid => ObserveMode::Centroid,
                ObserveName::Median => ObserveMode::Median,
            },
            epsilon_floor: rec.epsilon_floor,
        };
        let tracking = match &self.tracking {
            Some(t) => Some(TrackingSpec {
                init: match t.init {
                    TrackingInitName::Truth => TrackingInit::Truth,
                    TrackingInitName::Warmup => TrackingInit::WarmUp { frames: t.warmup_frames },
                },
                r: t.r,
                q: (t.q_row, t.q_col),
                intensity_ranges: t
                    .intensity_ranges
                    .iter()
                    .enumerate()
                    .map(|(k, [lo, hi])| {
                        IntensityRange::new(*lo, *hi).map_err(|e| invalid(&format!("tracking.intensity_ranges[{k}]"), e.to_string()))
                    })
                    .collect::<Result<_, _>>()?,
            }),
            None => None,
        };
        let compose = match self.sparse.compose {
            ComposeName::Additive => ComposeMode::Additive,
            ComposeName::Overlay => ComposeMode::Overlay,
        };
        let background = self.background(base_dir)?;
        let alignment = match background {
            Background::Synthetic(_) => self.alignment_sets(),
            Background::Recorded(_) => Vec::new(),
        };
        let spec = ExperimentSpec {
            scenario: Scenario {
                background,
                background_mean: self.lowrank.mean,
                support: self.support_spec(),
                compose,
                psi: None,
                t0: self.run.t0,
                horizon: self.run.horizon,
            },
            init,
            subtract_mean: sub.subtract_mean,
            initial,
            update,
            pipeline,
            modes: self.modes(),
            tracking,
            alignment,
        };
        spec.validate().map_err(|e| invalid(&self.name, e.to_string()))?;
        Ok(spec)
    }
}

fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
