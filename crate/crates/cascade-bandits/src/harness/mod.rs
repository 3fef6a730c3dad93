//! Monte Carlo experiment harness: configuration, deterministic trials,
//! order-independent aggregation, and result files.

pub mod output;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{self, simulate_click, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::math;
use crate::policy::{
    CascadeDucb, CascadePolicy, CascadeSwUcb, GlrtCascade, IndexRule, OracleRestart, Restart,
    StationaryCascade,
};

/// Recognized policy names, as written in config files.
pub const POLICY_NAMES: &[&str] = &[
    "glrt-cascade-ucb",
    "glrt-cascade-klucb",
    "cascade-ucb1",
    "cascade-klucb",
    "cascade-ducb",
    "cascade-swucb",
    "oracle-cascade-ucb1",
    "oracle-cascade-klucb",
];

/// Full description of one experiment. Parsed from JSON or flat `key=value`
/// lines; unknown keys are rejected. Optional tuning fields default to the
/// standard rules in `resolve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "synthetic", "hard_instance", or "csv".
    pub environment: String,
    /// Seed for environment construction, shared by every trial.
    pub env_seed: u64,
    pub hard_l: usize,
    pub hard_k: usize,
    pub hard_n: usize,
    pub hard_t: u64,
    pub csv_path: Option<String>,
    /// List length for CSV environments; the file format does not carry it.
    pub csv_k: Option<usize>,
    /// Multiplier applied to every CSV probability before clipping to [0, 1].
    pub csv_scale: f64,
    pub policy: String,
    pub trials: usize,
    /// Per-trial streams are derived from this by `mix_seed`.
    pub base_seed: u64,
    pub output_dir: Option<String>,
    /// Cumulative regret is recorded every this many slots (plus at T).
    pub checkpoint_period: u64,
    /// Also emit a regret_curve.svg line plot.
    pub svg: bool,
    /// Exploration fraction; defaults to the rule selected by `p_rule`.
    pub p: Option<f64>,
    /// "experiment" (0.1 sqrt(N ln T / T)) or "corollary"
    /// (sqrt(N L ln T / T)).
    pub p_rule: String,
    /// Segment count N used by the tuning rules; defaults to the
    /// environment's true count.
    pub tuning_segments: Option<usize>,
    /// Detector confidence; defaults to 1/T.
    pub delta: Option<f64>,
    pub stride: usize,
    pub check_period: usize,
    pub xi: f64,
    /// Discount factor; defaults to 1 - 0.25/sqrt(T).
    pub gamma: Option<f64>,
    /// Sliding-window length; defaults to ceil(2 sqrt(T ln T)).
    pub window: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environment: "synthetic".into(),
            env_seed: 0,
            hard_l: 10,
            hard_k: 3,
            hard_n: 10,
            hard_t: 25000,
            csv_path: None,
            csv_k: None,
            csv_scale: 1.0,
            policy: "glrt-cascade-ucb".into(),
            trials: 100,
            base_seed: 0,
            output_dir: None,
            checkpoint_period: 100,
            svg: false,
            p: None,
            p_rule: "experiment".into(),
            tuning_segments: None,
            delta: None,
            stride: 1,
            check_period: 1,
            xi: 0.5,
            gamma: None,
            window: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document: JSON when it starts with `{`, otherwise
    /// flat `key=value` lines (blank lines and `#` comments ignored).
    pub fn from_str(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let value = if trimmed.starts_with('{') {
            serde_json::from_str(trimmed).map_err(|e| Error::Json {
                context: "parsing JSON config".into(),
                source: e,
            })?
        } else {
            let mut map = serde_json::Map::new();
            for (line_no, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, val) = line.split_once('=').ok_or_else(|| {
                    Error::config(format!("line {}: expected key=value, got {line:?}", line_no + 1))
                })?;
                // numbers and booleans keep their JSON type; everything else
                // is a string
                let parsed = serde_json::from_str::<serde_json::Value>(val.trim())
                    .ok()
                    .filter(|v| !v.is_string() && !v.is_array() && !v.is_object())
                    .unwrap_or_else(|| serde_json::Value::String(val.trim().to_string()));
                map.insert(key.trim().to_string(), parsed);
            }
            serde_json::Value::Object(map)
        };
        serde_json::from_value(value).map_err(|e| Error::Json {
            context: "interpreting config fields".into(),
            source: e,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            context: format!("reading config {}", path.display()),
            source: e,
        })?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.checkpoint_period < 1 {
            return Err(Error::config("checkpoint_period must be at least 1"));
        }
        if self.stride < 1 || self.check_period < 1 {
            return Err(Error::config("stride and check_period must be at least 1"));
        }
        match self.environment.as_str() {
            "synthetic" | "hard_instance" => {}
            "csv" => {
                if self.csv_path.is_none() {
                    return Err(Error::config("csv environment needs csv_path"));
                }
                match self.csv_k {
                    Some(k) if k >= 1 => {}
                    _ => return Err(Error::config("csv environment needs csv_k >= 1")),
                }
            }
            other => {
                return Err(Error::config(format!(
                    "unknown environment {other:?}; expected synthetic, hard_instance, or csv"
                )))
            }
        }
        if !POLICY_NAMES.contains(&self.policy.as_str()) {
            return Err(Error::config(format!(
                "unknown policy {:?}; expected one of {}",
                self.policy,
                POLICY_NAMES.join(", ")
            )));
        }
        if !matches!(self.p_rule.as_str(), "experiment" | "corollary") {
            return Err(Error::config(format!(
                "unknown p_rule {:?}; expected experiment or corollary",
                self.p_rule
            )));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config(format!("p = {p} outside (0, 1]")));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::config(format!("delta = {delta} outside (0, 1)")));
            }
        }
        if let Some(gamma) = self.gamma {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::config(format!("gamma = {gamma} outside (0, 1]")));
            }
        }
        if self.xi <= 0.0 {
            return Err(Error::config(format!("xi = {} must be positive", self.xi)));
        }
        if self.window == Some(0) {
            return Err(Error::config("window must be at least 1"));
        }
        if self.tuning_segments == Some(0) {
            return Err(Error::config("tuning_segments must be at least 1"));
        }
        Ok(())
    }

    pub fn build_environment(&self) -> Result<EnvironmentSpec> {
        match self.environment.as_str() {
            "synthetic" => Ok(env::make_synthetic(self.env_seed)),
            "hard_instance" => {
                env::make_hard_instance(self.hard_l, self.hard_k, self.hard_n, self.hard_t, self.env_seed)
            }
            "csv" => {
                let path = self.csv_path.as_ref().expect("validated");
                let k = self.csv_k.expect("validated");
                env::load_segments_csv(Path::new(path), k, self.csv_scale)
            }
            other => Err(Error::config(format!("unknown environment {other:?}"))),
        }
    }

    /// Fills every optional tuning parameter from its default rule against a
    /// concrete environment.
    pub fn resolve(&self, env: &EnvironmentSpec) -> Result<ResolvedParams> {
        let t = env.t() as f64;
        let ln_t = t.ln();
        let n = self.tuning_segments.unwrap_or(env.n_segments());
        let p = match self.p {
            Some(p) => p,
            None => match self.p_rule.as_str() {
                "experiment" => 0.1 * (n as f64 * ln_t / t).sqrt(),
                _ => (n as f64 * env.l() as f64 * ln_t / t).sqrt(),
            },
        };
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::config(format!(
                "resolved p = {p} outside (0, 1]; set p explicitly"
            )));
        }
        let delta = self.delta.unwrap_or(1.0 / t);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config(format!("resolved delta = {delta} outside (0, 1)")));
        }
        let gamma = self.gamma.unwrap_or(1.0 - 0.25 / t.sqrt());
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config(format!("resolved gamma = {gamma} outside (0, 1]")));
        }
        let window = self
            .window
            .unwrap_or_else(|| (2.0 * (t * ln_t).sqrt()).ceil() as u64)
            .max(1);
        Ok(ResolvedParams {
            p,
            delta,
            gamma,
            window,
            xi: self.xi,
            tuning_segments: n,
        })
    }

    pub fn build_policy(
        &self,
        env: &EnvironmentSpec,
        params: &ResolvedParams,
    ) -> Result<Box<dyn CascadePolicy + Send>> {
        let (l, k) = (env.l(), env.k());
        let glrt = |rule| {
            GlrtCascade::new(l, k, rule, params.p, params.delta, self.stride, self.check_period)
        };
        Ok(match self.policy.as_str() {
            "glrt-cascade-ucb" => Box::new(glrt(IndexRule::Ucb)?),
            "glrt-cascade-klucb" => Box::new(glrt(IndexRule::KlUcb)?),
            "cascade-ucb1" => Box::new(StationaryCascade::new(l, k, IndexRule::Ucb)),
            "cascade-klucb" => Box::new(StationaryCascade::new(l, k, IndexRule::KlUcb)),
            "cascade-ducb" => Box::new(CascadeDucb::new(l, k, params.gamma, params.xi)),
            "cascade-swucb" => Box::new(CascadeSwUcb::new(l, k, params.window, params.xi)),
            "oracle-cascade-ucb1" => Box::new(OracleRestart::new(
                StationaryCascade::new(l, k, IndexRule::Ucb),
                env.change_points(),
            )),
            "oracle-cascade-klucb" => Box::new(OracleRestart::new(
                StationaryCascade::new(l, k, IndexRule::KlUcb),
                env.change_points(),
            )),
            other => return Err(Error::config(format!("unknown policy {other:?}"))),
        })
    }
}

/// Concrete values of every tunable after defaults are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub p: f64,
    pub delta: f64,
    pub gamma: f64,
    pub window: u64,
    pub xi: f64,
    pub tuning_segments: usize,
}

/// One trial's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    /// Cumulative expected regret at each checkpoint, aligned with the
    /// experiment's checkpoint slots; the last entry is the T-step regret.
    pub checkpoint_regret: Vec<f64>,
    pub final_regret: f64,
    pub detections: Vec<Restart>,
}

/// SplitMix64 finalizer over `base_seed ^ (trial_index * golden gamma)`.
/// With base_seed 0 this reproduces the splitmix64 output stream, giving
/// well-separated per-trial seeds from consecutive indices.
pub fn mix_seed(base_seed: u64, trial_index: u64) -> u64 {
    let mut z = base_seed ^ trial_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Slots at which cumulative regret is recorded: every `period` slots, plus
/// `t` itself.
pub fn checkpoint_slots(t: u64, period: u64) -> Vec<u64> {
    assert!(period >= 1);
    let mut slots: Vec<u64> = (1..=t / period).map(|i| i * period).collect();
    if slots.last() != Some(&t) {
        slots.push(t);
    }
    slots
}

fn run_trial_with(
    env: &EnvironmentSpec,
    mut policy: Box<dyn CascadePolicy + Send>,
    checkpoints: &[u64],
    seed: u64,
) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segments = env.segments();
    let mut segment = 0usize;
    let mut cumulative = 0.0;
    let mut curve = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0;
    let mut detections = Vec::new();
    for t in 1..=env.t() {
        while segments[segment].end < t {
            segment += 1;
        }
        let list = policy.select(t, &mut rng);
        let reward =
            math::expected_reward(list.items(), &segments[segment].w).expect("policies emit valid lists");
        cumulative += (env.optimal_reward_in_segment(segment) - reward).max(0.0);
        let (fb, _, _) = simulate_click(&segments[segment].w, &list, &mut rng);
        if let Some(restart) = policy.update(t, &list, fb) {
            detections.push(restart);
        }
        if next_checkpoint < checkpoints.len() && t == checkpoints[next_checkpoint] {
            curve.push(cumulative);
            next_checkpoint += 1;
        }
    }
    TrialResult {
        seed,
        checkpoint_regret: curve,
        final_regret: cumulative,
        detections,
    }
}

/// Runs a single trial of the configured experiment. Deterministic in
/// (config, environment, trial_index).
pub fn run_trial(
    config: &ExperimentConfig,
    env: &EnvironmentSpec,
    trial_index: u64,
) -> Result<TrialResult> {
    let params = config.resolve(env)?;
    let policy = config.build_policy(env, &params)?;
    let checkpoints = checkpoint_slots(env.t(), config.checkpoint_period);
    Ok(run_trial_with(
        env,
        policy,
        &checkpoints,
        mix_seed(config.base_seed, trial_index),
    ))
}

/// Environment shape echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSummary {
    pub l: usize,
    pub k: usize,
    pub t: u64,
    pub segments: usize,
    pub change_points: Vec<u64>,
}

/// Detection statistics for one change-point: the first detection in the
/// window up to the next change counts; later ones are false alarms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub change_point: u64,
    pub detected: usize,
    pub missed: usize,
    pub mean_slot: Option<f64>,
    pub std_slot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseAlarms {
    pub total: u64,
    pub mean_per_trial: f64,
}

/// Aggregates over all trials, plus everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub version: String,
    pub config: ExperimentConfig,
    pub resolved: ResolvedParams,
    pub environment: EnvSummary,
    pub trials: usize,
    pub regret_mean: f64,
    pub regret_std: f64,
    pub checkpoints: Vec<u64>,
    pub curve_mean: Vec<f64>,
    pub curve_std: Vec<f64>,
    pub detections: Vec<DetectionSummary>,
    pub false_alarms: FalseAlarms,
}

/// Runs all trials (parallelized over `workers` threads) and aggregates.
/// The aggregation folds trials in index order, so the summary is identical
/// for any worker count.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentSummary> {
    config.validate()?;
    let env = config.build_environment()?;
    let params = config.resolve(&env)?;
    // surface policy construction errors before spawning workers
    drop(config.build_policy(&env, &params)?);
    let checkpoints = checkpoint_slots(env.t(), config.checkpoint_period);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("building worker pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|i| {
                let policy = config
                    .build_policy(&env, &params)
                    .expect("policy construction validated before the run");
                run_trial_with(&env, policy, &checkpoints, mix_seed(config.base_seed, i))
            })
            .collect()
    });
    Ok(aggregate(config.clone(), params, &env, checkpoints, &trials))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (0.0, 0.0),
        1 => (values[0], 0.0),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            (mean, var.sqrt())
        }
    }
}

fn aggregate(
    config: ExperimentConfig,
    resolved: ResolvedParams,
    env: &EnvironmentSpec,
    checkpoints: Vec<u64>,
    trials: &[TrialResult],
) -> ExperimentSummary {
    if trials.len() == 1 {
        log::warn!("trials = 1: standard deviations are reported as 0 by convention");
    }
    let finals: Vec<f64> = trials.iter().map(|tr| tr.final_regret).collect();
    let (regret_mean, regret_std) = mean_std(&finals);

    let mut curve_mean = Vec::with_capacity(checkpoints.len());
    let mut curve_std = Vec::with_capacity(checkpoints.len());
    for ci in 0..checkpoints.len() {
        let column: Vec<f64> = trials.iter().map(|tr| tr.checkpoint_regret[ci]).collect();
        let (m, s) = mean_std(&column);
        curve_mean.push(m);
        curve_std.push(s);
    }

    let change_points = env.change_points();
    let mut per_change: Vec<Vec<f64>> = vec![Vec::new(); change_points.len()];
    let mut false_alarms = 0u64;
    for trial in trials {
        let mut credited = vec![false; change_points.len()];
        for det in &trial.detections {
            // the window (change_points[i], change_points[i+1]] owns the slot
            let idx = change_points.partition_point(|&cp| cp < det.slot);
            if idx == 0 {
                false_alarms += 1; // before the first change
            } else if credited[idx - 1] {
                false_alarms += 1; // repeat within the same window
            } else {
                credited[idx - 1] = true;
                per_change[idx - 1].push(det.slot as f64);
            }
        }
    }
    let detections = change_points
        .iter()
        .zip(&per_change)
        .map(|(&cp, slots)| {
            let (mean, std) = mean_std(slots);
            DetectionSummary {
                change_point: cp,
                detected: slots.len(),
                missed: trials.len() - slots.len(),
                mean_slot: (!slots.is_empty()).then_some(mean),
                std_slot: (!slots.is_empty()).then_some(std),
            }
        })
        .collect();

    ExperimentSummary {
        version: concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION")).to_string(),
        config,
        resolved,
        environment: EnvSummary {
            l: env.l(),
            k: env.k(),
            t: env.t(),
            segments: env.n_segments(),
            change_points,
        },
        trials: trials.len(),
        regret_mean,
        regret_std,
        checkpoints,
        curve_mean,
        curve_std,
        detections,
        false_alarms: FalseAlarms {
            total: false_alarms,
            mean_per_trial: false_alarms as f64 / trials.len() as f64,
        },
    }
}
