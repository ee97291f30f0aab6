use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gft::{RankRule, SignalMode};
use crate::secrecy::SolverConfig;

/// Environment variable overriding the data directory.
pub const DATA_DIR_ENV: &str = "GLS_DATA_DIR";

/// `$GLS_DATA_DIR`, or the `data` directory shipped with the crate.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => Path::new(env!("CARGO_MANIFEST_DIR")).join("data"),
    }
}

/// Absolute paths are kept; relative ones resolve against [`data_dir`].
pub fn resolve_data_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir().join(p)
    }
}

/// Physical dynamics driving the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Swing dynamics of a bus-data file (the 39-bus system by default).
    Swing39 {
        #[serde(default = "default_bus_file")]
        data: PathBuf,
        #[serde(default = "default_dt")]
        dt: f64,
        /// Std of the initial generator speed deviations.
        #[serde(default = "default_speed_sd")]
        initial_speed_sd: f64,
        /// Std of the initial load deviations.
        #[serde(default = "default_load_sd")]
        initial_load_sd: f64,
    },
    /// `x_{k+1} = U_r R U_rᵀ x_k` with random orthonormal `U_r` and rotation `R`,
    /// so every trace is exactly rank-`rank` bandlimited.
    Linear {
        nodes: usize,
        rank: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_dt")]
        dt: f64,
        /// Std of the spectral coefficients of the initial state.
        #[serde(default = "one")]
        state_scale: f64,
    },
}

/// Which (tx, rx) pairs are tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    /// Every ordered pair.
    All,
    /// Stratified random sample: transmitters cycle over a shuffled node list.
    Sample(usize),
    /// Explicit one-based pairs.
    List(Vec<(usize, usize)>),
}

/// Fixed or data-driven signal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Auto,
    Raw,
    TimeDifference,
}

impl ModeChoice {
    pub fn fixed(self) -> Option<SignalMode> {
        match self {
            ModeChoice::Auto => None,
            ModeChoice::Raw => Some(SignalMode::Raw),
            ModeChoice::TimeDifference => Some(SignalMode::TimeDifference),
        }
    }
}

/// Background Poisson load steps present during transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaturalConfig {
    /// Per second.
    pub rate: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveConfig {
    pub fractions: Vec<f64>,
    /// Eve's sensor variance; defaults to the legitimate one.
    #[serde(default)]
    pub noise_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveConfig {
    /// Per second.
    pub rates: Vec<f64>,
    #[serde(default = "default_jam_variance")]
    pub amplitude_variance: f64,
    /// One-based nodes; defaults to all load buses (all nodes for the linear model).
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    pub noise_variances: Vec<f64>,
}

/// A full experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub model: ModelConfig,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_training_runs")]
    pub training_runs: usize,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
    #[serde(default)]
    pub rank_rule: RankRule,
    #[serde(default = "default_mode")]
    pub signal_mode: ModeChoice,
    pub amplitude: f64,
    #[serde(default = "default_pairs")]
    pub pairs: PairSelection,
    pub noise_variances: Vec<f64>,
    #[serde(default)]
    pub natural: Option<NaturalConfig>,
    #[serde(default)]
    pub passive: Option<PassiveConfig>,
    #[serde(default)]
    pub active: Option<ActiveConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_bus_file() -> PathBuf {
    PathBuf::from("ieee39.csv")
}
fn default_dt() -> f64 {
    1e-3
}
fn default_speed_sd() -> f64 {
    0.5
}
fn default_load_sd() -> f64 {
    0.05
}
fn one() -> f64 {
    1.0
}
fn default_jam_variance() -> f64 {
    5.0
}
fn default_horizon() -> usize {
    5000
}
fn default_training_runs() -> usize {
    10
}
fn default_rank_tolerance() -> f64 {
    1e-3
}
fn default_mode() -> ModeChoice {
    ModeChoice::Raw
}
fn default_pairs() -> PairSelection {
    PairSelection::Sample(100)
}
fn default_trials() -> usize {
    20
}

fn check_variances(what: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{what} must not be empty")));
    }
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Config(format!("{what}: invalid value {bad}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingData(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.id.is_empty() {
            return cfg("id must not be empty".into());
        }
        match &self.model {
            ModelConfig::Swing39 {
                dt,
                initial_speed_sd,
                initial_load_sd,
                ..
            } => {
                if !(*dt > 0.0) || !(*initial_speed_sd >= 0.0) || !(*initial_load_sd >= 0.0) {
                    return cfg("swing39: dt must be positive and deviations non-negative".into());
                }
            }
            ModelConfig::Linear {
                nodes,
                rank,
                dt,
                state_scale,
                ..
            } => {
                if *nodes < 2 || *rank == 0 || rank > nodes {
                    return cfg(format!("linear: need 2 <= nodes and 1 <= rank <= nodes, got {nodes}, {rank}"));
                }
                if !(*dt > 0.0) || !(*state_scale > 0.0) {
                    return cfg("linear: dt and state_scale must be positive".into());
                }
            }
        }
        if self.horizon < 2 {
            return cfg("horizon must be at least 2".into());
        }
        if self.training_runs == 0 {
            return cfg("training_runs must be at least 1".into());
        }
        if self.trials == 0 {
            return cfg("trials must be at least 1".into());
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return cfg("rank_tolerance must lie in (0, 1)".into());
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return cfg("amplitude must be positive".into());
        }
        check_variances("noise_variances", &self.noise_variances)?;
        match &self.pairs {
            PairSelection::Sample(0) => return cfg("pairs.sample must be at least 1".into()),
            PairSelection::List(l) if l.is_empty() => return cfg("pairs.list must not be empty".into()),
            _ => {}
        }
        if let Some(n) = &self.natural {
            if !(n.rate >= 0.0 && n.rate.is_finite() && n.variance >= 0.0) {
                return cfg("natural: rate and variance must be non-negative".into());
            }
        }
        if let Some(p) = &self.passive {
            if p.fractions.is_empty() {
                return cfg("passive.fractions must not be empty".into());
            }
            if let Some(f) = p.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
                return cfg(format!("passive fraction {f} outside [0, 1]"));
            }
            if let Some(v) = p.noise_variance {
                check_variances("passive.noise_variance", &[v])?;
            }
        }
        if let Some(a) = &self.active {
            if a.rates.is_empty() {
                return cfg("active.rates must not be empty".into());
            }
            if a.rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return cfg("active rates must be non-negative".into());
            }
            if !(a.amplitude_variance >= 0.0) {
                return cfg("active.amplitude_variance must be non-negative".into());
            }
            if matches!(&a.targets, Some(t) if t.is_empty()) {
                return cfg("active.targets must not be empty".into());
            }
            check_variances("active.noise_variances", &a.noise_variances)?;
        }
        self.solver.validate()
    }
}
