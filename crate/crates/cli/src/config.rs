//! Run configuration: a flat TOML table, every key optional.
//!
//! ```toml
//! seed = 7
//! n = 2
//! targets = "1..3"     # a single count or an inclusive range "lo..hi"
//! actions = 2
//! sensor = "range"
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use trackassign::baselines::DEFAULT_BUDGET;
use trackassign::motion::MotionConfig;
use trackassign::sensing::SensorConfig;
use trackassign::sim::{
    ComparisonSpec, ScenarioSpec, Solver, DEFAULT_ACTIONS, DEFAULT_SIGMA_INIT, DEFAULT_STEPS, DEFAULT_TARGET_SIGMA,
    DEFAULT_TARGET_SPEED,
};
use trackassign::{QualityMetric, SensorKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SensorChoice {
    RangeBearing,
    Range,
    Bearing,
}

impl From<SensorChoice> for SensorKind {
    fn from(s: SensorChoice) -> Self {
        match s {
            SensorChoice::RangeBearing => SensorKind::RangeBearing,
            SensorChoice::Range => SensorKind::RangeOnly,
            SensorChoice::Bearing => SensorKind::BearingOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    #[default]
    Trace,
    Logdet,
    Maxeig,
}

impl From<MetricChoice> for QualityMetric {
    fn from(m: MetricChoice) -> Self {
        match m {
            MetricChoice::Trace => QualityMetric::TraceReduction,
            MetricChoice::Logdet => QualityMetric::LogDetReduction,
            MetricChoice::Maxeig => QualityMetric::MaxEigReduction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Greedy,
    Exhaustive,
    Random,
}

impl From<SolverChoice> for Solver {
    fn from(s: SolverChoice) -> Self {
        match s {
            SolverChoice::Greedy => Solver::Greedy,
            SolverChoice::Exhaustive => Solver::Exhaustive,
            SolverChoice::Random => Solver::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Target count or inclusive range of counts, written `4` or `1..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetRange {
    pub lo: usize,
    pub hi: usize,
}

impl TargetRange {
    pub fn single(m: usize) -> Self {
        Self { lo: m, hi: m }
    }

    pub fn is_single(&self) -> bool {
        self.lo == self.hi
    }
}

impl fmt::Display for TargetRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_single() {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}..{}", self.lo, self.hi)
        }
    }
}

impl FromStr for TargetRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad target count {t:?}"));
        let r = match s.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                TargetRange {
                    lo: num(a)?,
                    hi: num(b)?,
                }
            }
            None => TargetRange::single(num(s)?),
        };
        if r.lo == 0 || r.lo > r.hi {
            return Err(format!("target range {s:?} is empty or starts at zero"));
        }
        Ok(r)
    }
}

impl Serialize for TargetRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_single() {
            s.serialize_u64(self.lo as u64)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for TargetRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TargetRange;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or a range \"lo..hi\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<TargetRange, E> {
                if v <= 0 {
                    return Err(E::custom("target count must be positive"));
                }
                Ok(TargetRange::single(v as usize))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<TargetRange, E> {
                if v == 0 {
                    return Err(E::custom("target count must be positive"));
                }
                Ok(TargetRange::single(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<TargetRange, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Robots per target tuple.
    pub n: usize,
    /// Defaults to `n * targets`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robots: Option<usize>,
    pub targets: TargetRange,
    /// First `actions` entries of the default action set.
    pub actions: usize,
    pub steps: usize,
    pub trials: usize,
    /// Defaults to range-bearing for `n = 1`, range for larger tuples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorChoice>,
    pub metric: MetricChoice,
    pub solver: SolverChoice,
    pub budget: u64,
    pub dt: f64,
    pub world_half_extent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_b: Option<f64>,
    pub sigma_init: f64,
    pub target_speed: f64,
    /// Shared turn rate; otherwise each target draws one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_omega: Option<f64>,
    pub target_sigma: f64,
    /// Compare only: closed-loop greedy steps before the compared epoch.
    pub warmup_steps: usize,
    /// Compare only: emit wall-clock columns (disable for reproducible files).
    pub timings: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        let motion = MotionConfig::default();
        Self {
            seed: 0,
            n: 1,
            robots: None,
            targets: TargetRange::single(4),
            actions: DEFAULT_ACTIONS.len(),
            steps: DEFAULT_STEPS,
            trials: 10,
            sensor: None,
            metric: MetricChoice::Trace,
            solver: SolverChoice::Greedy,
            budget: DEFAULT_BUDGET as u64,
            dt: motion.dt,
            world_half_extent: motion.world_half_extent,
            sigma_r0: None,
            kappa_r: None,
            sigma_b0: None,
            kappa_b: None,
            sigma_init: DEFAULT_SIGMA_INIT,
            target_speed: DEFAULT_TARGET_SPEED,
            target_omega: None,
            target_sigma: DEFAULT_TARGET_SIGMA,
            warmup_steps: 0,
            timings: true,
            out: None,
            format: Format::Csv,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn emit_config(cfg: &RunConfig) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    pub fn sensor_config(&self) -> SensorConfig {
        let kind = match self.sensor {
            Some(s) => s.into(),
            None if self.n == 1 => SensorKind::RangeBearing,
            None => SensorKind::RangeOnly,
        };
        let mut c = SensorConfig::with_kind(kind);
        if let Some(v) = self.sigma_r0 {
            c.sigma_r0 = v;
        }
        if let Some(v) = self.kappa_r {
            c.kappa_r = v;
        }
        if let Some(v) = self.sigma_b0 {
            c.sigma_b0 = v;
        }
        if let Some(v) = self.kappa_b {
            c.kappa_b = v;
        }
        c
    }

    pub fn motion_config(&self) -> MotionConfig {
        MotionConfig {
            dt: self.dt,
            world_half_extent: self.world_half_extent,
        }
    }

    fn check_actions(&self) -> Result<(), CliError> {
        if self.actions == 0 || self.actions > DEFAULT_ACTIONS.len() {
            return Err(CliError::Config(format!(
                "actions must be in 1..={}, got {}",
                DEFAULT_ACTIONS.len(),
                self.actions
            )));
        }
        if self.n == 0 {
            return Err(CliError::Config("n must be positive".into()));
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec, CliError> {
        self.check_actions()?;
        if !self.targets.is_single() {
            return Err(CliError::Config(format!(
                "track needs a single target count, got {}",
                self.targets
            )));
        }
        let m = self.targets.lo;
        let mut spec = ScenarioSpec::new(self.seed, self.n, self.robots.unwrap_or(self.n * m), m);
        spec.actions = self.actions;
        spec.sensor = self.sensor_config();
        spec.motion = self.motion_config();
        spec.metric = self.metric.into();
        spec.sigma_init = self.sigma_init;
        spec.target_speed = self.target_speed;
        spec.target_omega = self.target_omega;
        spec.target_sigma = self.target_sigma;
        Ok(spec)
    }

    pub fn comparison_spec(&self) -> Result<ComparisonSpec, CliError> {
        self.check_actions()?;
        if let Some(r) = self.robots {
            if r != self.n * self.targets.lo || !self.targets.is_single() {
                log::warn!("compare always uses n*M robots; ignoring robots = {r}");
            }
        }
        let mut spec = ComparisonSpec::new(self.n, self.targets.lo, self.targets.hi, self.trials);
        spec.base_seed = self.seed;
        spec.actions = self.actions;
        spec.sensor = self.sensor_config();
        spec.motion = self.motion_config();
        spec.metric = self.metric.into();
        spec.sigma_init = self.sigma_init;
        spec.target_sigma = self.target_sigma;
        spec.budget = self.budget as u128;
        spec.warmup_steps = self.warmup_steps;
        Ok(spec)
    }
}
