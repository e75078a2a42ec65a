//! Run configuration: TOML or JSON files, bundled presets and validation.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use smoothwave_core::dispersion::{
    brownian_dispersion, critical_point_bs, gamma_from_speed_bs, solve_gamma_power2, Branching, BrownianMode,
    Model, SpeedDecayResult,
};
use smoothwave_core::distmodel::{IncrementLaw, JumpLaw, LevySpec};
use smoothwave_core::particles::{Mechanism, ParticleSystemConfig};
use smoothwave_core::waves::Orientation;
use smoothwave_core::RngStream;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const PRESETS: [&str; 4] = ["fkpp-brownian", "bs-exp", "power2-exp", "power2-det"];

/// Evenly spaced evaluation grid, written `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + step * i as f64).collect()
    }

    /// `±20/γ` with 801 points.
    pub fn around(gamma: f64) -> Self {
        Self {
            lo: -20.0 / gamma,
            hi: 20.0 / gamma,
            n: 801,
        }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected lo:hi:n, got {s:?}"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower end {lo:?}"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper end {hi:?}"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad point count {n:?}"))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("need finite lo < hi, got {lo}:{hi}"));
        }
        if n < 2 {
            return Err(format!("need at least 2 points, got {n}"));
        }
        Ok(Self { lo, hi, n })
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

/// Jump law shorthand for the command line: `exp:RATE`, `det:VALUE`,
/// `gamma:SHAPE:RATE`.
pub fn parse_jumps(s: &str) -> Result<JumpLaw, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?} in {s:?}"));
    let law = match parts[..] {
        ["exp", rate] => JumpLaw::Exponential { rate: num(rate)? },
        ["det", value] => JumpLaw::Deterministic { value: num(value)? },
        ["gamma", shape, rate] => JumpLaw::Gamma {
            shape: num(shape)?,
            rate: num(rate)?,
        },
        _ => return Err(format!("expected exp:RATE, det:VALUE or gamma:SHAPE:RATE, got {s:?}")),
    };
    law.validate().map_err(|e| e.to_string())?;
    Ok(law)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    pub size: usize,
    pub iterations: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            size: 1_000_000,
            iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveConfig {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub alpha: f64,
    /// Outer Monte Carlo draws for the Laplace functional residual.
    pub laplace_draws: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            grid: None,
            alpha: 0.01,
            laplace_draws: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchingConfig {
    pub generations: u32,
    pub replicates: usize,
}

impl Default for BranchingConfig {
    fn default() -> Self {
        Self {
            generations: 12,
            replicates: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub snapshots: usize,
    pub copy_rate: f64,
    pub median_interval: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    /// CSV with a `position` column giving the initial particle positions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_csv: Option<PathBuf>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            horizon: 200.0,
            burn_in: 50.0,
            snapshots: 20,
            copy_rate: 1.0,
            median_interval: 0.5,
            max_events: None,
            initial_csv: None,
        }
    }
}

fn default_k() -> u32 {
    2
}

fn unit_exponential() -> JumpLaw {
    JumpLaw::exponential(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Model,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit_exponential")]
    pub jumps: JumpLaw,
    #[serde(default)]
    pub sigma2: f64,
    /// Independent jump rate of the BS model.
    #[serde(default)]
    pub lambda: f64,
    /// Wave speed; the critical speed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub wave: WaveConfig,
    #[serde(default)]
    pub branching: BranchingConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

/// Everything a run needs that follows from the configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub k: Branching,
    pub dispersion: SpeedDecayResult,
    pub increment: IncrementLaw,
    pub orientation: Orientation,
    pub mechanism: Mechanism,
    /// Particle motion between interactions.
    pub motion: LevySpec,
}

fn bad(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: msg.into(),
    }
}

impl Config {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            k: 2,
            seed: 0,
            jumps: unit_exponential(),
            sigma2: 0.0,
            lambda: 0.0,
            c: None,
            pool: PoolConfig::default(),
            wave: WaveConfig::default(),
            branching: BranchingConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let cfg = match name {
            "fkpp-brownian" => Self {
                sigma2: 1.0,
                c: Some(2.0),
                ..Self::new(Model::Brownian)
            },
            "bs-exp" => Self {
                lambda: 1.0,
                c: Some(4.5),
                ..Self::new(Model::BS)
            },
            "power2-exp" => Self::new(Model::Power2),
            "power2-det" => Self {
                jumps: JumpLaw::deterministic(1.0),
                sigma2: 1.0,
                ..Self::new(Model::Power2)
            },
            other => {
                return Err(bad(
                    "preset",
                    format!("unknown preset {other:?}; available: {}", PRESETS.join(", ")),
                ))
            }
        };
        Ok(cfg)
    }

    /// Reads TOML or JSON. A run manifest is accepted too and yields the
    /// configuration it recorded.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let cfg: Self = if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
            let body = match value.get("config") {
                Some(inner) if value.get("command").is_some() => inner.clone(),
                _ => value,
            };
            serde_json::from_value(body).map_err(|e| bad("config", format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| bad("config", format!("{}: {}", path.display(), e.message())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }

    /// Cross-field checks. Errors name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        Branching::new(self.k).map_err(|e| bad("k", e.to_string()))?;
        self.jumps.validate().map_err(|e| bad("jumps", e.to_string()))?;
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(bad("sigma2", format!("must be nonnegative, got {}", self.sigma2)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(bad("lambda", format!("must be nonnegative, got {}", self.lambda)));
        }
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(bad("c", format!("must be positive, got {c}")));
            }
        }
        match self.model {
            Model::Brownian => {
                if self.sigma2 <= 0.0 {
                    return Err(bad("sigma2", "the brownian model needs sigma2 > 0"));
                }
                if self.lambda != 0.0 {
                    return Err(bad("lambda", "only the bs model has independent jumps"));
                }
            }
            Model::BS => {
                if self.sigma2 != 0.0 {
                    return Err(bad("sigma2", "the bs model moves by jumps only; set sigma2 = 0"));
                }
            }
            Model::Power2 => {
                self.jumps
                    .validate_unit_mean()
                    .map_err(|_| bad("jumps", format!(
                        "the power-of-2 model requires mean-1 jumps (speed normalization c = 1), got mean {}",
                        self.jumps.mean()
                    )))?;
                if self.lambda != 0.0 {
                    return Err(bad("lambda", "only the bs model has independent jumps"));
                }
                if let Some(c) = self.c {
                    if c != 1.0 {
                        return Err(bad("c", format!("power-of-2 waves travel at speed 1, got {c}")));
                    }
                }
            }
            Model::GenericLevy => {
                return Err(bad("model", "generic_levy has no wave solver; use brownian, bs or power2"));
            }
        }
        if self.pool.size < smoothwave_core::smoothing::MIN_POOL {
            return Err(bad(
                "pool.size",
                format!("must be at least {}, got {}", smoothwave_core::smoothing::MIN_POOL, self.pool.size),
            ));
        }
        if self.pool.iterations == 0 {
            return Err(bad("pool.iterations", "must be at least 1"));
        }
        if self.wave.samples == 0 {
            return Err(bad("wave.samples", "must be positive"));
        }
        if !(self.wave.alpha > 0.0 && self.wave.alpha < 1.0) {
            return Err(bad("wave.alpha", format!("must lie in (0, 1), got {}", self.wave.alpha)));
        }
        if self.wave.laplace_draws < 2 {
            return Err(bad("wave.laplace_draws", "must be at least 2"));
        }
        if self.branching.generations > 25 {
            return Err(bad("branching.generations", "must be at most 25"));
        }
        if self.branching.replicates < 100 {
            return Err(bad("branching.replicates", "must be at least 100"));
        }
        let s = &self.simulation;
        if s.n < 2 {
            return Err(bad("simulation.n", "need at least 2 particles"));
        }
        if !(s.horizon.is_finite() && s.horizon > 0.0) {
            return Err(bad("simulation.horizon", "must be positive"));
        }
        if !(s.burn_in >= 0.0 && s.burn_in < s.horizon) {
            return Err(bad("simulation.burn_in", "must lie in [0, horizon)"));
        }
        if s.snapshots == 0 {
            return Err(bad("simulation.snapshots", "must be at least 1"));
        }
        if !(s.copy_rate.is_finite() && s.copy_rate > 0.0) {
            return Err(bad("simulation.copy_rate", "must be positive"));
        }
        if !(s.median_interval.is_finite() && s.median_interval > 0.0) {
            return Err(bad("simulation.median_interval", "must be positive"));
        }
        Ok(())
    }

    /// Solves the dispersion relation and builds the increment law.
    /// Numerical failures, such as a speed below the critical one, map to
    /// [`CliError::Numerical`].
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        self.validate()?;
        let k = Branching::new(self.k).map_err(|e| bad("k", e.to_string()))?;
        let (dispersion, increment, orientation, mechanism, motion) = match self.model {
            Model::Brownian => {
                let mode = self.c.map_or(BrownianMode::Minimal, BrownianMode::FromSpeed);
                let d = brownian_dispersion(self.sigma2, mode, k)?;
                let inc = IncrementLaw::sync(LevySpec::Brownian { sigma2: self.sigma2 }, d.c)?;
                let motion = LevySpec::Brownian { sigma2: self.sigma2 };
                (d, inc, Orientation::SyncRight, Mechanism::Sync, motion)
            }
            Model::BS => {
                let d = match self.c {
                    Some(c) => gamma_from_speed_bs(c, self.lambda, &self.jumps, k)?,
                    None => critical_point_bs(self.lambda, &self.jumps, k)?,
                };
                let levy = if self.lambda > 0.0 {
                    LevySpec::CompoundPoisson {
                        lambda: self.lambda,
                        jumps: self.jumps.clone(),
                    }
                } else {
                    LevySpec::None
                };
                let inc = IncrementLaw::sync(levy, d.c)?;
                (d, inc, Orientation::SyncRight, Mechanism::BsModel, LevySpec::None)
            }
            Model::Power2 => {
                let d = solve_gamma_power2(&self.jumps, self.sigma2, k)?;
                let inc = IncrementLaw::power2(self.jumps.clone(), self.sigma2)?;
                let motion = if self.sigma2 > 0.0 {
                    LevySpec::Brownian { sigma2: self.sigma2 }
                } else {
                    LevySpec::None
                };
                (d, inc, Orientation::Power2, Mechanism::Power2, motion)
            }
            Model::GenericLevy => unreachable!("rejected by validate"),
        };
        Ok(Resolved {
            k,
            dispersion,
            increment,
            orientation,
            mechanism,
            motion,
        })
    }

    pub fn grid(&self, gamma: f64) -> GridSpec {
        self.wave.grid.unwrap_or_else(|| GridSpec::around(gamma))
    }

    /// Particle system for the configured model. `initial` overrides the
    /// step initial condition.
    pub fn particle_config(&self, resolved: &Resolved, initial: Option<Vec<f64>>) -> ParticleSystemConfig {
        let s = &self.simulation;
        let mut p = ParticleSystemConfig::new(
            s.n,
            resolved.mechanism,
            self.jumps.clone(),
            s.horizon,
            self.stream().substream(4),
        );
        p.levy = resolved.motion.clone();
        p.jump_rate = if resolved.mechanism == Mechanism::BsModel { self.lambda } else { 0.0 };
        p.copy_rate = s.copy_rate;
        p.snapshot_times = ParticleSystemConfig::even_snapshots(s.burn_in, s.horizon, s.snapshots);
        p.median_interval = s.median_interval;
        if let Some(m) = s.max_events {
            p.max_events = m;
        }
        p.initial = initial;
        p
    }
}
