//! Command-line entry point.

use crate::config::{parse_jumps, Config, GridSpec};
use crate::error::CliError;
use crate::exec::Workers;
use crate::output::{now, read_columns, read_snapshots, ManifestInfo, OutDir};
use crate::stages;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smoothwave_core::dispersion::{
    brownian_dispersion, critical_point_bs, gamma_from_speed_bs, regime_classify, solve_gamma_power2,
    speed_from_gamma_bs, Branching, BrownianMode, Model, SpeedDecayResult,
};
use smoothwave_core::distmodel::{IncrementLaw, JumpLaw, LevySpec};
use smoothwave_core::particles::centered_profile;
use smoothwave_core::waves::{profile_eval, Orientation, WaveProfile};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "smoothwave", version, about = "Travelling waves of mean-field particle systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// TOML or JSON configuration; a manifest.json from an earlier run also works
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Bundled configuration: fkpp-brownian, bs-exp, power2-exp, power2-det
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Wave samples drawn for sampling and verification
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long = "pool-size", global = true)]
    pub pool_size: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// Profile grid as lo:hi:n
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    /// exp:RATE, det:VALUE or gamma:SHAPE:RATE
    #[arg(long, global = true, value_parser = parse_jumps)]
    pub jumps: Option<JumpLaw>,
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Wave speed
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Particles per interaction
    #[arg(long, global = true)]
    pub k: Option<u32>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelArg {
    Brownian,
    Bs,
    Power2,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Brownian => Model::Brownian,
            ModelArg::Bs => Model::BS,
            ModelArg::Power2 => Model::Power2,
        }
    }
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Decay rate for the configured model and speed
    SolveGamma,
    /// Critical decay rate and minimal speed
    CriticalSpeed,
    /// Speed-decay pair from --gamma, --c or the model default
    Dispersion {
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Pool of martingale limits (pool.csv, pool.json)
    SamplePool,
    /// Wave profile on a grid (profile.csv, profile.json)
    WaveProfile {
        /// Reuse a pool.csv instead of iterating a new pool
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Draws from the wave (xi.csv)
    SampleWave {
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Fixed-point and consistency checks (verify.json)
    Verify {
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// N-particle simulation (snapshots.csv, median_path.csv, simulate.json)
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long = "burn-in")]
        burn_in: Option<f64>,
        /// CSV with a position column
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Shift-aligned distance between simulated snapshots and a profile
    Compare {
        /// snapshots.csv from simulate
        #[arg(long)]
        empirical: PathBuf,
        /// profile.csv from wave-profile
        #[arg(long)]
        profile: PathBuf,
        /// Earliest snapshot time used
        #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        to: f64,
    },
    /// Dispersion, pool, profile, verification, simulation and comparison
    Pipeline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveGamma => "solve-gamma",
            Command::CriticalSpeed => "critical-speed",
            Command::Dispersion { .. } => "dispersion",
            Command::SamplePool => "sample-pool",
            Command::WaveProfile { .. } => "wave-profile",
            Command::SampleWave { .. } => "sample-wave",
            Command::Verify { .. } => "verify",
            Command::Simulate { .. } => "simulate",
            Command::Compare { .. } => "compare",
            Command::Pipeline => "pipeline",
        }
    }
}

fn bad(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        message: msg.into(),
    }
}

/// Base configuration from --config, --preset or --model, then flag overrides.
pub fn build_config(opts: &Opts) -> Result<Config, CliError> {
    let mut cfg = match (&opts.config, &opts.preset) {
        (Some(_), Some(_)) => return Err(bad("preset", "cannot be combined with --config")),
        (Some(path), None) => Config::load(path)?,
        (None, Some(name)) => Config::preset(name)?,
        (None, None) => match opts.model {
            Some(m) => Config::new(m.into()),
            None => return Err(bad("model", "required: pass --model, --preset or --config")),
        },
    };
    if let Some(m) = opts.model {
        cfg.model = m.into();
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = opts.samples {
        cfg.wave.samples = v;
    }
    if let Some(v) = opts.pool_size {
        cfg.pool.size = v;
    }
    if let Some(v) = opts.iterations {
        cfg.pool.iterations = v;
    }
    if let Some(v) = opts.grid {
        cfg.wave.grid = Some(v);
    }
    if let Some(v) = &opts.jumps {
        cfg.jumps = v.clone();
    }
    if let Some(v) = opts.sigma2 {
        cfg.sigma2 = v;
    }
    if let Some(v) = opts.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = opts.c {
        cfg.c = Some(v);
    }
    if let Some(v) = opts.k {
        cfg.k = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct CriticalOutput {
    #[serde(flatten)]
    result: SpeedDecayResult,
    gamma_star: f64,
    c_star: f64,
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::io("stdout", e))?;
    println!("{s}");
    Ok(())
}

fn require_out(opts: &Opts) -> Result<&Path, CliError> {
    opts.out
        .as_deref()
        .ok_or_else(|| bad("out", "this command writes files; pass --out DIR"))
}

fn classified(model: Model, inc: &IncrementLaw, gamma: f64, c: f64, k: Branching) -> SpeedDecayResult {
    let (regime, diagnostics) = regime_classify(inc, gamma, k);
    SpeedDecayResult {
        model,
        gamma,
        c,
        regime,
        diagnostics,
    }
}

fn solve_gamma(cfg: &Config) -> Result<SpeedDecayResult, CliError> {
    let k = Branching::new(cfg.k)?;
    Ok(match cfg.model {
        Model::Power2 => solve_gamma_power2(&cfg.jumps, cfg.sigma2, k)?,
        Model::BS => {
            let c = cfg.c.ok_or_else(|| bad("c", "solve-gamma for the bs model needs --c"))?;
            gamma_from_speed_bs(c, cfg.lambda, &cfg.jumps, k)?
        }
        Model::Brownian => {
            let c = cfg.c.ok_or_else(|| bad("c", "solve-gamma for the brownian model needs --c"))?;
            brownian_dispersion(cfg.sigma2, BrownianMode::FromSpeed(c), k)?
        }
        Model::GenericLevy => return Err(bad("model", "generic_levy has no solver")),
    })
}

fn critical(cfg: &Config) -> Result<SpeedDecayResult, CliError> {
    let k = Branching::new(cfg.k)?;
    Ok(match cfg.model {
        Model::BS => critical_point_bs(cfg.lambda, &cfg.jumps, k)?,
        Model::Brownian => brownian_dispersion(cfg.sigma2, BrownianMode::Minimal, k)?,
        // The power-of-2 speed is fixed at 1; its decay rate is the only one.
        Model::Power2 => solve_gamma_power2(&cfg.jumps, cfg.sigma2, k)?,
        Model::GenericLevy => return Err(bad("model", "generic_levy has no solver")),
    })
}

fn dispersion(cfg: &Config, gamma: Option<f64>) -> Result<SpeedDecayResult, CliError> {
    let Some(g) = gamma else {
        return Ok(cfg.resolve()?.dispersion);
    };
    if !(g.is_finite() && g > 0.0) {
        return Err(bad("gamma", format!("must be positive, got {g}")));
    }
    let k = Branching::new(cfg.k)?;
    Ok(match cfg.model {
        Model::Brownian => brownian_dispersion(cfg.sigma2, BrownianMode::FromGamma(g), k)?,
        Model::BS => {
            let c = speed_from_gamma_bs(g, cfg.lambda, &cfg.jumps, k)?;
            let levy = if cfg.lambda > 0.0 {
                LevySpec::CompoundPoisson {
                    lambda: cfg.lambda,
                    jumps: cfg.jumps.clone(),
                }
            } else {
                LevySpec::None
            };
            classified(Model::BS, &IncrementLaw::sync(levy, c)?, g, c, k)
        }
        Model::Power2 => {
            let inc = IncrementLaw::power2(cfg.jumps.clone(), cfg.sigma2)?;
            classified(Model::Power2, &inc, g, 1.0, k)
        }
        Model::GenericLevy => return Err(bad("model", "generic_levy has no solver")),
    })
}

fn read_profile(path: &Path) -> Result<WaveProfile, CliError> {
    let cols = read_columns(path, &["x", "h", "stderr"])?;
    let [grid, values, stderr]: [Vec<f64>; 3] = cols.try_into().expect("three columns requested");
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(bad(&path.display().to_string(), "x must be strictly increasing with at least two rows"));
    }
    // gamma and orientation come from the sidecar when it is there.
    let sidecar = path.with_extension("json");
    let meta: Option<serde_json::Value> = std::fs::read_to_string(&sidecar)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let gamma = meta
        .as_ref()
        .and_then(|m| m.get("gamma"))
        .and_then(|g| g.as_f64())
        .unwrap_or(f64::NAN);
    let orientation = meta
        .as_ref()
        .and_then(|m| m.get("orientation"))
        .and_then(|o| serde_json::from_value(o.clone()).ok())
        .unwrap_or(Orientation::SyncRight);
    Ok(WaveProfile {
        gamma,
        orientation,
        pool_mean: f64::NAN,
        grid,
        values,
        stderr,
    })
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let opts = &cli.opts;
    let started = now();
    let exec = Workers::new(opts.workers).map_err(|e| bad("workers", e.to_string()))?;
    let command = cli.command.name();
    let mut inputs = BTreeMap::new();

    if let Command::Compare {
        empirical,
        profile,
        from,
        to,
    } = &cli.command
    {
        let snaps = read_snapshots(empirical)?;
        let predicted = read_profile(profile)?;
        let emp = centered_profile(&snaps, (*from, *to))?;
        let summary = stages::compare(&emp, &predicted, None)?;
        print_json(&summary)?;
        if let Some(dir) = &opts.out {
            let cfg = if opts.config.is_some() || opts.preset.is_some() || opts.model.is_some() {
                Some(build_config(opts)?)
            } else {
                None
            };
            let mut out = OutDir::create(dir)?;
            out.write_json("compare.json", &summary)?;
            stages::write_overlay(&mut out, &emp, &predicted, summary.matched.shift)?;
            inputs.insert("empirical".into(), empirical.display().to_string());
            inputs.insert("profile".into(), profile.display().to_string());
            out.finish(ManifestInfo {
                command,
                config: cfg.as_ref(),
                workers: exec.count(),
                started,
                inputs,
            })?;
        }
        return Ok(());
    }

    let mut cfg = build_config(opts)?;
    let mut out = match &cli.command {
        Command::SolveGamma | Command::CriticalSpeed | Command::Dispersion { .. } => {
            opts.out.as_deref().map(OutDir::create).transpose()?
        }
        _ => Some(OutDir::create(require_out(opts)?)?),
    };

    match &cli.command {
        Command::SolveGamma => {
            let r = solve_gamma(&cfg)?;
            print_json(&r)?;
            if let Some(o) = out.as_mut() {
                o.write_json("solve-gamma.json", &r)?;
            }
        }
        Command::CriticalSpeed => {
            let r = critical(&cfg)?;
            let value = CriticalOutput {
                gamma_star: r.gamma,
                c_star: r.c,
                result: r,
            };
            print_json(&value)?;
            if let Some(o) = out.as_mut() {
                o.write_json("critical-speed.json", &value)?;
            }
        }
        Command::Dispersion { gamma } => {
            let r = dispersion(&cfg, *gamma)?;
            print_json(&r)?;
            if let Some(o) = out.as_mut() {
                o.write_json("dispersion.json", &r)?;
            }
        }
        Command::SamplePool => {
            let res = cfg.resolve()?;
            let pool = stages::build_pool(&cfg, &res, &exec)?;
            for w in &pool.warnings {
                eprintln!("warning: {w}");
            }
            stages::write_pool(out.as_mut().expect("out"), &pool, &res)?;
        }
        Command::WaveProfile { pool } => {
            let res = cfg.resolve()?;
            let samples = stages::pool_samples(&cfg, &res, &exec, pool.as_deref())?;
            let (p, sidecar) = stages::profile(&cfg, &res, &samples, &exec)?;
            stages::write_profile(out.as_mut().expect("out"), &p, &sidecar)?;
            if let Some(path) = pool {
                inputs.insert("pool".into(), path.display().to_string());
            }
        }
        Command::SampleWave { pool } => {
            let res = cfg.resolve()?;
            let samples = stages::pool_samples(&cfg, &res, &exec, pool.as_deref())?;
            let xi = stages::wave_samples(&cfg, &res, &samples, &exec)?;
            out.as_mut().expect("out").write_csv("xi.csv", &["xi"], xi.iter().map(|x| [*x]))?;
            if let Some(path) = pool {
                inputs.insert("pool".into(), path.display().to_string());
            }
        }
        Command::Verify { pool } => {
            let res = cfg.resolve()?;
            let samples = stages::pool_samples(&cfg, &res, &exec, pool.as_deref())?;
            let xi = stages::wave_samples(&cfg, &res, &samples, &exec)?;
            let records = stages::verify(&cfg, &res, &samples, &xi, &exec)?;
            print_json(&records)?;
            out.as_mut().expect("out").write_json("verify.json", &records)?;
            if let Some(path) = pool {
                inputs.insert("pool".into(), path.display().to_string());
            }
        }
        Command::Simulate {
            n,
            horizon,
            burn_in,
            initial,
        } => {
            if let Some(v) = n {
                cfg.simulation.n = *v;
            }
            if let Some(v) = horizon {
                cfg.simulation.horizon = *v;
            }
            if let Some(v) = burn_in {
                cfg.simulation.burn_in = *v;
            }
            if let Some(path) = initial {
                cfg.simulation.initial_csv = Some(path.clone());
            }
            cfg.validate()?;
            let res = cfg.resolve()?;
            let init = match &cfg.simulation.initial_csv {
                Some(path) => {
                    inputs.insert("initial".into(), path.display().to_string());
                    Some(read_columns(path, &["position"])?.remove(0))
                }
                None => None,
            };
            let (sim, summary) = stages::run_simulation(&cfg, &res, init)?;
            print_json(&summary)?;
            stages::write_simulation(out.as_mut().expect("out"), &sim, &summary)?;
        }
        Command::Pipeline => pipeline(&cfg, &exec, out.as_mut().expect("out"))?,
        Command::Compare { .. } => unreachable!("handled above"),
    }

    if let Some(o) = out {
        o.finish(ManifestInfo {
            command,
            config: Some(&cfg),
            workers: exec.count(),
            started,
            inputs,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    dispersion: &'a SpeedDecayResult,
    pool_mean: f64,
    verification_passed: bool,
    failed_tests: Vec<&'a str>,
    simulation: &'a stages::SimulationSummary,
    comparison: &'a stages::CompareSummary,
}

fn pipeline(cfg: &Config, exec: &Workers, out: &mut OutDir) -> Result<(), CliError> {
    let res = cfg.resolve()?;
    out.write_json("dispersion.json", &res.dispersion)?;

    let pool = stages::build_pool(cfg, &res, exec)?;
    for w in &pool.warnings {
        eprintln!("warning: {w}");
    }
    stages::write_pool(out, &pool, &res)?;

    let (profile, sidecar) = stages::profile(cfg, &res, &pool.samples, exec)?;
    stages::write_profile(out, &profile, &sidecar)?;

    let xi = stages::wave_samples(cfg, &res, &pool.samples, exec)?;
    let records = stages::verify(cfg, &res, &pool.samples, &xi, exec)?;
    out.write_json("verify.json", &records)?;
    drop(xi);

    let init = match &cfg.simulation.initial_csv {
        Some(path) => Some(read_columns(path, &["position"])?.remove(0)),
        None => None,
    };
    let (sim, summary) = stages::run_simulation(cfg, &res, init)?;
    stages::write_simulation(out, &sim, &summary)?;

    let emp = stages::centered(&sim, cfg)?;
    let gamma = res.dispersion.gamma;
    let wrong = profile_eval(&pool.samples, 2.0 * gamma, res.orientation, &profile.grid, exec)?;
    let comparison = stages::compare(&emp, &profile, Some(&wrong))?;
    out.write_json("compare.json", &comparison)?;
    stages::write_overlay(out, &emp, &profile, comparison.matched.shift)?;

    let failed: Vec<&str> = records.iter().filter(|r| !r.pass).map(|r| r.test.as_str()).collect();
    print_json(&PipelineSummary {
        dispersion: &res.dispersion,
        pool_mean: pool.mean(),
        verification_passed: failed.is_empty(),
        failed_tests: failed,
        simulation: &summary,
        comparison: &comparison,
    })
}
