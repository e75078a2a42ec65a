//! The steps of a run. Subcommands call one stage each; the pipeline calls
//! them in order and writes everything to one directory.

use crate::config::{Config, Resolved};
use crate::error::CliError;
use crate::exec::Workers;
use crate::output::{read_columns, OutDir};
use serde::Serialize;
use smoothwave_core::dispersion::Regime;
use smoothwave_core::distmodel::IncrementLaw;
use smoothwave_core::particles::{
    centered_profile, compare_profiles, estimate_speed, simulate, EmpiricalCdf, ProfileComparison,
    SimulationResult, SpeedEstimate,
};
use smoothwave_core::smoothing::{
    branching_cross_check, iterate_pool, laplace_functional_residual, pool_step, MeanRecord, SamplePool, DEFAULT_LEAF_BUDGET,
};
use smoothwave_core::stats::KsTest;
use smoothwave_core::waves::{
    power2_min_rhs, power2_rhs, profile_eval, sample_wave, sync_rhs, tail_asymptotics, verify_equivalence_power2,
    verify_fixed_point_power2, verify_fixed_point_sync, Orientation, TailAsymptotics, WaveProfile,
};
use smoothwave_core::RngStream;
use std::path::Path;

/// Substream indices below the run seed, one per stage.
mod streams {
    pub const POOL: u64 = 1;
    pub const WAVE: u64 = 2;
    pub const VERIFY: u64 = 3;
    pub const BOOTSTRAP: u64 = 5;
}

pub const LAPLACE_S_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const LAPLACE_THRESHOLD: f64 = 0.01;

pub fn build_pool(cfg: &Config, res: &Resolved, exec: &Workers) -> Result<SamplePool, CliError> {
    if res.dispersion.regime == Regime::Critical {
        return Err(CliError::Numerical(format!(
            "speed c = {} is critical: the pool limit is 0 and no wave sample can be built; choose c > c*",
            res.dispersion.c
        )));
    }
    Ok(iterate_pool(
        &res.increment,
        res.dispersion.gamma,
        cfg.pool.size,
        cfg.pool.iterations,
        res.k,
        cfg.stream().substream(streams::POOL),
        exec,
    )?)
}

#[derive(Serialize)]
struct PoolSidecar<'a> {
    gamma: f64,
    c: f64,
    increment: String,
    size: usize,
    iterations: usize,
    early_stopped: bool,
    regime: Regime,
    mean: f64,
    stddev: f64,
    zero_fraction: f64,
    ks_trace: &'a [f64],
    mean_trace: &'a [MeanRecord],
    warnings: &'a [String],
    seed: RngStream,
}

pub fn write_pool(out: &mut OutDir, pool: &SamplePool, res: &Resolved) -> Result<(), CliError> {
    out.write_csv("pool.csv", &["v"], pool.samples.iter().map(|v| [*v]))?;
    out.write_json(
        "pool.json",
        &PoolSidecar {
            gamma: pool.gamma,
            c: res.dispersion.c,
            increment: pool.increment.describe(),
            size: pool.len(),
            iterations: pool.iterations,
            early_stopped: pool.early_stopped,
            regime: pool.regime,
            mean: pool.mean(),
            stddev: pool.stddev(),
            zero_fraction: pool.zero_fraction(),
            ks_trace: &pool.ks_trace,
            mean_trace: &pool.mean_trace,
            warnings: &pool.warnings,
            seed: pool.seed,
        },
    )
}

/// Pool samples from a `v` column, or a fresh pool.
pub fn pool_samples(
    cfg: &Config,
    res: &Resolved,
    exec: &Workers,
    from: Option<&Path>,
) -> Result<Vec<f64>, CliError> {
    match from {
        Some(path) => {
            let v = read_columns(path, &["v"])?.remove(0);
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(CliError::Validation {
                    field: path.display().to_string(),
                    message: "pool must be a nonempty column of nonnegative numbers".into(),
                });
            }
            Ok(v)
        }
        None => Ok(build_pool(cfg, res, exec)?.samples),
    }
}

#[derive(Serialize)]
pub struct ProfileSidecar {
    pub gamma: f64,
    pub c: f64,
    pub orientation: Orientation,
    pub pool_mean: f64,
    pub grid: String,
    pub tails: Option<TailAsymptotics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tails_error: Option<String>,
}

pub fn profile(
    cfg: &Config,
    res: &Resolved,
    pool: &[f64],
    exec: &Workers,
) -> Result<(WaveProfile, ProfileSidecar), CliError> {
    let gamma = res.dispersion.gamma;
    let grid = cfg.grid(gamma);
    let p = profile_eval(pool, gamma, res.orientation, &grid.points(), exec)?;
    let (tails, tails_error) = match tail_asymptotics(pool, gamma, res.orientation) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sidecar = ProfileSidecar {
        gamma,
        c: res.dispersion.c,
        orientation: res.orientation,
        pool_mean: p.pool_mean,
        grid: grid.to_string(),
        tails,
        tails_error,
    };
    Ok((p, sidecar))
}

pub fn write_profile(out: &mut OutDir, p: &WaveProfile, sidecar: &ProfileSidecar) -> Result<(), CliError> {
    out.write_csv(
        "profile.csv",
        &["x", "h", "stderr"],
        (0..p.grid.len()).map(|i| [p.grid[i], p.values[i], p.stderr[i]]),
    )?;
    out.write_json("profile.json", sidecar)
}

pub fn wave_samples(cfg: &Config, res: &Resolved, pool: &[f64], exec: &Workers) -> Result<Vec<f64>, CliError> {
    let s = sample_wave(
        pool,
        res.dispersion.gamma,
        res.orientation,
        cfg.wave.samples,
        cfg.stream().substream(streams::WAVE),
        exec,
    )?;
    Ok(s.xi)
}

/// One line of `verify.json`. Controls are expected to reject; their `pass`
/// means they did.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRecord {
    pub test: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub control: bool,
}

impl VerifyRecord {
    fn ks(test: &str, t: &KsTest) -> Self {
        Self {
            test: test.into(),
            statistic: t.statistic,
            critical_value: t.critical_value,
            pass: t.pass,
            p_value: Some(t.p_value),
            control: false,
        }
    }

    fn control(test: &str, t: &KsTest) -> Self {
        Self {
            pass: !t.pass,
            control: true,
            ..Self::ks(test, t)
        }
    }
}

/// Fixed-point checks, their negative controls, the Laplace residual and
/// the branching cross-check.
pub fn verify(
    cfg: &Config,
    res: &Resolved,
    pool: &[f64],
    xi: &[f64],
    exec: &Workers,
) -> Result<Vec<VerifyRecord>, CliError> {
    let alpha = cfg.wave.alpha;
    let stream = cfg.stream().substream(streams::VERIFY);
    let third = xi.len() / 3;
    let (reference, a, b) = (&xi[..third], &xi[third..2 * third], &xi[2 * third..3 * third]);
    let shifted = |s: &[f64]| s.iter().map(|x| x + 0.5).collect::<Vec<f64>>();
    let mut out = Vec::new();
    match res.orientation {
        Orientation::SyncRight => {
            let t = verify_fixed_point_sync(xi, &res.increment, alpha, stream.substream(0), exec)?;
            out.push(VerifyRecord::ks("fixed_point_sync", &t));
            let rhs = sync_rhs(&shifted(a), &shifted(b), &res.increment, stream.substream(1), exec);
            out.push(VerifyRecord::control(
                "fixed_point_sync_shift_control",
                &KsTest::from_samples(reference, &rhs, alpha),
            ));
        }
        Orientation::Power2 => {
            let t = verify_fixed_point_power2(xi, &cfg.jumps, cfg.sigma2, alpha, stream.substream(0), exec)?;
            out.push(VerifyRecord::ks("fixed_point_power2", &t));
            let doubled = cfg.jumps.scaled(2.0)?;
            let rhs = power2_rhs(a, b, &doubled, cfg.sigma2, stream.substream(1), exec);
            out.push(VerifyRecord::control(
                "fixed_point_power2_mean2_control",
                &KsTest::from_samples(reference, &rhs, alpha),
            ));
            let e = verify_equivalence_power2(xi, &cfg.jumps, cfg.sigma2, alpha, stream.substream(2), exec)?;
            out.push(VerifyRecord::ks("equivalence_power2", &e));
            if cfg.sigma2 > 0.0 {
                let IncrementLaw::Power2Y(inc) = &res.increment else {
                    unreachable!("power-of-2 orientation implies a power-of-2 increment")
                };
                let q = xi.len() / 4;
                let pushed = power2_rhs(&xi[..q], &xi[q..2 * q], &cfg.jumps, cfg.sigma2, stream.substream(3), exec);
                let no_z = power2_min_rhs(&xi[2 * q..3 * q], &xi[3 * q..4 * q], inc, false, stream.substream(4), exec);
                out.push(VerifyRecord::control(
                    "equivalence_power2_no_z_control",
                    &KsTest::from_samples(&pushed, &no_z, alpha),
                ));
            }
        }
    }
    let residual = laplace_functional_residual(
        pool,
        &res.increment,
        res.dispersion.gamma,
        res.k,
        &LAPLACE_S_GRID,
        cfg.wave.laplace_draws,
        stream.substream(5),
        exec,
    )?;
    out.push(VerifyRecord {
        test: "laplace_residual".into(),
        statistic: residual.max_residual,
        critical_value: LAPLACE_THRESHOLD,
        pass: residual.max_residual < LAPLACE_THRESHOLD,
        p_value: None,
        control: false,
    });
    out.push(branching_check(cfg, res, exec)?);
    Ok(out)
}

/// Compares exact generation-`g` martingale values with a pool iterated `g`
/// times, which targets the same law.
pub fn branching_check(cfg: &Config, res: &Resolved, exec: &Workers) -> Result<VerifyRecord, CliError> {
    let g = cfg.branching.generations;
    let stream = cfg.stream().substream(streams::VERIFY);
    let exact = branching_cross_check(
        &res.increment,
        res.dispersion.gamma,
        g,
        cfg.branching.replicates,
        res.k,
        stream.substream(6),
        exec,
        DEFAULT_LEAF_BUDGET,
    )?;
    // Exactly g steps from V_0 = 1, with no early stop, so both sides are M_g.
    let steps = stream.substream(7);
    let mut pool = vec![1.0; cfg.pool.size];
    for t in 0..g {
        pool = pool_step(&pool, cfg.pool.size, &res.increment, res.dispersion.gamma, res.k, steps.substream(t as u64), exec);
    }
    let test = KsTest::from_samples(&exact, &pool, cfg.wave.alpha);
    Ok(VerifyRecord::ks("branching_cross_check", &test))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub n: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub events: u64,
    pub truncated: bool,
    pub predicted_c: f64,
    pub speed: Option<SpeedEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_error: Option<String>,
    /// `c_hat - predicted_c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
}

pub fn run_simulation(
    cfg: &Config,
    res: &Resolved,
    initial: Option<Vec<f64>>,
) -> Result<(SimulationResult, SimulationSummary), CliError> {
    let pc = cfg.particle_config(res, initial);
    let sim = simulate(&pc)?;
    let burn_in = cfg.simulation.burn_in;
    let predicted_c = match res.mechanism {
        // Finite fronts of the copying models are pulled to the critical speed.
        smoothwave_core::particles::Mechanism::Power2 => res.dispersion.c,
        _ => Config { c: None, ..cfg.clone() }.resolve()?.dispersion.c,
    } * cfg.simulation.copy_rate;
    let (speed, speed_error) = match estimate_speed(&sim.median_path, burn_in, cfg.stream().substream(streams::BOOTSTRAP)) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SimulationSummary {
        n: cfg.simulation.n,
        horizon: cfg.simulation.horizon,
        burn_in,
        events: sim.events,
        truncated: sim.truncated,
        predicted_c,
        bias: speed.as_ref().map(|s| s.c_hat - predicted_c),
        speed,
        speed_error,
    };
    Ok((sim, summary))
}

pub fn write_simulation(out: &mut OutDir, sim: &SimulationResult, summary: &SimulationSummary) -> Result<(), CliError> {
    out.write_csv(
        "snapshots.csv",
        &["t", "particle", "position"],
        sim.snapshots
            .iter()
            .flat_map(|s| s.positions.iter().enumerate().map(move |(i, x)| [s.t, i as f64, *x])),
    )?;
    out.write_csv("median_path.csv", &["t", "median"], sim.median_path.iter().map(|&(t, m)| [t, m]))?;
    out.write_json("simulate.json", summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    #[serde(flatten)]
    pub matched: ProfileComparison,
    pub points: usize,
    /// The same comparison against the profile with `γ` doubled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrong_gamma_w1: Option<f64>,
}

pub fn compare(
    emp: &EmpiricalCdf,
    predicted: &WaveProfile,
    wrong_gamma: Option<&WaveProfile>,
) -> Result<CompareSummary, CliError> {
    let matched = compare_profiles(emp, predicted)?;
    let wrong_gamma_w1 = match wrong_gamma {
        Some(p) => Some(compare_profiles(emp, p)?.w1_after_shift),
        None => None,
    };
    Ok(CompareSummary {
        matched,
        points: emp.len(),
        wrong_gamma_w1,
    })
}

pub fn centered(sim: &SimulationResult, cfg: &Config) -> Result<EmpiricalCdf, CliError> {
    Ok(centered_profile(&sim.snapshots, (cfg.simulation.burn_in, cfg.simulation.horizon))?)
}

/// Predicted `h` beside the aligned empirical survival function, for overlays.
pub fn write_overlay(
    out: &mut OutDir,
    emp: &EmpiricalCdf,
    predicted: &WaveProfile,
    shift: f64,
) -> Result<(), CliError> {
    out.write_csv(
        "overlay.csv",
        &["x", "h_predicted", "survival_empirical"],
        predicted
            .grid
            .iter()
            .zip(&predicted.values)
            .map(|(&x, &h)| [x, h, emp.survival(x + shift)]),
    )
}
