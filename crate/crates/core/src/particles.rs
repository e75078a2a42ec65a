//! Event-driven simulation of the N-particle systems and front measurements.
//!
//! Interaction events arrive at total rate `ρN`; each picks an ordered pair
//! `(i, j)`, `j ≠ i`, uniformly. Under [`Mechanism::Sync`] and
//! [`Mechanism::BsModel`] particle `i` copies `j` if `j` is ahead. Under
//! [`Mechanism::Power2`] the lower particle of the pair is pushed forward by
//! a jump, so every particle meets a partner at rate `2ρ`. `BsModel` adds
//! independent jumps at rate `λ` per particle. Brownian motion, when
//! present, is applied lazily from each particle's last update time.

use crate::distmodel::{exp1, std_normal, JumpLaw, LevySpec};
use crate::error::{invalid, Error, Result};
use crate::rng::{Rng as StreamRng, RngStream};
use crate::stats::{ols, quantile_sorted, sort_floats};
use crate::waves::WaveProfile;
use alloc::{format, vec, vec::Vec};
use rand::Rng;
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Sync,
    #[serde(rename = "bs")]
    BsModel,
    Power2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystemConfig {
    pub n: usize,
    pub mechanism: Mechanism,
    /// `None` or `Brownian`; the BS model's jumps come from `jumps`.
    pub levy: LevySpec,
    pub jump_rate: f64,
    pub copy_rate: f64,
    pub jumps: JumpLaw,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    /// Spacing of the recorded median path.
    pub median_interval: f64,
    pub max_events: u64,
    pub seed: RngStream,
    pub initial: Option<Vec<f64>>,
}

impl ParticleSystemConfig {
    pub fn new(n: usize, mechanism: Mechanism, jumps: JumpLaw, horizon: f64, seed: RngStream) -> Self {
        Self {
            n,
            mechanism,
            levy: LevySpec::None,
            jump_rate: 0.0,
            copy_rate: 1.0,
            jumps,
            horizon,
            snapshot_times: Vec::new(),
            median_interval: horizon / 400.0,
            max_events: u64::MAX,
            seed,
            initial: None,
        }
    }

    /// `count` evenly spaced times in `(burn_in, horizon]`.
    pub fn even_snapshots(burn_in: f64, horizon: f64, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|i| burn_in + (horizon - burn_in) * i as f64 / count as f64)
            .collect()
    }

    fn sigma2(&self) -> f64 {
        match self.levy {
            LevySpec::Brownian { sigma2 } => sigma2,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", format!("need at least 2 particles, got {}", self.n)));
        }
        match &self.levy {
            LevySpec::None | LevySpec::Brownian { .. } => self.levy.validate()?,
            LevySpec::CompoundPoisson { .. } => {
                return Err(invalid(
                    "levy",
                    "particle motion must be none or brownian; BS jumps are set by jump_rate and jumps",
                ))
            }
        }
        if !(self.copy_rate.is_finite() && self.copy_rate > 0.0) {
            return Err(invalid("copy_rate", format!("must be positive, got {}", self.copy_rate)));
        }
        if !(self.jump_rate.is_finite() && self.jump_rate >= 0.0) {
            return Err(invalid("jump_rate", format!("must be nonnegative, got {}", self.jump_rate)));
        }
        if self.jump_rate > 0.0 && self.mechanism != Mechanism::BsModel {
            return Err(invalid("jump_rate", "only the bs mechanism has independent jumps"));
        }
        self.jumps.validate()?;
        if self.mechanism == Mechanism::Power2 {
            self.jumps.validate_unit_mean()?;
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.median_interval.is_finite() && self.median_interval > 0.0) {
            return Err(invalid("median_interval", "must be positive"));
        }
        if self.snapshot_times.windows(2).any(|w| !(w[0] < w[1]))
            || self.snapshot_times.iter().any(|&t| !(0.0..=self.horizon).contains(&t))
        {
            return Err(invalid("snapshot_times", "must be increasing and within [0, horizon]"));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.n {
                return Err(invalid(
                    "initial",
                    format!("expected {} positions, got {}", self.n, init.len()),
                ));
            }
            if init.iter().any(|x| !x.is_finite()) {
                return Err(invalid("initial", "positions must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub snapshots: Vec<Snapshot>,
    pub median_path: Vec<(f64, f64)>,
    pub events: u64,
    /// The event budget ran out before the horizon.
    pub truncated: bool,
}

/// Particle positions with their lazy Brownian clocks.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    mechanism: Mechanism,
    jumps: JumpLaw,
    sigma: f64,
    x: Vec<f64>,
    updated: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(config: &ParticleSystemConfig) -> Result<Self> {
        config.validate()?;
        let x = config.initial.clone().unwrap_or_else(|| vec![0.0; config.n]);
        Ok(Self {
            mechanism: config.mechanism,
            jumps: config.jumps.clone(),
            sigma: config.sigma2().sqrt(),
            updated: vec![0.0; x.len()],
            x,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    fn catch_up<R: Rng>(&mut self, i: usize, t: f64, rng: &mut R) {
        if self.sigma > 0.0 {
            let dt = t - self.updated[i];
            if dt > 0.0 {
                self.x[i] += self.sigma * dt.sqrt() * std_normal(rng);
            }
            self.updated[i] = t;
        }
    }

    /// Brings every particle to time `t`.
    pub fn sync_to<R: Rng>(&mut self, t: f64, rng: &mut R) {
        for i in 0..self.x.len() {
            self.catch_up(i, t, rng);
        }
    }

    /// Interaction of the ordered pair `(i, j)` at time `t`.
    pub fn interact<R: Rng>(&mut self, i: usize, j: usize, t: f64, rng: &mut R) {
        self.catch_up(i, t, rng);
        self.catch_up(j, t, rng);
        match self.mechanism {
            Mechanism::Sync | Mechanism::BsModel => {
                if self.x[j] > self.x[i] {
                    self.x[i] = self.x[j];
                }
            }
            Mechanism::Power2 => {
                let lower = if self.x[i] <= self.x[j] { i } else { j };
                self.x[lower] += self.jumps.sample(rng);
            }
        }
    }

    /// Independent jump of particle `i` at time `t`.
    pub fn jump<R: Rng>(&mut self, i: usize, t: f64, rng: &mut R) {
        self.catch_up(i, t, rng);
        self.x[i] += self.jumps.sample(rng);
    }

    pub fn median(&self) -> f64 {
        let mut xs = self.x.clone();
        let mid = xs.len() / 2;
        let (_, hi, _) = xs.select_nth_unstable_by(mid, f64::total_cmp);
        let hi = *hi;
        if xs.len() % 2 == 1 {
            hi
        } else {
            let lo = xs[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lo + hi)
        }
    }
}

fn pick_pair(rng: &mut StreamRng, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Runs the system from time 0 to `horizon`.
pub fn simulate(config: &ParticleSystemConfig) -> Result<SimulationResult> {
    let mut system = ParticleSystem::new(config)?;
    let mut rng = config.seed.rng();
    let n = config.n;
    let rho = config.copy_rate;
    let lambda = if config.mechanism == Mechanism::BsModel { config.jump_rate } else { 0.0 };
    let total_rate = (rho + lambda) * n as f64;
    let p_interact = rho / (rho + lambda);

    let steps = (config.horizon / config.median_interval).floor() as usize;
    let median_times: Vec<f64> = (0..=steps).map(|k| k as f64 * config.median_interval).collect();
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut median_path = Vec::with_capacity(median_times.len());
    let (mut next_median, mut next_snap) = (0, 0);

    let mut t = 0.0;
    let mut events = 0u64;
    let mut truncated = false;
    loop {
        let t_next = t + exp1(&mut rng) / total_rate;
        loop {
            let tm = median_times.get(next_median).copied().unwrap_or(f64::INFINITY);
            let ts = config.snapshot_times.get(next_snap).copied().unwrap_or(f64::INFINITY);
            let obs = tm.min(ts);
            if obs > t_next || obs > config.horizon {
                break;
            }
            system.sync_to(obs, &mut rng);
            if tm == obs {
                median_path.push((obs, system.median()));
                next_median += 1;
            }
            if ts == obs {
                snapshots.push(Snapshot {
                    t: obs,
                    positions: system.x.clone(),
                });
                next_snap += 1;
            }
        }
        if t_next > config.horizon {
            break;
        }
        if events >= config.max_events {
            truncated = true;
            break;
        }
        t = t_next;
        events += 1;
        if lambda == 0.0 || rng.random::<f64>() < p_interact {
            let (i, j) = pick_pair(&mut rng, n);
            system.interact(i, j, t, &mut rng);
        } else {
            let i = rng.random_range(0..n);
            system.jump(i, t, &mut rng);
        }
    }
    Ok(SimulationResult {
        snapshots,
        median_path,
        events,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub c_hat: f64,
    pub ci: (f64, f64),
    pub points: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Least-squares slope of the median path after `burn_in`, with a 95%
/// bootstrap interval.
///
/// A finite front wanders like a random walk around its trend, so the
/// bootstrap resamples the increments of the detrended path and rebuilds
/// paths from them rather than resampling pointwise residuals.
pub fn estimate_speed(median_path: &[(f64, f64)], burn_in: f64, stream: RngStream) -> Result<SpeedEstimate> {
    let (ts, ys): (Vec<f64>, Vec<f64>) = median_path.iter().copied().filter(|p| p.0 >= burn_in).unzip();
    if ts.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "need at least 20 points after burn-in {burn_in}, got {}",
            ts.len()
        )));
    }
    let (_, c_hat) = ols(&ts, &ys);
    let detrended: Vec<f64> = ts.iter().zip(&ys).map(|(t, y)| y - c_hat * t).collect();
    let incs: Vec<f64> = detrended.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_inc = incs.iter().sum::<f64>() / incs.len() as f64;
    let centered: Vec<f64> = incs.iter().map(|d| d - mean_inc).collect();

    let mut rng = stream.rng();
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut path = vec![0.0; ts.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        path[0] = c_hat * ts[0];
        for k in 1..ts.len() {
            let noise = centered[rng.random_range(0..centered.len())];
            path[k] = path[k - 1] + c_hat * (ts[k] - ts[k - 1]) + noise;
        }
        slopes.push(ols(&ts, &path).1);
    }
    sort_floats(&mut slopes);
    Ok(SpeedEstimate {
        c_hat,
        ci: (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975)),
        points: ts.len(),
    })
}

/// Pooled positions relative to their snapshot medians.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    /// Mean of the snapshot medians that were subtracted.
    pub offset: f64,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>, offset: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("samples", "empirical CDF needs at least one point"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(invalid("samples", "must be finite"));
        }
        sort_floats(&mut samples);
        Ok(Self { sorted: samples, offset })
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `P(X <= x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.eval(x)
    }
}

fn median_of(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    sort_floats(&mut s);
    quantile_sorted(&s, 0.5)
}

/// Centers every snapshot with `t` in `[t_lo, t_hi]` by its median and pools them.
pub fn centered_profile(snapshots: &[Snapshot], t_range: (f64, f64)) -> Result<EmpiricalCdf> {
    let chosen: Vec<&Snapshot> = snapshots
        .iter()
        .filter(|s| s.t >= t_range.0 && s.t <= t_range.1 && !s.positions.is_empty())
        .collect();
    if chosen.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no snapshots in [{}, {}]",
            t_range.0, t_range.1
        )));
    }
    let mut pooled = Vec::with_capacity(chosen.iter().map(|s| s.positions.len()).sum());
    let mut offsets = 0.0;
    for s in &chosen {
        let m = median_of(&s.positions);
        offsets += m;
        pooled.extend(s.positions.iter().map(|x| x - m));
    }
    EmpiricalCdf::from_samples(pooled, offsets / chosen.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileComparison {
    pub w1_after_shift: f64,
    pub ks_after_shift: f64,
    /// `s` with the empirical law closest to the predicted law moved right by `s`.
    pub shift: f64,
}

/// Predicted CDF `1 - h`, made nondecreasing.
fn predicted_cdf(p: &WaveProfile) -> Vec<f64> {
    let mut acc = 0.0f64;
    p.values
        .iter()
        .map(|h| {
            acc = acc.max((1.0 - h).clamp(0.0, 1.0));
            acc
        })
        .collect()
}

fn predicted_quantile(grid: &[f64], cdf: &[f64], u: f64) -> f64 {
    let k = cdf.partition_point(|&f| f < u);
    if k == 0 {
        return grid[0];
    }
    if k == cdf.len() {
        return grid[grid.len() - 1];
    }
    let (f0, f1) = (cdf[k - 1], cdf[k]);
    let w = if f1 > f0 { (u - f0) / (f1 - f0) } else { 1.0 };
    grid[k - 1] + w * (grid[k] - grid[k - 1])
}

fn interp_cdf(grid: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return cdf[0];
    }
    if x >= grid[grid.len() - 1] {
        return cdf[cdf.len() - 1];
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    cdf[i] * (1.0 - w) + cdf[i + 1] * w
}

/// Aligns the empirical law with the law whose survival function is `h`.
///
/// In quantile form `W1 = ∫ |Q_emp(u) - Q_pred(u) - s| du`, which is minimized
/// by the median of `Q_emp - Q_pred`; the predicted quantiles come from
/// inverting the profile on its grid.
pub fn compare_profiles(emp: &EmpiricalCdf, predicted: &WaveProfile) -> Result<ProfileComparison> {
    if predicted.grid.len() < 2 {
        return Err(invalid("profile", "needs at least two grid points"));
    }
    let cdf = predicted_cdf(predicted);
    let grid = &predicted.grid;
    let xs = emp.sorted();
    let n = xs.len();
    let mut diffs: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| x - predicted_quantile(grid, &cdf, (i as f64 + 0.5) / n as f64))
        .collect();
    let shift = median_of(&diffs);
    let w1_after_shift = diffs.iter().map(|d| (d - shift).abs()).sum::<f64>() / n as f64;
    diffs.clear();
    let ks_after_shift = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = interp_cdf(grid, &cdf, x - shift);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(ProfileComparison {
        w1_after_shift,
        ks_after_shift,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::waves::{profile_eval, sample_wave, Orientation};
    use approx::assert_relative_eq;

    fn power2_config(n: usize, horizon: f64, seed: u64) -> ParticleSystemConfig {
        ParticleSystemConfig::new(n, Mechanism::Power2, JumpLaw::exponential(1.0), horizon, RngStream::new(seed, 0))
    }

    fn logistic_profile() -> WaveProfile {
        let grid: Vec<f64> = (0..4001).map(|i| -40.0 + 0.02 * i as f64).collect();
        let values = grid.iter().map(|x| 1.0 / (1.0 + f64::exp(*x))).collect();
        WaveProfile {
            gamma: 1.0,
            orientation: Orientation::Power2,
            pool_mean: 1.0,
            stderr: vec![0.0; grid.len()],
            grid,
            values,
        }
    }

    #[test]
    fn two_particle_sync_copies_the_max() {
        let mut cfg = ParticleSystemConfig::new(2, Mechanism::Sync, JumpLaw::exponential(1.0), 1.0, RngStream::new(1, 0));
        cfg.initial = Some(vec![-1.0, 2.5]);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        let mut rng = cfg.seed.rng();
        sys.interact(0, 1, 0.1, &mut rng);
        assert_eq!(sys.positions(), &[2.5, 2.5]);
    }

    #[test]
    fn power2_pushes_the_lower_particle() {
        let mut cfg = ParticleSystemConfig::new(2, Mechanism::Power2, JumpLaw::deterministic(1.0), 1.0, RngStream::new(1, 0));
        cfg.initial = Some(vec![3.0, 0.0]);
        let mut sys = ParticleSystem::new(&cfg).unwrap();
        let mut rng = cfg.seed.rng();
        sys.interact(0, 1, 0.1, &mut rng);
        assert_eq!(sys.positions(), &[3.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = power2_config(10, 1.0, 0);
        cfg.jumps = JumpLaw::exponential(0.5);
        assert!(matches!(cfg.validate(), Err(Error::Invalid("jumps", _))));
        let mut cfg = power2_config(1, 1.0, 0);
        assert!(cfg.validate().is_err());
        cfg.n = 10;
        cfg.jump_rate = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Invalid("jump_rate", _))));
        cfg.jump_rate = 0.0;
        cfg.snapshot_times = vec![0.5, 0.2];
        assert!(cfg.validate().is_err());
        cfg.snapshot_times = vec![];
        cfg.initial = Some(vec![0.0; 3]);
        assert!(matches!(cfg.validate(), Err(Error::Invalid("initial", _))));
    }

    #[test]
    fn exchangeable_under_relabelling() {
        let init: Vec<f64> = (0..8).map(|i| (i as f64 * 1.7).sin()).collect();
        let perm = [3usize, 0, 7, 5, 1, 6, 2, 4];
        let mut cfg = ParticleSystemConfig::new(8, Mechanism::Sync, JumpLaw::exponential(1.0), 1.0, RngStream::new(2, 0));
        cfg.initial = Some(init.clone());
        let mut a = ParticleSystem::new(&cfg).unwrap();
        let mut permuted = vec![0.0; 8];
        for (k, &p) in perm.iter().enumerate() {
            permuted[p] = init[k];
        }
        cfg.initial = Some(permuted);
        let mut b = ParticleSystem::new(&cfg).unwrap();
        let mut rng = RngStream::new(2, 1).rng();
        let mut dummy = RngStream::new(2, 2).rng();
        for step in 0..200 {
            let (i, j) = pick_pair(&mut rng, 8);
            a.interact(i, j, step as f64, &mut dummy);
            b.interact(perm[i], perm[j], step as f64, &mut dummy);
        }
        let (mut x, mut y) = (a.positions().to_vec(), b.positions().to_vec());
        sort_floats(&mut x);
        sort_floats(&mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn monotone_without_diffusion() {
        for mech in [Mechanism::Sync, Mechanism::Power2] {
            let mut cfg = power2_config(200, 20.0, 3);
            cfg.mechanism = mech;
            cfg.snapshot_times = ParticleSystemConfig::even_snapshots(0.0, 20.0, 10);
            if mech == Mechanism::Sync {
                cfg.initial = Some((0..200).map(|i| (i as f64 * 0.3).cos()).collect());
            }
            let r = simulate(&cfg).unwrap();
            for w in r.snapshots.windows(2) {
                assert!(w[0].positions.iter().zip(&w[1].positions).all(|(a, b)| b >= a));
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let mut cfg = power2_config(100, 5.0, 4);
        cfg.levy = LevySpec::Brownian { sigma2: 1.0 };
        cfg.snapshot_times = vec![2.0, 5.0];
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn event_budget_truncates() {
        let mut cfg = power2_config(100, 100.0, 5);
        cfg.max_events = 1000;
        let r = simulate(&cfg).unwrap();
        assert!(r.truncated);
        assert_eq!(r.events, 1000);
    }

    #[test]
    fn power2_front_moves_at_unit_speed() {
        let r = simulate(&power2_config(2000, 60.0, 6)).unwrap();
        let s = estimate_speed(&r.median_path, 20.0, RngStream::new(6, 1)).unwrap();
        assert!((s.c_hat - 1.0).abs() < 0.05, "{s:?}");
    }

    #[test]
    fn exact_line_speed() {
        let path: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let s = estimate_speed(&path, 0.0, RngStream::new(0, 0)).unwrap();
        assert!((s.c_hat - 2.0).abs() < 1e-12);
        assert!(estimate_speed(&path[..10], 0.0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn bootstrap_interval_covers_noisy_line() {
        let mut covered = 0;
        for seed in 0..50 {
            let mut rng = RngStream::new(seed, 7).rng();
            let path: Vec<(f64, f64)> = (0..200)
                .map(|i| {
                    let t = i as f64 * 0.5;
                    (t, 2.0 * t + 0.01 * std_normal(&mut rng))
                })
                .collect();
            let s = estimate_speed(&path, 0.0, RngStream::new(seed, 8)).unwrap();
            if s.ci.0 <= 2.0 && 2.0 <= s.ci.1 {
                covered += 1;
            }
        }
        assert!(covered >= 45, "{covered}/50");
    }

    #[test]
    fn centering_removes_shifts() {
        let base: Vec<f64> = (0..101).map(|i| (i as f64 * 0.77).sin()).collect();
        let a = Snapshot { t: 1.0, positions: base.clone() };
        let b = Snapshot {
            t: 2.0,
            positions: base.iter().map(|x| x + 7.5).collect(),
        };
        let ca = centered_profile(core::slice::from_ref(&a), (0.0, 1.5)).unwrap();
        let cb = centered_profile(&[b], (1.5, 3.0)).unwrap();
        for (x, y) in ca.sorted().iter().zip(cb.sorted()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        let point = Snapshot { t: 0.0, positions: vec![4.0; 10] };
        let c = centered_profile(&[point], (0.0, 0.0)).unwrap();
        assert_eq!(c.eval(-1e-9), 0.0);
        assert_eq!(c.eval(0.0), 1.0);
        assert!(centered_profile(&[a], (5.0, 6.0)).is_err());
    }

    #[test]
    fn comparison_recovers_shift() {
        let pool = vec![1.0; 10];
        let n = 100_000;
        let xi = sample_wave(&pool, 1.0, Orientation::SyncRight, n, RngStream::new(9, 0), &Sequential).unwrap().xi;
        let grid: Vec<f64> = (0..3001).map(|i| -15.0 + 0.01 * i as f64).collect();
        let profile = profile_eval(&pool, 1.0, Orientation::SyncRight, &grid, &Sequential).unwrap();
        let emp = EmpiricalCdf::from_samples(xi.clone(), 0.0).unwrap();
        let same = compare_profiles(&emp, &profile).unwrap();
        assert!(same.w1_after_shift < 2.0 / (n as f64).sqrt(), "{same:?}");
        let moved = EmpiricalCdf::from_samples(xi.iter().map(|x| x + 3.0).collect(), 0.0).unwrap();
        let c = compare_profiles(&moved, &profile).unwrap();
        assert_relative_eq!(c.shift - same.shift, 3.0, epsilon = 1e-9);
        assert_relative_eq!(c.w1_after_shift, same.w1_after_shift, epsilon = 1e-9);
    }

    #[test]
    fn logistic_comparison_discriminates_gamma() {
        let mut rng = RngStream::new(10, 0).rng();
        let xs: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.random();
                (u / (1.0 - u)).ln()
            })
            .collect();
        let emp = EmpiricalCdf::from_samples(xs, 0.0).unwrap();
        let right = compare_profiles(&emp, &logistic_profile()).unwrap();
        let mut wrong = logistic_profile();
        wrong.values = wrong.grid.iter().map(|x| 1.0 / (1.0 + f64::exp(2.0 * x))).collect();
        let bad = compare_profiles(&emp, &wrong).unwrap();
        assert!(right.w1_after_shift < 0.05 && bad.w1_after_shift > 3.0 * right.w1_after_shift);
        assert!(right.ks_after_shift < 0.01);
    }
}
