//! Travelling-wave profiles built from a pool of martingale limits.
//!
//! With `SyncRight` the pool holds `W` and `h(x) = 1 - E[exp(-W e^{-γx})]`;
//! with `Power2` it holds `V` and `h(x) = E[exp(-V e^{γx})]`. In both cases
//! `h(x) = P(ξ > x)` for the stationary front-frame position `ξ`, and
//! conditionally on the pool value `ξ` is Gumbel, which [`sample_wave`] uses
//! for exact draws.

use crate::distmodel::{std_gumbel, IncrementLaw, JumpLaw, LevySpec, Power2Increment};
use crate::error::{invalid, Error, Result};
use crate::exec::{chunk_count, chunk_range, Executor};
use crate::rng::RngStream;
use crate::stats::{mean_stderr, ols, quantile_sorted, sort_floats, KsTest};
use alloc::{format, vec::Vec};
use rand::Rng;
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

const CHUNK: usize = 4096;

/// Minimum sample count accepted by the fixed-point checks.
pub const MIN_VERIFY_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    SyncRight,
    Power2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveProfile {
    pub gamma: f64,
    pub orientation: Orientation,
    pub pool_mean: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl WaveProfile {
    /// `h` at `x` by linear interpolation, clamped to the end values.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return self.values[0];
        }
        if x >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let w = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid("gamma", format!("must be positive, got {gamma}")))
    }
}

#[inline]
fn functional(v: f64, gamma: f64, x: f64, orientation: Orientation) -> f64 {
    match orientation {
        Orientation::SyncRight => -(-v * (-gamma * x).exp()).exp_m1(),
        Orientation::Power2 => (-v * (gamma * x).exp()).exp(),
    }
}

fn h_at(pool: &[f64], gamma: f64, x: f64, orientation: Orientation) -> f64 {
    pool.iter().map(|&v| functional(v, gamma, x, orientation)).sum::<f64>() / pool.len() as f64
}

/// Evaluates `h` on `grid` as a pool average, with a standard error per point.
pub fn profile_eval<E: Executor>(
    pool: &[f64],
    gamma: f64,
    orientation: Orientation,
    grid: &[f64],
    exec: &E,
) -> Result<WaveProfile> {
    if pool.is_empty() {
        return Err(invalid("pool", "must be nonempty"));
    }
    check_gamma(gamma)?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("grid", "must be nonempty and strictly increasing"));
    }
    let points = exec.run(grid.len(), |i| {
        let terms: Vec<f64> = pool.iter().map(|&v| functional(v, gamma, grid[i], orientation)).collect();
        mean_stderr(&terms)
    });
    Ok(WaveProfile {
        gamma,
        orientation,
        pool_mean: pool.iter().sum::<f64>() / pool.len() as f64,
        grid: grid.to_vec(),
        values: points.iter().map(|p| p.0).collect(),
        stderr: points.iter().map(|p| p.1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSample {
    pub xi: Vec<f64>,
    /// Pool draws that hit an exact zero and were redrawn.
    pub zero_redraws: usize,
}

/// Draws `n` values of `ξ` by Gumbel mixture sampling over the pool.
pub fn sample_wave<E: Executor>(
    pool: &[f64],
    gamma: f64,
    orientation: Orientation,
    n: usize,
    stream: RngStream,
    exec: &E,
) -> Result<WaveSample> {
    check_gamma(gamma)?;
    if !pool.iter().any(|&v| v > 0.0) {
        return Err(invalid("pool", "needs at least one positive sample"));
    }
    if pool.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("pool", "samples must be finite and nonnegative"));
    }
    let m = pool.len();
    let parts = exec.run(chunk_count(n, CHUNK), |c| {
        let mut rng = stream.substream(c as u64).rng();
        let mut redraws = 0;
        let xs: Vec<f64> = chunk_range(c, n, CHUNK)
            .map(|_| {
                let mut v = pool[rng.random_range(0..m)];
                while v == 0.0 {
                    redraws += 1;
                    v = pool[rng.random_range(0..m)];
                }
                let g = std_gumbel(&mut rng);
                match orientation {
                    Orientation::SyncRight => (v.ln() + g) / gamma,
                    Orientation::Power2 => -(v.ln() + g) / gamma,
                }
            })
            .collect();
        (xs, redraws)
    });
    let zero_redraws = parts.iter().map(|p| p.1).sum();
    Ok(WaveSample {
        xi: parts.into_iter().flat_map(|p| p.0).collect(),
        zero_redraws,
    })
}

/// `max(a_i, b_i) - A_i` for fresh increments `A_i`.
pub fn sync_rhs<E: Executor>(a: &[f64], b: &[f64], inc: &IncrementLaw, stream: RngStream, exec: &E) -> Vec<f64> {
    let n = a.len().min(b.len());
    exec.run(chunk_count(n, CHUNK), |c| {
        let mut rng = stream.substream(c as u64).rng();
        chunk_range(c, n, CHUNK)
            .map(|i| a[i].max(b[i]) - inc.sample(&mut rng))
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// `a_i + 1{a_i <= b_i} X_i - T_i + B(T_i)` with `T_i ~ Exp(2)` and `B` a
/// Brownian motion of variance `σ²` per unit time.
///
/// The rate-2 clock is the rate at which a tagged particle meets a partner:
/// it is chosen either as the first or as the second member of a pair.
pub fn power2_rhs<E: Executor>(
    a: &[f64],
    b: &[f64],
    jumps: &JumpLaw,
    sigma2: f64,
    stream: RngStream,
    exec: &E,
) -> Vec<f64> {
    let n = a.len().min(b.len());
    let drift = LevySpec::Brownian { sigma2 };
    exec.run(chunk_count(n, CHUNK), |c| {
        let mut rng = stream.substream(c as u64).rng();
        chunk_range(c, n, CHUNK)
            .map(|i| {
                let push = if a[i] <= b[i] { jumps.sample(&mut rng) } else { 0.0 };
                let t = 0.5 * crate::distmodel::exp1(&mut rng);
                let noise = if sigma2 > 0.0 { drift.sample_displacement(t, &mut rng) } else { 0.0 };
                a[i] + push - t + noise
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// `min(a_i, b_i) + X̄_i + Z_i`, with `Z` dropped when `with_z` is false.
pub fn power2_min_rhs<E: Executor>(
    a: &[f64],
    b: &[f64],
    inc: &Power2Increment,
    with_z: bool,
    stream: RngStream,
    exec: &E,
) -> Vec<f64> {
    let n = a.len().min(b.len());
    exec.run(chunk_count(n, CHUNK), |c| {
        let mut rng = stream.substream(c as u64).rng();
        chunk_range(c, n, CHUNK)
            .map(|i| {
                let z = if with_z { inc.sample_z(&mut rng) } else { 0.0 };
                a[i].min(b[i]) + inc.tail().sample(&mut rng) + z
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

fn thirds(xi: &[f64]) -> Result<(&[f64], &[f64], &[f64])> {
    if xi.len() < MIN_VERIFY_SAMPLES {
        return Err(invalid(
            "samples",
            format!("need at least {MIN_VERIFY_SAMPLES}, got {}", xi.len()),
        ));
    }
    let third = xi.len() / 3;
    Ok((&xi[..third], &xi[third..2 * third], &xi[2 * third..3 * third]))
}

/// Two-sample KS test of `ξ = max(ξ_1, ξ_2) - A`.
///
/// The sample is split into three disjoint blocks: one is the reference and
/// the other two supply `(ξ_1, ξ_2)`, so the two KS samples are independent.
pub fn verify_fixed_point_sync<E: Executor>(
    xi: &[f64],
    inc: &IncrementLaw,
    alpha: f64,
    stream: RngStream,
    exec: &E,
) -> Result<KsTest> {
    let (reference, a, b) = thirds(xi)?;
    let rhs = sync_rhs(a, b, inc, stream, exec);
    Ok(KsTest::from_samples(reference, &rhs, alpha))
}

/// Two-sample KS test of `ξ = ξ_1 + 1{ξ_1 <= ξ_2} X - T + B(T)`, split as in
/// [`verify_fixed_point_sync`].
pub fn verify_fixed_point_power2<E: Executor>(
    xi: &[f64],
    jumps: &JumpLaw,
    sigma2: f64,
    alpha: f64,
    stream: RngStream,
    exec: &E,
) -> Result<KsTest> {
    jumps.validate_unit_mean()?;
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(invalid("sigma2", format!("must be nonnegative, got {sigma2}")));
    }
    let (reference, a, b) = thirds(xi)?;
    let rhs = power2_rhs(a, b, jumps, sigma2, stream, exec);
    Ok(KsTest::from_samples(reference, &rhs, alpha))
}

/// Compares the pushed form `ξ_1 + 1{ξ_1 <= ξ_2} X - T + B(T)` with the
/// minimum form `min(ξ_1, ξ_2) + X̄ + Z`, each built from its own disjoint
/// half of `xi`.
pub fn verify_equivalence_power2<E: Executor>(
    xi: &[f64],
    jumps: &JumpLaw,
    sigma2: f64,
    alpha: f64,
    stream: RngStream,
    exec: &E,
) -> Result<KsTest> {
    let inc = Power2Increment::new(jumps.clone(), sigma2)?;
    if xi.len() < MIN_VERIFY_SAMPLES {
        return Err(invalid(
            "samples",
            format!("need at least {MIN_VERIFY_SAMPLES}, got {}", xi.len()),
        ));
    }
    let q = xi.len() / 4;
    let pushed = power2_rhs(&xi[..q], &xi[q..2 * q], jumps, sigma2, stream.substream(0), exec);
    let min_form = power2_min_rhs(&xi[2 * q..3 * q], &xi[3 * q..4 * q], &inc, true, stream.substream(1), exec);
    Ok(KsTest::from_samples(&pushed, &min_form, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// Slope of `log` tail mass against `x`.
    pub slope: f64,
    /// `exp(intercept)` of the same regression.
    pub prefactor: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailAsymptotics {
    pub right: Option<TailFit>,
    pub left: Option<TailFit>,
    pub pool_mean: f64,
    pub density_at_zero: f64,
}

impl TailAsymptotics {
    pub fn right_slope(&self) -> Option<f64> {
        self.right.map(|f| f.slope)
    }

    pub fn right_prefactor(&self) -> Option<f64> {
        self.right.map(|f| f.prefactor)
    }

    pub fn left_slope(&self) -> Option<f64> {
        self.left.map(|f| f.slope)
    }

    pub fn left_prefactor(&self) -> Option<f64> {
        self.left.map(|f| f.prefactor)
    }
}

const TAIL_HI: f64 = 1e-2;
const TAIL_LO: f64 = 1e-5;
const TAIL_POINTS: usize = 40;

/// Regresses `log g(x)` on `x` where `g` lies in `[1e-5, 1e-2]`. `g` must be
/// decreasing in `dir * x`.
fn fit_tail<G: Fn(f64) -> f64>(g: G, dir: f64, scale: f64) -> Option<TailFit> {
    // x where g first drops to `target`, walking outward along `dir`.
    let locate = |target: f64| -> Option<f64> {
        let mut lo = 0.0;
        let mut step = scale;
        if g(dir * lo) <= target {
            // Walk back inward until g exceeds the target.
            let mut back = -scale;
            while g(dir * back) <= target {
                back *= 2.0;
                if back.abs() > 1e4 * scale {
                    return None;
                }
            }
            lo = back;
            step = -back;
        }
        let mut hi = lo + step;
        while g(dir * hi) > target {
            lo = hi;
            step *= 2.0;
            hi = lo + step;
            if hi.abs() > 1e4 * scale {
                return None;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(dir * mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let start = locate(TAIL_HI)?;
    let end = locate(TAIL_LO)?;
    if !(end > start) {
        return None;
    }
    let mut xs = Vec::with_capacity(TAIL_POINTS);
    let mut ys = Vec::with_capacity(TAIL_POINTS);
    for i in 0..TAIL_POINTS {
        let x = dir * (start + (end - start) * i as f64 / (TAIL_POINTS - 1) as f64);
        let y = g(x);
        if y > 0.0 {
            xs.push(x);
            ys.push(y.ln());
        }
    }
    if xs.len() < TAIL_POINTS / 2 {
        return None;
    }
    let (intercept, slope) = ols(&xs, &ys);
    let (a, b) = (dir * start, dir * end);
    Some(TailFit {
        slope,
        prefactor: intercept.exp(),
        window: (a.min(b), a.max(b)),
    })
}

/// Reflection kernel estimate of the pool density at `0+`.
pub fn density_at_zero(pool: &[f64]) -> f64 {
    let mut sorted = pool.to_vec();
    sort_floats(&mut sorted);
    let n = sorted.len() as f64;
    let (_, se) = mean_stderr(&sorted);
    let sd = se * n.sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * n.powf(-0.2);
    if !(bw > 0.0) {
        return 0.0;
    }
    let cutoff = 8.0 * bw;
    let norm = 2.0 / (n * bw * (2.0 * core::f64::consts::PI).sqrt());
    norm * sorted
        .iter()
        .take_while(|&&v| v < cutoff)
        .map(|&v| {
            let u = v / bw;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
}

/// Log-linear fits of both tails of the profile.
///
/// `right` fits `h(x)` as `x -> +∞`; `left` fits `1 - h(x)` as `x -> -∞`.
/// For `SyncRight` the right tail carries `E[W] e^{-γx}`; for `Power2` the
/// left tail carries `E[V] e^{γx}`. The opposite tail is governed by the
/// pool density near 0 and is only fitted when the pool resolves it.
pub fn tail_asymptotics(pool: &[f64], gamma: f64, orientation: Orientation) -> Result<TailAsymptotics> {
    check_gamma(gamma)?;
    if pool.is_empty() {
        return Err(invalid("pool", "must be nonempty"));
    }
    let h = |x: f64| h_at(pool, gamma, x, orientation);
    let one_minus_h = |x: f64| -> f64 {
        // 1 - h without cancellation.
        pool.iter()
            .map(|&v| match orientation {
                Orientation::SyncRight => (-v * (-gamma * x).exp()).exp(),
                Orientation::Power2 => -(-v * (gamma * x).exp()).exp_m1(),
            })
            .sum::<f64>()
            / pool.len() as f64
    };
    let scale = 1.0 / gamma;
    let right = fit_tail(h, 1.0, scale);
    let left = fit_tail(one_minus_h, -1.0, scale);
    let primary = match orientation {
        Orientation::SyncRight => right,
        Orientation::Power2 => left,
    };
    if primary.is_none() {
        return Err(Error::InsufficientTailResolution(format!(
            "no window with tail mass in [{TAIL_LO:e}, {TAIL_HI:e}] for a pool of {}",
            pool.len()
        )));
    }
    Ok(TailAsymptotics {
        right,
        left,
        pool_mean: pool.iter().sum::<f64>() / pool.len() as f64,
        density_at_zero: density_at_zero(pool),
    })
}
