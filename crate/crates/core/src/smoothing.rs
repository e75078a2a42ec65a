//! Sample pools for the linear equation `V = (V_1 + ... + V_k) e^{-γA}`.
//!
//! [`iterate_pool`] runs the population-dynamics scheme: start from `V ≡ 1`
//! and repeatedly replace the pool by draws of the right-hand side with
//! parents resampled from the current pool. Started from `V ≡ 1`, iteration
//! `n` targets the law of the additive martingale at generation `n`, whose
//! limit is the wanted `V`. [`branching_cross_check`] computes those
//! generation-`n` martingale values exactly on explicit trees.

use crate::dispersion::{regime_classify, Branching, Regime};
use crate::distmodel::IncrementLaw;
use crate::error::{invalid, Error, Result};
use crate::exec::{chunk_count, chunk_range, Executor};
use crate::rng::RngStream;
use crate::stats::{ks_two_sample_sorted, mean_stderr, sort_floats};
use alloc::{format, string::String, vec, vec::Vec};
use rand::Rng;
use serde::Serialize;
#[allow(unused_imports)]
use num_traits::Float;

/// Draws per RNG substream. Fixed so that results do not depend on workers.
const CHUNK: usize = 4096;

/// Smallest pool accepted by [`iterate_pool`].
pub const MIN_POOL: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanRecord {
    pub mean: f64,
    /// Standard error of the pool mean as an estimate of `E[V] = 1`. The
    /// iteration noise accumulates across iterations, so this is
    /// `sqrt(Σ_τ var(pool_τ) / M)` rather than the one-shot `sd / sqrt(M)`.
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct SamplePool {
    pub samples: Vec<f64>,
    pub gamma: f64,
    pub increment: IncrementLaw,
    /// Iterations actually performed.
    pub iterations: usize,
    pub k: Branching,
    pub seed: RngStream,
    /// KS distance between consecutive pools, one entry per iteration.
    pub ks_trace: Vec<f64>,
    pub mean_trace: Vec<MeanRecord>,
    pub early_stopped: bool,
    pub regime: Regime,
    pub warnings: Vec<String>,
}

impl SamplePool {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean_stderr(&self.samples).0
    }

    pub fn stddev(&self) -> f64 {
        let (_, se) = mean_stderr(&self.samples);
        se * (self.samples.len() as f64).sqrt()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.samples.iter().filter(|&&v| v == 0.0).count() as f64 / self.samples.len() as f64
    }
}

/// One application of the smoothing transform to the empirical law of `prev`:
/// `M` independent draws of `(V_{i_1} + ... + V_{i_k}) e^{-γA}` with parent
/// indices uniform with replacement and a fresh `A` per draw.
pub fn pool_step<E: Executor>(
    prev: &[f64],
    size: usize,
    inc: &IncrementLaw,
    gamma: f64,
    k: Branching,
    stream: RngStream,
    exec: &E,
) -> Vec<f64> {
    let m = prev.len();
    let kk = k.get();
    exec.run(chunk_count(size, CHUNK), |c| {
        let mut rng = stream.substream(c as u64).rng();
        chunk_range(c, size, CHUNK)
            .map(|_| {
                let parents: f64 = (0..kk).map(|_| prev[rng.random_range(0..m)]).sum();
                parents * (-gamma * inc.sample(&mut rng)).exp()
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// Runs the pool iteration from `V_0 ≡ 1`.
///
/// Stops after `iterations` steps, or earlier once the KS distance between
/// consecutive pools stays below `1e-3` for three iterations in a row. A
/// critical or invalid `(inc, γ)` still runs and carries a warning.
pub fn iterate_pool<E: Executor>(
    inc: &IncrementLaw,
    gamma: f64,
    pool_size: usize,
    iterations: usize,
    k: Branching,
    stream: RngStream,
    exec: &E,
) -> Result<SamplePool> {
    iterate_pool_from(vec![1.0; pool_size], inc, gamma, iterations, k, stream, exec)
}

/// [`iterate_pool`] from an arbitrary initial pool.
pub fn iterate_pool_from<E: Executor>(
    initial: Vec<f64>,
    inc: &IncrementLaw,
    gamma: f64,
    iterations: usize,
    k: Branching,
    stream: RngStream,
    exec: &E,
) -> Result<SamplePool> {
    let m = initial.len();
    if m < MIN_POOL {
        return Err(invalid("pool_size", format!("must be at least {MIN_POOL}, got {m}")));
    }
    if iterations == 0 {
        return Err(invalid("iterations", "must be at least 1"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    if initial.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid("initial pool", "samples must be nonnegative"));
    }
    let (regime, diag) = regime_classify(inc, gamma, k);
    let mut warnings = Vec::new();
    match regime {
        Regime::Supercritical => {}
        Regime::Critical => warnings.push(format!(
            "critical regime (E[A exp(-γA)] = {:.3e}): the pool degenerates to 0",
            diag.mean_tilt
        )),
        Regime::Invalid => warnings.push(format!(
            "invalid regime: E[exp(-γA)] = {} (target {}), E[A exp(-γA)] = {}",
            diag.psi1,
            k.target(),
            diag.mean_tilt
        )),
    }

    let mut pool = initial;
    let mut prev_sorted = pool.clone();
    sort_floats(&mut prev_sorted);
    let mut ks_trace = Vec::with_capacity(iterations);
    let mut mean_trace = Vec::with_capacity(iterations);
    let mut accumulated_var = 0.0;
    let mut quiet = 0;
    let mut done = 0;
    for t in 0..iterations {
        pool = pool_step(&pool, m, inc, gamma, k, stream.substream(t as u64), exec);
        let (mean, se) = mean_stderr(&pool);
        accumulated_var += se * se;
        mean_trace.push(MeanRecord {
            mean,
            stderr: accumulated_var.sqrt(),
        });
        let mut sorted = pool.clone();
        sort_floats(&mut sorted);
        let ks = ks_two_sample_sorted(&prev_sorted, &sorted);
        ks_trace.push(ks);
        prev_sorted = sorted;
        done = t + 1;
        quiet = if ks < 1e-3 { quiet + 1 } else { 0 };
        if quiet >= 3 {
            break;
        }
    }
    Ok(SamplePool {
        samples: pool,
        gamma,
        increment: inc.clone(),
        iterations: done,
        k,
        seed: stream,
        ks_trace,
        mean_trace,
        early_stopped: done < iterations,
        regime,
        warnings,
    })
}

/// Largest number of tree leaves [`branching_cross_check`] will visit by default.
pub const DEFAULT_LEAF_BUDGET: u128 = 1 << 40;

/// Exact generation-`g` values of the additive martingale,
/// `M_g = Σ_{leaves} Π_{edges} e^{-γA_edge}`, for `replicates` independent
/// trees with `k` children per node and a fresh increment on every edge.
///
/// Trees are walked depth-first, so memory is `O(g)`; `leaf_budget` bounds
/// the total work `replicates · k^g`.
pub fn branching_cross_check<E: Executor>(
    inc: &IncrementLaw,
    gamma: f64,
    generations: u32,
    replicates: usize,
    k: Branching,
    stream: RngStream,
    exec: &E,
    leaf_budget: u128,
) -> Result<Vec<f64>> {
    if generations > 25 {
        return Err(invalid("generations", format!("must be <= 25, got {generations}")));
    }
    if replicates < 100 {
        return Err(invalid("replicates", format!("must be >= 100, got {replicates}")));
    }
    let needed = (k.get() as u128).pow(generations) * replicates as u128;
    if needed > leaf_budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: leaf_budget,
        });
    }
    fn subtree<R: Rng>(depth: u32, inc: &IncrementLaw, gamma: f64, k: u32, rng: &mut R) -> f64 {
        if depth == 0 {
            return 1.0;
        }
        // One displacement per node, shared by its k children.
        let w = (-gamma * inc.sample(rng)).exp();
        let children: f64 = (0..k).map(|_| subtree(depth - 1, inc, gamma, k, rng)).sum();
        w * children
    }
    Ok(exec.run(replicates, |r| {
        let mut rng = stream.substream(r as u64).rng();
        subtree(generations, inc, gamma, k.get(), &mut rng)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub s: f64,
    /// `φ(s)`, the pool average of `e^{-sV}`.
    pub phi: f64,
    /// Estimate of `E[φ(s e^{-γA})^k]`.
    pub image: f64,
    pub residual: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceResidual {
    pub max_residual: f64,
    pub points: Vec<ResidualPoint>,
}

/// `φ(t) = mean(e^{-tV})` tabulated with its log-derivative on a grid in
/// `u = ln t`, evaluated by cubic Hermite interpolation.
struct PoolLaplace<'a> {
    samples: &'a [f64],
    mean: f64,
    log_lo: f64,
    step: f64,
    /// `(φ, dφ/du)` per grid point.
    values: Vec<(f64, f64)>,
}

impl<'a> PoolLaplace<'a> {
    const POINTS: usize = 1024;

    fn new<E: Executor>(samples: &'a [f64], t_max: f64, exec: &E) -> Self {
        let log_lo = -28.0;
        let log_hi = t_max.ln() + 12.0;
        let step = (log_hi - log_lo) / (Self::POINTS - 1) as f64;
        let values = exec.run(Self::POINTS, |i| {
            let t = (log_lo + step * i as f64).exp();
            let (mut s0, mut s1) = (0.0, 0.0);
            for &v in samples {
                let e = (-t * v).exp();
                s0 += e;
                s1 += v * e;
            }
            let m = samples.len() as f64;
            (s0 / m, -t * s1 / m)
        });
        Self {
            samples,
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            log_lo,
            step,
            values,
        }
    }

    fn direct(&self, t: f64) -> f64 {
        self.samples.iter().map(|v| (-t * v).exp()).sum::<f64>() / self.samples.len() as f64
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let u = (t.ln() - self.log_lo) / self.step;
        if u < 0.0 {
            // t < 1e-12: first-order expansion is exact to rounding.
            return 1.0 - t * self.mean;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.direct(t);
        }
        let w = u - i as f64;
        let ((p0, d0), (p1, d1)) = (self.values[i], self.values[i + 1]);
        let (w2, w3) = (w * w, w * w * w);
        p0 * (2.0 * w3 - 3.0 * w2 + 1.0)
            + d0 * self.step * (w3 - 2.0 * w2 + w)
            + p1 * (-2.0 * w3 + 3.0 * w2)
            + d1 * self.step * (w3 - w2)
    }
}

/// Residual of the Laplace functional equation `φ(s) = E[φ(s e^{-γA})^k]`
/// for the empirical law of `pool`, over `s_grid`.
///
/// `φ` is the exact pool average; the outer expectation uses `draws` fresh
/// increments. Each point reports the combined standard error.
pub fn laplace_functional_residual<E: Executor>(
    pool: &[f64],
    inc: &IncrementLaw,
    gamma: f64,
    k: Branching,
    s_grid: &[f64],
    draws: usize,
    stream: RngStream,
    exec: &E,
) -> Result<LaplaceResidual> {
    if pool.is_empty() {
        return Err(invalid("pool", "must be nonempty"));
    }
    if draws < 2 {
        return Err(invalid("draws", "need at least two increment draws"));
    }
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    let table = PoolLaplace::new(pool, s_max.max(1e-12), exec);
    let kk = k.get() as i32;
    let points = s_grid
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let terms: Vec<f64> = exec
                .run(chunk_count(draws, CHUNK), |c| {
                    let mut rng = stream.substream(j as u64).substream(c as u64).rng();
                    chunk_range(c, draws, CHUNK)
                        .map(|_| table.eval(s * (-gamma * inc.sample(&mut rng)).exp()).powi(kk))
                        .collect::<Vec<f64>>()
                })
                .concat();
            let (image, image_se) = mean_stderr(&terms);
            let phi_terms: Vec<f64> = pool.iter().map(|v| (-s * v).exp()).collect();
            let (phi, phi_sd_over) = mean_stderr(&phi_terms);
            ResidualPoint {
                s,
                phi,
                image,
                residual: (phi - image).abs(),
                stderr: (image_se * image_se + phi_sd_over * phi_sd_over).sqrt(),
            }
        })
        .collect::<Vec<_>>();
    let max_residual = points.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(LaplaceResidual { max_residual, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::{JumpLaw, LevySpec};
    use crate::exec::Sequential;
    use crate::stats::{ks_one_sample, ks_two_sample, quantile_sorted};
    use approx::assert_relative_eq;
    use core::f64::consts::LN_2;

    const K2: Branching = Branching::BINARY;

    fn halving() -> IncrementLaw {
        // e^{-γA} = 1/2 with γ = 1
        IncrementLaw::Constant { value: LN_2 }
    }

    #[test]
    fn constant_halving_keeps_pool_at_one() {
        let p = iterate_pool(&halving(), 1.0, MIN_POOL, 5, K2, RngStream::new(1, 0), &Sequential).unwrap();
        assert!(p.samples.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(p.warnings.is_empty() || p.regime == Regime::Supercritical);
    }

    #[test]
    fn rejects_small_pools() {
        let e = iterate_pool(&halving(), 1.0, 100, 5, K2, RngStream::new(1, 0), &Sequential).unwrap_err();
        assert!(matches!(e, Error::Invalid("pool_size", _)));
    }

    #[test]
    fn yule_limit_is_standard_exponential() {
        // A = T ~ Exp(1), γ = 1: the limit solves V = (V_1 + V_2) U, U uniform,
        // whose solution with mean 1 is Exp(1).
        let inc = IncrementLaw::sync(LevySpec::None, 1.0).unwrap();
        let p = iterate_pool(&inc, 1.0, 100_000, 50, K2, RngStream::new(2, 0), &Sequential).unwrap();
        assert_eq!(p.regime, Regime::Supercritical);
        let last = p.mean_trace.last().unwrap();
        assert!((last.mean - 1.0).abs() < 5.0 * last.stderr);
        let mean = p.mean();
        let mut xs: Vec<f64> = p.samples.iter().map(|v| v / mean).collect();
        assert!(ks_one_sample(&mut xs, |x| 1.0 - (-x).exp()) < 0.01);
        assert!(*p.ks_trace.last().unwrap() < 1e-2);
        assert!(p.ks_trace[0] > *p.ks_trace.last().unwrap());
    }

    #[test]
    fn power2_exponential_pool_mean_and_residual() {
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let p = iterate_pool(&inc, 1.0, 100_000, 50, K2, RngStream::new(3, 0), &Sequential).unwrap();
        assert_relative_eq!(p.mean(), 1.0, epsilon = 0.1);
        for r in &p.mean_trace {
            assert!((r.mean - 1.0).abs() < 5.0 * r.stderr, "{r:?}");
        }
        let s_grid = [0.25, 0.5, 1.0, 2.0, 4.0];
        let res = laplace_functional_residual(&p.samples, &inc, 1.0, K2, &s_grid, 200_000, RngStream::new(3, 1), &Sequential)
            .unwrap();
        assert!(res.max_residual < 0.01, "{res:?}");

        let early = iterate_pool(&inc, 1.0, 100_000, 1, K2, RngStream::new(3, 0), &Sequential).unwrap();
        let res1 = laplace_functional_residual(&early.samples, &inc, 1.0, K2, &s_grid, 200_000, RngStream::new(3, 1), &Sequential)
            .unwrap();
        assert!(res1.max_residual > res.max_residual);
    }

    #[test]
    fn residual_vanishes_for_exact_fixed_point() {
        let pool = vec![1.0; 100];
        let res = laplace_functional_residual(&pool, &halving(), 1.0, K2, &[0.5, 1.0, 3.0], 1000, RngStream::new(0, 0), &Sequential)
            .unwrap();
        assert!(res.max_residual < 1e-7, "{res:?}");
    }

    #[test]
    fn critical_regime_carries_warning() {
        let inc = IncrementLaw::sync(LevySpec::Brownian { sigma2: 1.0 }, 2f64.sqrt()).unwrap();
        let p = iterate_pool(&inc, 2f64.sqrt(), MIN_POOL, 2, K2, RngStream::new(4, 0), &Sequential).unwrap();
        assert_eq!(p.regime, Regime::Critical);
        assert!(p.warnings[0].contains("critical"));
    }

    #[test]
    fn scaling_the_initial_pool_scales_the_result() {
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let s = RngStream::new(5, 0);
        let base = iterate_pool_from(vec![1.0; MIN_POOL], &inc, 1.0, 10, K2, s, &Sequential).unwrap();
        let scaled = iterate_pool_from(vec![3.0; MIN_POOL], &inc, 1.0, 10, K2, s, &Sequential).unwrap();
        let (mut a, mut b) = (base.samples, scaled.samples);
        sort_floats(&mut a);
        sort_floats(&mut b);
        for q in [0.1, 0.5, 0.9] {
            assert_relative_eq!(quantile_sorted(&b, q) / quantile_sorted(&a, q), 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn branching_generation_zero_is_one() {
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let m = branching_cross_check(&inc, 1.0, 0, 100, K2, RngStream::new(6, 0), &Sequential, DEFAULT_LEAF_BUDGET).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn branching_martingale_has_unit_mean() {
        let inc = IncrementLaw::sync(
            LevySpec::CompoundPoisson { lambda: 1.0, jumps: JumpLaw::exponential(1.0) },
            4.5,
        )
        .unwrap();
        let m = branching_cross_check(&inc, 1.0 / 3.0, 6, 10_000, K2, RngStream::new(7, 0), &Sequential, DEFAULT_LEAF_BUDGET)
            .unwrap();
        let (mean, se) = mean_stderr(&m);
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn branching_first_generation_shares_one_displacement() {
        // M_1 = k e^{-γA}: the children of the root share A.
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let m = branching_cross_check(&inc, 1.0, 1, 20_000, K2, RngStream::new(9, 0), &Sequential, DEFAULT_LEAF_BUDGET).unwrap();
        let mut rng = RngStream::new(9, 1).rng();
        let direct: Vec<f64> = (0..20_000).map(|_| 2.0 * (-inc.sample(&mut rng)).exp()).collect();
        let crit = crate::stats::ks_critical_value(m.len(), direct.len(), 0.001);
        assert!(ks_two_sample(&m, &direct) < crit);
    }

    #[test]
    fn branching_matches_pool_after_same_generations() {
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let m = branching_cross_check(&inc, 1.0, 6, 5_000, K2, RngStream::new(10, 0), &Sequential, DEFAULT_LEAF_BUDGET).unwrap();
        let mut pool = vec![1.0; 50_000];
        for t in 0..6 {
            pool = pool_step(&pool, pool.len(), &inc, 1.0, K2, RngStream::new(10, 1).substream(t), &Sequential);
        }
        let crit = crate::stats::ks_critical_value(m.len(), pool.len(), 0.001);
        assert!(ks_two_sample(&m, &pool) < crit);
    }

    #[test]
    fn branching_budget_is_enforced() {
        let inc = halving();
        let e = branching_cross_check(&inc, 1.0, 20, 1000, K2, RngStream::new(0, 0), &Sequential, 1 << 20).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { .. }));
        assert!(branching_cross_check(&inc, 1.0, 26, 100, K2, RngStream::new(0, 0), &Sequential, u128::MAX).is_err());
    }

    #[test]
    fn one_step_image_is_close_in_distribution() {
        let inc = IncrementLaw::power2(JumpLaw::exponential(1.0), 0.0).unwrap();
        let p = iterate_pool(&inc, 1.0, 50_000, 30, K2, RngStream::new(8, 0), &Sequential).unwrap();
        let image = pool_step(&p.samples, p.len(), &inc, 1.0, K2, RngStream::new(8, 99), &Sequential);
        let crit = crate::stats::ks_critical_value(p.len(), image.len(), 0.01);
        assert!(ks_two_sample(&p.samples, &image) < 2.0 * crit);
    }
}
