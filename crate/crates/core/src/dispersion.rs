//! Speed-decay relations for the linear equation `V = (V_1 + ... + V_k) e^{-γA}`.
//!
//! A wave with decay rate `γ` requires `E[e^{-γA}] = 1/k`; it is supercritical
//! when additionally `E[A e^{-γA}] > 0` and critical when that tilt vanishes.

use crate::distmodel::{IncrementLaw, JumpLaw, LevySpec, Power2Increment};
use crate::error::{invalid, Error, Result};
use crate::optimize::{bisect, golden_section};
use crate::rng::RngStream;
use crate::stats::mean_stderr;
use alloc::{format, string::String, vec::Vec};
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

/// Number of particles taking part in one interaction (`k >= 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Branching(u32);

impl Branching {
    pub const BINARY: Branching = Branching(2);

    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(invalid("k", format!("branching factor must be >= 2, got {k}")));
        }
        Ok(Branching(k))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// The target value `1/k` of `E[e^{-γA}]`.
    pub fn target(self) -> f64 {
        1.0 / self.0 as f64
    }
}

impl Default for Branching {
    fn default() -> Self {
        Self::BINARY
    }
}

impl TryFrom<u32> for Branching {
    type Error = Error;
    fn try_from(k: u32) -> Result<Self> {
        Branching::new(k)
    }
}

impl From<Branching> for u32 {
    fn from(b: Branching) -> u32 {
        b.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Supercritical,
    Critical,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Brownian,
    #[serde(rename = "bs")]
    BS,
    Power2,
    GenericLevy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `E[e^{-γA}]`, which must equal `1/k`.
    pub psi1: f64,
    /// `E[A e^{-γA}]`.
    pub mean_tilt: f64,
    /// `E[A² e^{-γA}]`.
    pub moment2: f64,
    /// Upper end of the domain of the transform in `γ`.
    pub domain_bound: f64,
    /// `1 + γc - κ(γ)` for the copying models (equals `k` on the relation).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi1_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_tilt_stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedDecayResult {
    pub model: Model,
    pub gamma: f64,
    pub c: f64,
    pub regime: Regime,
    pub diagnostics: Diagnostics,
}

const PSI_TOL: f64 = 1e-9;
const TILT_TOL: f64 = 1e-7;

/// Classification of `(increment, γ)` with analytic transforms.
pub fn regime_classify(inc: &IncrementLaw, gamma: f64, k: Branching) -> (Regime, Diagnostics) {
    let moments = (0..3)
        .map(|n| inc.tilt_moment(n, gamma))
        .collect::<Result<Vec<f64>>>();
    let r = match inc {
        IncrementLaw::SyncA { levy, c } => Some(1.0 + gamma * c - levy.kappa(gamma)),
        _ => None,
    };
    let mut diag = Diagnostics {
        psi1: f64::INFINITY,
        mean_tilt: f64::NAN,
        moment2: f64::NAN,
        domain_bound: inc.domain_bound(),
        r,
        psi1_stderr: None,
        mean_tilt_stderr: None,
        note: None,
    };
    let Ok(m) = moments else {
        diag.note = Some(format!("transform undefined at gamma = {gamma}"));
        return (Regime::Invalid, diag);
    };
    diag.psi1 = m[0];
    diag.mean_tilt = m[1];
    diag.moment2 = m[2];
    let regime = if (m[0] - k.target()).abs() >= PSI_TOL {
        Regime::Invalid
    } else if m[1].abs() < TILT_TOL {
        Regime::Critical
    } else if m[1] > 0.0 {
        Regime::Supercritical
    } else {
        Regime::Invalid
    };
    (regime, diag)
}

/// Monte Carlo classification from `n` draws of the increment, with standard
/// errors. Criticality means `|mean_tilt| < 2` standard errors.
pub fn regime_classify_mc(
    inc: &IncrementLaw,
    gamma: f64,
    k: Branching,
    n: usize,
    stream: RngStream,
) -> (Regime, Diagnostics) {
    let mut rng = stream.rng();
    let mut w = Vec::with_capacity(n);
    let mut aw = Vec::with_capacity(n);
    let mut a2w = Vec::with_capacity(n);
    for _ in 0..n {
        let a = inc.sample(&mut rng);
        let e = (-gamma * a).exp();
        w.push(e);
        aw.push(a * e);
        a2w.push(a * a * e);
    }
    let (psi1, psi_se) = mean_stderr(&w);
    let (tilt, tilt_se) = mean_stderr(&aw);
    let (m2, _) = mean_stderr(&a2w);
    let regime = if (psi1 - k.target()).abs() > 3.0 * psi_se + PSI_TOL {
        Regime::Invalid
    } else if tilt.abs() < 2.0 * tilt_se {
        Regime::Critical
    } else if tilt > 0.0 {
        Regime::Supercritical
    } else {
        Regime::Invalid
    };
    let r = match inc {
        IncrementLaw::SyncA { levy, c } => Some(1.0 + gamma * c - levy.kappa(gamma)),
        _ => None,
    };
    (
        regime,
        Diagnostics {
            psi1,
            mean_tilt: tilt,
            moment2: m2,
            domain_bound: inc.domain_bound(),
            r,
            psi1_stderr: Some(psi_se),
            mean_tilt_stderr: Some(tilt_se),
            note: None,
        },
    )
}

fn model_of(inc: &IncrementLaw) -> Model {
    match inc {
        IncrementLaw::SyncA { levy: LevySpec::Brownian { .. }, .. } => Model::Brownian,
        IncrementLaw::SyncA { .. } => Model::BS,
        IncrementLaw::Power2Y(_) => Model::Power2,
        IncrementLaw::Constant { .. } => Model::GenericLevy,
    }
}

fn result_for(inc: &IncrementLaw, gamma: f64, c: f64, k: Branching) -> SpeedDecayResult {
    let (regime, diagnostics) = regime_classify(inc, gamma, k);
    SpeedDecayResult {
        model: model_of(inc),
        gamma,
        c,
        regime,
        diagnostics,
    }
}

/// Decay rate of the power-of-2 wave: the root of `E[e^{-γY}] = 1/k`.
///
/// The speed is always 1 and the root is always supercritical since `Y > 0`.
pub fn solve_gamma_power2(jumps: &JumpLaw, sigma2: f64, k: Branching) -> Result<SpeedDecayResult> {
    let inc = Power2Increment::new(jumps.clone(), sigma2)?;
    let target = k.target();
    let phi = |g: f64| inc.laplace(g) - target;
    let lo = 1e-8;
    let mut hi = 50.0;
    while phi(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootNotFound("E[exp(-γY)] does not reach 1/k".into()));
        }
    }
    let gamma = bisect(phi, lo, hi, 1e-12)?;
    let note = match jumps {
        JumpLaw::Exponential { .. } if sigma2 > 0.0 && k == Branching::BINARY => {
            let closed = ((1.0 + 2.0 * sigma2).sqrt() - 1.0) / sigma2;
            Some(exponential_closed_form_note(closed, gamma))
        }
        _ => None,
    };
    let mut res = result_for(&IncrementLaw::Power2Y(inc), gamma, 1.0, k);
    res.diagnostics.note = note;
    Ok(res)
}

fn exponential_closed_form_note(closed: f64, root: f64) -> String {
    format!(
        "closed form (sqrt(1+2*sigma2)-1)/sigma2 = {closed:.6} does not solve \
         1/2 = 1/((1+gamma)(1+sigma2*gamma/2)); reporting the root {root:.6} of \
         1/2 = E[exp(-gamma*Y)] instead"
    )
}

fn bs_levy(lambda: f64, jumps: &JumpLaw) -> Result<LevySpec> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    jumps.validate()?;
    Ok(if lambda == 0.0 {
        LevySpec::None
    } else {
        LevySpec::CompoundPoisson {
            lambda,
            jumps: jumps.clone(),
        }
    })
}

/// `v(γ) = (k - 1 + λ(E[e^{γX}] - 1)) / γ`.
pub fn speed_from_gamma_bs(gamma: f64, lambda: f64, jumps: &JumpLaw, k: Branching) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let levy = bs_levy(lambda, jumps)?;
    let kappa = levy.kappa(gamma);
    if !kappa.is_finite() {
        return Err(Error::MgfDivergent {
            theta: gamma,
            theta_max: jumps.theta_max(),
        });
    }
    Ok((k.get() as f64 - 1.0 + kappa) / gamma)
}

/// The minimum `(γ*, c*)` of the strictly convex `v(γ)`.
///
/// Golden-section search locates the minimum; the final digits come from
/// bisecting the stationarity condition `v(γ) = λ E[X e^{γX}]` inside the
/// golden bracket.
pub fn critical_point_bs(lambda: f64, jumps: &JumpLaw, k: Branching) -> Result<SpeedDecayResult> {
    let levy = bs_levy(lambda, jumps)?;
    if lambda == 0.0 {
        return Err(Error::NoInteriorMinimum(
            "with lambda = 0, v(gamma) = (k-1)/gamma is monotone (pure copying)".into(),
        ));
    }
    let km1 = k.get() as f64 - 1.0;
    let v = |g: f64| (km1 + levy.kappa(g)) / g;
    let stationarity = |g: f64| levy.kappa_d1(g) - v(g);
    let theta_max = levy.theta_max();
    let lo = 1e-8;
    let mut hi = if theta_max.is_finite() {
        theta_max * (1.0 - 1e-6)
    } else {
        50.0
    };
    if !theta_max.is_finite() {
        while stationarity(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoInteriorMinimum("v(gamma) decreasing on (0, 1e6)".into()));
            }
        }
    } else if stationarity(hi) < 0.0 {
        return Err(Error::NoInteriorMinimum(format!(
            "v(gamma) still decreasing at the MGF bound {theta_max}"
        )));
    }
    let (a, b) = golden_section(v, lo, hi, 1e-10);
    // Function values are flat to rounding within ~1e-8 of the minimum, so the
    // polishing bracket is wider than the golden one.
    let pad = 1e-4 * a.abs().max(1e-8);
    let (mut pa, mut pb) = ((a - pad).max(lo), (b + pad).min(hi));
    if !(stationarity(pa) < 0.0 && stationarity(pb) > 0.0) {
        (pa, pb) = (lo, hi);
    }
    let gamma = bisect(stationarity, pa, pb, 0.0).unwrap_or(0.5 * (a + b));
    let c_star = v(gamma);
    let residual = (c_star - lambda * jumps.moment_exp(1, gamma)).abs();
    if residual >= 1e-6 * c_star.abs().max(1.0) {
        return Err(Error::RootNotFound(format!(
            "stationarity residual {residual} at gamma* = {gamma}"
        )));
    }
    let inc = IncrementLaw::SyncA { levy, c: c_star };
    let mut res = result_for(&inc, gamma, c_star, k);
    // The tilt vanishes only to rounding at γ*; the minimizer defines criticality.
    if (res.diagnostics.psi1 - k.target()).abs() < PSI_TOL {
        res.regime = Regime::Critical;
    }
    Ok(res)
}

/// Decay rate for a prescribed speed: the root of `v(γ) = c` in `(0, γ*)`.
pub fn gamma_from_speed_bs(c: f64, lambda: f64, jumps: &JumpLaw, k: Branching) -> Result<SpeedDecayResult> {
    let levy = bs_levy(lambda, jumps)?;
    let km1 = k.get() as f64 - 1.0;
    let v = |g: f64| (km1 + levy.kappa(g)) / g;
    let (upper, c_star) = if lambda == 0.0 {
        // Pure copying: every c > 0 has the wave γ = (k-1)/c.
        if !(c > 0.0) {
            return Err(Error::NoWaveBelowCritical { c, c_star: 0.0 });
        }
        (f64::INFINITY, 0.0)
    } else {
        let crit = critical_point_bs(lambda, jumps, k)?;
        if (c - crit.c).abs() <= 1e-9 * crit.c.abs().max(1.0) {
            return Ok(crit);
        }
        if c < crit.c {
            return Err(Error::NoWaveBelowCritical { c, c_star: crit.c });
        }
        (crit.gamma, crit.c)
    };
    let gamma = if lambda == 0.0 {
        km1 / c
    } else {
        let mut lo = 1e-8;
        while v(lo) <= c {
            lo *= 0.5;
        }
        bisect(|g| v(g) - c, lo, upper, 1e-12 * c.abs().max(1.0))?
    };
    debug_assert!(gamma < upper || c_star == 0.0);
    Ok(result_for(&IncrementLaw::SyncA { levy, c }, gamma, c, k))
}

/// Query mode for the Brownian relation `1 + γc - σ²γ²/2 = k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrownianMode {
    Minimal,
    FromGamma(f64),
    FromSpeed(f64),
}

pub fn brownian_dispersion(sigma2: f64, mode: BrownianMode, k: Branching) -> Result<SpeedDecayResult> {
    let levy = LevySpec::Brownian { sigma2 };
    levy.validate()?;
    let km1 = k.get() as f64 - 1.0;
    let gamma_min = (2.0 * km1 / sigma2).sqrt();
    let c_min = (2.0 * km1 * sigma2).sqrt();
    let (gamma, c) = match mode {
        BrownianMode::Minimal => (gamma_min, c_min),
        BrownianMode::FromGamma(g) => {
            if !(g > 0.0) {
                return Err(invalid("gamma", format!("must be positive, got {g}")));
            }
            (g, (km1 + 0.5 * sigma2 * g * g) / g)
        }
        BrownianMode::FromSpeed(c) => {
            if (c - c_min).abs() <= 1e-9 * c_min.max(1.0) {
                (gamma_min, c_min)
            } else if c < c_min {
                return Err(Error::NoWaveBelowCritical { c, c_star: c_min });
            } else {
                // Smaller root of σ²γ²/2 - cγ + (k-1) = 0, in cancellation-free form.
                (2.0 * km1 / (c + (c * c - 2.0 * sigma2 * km1).sqrt()), c)
            }
        }
    };
    let mut res = result_for(&IncrementLaw::SyncA { levy, c }, gamma, c, k);
    if mode == BrownianMode::Minimal || gamma == gamma_min {
        res.regime = Regime::Critical;
    }
    Ok(res)
}
