use super::{IntegratedTail, JumpLaw, LevySpec};
use crate::error::{invalid, Error, Result};
use alloc::format;
use alloc::string::String;
use core::fmt;
use rand::Rng;
#[allow(unused_imports)]
use num_traits::Float;

/// Power-of-2 increment `Y = X̄ + Z`, `Z ~ Exp(mean σ²/2)` (`Z = 0` if `σ² = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Power2Increment {
    jumps: JumpLaw,
    sigma2: f64,
    tail: IntegratedTail,
}

impl Power2Increment {
    pub fn new(jumps: JumpLaw, sigma2: f64) -> Result<Self> {
        jumps.validate_unit_mean()?;
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(invalid("sigma2", format!("must be nonnegative, got {sigma2}")));
        }
        let tail = IntegratedTail::new(&jumps)?;
        Ok(Self { jumps, sigma2, tail })
    }

    pub fn jumps(&self) -> &JumpLaw {
        &self.jumps
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn tail(&self) -> &IntegratedTail {
        &self.tail
    }

    fn z_mean(&self) -> f64 {
        0.5 * self.sigma2
    }

    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma2 == 0.0 {
            0.0
        } else {
            self.z_mean() * super::exp1(rng)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.tail.sample(rng) + self.sample_z(rng)
    }

    /// `Φ(θ) = E[e^{-θY}]`.
    pub fn laplace(&self, theta: f64) -> f64 {
        self.tail.laplace(theta) / (1.0 + theta * self.z_mean())
    }

    /// `E[Y^n e^{-θY}]` for `n <= 2`.
    pub fn tilt_moment(&self, n: u32, theta: f64) -> f64 {
        let mu = self.z_mean();
        let d = 1.0 + theta * mu;
        let (lz0, lz1, lz2) = (1.0 / d, mu / (d * d), 2.0 * mu * mu / (d * d * d));
        let (lx0, lx1) = (self.tail.laplace(theta), self.tail.laplace_d1(theta));
        match n {
            0 => lx0 * lz0,
            1 => lx1 * lz0 + lx0 * lz1,
            _ => self.tail.laplace_d2(theta) * lz0 + 2.0 * lx1 * lz1 + lx0 * lz2,
        }
    }
}

/// Law of the per-generation log-discount in the linear equation
/// `V = (V_1 + ... + V_k) e^{-γ·increment}`.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementLaw {
    /// `A = cT - Γ(T)`, `T ~ Exp(1)`.
    SyncA { levy: LevySpec, c: f64 },
    Power2Y(Power2Increment),
    /// `A ≡ value`.
    Constant { value: f64 },
}

impl IncrementLaw {
    pub fn sync(levy: LevySpec, c: f64) -> Result<Self> {
        levy.validate()?;
        if !c.is_finite() {
            return Err(invalid("c", "speed must be finite"));
        }
        Ok(IncrementLaw::SyncA { levy, c })
    }

    pub fn power2(jumps: JumpLaw, sigma2: f64) -> Result<Self> {
        Power2Increment::new(jumps, sigma2).map(IncrementLaw::Power2Y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementLaw::SyncA { levy, c } => {
                let t = super::exp1(rng);
                c * t - levy.sample_displacement(t, rng)
            }
            IncrementLaw::Power2Y(p) => p.sample(rng),
            IncrementLaw::Constant { value } => *value,
        }
    }

    /// Largest `θ` for which `E[e^{-θA}]` may be finite (the drift-side bound).
    pub fn domain_bound(&self) -> f64 {
        match self {
            IncrementLaw::SyncA { levy, .. } => levy.theta_max(),
            _ => f64::INFINITY,
        }
    }

    /// `E[A^n e^{-θA}]` for `n <= 2`, analytically.
    pub fn tilt_moment(&self, n: u32, theta: f64) -> Result<f64> {
        match self {
            IncrementLaw::SyncA { levy, c } => {
                let kappa = levy.kappa(theta);
                let denom = 1.0 + theta * c - kappa;
                if !kappa.is_finite() {
                    return Err(Error::TransformUndefined {
                        s: theta,
                        reason: format!("cumulant diverges (θ_max = {})", levy.theta_max()),
                    });
                }
                if denom <= 0.0 {
                    return Err(Error::TransformUndefined {
                        s: theta,
                        reason: format!("1 + θc - κ(θ) = {denom} is not positive"),
                    });
                }
                let d1 = c - levy.kappa_d1(theta);
                Ok(match n {
                    0 => 1.0 / denom,
                    1 => d1 / (denom * denom),
                    _ => (2.0 * d1 * d1 + denom * levy.kappa_d2(theta)) / (denom * denom * denom),
                })
            }
            IncrementLaw::Power2Y(p) => Ok(p.tilt_moment(n, theta)),
            IncrementLaw::Constant { value } => Ok(value.powi(n as i32) * (-theta * value).exp()),
        }
    }

    /// `ψ(s) = E[e^{-sγA}]`.
    pub fn laplace(&self, gamma: f64, s: f64) -> Result<f64> {
        self.tilt_moment(0, s * gamma).map_err(|e| match e {
            Error::TransformUndefined { reason, .. } => Error::TransformUndefined { s, reason },
            e => e,
        })
    }

    pub fn describe(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncrementLaw::SyncA { levy, c } => write!(f, "A = cT - Γ(T), c = {c}, Γ = {levy:?}"),
            IncrementLaw::Power2Y(p) => {
                write!(f, "Y = X̄ + Z, jumps = {:?}, sigma2 = {}", p.jumps, p.sigma2)
            }
            IncrementLaw::Constant { value } => write!(f, "A ≡ {value}"),
        }
    }
}
