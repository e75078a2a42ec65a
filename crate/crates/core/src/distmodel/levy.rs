use super::JumpLaw;
use crate::error::{invalid, Result};
use alloc::format;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

/// Driving Lévy process `Γ` of each particle between interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevySpec {
    None,
    Brownian { sigma2: f64 },
    CompoundPoisson { lambda: f64, jumps: JumpLaw },
}

impl LevySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevySpec::None => Ok(()),
            LevySpec::Brownian { sigma2 } => {
                if sigma2.is_finite() && *sigma2 > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("sigma2", format!("must be positive, got {sigma2}")))
                }
            }
            LevySpec::CompoundPoisson { lambda, jumps } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(invalid("lambda", format!("must be positive, got {lambda}")));
                }
                jumps.validate()
            }
        }
    }

    /// `θ_max`: the cumulant is finite exactly on `[0, θ_max)`.
    pub fn theta_max(&self) -> f64 {
        match self {
            LevySpec::None | LevySpec::Brownian { .. } => f64::INFINITY,
            LevySpec::CompoundPoisson { jumps, .. } => jumps.theta_max(),
        }
    }

    /// Cumulant `κ(θ) = log E[e^{θΓ(1)}]`; `+∞` outside the domain.
    pub fn kappa(&self, theta: f64) -> f64 {
        match self {
            LevySpec::None => 0.0,
            LevySpec::Brownian { sigma2 } => 0.5 * sigma2 * theta * theta,
            LevySpec::CompoundPoisson { lambda, jumps } => lambda * (jumps.moment_exp(0, theta) - 1.0),
        }
    }

    pub fn kappa_d1(&self, theta: f64) -> f64 {
        match self {
            LevySpec::None => 0.0,
            LevySpec::Brownian { sigma2 } => sigma2 * theta,
            LevySpec::CompoundPoisson { lambda, jumps } => lambda * jumps.moment_exp(1, theta),
        }
    }

    pub fn kappa_d2(&self, theta: f64) -> f64 {
        match self {
            LevySpec::None => 0.0,
            LevySpec::Brownian { sigma2 } => *sigma2,
            LevySpec::CompoundPoisson { lambda, jumps } => lambda * jumps.moment_exp(2, theta),
        }
    }

    /// Exact draw of `Γ(t)`.
    pub fn sample_displacement<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self {
            LevySpec::None => 0.0,
            LevySpec::Brownian { sigma2 } => (sigma2 * t).sqrt() * super::std_normal(rng),
            LevySpec::CompoundPoisson { lambda, jumps } => {
                let mean = lambda * t;
                if mean <= 0.0 {
                    return 0.0;
                }
                let count = if mean < 30.0 {
                    // Count arrivals of a rate-λ clock before t.
                    let mut n = 0u64;
                    let mut clock = super::exp1(rng);
                    while clock < mean {
                        n += 1;
                        clock += super::exp1(rng);
                    }
                    n
                } else {
                    Poisson::new(mean).expect("positive Poisson mean").sample(rng) as u64
                };
                (0..count).map(|_| jumps.sample(rng)).sum()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;
    use approx::assert_relative_eq;

    #[test]
    fn theta_max_for_exponential_jumps_is_the_rate() {
        let l = LevySpec::CompoundPoisson {
            lambda: 1.0,
            jumps: JumpLaw::exponential(3.0),
        };
        assert_eq!(l.theta_max(), 3.0);
        assert!(l.kappa(3.0).is_infinite());
        assert!(l.kappa(2.999).is_finite());
    }

    #[test]
    fn compound_poisson_moments() {
        let l = LevySpec::CompoundPoisson {
            lambda: 2.0,
            jumps: JumpLaw::exponential(1.0),
        };
        let mut rng = RngStream::new(1, 1).rng();
        let n = 400_000;
        let t = 1.5;
        let xs: alloc::vec::Vec<f64> = (0..n).map(|_| l.sample_displacement(t, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // E = λ t E[X], Var = λ t E[X²]
        assert_relative_eq!(mean, 3.0, epsilon = 0.02);
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert_relative_eq!(var, 6.0, epsilon = 0.08);
        // κ'(0) = λ E[X]
        assert_relative_eq!(l.kappa_d1(0.0), 2.0);
    }
}
