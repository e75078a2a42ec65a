use super::JumpLaw;
use crate::error::{Error, Result};
use alloc::{format, vec::Vec};
use rand::Rng;
#[allow(unused_imports)]
use num_traits::Float;

const GRID_POINTS: usize = 4096;
const TAIL_MASS: f64 = 1e-3;

/// Integrated tail `X̄` of a jump law: density `F̄(x) / E[X]` on `[0, ∞)`.
///
/// `cdf` is exact for every kind (through the stop-loss transform). Sampling
/// is exact for exponential and deterministic jumps; otherwise it inverts a
/// piecewise-linear CDF on 4096 knots over `[0, q_0.999]` and continues with an
/// exponential tail matched to the hazard rate at `q_0.999`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedTail {
    law: JumpLaw,
    mean: f64,
    sampler: TailSampler,
}

#[derive(Debug, Clone, PartialEq)]
enum TailSampler {
    Exponential { rate: f64 },
    Uniform { width: f64 },
    Grid {
        xs: Vec<f64>,
        cdf: Vec<f64>,
        tail_rate: f64,
    },
}

impl IntegratedTail {
    pub fn new(law: &JumpLaw) -> Result<Self> {
        law.validate()?;
        let mean = law.mean();
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::IntegratedTailUndefined(format!(
                "jump law has mean {mean}"
            )));
        }
        let sampler = match *law {
            JumpLaw::Exponential { rate } => TailSampler::Exponential { rate },
            JumpLaw::Deterministic { value } => TailSampler::Uniform { width: value },
            _ => Self::grid_sampler(law, mean)?,
        };
        Ok(Self {
            law: law.clone(),
            mean,
            sampler,
        })
    }

    fn grid_sampler(law: &JumpLaw, mean: f64) -> Result<TailSampler> {
        let surv = |x: f64| law.stop_loss(x) / mean;
        let mut hi = mean.max(1e-3);
        while surv(hi) > TAIL_MASS {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::IntegratedTailUndefined("tail does not decay".into()));
            }
        }
        let q = crate::optimize::bisect(|x| surv(x) - TAIL_MASS, 0.0, hi, 1e-15)?;
        let xs: Vec<f64> = (0..GRID_POINTS)
            .map(|i| q * i as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let cdf: Vec<f64> = xs.iter().map(|&x| 1.0 - surv(x)).collect();
        let tail_rate = law.survival(q) / (mean * surv(q));
        Ok(TailSampler::Grid { xs, cdf, tail_rate })
    }

    pub fn jump_law(&self) -> &JumpLaw {
        &self.law
    }

    /// `P(X̄ <= x) = 1 - E[(X - x)^+] / E[X]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        (1.0 - self.law.stop_loss(x) / self.mean).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        // E[X̄] = E[X²] / (2 E[X])
        self.law.moment_exp(2, 0.0) / (2.0 * self.mean)
    }

    /// `E[e^{-sX̄}] = (1 - E[e^{-sX}]) / (s E[X])`.
    pub fn laplace(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        self.law.one_minus_laplace(s) / (s * self.mean)
    }

    /// `E[X̄ e^{-sX̄}]`, minus the first derivative of [`Self::laplace`].
    pub fn laplace_d1(&self, s: f64) -> f64 {
        if s == 0.0 {
            return self.mean();
        }
        let g = self.law.one_minus_laplace(s);
        let a1 = self.law.moment_exp(1, -s);
        (g - s * a1) / (s * s * self.mean)
    }

    /// `E[X̄² e^{-sX̄}]`, the second derivative of [`Self::laplace`].
    pub fn laplace_d2(&self, s: f64) -> f64 {
        let g = self.law.one_minus_laplace(s);
        let a1 = self.law.moment_exp(1, -s);
        let a2 = self.law.moment_exp(2, -s);
        (2.0 * g - 2.0 * a1 * s - a2 * s * s) / (s * s * s * self.mean)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            TailSampler::Exponential { rate } => super::exp1(rng) / rate,
            TailSampler::Uniform { width } => rng.random::<f64>() * width,
            TailSampler::Grid { xs, cdf, tail_rate } => {
                let u: f64 = rng.random();
                let last = cdf.len() - 1;
                if u >= cdf[last] {
                    let q = xs[last];
                    return q + ((1.0 - cdf[last]) / (1.0 - u)).ln() / tail_rate;
                }
                let i = cdf.partition_point(|&c| c <= u).clamp(1, last) - 1;
                let t = (u - cdf[i]) / (cdf[i + 1] - cdf[i]);
                xs[i] + t * (xs[i + 1] - xs[i])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::TabulatedCdf;
    use crate::stats::ks_one_sample;
    use crate::RngStream;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_tail_is_exponential() {
        let t = IntegratedTail::new(&JumpLaw::exponential(1.0)).unwrap();
        for &x in &[0.1, 1.0, 4.0] {
            assert_relative_eq!(t.cdf(x), 1.0 - (-x).exp(), epsilon = 1e-15);
        }
        assert_eq!(t.cdf(0.0), 0.0);
        assert_eq!(t.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn deterministic_tail_is_uniform() {
        let t = IntegratedTail::new(&JumpLaw::deterministic(1.0)).unwrap();
        for &x in &[0.1, 0.5, 0.99] {
            assert_relative_eq!(t.cdf(x), x, epsilon = 1e-15);
        }
        assert_eq!(t.cdf(1.5), 1.0);
        let mut rng = RngStream::new(5, 0).rng();
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| t.sample(&mut rng)).collect();
        assert!(ks_one_sample(&mut xs, |x| t.cdf(x)) < 0.005);
    }

    #[test]
    fn infinite_mean_is_rejected() {
        let bad = JumpLaw::Exponential { rate: 0.0 };
        assert!(IntegratedTail::new(&bad).is_err());
    }

    #[test]
    fn grid_tail_preserves_mass_and_samples_correctly() {
        let laws = [
            JumpLaw::Gamma { shape: 2.0, rate: 2.0 },
            JumpLaw::Gamma { shape: 0.5, rate: 0.5 },
            JumpLaw::Tabulated(
                TabulatedCdf::new(alloc::vec![(0.0, 0.0), (0.5, 0.25), (1.0, 0.5), (2.0, 1.0)]).unwrap(),
            ),
        ];
        for (i, law) in laws.iter().enumerate() {
            let t = IntegratedTail::new(law).unwrap();
            assert_relative_eq!(t.cdf(1e9), 1.0, epsilon = 1e-6);
            let mut rng = RngStream::new(9, i as u64).rng();
            let mut xs: Vec<f64> = (0..500_000).map(|_| t.sample(&mut rng)).collect();
            let d = ks_one_sample(&mut xs, |x| t.cdf(x));
            assert!(d < 0.005, "{law:?}: KS = {d}");
        }
    }

    #[test]
    fn laplace_derivatives_match_finite_differences() {
        let t = IntegratedTail::new(&JumpLaw::Gamma { shape: 3.0, rate: 3.0 }).unwrap();
        let s = 0.8;
        let h = 1e-4;
        let d1 = -(t.laplace(s + h) - t.laplace(s - h)) / (2.0 * h);
        let d2 = (t.laplace(s + h) - 2.0 * t.laplace(s) + t.laplace(s - h)) / (h * h);
        assert_relative_eq!(t.laplace_d1(s), d1, max_relative = 1e-7);
        assert_relative_eq!(t.laplace_d2(s), d2, max_relative = 1e-5);
    }
}
