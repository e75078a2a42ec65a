use crate::error::{invalid, Result};
use crate::math::{gamma_p, gamma_q, gauss_legendre};
use alloc::{format, vec::Vec};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

/// Law of a nonnegative jump size `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JumpLaw {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Gamma { shape: f64, rate: f64 },
    Tabulated(TabulatedCdf),
}

/// Piecewise-linear CDF through `(x, F(x))` knots; the density is constant
/// between knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<RawTable> for TabulatedCdf {
    type Error = crate::Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        TabulatedCdf::new(raw.points)
    }
}

impl From<TabulatedCdf> for RawTable {
    fn from(t: TabulatedCdf) -> Self {
        RawTable {
            points: t.xs.into_iter().zip(t.ps).collect(),
        }
    }
}

impl TabulatedCdf {
    /// Knots must be strictly increasing in both coordinates, start at
    /// `x >= 0` with `F <= 1e-12` and end with `F >= 1 - 1e-12`. End masses
    /// below those thresholds are dropped.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("jumps.points", "need at least two knots"));
        }
        if points.iter().any(|&(x, p)| !x.is_finite() || !p.is_finite()) {
            return Err(invalid("jumps.points", "knots must be finite"));
        }
        if points[0].0 < 0.0 {
            return Err(invalid("jumps.points", "jump sizes must be nonnegative"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(invalid(
                "jumps.points",
                "CDF knots must be strictly increasing in x and F",
            ));
        }
        let p0 = points[0].1;
        let pn = points[points.len() - 1].1;
        if p0.abs() > 1e-12 || (pn - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "jumps.points",
                format!("CDF must run from 0 to 1 (got {p0} .. {pn})"),
            ));
        }
        let (xs, mut ps): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let n = ps.len();
        ps[0] = 0.0;
        ps[n - 1] = 1.0;
        Ok(Self { xs, ps })
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.xs
            .windows(2)
            .zip(self.ps.windows(2))
            .map(|(x, p)| (x[0], x[1], p[1] - p[0]))
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ps[i] + t * (self.ps[i + 1] - self.ps[i])
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.ps.len();
        let i = self.ps.partition_point(|&p| p <= u).clamp(1, n - 1) - 1;
        let t = (u - self.ps[i]) / (self.ps[i + 1] - self.ps[i]);
        self.xs[i] + t * (self.xs[i + 1] - self.xs[i])
    }
}

impl JumpLaw {
    pub fn exponential(rate: f64) -> Self {
        JumpLaw::Exponential { rate }
    }

    pub fn deterministic(value: f64) -> Self {
        JumpLaw::Deterministic { value }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be a positive finite real, got {v}")))
            }
        };
        match *self {
            JumpLaw::Exponential { rate } => pos("jumps.rate", rate),
            JumpLaw::Deterministic { value } => pos("jumps.value", value),
            JumpLaw::Gamma { shape, rate } => pos("jumps.shape", shape).and(pos("jumps.rate", rate)),
            JumpLaw::Tabulated(_) => Ok(()),
        }
    }

    /// The law of `factor * X`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(invalid("factor", format!("must be a positive finite real, got {factor}")));
        }
        Ok(match self {
            JumpLaw::Exponential { rate } => JumpLaw::Exponential { rate: rate / factor },
            JumpLaw::Deterministic { value } => JumpLaw::Deterministic { value: value * factor },
            JumpLaw::Gamma { shape, rate } => JumpLaw::Gamma {
                shape: *shape,
                rate: rate / factor,
            },
            JumpLaw::Tabulated(t) => JumpLaw::Tabulated(TabulatedCdf::new(
                t.xs.iter().zip(&t.ps).map(|(x, p)| (x * factor, *p)).collect(),
            )?),
        })
    }

    /// Checks the power-of-2 normalization `E[X] = 1`.
    pub fn validate_unit_mean(&self) -> Result<()> {
        self.validate()?;
        let m = self.mean();
        if (m - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "jumps",
                format!("power-of-2 model requires mean-1 jumps (E[X] = 1), got mean {m}"),
            ));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::Deterministic { value } => *value,
            JumpLaw::Gamma { shape, rate } => shape / rate,
            JumpLaw::Tabulated(t) => t.segments().map(|(a, b, w)| w * 0.5 * (a + b)).sum(),
        }
    }

    /// Supremum of the interval `[0, θ_max)` on which the MGF is finite.
    pub fn theta_max(&self) -> f64 {
        match self {
            JumpLaw::Exponential { rate } | JumpLaw::Gamma { rate, .. } => *rate,
            JumpLaw::Deterministic { .. } | JumpLaw::Tabulated(_) => f64::INFINITY,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            JumpLaw::Exponential { rate } => -(-rate * x).exp_m1(),
            JumpLaw::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            JumpLaw::Gamma { shape, rate } => gamma_p(*shape, rate * x),
            JumpLaw::Tabulated(t) => t.cdf(x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match self {
            JumpLaw::Exponential { rate } if x >= 0.0 => (-rate * x).exp(),
            JumpLaw::Gamma { shape, rate } if x >= 0.0 => gamma_q(*shape, rate * x),
            _ => 1.0 - self.cdf(x),
        }
    }

    /// `E[(X - x)^+]`, which is `∫_x^∞ F̄(y) dy`.
    pub fn stop_loss(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.mean() - x;
        }
        match self {
            JumpLaw::Exponential { rate } => (-rate * x).exp() / rate,
            JumpLaw::Deterministic { value } => (value - x).max(0.0),
            JumpLaw::Gamma { shape, rate } => {
                let z = rate * x;
                (shape / rate * gamma_q(shape + 1.0, z) - x * gamma_q(*shape, z)).max(0.0)
            }
            JumpLaw::Tabulated(t) => t
                .segments()
                .map(|(a, b, w)| {
                    if x <= a {
                        w * (0.5 * (a + b) - x)
                    } else if x >= b {
                        0.0
                    } else {
                        w * (b - x) * (b - x) / (2.0 * (b - a))
                    }
                })
                .sum(),
        }
    }

    /// `E[X^n e^{θX}]` for `n <= 2` and any real `θ`; `+∞` when divergent.
    pub fn moment_exp(&self, n: u32, theta: f64) -> f64 {
        debug_assert!(n <= 2);
        if theta >= self.theta_max() {
            return f64::INFINITY;
        }
        match *self {
            JumpLaw::Exponential { rate } => {
                let d = rate - theta;
                match n {
                    0 => rate / d,
                    1 => rate / (d * d),
                    _ => 2.0 * rate / (d * d * d),
                }
            }
            JumpLaw::Deterministic { value } => value.powi(n as i32) * (theta * value).exp(),
            JumpLaw::Gamma { shape, rate } => {
                let d = rate - theta;
                let m0 = (shape * (rate / d).ln()).exp();
                match n {
                    0 => m0,
                    1 => shape / d * m0,
                    _ => shape * (shape + 1.0) / (d * d) * m0,
                }
            }
            JumpLaw::Tabulated(ref t) => t
                .segments()
                .map(|(a, b, w)| {
                    w / (b - a) * gauss_legendre(a, b, |x| x.powi(n as i32) * (theta * x).exp())
                })
                .sum(),
        }
    }

    /// Moment generating function `E[e^{θX}]` for `θ >= 0`; `+∞` at or
    /// beyond `θ_max`.
    pub fn mgf(&self, theta: f64) -> f64 {
        self.moment_exp(0, theta)
    }

    /// `1 - E[e^{-sX}]` without cancellation for small `s`.
    pub fn one_minus_laplace(&self, s: f64) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => s / (rate + s),
            JumpLaw::Deterministic { value } => -(-s * value).exp_m1(),
            JumpLaw::Gamma { shape, rate } => -(-shape * (s / rate).ln_1p()).exp_m1(),
            JumpLaw::Tabulated(ref t) => t
                .segments()
                .map(|(a, b, w)| w / (b - a) * gauss_legendre(a, b, |x| -(-s * x).exp_m1()))
                .sum(),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => -(-u).ln_1p() / rate,
            JumpLaw::Deterministic { value } => *value,
            JumpLaw::Gamma { .. } => {
                let mut hi = self.mean().max(1.0);
                while self.cdf(hi) < u {
                    hi *= 2.0;
                }
                crate::optimize::bisect(|x| self.cdf(x) - u, 0.0, hi, 1e-14).unwrap_or(hi)
            }
            JumpLaw::Tabulated(t) => t.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => super::exp1(rng) / rate,
            JumpLaw::Deterministic { value } => *value,
            JumpLaw::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            JumpLaw::Tabulated(t) => t.quantile(rng.random::<f64>()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;
    use crate::RngStream;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn triangle() -> JumpLaw {
        // density 2x on [0, 1] tabulated coarsely; mean of the tabulation
        let pts = (0..=20).map(|i| {
            let x = i as f64 / 20.0;
            (x, x * x)
        });
        JumpLaw::Tabulated(TabulatedCdf::new(pts.collect()).unwrap())
    }

    #[test]
    fn mgf_examples() {
        assert_eq!(JumpLaw::exponential(1.0).mgf(0.0), 1.0);
        assert_relative_eq!(JumpLaw::exponential(1.0).mgf(0.5), 2.0, epsilon = 1e-15);
        assert_relative_eq!(JumpLaw::deterministic(1.0).mgf(1.0), core::f64::consts::E, epsilon = 1e-15);
        assert!(JumpLaw::exponential(1.0).mgf(1.0).is_infinite());
        assert!(JumpLaw::Gamma { shape: 2.0, rate: 3.0 }.mgf(3.5).is_infinite());
    }

    #[test]
    fn gamma_mgf_and_moments() {
        let g = JumpLaw::Gamma { shape: 2.0, rate: 2.0 };
        assert_relative_eq!(g.mean(), 1.0);
        assert_relative_eq!(g.mgf(1.0), 4.0, epsilon = 1e-14);
        // E[X e^{θX}] = d/dθ (r/(r-θ))^k = k r^k / (r-θ)^{k+1}
        assert_relative_eq!(g.moment_exp(1, 1.0), 2.0 * 4.0 / 1.0, epsilon = 1e-13);
    }

    #[test]
    fn tabulated_transforms_match_direct_quadrature() {
        let law = triangle();
        // Piecewise-linear CDF through x^2: density is a step function.
        let direct: f64 = (0..20)
            .map(|i| {
                let (a, b) = (i as f64 / 20.0, (i + 1) as f64 / 20.0);
                let w = b * b - a * a;
                // ∫ e^{θx} dx / (b - a) analytically, θ = 0.7
                w * ((0.7 * b).exp() - (0.7 * a).exp()) / (0.7 * (b - a))
            })
            .sum();
        assert_relative_eq!(law.mgf(0.7), direct, max_relative = 1e-13);
        assert_relative_eq!(law.one_minus_laplace(0.7), 1.0 - law.moment_exp(0, -0.7), epsilon = 1e-14);
        assert_relative_eq!(law.stop_loss(0.0), law.mean(), epsilon = 1e-15);
    }

    #[test]
    fn tabulated_rejects_bad_knots() {
        assert!(TabulatedCdf::new(vec![(0.0, 0.0), (1.0, 0.5)]).is_err());
        assert!(TabulatedCdf::new(vec![(0.0, 0.0), (1.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(TabulatedCdf::new(vec![(-1.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn stop_loss_matches_integrated_survival() {
        for law in [
            JumpLaw::exponential(1.0),
            JumpLaw::Gamma { shape: 2.5, rate: 2.5 },
            triangle(),
        ] {
            for &x in &[0.1, 0.5, 0.9, 1.7] {
                let q: f64 = (0..800)
                    .map(|i| {
                        let a = x + i as f64 * 0.05;
                        gauss_legendre(a, a + 0.05, |y| law.survival(y))
                    })
                    .sum();
                assert_relative_eq!(law.stop_loss(x), q, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn parametric_samplers_pass_ks() {
        let n = 1_000_000;
        for (i, law) in [
            JumpLaw::exponential(1.0),
            JumpLaw::exponential(2.5),
            JumpLaw::Gamma { shape: 2.0, rate: 2.0 },
            JumpLaw::Gamma { shape: 0.7, rate: 1.0 },
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = RngStream::new(11, i as u64).rng();
            let mut xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let d = ks_one_sample(&mut xs, |x| law.cdf(x));
            assert!(d < 0.005, "{law:?}: KS = {d}");
        }
    }

    #[test]
    fn tabulated_sampler_follows_cdf() {
        let law = triangle();
        let mut rng = RngStream::new(3, 0).rng();
        let mut xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
        assert!(ks_one_sample(&mut xs, |x| law.cdf(x)) < 0.005);
    }

    #[test]
    fn scaling_multiplies_the_mean() {
        let table = TabulatedCdf::new(vec![(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        for law in [
            JumpLaw::exponential(2.0),
            JumpLaw::deterministic(1.5),
            JumpLaw::Gamma { shape: 2.0, rate: 3.0 },
            JumpLaw::Tabulated(table),
        ] {
            let m = law.mean();
            assert_relative_eq!(law.scaled(2.0).unwrap().mean(), 2.0 * m, max_relative = 1e-12);
        }
        assert!(JumpLaw::exponential(1.0).scaled(0.0).is_err());
    }
}
