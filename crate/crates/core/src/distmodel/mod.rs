//! Jump laws, driving processes and the increment laws built from them.
//!
//! Two increment laws drive everything downstream:
//!
//! - `A = cT - Γ(T)` with `T ~ Exp(1)` for models where the lower particle
//!   copies the higher one ([`IncrementLaw::SyncA`]);
//! - `Y = X̄ + Z` for the power-of-2 model, where `X̄` is the integrated tail
//!   of the jump law and `Z` is exponential with mean `σ²/2`
//!   ([`IncrementLaw::Power2Y`]).

mod increment;
mod jump;
mod levy;
mod tail;

pub use increment::{IncrementLaw, Power2Increment};
pub use jump::{JumpLaw, TabulatedCdf};
pub use levy::LevySpec;
pub use tail::IntegratedTail;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
#[allow(unused_imports)]
use num_traits::Float;

#[inline]
pub(crate) fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

#[inline]
pub(crate) fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard Gumbel draw, `-ln E` with `E ~ Exp(1)`.
#[inline]
pub fn std_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -exp1(rng).ln()
}
