//! Travelling waves of mean-field reaction-diffusion particle systems.
//!
//! Waves are built probabilistically: a wave with decay rate `gamma` is a
//! Gumbel mixture over the law of a random variable `V` solving the linear
//! smoothing equation `V = (V_1 + ... + V_k) exp(-gamma A)`. This crate holds
//! the numerical core and has no IO:
//!
//! - [`distmodel`]: jump laws, driving Lévy processes and the increment laws
//!   `A = cT - Γ(T)` and `Y = X̄ + Z`, with exact samplers and transforms.
//! - [`dispersion`]: speed-decay relations, critical points and regimes.
//! - [`smoothing`]: pool iteration for the linear equation and a branching
//!   random walk cross-check.
//! - [`waves`]: profiles, wave sampling, fixed-point checks, tail fits.
//! - [`particles`]: event-driven N-particle simulation and front statistics.
//!
//! Parallel work is expressed through [`exec::Executor`], and every random
//! draw comes from a keyed [`rng::RngStream`], so results do not depend on
//! the number of workers.
#![no_std]

extern crate alloc;

pub mod dispersion;
pub mod distmodel;
pub mod error;
pub mod exec;
pub mod math;
pub mod optimize;
pub mod particles;
pub mod rng;
pub mod smoothing;
pub mod stats;
pub mod waves;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use rng::RngStream;
