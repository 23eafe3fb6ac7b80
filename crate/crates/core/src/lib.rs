//! Discrete spatio-temporal modelling of gridded daily rainfall.
//!
//! Daily rainfall `x(s,t)` on a land-masked grid is explained by binary
//! wet/dry states `Z(s,t)`, a daily pattern label `U(t)` and a location
//! (region) label `V(s)`, coupled through a Markov-random-field prior. The
//! crate provides:
//!
//! - [`grid`]: geometry, seasonal calendar, rainfall fields and aggregates
//! - [`synth`]: planted-pattern synthetic fields with ground truth
//! - [`model`]: the unnormalized joint density and exact single-site conditionals
//! - [`sampler`]: checkerboard Gibbs sweeps with MAP tracking
//! - [`patterns`]: canonical spatial/temporal patterns, prominence, families
//! - [`transitions`]: pattern transition matrices, subsequences, season simulation
//! - [`spells`]: active/break spells and local/regional wet/dry spells
//! - [`baselines`]: k-means, spectral clustering and evaluation metrics
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature runs site updates on a rayon pool; results
//! do not depend on the number of workers.

#![cfg_attr(not(feature = "std"), no_std)]
extern crate alloc;

pub mod baselines;
mod error;
mod exec;
pub mod grid;
pub mod matrix;
pub mod model;
pub mod patterns;
pub mod rng;
pub mod sampler;
pub mod spells;
pub mod stats;
pub mod synth;
pub mod transitions;

pub use error::{Error, Result};
pub use grid::{CalendarDay, CalendarIndex, GridGeometry, Location, RainfallField, YearClass};
pub use matrix::Matrix;
pub use model::{ClusterPrototypes, EmissionParams, LatentState, ModelParams};
pub use sampler::{Initialization, SamplerConfig, SamplerResult};
