//! Congestion prediction under routing-invariant placement perturbations.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`layout`]: netlists, placements, the G-Cell grid and per-cell move boxes,
//!   plus a seeded synthetic benchmark generator.
//! - [`features`]: RUDY / PinRUDY / MacroRegion maps and their adjoint with
//!   respect to cell coordinates.
//! - [`predictor`]: a small fully-convolutional network and a one-layer graph
//!   convolution model, both with hand-written reverse mode.
//! - [`oracle`]: a deterministic tile-level router producing demand maps used
//!   as labels and as the invariance certificate for perturbations.
//! - [`perturb`]: the sparse box-constrained projection, momentum PGD with
//!   restarts, and the random baseline.
//! - [`metrics`] and [`train`]: evaluation, vanilla and adversarial training.

pub mod error;
pub mod features;
pub mod json;
pub mod layout;
pub mod metrics;
pub mod oracle;
pub mod perturb;
pub mod predictor;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
