//! State-relabeling adversarial active learning on feature vectors.
//!
//! The crate is organized bottom-up:
//!
//! - [`diffcore`]: tensors, a reverse-mode tape, optimizers and a
//!   finite-difference checker.
//! - [`nets`]: encoder with two latent heads, decoders, discriminator and
//!   target classifier.
//! - [`oui`]: uncertainty indicators that relabel unlabeled samples.
//! - [`losses`]: reconstruction, label, discriminator and adversarial objectives.
//! - [`kcenter`]: farthest-first initialization of the labeled pool.
//! - [`alcore`]: pools, oracle, strategies and the experiment loop.
//! - [`data`]: synthetic datasets and CSV ingestion.
//! - [`cli`]: the `sraal` command-line runner.

pub mod alcore;
pub mod cli;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod gradsuite;
pub mod kcenter;
pub mod losses;
pub mod nets;
pub mod oui;

pub use error::{Error, Result};
