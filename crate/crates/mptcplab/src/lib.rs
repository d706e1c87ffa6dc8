//! Simulation and analysis toolkit for multipath TCP congestion control.
//!
//! The crate models a network of links and multi-route sources as a coupled
//! rate/price dynamical system, implements the window-update rules of the
//! common MP-TCP variants (NewReno, EWTCP, Coupled, Semicoupled, Max, the
//! generalized family and Balia) in both their fluid and packet-level forms,
//! and provides:
//!
//! - a fixed-step fluid integrator with boundary projection and Lyapunov
//!   diagnostics ([`fluid`]),
//! - direct equilibrium solvers for the generalized family and for the
//!   single-bottleneck friendliness test network ([`equilibrium`]),
//! - numerical checkers for the design criteria C0-C5, Jacobians,
//!   linearization spectra and the window-oscillation metric ([`analysis`]),
//! - an event-driven packet simulator with drop-tail or Bernoulli losses
//!   ([`packet`]),
//! - a config-driven experiment runner with built-in reference scenarios
//!   ([`config`], [`experiments`], [`runner`]).
//!
//! Every runnable capability has a corresponding example under `examples/`;
//! the `mptcplab` binary exposes the same functionality behind `run`,
//! `reproduce`, `list-experiments` and `validate` subcommands.

// `!(x > 0.0)` rejects NaN along with nonpositives, which plain `x <= 0.0`
// would not; index loops below walk several parallel arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod algorithms;
pub mod analysis;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod fluid;
pub mod linalg;
pub mod net;
pub mod packet;
pub mod runner;

pub use error::{Error, Result};
