//! Threshold-on-signal optimal trade execution.
//!
//! A trader who must buy `Q*` shares over `N` opportunities can act on a
//! short-term signal by trading exactly when the signal exceeds a threshold.
//! Parameterizing the threshold by its fill probability `p` turns the problem
//! into a concave resource-allocation problem over the gain map `g(p)`.
//!
//! The crate provides:
//!
//! - [`gain`] — the statistical environment: quantile map, gain map, samplers,
//!   and empirical estimation from `(signal, price_change)` data;
//! - [`dp`] — the exact discrete dynamic-programming benchmark on the
//!   `(step, inventory)` lattice, exact policy evaluation, and performance
//!   ratios;
//! - [`policy`] — closed-form approximate threshold policies (deterministic
//!   pacing, unconstrained and constrained Lagrangian solutions, shift
//!   calibration, and the mixed border heuristic);
//! - [`sim`] — Monte Carlo simulation of the discrete trading dynamics with
//!   reproducible seeding;
//! - [`iab`] — the inventory diffusion limit: Euler scheme for the limiting
//!   SDE, Gaussian moment propagation, and a verifier comparing discrete
//!   ensembles against the asymptotic prediction;
//! - [`almgren`] — Almgren-Chriss schedules mapped to fill probabilities,
//!   with Gaussian uncertainty bands on realized speed and inventory.

pub mod almgren;
pub mod dp;
pub mod error;
pub mod gain;
pub mod iab;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
