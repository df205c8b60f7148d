//! Closed-form approximate threshold policies.
//!
//! All variants are functions of the deterministic pace
//! `p_det = (q* - q)/(1 - t)` and the remaining-step horizon `h = N(1 - t)`:
//!
//! - `deterministic`: `p_det` itself, optimal in the `N -> inf` limit;
//! - `unconstrained raw`: first-order correction from the Lagrangian
//!   resolution without the `[0,1]` constraint, valid for `h > 1`;
//! - `constrained raw`: KKT resolution with the `[0,1]` constraint, via a
//!   multiplier fixed point;
//! - `calibrated` variants: both of the above with the singular loss factor
//!   `1/(N(1-s))` shifted by `tau/N`, `tau` chosen so that the policy matches
//!   the exact lattice optimum `p = 3/8` at three remaining steps and
//!   `p_det = 1/3`;
//! - `mixed`: constrained near the borders (`1/2 - |p_det - 1/2| < 0.15`),
//!   unconstrained near the center.
//!
//! Every output is clamped to `[0,1]`, and every variant satisfies the
//! reflection identity `p(1 - p_det) = 1 - p(p_det)` by construction.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dp::LatticePolicy;
use crate::error::{Error, Result};

/// Exact lattice anchor used by the shift calibration: at three remaining
/// steps and `p_det = 1/3` the optimal buy probability is `3/8`.
const CALIBRATION_HORIZON: f64 = 3.0;
const CALIBRATION_P_DET: f64 = 1.0 / 3.0;
const CALIBRATION_TARGET: f64 = 0.375;

/// Default fixed-point iteration count for the multiplier solve.
pub const LAMBDA_ITERS: usize = 4;

/// Default half-width of the border region of the mixed heuristic.
pub const DEFAULT_BORDER_WIDTH: f64 = 0.15;

/// Normalized state seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput {
    t: f64,
    q: f64,
    q_star: f64,
    n_total: usize,
}

impl PolicyInput {
    /// Validates `0 <= q <= q_star <= 1`, `t in [0,1)`, `N >= 2`, and the
    /// feasibility `q_star - q <= 1 - t`.
    pub fn new(t: f64, q: f64, q_star: f64, n_total: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        if !(0.0..=1.0).contains(&q_star) || !(0.0..=q_star).contains(&q) {
            return Err(Error::InvalidInput(format!(
                "need 0 <= q <= q_star <= 1, got q = {q}, q_star = {q_star}"
            )));
        }
        if n_total < 2 {
            return Err(Error::InvalidInput(format!(
                "need N >= 2 opportunities, got {n_total}"
            )));
        }
        if q_star - q > 1.0 - t + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "infeasible state: remaining quantity {} exceeds remaining time {}",
                q_star - q,
                1.0 - t
            )));
        }
        Ok(PolicyInput {
            t,
            q,
            q_star,
            n_total,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Deterministic pace `(q* - q)/(1 - t)`, clamped to `[0,1]`.
    pub fn p_det(&self) -> f64 {
        ((self.q_star - self.q) / (1.0 - self.t)).clamp(0.0, 1.0)
    }

    /// Remaining-step horizon `N(1 - t)`.
    pub fn horizon(&self) -> f64 {
        self.n_total as f64 * (1.0 - self.t)
    }
}

/// Shift constants of the calibrated policies, in horizon units (`tau * N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub tau_unconstrained: f64,
    pub tau_constrained: f64,
}

impl CalibrationConstants {
    pub fn new(tau_unconstrained: f64, tau_constrained: f64) -> Result<Self> {
        for tau in [tau_unconstrained, tau_constrained] {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(Error::Parameter(format!("shift must be positive, got {tau}")));
            }
        }
        Ok(CalibrationConstants {
            tau_unconstrained,
            tau_constrained,
        })
    }

    /// Constants solved from the calibration condition (about 3.5723 and
    /// 1.3445). Computed once and cached.
    pub fn calibrated() -> &'static Self {
        static CACHE: OnceLock<CalibrationConstants> = OnceLock::new();
        CACHE.get_or_init(|| CalibrationConstants {
            tau_unconstrained: calibrate_shift(ShiftVariant::Unconstrained)
                .expect("unconstrained calibration bracket"),
            tau_constrained: calibrate_shift(ShiftVariant::Constrained)
                .expect("constrained calibration bracket"),
        })
    }
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self::calibrated().clone()
    }
}

/// Deterministic pacing policy (the `N -> inf` optimum).
pub fn p_deterministic(input: &PolicyInput) -> f64 {
    input.p_det()
}

/// Unconstrained Lagrangian solution without shift; requires `N(1-t) > 1`.
///
/// Callers must fall back to the forced boundary values (clamped `p_det`)
/// outside the domain.
pub fn p_unconstrained_raw(input: &PolicyInput) -> Result<f64> {
    unconstrained_raw_core(input.p_det(), input.horizon())
}

/// Shift-calibrated unconstrained solution; defined on all of `[0,1)`.
pub fn p_unconstrained_calibrated(input: &PolicyInput, constants: &CalibrationConstants) -> f64 {
    unconstrained_core(input.p_det(), input.horizon(), constants.tau_unconstrained)
}

/// Constrained KKT solution without shift; falls back to clamped `p_det`
/// when `N(1-t) <= 1`.
pub fn p_constrained_raw(input: &PolicyInput) -> f64 {
    constrained_core(input.p_det(), input.horizon(), 0.0)
}

/// Shift-calibrated constrained solution.
pub fn p_constrained_calibrated(input: &PolicyInput, constants: &CalibrationConstants) -> f64 {
    constrained_core(input.p_det(), input.horizon(), constants.tau_constrained)
}

/// Border heuristic: constrained near `p_det in {0,1}`, unconstrained near
/// the center.
pub fn p_mixed(input: &PolicyInput, constants: &CalibrationConstants, border_width: f64) -> f64 {
    mixed_core(
        input.p_det(),
        input.horizon(),
        constants,
        border_width,
    )
}

/// Outcome of the multiplier fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSolve {
    /// Interior multiplier; feed it to the policy formula.
    Multiplier(f64),
    /// `|λ|` reached 1: the policy pins to the boundary on this side.
    Saturated(BoundarySide),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundarySide {
    Zero,
    One,
}

/// Solve the constrained multiplier by iterating the fixed-point map
/// `iters` times from `λ0 = 1 - 2·p_det`.
///
/// The map follows the shifted cutoff resolution
///
/// ```text
/// λ <- [ (1-2p_det) + (shift-1)(1-|λ|)/h ] /
///      [ 1 + (1 + ln((h+shift-1)(1-|λ|)/|λ|)) / h ]
/// ```
///
/// in the frame reflected to `p_det <= 1/2`; the sign is restored at the end,
/// which enforces `p(1-p_det) = 1 - p(p_det)` exactly.
pub fn solve_lambda(p_det: f64, horizon: f64, shift: f64, iters: usize) -> LambdaSolve {
    let signed = 1.0 - 2.0 * p_det;
    if signed == 0.0 {
        return LambdaSolve::Multiplier(0.0);
    }
    let sign = signed.signum();
    let d = signed.abs();
    let mut lam = d;
    for _ in 0..iters {
        if lam.abs() >= 1.0 {
            return LambdaSolve::Saturated(side_of(sign * lam));
        }
        let spread = 1.0 - lam.abs();
        let log_arg = (horizon + shift - 1.0) * spread / lam.abs();
        if log_arg <= 0.0 || !log_arg.is_finite() && lam.abs() > 0.0 {
            return LambdaSolve::Saturated(side_of(sign * lam));
        }
        let numerator = d + (shift - 1.0) * spread / horizon;
        let denominator = 1.0 + (1.0 + log_arg.ln()) / horizon;
        lam = numerator / denominator;
        if !lam.is_finite() {
            return LambdaSolve::Saturated(side_of(sign));
        }
    }
    if lam.abs() >= 1.0 {
        return LambdaSolve::Saturated(side_of(sign * lam));
    }
    LambdaSolve::Multiplier(sign * lam)
}

fn side_of(signed_lambda: f64) -> BoundarySide {
    if signed_lambda > 0.0 {
        BoundarySide::Zero
    } else {
        BoundarySide::One
    }
}

/// Which calibrated family [`calibrate_shift`] targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftVariant {
    Unconstrained,
    Constrained,
}

/// Solve the calibration condition "policy at `(h = 3, p_det = 1/3)` equals
/// `3/8`" for the shift, by bisection on `(0, 100]`.
///
/// For the unconstrained family this is the root of
/// `(1 + ln(x+2)/3)(1 - 1/(x+3)) = 4/3`; for the constrained family the
/// condition goes through the multiplier solve.
pub fn calibrate_shift(variant: ShiftVariant) -> Result<f64> {
    let objective = |shift: f64| -> f64 {
        let p = match variant {
            ShiftVariant::Unconstrained => {
                unconstrained_core(CALIBRATION_P_DET, CALIBRATION_HORIZON, shift)
            }
            ShiftVariant::Constrained => {
                constrained_core(CALIBRATION_P_DET, CALIBRATION_HORIZON, shift)
            }
        };
        p - CALIBRATION_TARGET
    };
    let (mut lo, mut hi) = (1e-9, 100.0);
    let (f_lo, f_hi) = (objective(lo), objective(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_lo * f_hi > 0.0 {
        return Err(Error::CalibrationFailed(format!(
            "no sign change on ({lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"
        )));
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if objective(mid) * f_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// --- core closed forms on (p_det, horizon) ---------------------------------

pub(crate) fn unconstrained_raw_core(p_det: f64, horizon: f64) -> Result<f64> {
    if horizon <= 1.0 {
        return Err(Error::EndOfHorizon(horizon));
    }
    let bracket = (1.0 + (horizon - 1.0).ln() / horizon) * (1.0 - 1.0 / horizon);
    Ok((0.5 + (p_det - 0.5) / bracket).clamp(0.0, 1.0))
}

pub(crate) fn unconstrained_core(p_det: f64, horizon: f64, shift: f64) -> f64 {
    if horizon + shift <= 1.0 {
        return p_det.clamp(0.0, 1.0);
    }
    let bracket = (1.0 + (horizon + shift - 1.0).ln() / horizon) * (1.0 - 1.0 / (horizon + shift));
    if bracket <= 0.0 {
        return p_det.clamp(0.0, 1.0);
    }
    (0.5 + (p_det - 0.5) / bracket).clamp(0.0, 1.0)
}

pub(crate) fn constrained_core(p_det: f64, horizon: f64, shift: f64) -> f64 {
    if horizon + shift <= 1.0 {
        return p_det.clamp(0.0, 1.0);
    }
    match solve_lambda(p_det, horizon, shift, LAMBDA_ITERS) {
        LambdaSolve::Multiplier(lambda) => {
            let loss = 1.0 - 1.0 / (horizon + shift);
            (0.5 - 0.5 * lambda / loss).clamp(0.0, 1.0)
        }
        LambdaSolve::Saturated(BoundarySide::Zero) => 0.0,
        LambdaSolve::Saturated(BoundarySide::One) => 1.0,
    }
}

pub(crate) fn mixed_core(
    p_det: f64,
    horizon: f64,
    constants: &CalibrationConstants,
    border_width: f64,
) -> f64 {
    if 0.5 - (p_det - 0.5).abs() < border_width {
        constrained_core(p_det, horizon, constants.tau_constrained)
    } else {
        unconstrained_core(p_det, horizon, constants.tau_unconstrained)
    }
}

// --- lattice adapter --------------------------------------------------------

/// Closed-form policy family, for sweeps and policy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    Deterministic,
    UnconstrainedRaw,
    ConstrainedRaw,
    UnconstrainedCalibrated,
    ConstrainedCalibrated,
    Mixed,
}

impl PolicyVariant {
    pub const ALL: [PolicyVariant; 6] = [
        PolicyVariant::Deterministic,
        PolicyVariant::UnconstrainedRaw,
        PolicyVariant::ConstrainedRaw,
        PolicyVariant::UnconstrainedCalibrated,
        PolicyVariant::ConstrainedCalibrated,
        PolicyVariant::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyVariant::Deterministic => "deterministic",
            PolicyVariant::UnconstrainedRaw => "unconstrained_raw",
            PolicyVariant::ConstrainedRaw => "constrained_raw",
            PolicyVariant::UnconstrainedCalibrated => "unconstrained_calibrated",
            PolicyVariant::ConstrainedCalibrated => "constrained_calibrated",
            PolicyVariant::Mixed => "mixed",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown policy variant {name:?}")))
    }
}

impl std::fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A closed-form variant bound to an `(N, Q*)` lattice.
///
/// Raw-variant domain holes fall back to the clamped deterministic pace;
/// boundary cells return their forced values.
#[derive(Debug, Clone)]
pub struct ClosedFormPolicy {
    variant: PolicyVariant,
    n_steps: usize,
    q_star: usize,
    constants: CalibrationConstants,
    border_width: f64,
}

impl ClosedFormPolicy {
    pub fn new(variant: PolicyVariant, n_steps: usize, q_star: usize) -> Self {
        ClosedFormPolicy {
            variant,
            n_steps,
            q_star,
            constants: CalibrationConstants::default(),
            border_width: DEFAULT_BORDER_WIDTH,
        }
    }

    pub fn with_constants(mut self, constants: CalibrationConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_border_width(mut self, border_width: f64) -> Self {
        self.border_width = border_width;
        self
    }

    pub fn variant(&self) -> PolicyVariant {
        self.variant
    }
}

impl LatticePolicy for ClosedFormPolicy {
    fn prob(&self, n: usize, q: usize) -> f64 {
        if q >= self.q_star {
            return 0.0;
        }
        if n >= self.n_steps {
            return 1.0;
        }
        let remaining = self.n_steps - n;
        let to_buy = self.q_star - q;
        if to_buy >= remaining {
            return 1.0;
        }
        let horizon = remaining as f64;
        let p_det = to_buy as f64 / horizon;
        match self.variant {
            PolicyVariant::Deterministic => p_det,
            PolicyVariant::UnconstrainedRaw => {
                unconstrained_raw_core(p_det, horizon).unwrap_or_else(|_| p_det.clamp(0.0, 1.0))
            }
            PolicyVariant::ConstrainedRaw => constrained_core(p_det, horizon, 0.0),
            PolicyVariant::UnconstrainedCalibrated => {
                unconstrained_core(p_det, horizon, self.constants.tau_unconstrained)
            }
            PolicyVariant::ConstrainedCalibrated => {
                constrained_core(p_det, horizon, self.constants.tau_constrained)
            }
            PolicyVariant::Mixed => {
                mixed_core(p_det, horizon, &self.constants, self.border_width)
            }
        }
    }
}
