//! Inventory asymptotics of threshold-driven trading.
//!
//! When the buy probability per opportunity stems from a macroscopic field
//! `F(t, q)`, the scaled inventory `Q_n / N` converges to the diffusion
//!
//! ```text
//! dQ̄ = F(t, Q̄) dt/T + sqrt(F(1-F)/N)(t, Q̄) dW/sqrt(T),   Q̄_0 = 0,
//! ```
//!
//! so `Q_n ≈ N·Q̄(nT/N)` with Gaussian fluctuations of order `sqrt(N)`. This
//! module provides the Euler scheme for the limit SDE, first-order Gaussian
//! moment propagation along the mean path, and a verifier that compares
//! discrete Monte Carlo ensembles against the asymptotic prediction.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gain::GainModel;
use crate::sim::{self, SimConfig};

#[derive(Clone)]
enum FieldKind {
    Constant(f64),
    /// Equal-width pieces over `[0, T]`, value per piece.
    PiecewiseConstant { values: Vec<f64> },
    /// `clamp((q* - q)/(1 - t/T), 0, 1)`.
    DeterministicPacing,
    Custom {
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        depends_on_q: bool,
    },
}

/// Macroscopic fill-rate map `F(t, q) ∈ [0,1]` on `[0,T] x [0, q*]` with its
/// discretization scale `N`.
#[derive(Clone)]
pub struct FillRateField {
    kind: FieldKind,
    horizon: f64,
    scale: usize,
    q_star: f64,
}

impl std::fmt::Debug for FillRateField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            FieldKind::Constant(p) => format!("Constant({p})"),
            FieldKind::PiecewiseConstant { values } => {
                format!("PiecewiseConstant({} pieces)", values.len())
            }
            FieldKind::DeterministicPacing => "DeterministicPacing".to_string(),
            FieldKind::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("FillRateField")
            .field("kind", &kind)
            .field("horizon", &self.horizon)
            .field("scale", &self.scale)
            .field("q_star", &self.q_star)
            .finish()
    }
}

fn check_scale(horizon: f64, scale: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Parameter(format!("bad horizon {horizon}")));
    }
    if scale == 0 {
        return Err(Error::Parameter("scale N must be positive".into()));
    }
    Ok(())
}

impl FillRateField {
    pub fn constant(p: f64, horizon: f64, scale: usize) -> Result<Self> {
        check_scale(horizon, scale)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::FieldContract {
                value: p,
                t: 0.0,
                q: 0.0,
            });
        }
        Ok(FillRateField {
            kind: FieldKind::Constant(p),
            horizon,
            scale,
            q_star: 1.0,
        })
    }

    /// Piecewise-constant in time, equal pieces over `[0, T]`.
    pub fn piecewise_constant(values: Vec<f64>, horizon: f64, scale: usize) -> Result<Self> {
        check_scale(horizon, scale)?;
        if values.is_empty() {
            return Err(Error::InvalidInput("need at least one piece".into()));
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::FieldContract {
                value: bad,
                t: 0.0,
                q: 0.0,
            });
        }
        Ok(FillRateField {
            kind: FieldKind::PiecewiseConstant { values },
            horizon,
            scale,
            q_star: 1.0,
        })
    }

    /// The deterministic-pace policy transported to a field.
    pub fn deterministic_pacing(q_star: f64, horizon: f64, scale: usize) -> Result<Self> {
        check_scale(horizon, scale)?;
        if !(0.0..=1.0).contains(&q_star) || q_star == 0.0 {
            return Err(Error::Parameter(format!("bad normalized target {q_star}")));
        }
        Ok(FillRateField {
            kind: FieldKind::DeterministicPacing,
            horizon,
            scale,
            q_star,
        })
    }

    /// Arbitrary user map; `depends_on_q` selects the variance propagation
    /// used by the verifier.
    pub fn custom(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        depends_on_q: bool,
        horizon: f64,
        scale: usize,
        q_star: f64,
    ) -> Result<Self> {
        check_scale(horizon, scale)?;
        Ok(FillRateField {
            kind: FieldKind::Custom {
                f: Arc::new(f),
                depends_on_q,
            },
            horizon,
            scale,
            q_star,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    pub fn depends_on_q(&self) -> bool {
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::PiecewiseConstant { .. } => false,
            FieldKind::DeterministicPacing => true,
            FieldKind::Custom { depends_on_q, .. } => *depends_on_q,
        }
    }

    /// Evaluate with the `[0,1]` output contract enforced.
    pub fn value(&self, t: f64, q: f64) -> Result<f64> {
        let v = self.eval_raw(t, q);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::FieldContract { value: v, t, q });
        }
        Ok(v)
    }

    fn eval_raw(&self, t: f64, q: f64) -> f64 {
        match &self.kind {
            FieldKind::Constant(p) => *p,
            FieldKind::PiecewiseConstant { values } => {
                let idx = ((t / self.horizon) * values.len() as f64).floor() as isize;
                let idx = idx.clamp(0, values.len() as isize - 1) as usize;
                values[idx]
            }
            FieldKind::DeterministicPacing => {
                let remaining = 1.0 - t / self.horizon;
                if remaining <= 0.0 {
                    return if q < self.q_star { 1.0 } else { 0.0 };
                }
                ((self.q_star - q) / remaining).clamp(0.0, 1.0)
            }
            FieldKind::Custom { f, .. } => f(t, q),
        }
    }

    /// Piece values and width when the field is q-independent and piecewise
    /// constant in time.
    fn pieces(&self) -> Option<(Vec<f64>, f64)> {
        match &self.kind {
            FieldKind::Constant(p) => Some((vec![*p], self.horizon)),
            FieldKind::PiecewiseConstant { values } => {
                Some((values.clone(), self.horizon / values.len() as f64))
            }
            _ => None,
        }
    }
}

/// How the verifier propagates the inventory variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceModel {
    /// Integrate `F(1-F)` along the mean path (first order, matches the
    /// q-independent theory exactly).
    FrozenMeanPath,
    /// Linearized covariance ODE `dv = 2 ∂q F/T · v dt + N F(1-F)/T dt`,
    /// required when `F` feeds back on the inventory.
    Linearized,
}

impl VarianceModel {
    pub fn auto_for(field: &FillRateField) -> Self {
        if field.depends_on_q() {
            VarianceModel::Linearized
        } else {
            VarianceModel::FrozenMeanPath
        }
    }
}

/// One Euler-Maruyama path of the limit SDE on an equispaced grid; returns
/// `Q̄` at `steps + 1` grid points. Requires at least one substep per
/// opportunity (`steps >= N`).
pub fn euler_sde<R: Rng + ?Sized>(
    field: &FillRateField,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if steps < field.scale {
        return Err(Error::InvalidInput(format!(
            "steps {steps} below the discretization scale N = {}",
            field.scale
        )));
    }
    let t_total = field.horizon;
    let dt = t_total / steps as f64;
    let n = field.scale as f64;
    let mut q = 0.0f64;
    let mut path = Vec::with_capacity(steps + 1);
    path.push(q);
    for k in 0..steps {
        let t = k as f64 * dt;
        // Field evaluations are clamped into the domain; the state itself
        // keeps its O(1/sqrt(N)) boundary excursions. Truncating the state
        // at a boundary the paths actually touch would bias the mean.
        let f = field.value(t, q.clamp(0.0, field.q_star))?;
        let z: f64 = rng.sample(StandardNormal);
        q += f * dt / t_total + (f * (1.0 - f) / n).sqrt() * (dt / t_total).sqrt() * z;
        path.push(q);
    }
    Ok(path)
}

/// Mean and variance of `Q̄` at requested times over an Euler ensemble.
pub fn euler_ensemble(
    field: &FillRateField,
    steps: usize,
    paths: usize,
    seed: u64,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if paths == 0 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    // Surface contract violations before going parallel.
    let mut probe = sim::path_rng(seed, 0);
    euler_sde(field, steps, &mut probe)?;

    let dt = field.horizon / steps as f64;
    let slots: Vec<usize> = times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(steps))
        .collect();
    let samples: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = sim::path_rng(seed, i as u64);
            let path = euler_sde(field, steps, &mut rng).expect("probed above");
            slots.iter().map(|&s| path[s]).collect()
        })
        .collect();
    let nf = paths as f64;
    Ok((0..times.len())
        .map(|k| {
            let mean = samples.iter().map(|row| row[k]).sum::<f64>() / nf;
            let var = samples
                .iter()
                .map(|row| (row[k] - mean) * (row[k] - mean))
                .sum::<f64>()
                / (nf - 1.0).max(1.0);
            (mean, var)
        })
        .collect())
}

/// Mean and variance of `Q_n = N·Q̄` at time `t`.
///
/// q-independent piecewise-constant fields integrate exactly (the prediction
/// equals the Bernoulli moment sums); other fields use fourth-order
/// integration of the mean ODE with the requested variance propagation.
pub fn gaussian_moments(
    field: &FillRateField,
    t: f64,
    variance: VarianceModel,
) -> Result<(f64, f64)> {
    if !(0.0..=field.horizon + 1e-12).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "time {t} outside [0, {}]",
            field.horizon
        )));
    }
    let n = field.scale as f64;
    let t_total = field.horizon;

    if let Some((values, width)) = field.pieces() {
        // Exact piecewise integration.
        let mut mean_frac = 0.0f64; // ∫ F ds
        let mut var_frac = 0.0f64; // ∫ F(1-F) ds
        let mut remaining = t;
        for &f in &values {
            if remaining <= 0.0 {
                break;
            }
            let span = remaining.min(width);
            mean_frac += f * span;
            var_frac += f * (1.0 - f) * span;
            remaining -= span;
        }
        return Ok((n / t_total * mean_frac, n / t_total * var_frac));
    }

    if t == 0.0 {
        return Ok((0.0, 0.0));
    }

    // RK4 on the augmented state (m, v).
    let substeps = (4 * field.scale).max(2000);
    let dt = t / substeps as f64;
    let mut m = 0.0f64;
    let mut v = 0.0f64;
    let deriv = |s: f64, m: f64, v: f64| -> Result<(f64, f64)> {
        let q = m / n;
        let f = field.value(s, q)?;
        let dm = n * f / t_total;
        let dv = match variance {
            VarianceModel::FrozenMeanPath => n * f * (1.0 - f) / t_total,
            VarianceModel::Linearized => {
                // Central difference in q; fields must tolerate a small
                // neighborhood around the mean path.
                let dq = 1e-5;
                let f_up = field.value(s, q + dq)?;
                let f_dn = field.value(s, q - dq)?;
                let dfdq = (f_up - f_dn) / (2.0 * dq);
                2.0 * dfdq / t_total * v + n * f * (1.0 - f) / t_total
            }
        };
        Ok((dm, dv))
    };
    for k in 0..substeps {
        let s = k as f64 * dt;
        let (k1m, k1v) = deriv(s, m, v)?;
        let (k2m, k2v) = deriv(s + 0.5 * dt, m + 0.5 * dt * k1m, v + 0.5 * dt * k1v)?;
        let (k3m, k3v) = deriv(s + 0.5 * dt, m + 0.5 * dt * k2m, v + 0.5 * dt * k2v)?;
        let (k4m, k4v) = deriv(s + dt, m + dt * k3m, v + dt * k3v)?;
        m += dt / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok((m, v.max(0.0)))
}

/// Asymptotic prediction at a set of checkpoint steps.
#[derive(Debug, Clone, Serialize)]
pub struct IabPrediction {
    pub steps: Vec<usize>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Predict `Q_n` moments at the given lattice steps.
pub fn predict(
    field: &FillRateField,
    checkpoints: &[usize],
    variance: VarianceModel,
) -> Result<IabPrediction> {
    let n = field.scale;
    let mut mean = Vec::with_capacity(checkpoints.len());
    let mut var = Vec::with_capacity(checkpoints.len());
    for &ck in checkpoints {
        if ck > n {
            return Err(Error::InvalidInput(format!(
                "checkpoint {ck} beyond N = {n}"
            )));
        }
        let t = ck as f64 * field.horizon / n as f64;
        let (m, v) = gaussian_moments(field, t, variance)?;
        mean.push(m);
        var.push(v);
    }
    Ok(IabPrediction {
        steps: checkpoints.to_vec(),
        mean,
        variance: var,
    })
}

/// One checkpoint of the discrete-vs-asymptotic comparison.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub checkpoint: usize,
    pub pred_mean: f64,
    pub pred_var: f64,
    pub emp_mean: f64,
    pub emp_var: f64,
    /// `(emp_mean - pred_mean) / (pred_std / sqrt(paths))`.
    pub z_mean: f64,
    pub var_ratio: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub paths: usize,
    pub scale: usize,
    pub variance_model: String,
    pub rows: Vec<VerifyRow>,
}

/// Run the discrete chain with `p(n,Q) = F(nT/N, Q/N)` and compare ensemble
/// moments against the asymptotic prediction.
///
/// The chain is unforced (no completion target); the variance propagation is
/// selected automatically from the field's q-dependence.
pub fn verify(
    field: &FillRateField,
    paths: usize,
    checkpoints: &[usize],
    seed: u64,
) -> Result<VerifyReport> {
    let n = field.scale;
    let t_total = field.horizon;
    // Contract scan over the reachable lattice.
    for step in 0..n {
        for q in 0..=step {
            field.value(step as f64 * t_total / n as f64, q as f64 / n as f64)?;
        }
    }
    let variance = VarianceModel::auto_for(field);
    let prediction = predict(field, checkpoints, variance)?;

    let model = GainModel::linear_uniform_with_noise(0.5, 0.0);
    let mut cfg = SimConfig::new(n, n, &model);
    cfg.paths = paths;
    cfg.seed = seed;
    cfg.checkpoints = checkpoints.to_vec();
    cfg.force_completion = false;
    let field_ref = &field;
    let policy = move |step: usize, q: usize| {
        field_ref.eval_raw(step as f64 * t_total / n as f64, q as f64 / n as f64)
    };
    let ensemble = sim::run_ensemble(&cfg, &policy)?;

    let nf = paths as f64;
    let mut rows = Vec::with_capacity(checkpoints.len());
    for (k, &ck) in checkpoints.iter().enumerate() {
        let emp_mean = ensemble.summary.checkpoints[k].mean_q;
        let emp_var = ensemble.summary.checkpoints[k].var_q;
        let (mut m2, mut m3, mut m4) = (0.0f64, 0.0f64, 0.0f64);
        for q in ensemble.checkpoint_column(k) {
            let d = q as f64 - emp_mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let sd = m2.sqrt();
        let (skewness, excess_kurtosis) = if sd > 0.0 {
            (m3 / (sd * sd * sd), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        let pred_mean = prediction.mean[k];
        let pred_var = prediction.variance[k];
        let z_mean = if pred_var > 0.0 {
            (emp_mean - pred_mean) / (pred_var / nf).sqrt()
        } else {
            0.0
        };
        rows.push(VerifyRow {
            checkpoint: ck,
            pred_mean,
            pred_var,
            emp_mean,
            emp_var,
            z_mean,
            var_ratio: if pred_var > 0.0 {
                emp_var / pred_var
            } else {
                f64::NAN
            },
            skewness,
            excess_kurtosis,
        });
    }
    Ok(VerifyReport {
        paths,
        scale: n,
        variance_model: format!("{variance:?}"),
        rows,
    })
}

/// Export the comparison as delimited text.
pub fn write_report_csv<W: Write>(report: &VerifyReport, mut out: W) -> Result<()> {
    writeln!(
        out,
        "checkpoint,pred_mean,pred_var,emp_mean,emp_var,z_mean,var_ratio"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.checkpoint, r.pred_mean, r.pred_var, r.emp_mean, r.emp_var, r.z_mean, r.var_ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_field_moments_are_binomial() {
        let field = FillRateField::constant(0.3, 1.0, 100).unwrap();
        let (m, v) = gaussian_moments(&field, 1.0, VarianceModel::FrozenMeanPath).unwrap();
        assert_abs_diff_eq!(m, 30.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 21.0, epsilon = 1e-10);
        let (m, v) = gaussian_moments(&field, 0.5, VarianceModel::FrozenMeanPath).unwrap();
        assert_abs_diff_eq!(m, 15.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 10.5, epsilon = 1e-10);
        let (m, v) = gaussian_moments(&field, 0.0, VarianceModel::FrozenMeanPath).unwrap();
        assert_eq!((m, v), (0.0, 0.0));
    }

    #[test]
    fn piecewise_field_moments_match_bernoulli_sums() {
        let n = 40usize;
        let values = vec![0.1, 0.8, 0.35, 0.6, 0.25, 0.9, 0.5, 0.05];
        let field = FillRateField::piecewise_constant(values.clone(), 1.0, n).unwrap();
        for ck in [5usize, 13, 20, 40] {
            let t = ck as f64 / n as f64;
            let (m, v) = gaussian_moments(&field, t, VarianceModel::FrozenMeanPath).unwrap();
            // Independent Bernoulli sums over lattice steps.
            let mut mean = 0.0;
            let mut var = 0.0;
            for step in 0..ck {
                let piece = (step * values.len()) / n;
                let f = values[piece];
                mean += f;
                var += f * (1.0 - f);
            }
            assert_abs_diff_eq!(m, mean, epsilon = 1e-10);
            assert_abs_diff_eq!(v, var, epsilon = 1e-10);
        }
    }

    #[test]
    fn predicted_std_scales_like_sqrt_n() {
        for &(mk, t) in &[(true, 0.6), (false, 0.5)] {
            let build = |n: usize| {
                if mk {
                    FillRateField::constant(0.4, 1.0, n).unwrap()
                } else {
                    FillRateField::deterministic_pacing(0.5, 1.0, n).unwrap()
                }
            };
            let (f1, f4) = (build(100), build(400));
            let variance = VarianceModel::auto_for(&f1);
            let (_, v1) = gaussian_moments(&f1, t, variance).unwrap();
            let (_, v4) = gaussian_moments(&f4, t, variance).unwrap();
            let ratio = (v4 / v1).sqrt();
            assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn euler_degenerate_fields() {
        let mut rng = sim::path_rng(1, 0);
        let zero = FillRateField::constant(0.0, 1.0, 50).unwrap();
        let path = euler_sde(&zero, 200, &mut rng).unwrap();
        assert!(path.iter().all(|&q| q == 0.0));

        let one = FillRateField::constant(1.0, 1.0, 50).unwrap();
        let path = euler_sde(&one, 200, &mut rng).unwrap();
        assert_abs_diff_eq!(*path.last().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_requires_enough_steps() {
        let field = FillRateField::constant(0.5, 1.0, 100).unwrap();
        let mut rng = sim::path_rng(2, 0);
        assert!(euler_sde(&field, 50, &mut rng).is_err());
    }

    #[test]
    fn euler_half_field_variance() {
        // Var(Q̄_1) = (1/4)/N = 0.0025 at N = 100.
        let field = FillRateField::constant(0.5, 1.0, 100).unwrap();
        let stats = euler_ensemble(&field, 1000, 100_000, 7, &[1.0]).unwrap();
        let (mean, var) = stats[0];
        assert!((var - 0.0025).abs() < 0.05 * 0.0025, "var {var}");
        assert!((mean - 0.5).abs() < 3.0 * (0.0025f64 / 100_000.0).sqrt());
    }

    #[test]
    fn euler_matches_moment_propagation() {
        let field = FillRateField::deterministic_pacing(0.5, 1.0, 100).unwrap();
        let times = [0.3, 0.6, 0.9];
        let stats = euler_ensemble(&field, 1000, 100_000, 11, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let (pm, pv) = gaussian_moments(&field, t, VarianceModel::Linearized).unwrap();
            let (em, ev) = stats[k];
            // Euler works in Q̄ units; scale to shares.
            let n = 100.0;
            let (em, ev) = (em * n, ev * n * n);
            let se = (pv / 100_000.0).sqrt();
            assert!((em - pm).abs() < 3.0 * se, "t={t}: mean {em} vs {pm}");
            assert!((ev / pv - 1.0).abs() < 0.05, "t={t}: var {ev} vs {pv}");
        }
    }

    #[test]
    fn field_contract_violation_is_caught() {
        let field = FillRateField::custom(|_t, _q| 1.5, false, 1.0, 10, 1.0).unwrap();
        let mut rng = sim::path_rng(3, 0);
        assert!(matches!(
            euler_sde(&field, 20, &mut rng),
            Err(Error::FieldContract { .. })
        ));
        assert!(FillRateField::constant(1.2, 1.0, 10).is_err());
        assert!(FillRateField::piecewise_constant(vec![0.5, -0.1], 1.0, 10).is_err());
    }

    #[test]
    fn verify_constant_half_against_binomial() {
        let field = FillRateField::constant(0.5, 1.0, 100).unwrap();
        let report = verify(&field, 20_000, &[25, 50, 75, 100], 13).unwrap();
        for row in &report.rows {
            assert!(row.z_mean.abs() < 4.0, "{row:?}");
            assert!((row.var_ratio - 1.0).abs() < 0.1, "{row:?}");
            // Binomial skewness at p = 1/2 is zero.
            assert!(row.skewness.abs() < 0.1);
        }
    }

    #[test]
    fn verify_deterministic_pacing_variance() {
        // The chain picks a uniform random subset, so Var(Q_n) is
        // hypergeometric; the linearized prediction lands within a few
        // percent of it at every checkpoint through 0.9 N.
        let field = FillRateField::deterministic_pacing(0.5, 1.0, 100).unwrap();
        let report = verify(&field, 20_000, &[10, 30, 50, 70, 90], 17).unwrap();
        assert_eq!(report.variance_model, "Linearized");
        for row in &report.rows {
            assert!(
                (0.8..=1.2).contains(&row.var_ratio),
                "checkpoint {}: ratio {}",
                row.checkpoint,
                row.var_ratio
            );
            assert!(row.z_mean.abs() < 4.0, "{row:?}");
        }
    }

    #[test]
    fn normality_improves_with_scale() {
        let skew_at = |n: usize| -> f64 {
            let field = FillRateField::constant(0.3, 1.0, n).unwrap();
            let report = verify(&field, 30_000, &[n], 23).unwrap();
            report.rows[0].skewness.abs()
        };
        let coarse = skew_at(10);
        let fine = skew_at(1000);
        assert!(
            fine < coarse,
            "skew at N=1000 ({fine}) should beat N=10 ({coarse})"
        );
    }

    #[test]
    fn report_csv_columns() {
        let field = FillRateField::constant(0.5, 1.0, 20).unwrap();
        let report = verify(&field, 500, &[10, 20], 29).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("checkpoint,pred_mean,pred_var,emp_mean,emp_var,z_mean,var_ratio\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
