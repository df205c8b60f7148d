//! Almgren-Chriss schedules driven through a signal threshold.
//!
//! A mean-variance-optimal liquidation schedule prescribes a deterministic
//! speed per rebalancing interval. Executing it with a threshold on a signal
//! observed `u` times per unit time turns each interval into `u·τ` Bernoulli
//! opportunities with fill probability `F = ν/u`, so realized speed and
//! inventory acquire Gaussian uncertainty bands:
//!
//! ```text
//! ν̃_{τk} ~ N(ν_{τk}, u·F(1-F)/τ)          Q̃_t ~ N(mean, uT·V(t)),
//! V(t) = (1/T) ∫₀ᵗ F(1-F)(s) ds.
//! ```
//!
//! The band mean uses the discrete schedule's own fill field, which matches
//! the continuous `Q̃det(t) = Q*·sinh(κ(T-t))/sinh(κT)` up to `O(τ²)`.

use std::io::Write;

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::iab::FillRateField;
use crate::sim;

/// Central-band normal quantiles: 50%, 90%, 99%.
const Z50: f64 = 0.674_489_750_196_081_7;
const Z90: f64 = 1.644_853_626_951_472_2;
const Z99: f64 = 2.575_829_303_548_900_4;

/// Almgren-Chriss problem parameters.
///
/// `tau` must divide the horizon; `u` is the number of signal observations
/// per unit time, so each interval holds `u·tau` trading opportunities.
#[derive(Debug, Clone, Serialize)]
pub struct AcParams {
    pub horizon: f64,
    pub q_star: f64,
    pub sigma: f64,
    pub eta: f64,
    pub gamma_perm: f64,
    pub lambda_risk: f64,
    pub tau: f64,
    pub u: f64,
}

impl AcParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("horizon", self.horizon),
            ("q_star", self.q_star),
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("tau", self.tau),
            ("u", self.u),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.gamma_perm.is_finite() || self.gamma_perm < 0.0 {
            return Err(Error::Parameter(format!(
                "gamma_perm must be non-negative, got {}",
                self.gamma_perm
            )));
        }
        if !self.lambda_risk.is_finite() || self.lambda_risk < 0.0 {
            return Err(Error::Parameter(format!(
                "lambda_risk must be non-negative, got {}",
                self.lambda_risk
            )));
        }
        let k = self.horizon / self.tau;
        if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return Err(Error::Parameter(format!(
                "tau = {} must divide the horizon {}",
                self.tau, self.horizon
            )));
        }
        if self.u * self.tau < 1.0 {
            return Err(Error::Parameter(format!(
                "u·tau = {} < 1: no opportunity per interval",
                self.u * self.tau
            )));
        }
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        (self.horizon / self.tau).round() as usize
    }
}

/// Renormalized impact and urgency constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Kappas {
    /// `η̃ = η(1 - γτ/2η)`.
    pub eta_tilde: f64,
    /// `κ̃ = sqrt(λσ²/η̃)`.
    pub kappa_tilde: f64,
    /// `κ = cosh⁻¹(1 + (κ̃τ)²/2)/τ`.
    pub kappa: f64,
}

pub fn compute_kappas(p: &AcParams) -> Result<Kappas> {
    p.validate()?;
    let eta_tilde = p.eta * (1.0 - p.gamma_perm * p.tau / (2.0 * p.eta));
    if eta_tilde <= 0.0 {
        return Err(Error::Parameter(format!(
            "eta_tilde = {eta_tilde} <= 0: permanent impact too large for this tau"
        )));
    }
    let kappa_tilde = (p.lambda_risk * p.sigma * p.sigma / eta_tilde).sqrt();
    let kappa = if kappa_tilde == 0.0 {
        0.0
    } else {
        let x = kappa_tilde * p.tau;
        (1.0 + 0.5 * x * x).acosh() / p.tau
    };
    Ok(Kappas {
        eta_tilde,
        kappa_tilde,
        kappa,
    })
}

/// The deterministic optimal schedule.
#[derive(Debug, Clone, Serialize)]
pub struct AcSchedule {
    pub horizon: f64,
    pub q_star: f64,
    pub tau: f64,
    pub kappa: f64,
    /// Speed per interval, shares per unit time.
    pub speeds: Vec<f64>,
}

impl AcSchedule {
    /// `Q̃det(t) = Q*·sinh(κ(T-t))/sinh(κT)`, remaining shares at `t`.
    pub fn deterministic_inventory(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        if self.kappa * self.horizon < 1e-10 {
            return self.q_star * (1.0 - t / self.horizon);
        }
        self.q_star * (self.kappa * (self.horizon - t)).sinh() / (self.kappa * self.horizon).sinh()
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0f64, |a, &v| a.max(v))
    }
}

/// Compute the per-interval speeds
/// `ν_{τk} = 2 sinh(κτ/2)/sinh(κT) · (Q*/τ) · cosh(κ(T - (k+1/2)τ))`.
///
/// The midpoint convention makes `Σ ν·τ = Q*` an exact telescoping identity;
/// `κ = 0` falls back to the uniform (VWAP) schedule analytically.
pub fn schedule(p: &AcParams) -> Result<AcSchedule> {
    let kappas = compute_kappas(p)?;
    let k_intervals = p.intervals();
    let kappa = kappas.kappa;
    let speeds = if kappa * p.horizon < 1e-10 {
        vec![p.q_star / p.horizon; k_intervals]
    } else {
        let prefactor =
            2.0 * (kappa * p.tau / 2.0).sinh() / (kappa * p.horizon).sinh() * p.q_star / p.tau;
        (0..k_intervals)
            .map(|k| {
                let mid = (k as f64 + 0.5) * p.tau;
                prefactor * (kappa * (p.horizon - mid)).cosh()
            })
            .collect()
    };
    Ok(AcSchedule {
        horizon: p.horizon,
        q_star: p.q_star,
        tau: p.tau,
        kappa,
        speeds,
    })
}

/// Map the schedule to the piecewise-constant fill field `F(t) = ν_{τ⌊t/τ⌋}/u`.
///
/// Fails when some interval needs more than one fill per opportunity,
/// reporting the minimal admissible observation rate.
pub fn fill_field(p: &AcParams, s: &AcSchedule) -> Result<FillRateField> {
    let max_speed = s.max_speed();
    if max_speed > p.u {
        return Err(Error::SpeedSaturation {
            max_speed,
            u: p.u,
            min_u: max_speed,
        });
    }
    let values: Vec<f64> = s.speeds.iter().map(|v| v / p.u).collect();
    let scale = (p.u * p.horizon).round() as usize;
    FillRateField::piecewise_constant(values, p.horizon, scale)
}

/// Gaussian band parameters at one time.
#[derive(Debug, Clone, Serialize)]
pub struct BandRow {
    pub t: f64,
    /// Mean remaining inventory (discrete-schedule consistent).
    pub mean_q: f64,
    pub std_q: f64,
    /// Central 50/90/99% inventory bands.
    pub q_lo50: f64,
    pub q_hi50: f64,
    pub q_lo90: f64,
    pub q_hi90: f64,
    pub q_lo99: f64,
    pub q_hi99: f64,
    /// Target speed of the interval containing `t` and its realized-speed std
    /// `sqrt(u·F(1-F)/τ)`.
    pub mean_speed: f64,
    pub std_speed: f64,
}

/// Bands of realized speed and remaining inventory at the requested times.
pub fn uncertainty_bands(p: &AcParams, s: &AcSchedule, times: &[f64]) -> Result<Vec<BandRow>> {
    p.validate()?;
    fill_field(p, s)?; // saturation check
    let k_intervals = p.intervals();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if !(0.0..=p.horizon + 1e-12).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "band time {t} outside [0, {}]",
                p.horizon
            )));
        }
        // Exact piecewise integrals of F and F(1-F) up to t.
        let mut bought = 0.0f64;
        let mut v_integral = 0.0f64;
        let mut remaining = t;
        for k in 0..k_intervals {
            if remaining <= 0.0 {
                break;
            }
            let span = remaining.min(p.tau);
            let f = s.speeds[k] / p.u;
            bought += p.u * f * span;
            v_integral += f * (1.0 - f) * span;
            remaining -= span;
        }
        let mean_q = p.q_star - bought;
        // V(t)·uT with V(t) = (1/T)∫v; the horizons cancel.
        let var_q = p.u * v_integral;
        let std_q = var_q.sqrt();

        let k = ((t / p.tau).floor() as usize).min(k_intervals - 1);
        let f_k = s.speeds[k] / p.u;
        let mean_speed = s.speeds[k];
        let std_speed = (p.u * f_k * (1.0 - f_k) / p.tau).sqrt();

        rows.push(BandRow {
            t,
            mean_q,
            std_q,
            q_lo50: mean_q - Z50 * std_q,
            q_hi50: mean_q + Z50 * std_q,
            q_lo90: mean_q - Z90 * std_q,
            q_hi90: mean_q + Z90 * std_q,
            q_lo99: mean_q - Z99 * std_q,
            q_hi99: mean_q + Z99 * std_q,
            mean_speed,
            std_speed,
        });
    }
    Ok(rows)
}

/// Monte Carlo check of one checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct BandCheckRow {
    pub t: f64,
    pub band_mean_q: f64,
    pub band_var_q: f64,
    pub emp_mean_q: f64,
    pub emp_var_q: f64,
    pub z_mean: f64,
    pub var_ratio_q: f64,
    /// Fraction of paths inside the central 90% inventory band.
    pub coverage90: f64,
    pub band_var_speed: f64,
    pub emp_var_speed: f64,
    pub var_ratio_speed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandValidation {
    pub paths: usize,
    pub opportunities_per_interval: u64,
    pub rows: Vec<BandCheckRow>,
}

/// Simulate the `u·τ` Bernoulli opportunities of every interval and compare
/// empirical fill-count moments against the Gaussian bands.
pub fn validate_bands(p: &AcParams, paths: usize, seed: u64) -> Result<BandValidation> {
    p.validate()?;
    if paths < 2 {
        return Err(Error::InvalidInput("need at least two paths".into()));
    }
    let s = schedule(p)?;
    let _ = fill_field(p, &s)?; // saturation check
    let k_intervals = p.intervals();
    let m = p.u * p.tau;
    if (m - m.round()).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "u·tau = {m} must be an integer number of opportunities per interval"
        )));
    }
    let m = m.round() as u64;
    let fills: Vec<f64> = s.speeds.iter().map(|v| v / p.u).collect();

    // Per path: fill count of each interval, Binomial(m, F_k).
    let counts: Vec<Vec<u64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = sim::path_rng(seed, i as u64);
            fills
                .iter()
                .map(|&f| {
                    if f <= 0.0 {
                        0
                    } else if f >= 1.0 {
                        m
                    } else {
                        rand_distr::Binomial::new(m, f)
                            .expect("validated fill probability")
                            .sample(&mut rng)
                    }
                })
                .collect()
        })
        .collect();

    let times: Vec<f64> = (1..=k_intervals).map(|k| k as f64 * p.tau).collect();
    let bands = uncertainty_bands(p, &s, &times)?;
    let nf = paths as f64;
    let mut rows = Vec::with_capacity(k_intervals);
    for (k, band) in bands.iter().enumerate() {
        // Remaining inventory and interval speed per path.
        let mut mean_q = 0.0f64;
        let mut mean_speed = 0.0f64;
        for c in &counts {
            let cum: u64 = c[..=k].iter().sum();
            mean_q += p.q_star - cum as f64;
            mean_speed += c[k] as f64 / p.tau;
        }
        mean_q /= nf;
        mean_speed /= nf;
        let mut var_q = 0.0f64;
        let mut var_speed = 0.0f64;
        let mut inside = 0usize;
        for c in &counts {
            let cum: u64 = c[..=k].iter().sum();
            let q = p.q_star - cum as f64;
            var_q += (q - mean_q) * (q - mean_q);
            let v = c[k] as f64 / p.tau;
            var_speed += (v - mean_speed) * (v - mean_speed);
            if q >= band.q_lo90 && q <= band.q_hi90 {
                inside += 1;
            }
        }
        var_q /= nf - 1.0;
        var_speed /= nf - 1.0;

        let band_var_q = band.std_q * band.std_q;
        let band_var_speed = band.std_speed * band.std_speed;
        rows.push(BandCheckRow {
            t: band.t,
            band_mean_q: band.mean_q,
            band_var_q,
            emp_mean_q: mean_q,
            emp_var_q: var_q,
            z_mean: if band_var_q > 0.0 {
                (mean_q - band.mean_q) / (band_var_q / nf).sqrt()
            } else {
                0.0
            },
            var_ratio_q: if band_var_q > 0.0 {
                var_q / band_var_q
            } else {
                f64::NAN
            },
            coverage90: inside as f64 / nf,
            band_var_speed,
            emp_var_speed: var_speed,
            var_ratio_speed: if band_var_speed > 0.0 {
                var_speed / band_var_speed
            } else {
                f64::NAN
            },
        });
    }
    Ok(BandValidation {
        paths,
        opportunities_per_interval: m,
        rows,
    })
}

/// Export the band table as delimited text (the data behind the remaining
/// quantity and trading-speed panels).
pub fn write_bands_csv<W: Write>(rows: &[BandRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "t,mean_Q,std_Q,q05,q25,q75,q95,mean_speed,std_speed"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.mean_q, r.std_q, r.q_lo90, r.q_lo50, r.q_hi50, r.q_hi90, r.mean_speed, r.std_speed
        )?;
    }
    Ok(())
}
