//! Signal/gain statistical environment.
//!
//! A short-term signal `S` predicts the next price change `ΔP`. Setting a
//! threshold at the quantile `ϑ(p)` (so that `P(S >= ϑ(p)) = p`) yields the
//! expected per-opportunity gain
//!
//! ```text
//! g(p) = E[ΔP · 1{S >= ϑ(p)}]
//! ```
//!
//! which is concave with `g(0) = g(1) = 0` whenever the price is a martingale
//! and the conditional price change is increasing in the signal. The absolute
//! gain `G(p) = g(p)/p` decays in `p`: the more liquidity a strategy must
//! capture, the worse its per-trade edge (signal saturation).
//!
//! Two models are provided: the canonical `LinearUniform` model (signal
//! uniform on `[-1/2, 1/2]`, `E[ΔP|S] = a·S`, giving `g(p) = (a/2)·p(1-p)`)
//! and an `Empirical` model estimated from `(signal, price_change)` rows.

use std::io;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of knots of the uniform p-grid used by empirical tables.
pub const EMPIRICAL_GRID: usize = 1001;

/// Minimum number of rows accepted by [`GainModel::empirical_from_samples`].
pub const MIN_EMPIRICAL_ROWS: usize = 1000;

/// Which family a [`GainModel`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearUniform,
    Empirical,
}

/// Grid level below which `G(p) = g(p)/p` is too noisy to diagnose (the `1/p`
/// factor amplifies estimation error without bound as `p -> 0`).
pub const MONOTONICITY_P_MIN: f64 = 0.05;

/// Monotonicity diagnosis of the absolute gain `G(p) = g(p)/p`.
///
/// A well-designed signal has `G` non-increasing in `p`. The check runs on
/// grid knots with `p >= MONOTONICITY_P_MIN` and measures the cumulative
/// rise of `G` above its running minimum; rises beyond the estimation noise
/// floor set `flagged`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Largest rise of `G` above its running minimum on the trimmed grid.
    pub max_violation: f64,
    /// Number of consecutive-knot pairs where `G` increases.
    pub violations: usize,
    /// Scale of the estimation noise on `g` (std of the mean).
    pub noise_scale: f64,
    /// True when `max_violation` exceeds the noise floor.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
enum ModelInner {
    LinearUniform {
        /// `G` in `g(p) = G·p(1-p)`; the signal slope is `a = 2G`.
        scale_g: f64,
        /// Std of the Gaussian noise added to `a·S` in the price change.
        noise_sigma: f64,
    },
    Empirical {
        /// `ϑ(p)` on the uniform p-grid, non-increasing.
        quantile_table: Vec<f64>,
        /// `g(p)` on the uniform p-grid.
        gain_table: Vec<f64>,
        /// Sample pool backing `sample_pair`; absent after JSON import.
        samples: Option<Vec<(f64, f64)>>,
        report: MonotonicityReport,
        /// Sample mean of `ΔP` was statistically distinguishable from zero.
        mean_warning: bool,
    },
}

/// The pair `(g, ϑ)` plus a sampler of `(signal, price_change)` draws.
///
/// Models are immutable after construction and safe to share across threads;
/// samplers take an external RNG state, one per thread or path.
#[derive(Debug, Clone)]
pub struct GainModel {
    inner: ModelInner,
}

impl GainModel {
    /// Canonical quadratic model: `S ~ U[-1/2, 1/2]`, `ΔP = 2G·S + ε` with
    /// `ε ~ N(0, noise_sigma²)`, so that `g(p) = G·p(1-p)` exactly.
    pub fn linear_uniform(scale_g: f64) -> Self {
        Self::linear_uniform_with_noise(scale_g, 0.1)
    }

    pub fn linear_uniform_with_noise(scale_g: f64, noise_sigma: f64) -> Self {
        assert!(
            scale_g.is_finite() && scale_g > 0.0,
            "scale_g must be finite and positive"
        );
        assert!(
            noise_sigma.is_finite() && noise_sigma >= 0.0,
            "noise_sigma must be finite and non-negative"
        );
        GainModel {
            inner: ModelInner::LinearUniform {
                scale_g,
                noise_sigma,
            },
        }
    }

    /// Estimate an empirical model from `(signal, price_change)` rows.
    ///
    /// The quantile table comes from order statistics with midpoint
    /// interpolation; the gain table is `g(p) = (1/n)·Σ ΔPᵢ·1{Sᵢ >= ϑ(p)}`
    /// on the uniform p-grid, anchored to `g(0) = g(1) = 0`.
    pub fn empirical_from_samples(rows: &[(f64, f64)]) -> Result<Self> {
        let n = rows.len();
        if n < MIN_EMPIRICAL_ROWS {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_EMPIRICAL_ROWS} rows, got {n}"
            )));
        }
        if let Some((s, dp)) = rows.iter().find(|(s, dp)| !s.is_finite() || !dp.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite row (signal = {s}, price_change = {dp})"
            )));
        }

        let mut sorted: Vec<(f64, f64)> = rows.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let s_min = sorted[0].0;
        let s_max = sorted[n - 1].0;
        if s_min == s_max {
            return Err(Error::InvalidInput(
                "signal is constant; the quantile map is not a bijection".into(),
            ));
        }

        // Martingale check on the price-change mean.
        let nf = n as f64;
        let mean_dp = sorted.iter().map(|(_, dp)| dp).sum::<f64>() / nf;
        let var_dp = sorted
            .iter()
            .map(|(_, dp)| (dp - mean_dp).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        let se_mean = (var_dp / nf).sqrt();
        let mean_warning = mean_dp.abs() > 3.0 * se_mean && mean_dp != 0.0;

        // Suffix sums of price changes over signals sorted ascending:
        // suffix[i] = sum of dp over rows with index >= i.
        let mut suffix = vec![0.0f64; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + sorted[i].1;
        }

        let mut quantile_table = Vec::with_capacity(EMPIRICAL_GRID);
        let mut gain_table = Vec::with_capacity(EMPIRICAL_GRID);
        for k in 0..EMPIRICAL_GRID {
            let p = k as f64 / (EMPIRICAL_GRID - 1) as f64;
            let theta = order_statistic_quantile(&sorted, 1.0 - p);
            quantile_table.push(theta);
            // First index with signal >= theta.
            let idx = sorted.partition_point(|(s, _)| *s < theta);
            gain_table.push(suffix[idx] / nf);
        }
        // Boundary anchoring: the model contract is g(0) = g(1) = 0; any
        // residual mass there is martingale-violation noise already surfaced
        // through `mean_warning`.
        gain_table[0] = 0.0;
        gain_table[EMPIRICAL_GRID - 1] = 0.0;

        let report = monotonicity_report(&gain_table, se_mean);

        Ok(GainModel {
            inner: ModelInner::Empirical {
                quantile_table,
                gain_table,
                samples: Some(rows.to_vec()),
                report,
                mean_warning,
            },
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.inner {
            ModelInner::LinearUniform { .. } => ModelKind::LinearUniform,
            ModelInner::Empirical { .. } => ModelKind::Empirical,
        }
    }

    /// `Some(G)` when the gain is exactly `G·p(1-p)`.
    pub fn quadratic_scale(&self) -> Option<f64> {
        match self.inner {
            ModelInner::LinearUniform { scale_g, .. } => Some(scale_g),
            ModelInner::Empirical { .. } => None,
        }
    }

    /// Expected gain `g(p)` of trading at quantile level `p`.
    pub fn gain(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.gain_eval(p))
    }

    /// Threshold `ϑ(p)` such that the fraction of signals `>= ϑ(p)` is `p`.
    pub fn threshold_of_quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.threshold_eval(p))
    }

    /// One i.i.d. `(signal, price_change)` draw.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        match &self.inner {
            ModelInner::LinearUniform {
                scale_g,
                noise_sigma,
            } => {
                let s = rng.gen::<f64>() - 0.5;
                let mut dp = 2.0 * scale_g * s;
                if *noise_sigma > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    dp += noise_sigma * z;
                }
                Ok((s, dp))
            }
            ModelInner::Empirical { samples, .. } => match samples {
                Some(pool) => Ok(pool[rng.gen_range(0..pool.len())]),
                None => Err(Error::NoSampler),
            },
        }
    }

    pub fn monotonicity(&self) -> Option<&MonotonicityReport> {
        match &self.inner {
            ModelInner::LinearUniform { .. } => None,
            ModelInner::Empirical { report, .. } => Some(report),
        }
    }

    /// True when the sample mean of `ΔP` failed the martingale check.
    pub fn mean_warning(&self) -> bool {
        match &self.inner {
            ModelInner::LinearUniform { .. } => false,
            ModelInner::Empirical { mean_warning, .. } => *mean_warning,
        }
    }

    /// Whether `g(1-p) = g(p)` (exact for the quadratic model, tested on the
    /// grid for empirical tables).
    pub fn is_symmetric(&self) -> bool {
        match &self.inner {
            ModelInner::LinearUniform { .. } => true,
            ModelInner::Empirical { gain_table, .. } => {
                let m = gain_table.len();
                let scale = gain_table.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                let tol = 1e-6 * scale.max(1e-300);
                (0..m).all(|k| (gain_table[k] - gain_table[m - 1 - k]).abs() <= tol)
            }
        }
    }

    /// Serialize to the JSON export format (tables only, no sample pool).
    pub fn to_json(&self) -> String {
        let spec = match &self.inner {
            ModelInner::LinearUniform {
                scale_g,
                noise_sigma,
            } => ModelJson::LinearUniform {
                scale_g: *scale_g,
                noise_sigma: *noise_sigma,
            },
            ModelInner::Empirical {
                quantile_table,
                gain_table,
                report,
                mean_warning,
                ..
            } => ModelJson::Empirical {
                quantile_table: quantile_table.clone(),
                gain_table: gain_table.clone(),
                report: report.clone(),
                mean_warning: *mean_warning,
            },
        };
        serde_json::to_string_pretty(&spec).expect("model export cannot fail")
    }

    /// Parse and validate the JSON export format.
    ///
    /// Imported empirical models carry no sample pool: `sample_pair` returns
    /// [`Error::NoSampler`].
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelJson = serde_json::from_str(text)?;
        match spec {
            ModelJson::LinearUniform {
                scale_g,
                noise_sigma,
            } => {
                if !scale_g.is_finite() || scale_g <= 0.0 {
                    return Err(Error::InvalidInput(format!("bad scale_g: {scale_g}")));
                }
                if !noise_sigma.is_finite() || noise_sigma < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "bad noise_sigma: {noise_sigma}"
                    )));
                }
                Ok(GainModel::linear_uniform_with_noise(scale_g, noise_sigma))
            }
            ModelJson::Empirical {
                quantile_table,
                gain_table,
                report,
                mean_warning,
            } => {
                if quantile_table.len() != EMPIRICAL_GRID || gain_table.len() != EMPIRICAL_GRID {
                    return Err(Error::InvalidInput(format!(
                        "tables must have {EMPIRICAL_GRID} knots, got {} and {}",
                        quantile_table.len(),
                        gain_table.len()
                    )));
                }
                if quantile_table.iter().any(|v| !v.is_finite())
                    || gain_table.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidInput("non-finite table entry".into()));
                }
                if quantile_table.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidInput(
                        "quantile table must be non-increasing in p".into(),
                    ));
                }
                if !report.max_violation.is_finite() || !report.noise_scale.is_finite() {
                    return Err(Error::InvalidInput("non-finite report entry".into()));
                }
                Ok(GainModel {
                    inner: ModelInner::Empirical {
                        quantile_table,
                        gain_table,
                        samples: None,
                        report,
                        mean_warning,
                    },
                })
            }
        }
    }

    /// Unvalidated `g(p)`; callers must guarantee `p ∈ [0, 1]`.
    pub(crate) fn gain_eval(&self, p: f64) -> f64 {
        match &self.inner {
            ModelInner::LinearUniform { scale_g, .. } => scale_g * p * (1.0 - p),
            ModelInner::Empirical { gain_table, .. } => interpolate_grid(gain_table, p),
        }
    }

    pub(crate) fn threshold_eval(&self, p: f64) -> f64 {
        match &self.inner {
            ModelInner::LinearUniform { .. } => 0.5 - p,
            ModelInner::Empirical { quantile_table, .. } => interpolate_grid(quantile_table, p),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelJson {
    LinearUniform {
        scale_g: f64,
        noise_sigma: f64,
    },
    Empirical {
        quantile_table: Vec<f64>,
        gain_table: Vec<f64>,
        report: MonotonicityReport,
        mean_warning: bool,
    },
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(())
}

/// Linear interpolation on the uniform p-grid.
fn interpolate_grid(table: &[f64], p: f64) -> f64 {
    let m = table.len() - 1;
    let x = p * m as f64;
    let k = (x.floor() as usize).min(m - 1);
    let w = x - k as f64;
    table[k] * (1.0 - w) + table[k + 1] * w
}

/// Order-statistic quantile at level `alpha` with midpoint interpolation
/// (rows sorted ascending by signal).
fn order_statistic_quantile(sorted: &[(f64, f64)], alpha: f64) -> f64 {
    let n = sorted.len();
    let pos = alpha * n as f64 - 0.5;
    if pos <= 0.0 {
        return sorted[0].0;
    }
    if pos >= (n - 1) as f64 {
        return sorted[n - 1].0;
    }
    let k = pos.floor() as usize;
    let w = pos - k as f64;
    sorted[k].0 * (1.0 - w) + sorted[k + 1].0 * w
}

fn monotonicity_report(gain_table: &[f64], noise_scale: f64) -> MonotonicityReport {
    let m = gain_table.len() - 1;
    let mut max_violation = 0.0f64;
    let mut violations = 0usize;
    let mut prev = f64::INFINITY;
    let mut running_min = f64::INFINITY;
    for k in 1..=m {
        let p = k as f64 / m as f64;
        if p < MONOTONICITY_P_MIN {
            continue;
        }
        let g_abs = gain_table[k] / p;
        if g_abs > prev {
            violations += 1;
        }
        max_violation = max_violation.max(g_abs - running_min);
        running_min = running_min.min(g_abs);
        prev = g_abs;
    }
    // The 1/p factor amplifies the se of g by at most 1/P_MIN on the trimmed
    // grid; 5x that is a conservative floor for genuine design defects.
    let floor = 5.0 * noise_scale / MONOTONICITY_P_MIN;
    MonotonicityReport {
        max_violation,
        violations,
        noise_scale,
        flagged: max_violation > floor,
    }
}

/// Read `(signal, price_change)` rows from delimited text.
///
/// Two columns, header row required, floating-point values.
pub fn read_samples_csv<R: io::Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            record: i + 1,
            msg: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Csv {
                record: i + 1,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                record: i + 1,
                msg: format!("cannot parse {name} from {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    record: i + 1,
                    msg: format!("non-finite {name}: {field:?}"),
                });
            }
            Ok(v)
        };
        rows.push((parse(&record[0], "signal")?, parse(&record[1], "price_change")?));
    }
    Ok(rows)
}
