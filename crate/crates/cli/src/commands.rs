//! Subcommand implementations: resolve parameters, run the library, write
//! tables and the run manifest.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;
use threshold_exec::almgren::{self, AcParams};
use threshold_exec::dp::{self, DeterministicPolicy, LatticePolicy, PolicyGrid};
use threshold_exec::gain::GainModel;
use threshold_exec::iab::{self, FillRateField};
use threshold_exec::policy::{
    self, CalibrationConstants, ClosedFormPolicy, PolicyVariant, ShiftVariant,
    DEFAULT_BORDER_WIDTH,
};
use threshold_exec::sim::{self, SimConfig};

use crate::config::{FileConfig, ModelEcho, OutputFormat};
use crate::{config_err, CliError};

/// Shared run state: where to write, how to format, the seed.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub format: OutputFormat,
    pub threads: usize,
}

impl RunContext {
    fn path(&self, stem: &str) -> PathBuf {
        self.out_dir
            .join(format!("{stem}.{}", self.format.extension()))
    }

    fn write_table<T: Serialize>(
        &self,
        stem: &str,
        csv: impl FnOnce(&mut Vec<u8>) -> threshold_exec::Result<()>,
        json_value: &T,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(stem);
        let bytes = match self.format {
            OutputFormat::Csv => {
                let mut buf = Vec::new();
                csv(&mut buf).map_err(|e| CliError::Runtime(e.into()))?;
                buf
            }
            OutputFormat::Json => pretty_json(json_value)?,
        };
        fs::write(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::Runtime)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, pretty_json(value)?)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::Runtime)?;
        Ok(path)
    }

    fn finish<C: Serialize>(
        &self,
        command: &str,
        config: &C,
        mut outputs: Vec<PathBuf>,
    ) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, C: Serialize> {
            command: &'a str,
            seed: u64,
            format: &'a str,
            threads: usize,
            config: &'a C,
            outputs: Vec<String>,
        }
        let manifest = Manifest {
            command,
            seed: self.seed,
            format: self.format.extension(),
            threads: self.threads,
            config,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
        };
        let path = self.write_json("manifest.json", &manifest)?;
        outputs.push(path);
        for p in &outputs {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .context("serializing output")
        .map_err(CliError::Runtime)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn require<T>(flag: Option<T>, section: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(section)
        .ok_or_else(|| CliError::Config(format!("missing required parameter {name}")))
}

fn constants_from(cfg: &FileConfig) -> Result<CalibrationConstants, CliError> {
    match (cfg.policy.tau_unconstrained, cfg.policy.tau_constrained) {
        (None, None) => Ok(CalibrationConstants::default()),
        (u, c) => {
            let d = CalibrationConstants::default();
            CalibrationConstants::new(u.unwrap_or(d.tau_unconstrained), c.unwrap_or(d.tau_constrained))
                .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

/// A policy selected by name: a closed form or the solved optimum.
pub enum NamedPolicy {
    ClosedForm(ClosedFormPolicy),
    Optimal(PolicyGrid),
}

impl LatticePolicy for NamedPolicy {
    fn prob(&self, n: usize, q: usize) -> f64 {
        match self {
            NamedPolicy::ClosedForm(p) => p.prob(n, q),
            NamedPolicy::Optimal(g) => g.prob(n, q),
        }
    }
}

pub fn build_policy(
    name: &str,
    n_steps: usize,
    q_star: usize,
    constants: &CalibrationConstants,
    border_width: f64,
    model: &GainModel,
) -> Result<NamedPolicy, CliError> {
    if name == "optimal" {
        let (_, grid) = dp::solve_dp(n_steps, q_star, model)
            .map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(NamedPolicy::Optimal(grid));
    }
    let variant = PolicyVariant::parse(name).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(NamedPolicy::ClosedForm(
        ClosedFormPolicy::new(variant, n_steps, q_star)
            .with_constants(constants.clone())
            .with_border_width(border_width),
    ))
}

// --- dp-solve ---------------------------------------------------------------

#[derive(Serialize)]
struct GridRow {
    n: usize,
    q: usize,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    prob: Option<f64>,
}

#[derive(Serialize)]
struct DpEcho {
    n_steps: usize,
    q_star: usize,
    model: ModelEcho,
}

pub fn cmd_dp_solve(
    ctx: &RunContext,
    cfg: &FileConfig,
    n_steps: Option<usize>,
    q_star: Option<usize>,
    model_override: Option<f64>,
) -> Result<(), CliError> {
    let n_steps = require(n_steps, cfg.dp.n_steps, "n_steps")?;
    let q_star = require(q_star, cfg.dp.q_star, "q_star")?;
    let (model, echo) = resolve_model(cfg, model_override)?;
    validate_target(n_steps, q_star)?;

    let (values, probs) =
        dp::solve_dp(n_steps, q_star, &model).map_err(|e| CliError::Runtime(e.into()))?;

    let mut rows = Vec::new();
    for n in 0..=n_steps {
        for q in 0..=q_star {
            if values.is_feasible(n, q) {
                rows.push(GridRow {
                    n,
                    q,
                    value: values.value(n, q),
                    prob: (n < n_steps).then(|| probs.prob(n, q)),
                });
            }
        }
    }
    let grid_path =
        ctx.write_table("dp_grid", |w| dp::write_grids_csv(&values, &probs, w), &rows)?;

    #[derive(Serialize)]
    struct Summary {
        n_steps: usize,
        q_star: usize,
        v_00: f64,
        spot_checks: Vec<SpotCheck>,
    }
    #[derive(Serialize)]
    struct SpotCheck {
        n: usize,
        q: usize,
        value: f64,
        prob: f64,
    }
    let mut spot_checks = Vec::new();
    for (back, dq) in [(2usize, 1usize), (3, 1), (3, 2)] {
        if n_steps >= back && q_star >= dq && values.is_feasible(n_steps - back, q_star - dq) {
            let (n, q) = (n_steps - back, q_star - dq);
            spot_checks.push(SpotCheck {
                n,
                q,
                value: values.value(n, q),
                prob: probs.prob(n, q),
            });
        }
    }
    let summary = Summary {
        n_steps,
        q_star,
        v_00: values.v00(),
        spot_checks,
    };
    let summary_path = ctx.write_json("dp_summary.json", &summary)?;
    println!("V(0,0) = {}", values.v00());

    ctx.finish(
        "dp-solve",
        &DpEcho {
            n_steps,
            q_star,
            model: echo,
        },
        vec![grid_path, summary_path],
    )
}

fn resolve_model(
    cfg: &FileConfig,
    scale_g_override: Option<f64>,
) -> Result<(GainModel, ModelEcho), CliError> {
    let mut section = cfg.model.clone();
    if let Some(g) = scale_g_override {
        section.scale_g = Some(g);
        section.kind.get_or_insert_with(|| "linear_uniform".into());
    }
    section.build()
}

fn validate_target(n_steps: usize, q_star: usize) -> Result<(), CliError> {
    if q_star == 0 || q_star > n_steps {
        return config_err(format!(
            "q_star = {q_star} must lie in [1, n_steps = {n_steps}]"
        ));
    }
    Ok(())
}

// --- policy-eval ------------------------------------------------------------

#[derive(Serialize)]
struct PolicyEvalRow {
    variant: String,
    value: f64,
    performance_ratio: f64,
}

pub fn cmd_policy_eval(
    ctx: &RunContext,
    cfg: &FileConfig,
    n_steps: Option<usize>,
    q_star: Option<usize>,
    variants: Vec<String>,
) -> Result<(), CliError> {
    let n_steps = require(n_steps, cfg.dp.n_steps, "n_steps")?;
    let q_star = require(q_star, cfg.dp.q_star, "q_star")?;
    validate_target(n_steps, q_star)?;
    let (model, echo) = resolve_model(cfg, None)?;
    let constants = constants_from(cfg)?;
    let border = cfg.policy.border_width.unwrap_or(DEFAULT_BORDER_WIDTH);
    let names: Vec<String> = if !variants.is_empty() {
        variants
    } else if let Some(v) = cfg.policy.variants.clone() {
        v
    } else {
        let mut all: Vec<String> = PolicyVariant::ALL.iter().map(|v| v.name().into()).collect();
        all.push("optimal".into());
        all
    };

    let (values, _) =
        dp::solve_dp(n_steps, q_star, &model).map_err(|e| CliError::Runtime(e.into()))?;
    let det = DeterministicPolicy { n_steps, q_star };
    let perf_det =
        dp::evaluate_policy(&det, n_steps, q_star, &model).map_err(|e| CliError::Runtime(e.into()))?;

    let mut rows = Vec::new();
    for name in &names {
        let policy = build_policy(name, n_steps, q_star, &constants, border, &model)?;
        let value = dp::evaluate_policy(&policy, n_steps, q_star, &model)
            .map_err(|e| CliError::Runtime(e.into()))?;
        let ratio = dp::performance_ratio_with(values.v00(), perf_det, value)
            .map_err(|e| CliError::Runtime(e.into()))?;
        println!("{name}: value = {value}, ratio = {ratio}");
        rows.push(PolicyEvalRow {
            variant: name.clone(),
            value,
            performance_ratio: ratio,
        });
    }

    let path = ctx.write_table(
        "policy_eval",
        |w| {
            use std::io::Write;
            writeln!(w, "variant,value,performance_ratio")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.variant, r.value, r.performance_ratio)?;
            }
            Ok(())
        },
        &rows,
    )?;

    #[derive(Serialize)]
    struct Echo {
        n_steps: usize,
        q_star: usize,
        variants: Vec<String>,
        constants: CalibrationConstants,
        border_width: f64,
        model: ModelEcho,
    }
    ctx.finish(
        "policy-eval",
        &Echo {
            n_steps,
            q_star,
            variants: names,
            constants,
            border_width: border,
            model: echo,
        },
        vec![path],
    )
}

// --- perf-compare -----------------------------------------------------------

#[derive(Serialize)]
struct PerfRow {
    q_star: usize,
    variant: String,
    ratio: f64,
}

pub fn cmd_perf_compare(
    ctx: &RunContext,
    cfg: &FileConfig,
    n_steps: Option<usize>,
    q_star_min: Option<usize>,
    q_star_max: Option<usize>,
) -> Result<(), CliError> {
    let n_steps = require(n_steps, cfg.dp.n_steps, "n_steps")?;
    let q_min = q_star_min.unwrap_or(1);
    let q_max = q_star_max.unwrap_or(n_steps.saturating_sub(1));
    if q_min == 0 || q_max < q_min || q_max >= n_steps {
        return config_err(format!(
            "need 1 <= q_star_min <= q_star_max < n_steps, got [{q_min}, {q_max}]"
        ));
    }
    let (model, echo) = resolve_model(cfg, None)?;
    let constants = constants_from(cfg)?;
    let border = cfg.policy.border_width.unwrap_or(DEFAULT_BORDER_WIDTH);

    let mut rows = Vec::new();
    for q_star in q_min..=q_max {
        let (values, optimal) =
            dp::solve_dp(n_steps, q_star, &model).map_err(|e| CliError::Runtime(e.into()))?;
        let det = DeterministicPolicy { n_steps, q_star };
        let perf_det = dp::evaluate_policy(&det, n_steps, q_star, &model)
            .map_err(|e| CliError::Runtime(e.into()))?;
        let mut push = |variant: &str, perf: f64| -> Result<(), CliError> {
            let ratio = dp::performance_ratio_with(values.v00(), perf_det, perf)
                .map_err(|e| CliError::Runtime(e.into()))?;
            rows.push(PerfRow {
                q_star,
                variant: variant.into(),
                ratio,
            });
            Ok(())
        };
        let perf_opt = dp::evaluate_policy(&optimal, n_steps, q_star, &model)
            .map_err(|e| CliError::Runtime(e.into()))?;
        push("optimal", perf_opt)?;
        push("deterministic", perf_det)?;
        for variant in [
            PolicyVariant::UnconstrainedRaw,
            PolicyVariant::ConstrainedRaw,
            PolicyVariant::UnconstrainedCalibrated,
            PolicyVariant::ConstrainedCalibrated,
            PolicyVariant::Mixed,
        ] {
            let policy = ClosedFormPolicy::new(variant, n_steps, q_star)
                .with_constants(constants.clone())
                .with_border_width(border);
            let perf = dp::evaluate_policy(&policy, n_steps, q_star, &model)
                .map_err(|e| CliError::Runtime(e.into()))?;
            push(variant.name(), perf)?;
        }
    }

    let path = ctx.write_table(
        "perf_compare",
        |w| {
            use std::io::Write;
            writeln!(w, "q_star,variant,ratio")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.q_star, r.variant, r.ratio)?;
            }
            Ok(())
        },
        &rows,
    )?;

    #[derive(Serialize)]
    struct Echo {
        n_steps: usize,
        q_star_min: usize,
        q_star_max: usize,
        constants: CalibrationConstants,
        border_width: f64,
        model: ModelEcho,
    }
    ctx.finish(
        "perf-compare",
        &Echo {
            n_steps,
            q_star_min: q_min,
            q_star_max: q_max,
            constants,
            border_width: border,
            model: echo,
        },
        vec![path],
    )
}

// --- simulate ----------------------------------------------------------------

pub fn cmd_simulate(
    ctx: &RunContext,
    cfg: &FileConfig,
    n_steps: Option<usize>,
    q_star: Option<usize>,
    paths: Option<usize>,
    checkpoints: Option<Vec<usize>>,
    p0: Option<f64>,
    variant: Option<String>,
    free_chain: bool,
) -> Result<(), CliError> {
    let n_steps = require(n_steps, cfg.dp.n_steps, "n_steps")?;
    let q_star = require(q_star, cfg.dp.q_star, "q_star")?;
    validate_target(n_steps, q_star)?;
    let paths = paths.or(cfg.sim.paths).unwrap_or(10_000);
    let p0 = p0.or(cfg.sim.p0).unwrap_or(100.0);
    let variant = variant
        .or_else(|| cfg.sim.variant.clone())
        .unwrap_or_else(|| "mixed".into());
    let checkpoints = checkpoints
        .or_else(|| cfg.sim.checkpoints.clone())
        .unwrap_or_else(|| default_checkpoints(n_steps));
    let force_completion = if free_chain {
        false
    } else {
        cfg.sim.force_completion.unwrap_or(true)
    };
    let (model, echo) = resolve_model(cfg, None)?;
    let constants = constants_from(cfg)?;
    let border = cfg.policy.border_width.unwrap_or(DEFAULT_BORDER_WIDTH);
    let policy = build_policy(&variant, n_steps, q_star, &constants, border, &model)?;

    let mut sim_cfg = SimConfig::new(n_steps, q_star, &model);
    sim_cfg.paths = paths;
    sim_cfg.seed = ctx.seed;
    sim_cfg.p0 = p0;
    sim_cfg.checkpoints = checkpoints.clone();
    sim_cfg.force_completion = force_completion;
    sim_cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let ensemble = sim::run_ensemble(&sim_cfg, &policy).map_err(|e| CliError::Runtime(e.into()))?;
    println!(
        "mean X-gain = {} (se {})",
        ensemble.summary.mean_x_gain, ensemble.summary.se_x_gain
    );

    let path = ctx.write_table(
        "ensemble_summary",
        |w| sim::write_summary_csv(&ensemble.summary, w),
        &ensemble.summary,
    )?;

    #[derive(Serialize)]
    struct Echo {
        n_steps: usize,
        q_star: usize,
        paths: usize,
        p0: f64,
        variant: String,
        checkpoints: Vec<usize>,
        force_completion: bool,
        model: ModelEcho,
    }
    ctx.finish(
        "simulate",
        &Echo {
            n_steps,
            q_star,
            paths,
            p0,
            variant,
            checkpoints,
            force_completion,
            model: echo,
        },
        vec![path],
    )
}

fn default_checkpoints(n_steps: usize) -> Vec<usize> {
    let mut cks: Vec<usize> = [n_steps / 4, n_steps / 2, 3 * n_steps / 4, n_steps]
        .into_iter()
        .filter(|&n| n > 0)
        .collect();
    cks.dedup();
    cks
}

// --- iab-verify ---------------------------------------------------------------

pub fn cmd_iab_verify(
    ctx: &RunContext,
    cfg: &FileConfig,
    field_kind: Option<String>,
    fill: Option<f64>,
    scale: Option<usize>,
    q_star_frac: Option<f64>,
    paths: Option<usize>,
    checkpoints: Option<Vec<usize>>,
) -> Result<(), CliError> {
    let field_kind = field_kind
        .or_else(|| cfg.iab.field.clone())
        .unwrap_or_else(|| "constant".into());
    let scale = scale.or(cfg.iab.scale).unwrap_or(100);
    let paths = paths.or(cfg.iab.paths).unwrap_or(100_000);
    let fill = fill.or(cfg.iab.fill).unwrap_or(0.5);
    let q_star_frac = q_star_frac.or(cfg.iab.q_star_frac).unwrap_or(0.5);

    let field: FillRateField = match field_kind.as_str() {
        "constant" => FillRateField::constant(fill, 1.0, scale)
            .map_err(|e| CliError::Config(e.to_string()))?,
        "deterministic" => FillRateField::deterministic_pacing(q_star_frac, 1.0, scale)
            .map_err(|e| CliError::Config(e.to_string()))?,
        "ac" => {
            let params = resolve_ac(cfg, &Default::default())?;
            let schedule = almgren::schedule(&params).map_err(|e| CliError::Config(e.to_string()))?;
            almgren::fill_field(&params, &schedule)
                .map_err(|e| CliError::Config(e.to_string()))?
        }
        other => return config_err(format!("unknown iab field kind {other:?}")),
    };
    let n = field.scale();
    let checkpoints = checkpoints
        .or_else(|| cfg.iab.checkpoints.clone())
        .unwrap_or_else(|| {
            // Stop at 0.9 N by default; the macroscopic map of forced
            // policies loses its smooth q-derivative at the horizon.
            let mut cks: Vec<usize> = [n / 4, n / 2, 3 * n / 4, 9 * n / 10]
                .into_iter()
                .filter(|&k| k > 0)
                .collect();
            cks.dedup();
            cks
        });

    let report =
        iab::verify(&field, paths, &checkpoints, ctx.seed).map_err(|e| CliError::Runtime(e.into()))?;
    for row in &report.rows {
        println!(
            "n = {:4}: z = {:+.3}, var ratio = {:.4}",
            row.checkpoint, row.z_mean, row.var_ratio
        );
    }

    let path = ctx.write_table("iab_report", |w| iab::write_report_csv(&report, w), &report)?;

    #[derive(Serialize)]
    struct Echo {
        field: String,
        fill: f64,
        scale: usize,
        q_star_frac: f64,
        paths: usize,
        checkpoints: Vec<usize>,
        variance_model: String,
    }
    ctx.finish(
        "iab-verify",
        &Echo {
            field: field_kind,
            fill,
            scale,
            q_star_frac,
            paths,
            checkpoints,
            variance_model: report.variance_model.clone(),
        },
        vec![path],
    )
}

// --- ac-bands -----------------------------------------------------------------

/// Flag overrides for the `[ac]` section.
#[derive(Debug, Default, Clone)]
pub struct AcOverrides {
    pub horizon: Option<f64>,
    pub q_star: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub gamma_perm: Option<f64>,
    pub lambda_risk: Option<f64>,
    pub tau: Option<f64>,
    pub obs_rate: Option<f64>,
}

fn resolve_ac(cfg: &FileConfig, over: &AcOverrides) -> Result<AcParams, CliError> {
    let params = AcParams {
        horizon: over.horizon.or(cfg.ac.horizon).unwrap_or(1.0),
        q_star: over.q_star.or(cfg.ac.q_star).unwrap_or(100.0),
        sigma: over.sigma.or(cfg.ac.sigma).unwrap_or(1.0),
        eta: over.eta.or(cfg.ac.eta).unwrap_or(1.0),
        gamma_perm: over.gamma_perm.or(cfg.ac.gamma_perm).unwrap_or(1.0),
        lambda_risk: over.lambda_risk.or(cfg.ac.lambda_risk).unwrap_or(3.0),
        tau: over.tau.or(cfg.ac.tau).unwrap_or(0.05),
        u: over.obs_rate.or(cfg.ac.obs_rate).unwrap_or(10_000.0),
    };
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(params)
}

pub fn cmd_ac_bands(
    ctx: &RunContext,
    cfg: &FileConfig,
    over: AcOverrides,
    validate: bool,
    validate_paths: Option<usize>,
) -> Result<(), CliError> {
    let params = resolve_ac(cfg, &over)?;
    let kappas = almgren::compute_kappas(&params).map_err(|e| CliError::Config(e.to_string()))?;
    let schedule = almgren::schedule(&params).map_err(|e| CliError::Runtime(e.into()))?;
    let total: f64 = schedule.speeds.iter().map(|v| v * params.tau).sum();
    println!(
        "eta_tilde = {}, kappa_tilde = {}, kappa = {}",
        kappas.eta_tilde, kappas.kappa_tilde, kappas.kappa
    );
    println!("sum(speed·tau) = {total} (target {})", params.q_star);

    let times: Vec<f64> = (0..=params.intervals())
        .map(|k| k as f64 * params.tau)
        .collect();
    let bands =
        almgren::uncertainty_bands(&params, &schedule, &times).map_err(|e| CliError::Runtime(e.into()))?;
    let mut outputs = vec![ctx.write_table(
        "ac_bands",
        |w| almgren::write_bands_csv(&bands, w),
        &bands,
    )?];

    let run_validation = validate || cfg.ac.validate.unwrap_or(false);
    if run_validation {
        let paths = validate_paths.or(cfg.ac.validate_paths).unwrap_or(100_000);
        let report = almgren::validate_bands(&params, paths, ctx.seed)
            .map_err(|e| CliError::Runtime(e.into()))?;
        let last = report.rows.last().expect("at least one interval");
        println!(
            "validation: horizon coverage90 = {:.4}, var ratio = {:.4}",
            last.coverage90, last.var_ratio_q
        );
        outputs.push(ctx.write_table(
            "ac_validation",
            |w| {
                use std::io::Write;
                writeln!(
                    w,
                    "t,band_mean_Q,band_var_Q,emp_mean_Q,emp_var_Q,z_mean,var_ratio_Q,coverage90,var_ratio_speed"
                )?;
                for r in &report.rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{},{}",
                        r.t,
                        r.band_mean_q,
                        r.band_var_q,
                        r.emp_mean_q,
                        r.emp_var_q,
                        r.z_mean,
                        r.var_ratio_q,
                        r.coverage90,
                        r.var_ratio_speed
                    )?;
                }
                Ok(())
            },
            &report,
        )?);
    }

    #[derive(Serialize)]
    struct Echo {
        params: AcParams,
        kappas: almgren::Kappas,
        validated: bool,
    }
    ctx.finish(
        "ac-bands",
        &Echo {
            params,
            kappas,
            validated: run_validation,
        },
        outputs,
    )
}

// --- calibrate -----------------------------------------------------------------

pub fn cmd_calibrate(ctx: &RunContext) -> Result<(), CliError> {
    let tau_unconstrained = policy::calibrate_shift(ShiftVariant::Unconstrained)
        .map_err(|e| CliError::Runtime(e.into()))?;
    let tau_constrained = policy::calibrate_shift(ShiftVariant::Constrained)
        .map_err(|e| CliError::Runtime(e.into()))?;
    println!("tau_unconstrained = {tau_unconstrained}");
    println!("tau_constrained = {tau_constrained}");

    #[derive(Serialize)]
    struct Row {
        variant: &'static str,
        shift: f64,
    }
    let rows = vec![
        Row {
            variant: "unconstrained",
            shift: tau_unconstrained,
        },
        Row {
            variant: "constrained",
            shift: tau_constrained,
        },
    ];
    let path = ctx.write_table(
        "calibration",
        |w| {
            use std::io::Write;
            writeln!(w, "variant,shift")?;
            for r in &rows {
                writeln!(w, "{},{}", r.variant, r.shift)?;
            }
            Ok(())
        },
        &rows,
    )?;

    #[derive(Serialize)]
    struct Echo {
        anchor: &'static str,
    }
    ctx.finish(
        "calibrate",
        &Echo {
            anchor: "policy(horizon = 3, p_det = 1/3) = 3/8",
        },
        vec![path],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_policy_names() {
        let model = GainModel::linear_uniform(1.0);
        let constants = CalibrationConstants::default();
        for name in [
            "deterministic",
            "unconstrained_raw",
            "constrained_raw",
            "unconstrained_calibrated",
            "constrained_calibrated",
            "mixed",
            "optimal",
        ] {
            assert!(build_policy(name, 20, 8, &constants, 0.15, &model).is_ok(), "{name}");
        }
        assert!(matches!(
            build_policy("nope", 20, 8, &constants, 0.15, &model),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn default_checkpoint_grid() {
        assert_eq!(default_checkpoints(100), vec![25, 50, 75, 100]);
        assert_eq!(default_checkpoints(2), vec![1, 2]);
    }
}
