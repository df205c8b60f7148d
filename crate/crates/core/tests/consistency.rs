//! Cross-module consistency: the simulator's realized gain against the exact
//! lattice evaluation, the diffusion verifier against schedule-driven fields,
//! and the empirical-model pipeline end to end.

use threshold_exec::almgren::{self, AcParams};
use threshold_exec::dp;
use threshold_exec::gain::{self, GainModel};
use threshold_exec::iab;
use threshold_exec::policy::{ClosedFormPolicy, PolicyVariant};
use threshold_exec::sim::{run_ensemble, SimConfig};

/// Ensemble mean of `X_N - X_0` equals the exact policy value for every
/// closed-form variant (smaller sibling of the acceptance-scale check).
#[test]
fn simulated_gain_matches_exact_value_per_variant() {
    let model = GainModel::linear_uniform(1.0);
    let (n_steps, q_star) = (60usize, 24usize);
    for variant in PolicyVariant::ALL {
        let policy = ClosedFormPolicy::new(variant, n_steps, q_star);
        let exact = dp::evaluate_policy(&policy, n_steps, q_star, &model).unwrap();
        let mut cfg = SimConfig::new(n_steps, q_star, &model);
        cfg.paths = 30_000;
        cfg.seed = 7 + variant as u64;
        let ens = run_ensemble(&cfg, &policy).unwrap();
        let gap = (ens.summary.mean_x_gain - exact).abs();
        assert!(
            gap < 3.0 * ens.summary.se_x_gain,
            "{variant}: mc {} exact {exact} se {}",
            ens.summary.mean_x_gain,
            ens.summary.se_x_gain
        );
    }
}

/// A schedule-driven fill field pushed through the diffusion verifier: the
/// discrete chain tracks the Gaussian prediction.
#[test]
fn schedule_field_passes_diffusion_verifier() {
    let params = AcParams {
        horizon: 1.0,
        q_star: 100.0,
        sigma: 1.0,
        eta: 1.0,
        gamma_perm: 1.0,
        lambda_risk: 3.0,
        tau: 0.05,
        u: 2000.0,
    };
    let schedule = almgren::schedule(&params).unwrap();
    let field = almgren::fill_field(&params, &schedule).unwrap();
    let n = field.scale();
    let report = iab::verify(&field, 20_000, &[n / 4, n / 2, 3 * n / 4, n], 31).unwrap();
    for row in &report.rows {
        assert!(row.z_mean.abs() < 4.0, "{row:?}");
        assert!((row.var_ratio - 1.0).abs() < 0.08, "{row:?}");
    }
    // The verifier's own mean prediction follows the continuous schedule.
    let last = report.rows.last().unwrap();
    assert!((last.pred_mean - 100.0).abs() < 0.5);
}

/// CSV rows -> empirical model -> JSON round trip -> lattice benchmark.
#[test]
fn empirical_pipeline_end_to_end() {
    let generator = GainModel::linear_uniform(1.0);
    let mut rng = threshold_exec::sim::path_rng(17, 0);
    let mut csv_text = String::from("signal,price_change\n");
    for _ in 0..200_000 {
        let (s, dp_) = generator.sample_pair(&mut rng).unwrap();
        csv_text.push_str(&format!("{s},{dp_}\n"));
    }
    let rows = gain::read_samples_csv(csv_text.as_bytes()).unwrap();
    let empirical = GainModel::empirical_from_samples(&rows).unwrap();
    assert!(!empirical.mean_warning());

    let reimported = GainModel::from_json(&empirical.to_json()).unwrap();
    for &p in &[0.1, 0.5, 0.9] {
        assert_eq!(
            empirical.gain(p).unwrap(),
            reimported.gain(p).unwrap()
        );
    }

    let (v_emp, p_emp) = dp::solve_dp(40, 16, &reimported).unwrap();
    let (v_exact, _) = dp::solve_dp(40, 16, &generator).unwrap();
    assert!((v_emp.v00() - v_exact.v00()).abs() < 0.05 * v_exact.v00());
    let ratio = dp::performance_ratio(&p_emp, 40, 16, &reimported).unwrap();
    assert!((ratio - 1.0).abs() < 1e-9);
}
