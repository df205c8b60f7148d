//! Monte Carlo simulation of the discrete trading dynamics.
//!
//! Each step draws a `(signal, price_change)` pair, trades one share when the
//! signal clears the policy's quantile threshold, and updates
//!
//! ```text
//! P <- P + ΔP        Q <- Q + 1{trade}        M <- M - 1{trade}·P
//! ```
//!
//! With completion forcing on, `p = 1` whenever the remaining steps equal the
//! remaining shares and `p = 0` once `Q = Q*`, so `Q_N = Q*` on every path.
//! Paths are independent; each derives its own RNG stream from
//! `(seed, path index)`, so parallel and serial runs produce identical
//! ensembles.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dp::LatticePolicy;
use crate::error::{Error, Result};
use crate::gain::GainModel;

/// Simulation setup. `checkpoints` are step indices at which per-path
/// inventory is recorded.
#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub n_steps: usize,
    pub q_star: usize,
    pub p0: f64,
    pub model: &'a GainModel,
    pub paths: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub store_trajectories: bool,
    /// Force `Q_N = Q*` (diagonal forcing and stop at the target). Turn off
    /// to simulate the unconstrained threshold chain.
    pub force_completion: bool,
}

impl<'a> SimConfig<'a> {
    pub fn new(n_steps: usize, q_star: usize, model: &'a GainModel) -> Self {
        SimConfig {
            n_steps,
            q_star,
            p0: 100.0,
            model,
            paths: 1,
            seed: 0,
            checkpoints: Vec::new(),
            store_trajectories: false,
            force_completion: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidInput("need at least one path".into()));
        }
        if self.q_star == 0 || self.q_star > self.n_steps {
            return Err(Error::InfeasibleTarget {
                q_star: self.q_star,
                n_steps: self.n_steps,
            });
        }
        if !self.p0.is_finite() {
            return Err(Error::InvalidInput(format!("bad initial price {}", self.p0)));
        }
        if let Some(&n) = self.checkpoints.iter().find(|&&n| n > self.n_steps) {
            return Err(Error::InvalidInput(format!(
                "checkpoint {n} beyond horizon {}",
                self.n_steps
            )));
        }
        Ok(())
    }
}

/// One simulated step, as drawn.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub prob: f64,
    pub signal: f64,
    pub price_change: f64,
    pub traded: bool,
}

/// State after `n` steps.
#[derive(Debug, Clone, Copy)]
pub struct StepState {
    pub price: f64,
    pub inventory: u32,
    pub cash: f64,
}

/// Full per-step history of one path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub q_star: usize,
    /// States `0..=N`; entry 0 is the initial state.
    pub states: Vec<StepState>,
    /// Draws `0..N`.
    pub steps: Vec<StepRecord>,
}

/// Terminal variables of one path. `x_gain` is `X_N - X_0` where
/// `X_n = M_n + (Q_n - Q*)·P_n` marks the remaining obligation to market;
/// the conditional mean of its increments is exactly `g(p_n)`.
#[derive(Debug, Clone, Copy)]
pub struct PathTerminal {
    pub price: f64,
    pub inventory: u32,
    pub cash: f64,
    pub x_gain: f64,
}

#[derive(Debug, Clone)]
pub struct PathRecord {
    pub terminal: PathTerminal,
    pub checkpoint_inventories: Vec<u32>,
    pub trajectory: Option<Trajectory>,
}

/// Simulate one path with the supplied RNG.
pub fn simulate_path<P: LatticePolicy + ?Sized, R: Rng + ?Sized>(
    cfg: &SimConfig,
    policy: &P,
    rng: &mut R,
) -> Result<PathRecord> {
    cfg.validate()?;
    let mut price = cfg.p0;
    let mut inventory = 0u32;
    let mut cash = 0.0f64;
    let x0 = (0.0 - cfg.q_star as f64) * price;
    let mut checkpoint_inventories = vec![0u32; cfg.checkpoints.len()];
    let mut states = Vec::new();
    let mut steps = Vec::new();
    if cfg.store_trajectories {
        states.push(StepState {
            price,
            inventory,
            cash,
        });
    }

    for n in 0..cfg.n_steps {
        for (slot, &ck) in cfg.checkpoints.iter().enumerate() {
            if ck == n {
                checkpoint_inventories[slot] = inventory;
            }
        }
        let p = effective_prob(cfg, policy, n, inventory);
        let (signal, price_change) = cfg.model.sample_pair(rng)?;
        let traded = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            signal >= cfg.model.threshold_eval(p)
        };
        if traded {
            cash -= price;
            inventory += 1;
        }
        price += price_change;
        if cfg.store_trajectories {
            states.push(StepState {
                price,
                inventory,
                cash,
            });
            steps.push(StepRecord {
                prob: p,
                signal,
                price_change,
                traded,
            });
        }
    }
    for (slot, &ck) in cfg.checkpoints.iter().enumerate() {
        if ck == cfg.n_steps {
            checkpoint_inventories[slot] = inventory;
        }
    }

    let x_n = cash + (inventory as f64 - cfg.q_star as f64) * price;
    Ok(PathRecord {
        terminal: PathTerminal {
            price,
            inventory,
            cash,
            x_gain: x_n - x0,
        },
        checkpoint_inventories,
        trajectory: cfg.store_trajectories.then_some(Trajectory {
            q_star: cfg.q_star,
            states,
            steps,
        }),
    })
}

fn effective_prob<P: LatticePolicy + ?Sized>(
    cfg: &SimConfig,
    policy: &P,
    n: usize,
    inventory: u32,
) -> f64 {
    if cfg.force_completion {
        let q = inventory as usize;
        if q >= cfg.q_star {
            return 0.0;
        }
        if cfg.q_star - q >= cfg.n_steps - n {
            return 1.0;
        }
    }
    policy.prob(n, inventory as usize).clamp(0.0, 1.0)
}

/// Per-checkpoint ensemble statistics.
#[derive(Debug, Clone, Serialize)]
pub struct CheckpointStat {
    pub step: usize,
    pub mean_q: f64,
    pub var_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub checkpoints: Vec<CheckpointStat>,
    /// Ensemble mean of `X_N - X_0`; matches the exact policy value.
    pub mean_x_gain: f64,
    /// Standard error of `mean_x_gain`.
    pub se_x_gain: f64,
    /// Terminal inventory histogram as `(inventory, path count)`.
    pub fill_histogram: Vec<(u32, usize)>,
}

/// A simulated ensemble: terminals, the per-path checkpoint inventory matrix
/// (row per path), and summary statistics.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub checkpoints: Vec<usize>,
    pub terminals: Vec<PathTerminal>,
    checkpoint_q: Vec<u32>,
    pub summary: EnsembleSummary,
}

impl PathEnsemble {
    /// Inventory of `path` at checkpoint slot `k`.
    pub fn checkpoint_inventory(&self, path: usize, k: usize) -> u32 {
        self.checkpoint_q[path * self.checkpoints.len() + k]
    }

    /// All inventories recorded at checkpoint slot `k`.
    pub fn checkpoint_column(&self, k: usize) -> impl Iterator<Item = u32> + '_ {
        let m = self.checkpoints.len();
        self.checkpoint_q[k..].iter().step_by(m).copied()
    }
}

/// Run `cfg.paths` independent paths. Identical seeds produce bit-identical
/// summaries regardless of thread count.
pub fn run_ensemble<P: LatticePolicy + Sync + ?Sized>(
    cfg: &SimConfig,
    policy: &P,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    let records: Vec<PathRecord> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i as u64);
            simulate_path(cfg, policy, &mut rng).expect("config validated above")
        })
        .collect();

    let m = cfg.checkpoints.len();
    let mut checkpoint_q = Vec::with_capacity(cfg.paths * m);
    let mut terminals = Vec::with_capacity(cfg.paths);
    for r in &records {
        checkpoint_q.extend_from_slice(&r.checkpoint_inventories);
        terminals.push(r.terminal);
    }

    let nf = cfg.paths as f64;
    let mut checkpoints_stats = Vec::with_capacity(m);
    for k in 0..m {
        let column = || checkpoint_q[k..].iter().step_by(m).map(|&q| q as f64);
        let mean = kahan_sum(column()) / nf;
        let var = if cfg.paths > 1 {
            kahan_sum(column().map(|q| (q - mean) * (q - mean))) / (nf - 1.0)
        } else {
            0.0
        };
        checkpoints_stats.push(CheckpointStat {
            step: cfg.checkpoints[k],
            mean_q: mean,
            var_q: var,
        });
    }

    let mean_x = kahan_sum(terminals.iter().map(|t| t.x_gain)) / nf;
    let var_x = if cfg.paths > 1 {
        kahan_sum(
            terminals
                .iter()
                .map(|t| (t.x_gain - mean_x) * (t.x_gain - mean_x)),
        ) / (nf - 1.0)
    } else {
        0.0
    };

    let max_q = terminals.iter().map(|t| t.inventory).max().unwrap_or(0);
    let mut hist = vec![0usize; max_q as usize + 1];
    for t in &terminals {
        hist[t.inventory as usize] += 1;
    }
    let fill_histogram = hist
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(q, c)| (q as u32, c))
        .collect();

    Ok(PathEnsemble {
        checkpoints: cfg.checkpoints.clone(),
        terminals,
        checkpoint_q,
        summary: EnsembleSummary {
            paths: cfg.paths,
            checkpoints: checkpoints_stats,
            mean_x_gain: mean_x,
            se_x_gain: (var_x / nf).sqrt(),
            fill_histogram,
        },
    })
}

/// Derive the RNG for one path from the ensemble seed.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// The sequence `X_n = M_n + (Q_n - Q*)·P_n` along a stored trajectory.
///
/// Its increments equal `(Q_{n+1} - Q*)·ΔP_{n+1}`, so the conditional mean
/// per step is `g(p_n)` and the total mean gain equals the policy value.
pub fn x_diagnostic(record: &PathRecord) -> Result<Vec<f64>> {
    let traj = record
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trajectory not stored".into()))?;
    Ok(traj
        .states
        .iter()
        .map(|s| s.cash + (s.inventory as f64 - traj.q_star as f64) * s.price)
        .collect())
}

/// Export the ensemble summary as delimited text.
pub fn write_summary_csv<W: Write>(summary: &EnsembleSummary, mut out: W) -> Result<()> {
    writeln!(out, "checkpoint_n,mean_Q,var_Q")?;
    for c in &summary.checkpoints {
        writeln!(out, "{},{},{}", c.step, c.mean_q, c.var_q)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp;
    use approx::assert_abs_diff_eq;

    fn model() -> GainModel {
        GainModel::linear_uniform(1.0)
    }

    #[test]
    fn always_trade_fills_everything() {
        let m = model();
        let mut cfg = SimConfig::new(20, 20, &m);
        cfg.store_trajectories = true;
        let mut rng = path_rng(1, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 1.0, &mut rng).unwrap();
        assert_eq!(rec.terminal.inventory, 20);
        assert!(rec.trajectory.unwrap().steps.iter().all(|s| s.traded));
    }

    #[test]
    fn idle_policy_trades_only_when_forced() {
        let m = model();
        let mut cfg = SimConfig::new(20, 5, &m);
        cfg.store_trajectories = true;
        let mut rng = path_rng(2, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 0.0, &mut rng).unwrap();
        assert_eq!(rec.terminal.inventory, 5);
        let traj = rec.trajectory.unwrap();
        for (n, s) in traj.steps.iter().enumerate() {
            assert_eq!(s.traded, n >= 15, "step {n}");
        }
    }

    #[test]
    fn inventory_monotone_and_complete() {
        let m = model();
        let mut cfg = SimConfig::new(60, 23, &m);
        cfg.store_trajectories = true;
        for path in 0..20 {
            let mut rng = path_rng(3, path);
            let rec = simulate_path(&cfg, &|_n, _q| 0.4, &mut rng).unwrap();
            assert_eq!(rec.terminal.inventory, 23);
            let traj = rec.trajectory.as_ref().unwrap();
            for w in traj.states.windows(2) {
                assert!(w[1].inventory - w[0].inventory <= 1);
            }
        }
    }

    #[test]
    fn cash_consistency_exact() {
        let m = model();
        let mut cfg = SimConfig::new(50, 17, &m);
        cfg.store_trajectories = true;
        let mut rng = path_rng(4, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 0.5, &mut rng).unwrap();
        let traj = rec.trajectory.as_ref().unwrap();
        let mut spent = 0.0;
        for (n, s) in traj.steps.iter().enumerate() {
            if s.traded {
                spent += traj.states[n].price; // purchase at the pre-move price
            }
        }
        assert_eq!(0.0 - rec.terminal.cash, spent);
    }

    #[test]
    fn x_increment_identity_two_ways() {
        let m = model();
        let mut cfg = SimConfig::new(40, 15, &m);
        cfg.store_trajectories = true;
        let mut rng = path_rng(5, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 0.6, &mut rng).unwrap();
        let xs = x_diagnostic(&rec).unwrap();
        let traj = rec.trajectory.as_ref().unwrap();
        for n in 0..traj.steps.len() {
            let from_states = xs[n + 1] - xs[n];
            let after = traj.states[n + 1].inventory as f64;
            let from_draws = (after - 15.0) * traj.steps[n].price_change;
            assert_abs_diff_eq!(from_states, from_draws, epsilon = 1e-12);
        }
    }

    #[test]
    fn x_diagnostic_requires_trajectory() {
        let m = model();
        let cfg = SimConfig::new(10, 3, &m);
        let mut rng = path_rng(6, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 0.5, &mut rng).unwrap();
        assert!(matches!(x_diagnostic(&rec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn no_trades_zero_expected_x_gain() {
        let m = model();
        let mut cfg = SimConfig::new(30, 30, &m);
        cfg.force_completion = false;
        let mut rng = path_rng(7, 0);
        let rec = simulate_path(&cfg, &|_n, _q| 0.0, &mut rng).unwrap();
        assert_eq!(rec.terminal.inventory, 0);
        // Pathwise X_N - X_0 = -Q*·(P_N - P_0) when nothing trades; the
        // martingale makes the mean zero.
        let expect = -30.0 * (rec.terminal.price - cfg.p0);
        assert_abs_diff_eq!(rec.terminal.x_gain, expect, epsilon = 1e-10);
    }

    #[test]
    fn ensemble_deterministic_under_seed() {
        let m = model();
        let mut cfg = SimConfig::new(50, 20, &m);
        cfg.paths = 300;
        cfg.seed = 99;
        cfg.checkpoints = vec![10, 25, 50];
        let a = run_ensemble(&cfg, &|_n, _q| 0.4).unwrap();
        let b = run_ensemble(&cfg, &|_n, _q| 0.4).unwrap();
        assert_eq!(
            a.summary.mean_x_gain.to_bits(),
            b.summary.mean_x_gain.to_bits()
        );
        for (x, y) in a.summary.checkpoints.iter().zip(&b.summary.checkpoints) {
            assert_eq!(x.mean_q.to_bits(), y.mean_q.to_bits());
            assert_eq!(x.var_q.to_bits(), y.var_q.to_bits());
        }
        let mut cfg2 = cfg.clone();
        cfg2.seed = 100;
        let c = run_ensemble(&cfg2, &|_n, _q| 0.4).unwrap();
        assert_ne!(
            a.summary.mean_x_gain.to_bits(),
            c.summary.mean_x_gain.to_bits()
        );
    }

    #[test]
    fn unforced_binomial_terminal_variance() {
        let m = model();
        let mut cfg = SimConfig::new(100, 100, &m);
        cfg.paths = 100_000;
        cfg.seed = 11;
        cfg.force_completion = false;
        cfg.checkpoints = vec![100];
        let ens = run_ensemble(&cfg, &|_n, _q| 0.5).unwrap();
        let var = ens.summary.checkpoints[0].var_q;
        assert!((var - 25.0).abs() < 0.05 * 25.0, "var {var}");
        let mean = ens.summary.checkpoints[0].mean_q;
        assert!((mean - 50.0).abs() < 3.0 * (25.0f64 / 100_000.0).sqrt());
    }

    #[test]
    fn deterministic_policy_mean_inventory() {
        // The deterministic-pace chain picks a uniformly random Q*-subset of
        // steps, so Q_50 is hypergeometric: mean 25, var 50·(1/4)·(50/99).
        let m = model();
        let mut cfg = SimConfig::new(100, 50, &m);
        cfg.paths = 10_000;
        cfg.seed = 21;
        cfg.checkpoints = vec![50];
        let pol = dp::DeterministicPolicy {
            n_steps: 100,
            q_star: 50,
        };
        let ens = run_ensemble(&cfg, &pol).unwrap();
        let stat = &ens.summary.checkpoints[0];
        let se = (6.31313 / 10_000.0f64).sqrt();
        assert!(
            (stat.mean_q - 25.0).abs() < 3.0 * se,
            "mean {} se {se}",
            stat.mean_q
        );
        assert!(ens.terminals.iter().all(|t| t.inventory == 50));
    }

    #[test]
    fn mean_x_gain_matches_exact_policy_value() {
        let m = model();
        let mut cfg = SimConfig::new(50, 20, &m);
        cfg.paths = 20_000;
        cfg.seed = 31;
        let policy = |_n: usize, _q: usize| 0.35;
        let ens = run_ensemble(&cfg, &policy).unwrap();
        let exact = dp::evaluate_policy(&policy, 50, 20, &m).unwrap();
        let gap = (ens.summary.mean_x_gain - exact).abs();
        assert!(
            gap < 3.0 * ens.summary.se_x_gain,
            "mc {} exact {exact} se {}",
            ens.summary.mean_x_gain,
            ens.summary.se_x_gain
        );
    }

    #[test]
    fn constant_policy_x_gain_tracks_n_times_g() {
        let m = model();
        let mut cfg = SimConfig::new(80, 80, &m);
        cfg.paths = 20_000;
        cfg.seed = 41;
        cfg.force_completion = false;
        let ens = run_ensemble(&cfg, &|_n, _q| 0.3).unwrap();
        let expect = 80.0 * m.gain(0.3).unwrap();
        let gap = (ens.summary.mean_x_gain - expect).abs();
        assert!(gap < 3.0 * ens.summary.se_x_gain);
    }

    #[test]
    fn summary_csv_shape() {
        let m = model();
        let mut cfg = SimConfig::new(10, 5, &m);
        cfg.paths = 50;
        cfg.checkpoints = vec![5, 10];
        let ens = run_ensemble(&cfg, &|_n, _q| 0.5).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&ens.summary, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("checkpoint_n,mean_Q,var_Q\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn config_validation_errors() {
        let m = model();
        let cfg = SimConfig::new(10, 11, &m);
        assert!(matches!(cfg.validate(), Err(Error::InfeasibleTarget { .. })));
        let mut cfg = SimConfig::new(10, 5, &m);
        cfg.paths = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::new(10, 5, &m);
        cfg.checkpoints = vec![11];
        assert!(cfg.validate().is_err());
    }
}
