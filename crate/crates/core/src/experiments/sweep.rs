//! (method, alpha, lambda) sweeps on a fixed MRP and representation.
//!
//! Each run draws one trajectory from its own stream and replays it against
//! every cell, so all methods and parameters see the same samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::seed::{Purpose, SeedPlan, SeedPlanRecord};
use crate::experiments::summary::{aggregate_and_normalize, CellMean, MethodSummary};
use crate::experiments::StreamHasher;
use crate::learner::{TdConfig, TdLearner, Variant};
use crate::linear::{dot_unchecked, FeatureVector, NoOps};
use crate::mrp::{lms_solution_weighted, Mrp, Transition, Weighting};
use crate::representation::Representation;

/// Step-sizes 2, 1.5 and 2^-j for j = 0..=12, largest first.
pub fn default_alphas() -> Vec<f64> {
    let mut a = vec![2.0, 1.5];
    a.extend((0..=12).map(|j| 0.5f64.powi(j)));
    a
}

pub fn default_lambdas() -> Vec<f64> {
    let mut l: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    l.extend([0.95, 0.975, 0.99, 1.0]);
    l
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Variant>,
    pub runs: usize,
    pub horizon: usize,
    pub master_seed: u64,
    pub weighting: Weighting,
}

impl SweepConfig {
    /// Default grids, all three methods, 50 runs.
    pub fn new(horizon: usize, master_seed: u64) -> Self {
        Self {
            alphas: default_alphas(),
            lambdas: default_lambdas(),
            methods: Variant::ALL.to_vec(),
            runs: 50,
            horizon,
            master_seed,
            weighting: Weighting::StateDistribution,
        }
    }

    /// 100 steps for small processes, 1000 from k = 100 up.
    pub fn default_horizon(k: usize) -> usize {
        if k >= 100 {
            1000
        } else {
            100
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("runs and horizon must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig("alphas must be non-empty and > 0".into()));
        }
        if !self.lambdas.contains(&0.0) {
            return Err(Error::InvalidConfig("lambdas must include 0 for normalisation".into()));
        }
        if self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidConfig("lambdas must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Error record for one (method, alpha, lambda, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Variant,
    pub alpha: f64,
    pub lambda: f64,
    pub run: usize,
    /// Per-step MSE against the LMS solution, averaged over the horizon.
    pub raw_error: f64,
    /// MSE after the last step.
    pub final_error: f64,
    pub diverged: bool,
    /// Hash of the transition stream the cell consumed.
    pub stream_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub gamma: f64,
    pub records: Vec<CellRecord>,
    pub means: Vec<CellMean>,
    pub summary: Vec<MethodSummary>,
    pub seed_plan: SeedPlanRecord,
}

impl SweepResult {
    pub fn summary_for(&self, method: Variant) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Per-state MSE weights and LMS predictions.
#[derive(Debug, Clone)]
pub struct LmsTarget {
    weights: Vec<f64>,
    targets: Vec<f64>,
}

impl LmsTarget {
    pub fn new(mrp: &Mrp, rep: &Representation, weighting: Weighting) -> Result<Self> {
        let weights = mrp.weights(weighting)?;
        let v = mrp.true_values()?;
        let theta = lms_solution_weighted(rep, &weights, &v.v)?;
        let targets = rep
            .features()
            .iter()
            .map(|phi| dot_unchecked(theta.as_slice(), phi, &mut NoOps))
            .collect();
        Ok(Self { weights, targets })
    }

    /// sum_s w(s) (theta . phi(s) - theta* . phi(s))^2
    pub fn mse(&self, theta: &[f64], features: &[FeatureVector]) -> f64 {
        let mut total = 0.0;
        for ((phi, &w), &t) in features.iter().zip(&self.weights).zip(&self.targets) {
            let pred = dot_unchecked(theta, phi, &mut NoOps);
            let e = pred - t;
            total += w * e * e;
        }
        total
    }
}

/// Samples `steps` transitions, restarting at the initial state after termination.
pub fn sample_trajectory<R: rand::Rng + ?Sized>(mrp: &Mrp, steps: usize, rng: &mut R) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(steps);
    let mut s = mrp.initial_state();
    for _ in 0..steps {
        let t = mrp.sample_transition(s, rng)?;
        s = t.next.unwrap_or(mrp.initial_state());
        out.push(t);
    }
    Ok(out)
}

struct Cell {
    method: Variant,
    alpha: f64,
    lambda: f64,
    run: usize,
}

pub fn run_sweep(mrp: &Mrp, rep: &Representation, cfg: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    if rep.k() != mrp.k() {
        return Err(Error::DimensionMismatch {
            expected: mrp.k(),
            found: rep.k(),
        });
    }
    if cfg.methods.iter().any(|m| m.needs_binary_features()) && !rep.is_binary() {
        return Err(Error::InvalidConfig(format!(
            "replacing traces need binary features, but the {} representation is not binary",
            rep.kind().name()
        )));
    }
    let target = LmsTarget::new(mrp, rep, cfg.weighting)?;
    let plan = SeedPlan::new(cfg.master_seed);

    let runs: Vec<usize> = (0..cfg.runs).collect();
    let trajectories = exec
        .map(&runs, |&run| {
            let mut rng = plan.rng(run as u64, Purpose::Trajectory);
            sample_trajectory(mrp, cfg.horizon, &mut rng)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for run in 0..cfg.runs {
        for &method in &cfg.methods {
            for &alpha in &cfg.alphas {
                for &lambda in &cfg.lambdas {
                    cells.push(Cell {
                        method,
                        alpha,
                        lambda,
                        run,
                    });
                }
            }
        }
    }

    let features = rep.features();
    let records = exec
        .map(&cells, |c| {
            run_cell(c, mrp.gamma(), &trajectories[c.run], features, &target)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let means = mean_over_runs(&records, cfg);
    let summary = aggregate_and_normalize(&means);
    Ok(SweepResult {
        config: cfg.clone(),
        gamma: mrp.gamma(),
        records,
        means,
        summary,
        seed_plan: plan.record(cfg.runs),
    })
}

fn run_cell(
    cell: &Cell,
    gamma: f64,
    trajectory: &[Transition],
    features: &[FeatureVector],
    target: &LmsTarget,
) -> Result<CellRecord> {
    let cfg = TdConfig::new(cell.method, cell.alpha, cell.lambda, gamma);
    let mut learner = TdLearner::new(cfg, features[0].dim())?;
    let mut hasher = StreamHasher::new();
    let mut total = 0.0;
    let mut last = 0.0;
    let mut diverged = false;
    learner.start_episode();
    for t in trajectory {
        hasher.push(t);
        let phi = &features[t.s];
        let next = t.next.map_or(phi, |n| &features[n]);
        learner.step(phi, t.reward, next, t.is_terminal())?;
        if learner.is_diverged() {
            diverged = true;
            break;
        }
        last = target.mse(learner.theta().as_slice(), features);
        total += last;
        if t.is_terminal() {
            learner.start_episode();
        }
    }
    let (raw_error, final_error) = if diverged {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (total / trajectory.len() as f64, last)
    };
    Ok(CellRecord {
        method: cell.method,
        alpha: cell.alpha,
        lambda: cell.lambda,
        run: cell.run,
        raw_error,
        final_error,
        diverged,
        stream_hash: if diverged { 0 } else { hasher.finish() },
    })
}

fn mean_over_runs(records: &[CellRecord], cfg: &SweepConfig) -> Vec<CellMean> {
    let per_run = cfg.methods.len() * cfg.alphas.len() * cfg.lambdas.len();
    (0..per_run)
        .map(|i| {
            let first = &records[i];
            let cells = (0..cfg.runs).map(|r| &records[r * per_run + i]);
            let mut sum = 0.0;
            let mut final_sum = 0.0;
            let mut diverged_runs = 0;
            for c in cells {
                sum += c.raw_error;
                final_sum += c.final_error;
                diverged_runs += c.diverged as usize;
            }
            CellMean {
                method: first.method,
                alpha: first.alpha,
                lambda: first.lambda,
                mean_error: sum / cfg.runs as f64,
                mean_final_error: final_sum / cfg.runs as f64,
                diverged_runs,
            }
        })
        .collect()
}
