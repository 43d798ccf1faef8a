//! Tile-coded predictions of discounted future signal values ("nexting").

pub mod signals;
pub mod tiles;

pub use signals::{load_signals, mean_abs_change, synth_signals, ChannelRange, SignalFrame, Signals, SynthKind};
pub use tiles::{tile_code, tile_hash, TileCoder, TileCoderConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::summary::{aggregate_and_normalize, CellMean, MethodSummary};
use crate::experiments::sweep::{default_alphas, default_lambdas};
use crate::learner::{TdConfig, TdLearner, Variant};
use crate::linear::FeatureVector;

pub const DEFAULT_GVF_GAMMA: f64 = 0.97;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvfSpec {
    pub target_channel: usize,
    pub gamma: f64,
}

impl GvfSpec {
    pub fn new(target_channel: usize) -> Self {
        Self {
            target_channel,
            gamma: DEFAULT_GVF_GAMMA,
        }
    }

    pub fn validate(&self, num_signals: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.target_channel >= num_signals {
            return Err(Error::InvalidConfig(format!(
                "target channel {} out of range for {num_signals} signals",
                self.target_channel
            )));
        }
        Ok(())
    }
}

/// G_t = x_{t+1} + gamma * G_{t+1}, with the signal held at its last value
/// forever after the end, so the final entry is x_end / (1 - gamma).
pub fn compute_returns(signal: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let last = *signal.last().ok_or_else(|| Error::Signal("empty signal".into()))?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let mut g = vec![0.0; signal.len()];
    let mut acc = last / (1.0 - gamma);
    g[signal.len() - 1] = acc;
    for t in (0..signal.len() - 1).rev() {
        acc = signal[t + 1] + gamma * acc;
        g[t] = acc;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextingStep {
    pub step: usize,
    pub prediction: f64,
    pub target: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextingRun {
    pub td: TdConfig,
    /// Stops at the step where the learner diverged.
    pub steps: Vec<NextingStep>,
    /// Mean |prediction - return| over all learning steps; infinite on divergence.
    pub mean_abs_error: f64,
    /// Same, over the last tenth of the steps.
    pub tail_abs_error: f64,
    pub diverged: bool,
}

/// Encodes every frame once.
pub fn encode_frames(coder: &TileCoder, frames: &[SignalFrame]) -> Result<Vec<FeatureVector>> {
    frames.iter().map(|f| coder.encode(&f.values)).collect()
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Signal(format!("need at least 2 frames, got {n}")));
    }
    Ok(())
}

/// One continuing episode over `frames`. At step t the prediction for
/// frame t is recorded before the learner sees the transition to t + 1,
/// whose reward is the target channel at t + 1.
pub fn run_nexting(
    frames: &[SignalFrame],
    coder_cfg: &TileCoderConfig,
    gvf: &GvfSpec,
    td: &TdConfig,
) -> Result<NextingRun> {
    check_len(frames.len())?;
    gvf.validate(coder_cfg.num_signals)?;
    let coder = TileCoder::new(coder_cfg.clone())?;
    let features = encode_frames(&coder, frames)?;
    let target: Vec<f64> = frames.iter().map(|f| f.values[gvf.target_channel]).collect();
    let returns = compute_returns(&target, gvf.gamma)?;
    run_encoded(&features, &target, &returns, coder.dim(), td, true)
}

/// Mean error of `td` and of the same step-size at lambda = 0, for normalising.
pub fn run_nexting_with_baseline(
    frames: &[SignalFrame],
    coder_cfg: &TileCoderConfig,
    gvf: &GvfSpec,
    td: &TdConfig,
) -> Result<(NextingRun, f64)> {
    let run = run_nexting(frames, coder_cfg, gvf, td)?;
    let base = TdConfig { lambda: 0.0, ..td.clone() };
    let baseline = run_nexting(frames, coder_cfg, gvf, &base)?.mean_abs_error;
    Ok((run, baseline))
}

fn run_encoded(
    features: &[FeatureVector],
    target: &[f64],
    returns: &[f64],
    dim: usize,
    td: &TdConfig,
    keep_steps: bool,
) -> Result<NextingRun> {
    let mut learner = TdLearner::new(td.clone(), dim)?;
    let n = features.len() - 1;
    let tail_start = n - n.div_ceil(10);
    let mut steps = Vec::with_capacity(if keep_steps { n } else { 0 });
    let mut sum = 0.0;
    let mut tail = 0.0;
    let mut diverged = false;
    for t in 0..n {
        let prediction = learner.predict(&features[t])?;
        let abs_error = (prediction - returns[t]).abs();
        sum += abs_error;
        if t >= tail_start {
            tail += abs_error;
        }
        if keep_steps {
            steps.push(NextingStep {
                step: t,
                prediction,
                target: returns[t],
                abs_error,
            });
        }
        learner.step(&features[t], target[t + 1], &features[t + 1], false)?;
        if learner.is_diverged() || !abs_error.is_finite() {
            diverged = true;
            break;
        }
    }
    let (mean_abs_error, tail_abs_error) = if diverged {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (sum / n as f64, tail / (n - tail_start) as f64)
    };
    Ok(NextingRun {
        td: td.clone(),
        steps,
        mean_abs_error,
        tail_abs_error,
        diverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextingSweepConfig {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Variant>,
}

impl NextingSweepConfig {
    /// The harness grids, with step-sizes divided by the number of active
    /// features so that alpha = 1 / active is a full step.
    pub fn for_active(active: usize) -> Self {
        Self {
            alphas: default_alphas().into_iter().map(|a| a / active as f64).collect(),
            lambdas: default_lambdas(),
            methods: Variant::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidConfig("empty nexting grid".into()));
        }
        if !self.lambdas.contains(&0.0) {
            return Err(Error::InvalidConfig("lambdas must include 0 for normalisation".into()));
        }
        Ok(())
    }
}

/// Best-alpha error at one lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub best_alpha: f64,
    pub error: f64,
    /// error divided by the lambda = 0 best-alpha error.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: Variant,
    pub points: Vec<CurvePoint>,
}

impl MethodCurve {
    pub fn at(&self, lambda: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.lambda == lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextingSweep {
    pub gvf: GvfSpec,
    pub target_name: String,
    pub coder: TileCoderConfig,
    pub steps: usize,
    pub config: NextingSweepConfig,
    pub cells: Vec<CellMean>,
    pub summary: Vec<MethodSummary>,
    pub curves: Vec<MethodCurve>,
    /// Per-step record of each method's best (alpha, lambda) cell.
    pub best_runs: Vec<NextingRun>,
}

impl NextingSweep {
    pub fn curve(&self, method: Variant) -> Option<&MethodCurve> {
        self.curves.iter().find(|c| c.method == method)
    }
}

/// Every (method, alpha, lambda) cell over the same encoded stream.
pub fn sweep_nexting(
    signals: &Signals,
    coder_cfg: &TileCoderConfig,
    gvf: &GvfSpec,
    cfg: &NextingSweepConfig,
    exec: Execution,
) -> Result<NextingSweep> {
    cfg.validate()?;
    check_len(signals.len())?;
    gvf.validate(coder_cfg.num_signals)?;
    let coder = TileCoder::new(coder_cfg.clone())?;
    let features = encode_frames(&coder, &signals.frames)?;
    let target = signals.channel(gvf.target_channel);
    let returns = compute_returns(&target, gvf.gamma)?;

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &alpha in &cfg.alphas {
            for &lambda in &cfg.lambdas {
                cells.push(TdConfig::new(method, alpha, lambda, gvf.gamma));
            }
        }
    }
    for td in &cells {
        td.validate()?;
    }
    let runs = exec.map(&cells, |td| run_encoded(&features, &target, &returns, coder.dim(), td, false));
    let means = runs
        .into_iter()
        .map(|r| {
            r.map(|r| CellMean {
                method: r.td.variant,
                alpha: r.td.alpha,
                lambda: r.td.lambda,
                mean_error: r.mean_abs_error,
                mean_final_error: r.tail_abs_error,
                diverged_runs: r.diverged as usize,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = aggregate_and_normalize(&means);
    let curves = cfg
        .methods
        .iter()
        .map(|&method| curve_for(&means, method, &cfg.lambdas))
        .collect();
    let best_runs = summary
        .iter()
        .map(|s| {
            let td = TdConfig::new(s.method, s.best_alpha, s.best_lambda, gvf.gamma);
            run_encoded(&features, &target, &returns, coder.dim(), &td, true)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(NextingSweep {
        gvf: *gvf,
        target_name: signals
            .channels
            .get(gvf.target_channel)
            .cloned()
            .unwrap_or_else(|| gvf.target_channel.to_string()),
        coder: coder_cfg.clone(),
        steps: signals.len(),
        config: cfg.clone(),
        cells: means,
        summary,
        curves,
        best_runs,
    })
}

fn curve_for(means: &[CellMean], method: Variant, lambdas: &[f64]) -> MethodCurve {
    let best_at = |lambda: f64| {
        means
            .iter()
            .filter(|c| c.method == method && c.lambda == lambda)
            .fold(None::<&CellMean>, |best, c| match best {
                Some(b) if !(c.mean_error < b.mean_error) => Some(b),
                _ => Some(c),
            })
    };
    let base = best_at(0.0).map_or(f64::NAN, |c| c.mean_error);
    let points = lambdas
        .iter()
        .filter_map(|&lambda| {
            let c = best_at(lambda)?;
            let normalized = if base == 0.0 {
                1.0
            } else if base.is_finite() {
                c.mean_error / base
            } else {
                f64::NAN
            };
            Some(CurvePoint {
                lambda,
                best_alpha: c.alpha,
                error: c.mean_error,
                normalized,
            })
        })
        .collect();
    MethodCurve { method, points }
}
