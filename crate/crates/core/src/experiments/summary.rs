//! Reduction of per-cell errors to normalised best-parameter summaries.

use serde::{Deserialize, Serialize};

use crate::learner::Variant;

/// Mean error over runs for one (method, alpha, lambda).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub method: Variant,
    pub alpha: f64,
    pub lambda: f64,
    /// Infinite if any run diverged.
    pub mean_error: f64,
    pub mean_final_error: f64,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Variant,
    pub best_alpha: f64,
    pub best_lambda: f64,
    pub best_error: f64,
    /// Best alpha at lambda = 0.
    pub baseline_alpha: f64,
    pub baseline_error: f64,
    /// best_error / baseline_error; never above 1 because lambda = 0 is in the grid.
    pub normalized: f64,
}

fn argmin<'a>(cells: impl Iterator<Item = &'a CellMean>) -> Option<&'a CellMean> {
    let mut best: Option<&CellMean> = None;
    for c in cells {
        match best {
            Some(b) if !(c.mean_error < b.mean_error) => {}
            _ => best = Some(c),
        }
    }
    best
}

/// Per method: min over (alpha, lambda) of the mean error, divided by the
/// min over alpha at lambda = 0. Methods without a lambda = 0 cell are skipped.
pub fn aggregate_and_normalize(means: &[CellMean]) -> Vec<MethodSummary> {
    let mut methods: Vec<Variant> = Vec::new();
    for c in means {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
    }
    methods
        .into_iter()
        .filter_map(|method| {
            let own = || means.iter().filter(move |c| c.method == method);
            let best = argmin(own())?;
            let base = argmin(own().filter(|c| c.lambda == 0.0))?;
            let normalized = if base.mean_error.is_finite() && base.mean_error > 0.0 {
                best.mean_error / base.mean_error
            } else if base.mean_error == 0.0 {
                1.0
            } else {
                f64::NAN
            };
            Some(MethodSummary {
                method,
                best_alpha: best.alpha,
                best_lambda: best.lambda,
                best_error: best.mean_error,
                baseline_alpha: base.alpha,
                baseline_error: base.mean_error,
                normalized,
            })
        })
        .collect()
}

/// Per-lambda curve: min over alpha at each lambda, divided by the lambda = 0 best.
pub fn best_alpha_curve(means: &[CellMean], method: Variant) -> Vec<(f64, f64)> {
    let own: Vec<&CellMean> = means.iter().filter(|c| c.method == method).collect();
    let mut lambdas: Vec<f64> = Vec::new();
    for c in &own {
        if !lambdas.contains(&c.lambda) {
            lambdas.push(c.lambda);
        }
    }
    let base = argmin(own.iter().copied().filter(|c| c.lambda == 0.0)).map(|c| c.mean_error);
    lambdas
        .into_iter()
        .map(|l| {
            let best = argmin(own.iter().copied().filter(|c| c.lambda == l)).map(|c| c.mean_error);
            let value = match (best, base) {
                (Some(b), Some(z)) if z > 0.0 && z.is_finite() => b / z,
                (Some(_), Some(0.0)) => 1.0,
                _ => f64::NAN,
            };
            (l, value)
        })
        .collect()
}
