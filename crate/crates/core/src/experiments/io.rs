//! CSV and JSON result files.
//!
//! CSV files are comma-separated with a header row and `.` decimals; no field
//! ever needs quoting. Floats use Rust's shortest round-trip formatting, so
//! identical results give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::experiments::challenge::{OneStateResult, TwoStateResult};
use crate::experiments::sweep::SweepResult;
use crate::learner::Variant;

/// `<id>_seed<seed>`
pub fn file_stem(experiment_id: &str, master_seed: u64) -> String {
    format!("{experiment_id}_seed{master_seed}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("method,alpha,lambda,run,raw_error,diverged,final_error\n");
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method, r.alpha, r.lambda, r.run, r.raw_error, r.diverged, r.final_error
        );
    }
    out
}

#[derive(Serialize)]
struct SweepSummaryDoc<'a> {
    experiment_id: &'a str,
    gamma: f64,
    config: &'a crate::experiments::sweep::SweepConfig,
    summary: &'a [crate::experiments::summary::MethodSummary],
    means: &'a [crate::experiments::summary::CellMean],
    seed_plan: &'a crate::experiments::seed::SeedPlanRecord,
}

/// Writes `<id>_seed<seed>.csv` and `<id>_seed<seed>.json` into `dir`.
pub fn write_sweep(dir: &Path, experiment_id: &str, result: &SweepResult) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let stem = file_stem(experiment_id, result.config.master_seed);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, sweep_csv(result))?;
    write_json(
        &json_path,
        &SweepSummaryDoc {
            experiment_id,
            gamma: result.gamma,
            config: &result.config,
            summary: &result.summary,
            means: &result.means,
            seed_plan: &result.seed_plan,
        },
    )?;
    Ok((csv_path, json_path))
}

fn method_header(methods: &[Variant]) -> String {
    methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
}

/// One row per alpha, one column per method (mean end-of-episode RMS error).
pub fn one_state_csv(result: &OneStateResult) -> String {
    let methods = &result.config.methods;
    let mut out = format!("alpha,{}\n", method_header(methods));
    for &alpha in &result.config.alphas {
        let _ = write!(out, "{alpha}");
        for &m in methods {
            let v = result.row(m, alpha).map_or(f64::NAN, |r| r.mean_rms);
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// One row per lambda, one column per method, plus the LMS floor.
pub fn two_state_csv(result: &TwoStateResult) -> String {
    let methods = &result.config.methods;
    let mut out = format!("lambda,{},lms\n", method_header(methods));
    for &lambda in &result.config.lambdas {
        let _ = write!(out, "{lambda}");
        for &m in methods {
            let v = result.row(m, lambda).map_or(f64::NAN, |r| r.converged_error);
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", result.lms_floor);
    }
    out
}

/// Rows of (lambda, value per method), e.g. best-alpha normalised curves.
pub fn curve_csv(lambdas: &[f64], methods: &[Variant], value: impl Fn(Variant, f64) -> f64) -> String {
    let mut out = format!("lambda,{}\n", method_header(methods));
    for &l in lambdas {
        let _ = write!(out, "{l}");
        for &m in methods {
            let _ = write!(out, ",{}", value(m, l));
        }
        out.push('\n');
    }
    out
}
