//! Multi-channel time series: CSV loading with min-max normalisation and a
//! synthetic generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub step: usize,
    pub values: Vec<f64>,
}

/// Range used to map one channel onto [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    /// A degenerate range (max == min) maps everything to 0.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signals {
    pub channels: Vec<String>,
    /// Empty for generated data, which is already in [0, 1].
    pub ranges: Vec<ChannelRange>,
    pub frames: Vec<SignalFrame>,
}

impl Signals {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < self.channels.len()))
            .ok_or_else(|| Error::Signal(format!("no channel '{name}'")))
    }

    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values[index]).collect()
    }
}

/// Reads the named columns (all columns when `channels` is `None`) of a CSV
/// file with a header row and min-max normalises each one.
pub fn load_signals(path: &Path, channels: Option<&[String]>) -> Result<Signals> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let names: Vec<String> = match channels {
        Some(c) => c.to_vec(),
        None => headers.clone(),
    };
    if names.is_empty() {
        return Err(Error::Signal("no channels selected".into()));
    }
    let columns = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Signal(format!("missing column '{n}'")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut raw: Vec<Vec<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let values = columns
            .iter()
            .zip(&names)
            .map(|(&c, name)| {
                let cell = record.get(c).unwrap_or("").trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Signal(format!("row {}: column '{name}' is not numeric: '{cell}'", row + 1))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        raw.push(values);
    }
    if raw.len() < 2 {
        return Err(Error::Signal(format!("need at least 2 rows, found {}", raw.len())));
    }

    let ranges: Vec<ChannelRange> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (min, max) = raw
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[i]), hi.max(r[i])));
            ChannelRange {
                name: name.clone(),
                min,
                max,
            }
        })
        .collect();
    let frames = raw
        .into_iter()
        .enumerate()
        .map(|(step, r)| SignalFrame {
            step,
            values: r
                .iter()
                .zip(&ranges)
                .map(|(&x, range)| range.normalize(x).clamp(0.0, 1.0))
                .collect(),
        })
        .collect();
    Ok(Signals {
        channels: names,
        ranges,
        frames,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// smooth, rapid and three noisy channels correlated with them.
    Mixed,
    /// Every channel fixed at the given level.
    Constant(f64),
}

pub const SYNTH_CHANNELS: [&str; 5] = ["smooth", "rapid", "noise_smooth", "noise_rapid", "noise_mix"];
pub const SMOOTH_PERIOD: f64 = 500.0;
pub const RAPID_SWITCH_PROB: f64 = 0.2;
const RAPID_LEVELS: (f64, f64) = (0.1, 0.6);

/// Five channels in [0, 1], deterministic per seed.
///
/// `smooth` is a slow sine; `rapid` is a square wave that flips between two
/// levels with probability [`RAPID_SWITCH_PROB`] per step. The remaining
/// channels mix those two with Gaussian noise.
pub fn synth_signals(kind: SynthKind, steps: usize, seed: u64) -> Result<Signals> {
    if steps < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 steps, got {steps}")));
    }
    let channels = SYNTH_CHANNELS.iter().map(|s| s.to_string()).collect();
    let frames = match kind {
        SynthKind::Constant(c) => {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidConfig(format!("constant level {c} outside [0, 1]")));
            }
            (0..steps)
                .map(|step| SignalFrame {
                    step,
                    values: vec![c; 5],
                })
                .collect()
        }
        SynthKind::Mixed => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let mut high = rng.random_bool(0.5);
            let mut out = Vec::with_capacity(steps);
            for step in 0..steps {
                if step > 0 && rng.random_bool(RAPID_SWITCH_PROB) {
                    high = !high;
                }
                let smooth = 0.5 + 0.45 * (std::f64::consts::TAU * step as f64 / SMOOTH_PERIOD + phase).sin();
                let rapid = if high { RAPID_LEVELS.1 } else { RAPID_LEVELS.0 };
                let mut noise = || 0.05 * rng.sample::<f64, _>(StandardNormal);
                let a = (0.8 * smooth + 0.1 + noise()).clamp(0.0, 1.0);
                let b = (0.8 * rapid + 0.1 + noise()).clamp(0.0, 1.0);
                let c = (0.5 * smooth + 0.5 * rapid + noise()).clamp(0.0, 1.0);
                out.push(SignalFrame {
                    step,
                    values: vec![smooth, rapid, a, b, c],
                });
            }
            out
        }
    };
    Ok(Signals {
        channels,
        ranges: Vec::new(),
        frames,
    })
}

/// Mean |x_{t+1} - x_t|.
pub fn mean_abs_change(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (x.len() - 1) as f64
}
