//! Hashed joint tile coding over normalised signal frames.
//!
//! Tiling `t` of `T` shifts every dimension by `t / T` of a bin, so the
//! coordinate of value `x` is `min(floor(x * bins + t / T), bins - 1)`. The
//! coordinates of each tiling are hashed into that tiling's own slice of the
//! index space, and the optional bias unit takes the last index. Indices of a
//! frame therefore never collide.
//!
//! The hash, with all arithmetic wrapping on `u64`:
//!
//! ```text
//! fold(h, x) = rotl((h ^ x) * 0x0000_0100_0000_01B3, 29)
//! h = seed ^ 0x9E37_79B9_7F4A_7C15
//! h = fold(h, t)
//! for c in coords: h = fold(h, c)
//! h = fmix64(h)                       // MurmurHash3 finaliser
//! index = t * partition + h % partition
//! partition = (hash_size - bias) / num_tilings
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileCoderConfig {
    pub num_signals: usize,
    pub bins_per_signal: usize,
    pub num_tilings: usize,
    pub hash_size: usize,
    pub include_bias: bool,
    pub seed: u64,
}

impl TileCoderConfig {
    /// 10 bins, 8 tilings, 200,000 hashed features and a bias unit.
    pub fn new(num_signals: usize) -> Self {
        Self {
            num_signals,
            bins_per_signal: 10,
            num_tilings: 8,
            hash_size: 200_000,
            include_bias: true,
            seed: 0,
        }
    }

    pub fn with_hash_size(mut self, hash_size: usize) -> Self {
        self.hash_size = hash_size;
        self
    }
}

#[inline]
fn fold(h: u64, x: u64) -> u64 {
    (h ^ x).wrapping_mul(0x0000_0100_0000_01B3).rotate_left(29)
}

#[inline]
fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Hash of one tiling's bin coordinates.
pub fn tile_hash(seed: u64, tiling: u64, coords: &[u64]) -> u64 {
    let mut h = fold(seed ^ 0x9E37_79B9_7F4A_7C15, tiling);
    for &c in coords {
        h = fold(h, c);
    }
    fmix64(h)
}

#[derive(Debug, Clone)]
pub struct TileCoder {
    cfg: TileCoderConfig,
    partition: usize,
    tiles_per_tiling: u64,
}

impl TileCoder {
    pub fn new(cfg: TileCoderConfig) -> Result<Self> {
        if cfg.num_signals == 0 || cfg.bins_per_signal == 0 || cfg.num_tilings == 0 {
            return Err(Error::InvalidConfig("tile coder counts must be >= 1".into()));
        }
        let bias = cfg.include_bias as usize;
        if cfg.hash_size < cfg.num_tilings + bias {
            return Err(Error::InvalidConfig(format!(
                "hash_size {} is smaller than num_tilings + bias = {}",
                cfg.hash_size,
                cfg.num_tilings + bias
            )));
        }
        let tiles_per_tiling = (cfg.bins_per_signal as u64)
            .checked_pow(cfg.num_signals as u32)
            .filter(|t| t.checked_mul(cfg.num_tilings as u64 + 1).is_some())
            .ok_or_else(|| Error::InvalidConfig("pre-hash index space overflows u64".into()))?;
        Ok(Self {
            partition: (cfg.hash_size - bias) / cfg.num_tilings,
            tiles_per_tiling,
            cfg,
        })
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.cfg
    }

    /// Feature dimension after hashing.
    pub fn dim(&self) -> usize {
        self.cfg.hash_size
    }

    pub fn active_count(&self) -> usize {
        self.cfg.num_tilings + self.cfg.include_bias as usize
    }

    /// Size of the unhashed feature space: tilings * bins^signals (+ 1 bias).
    pub fn prehash_space(&self) -> u64 {
        self.tiles_per_tiling * self.cfg.num_tilings as u64 + self.cfg.include_bias as u64
    }

    fn check_frame(&self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.cfg.num_signals {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.num_signals,
                found: frame.len(),
            });
        }
        for (channel, &value) in frame.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::SignalOutOfRange { channel, value });
            }
        }
        Ok(())
    }

    fn coords(&self, frame: &[f64], tiling: usize, out: &mut [u64]) {
        let bins = self.cfg.bins_per_signal;
        let offset = tiling as f64 / self.cfg.num_tilings as f64;
        for (c, &x) in out.iter_mut().zip(frame) {
            let raw = (x * bins as f64 + offset).floor() as usize;
            *c = raw.min(bins - 1) as u64;
        }
    }

    /// Unhashed active indices: tiling t lives in [t * bins^d, (t + 1) * bins^d).
    pub fn prehash_indices(&self, frame: &[f64]) -> Result<Vec<u64>> {
        self.check_frame(frame)?;
        let mut coords = vec![0u64; self.cfg.num_signals];
        let bins = self.cfg.bins_per_signal as u64;
        let mut out: Vec<u64> = (0..self.cfg.num_tilings)
            .map(|t| {
                self.coords(frame, t, &mut coords);
                let local = coords.iter().rev().fold(0u64, |acc, &c| acc * bins + c);
                t as u64 * self.tiles_per_tiling + local
            })
            .collect();
        if self.cfg.include_bias {
            out.push(self.tiles_per_tiling * self.cfg.num_tilings as u64);
        }
        Ok(out)
    }

    /// Binary sparse features with exactly `active_count()` ones.
    pub fn encode(&self, frame: &[f64]) -> Result<FeatureVector> {
        self.check_frame(frame)?;
        let mut coords = vec![0u64; self.cfg.num_signals];
        let mut indices = Vec::with_capacity(self.active_count());
        for t in 0..self.cfg.num_tilings {
            self.coords(frame, t, &mut coords);
            let slot = tile_hash(self.cfg.seed, t as u64, &coords) % self.partition as u64;
            indices.push(t * self.partition + slot as usize);
        }
        if self.cfg.include_bias {
            indices.push(self.cfg.hash_size - 1);
        }
        FeatureVector::binary(self.cfg.hash_size, indices)
    }
}

/// Shorthand for `TileCoder::new(cfg)?.encode(frame)`.
pub fn tile_code(cfg: &TileCoderConfig, frame: &[f64]) -> Result<FeatureVector> {
    TileCoder::new(cfg.clone())?.encode(frame)
}
