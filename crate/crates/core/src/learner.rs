//! Online linear TD(lambda) learners.
//!
//! One [`TdLearner`] type covers the three trace variants. Each call to
//! [`TdLearner::step`] consumes a transition `(phi, reward, phi_next, terminal)`
//! and updates the weights in place.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{axpy_unchecked, dot_unchecked, FeatureVector, NoOps, OpSink, WeightVector};

/// Any theta or trace entry beyond this magnitude marks the learner as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Accumulate,
    Replace,
    TrueOnline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Accumulate, Variant::Replace, Variant::TrueOnline];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Accumulate => "accumulate",
            Variant::Replace => "replace",
            Variant::TrueOnline => "true_online",
        }
    }

    /// Replacing traces are only defined for binary features.
    pub fn needs_binary_features(self) -> bool {
        self == Variant::Replace
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accumulate" => Ok(Variant::Accumulate),
            "replace" => Ok(Variant::Replace),
            "true_online" | "true-online" => Ok(Variant::TrueOnline),
            other => Err(Error::InvalidConfig(format!("unknown TD variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaInit {
    Fill(f64),
    Weights(WeightVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub variant: Variant,
    pub theta_init: ThetaInit,
}

impl TdConfig {
    /// Config with theta initialised to zero.
    pub fn new(variant: Variant, alpha: f64, lambda: f64, gamma: f64) -> Self {
        Self {
            alpha,
            lambda,
            gamma,
            variant,
            theta_init: ThetaInit::Fill(0.0),
        }
    }

    pub fn with_theta_init(mut self, init: ThetaInit) -> Self {
        self.theta_init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// The TD error delta_t returned by a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdError(pub f64);

impl TdError {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// JSON-friendly dump of a learner's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSnapshot {
    pub variant: Variant,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub trace: Vec<f64>,
    pub v_old: f64,
    pub diverged: bool,
}

/// Weights, eligibility trace and per-episode scalars for one TD variant.
#[derive(Debug, Clone)]
pub struct TdLearner {
    cfg: TdConfig,
    theta: WeightVector,
    trace: Vec<f64>,
    v_old: f64,
    // Trace is known to be all zeros (start of an episode).
    fresh_trace: bool,
    diverged: bool,
    last_delta: f64,
}

impl TdLearner {
    pub fn new(cfg: TdConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::InvalidConfig("feature dimension must be >= 1".into()));
        }
        if let ThetaInit::Weights(w) = &cfg.theta_init {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
        }
        let theta = initial_theta(&cfg.theta_init, n);
        Ok(Self {
            cfg,
            theta,
            trace: vec![0.0; n],
            v_old: 0.0,
            fresh_trace: true,
            diverged: false,
            last_delta: 0.0,
        })
    }

    pub fn config(&self) -> &TdConfig {
        &self.cfg
    }

    pub fn theta(&self) -> &WeightVector {
        &self.theta
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn v_old(&self) -> f64 {
        self.v_old
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Zeroes the trace and v_old; theta is kept.
    pub fn start_episode(&mut self) {
        if !self.fresh_trace {
            self.trace.iter_mut().for_each(|e| *e = 0.0);
        }
        self.v_old = 0.0;
        self.fresh_trace = true;
    }

    /// Restores theta_init and clears the divergence flag.
    pub fn reset(&mut self) {
        self.theta = initial_theta(&self.cfg.theta_init, self.theta.len());
        self.trace.iter_mut().for_each(|e| *e = 0.0);
        self.v_old = 0.0;
        self.fresh_trace = true;
        self.diverged = false;
        self.last_delta = 0.0;
    }

    pub fn predict(&self, phi: &FeatureVector) -> Result<f64> {
        self.check_dim(phi)?;
        Ok(dot_unchecked(self.theta.as_slice(), phi, &mut NoOps))
    }

    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            variant: self.cfg.variant,
            alpha: self.cfg.alpha,
            lambda: self.cfg.lambda,
            gamma: self.cfg.gamma,
            theta: self.theta.as_slice().to_vec(),
            trace: self.trace.clone(),
            v_old: self.v_old,
            diverged: self.diverged,
        }
    }

    /// One learning step. On a terminal transition `phi_next` is ignored and
    /// its value is taken as 0.
    pub fn step(
        &mut self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
    ) -> Result<TdError> {
        self.step_counted(phi, reward, phi_next, terminal, &mut NoOps)
    }

    /// [`step`](Self::step) with operation accounting.
    pub fn step_counted<O: OpSink>(
        &mut self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
        ops: &mut O,
    ) -> Result<TdError> {
        if self.diverged {
            return Err(Error::Diverged);
        }
        self.check_dim(phi)?;
        if !terminal {
            self.check_dim(phi_next)?;
        }
        if !reward.is_finite() {
            return Err(Error::NonFiniteScalar(reward));
        }
        match self.cfg.variant {
            Variant::Accumulate => self.step_accumulate(phi, reward, phi_next, terminal, ops),
            Variant::Replace => self.step_replace(phi, reward, phi_next, terminal, ops),
            Variant::TrueOnline => self.step_true_online(phi, reward, phi_next, terminal, ops),
        }
    }

    fn check_dim(&self, phi: &FeatureVector) -> Result<()> {
        if phi.dim() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: phi.dim(),
            });
        }
        Ok(())
    }

    /// Returns (v, v_next, delta).
    #[inline]
    fn td_error<O: OpSink>(
        &self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
        ops: &mut O,
    ) -> (f64, f64, f64) {
        let theta = self.theta.as_slice();
        let v = dot_unchecked(theta, phi, ops);
        let v_next = if terminal {
            0.0
        } else {
            dot_unchecked(theta, phi_next, ops)
        };
        ops.mul(1);
        ops.add(2);
        (v, v_next, reward + self.cfg.gamma * v_next - v)
    }

    #[inline]
    fn decay_trace<O: OpSink>(&mut self, decay: f64, ops: &mut O) {
        ops.mul(self.trace.len() as u64);
        for e in self.trace.iter_mut() {
            *e *= decay;
        }
    }

    /// theta += scale * trace, flagging divergence on the way.
    #[inline]
    fn apply_trace_update<O: OpSink>(&mut self, scale: f64, ops: &mut O) -> bool {
        let n = self.trace.len() as u64;
        ops.mul(n);
        ops.add(n);
        let mut ok = true;
        for (t, &e) in self.theta.as_mut_slice().iter_mut().zip(&self.trace) {
            *t += scale * e;
            ok &= t.abs() <= DIVERGENCE_BOUND && e.abs() <= DIVERGENCE_BOUND;
        }
        ok
    }

    fn finish(&mut self, delta: f64, ok: bool) -> TdError {
        self.fresh_trace = false;
        if ok && delta.is_finite() {
            self.last_delta = delta;
            TdError(delta)
        } else {
            self.diverged = true;
            if delta.is_finite() {
                self.last_delta = delta;
            }
            TdError(self.last_delta)
        }
    }

    fn step_accumulate<O: OpSink>(
        &mut self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
        ops: &mut O,
    ) -> Result<TdError> {
        let (_, _, delta) = self.td_error(phi, reward, phi_next, terminal, ops);
        if !delta.is_finite() {
            return Ok(self.finish(delta, false));
        }
        let decay = self.cfg.gamma * self.cfg.lambda;
        ops.mul(1);
        self.decay_trace(decay, ops);
        ops.add(phi.active_count() as u64);
        let trace = &mut self.trace;
        phi.for_each(|i, x| trace[i] += x);
        let scale = self.cfg.alpha * delta;
        ops.mul(1);
        let ok = self.apply_trace_update(scale, ops);
        Ok(self.finish(delta, ok))
    }

    fn step_replace<O: OpSink>(
        &mut self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
        ops: &mut O,
    ) -> Result<TdError> {
        if !phi.is_binary() {
            let (index, value) = phi.first_non_binary().unwrap_or((0, f64::NAN));
            return Err(Error::NonBinaryFeature { index, value });
        }
        let (_, _, delta) = self.td_error(phi, reward, phi_next, terminal, ops);
        if !delta.is_finite() {
            return Ok(self.finish(delta, false));
        }
        let decay = self.cfg.gamma * self.cfg.lambda;
        ops.mul(1);
        self.decay_trace(decay, ops);
        let trace = &mut self.trace;
        phi.for_each(|i, x| {
            if x == 1.0 {
                trace[i] = 1.0;
            }
        });
        let scale = self.cfg.alpha * delta;
        ops.mul(1);
        let ok = self.apply_trace_update(scale, ops);
        Ok(self.finish(delta, ok))
    }

    fn step_true_online<O: OpSink>(
        &mut self,
        phi: &FeatureVector,
        reward: f64,
        phi_next: &FeatureVector,
        terminal: bool,
        ops: &mut O,
    ) -> Result<TdError> {
        let (v, v_next, delta) = self.td_error(phi, reward, phi_next, terminal, ops);
        if !delta.is_finite() {
            return Ok(self.finish(delta, false));
        }
        let alpha = self.cfg.alpha;
        let decay = self.cfg.gamma * self.cfg.lambda;
        ops.mul(1);

        let ok = if self.fresh_trace || decay == 0.0 {
            // The previous trace contributes nothing, so e = phi exactly and
            // the delta-correction vanishes: this is a plain TD(0) step.
            self.decay_trace(decay, ops);
            ops.add(phi.active_count() as u64);
            let trace = &mut self.trace;
            phi.for_each(|i, x| trace[i] += x);
            let scale = alpha * delta;
            ops.mul(1);
            self.apply_trace_update(scale, ops)
        } else {
            // e <- gl e + phi - a gl (e.phi) phi, using the pre-decay trace.
            let e_phi = dot_unchecked(&self.trace, phi, ops);
            let dutch = alpha * decay * e_phi;
            ops.mul(2);
            self.decay_trace(decay, ops);
            let m = phi.active_count() as u64;
            ops.add(2 * m);
            ops.mul(m);
            let trace = &mut self.trace;
            phi.for_each(|i, x| trace[i] = trace[i] + x - dutch * x);

            // theta <- theta + a (delta + v - v_old) e - a (v - v_old) phi
            let dv = v - self.v_old;
            let scale_e = alpha * (delta + dv);
            let scale_phi = alpha * dv;
            ops.add(2);
            ops.mul(2);
            let ok = self.apply_trace_update(scale_e, ops);
            axpy_unchecked(self.theta.as_mut_slice(), -scale_phi, phi, ops);
            let theta = self.theta.as_slice();
            let mut ok_phi = true;
            phi.for_each(|i, _| ok_phi &= theta[i].abs() <= DIVERGENCE_BOUND);
            ok && ok_phi && scale_e.is_finite()
        };
        self.v_old = v_next;
        Ok(self.finish(delta, ok))
    }
}

fn initial_theta(init: &ThetaInit, n: usize) -> WeightVector {
    match init {
        ThetaInit::Fill(v) => WeightVector::filled(n, *v),
        ThetaInit::Weights(w) => w.clone(),
    }
}
