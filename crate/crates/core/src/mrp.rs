//! Finite Markov reward processes and their analytic oracles.
//!
//! A process has `k` non-terminal states. Row `s` of the transition matrix
//! holds the probabilities of moving to each state, and `terminal[s]` holds
//! the probability of ending the episode from `s`; together they sum to one.
//! A process with no terminal mass anywhere is continuing.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::WeightVector;
use crate::representation::Representation;

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// A sampled transition. `next == None` means the episode terminated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub next: Option<usize>,
    pub reward: f64,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next.is_none()
    }
}

/// True state values v(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Vec<f64>,
}

/// State weighting for error metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    #[default]
    StateDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MrpDoc", into = "MrpDoc")]
pub struct Mrp {
    k: usize,
    p: Vec<Vec<f64>>,
    terminal: Vec<f64>,
    r_mean: Vec<Vec<f64>>,
    r_terminal: Vec<f64>,
    sigma: f64,
    gamma: f64,
    initial_state: usize,
}

/// On-disk layout of an [`Mrp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrpDoc {
    pub k: usize,
    /// k x k transition probabilities between non-terminal states.
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    /// Probability of terminating from each state.
    pub terminal: Vec<f64>,
    /// Expected reward for each (s, s') pair.
    pub r_mean: Vec<Vec<f64>>,
    /// Expected reward on the terminating transition from each state.
    pub r_terminal: Vec<f64>,
    pub sigma: f64,
    pub gamma: f64,
    pub initial_state: usize,
}

impl TryFrom<MrpDoc> for Mrp {
    type Error = Error;

    fn try_from(d: MrpDoc) -> Result<Self> {
        Mrp::new(d.p, d.terminal, d.r_mean, d.r_terminal, d.sigma, d.gamma, d.initial_state)
    }
}

impl From<Mrp> for MrpDoc {
    fn from(m: Mrp) -> Self {
        MrpDoc {
            k: m.k,
            p: m.p,
            terminal: m.terminal,
            r_mean: m.r_mean,
            r_terminal: m.r_terminal,
            sigma: m.sigma,
            gamma: m.gamma,
            initial_state: m.initial_state,
        }
    }
}

impl Mrp {
    pub fn new(
        p: Vec<Vec<f64>>,
        terminal: Vec<f64>,
        r_mean: Vec<Vec<f64>>,
        r_terminal: Vec<f64>,
        sigma: f64,
        gamma: f64,
        initial_state: usize,
    ) -> Result<Self> {
        let k = p.len();
        if k == 0 {
            return Err(Error::InvalidMrp("no states".into()));
        }
        let bad_shape = terminal.len() != k
            || r_mean.len() != k
            || r_terminal.len() != k
            || p.iter().any(|row| row.len() != k)
            || r_mean.iter().any(|row| row.len() != k);
        if bad_shape {
            return Err(Error::InvalidMrp(format!("inconsistent shapes for k = {k}")));
        }
        for s in 0..k {
            let row = p[s].iter().chain(std::iter::once(&terminal[s]));
            let mut sum = 0.0;
            for &x in row {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidMrp(format!(
                        "row {s} has probability {x} outside [0, 1]"
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidMrp(format!("row {s} sums to {sum}")));
            }
        }
        let finite = r_mean.iter().flatten().chain(&r_terminal).all(|r| r.is_finite());
        if !finite {
            return Err(Error::InvalidMrp("non-finite expected reward".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidMrp(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidMrp(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if initial_state >= k {
            return Err(Error::StateOutOfRange { state: initial_state, k });
        }
        let mrp = Self {
            k,
            p,
            terminal,
            r_mean,
            r_terminal,
            sigma,
            gamma,
            initial_state,
        };
        if mrp.is_episodic() {
            let reach = mrp.can_reach_terminal();
            if let Some(s) = reach.iter().position(|&r| !r) {
                return Err(Error::InvalidMrp(format!("state {s} cannot reach a terminal")));
            }
        }
        Ok(mrp)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn is_episodic(&self) -> bool {
        self.terminal.iter().any(|&t| t > 0.0)
    }

    pub fn transition_prob(&self, s: usize, next: usize) -> f64 {
        self.p[s][next]
    }

    pub fn terminal_prob(&self, s: usize) -> f64 {
        self.terminal[s]
    }

    pub fn reward_mean(&self, s: usize, next: Option<usize>) -> f64 {
        match next {
            Some(n) => self.r_mean[s][n],
            None => self.r_terminal[s],
        }
    }

    /// Expected one-step reward from `s`.
    pub fn expected_reward(&self, s: usize) -> f64 {
        let inner: f64 = self.p[s].iter().zip(&self.r_mean[s]).map(|(p, r)| p * r).sum();
        inner + self.terminal[s] * self.r_terminal[s]
    }

    fn can_reach_terminal(&self) -> Vec<bool> {
        let mut reach: Vec<bool> = self.terminal.iter().map(|&t| t > 0.0).collect();
        let mut queue: VecDeque<usize> = (0..self.k).filter(|&s| reach[s]).collect();
        while let Some(j) = queue.pop_front() {
            for s in 0..self.k {
                if !reach[s] && self.p[s][j] > 0.0 {
                    reach[s] = true;
                    queue.push_back(s);
                }
            }
        }
        reach
    }

    /// True iff the transition graph among non-terminal states is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let walk = |forward: bool| {
            let mut seen = vec![false; self.k];
            seen[0] = true;
            let mut queue = VecDeque::from([0usize]);
            while let Some(s) = queue.pop_front() {
                for t in 0..self.k {
                    let edge = if forward { self.p[s][t] } else { self.p[t][s] };
                    if edge > 0.0 && !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
            seen.into_iter().all(|x| x)
        };
        walk(true) && walk(false)
    }

    /// Draws the next state and reward from state `s`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<Transition> {
        if s >= self.k {
            return Err(Error::StateOutOfRange { state: s, k: self.k });
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = None;
        let mut last_positive = None;
        for (j, &pj) in self.p[s].iter().enumerate() {
            if pj > 0.0 {
                last_positive = Some(j);
                acc += pj;
                if u < acc {
                    next = Some(j);
                    break;
                }
            }
        }
        if next.is_none() && self.terminal[s] <= 0.0 {
            // u fell into the rounding gap at the top of the row.
            next = last_positive;
        }
        let mut reward = self.reward_mean(s, next);
        if self.sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            reward += self.sigma * z;
        }
        Ok(Transition { s, next, reward })
    }

    /// Solves v = r + gamma P v, with zero value after termination.
    pub fn true_values(&self) -> Result<ValueTable> {
        if !self.is_episodic() && self.gamma >= 1.0 {
            return Err(Error::Singular(
                "continuing process with gamma = 1 has no finite discounted values".into(),
            ));
        }
        let k = self.k;
        let a = DMatrix::from_fn(k, k, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.gamma * self.p[i][j]
        });
        let b = DVector::from_fn(k, |i, _| self.expected_reward(i));
        let v = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("value system".into()))?;
        let residual = (&a * &v - &b).amax();
        let scale = 1.0f64.max(v.amax());
        if !(residual <= RESIDUAL_TOLERANCE * scale) {
            return Err(Error::Singular(format!("value residual {residual:e}")));
        }
        Ok(ValueTable { v: v.iter().copied().collect() })
    }

    /// On-policy state weighting.
    ///
    /// Continuing processes get the stationary distribution; episodic ones
    /// get normalised expected visit counts per episode, counting the
    /// initial state once per episode.
    pub fn state_distribution(&self) -> Result<Vec<f64>> {
        let k = self.k;
        let d = if self.is_episodic() {
            // (I - P^T) eta = e_init
            let a = DMatrix::from_fn(k, k, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                id - self.p[j][i]
            });
            let b = DVector::from_fn(k, |i, _| if i == self.initial_state { 1.0 } else { 0.0 });
            let eta = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Singular("visit-count system".into()))?;
            let total = eta.sum();
            eta.iter().map(|x| (x / total).max(0.0)).collect::<Vec<_>>()
        } else {
            // (I - P^T) d = 0 with the last equation replaced by sum(d) = 1.
            let mut a = DMatrix::from_fn(k, k, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                id - self.p[j][i]
            });
            for j in 0..k {
                a[(k - 1, j)] = 1.0;
            }
            let mut b = DVector::zeros(k);
            b[k - 1] = 1.0;
            let d = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Singular("stationary distribution system".into()))?;
            d.iter().map(|x| x.max(0.0)).collect::<Vec<_>>()
        };
        let residual = self.distribution_residual(&d);
        if !(residual <= RESIDUAL_TOLERANCE) || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular(format!(
                "state distribution did not converge (residual {residual:e})"
            )));
        }
        Ok(d)
    }

    /// Max-norm of d^T P_restart - d^T, where terminal mass restarts at the initial state.
    pub fn distribution_residual(&self, d: &[f64]) -> f64 {
        let k = self.k;
        let mut next = vec![0.0; k];
        for s in 0..k {
            for j in 0..k {
                next[j] += d[s] * self.p[s][j];
            }
            next[self.initial_state] += d[s] * self.terminal[s];
        }
        next.iter().zip(d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Weighted least-squares weights under the on-policy state distribution.
    pub fn lms_solution(&self, rep: &Representation) -> Result<WeightVector> {
        let d = self.state_distribution()?;
        let v = self.true_values()?;
        lms_solution_weighted(rep, &d, &v.v)
    }

    pub fn weights(&self, weighting: Weighting) -> Result<Vec<f64>> {
        match weighting {
            Weighting::Uniform => Ok(vec![1.0 / self.k as f64; self.k]),
            Weighting::StateDistribution => self.state_distribution(),
        }
    }
}

/// theta* minimising sum_s d(s) (theta . phi(s) - v(s))^2.
///
/// Solves the normal equations with an SVD pseudo-inverse, so rank-deficient
/// feature matrices are handled.
pub fn lms_solution_weighted(rep: &Representation, d: &[f64], v: &[f64]) -> Result<WeightVector> {
    let k = rep.k();
    if d.len() != k || v.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: d.len().min(v.len()),
        });
    }
    let n = rep.n();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..k {
        let row = rep.row(s);
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            b[i] += d[s] * row[i] * v[s];
            for j in 0..n {
                a[(i, j)] += d[s] * row[i] * row[j];
            }
        }
    }
    let svd = a.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let theta = svd
        .solve(&b, eps)
        .map_err(|e| Error::Singular(format!("normal equations: {e}")))?;
    Ok(theta.iter().copied().collect::<Vec<_>>().into())
}

/// sqrt(sum_s w(s) (theta . phi(s) - v(s))^2).
pub fn rms_error(
    theta: &WeightVector,
    mrp: &Mrp,
    rep: &Representation,
    weighting: Weighting,
) -> Result<f64> {
    let v = mrp.true_values()?;
    let w = mrp.weights(weighting)?;
    weighted_rms(theta.as_slice(), rep, &w, &v.v)
}

pub fn weighted_rms(theta: &[f64], rep: &Representation, w: &[f64], target: &[f64]) -> Result<f64> {
    if theta.len() != rep.n() {
        return Err(Error::DimensionMismatch {
            expected: rep.n(),
            found: theta.len(),
        });
    }
    let mut total = 0.0;
    for s in 0..rep.k() {
        let pred: f64 = rep.row(s).iter().zip(theta).map(|(a, b)| a * b).sum();
        let e = pred - target[s];
        total += w[s] * e * e;
    }
    Ok(total.sqrt())
}
