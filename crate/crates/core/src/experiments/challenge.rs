//! The one-state and two-state example protocols.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::seed::{Purpose, SeedPlan};
use crate::learner::{TdConfig, TdLearner, Variant};
use crate::mrp::{weighted_rms, Mrp, Transition};
use crate::representation::Representation;
use crate::suite::{make_one_state, make_two_state, DEFAULT_CHALLENGE_P};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStateConfig {
    pub p: f64,
    pub alphas: Vec<f64>,
    pub lambda: f64,
    pub episodes: usize,
    pub runs: usize,
    pub methods: Vec<Variant>,
    pub master_seed: u64,
}

impl OneStateConfig {
    /// lambda = 1, 10 episodes, 100 runs, alpha in {0.05, 0.10, ..., 1.00}.
    pub fn new(master_seed: u64) -> Self {
        Self {
            p: DEFAULT_CHALLENGE_P,
            alphas: (1..=20).map(|i| i as f64 * 0.05).collect(),
            lambda: 1.0,
            episodes: 10,
            runs: 100,
            methods: Variant::ALL.to_vec(),
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStateRow {
    pub method: Variant,
    pub alpha: f64,
    /// RMS over runs of the error at the end of each episode.
    pub per_episode_rms: Vec<f64>,
    /// `per_episode_rms` averaged over episodes.
    pub mean_rms: f64,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStateResult {
    pub config: OneStateConfig,
    pub rows: Vec<OneStateRow>,
}

impl OneStateResult {
    pub fn row(&self, method: Variant, alpha: f64) -> Option<&OneStateRow> {
        self.rows.iter().find(|r| r.method == method && r.alpha == alpha)
    }

    /// Row with the lowest mean error for `method`.
    pub fn best(&self, method: Variant) -> Option<&OneStateRow> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .fold(None, |best: Option<&OneStateRow>, r| match best {
                Some(b) if !(r.mean_rms < b.mean_rms) => Some(b),
                _ => Some(r),
            })
    }
}

/// Samples whole episodes from the initial state.
pub fn sample_episodes<R: rand::Rng + ?Sized>(mrp: &Mrp, episodes: usize, rng: &mut R) -> Result<Vec<Vec<Transition>>> {
    if !mrp.is_episodic() {
        return Err(Error::InvalidConfig("episodes need an episodic MRP".into()));
    }
    (0..episodes)
        .map(|_| {
            let mut ep = Vec::new();
            let mut s = mrp.initial_state();
            loop {
                let t = mrp.sample_transition(s, rng)?;
                ep.push(t);
                match t.next {
                    Some(n) => s = n,
                    None => return Ok(ep),
                }
            }
        })
        .collect()
}

fn rms_over_runs(errors: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for e in errors {
        sum += e * e;
        count += 1;
    }
    (sum / count as f64).sqrt()
}

struct Evaluation<'a> {
    rep: &'a Representation,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> Evaluation<'a> {
    fn new(mrp: &Mrp, rep: &'a Representation) -> Result<Self> {
        Ok(Self {
            rep,
            weights: mrp.state_distribution()?,
            values: mrp.true_values()?.v,
        })
    }

    fn rms(&self, learner: &TdLearner) -> f64 {
        if learner.is_diverged() {
            return f64::INFINITY;
        }
        weighted_rms(learner.theta().as_slice(), self.rep, &self.weights, &self.values)
            .unwrap_or(f64::NAN)
    }
}

/// End-of-episode RMS error over the first episodes, for each method and alpha.
pub fn run_challenge_one_state(cfg: &OneStateConfig, exec: Execution) -> Result<OneStateResult> {
    if cfg.runs == 0 || cfg.episodes == 0 || cfg.alphas.is_empty() {
        return Err(Error::InvalidConfig("runs, episodes and alphas must be non-empty".into()));
    }
    let (mrp, rep) = make_one_state(cfg.p)?;
    let eval = Evaluation::new(&mrp, &rep)?;
    let plan = SeedPlan::new(cfg.master_seed);
    let episodes = (0..cfg.runs)
        .map(|run| sample_episodes(&mrp, cfg.episodes, &mut plan.rng(run as u64, Purpose::Trajectory)))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(Variant, f64)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.alphas.iter().map(move |&a| (m, a)))
        .collect();
    let rows = exec
        .map(&cells, |&(method, alpha)| -> Result<OneStateRow> {
            let td = TdConfig::new(method, alpha, cfg.lambda, mrp.gamma());
            let mut errors = vec![vec![0.0; cfg.runs]; cfg.episodes];
            let mut diverged_runs = 0;
            for (run, eps) in episodes.iter().enumerate() {
                let mut learner = TdLearner::new(td.clone(), rep.n())?;
                for (e, episode) in eps.iter().enumerate() {
                    if !learner.is_diverged() {
                        run_episode(&mut learner, &rep, episode)?;
                    }
                    errors[e][run] = eval.rms(&learner);
                }
                diverged_runs += learner.is_diverged() as usize;
            }
            let per_episode_rms: Vec<f64> = errors.iter().map(|e| rms_over_runs(e.iter().copied())).collect();
            let mean_rms = per_episode_rms.iter().sum::<f64>() / cfg.episodes as f64;
            Ok(OneStateRow {
                method,
                alpha,
                per_episode_rms,
                mean_rms,
                diverged_runs,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(OneStateResult {
        config: cfg.clone(),
        rows,
    })
}

fn run_episode(learner: &mut TdLearner, rep: &Representation, episode: &[Transition]) -> Result<()> {
    learner.start_episode();
    for t in episode {
        let phi = rep.features_of(t.s)?;
        let next = match t.next {
            Some(n) => rep.features_of(n)?,
            None => phi,
        };
        learner.step(phi, t.reward, next, t.is_terminal())?;
        if learner.is_diverged() {
            break;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateConfig {
    pub p: f64,
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    pub runs: usize,
    pub methods: Vec<Variant>,
    /// Length of the trailing window checked by the convergence test.
    pub window: usize,
    /// Converged once every error in the trailing window lies within this
    /// fraction of the window minimum.
    pub tolerance: f64,
    pub step_cap: usize,
    pub master_seed: u64,
}

impl TwoStateConfig {
    /// alpha = 0.01, lambda in {0, 0.25, 0.5, 0.75, 1}, 1% over 100 steps, cap 10^6.
    pub fn new(master_seed: u64) -> Self {
        Self {
            p: DEFAULT_CHALLENGE_P,
            alpha: 0.01,
            lambdas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            runs: 20,
            methods: Variant::ALL.to_vec(),
            window: 100,
            tolerance: 0.01,
            step_cap: 1_000_000,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateRow {
    pub method: Variant,
    pub lambda: f64,
    /// RMS over runs of the error at the stopping step.
    pub converged_error: f64,
    pub mean_steps: f64,
    /// Runs that hit the step cap before meeting the convergence test.
    pub unconverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateResult {
    pub config: TwoStateConfig,
    /// RMS error of the least-squares solution.
    pub lms_floor: f64,
    pub rows: Vec<TwoStateRow>,
}

impl TwoStateResult {
    pub fn row(&self, method: Variant, lambda: f64) -> Option<&TwoStateRow> {
        self.rows.iter().find(|r| r.method == method && r.lambda == lambda)
    }
}

struct RunOutcome {
    error: f64,
    steps: usize,
    converged: bool,
}

/// Error after approximate convergence for each method and lambda.
pub fn run_challenge_two_state(cfg: &TwoStateConfig, exec: Execution) -> Result<TwoStateResult> {
    if cfg.runs == 0 || cfg.lambdas.is_empty() || cfg.window == 0 {
        return Err(Error::InvalidConfig("runs, lambdas and window must be non-empty".into()));
    }
    let (mrp, rep) = make_two_state(cfg.p)?;
    let eval = Evaluation::new(&mrp, &rep)?;
    let lms = mrp.lms_solution(&rep)?;
    let lms_floor = weighted_rms(lms.as_slice(), &rep, &eval.weights, &eval.values)?;
    let plan = SeedPlan::new(cfg.master_seed);

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &lambda in &cfg.lambdas {
            for run in 0..cfg.runs {
                cells.push((method, lambda, run));
            }
        }
    }
    let outcomes = exec
        .map(&cells, |&(method, lambda, run)| -> Result<RunOutcome> {
            // Same seed per run, so every (method, lambda) replays the same samples.
            let mut rng = plan.rng(run as u64, Purpose::Trajectory);
            let td = TdConfig::new(method, cfg.alpha, lambda, mrp.gamma());
            let mut learner = TdLearner::new(td, rep.n())?;
            let mut range = WindowRange::new(cfg.window + 1);
            let mut last = f64::NAN;
            let mut s = mrp.initial_state();
            learner.start_episode();
            for step in 1..=cfg.step_cap {
                let t = mrp.sample_transition(s, &mut rng)?;
                let phi = rep.features_of(t.s)?;
                let next = t.next.map_or(Ok(phi), |n| rep.features_of(n))?;
                learner.step(phi, t.reward, next, t.is_terminal())?;
                let err = eval.rms(&learner);
                if !err.is_finite() {
                    return Ok(RunOutcome { error: err, steps: step, converged: false });
                }
                match t.next {
                    Some(n) => s = n,
                    None => {
                        s = mrp.initial_state();
                        learner.start_episode();
                    }
                }
                last = err;
                range.push(step, err);
                if step > cfg.window {
                    let (lo, hi) = range.bounds();
                    if hi - lo < cfg.tolerance * lo {
                        return Ok(RunOutcome { error: err, steps: step, converged: true });
                    }
                }
            }
            Ok(RunOutcome { error: last, steps: cfg.step_cap, converged: false })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let rows = outcomes
        .chunks(cfg.runs)
        .zip(cells.chunks(cfg.runs))
        .map(|(out, cell)| TwoStateRow {
            method: cell[0].0,
            lambda: cell[0].1,
            converged_error: rms_over_runs(out.iter().map(|o| o.error)),
            mean_steps: out.iter().map(|o| o.steps as f64).sum::<f64>() / out.len() as f64,
            unconverged_runs: out.iter().filter(|o| !o.converged).count(),
        })
        .collect();
    Ok(TwoStateResult {
        config: cfg.clone(),
        lms_floor,
        rows,
    })
}

/// Sliding minimum and maximum over the last `len` readings.
struct WindowRange {
    len: usize,
    min: VecDeque<(usize, f64)>,
    max: VecDeque<(usize, f64)>,
}

impl WindowRange {
    fn new(len: usize) -> Self {
        Self {
            len,
            min: VecDeque::new(),
            max: VecDeque::new(),
        }
    }

    fn push(&mut self, step: usize, x: f64) {
        while self.min.back().is_some_and(|&(_, v)| v >= x) {
            self.min.pop_back();
        }
        while self.max.back().is_some_and(|&(_, v)| v <= x) {
            self.max.pop_back();
        }
        self.min.push_back((step, x));
        self.max.push_back((step, x));
        for q in [&mut self.min, &mut self.max] {
            while q.front().is_some_and(|&(i, _)| i + self.len <= step) {
                q.pop_front();
            }
        }
    }

    fn bounds(&self) -> (f64, f64) {
        (self.min[0].1, self.max[0].1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_end_in_termination() {
        let (m, _) = make_one_state(0.5).unwrap();
        let eps = sample_episodes(&m, 50, &mut SeedPlan::new(1).rng(0, Purpose::Trajectory)).unwrap();
        for ep in &eps {
            assert!(ep.last().unwrap().is_terminal());
            assert!(ep[..ep.len() - 1].iter().all(|t| t.next == Some(0)));
            assert_eq!(ep.iter().map(|t| t.reward).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn one_state_true_online_reaches_zero() {
        let cfg = OneStateConfig {
            alphas: vec![1.0],
            runs: 5,
            ..OneStateConfig::new(3)
        };
        let res = run_challenge_one_state(&cfg, Execution::Sequential).unwrap();
        assert_eq!(res.row(Variant::TrueOnline, 1.0).unwrap().mean_rms, 0.0);
        assert_eq!(res.row(Variant::Replace, 1.0).unwrap().mean_rms, 0.0);
    }

    #[test]
    fn lms_floor_matches_closed_form() {
        // theta* = 2/3 with d = (2/3, 1/3) and v = (1/2, 1).
        let cfg = TwoStateConfig {
            runs: 1,
            lambdas: vec![0.0],
            methods: vec![Variant::Replace],
            ..TwoStateConfig::new(1)
        };
        let res = run_challenge_two_state(&cfg, Execution::Sequential).unwrap();
        assert!((res.lms_floor - (1.0f64 / 18.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn window_range_matches_scan() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 23) as f64 - (i as f64).sqrt()).collect();
        let mut w = WindowRange::new(7);
        for (i, &x) in xs.iter().enumerate() {
            w.push(i, x);
            let tail = &xs[i.saturating_sub(6)..=i];
            let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(w.bounds(), (lo, hi));
        }
    }
}
