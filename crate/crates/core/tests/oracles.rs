use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdkit::experiments::sweep::sample_trajectory;
use tdkit::suite::{make_random_mrp, make_two_state, RandomMrpSpec};
use tdkit::{lms_solution_weighted, Mrp, Representation};

fn random_mrp(k: usize, b: usize, sigma: f64, gamma: f64, seed: u64) -> Mrp {
    make_random_mrp(&RandomMrpSpec {
        gamma,
        ..RandomMrpSpec::new(k, b, sigma, seed)
    })
    .unwrap()
    .mrp
}

/// Mean and standard error of truncated discounted returns from `s`.
fn monte_carlo(mrp: &Mrp, s: usize, rollouts: usize, horizon: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..rollouts {
        let (mut g, mut disc, mut cur) = (0.0, 1.0, s);
        for _ in 0..horizon {
            let t = mrp.sample_transition(cur, rng).unwrap();
            g += disc * t.reward;
            disc *= mrp.gamma();
            match t.next {
                Some(n) => cur = n,
                None => break,
            }
        }
        sum += g;
        sq += g * g;
    }
    let mean = sum / rollouts as f64;
    let var = (sq / rollouts as f64 - mean * mean).max(0.0);
    (mean, (var / rollouts as f64).sqrt())
}

#[test]
fn true_values_agree_with_rollouts() {
    let mrp = random_mrp(10, 3, 0.1, 0.9, 5);
    let v = mrp.true_values().unwrap().v;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for s in 0..10 {
        let (mean, se) = monte_carlo(&mrp, s, 20_000, 320, &mut rng);
        assert!((mean - v[s]).abs() <= 3.0 * se, "state {s}: {mean} vs {} (se {se})", v[s]);
    }
}

#[test]
fn episodic_values_agree_with_rollouts() {
    let (mrp, _) = make_two_state(0.5).unwrap();
    let v = mrp.true_values().unwrap().v;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in 0..2 {
        let (mean, se) = monte_carlo(&mrp, s, 20_000, 100, &mut rng);
        assert!((mean - v[s]).abs() <= 3.0 * se.max(1e-12), "{mean} vs {}", v[s]);
    }
}

#[test]
fn bellman_residual_is_tiny() {
    for seed in 0..5 {
        let mrp = random_mrp(100, 10, 0.1, 0.99, seed);
        let v = mrp.true_values().unwrap().v;
        for s in 0..100 {
            let next: f64 = (0..100).map(|j| mrp.transition_prob(s, j) * v[j]).sum();
            let r = mrp.expected_reward(s) + mrp.gamma() * next - v[s];
            assert!(r.abs() < 1e-9, "{r}");
        }
    }
}

/// Conjugate gradients on the weighted normal equations.
fn cg_lms(rep: &Representation, d: &[f64], v: &[f64]) -> Vec<f64> {
    let n = rep.n();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..rep.k() {
        let row = rep.row(s);
        for i in 0..n {
            b[i] += d[s] * row[i] * v[s];
            for j in 0..n {
                a[i][j] += d[s] * row[i] * row[j];
            }
        }
    }
    let matvec = |x: &[f64]| -> Vec<f64> { a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect() };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..10 * n {
        if rr < 1e-30 {
            break;
        }
        let ap = matvec(&p);
        let step = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let next = dot(&r, &r);
        for i in 0..n {
            p[i] = r[i] + next / rr * p[i];
        }
        rr = next;
    }
    x
}

#[test]
fn lms_matches_conjugate_gradients() {
    let mrp = random_mrp(100, 3, 0.0, 0.99, 8);
    let d = mrp.state_distribution().unwrap();
    let v = mrp.true_values().unwrap().v;
    let reps = [
        Representation::tabular(100).unwrap(),
        Representation::binary(100).unwrap(),
        Representation::normal(100, &mut ChaCha8Rng::seed_from_u64(4)).unwrap(),
    ];
    for rep in &reps {
        let ours = lms_solution_weighted(rep, &d, &v).unwrap();
        let cg = cg_lms(rep, &d, &v);
        for (x, y) in ours.as_slice().iter().zip(&cg) {
            assert!((x - y).abs() < 1e-6 * (1.0 + y.abs()), "{:?}: {x} vs {y}", rep.kind());
        }
    }
}

#[test]
fn stationary_distribution_is_a_fixed_point() {
    for seed in 0..5 {
        let mrp = random_mrp(100, 3, 0.0, 0.99, seed);
        let d = mrp.state_distribution().unwrap();
        assert!(mrp.distribution_residual(&d) <= 1e-10);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn visit_frequencies_match_distribution() {
    let mrp = random_mrp(10, 3, 0.1, 0.99, 2);
    let d = mrp.state_distribution().unwrap();
    let traj = sample_trajectory(&mrp, 1_000_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut counts = [0usize; 10];
    for t in &traj {
        counts[t.s] += 1;
    }
    for s in 0..10 {
        let f = counts[s] as f64 / traj.len() as f64;
        assert!((f - d[s]).abs() < 1e-2, "state {s}: {f} vs {}", d[s]);
    }
}

#[test]
fn successor_frequencies_match_row() {
    let mrp = random_mrp(10, 3, 0.1, 0.99, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        counts[mrp.sample_transition(4, &mut rng).unwrap().next.unwrap()] += 1;
    }
    for j in 0..10 {
        let p = mrp.transition_prob(4, j);
        let f = counts[j] as f64 / draws as f64;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * sd + 1e-12, "{j}: {f} vs {p}");
    }
}

#[test]
fn deterministic_rewards_when_sigma_is_zero() {
    let mrp = random_mrp(100, 3, 0.0, 0.99, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let t = mrp.sample_transition(17, &mut rng).unwrap();
        assert_eq!(t.reward, mrp.reward_mean(17, t.next));
    }
}
