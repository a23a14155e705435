//! Randomized invariants shared by the property tests and the acceptance run.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rayon::ThreadPoolBuilder;

use resonance_lab::action::{evaluate_action, lipschitz_gamma, minimize_cost, quasi_potential, ActionOptions, PathGrid};
use resonance_lab::resonance::estimate_window_probability;
use resonance_lab::rng::StreamDomain;
use resonance_lab::sde::{simulate_batch, SimConfig, Target};

use super::{benchmark, sinusoid};

pub type Outcome = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Outcome {
    r.map_err(|e| e.to_string())
}

pub fn action_nonnegative(cases: u32) -> Outcome {
    let strategy = (1usize..=2, 0.0..1.0f64, 0.1..5.0f64, prop::collection::vec(-2.0..2.0f64, 2 * 41));
    finish(runner(cases).run(&strategy, |(d, s, horizon, raw)| {
        let field = benchmark(d);
        let nodes = raw[..d * 41].to_vec();
        let path = PathGrid::new(horizon, d, nodes).unwrap();
        let a = evaluate_action(&field, s, &path);
        prop_assert!(a >= 0.0, "action {a}");
        let cost = minimize_cost(&field, s, path.start(), path.end(), horizon, 40).unwrap();
        prop_assert!(cost.value >= -1e-10, "cost {}", cost.value);
        Ok(())
    }))
}

pub fn triangle_inequality(cases: u32) -> Outcome {
    let strategy = (0.0..1.0f64, [-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64], 20usize..80, 20usize..80);
    finish(runner(cases).run(&strategy, |(s, [x, z, y], n1, n2)| {
        let field = benchmark(1);
        let dt = 0.025;
        let (t, u) = (n1 as f64 * dt, n2 as f64 * dt);
        let direct = minimize_cost(&field, s, &[x], &[y], t + u, n1 + n2).unwrap();
        let first = minimize_cost(&field, s, &[x], &[z], t, n1).unwrap();
        let second = minimize_cost(&field, s, &[z], &[y], u, n2).unwrap();
        let bound = first.value + second.value;
        prop_assert!(
            direct.value <= bound + 1e-6 * (1.0 + bound),
            "V(x,y,t+u) = {} > {} + {}",
            direct.value,
            first.value,
            second.value
        );
        Ok(())
    }))
}

pub fn lipschitz_bound(cases: u32) -> Outcome {
    let field = benchmark(2);
    let radius = 2.0;
    let gamma = lipschitz_gamma(&field, radius);
    let strategy = (0.0..1.0f64, [-1.2..1.2f64, -1.2..1.2f64], 0.0..std::f64::consts::TAU, 0.01..0.3f64);
    finish(runner(cases).run(&strategy, |(s, x, angle, dist)| {
        let y = [x[0] + dist * angle.cos(), x[1] + dist * angle.sin()];
        let v = quasi_potential(&field, s, &x, &y, &ActionOptions::default()).unwrap();
        prop_assert!(v.value <= gamma * dist, "V = {} > {gamma} * {dist}", v.value);
        Ok(())
    }))
}

pub fn window_nesting(cases: u32) -> Outcome {
    let field = benchmark(1);
    let (pm, pp) = sinusoid(256);
    let strategy = (0.3..0.4f64, 0.7..0.95f64, 0.02..0.1f64, any::<u64>());
    finish(runner(cases).run(&strategy, |(epsilon, mu, h, seed)| {
        let cfg = SimConfig {
            epsilon,
            mu,
            dt: 1e-3,
            horizon: (mu / epsilon).exp(),
            abort_radius: 6.0,
            master_seed: seed,
            path_count: 100,
        };
        let narrow = estimate_window_probability(&field, &cfg, &pm, &pp, h, 0.2).map_err(fail)?;
        let wide = estimate_window_probability(&field, &cfg, &pm, &pp, 2.0 * h, 0.2).map_err(fail)?;
        for (n, w) in narrow.basins.iter().zip(&wide.basins) {
            let se = (n.std_error.powi(2) + w.std_error.powi(2)).sqrt();
            prop_assert!(w.m_hat >= n.m_hat - 3.0 * se, "{} < {}", w.m_hat, n.m_hat);
            prop_assert!(w.hits >= n.hits);
        }
        Ok(())
    }))
}

pub fn worker_reproducibility(cases: u32) -> Outcome {
    let field = benchmark(1);
    let strategy = (any::<u64>(), 2usize..=4);
    finish(runner(cases).run(&strategy, |(seed, workers)| {
        let cfg = SimConfig {
            epsilon: 0.3,
            mu: 0.9,
            dt: 1e-3,
            horizon: 30.0,
            abort_radius: 6.0,
            master_seed: seed,
            path_count: 24,
        };
        let target = Target {
            center: vec![1.0],
            radius: 0.2,
        };
        let run = |threads: usize| {
            let pool = ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| simulate_batch(&field, &cfg, &[-1.0], 0.0, Some(&target), StreamDomain::Diffusion))
                .unwrap()
        };
        prop_assert_eq!(run(1), run(workers));
        Ok(())
    }))
}

fn fail(e: resonance_lab::Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

