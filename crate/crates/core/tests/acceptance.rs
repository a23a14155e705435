//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use resonance_lab::action::{energy_profile, quasi_potential, well_depth, ActionOptions};
use resonance_lab::chain::{first_transition_density_over, window_measure, ChainSpec, ChainWindowSource, NODES_PER_PERIOD};
use resonance_lab::landscape::Basin;
use resonance_lab::resonance::{
    find_resonance_point, fit_rate, predicted_rate, resonance_interval, transition_times, transition_times_from,
    DiffusionWindowSource,
};
use resonance_lab::sde::{estimate_escape_probability, SimConfig};

use common::{benchmark, props, sinusoid};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, u64);
type Property = (&'static str, fn(u32) -> props::Outcome, u32);

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn energy_oracle() -> Check {
    let field = benchmark(1);
    let opts = ActionOptions::default();
    let mut worst: f64 = 0.0;
    for basin in Basin::BOTH {
        let profile = energy_profile(&field, basin, 16, &opts).map_err(|e| e.to_string())?;
        if !profile.all_ok() {
            return Err(format!("{basin:?} profile has unconverged entries"));
        }
        for j in 0..16 {
            let twice = 2.0 * well_depth(&field, profile.phase(j), basin).map_err(|e| e.to_string())?;
            worst = worst.max((profile.values()[j] - twice).abs() / twice);
        }
    }
    verdict(worst <= 0.03, format!("max relative error {worst:.3e} (limit 3e-2)"))
}

fn axis_reduction() -> Check {
    let opts = ActionOptions::default();
    let v1 = quasi_potential(&benchmark(1), 0.0, &[-1.0], &[0.0], &opts).map_err(|e| e.to_string())?;
    let v2 = quasi_potential(&benchmark(2), 0.0, &[-1.0, 0.0], &[0.0, 0.0], &opts).map_err(|e| e.to_string())?;
    let rel = (v2.value - v1.value).abs() / v1.value;
    verdict(rel <= 0.03, format!("d=1 {:.6}, d=2 {:.6}, relative gap {rel:.2e}", v1.value, v2.value))
}

fn transition_time_analytics() -> Check {
    let (pm, _) = sinusoid(64);
    let step = 1.0 / 64.0;
    let mut worst: f64 = 0.0;
    for mu in [0.75, 0.9, 1.0 - 1e-9] {
        let a = transition_times(&pm, mu).map_err(|e| e.to_string())?.a;
        let exact = (2.0 * (mu - 1.0)).acos() / (2.0 * PI);
        worst = worst.max((a - exact).abs());
    }
    verdict(worst <= step, format!("max |a - exact| {worst:.2e} (grid step {step:.2e})"))
}

fn interval() -> Check {
    let (pm, pp) = sinusoid(64);
    let (lo, hi) = resonance_interval(&pm, &pp)
        .map_err(|e| e.to_string())?
        .bounds()
        .map_err(|e| e.to_string())?;
    // one phase step moves the profile by at most amplitude * 2 pi / M
    let tol = 0.5 * 2.0 * PI / 64.0;
    verdict(
        (lo - 0.5).abs() <= tol && (hi - 1.0).abs() <= tol,
        format!("I_R = ({lo:.6}, {hi:.6}), tolerance {tol:.3e}"),
    )
}

fn resonance_closed_form() -> Check {
    let (pm, pp) = sinusoid(256);
    let report = find_resonance_point(&pm, &pp, &[0.2, 0.1, 0.05]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in &report.points {
        let exact = 1.0 - 0.5 * (PI * p.h).sin();
        worst = worst.max((p.mu - exact).abs() / exact);
    }
    verdict(
        worst <= 0.01 && report.extrapolated_boundary,
        format!(
            "max relative error {worst:.2e}, extrapolated {:.4} boundary={}",
            report.extrapolated, report.extrapolated_boundary
        ),
    )
}

fn chain_mass_identity() -> Check {
    let (pm, pp) = sinusoid(256);
    let mut worst: f64 = 0.0;
    for (eps, mu, h) in [(0.25, 0.9, 0.1), (0.2, 0.8, 0.05), (0.3, 0.95, 0.15)] {
        let spec = ChainSpec::new(pm.clone(), pp.clone(), 0.5, eps, mu).map_err(|e| e.to_string())?;
        for state in Basin::BOTH {
            let start = spec.start_phase(state);
            let a = transition_times_from(spec.profile(state), mu, start).map_err(|e| e.to_string())?.a;
            for periods in [a + h - start, 3.0] {
                let d = first_transition_density_over(&spec, state, periods, NODES_PER_PERIOD)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(d.mass_defect());
            }
        }
    }
    verdict(worst <= 1e-8, format!("max |mass - (1 - exp(-H))| {worst:.2e} over 3 specs"))
}

fn chain_rate() -> Check {
    let (pm, pp) = sinusoid(256);
    let spec = ChainSpec::new(pm.clone(), pp.clone(), 0.5, 0.25, 0.9).map_err(|e| e.to_string())?;
    let predicted = predicted_rate(&pm, &pp, 0.9, 0.1).map_err(|e| e.to_string())?;
    let fit = fit_rate(&ChainWindowSource { spec: &spec, h: 0.1 }, &[0.25, 0.2, 0.15, 0.12], predicted)
        .map_err(|e| e.to_string())?;
    let n: Vec<String> = fit.points.iter().map(|p| format!("{:.4}", p.value)).collect();
    verdict(
        fit.relative_error <= 0.15,
        format!(
            "slope {:.4} vs predicted {predicted:.4}, relative error {:.3}; N = [{}]",
            fit.slope,
            fit.relative_error,
            n.join(", ")
        ),
    )
}

fn diffusion_config(epsilon: f64) -> SimConfig {
    SimConfig {
        epsilon,
        mu: 0.9,
        dt: 1e-3,
        horizon: (0.9 / epsilon).exp(),
        abort_radius: 6.0,
        master_seed: 2024,
        path_count: 2000,
    }
}

fn diffusion_vs_chain() -> Check {
    let field = benchmark(1);
    let (pm, pp) = sinusoid(256);
    let source = DiffusionWindowSource {
        field: &field,
        config: diffusion_config(0.25),
        p_minus: &pm,
        p_plus: &pp,
        h: 0.1,
        rho: 0.2,
        horizon_from_window: true,
    };
    let est = source.estimate(0.25).map_err(|e| e.to_string())?;
    let spec = ChainSpec::new(pm.clone(), pp.clone(), 0.5, 0.25, 0.9).map_err(|e| e.to_string())?;
    let n = window_measure(&spec, 0.1).map_err(|e| e.to_string())?.measure;
    let gap = (est.m_hat - n).abs();
    verdict(
        gap <= 4.0 * est.std_error,
        format!("M_hat {:.4} +- {:.4}, N {n:.4}, gap {:.1} standard errors", est.m_hat, est.std_error, gap / est.std_error),
    )
}

fn diffusion_rate() -> Check {
    let field = benchmark(1);
    let (pm, pp) = sinusoid(256);
    let source = DiffusionWindowSource {
        field: &field,
        config: diffusion_config(0.3),
        p_minus: &pm,
        p_plus: &pp,
        h: 0.1,
        rho: 0.2,
        horizon_from_window: true,
    };
    let predicted = predicted_rate(&pm, &pp, 0.9, 0.1).map_err(|e| e.to_string())?;
    let fit = fit_rate(&source, &[0.3, 0.25, 0.2], predicted).map_err(|e| e.to_string())?;
    let m: Vec<String> = fit.points.iter().map(|p| format!("{:.4}", p.value)).collect();
    verdict(
        fit.relative_error <= 0.25,
        format!(
            "slope {:.4} vs predicted {predicted:.4}, relative error {:.3}; M_hat = [{}]",
            fit.slope,
            fit.relative_error,
            m.join(", ")
        ),
    )
}

fn boundedness() -> Check {
    let field = benchmark(1);
    let cfg = SimConfig {
        epsilon: 0.3,
        mu: 0.9,
        dt: 1e-3,
        horizon: 100.0,
        abort_radius: 6.0,
        master_seed: 77,
        path_count: 1000,
    };
    let mut p = Vec::new();
    for r in [3.0, 4.0, 5.0] {
        p.push(estimate_escape_probability(&field, &cfg, &[-1.0], r, 100.0).map_err(|e| e.to_string())?.estimate);
    }
    verdict(
        p[0] >= p[1] && p[1] >= p[2] && p[2] == 0.0,
        format!("escape fractions R=3,4,5: {p:?}"),
    )
}

fn property_suite() -> Check {
    let suite: [Property; 5] = [
        ("nonnegativity", props::action_nonnegative, 64),
        ("triangle", props::triangle_inequality, 24),
        ("lipschitz", props::lipschitz_bound, 12),
        ("nesting", props::window_nesting, 8),
        ("reproducibility", props::worker_reproducibility, 8),
    ];
    let mut failed = Vec::new();
    for (name, check, cases) in suite {
        if let Err(e) = check(cases) {
            failed.push(format!("{name}: {e}"));
        }
    }
    verdict(failed.is_empty(), if failed.is_empty() { "5 properties".into() } else { failed.join("; ") })
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("energy profile equals twice the well depth", energy_oracle, 300),
        ("d=2 reduces to the axis", axis_reduction, 120),
        ("transition times of the sinusoid", transition_time_analytics, 5),
        ("resonance interval", interval, 5),
        ("resonance point closed form", resonance_closed_form, 5),
        ("chain mass identity", chain_mass_identity, 5),
        ("chain rate asymptotics", chain_rate, 60),
        ("diffusion window vs chain", diffusion_vs_chain, 1800),
        ("diffusion rate slope", diffusion_rate, 3600),
        ("boundedness", boundedness, 300),
        ("property suite", property_suite, 300),
    ];
    let mut failures = 0;
    for (k, (name, check, budget)) in criteria.into_iter().enumerate() {
        let clock = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = clock.elapsed();
        let outcome = match outcome {
            Ok(d) if took > Duration::from_secs(budget) => Err(format!("{d}; over the {budget} s budget")),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {name}: {detail} [{:.1} s]", k + 1, took.as_secs_f64());
    }
    println!("acceptance: {} passed, {failures} failed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
