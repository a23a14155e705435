//! Two-state jump chain with periodic rates.
//!
//! State `i` is left at natural time `t` with rate `exp(-e_i(t / T) / eps)`,
//! `T = exp(mu / eps)`. A chain started in state `i` at phase `start_i`
//! jumps for the first time after an elapsed time with density
//!
//! ```text
//! p(u) = r(u) exp(-H(u)),    H(u) = int_0^u r(v) dv
//! ```
//!
//! which is tabulated on a uniform grid. Window measures are differences of
//! `exp(-H)`; the tabulated density integrates back to `1 - exp(-H)` up to
//! quadrature error, which is what [`TransitionDensity::mass_defect`] reports.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::landscape::Basin;
use crate::profile::EnergyProfile;
use crate::resonance::{
    by_basin, default_start_phase, fit_rate, predicted_rate, transition_times_from, WindowPoint,
    WindowProbabilitySource,
};
use crate::rng::{path_rng, stream_id, StreamDomain};

/// Grid nodes per period used by default for densities and window measures.
pub const NODES_PER_PERIOD: usize = 100_000;
/// Coarsest admissible grid: `T / MIN_NODES_PER_PERIOD`.
pub const MIN_NODES_PER_PERIOD: usize = 10_000;
/// Relative tolerance of the phase-lock check.
pub const PHASE_LOCK_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSpec {
    pub p_minus: EnergyProfile,
    pub p_plus: EnergyProfile,
    pub phase_lag: f64,
    pub epsilon: f64,
    pub mu: f64,
}

impl ChainSpec {
    /// Checks that `e_-(t) = e_+(t + phase_lag)` on the grid.
    pub fn new(p_minus: EnergyProfile, p_plus: EnergyProfile, phase_lag: f64, epsilon: f64, mu: f64) -> Result<Self> {
        if p_minus.len() != p_plus.len() {
            return Err(Error::GridMismatch(p_minus.len(), p_plus.len()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", "must be positive"));
        }
        let spec = ChainSpec {
            p_minus,
            p_plus,
            phase_lag,
            epsilon,
            mu,
        };
        let scale = spec.p_minus.max().0;
        let defect = spec.phase_lock_defect();
        if defect > PHASE_LOCK_TOL * scale {
            return Err(Error::AssumptionViolated(format!(
                "profiles are not phase locked with lag {phase_lag}: defect {defect}"
            )));
        }
        Ok(spec)
    }

    pub fn phase_lock_defect(&self) -> f64 {
        (0..self.p_minus.len())
            .map(|j| {
                let s = self.p_minus.phase(j);
                (self.p_minus.eval(s) - self.p_plus.eval(s + self.phase_lag)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        Ok(ChainSpec {
            epsilon,
            ..self.clone()
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(invalid("mu", "must be positive"));
        }
        Ok(ChainSpec { mu, ..self.clone() })
    }

    pub fn time_scale(&self) -> f64 {
        (self.mu / self.epsilon).exp()
    }

    pub fn profile(&self, state: Basin) -> &EnergyProfile {
        by_basin(&self.p_minus, &self.p_plus, state)
    }

    /// Phase at which chains in `state` start.
    pub fn start_phase(&self, state: Basin) -> f64 {
        default_start_phase(self.profile(state))
    }

    /// Rate of leaving `state` at absolute natural time `t`.
    pub fn rate(&self, state: Basin, t: f64) -> f64 {
        (-self.profile(state).eval(t / self.time_scale()) / self.epsilon).exp()
    }

    fn phase_rate(&self, state: Basin, phase: f64) -> f64 {
        (-self.profile(state).eval(phase) / self.epsilon).exp()
    }
}

/// First-jump density of a chain started in `state`, on the elapsed-time
/// grid `u_k = k * step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionDensity {
    pub state: Basin,
    pub start_phase: f64,
    pub step: f64,
    pub density: Vec<f64>,
    /// Cumulative rate `H(u_k)`.
    pub hazard: Vec<f64>,
}

impl TransitionDensity {
    pub fn horizon(&self) -> f64 {
        self.step * (self.density.len() - 1) as f64
    }

    /// `1 - exp(-H)` at the end of the grid.
    pub fn hazard_mass(&self) -> f64 {
        -(-self.hazard.last().unwrap()).exp_m1()
    }

    /// Simpson (trapezoid on a trailing odd interval) integral of the density.
    pub fn density_mass(&self) -> f64 {
        simpson(&self.density, self.step)
    }

    pub fn mass_defect(&self) -> f64 {
        (self.density_mass() - self.hazard_mass()).abs()
    }

    /// Cumulative distribution `1 - exp(-H(u_k))` on the grid.
    pub fn cumulative(&self) -> Vec<f64> {
        self.hazard.iter().map(|h| -(-h).exp_m1()).collect()
    }

    fn hazard_at(&self, u: f64) -> f64 {
        let x = (u / self.step).clamp(0.0, (self.hazard.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.hazard.len() - 2);
        let w = x - k as f64;
        self.hazard[k] + w * (self.hazard[k + 1] - self.hazard[k])
    }

    /// Probability that the first jump happens in `[lo, hi]` (elapsed time).
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (-self.hazard_at(lo)).exp() - (-self.hazard_at(hi)).exp()
    }
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let even = n - n % 2;
    let mut s = 0.0;
    for k in (0..even).step_by(2) {
        s += f[k] + 4.0 * f[k + 1] + f[k + 2];
    }
    s *= h / 3.0;
    if even < n {
        s += 0.5 * h * (f[n - 1] + f[n]);
    }
    s
}

/// Tabulates the cumulative rate from `start_phase` over `phases` periods.
fn hazard_table(spec: &ChainSpec, state: Basin, start_phase: f64, phases: f64, nodes_per_period: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let scale = spec.time_scale();
    let n = (phases * nodes_per_period as f64).ceil() as usize;
    let dphase = phases / n as f64;
    let step = dphase * scale;
    let mut rates = Vec::with_capacity(n + 1);
    let mut hazard = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    let mut prev = spec.phase_rate(state, start_phase);
    rates.push(prev);
    hazard.push(0.0);
    for k in 1..=n {
        let r = spec.phase_rate(state, start_phase + k as f64 * dphase);
        acc += 0.5 * step * (prev + r);
        rates.push(r);
        hazard.push(acc);
        prev = r;
    }
    (step, rates, hazard)
}

/// Density of the first jump out of `state`, truncated after three periods
/// or once the cumulative mass reaches `1 - 1e-6`. The grid has
/// `nodes_per_period` nodes per period; fewer than
/// [`MIN_NODES_PER_PERIOD`] is rejected.
pub fn first_transition_density(spec: &ChainSpec, state: Basin, nodes_per_period: usize) -> Result<TransitionDensity> {
    first_transition_density_over(spec, state, 3.0, nodes_per_period)
}

/// As [`first_transition_density`] over `periods` periods.
pub fn first_transition_density_over(
    spec: &ChainSpec,
    state: Basin,
    periods: f64,
    nodes_per_period: usize,
) -> Result<TransitionDensity> {
    let scale = spec.time_scale();
    if nodes_per_period < MIN_NODES_PER_PERIOD {
        return Err(Error::GridTooCoarse {
            step: scale / nodes_per_period as f64,
            limit: scale / MIN_NODES_PER_PERIOD as f64,
        });
    }
    if !(periods > 0.0) {
        return Err(invalid("periods", "must be positive"));
    }
    let start_phase = spec.start_phase(state);
    let (step, rates, mut hazard) = hazard_table(spec, state, start_phase, periods, nodes_per_period);
    let cut = hazard
        .iter()
        .position(|h| *h >= -(1e-6f64).ln())
        .map(|k| (k + 1).min(hazard.len()))
        .unwrap_or(hazard.len())
        .max(3);
    hazard.truncate(cut);
    let density = rates[..cut]
        .iter()
        .zip(&hazard)
        .map(|(r, h)| r * (-h).exp())
        .collect();
    Ok(TransitionDensity {
        state,
        start_phase,
        step,
        density,
        hazard,
    })
}

/// Window mass for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateWindow {
    pub state: Basin,
    pub start_phase: f64,
    pub a: f64,
    /// Elapsed-time window.
    pub window: (f64, f64),
    pub mass: f64,
    /// `1 - mass`, computed without cancellation.
    pub miss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainWindow {
    pub states: Vec<StateWindow>,
    /// Minimum over states.
    pub measure: f64,
    pub miss: f64,
}

/// `N = min_i P_i(first jump in [(a_i - h) T, (a_i + h) T])` with elapsed
/// times counted from each state's start phase. The lower edge is clamped
/// at the start, so a half-width covering the whole support gives the total
/// mass, and `h = 0` gives zero.
pub fn window_measure(spec: &ChainSpec, h: f64) -> Result<ChainWindow> {
    window_measure_with(spec, h, NODES_PER_PERIOD)
}

pub fn window_measure_with(spec: &ChainSpec, h: f64, nodes_per_period: usize) -> Result<ChainWindow> {
    if !(h >= 0.0) {
        return Err(invalid("h", "must be >= 0"));
    }
    let scale = spec.time_scale();
    let mut states = Vec::with_capacity(2);
    for state in Basin::BOTH {
        let start = spec.start_phase(state);
        let a = transition_times_from(spec.profile(state), spec.mu, start)?.a;
        let lo = (a - h - start).max(0.0);
        let hi = a + h - start;
        let (_, _, hazard) = hazard_table(spec, state, start, hi, nodes_per_period);
        let h_hi = *hazard.last().unwrap();
        let h_lo = interpolate_hazard(&hazard, lo / hi);
        let (mass, miss) = if h == 0.0 {
            (0.0, 1.0)
        } else {
            let mass = (-h_lo).exp() - (-h_hi).exp();
            (mass, -(-h_lo).exp_m1() + (-h_hi).exp())
        };
        states.push(StateWindow {
            state,
            start_phase: start,
            a,
            window: (lo * scale, hi * scale),
            mass,
            miss,
        });
    }
    let worst = if states[0].mass <= states[1].mass { 0 } else { 1 };
    Ok(ChainWindow {
        measure: states[worst].mass,
        miss: states[worst].miss,
        states,
    })
}

fn interpolate_hazard(hazard: &[f64], fraction: f64) -> f64 {
    let n = hazard.len() - 1;
    let x = fraction.clamp(0.0, 1.0) * n as f64;
    let k = (x.floor() as usize).min(n - 1);
    let w = x - k as f64;
    hazard[k] + w * (hazard[k + 1] - hazard[k])
}

/// Empirical first-jump times (elapsed, sorted) and the number of chains
/// still waiting at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSample {
    pub state: Basin,
    pub times: Vec<f64>,
    pub censored: usize,
}

impl ChainSample {
    pub fn paths(&self) -> usize {
        self.times.len() + self.censored
    }

    /// Fraction of all chains whose jump time lies in `[lo, hi]`.
    pub fn fraction_between(&self, lo: f64, hi: f64) -> f64 {
        let a = self.times.partition_point(|t| *t < lo);
        let b = self.times.partition_point(|t| *t <= hi);
        (b - a) as f64 / self.paths() as f64
    }
}

/// Samples first-jump times by thinning against the largest rate of the state.
pub fn simulate_chain(spec: &ChainSpec, state: Basin, master_seed: u64, n_paths: usize, horizon: f64) -> Result<ChainSample> {
    if n_paths == 0 {
        return Err(invalid("n_paths", "at least one path is required"));
    }
    let profile = spec.profile(state);
    let start_time = spec.start_phase(state) * spec.time_scale();
    let peak = (-profile.min().0 / spec.epsilon).exp() * (1.0 + 1e-9);
    let proposal = Exp::new(peak).map_err(|e| invalid("rate", e.to_string()))?;
    let domain = match state {
        Basin::Minus => StreamDomain::Chain,
        Basin::Plus => StreamDomain::ChainPlus,
    };
    let draws: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(master_seed, stream_id(domain, k));
            let mut u = 0.0;
            loop {
                u += proposal.sample(&mut rng);
                if u > horizon {
                    return None;
                }
                if rng.random::<f64>() * peak <= spec.rate(state, start_time + u) {
                    return Some(u);
                }
            }
        })
        .collect();
    let censored = draws.iter().filter(|d| d.is_none()).count();
    let mut times: Vec<f64> = draws.into_iter().flatten().collect();
    times.sort_by(f64::total_cmp);
    Ok(ChainSample {
        state,
        times,
        censored,
    })
}

/// Exact chain window probabilities for a [`fit_rate`] ladder.
pub struct ChainWindowSource<'a> {
    pub spec: &'a ChainSpec,
    pub h: f64,
}

impl WindowProbabilitySource for ChainWindowSource<'_> {
    fn window_probability(&self, epsilon: f64) -> Result<WindowPoint> {
        let w = window_measure(&self.spec.with_epsilon(epsilon)?, self.h)?;
        Ok(WindowPoint {
            value: w.measure,
            std_error: 0.0,
            trials: None,
        })
    }
}

/// `n` equally spaced interior points of `(lower, upper)`.
pub fn mu_grid(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    let w = (upper - lower) / (n + 1) as f64;
    (1..=n).map(|k| lower + k as f64 * w).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub mu: f64,
    pub predicted: f64,
    pub chain: f64,
    pub diffusion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub h: f64,
    pub rows: Vec<ComparisonRow>,
    pub grid_step: f64,
    pub argmin_predicted: f64,
    pub argmin_chain: f64,
    pub argmin_diffusion: Option<f64>,
    pub pass: bool,
}

fn argmin(mus: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let (k, _) = values
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    mus[k]
}

/// Predicted, chain and (optionally) diffusion rates on a scale grid, and
/// whether their minimizers agree within one grid step. The chain rate at
/// each scale is the fitted slope of `ln(1 - N)` over `ladder`.
pub fn compare_resonance(
    spec: &ChainSpec,
    mus: &[f64],
    h: f64,
    ladder: &[f64],
    diffusion: Option<&[f64]>,
) -> Result<ComparisonReport> {
    if mus.is_empty() {
        return Err(invalid("mu_grid", "at least one scale is required"));
    }
    if let Some(d) = diffusion {
        if d.len() != mus.len() {
            return Err(invalid("diffusion", "one diffusion rate per scale is required"));
        }
    }
    let rows = mus
        .par_iter()
        .enumerate()
        .map(|(k, &mu)| {
            let at = spec.with_mu(mu)?;
            let predicted = predicted_rate(&spec.p_minus, &spec.p_plus, mu, h)?;
            let fit = fit_rate(&ChainWindowSource { spec: &at, h }, ladder, predicted)?;
            Ok(ComparisonRow {
                mu,
                predicted,
                chain: fit.slope,
                diffusion: diffusion.map(|d| d[k]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid_step = if mus.len() > 1 {
        mus.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let argmin_predicted = argmin(mus, rows.iter().map(|r| r.predicted));
    let argmin_chain = argmin(mus, rows.iter().map(|r| r.chain));
    let argmin_diffusion = diffusion.map(|_| argmin(mus, rows.iter().map(|r| r.diffusion.unwrap())));
    let tol = grid_step * (1.0 + 1e-9);
    let mut pass = (argmin_chain - argmin_predicted).abs() <= tol;
    if let Some(d) = argmin_diffusion {
        pass &= (d - argmin_chain).abs() <= tol && (d - argmin_predicted).abs() <= tol;
    }
    Ok(ComparisonReport {
        h,
        rows,
        grid_step,
        argmin_predicted,
        argmin_chain,
        argmin_diffusion,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoid_spec(epsilon: f64) -> ChainSpec {
        ChainSpec::new(
            EnergyProfile::cosine(Basin::Minus, 64, 1.0, 0.5, 0.0).unwrap(),
            EnergyProfile::cosine(Basin::Plus, 64, 1.0, 0.5, 0.5).unwrap(),
            0.5,
            epsilon,
            0.9,
        )
        .unwrap()
    }

    fn constant_spec(level: f64, epsilon: f64) -> ChainSpec {
        let p = |b| EnergyProfile::from_values(b, vec![level; 16]).unwrap();
        ChainSpec::new(p(Basin::Minus), p(Basin::Plus), 0.5, epsilon, 0.9).unwrap()
    }

    #[test]
    fn constant_rate() {
        let spec = constant_spec(1.0, 0.5);
        let r = (-2.0f64).exp();
        assert!((spec.rate(Basin::Minus, 0.0) - r).abs() < 1e-15);
        assert!((spec.rate(Basin::Plus, 3.7) - r).abs() < 1e-15);
    }

    #[test]
    fn rate_is_periodic() {
        let spec = sinusoid_spec(0.25);
        let t = spec.time_scale();
        for u in [0.0, 1.3, 17.0] {
            let (a, b) = (spec.rate(Basin::Minus, u), spec.rate(Basin::Minus, u + t));
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn exponential_law_for_constant_rate() {
        let spec = constant_spec(1.0, 0.5);
        let lambda = (-2.0f64).exp();
        let periods = 10.0 / lambda / spec.time_scale();
        let d = first_transition_density_over(&spec, Basin::Minus, periods, 20_000).unwrap();
        assert!(d.hazard_mass() >= 1.0 - (-10.0f64).exp() - 1e-6);
        let k = 1000;
        let u = k as f64 * d.step;
        assert!((d.density[k] - lambda * (-lambda * u).exp()).abs() < 1e-9);
    }

    #[test]
    fn mass_identity() {
        for eps in [0.25, 0.15, 0.12] {
            let d = first_transition_density(&sinusoid_spec(eps), Basin::Minus, NODES_PER_PERIOD).unwrap();
            assert!(d.mass_defect() <= 1e-8, "{eps}: {}", d.mass_defect());
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = sinusoid_spec(0.25);
        assert!(matches!(
            first_transition_density(&spec, Basin::Minus, 100),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn window_edges() {
        let spec = sinusoid_spec(0.25);
        assert_eq!(window_measure(&spec, 0.0).unwrap().measure, 0.0);
        let full = window_measure(&spec, 2.0).unwrap();
        let periods = full.states[0].window.1 / spec.time_scale();
        let d = first_transition_density_over(&spec, Basin::Minus, periods, NODES_PER_PERIOD).unwrap();
        assert!((full.states[0].mass - d.hazard_mass()).abs() < 1e-9);
        let w = window_measure(&spec, 0.1).unwrap();
        assert!((w.states[0].mass - w.states[1].mass).abs() < 1e-9);
        assert!((w.measure + w.miss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_lock_is_checked() {
        let m = EnergyProfile::cosine(Basin::Minus, 64, 1.0, 0.5, 0.0).unwrap();
        let p = EnergyProfile::cosine(Basin::Plus, 64, 1.0, 0.5, 0.5).unwrap();
        assert!(ChainSpec::new(m, p, 0.25, 0.25, 0.9).is_err());
    }

    #[test]
    fn thinning_reproduces_the_exponential_mean() {
        let spec = constant_spec(1.0, 0.5);
        let lambda = (-2.0f64).exp();
        let n = 10_000;
        let s = simulate_chain(&spec, Basin::Minus, 11, n, f64::INFINITY).unwrap();
        assert_eq!(s.censored, 0);
        let mean = s.times.iter().sum::<f64>() / n as f64;
        let se = (1.0 / lambda) / (n as f64).sqrt();
        assert!((mean - 1.0 / lambda).abs() <= 4.0 * se);
        let again = simulate_chain(&spec, Basin::Minus, 11, n, f64::INFINITY).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn single_scale_comparison_passes() {
        let spec = sinusoid_spec(0.25);
        let r = compare_resonance(&spec, &[0.9], 0.1, &[0.25, 0.2, 0.15], None).unwrap();
        assert!(r.pass);
    }
}
