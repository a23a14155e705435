//! Transition times, the resonance interval, window probabilities, rate
//! fits and the stochastic resonance point.
//!
//! Phases are absolute: a path of basin `i` starts at phase `start_i`
//! (natural time `start_i * T`) and its window is
//! `[(a_i - h) T, (a_i + h) T]` where `a_i` is the first phase after
//! `start_i` at which `e_i` drops to the scale `mu`. By default `start_i` is
//! the phase where `e_i` peaks, so that `mu < e_i(start_i)` holds for every
//! admissible scale.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::landscape::{classify_attraction, Basin, Classification, DriftField};
use crate::linalg::dist;
use crate::profile::{golden_min, EnergyProfile};
use crate::rng::StreamDomain;
use crate::sde::{simulate_batch, Proportion, SimConfig, StopReason, Target};

/// `a = inf{t >= start : e(t) <= mu}` and `alpha = inf{t >= start : e(t) < mu}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionTimes {
    pub a: f64,
    pub alpha: f64,
}

/// First phase `t` in `[start, start + 1]` satisfying `e(t) <= mu`
/// (`e(t) < mu` when `strict`), or `None` if there is none.
pub fn first_crossing(profile: &EnergyProfile, mu: f64, start: f64, strict: bool) -> Option<f64> {
    let below = |t: f64| {
        let v = profile.eval(t);
        if strict {
            v < mu
        } else {
            v <= mu
        }
    };
    if below(start) {
        return Some(start);
    }
    let n = 16 * profile.len();
    let step = 1.0 / n as f64;
    let mut prev = start;
    for k in 1..=n {
        let t = start + k as f64 * step;
        if below(t) {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if below(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

/// Transition times for a path started at phase 0.
pub fn transition_times(profile: &EnergyProfile, mu: f64) -> Result<TransitionTimes> {
    transition_times_from(profile, mu, 0.0)
}

/// Transition times after `start`. Requires `min e < mu < e(start)`; `a`
/// and `alpha` are located independently and must agree within one grid step.
pub fn transition_times_from(profile: &EnergyProfile, mu: f64, start: f64) -> Result<TransitionTimes> {
    let (lower, _) = profile.min();
    let upper = profile.eval(start);
    if !(mu > lower && mu < upper) {
        return Err(Error::ScaleOutOfRange {
            mu,
            lower,
            upper,
            hint: "; start later, at a phase where the energy exceeds mu",
        });
    }
    let a = first_crossing(profile, mu, start, false).expect("mu exceeds the minimum");
    let alpha = first_crossing(profile, mu, start, true).expect("mu exceeds the minimum");
    if (alpha - a).abs() > profile.grid_step() {
        return Err(Error::AssumptionViolated(format!(
            "profile {} is flat at level {mu}: a = {a}, alpha = {alpha}",
            profile.basin()
        )));
    }
    Ok(TransitionTimes { a, alpha })
}

/// Phase at which the profile peaks; used as the default start of paths.
pub fn default_start_phase(profile: &EnergyProfile) -> f64 {
    let (_, s) = profile.max();
    if 1.0 - s < 1e-9 {
        0.0
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResonanceInterval {
    Open { lower: f64, upper: f64 },
    Empty,
}

impl ResonanceInterval {
    pub fn bounds(&self) -> Result<(f64, f64)> {
        match *self {
            ResonanceInterval::Open { lower, upper } => Ok((lower, upper)),
            ResonanceInterval::Empty => Err(Error::EmptyInterval),
        }
    }
}

fn check_grids(p_minus: &EnergyProfile, p_plus: &EnergyProfile) -> Result<()> {
    if p_minus.len() != p_plus.len() {
        return Err(Error::GridMismatch(p_minus.len(), p_plus.len()));
    }
    Ok(())
}

/// `I_R = (max_i min_t e_i(t), min_t max_i e_i(t))`.
pub fn resonance_interval(p_minus: &EnergyProfile, p_plus: &EnergyProfile) -> Result<ResonanceInterval> {
    check_grids(p_minus, p_plus)?;
    let lower = p_minus.min().0.max(p_plus.min().0);
    let (upper, _) = crate::profile::refine_extremum(
        |t| p_minus.eval(t).max(p_plus.eval(t)),
        p_minus.len(),
        false,
    );
    if lower >= upper - 1e-9 {
        Ok(ResonanceInterval::Empty)
    } else {
        Ok(ResonanceInterval::Open { lower, upper })
    }
}

/// Window of half-width `h` around the transition phase of one basin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub basin: Basin,
    pub mu: f64,
    pub h: f64,
    /// Phase at which paths start.
    pub start: f64,
    /// Absolute transition phase `a_mu`.
    pub a: f64,
}

impl WindowSpec {
    pub fn new(profile: &EnergyProfile, mu: f64, h: f64) -> Result<Self> {
        Self::with_start(profile, mu, h, default_start_phase(profile))
    }

    pub fn with_start(profile: &EnergyProfile, mu: f64, h: f64, start: f64) -> Result<Self> {
        let times = transition_times_from(profile, mu, start)?;
        if !(h > 0.0 && h < times.a - start) {
            return Err(invalid(
                "h",
                format!(
                    "window half-width must lie in (0, {}) so that the window opens after the start",
                    times.a - start
                ),
            ));
        }
        Ok(WindowSpec {
            basin: profile.basin(),
            mu,
            h,
            start,
            a: times.a,
        })
    }

    /// Window in elapsed natural time since the start, for time scale `scale`.
    pub fn elapsed_window(&self, scale: f64) -> (f64, f64) {
        (
            (self.a - self.h - self.start) * scale,
            (self.a + self.h - self.start) * scale,
        )
    }
}

/// Profiles indexed by basin.
pub fn by_basin<'a>(p_minus: &'a EnergyProfile, p_plus: &'a EnergyProfile, basin: Basin) -> &'a EnergyProfile {
    match basin {
        Basin::Minus => p_minus,
        Basin::Plus => p_plus,
    }
}

/// `mu - e_i(a_i - h)` for one basin.
pub fn basin_rate(profile: &EnergyProfile, mu: f64, h: f64) -> Result<f64> {
    let spec = WindowSpec::new(profile, mu, h)?;
    Ok(mu - profile.eval(spec.a - h))
}

/// Predicted window-miss rate `max_i {mu - e_i(a_i - h)}`.
pub fn predicted_rate(p_minus: &EnergyProfile, p_plus: &EnergyProfile, mu: f64, h: f64) -> Result<f64> {
    check_grids(p_minus, p_plus)?;
    Ok(basin_rate(p_minus, mu, h)?.max(basin_rate(p_plus, mu, h)?))
}

/// Monte Carlo tally for one basin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinEstimate {
    pub spec: WindowSpec,
    pub hits: usize,
    pub trials: usize,
    pub m_hat: f64,
    pub std_error: f64,
    /// First entries into the target before the window opened.
    pub early: usize,
    /// Paths that left the abort ball; counted as misses.
    pub escapes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEstimate {
    pub epsilon: f64,
    pub mu: f64,
    pub h: f64,
    pub rho: f64,
    pub path_count: usize,
    pub basins: Vec<BasinEstimate>,
    /// Minimum of the per-basin estimates.
    pub m_hat: f64,
    /// Standard error of the basin attaining the minimum.
    pub std_error: f64,
}

fn check_balls(field: &DriftField, rho: f64) -> Result<()> {
    let geom = field.require_geometry()?;
    if !(rho > 0.0) || 2.0 * rho >= dist(&geom.minus, &geom.plus) {
        return Err(invalid("rho", "balls around the equilibria must be non-empty and disjoint"));
    }
    let d = field.dim();
    for basin in Basin::BOTH {
        let center = geom.equilibrium(basin);
        let mut samples = vec![center.to_vec()];
        for k in 0..2 * d {
            let mut p = center.to_vec();
            p[k / 2] += if k % 2 == 0 { rho } else { -rho };
            samples.push(p);
        }
        if d >= 2 {
            for k in 0..8 {
                let theta = std::f64::consts::TAU * (k as f64 + 0.5) / 8.0;
                let mut p = center.to_vec();
                p[0] += rho * theta.cos();
                p[1] += rho * theta.sin();
                samples.push(p);
            }
        }
        for s in [0.0, 0.25, 0.5, 0.75] {
            for p in &samples {
                if classify_attraction(field, s, p)? != Classification::Basin(basin) {
                    return Err(Error::AssumptionViolated(format!(
                        "ball of radius {rho} around x_{} is not inside its basin at phase {s}",
                        basin.symbol()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Estimates the window transition probability at `cfg.epsilon`, `cfg.mu`:
/// for each basin, `cfg.path_count` paths start at the equilibrium and hit
/// when their first entry into the `rho`-ball around the other equilibrium
/// falls inside the window. The reported value is the minimum over basins.
pub fn estimate_window_probability(
    field: &DriftField,
    cfg: &SimConfig,
    p_minus: &EnergyProfile,
    p_plus: &EnergyProfile,
    h: f64,
    rho: f64,
) -> Result<WindowEstimate> {
    check_grids(p_minus, p_plus)?;
    if !(cfg.epsilon > 0.0) {
        return Err(invalid("epsilon", "window probabilities need positive noise"));
    }
    cfg.validate(field)?;
    check_balls(field, rho)?;
    let geom = field.require_geometry()?;
    let scale = cfg.time_scale();
    let mut basins = Vec::with_capacity(2);
    for basin in Basin::BOTH {
        let spec = WindowSpec::new(by_basin(p_minus, p_plus, basin), cfg.mu, h)?;
        let (lo, hi) = spec.elapsed_window(scale);
        if cfg.horizon < hi {
            return Err(Error::Config {
                key: "sim.horizon".into(),
                reason: format!("horizon {} ends before the window closes at {hi}", cfg.horizon),
            });
        }
        let run = SimConfig { horizon: hi, ..*cfg };
        let target = Target {
            center: geom.equilibrium(basin.opposite()).to_vec(),
            radius: rho,
        };
        let domain = match basin {
            Basin::Minus => StreamDomain::Diffusion,
            Basin::Plus => StreamDomain::DiffusionPlus,
        };
        let outcomes = simulate_batch(
            field,
            &run,
            geom.equilibrium(basin),
            spec.start * scale,
            Some(&target),
            domain,
        )?;
        let mut hits = 0;
        let mut early = 0;
        let mut escapes = 0;
        for o in &outcomes {
            match o.stop_reason {
                StopReason::HitTarget if o.stop_time < lo => early += 1,
                StopReason::HitTarget => hits += 1,
                StopReason::EscapedR => escapes += 1,
                StopReason::Horizon => {}
            }
        }
        let p = Proportion::new(hits, outcomes.len());
        basins.push(BasinEstimate {
            spec,
            hits,
            trials: p.trials,
            m_hat: p.estimate,
            std_error: p.std_error,
            early,
            escapes,
        });
    }
    let worst = if basins[0].m_hat <= basins[1].m_hat { 0 } else { 1 };
    Ok(WindowEstimate {
        epsilon: cfg.epsilon,
        mu: cfg.mu,
        h,
        rho,
        path_count: cfg.path_count,
        m_hat: basins[worst].m_hat,
        std_error: basins[worst].std_error,
        basins,
    })
}

/// Window probability and its uncertainty at one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowPoint {
    pub value: f64,
    pub std_error: f64,
    /// Number of Monte Carlo trials, `None` for exact values.
    pub trials: Option<usize>,
}

/// Anything that yields a window probability for a given noise intensity.
pub trait WindowProbabilitySource {
    fn window_probability(&self, epsilon: f64) -> Result<WindowPoint>;
}

/// Diffusion window probabilities by Monte Carlo.
pub struct DiffusionWindowSource<'a> {
    pub field: &'a DriftField,
    /// Template; `epsilon` is replaced per ladder point and `horizon` is
    /// stretched to the window end when `horizon_from_window` is set.
    pub config: SimConfig,
    pub p_minus: &'a EnergyProfile,
    pub p_plus: &'a EnergyProfile,
    pub h: f64,
    pub rho: f64,
    pub horizon_from_window: bool,
}

impl DiffusionWindowSource<'_> {
    pub fn estimate(&self, epsilon: f64) -> Result<WindowEstimate> {
        let mut cfg = SimConfig { epsilon, ..self.config };
        if self.horizon_from_window {
            let scale = cfg.time_scale();
            let mut end: f64 = 0.0;
            for basin in Basin::BOTH {
                let spec = WindowSpec::new(by_basin(self.p_minus, self.p_plus, basin), cfg.mu, self.h)?;
                end = end.max(spec.elapsed_window(scale).1);
            }
            cfg.horizon = end;
        }
        estimate_window_probability(self.field, &cfg, self.p_minus, self.p_plus, self.h, self.rho)
    }
}

impl WindowProbabilitySource for DiffusionWindowSource<'_> {
    fn window_probability(&self, epsilon: f64) -> Result<WindowPoint> {
        let est = self.estimate(epsilon)?;
        Ok(WindowPoint {
            value: est.m_hat,
            std_error: est.std_error,
            trials: Some(est.path_count),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub value: f64,
    pub std_error: f64,
    /// `epsilon * ln(1 - value)`; `None` when `value = 1`.
    pub scaled_log: Option<f64>,
    pub usable: bool,
}

/// Weighted least-squares fit of `ln(1 - M)` against `1 / epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<RatePoint>,
    /// Slope of the fit: the empirical exponential rate.
    pub slope: f64,
    pub intercept: f64,
    /// Weighted root-mean-square residual.
    pub residual: f64,
    pub predicted: f64,
    /// `|slope - predicted| / |predicted|`.
    pub relative_error: f64,
}

/// Evaluates `source` on a strictly decreasing `ladder` and fits the rate.
/// Points with `M = 1` are dropped; at least three usable points are needed.
pub fn fit_rate(source: &dyn WindowProbabilitySource, ladder: &[f64], predicted: f64) -> Result<RateFit> {
    if ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("ladder", "noise ladder must be positive and strictly decreasing"));
    }
    let mut points = Vec::with_capacity(ladder.len());
    let mut rows = Vec::new();
    for &epsilon in ladder {
        let w = source.window_probability(epsilon)?;
        let usable = w.value < 1.0;
        let scaled_log = usable.then(|| epsilon * (1.0 - w.value).ln());
        if usable {
            let var = match w.trials {
                Some(n) => {
                    // continuity correction keeps the weight finite at M = 0
                    let p = w.value.max(0.5 / n as f64);
                    p / ((1.0 - p) * n as f64)
                }
                None => 1.0,
            };
            rows.push((1.0 / epsilon, (1.0 - w.value).ln(), 1.0 / var));
        }
        points.push(RatePoint {
            epsilon,
            value: w.value,
            std_error: w.std_error,
            scaled_log,
            usable,
        });
    }
    if rows.len() < 3 {
        return Err(Error::InsufficientPoints {
            usable: rows.len(),
            required: 3,
        });
    }
    let sw: f64 = rows.iter().map(|r| r.2).sum();
    let mx = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let my = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (rows
        .iter()
        .map(|r| r.2 * (r.1 - intercept - slope * r.0).powi(2))
        .sum::<f64>()
        / sw)
        .sqrt();
    Ok(RateFit {
        points,
        slope,
        intercept,
        residual,
        predicted,
        relative_error: (slope - predicted).abs() / predicted.abs(),
    })
}

/// Resonance point for one window half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonancePoint {
    pub h: f64,
    pub mu: f64,
    /// Predicted rate at `mu`.
    pub objective: f64,
    /// The minimum sits at an end of the admissible scale range.
    pub boundary: bool,
}

/// Zero of `e''` on the decreasing branch, located from second differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inflection {
    pub phase: f64,
    pub value: f64,
}

/// Signs of the profile derivatives at a resonance point, and the curvature
/// of the objective there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrder {
    pub h: f64,
    pub slope_at_a: f64,
    pub curvature_at_a: f64,
    pub curvature_before: f64,
    pub objective_curvature: f64,
    /// Decreasing at `a`, `a` past the inflection and `a - h` before it,
    /// and the objective locally convex.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceReport {
    pub interval: (f64, f64),
    pub points: Vec<ResonancePoint>,
    /// Linear extrapolation to `h = 0` from the two smallest half-widths.
    pub extrapolated: f64,
    /// Spread of the extrapolation when repeated with the next pair of half-widths.
    pub extrapolation_error: f64,
    pub extrapolated_boundary: bool,
    pub inflection: Option<Inflection>,
    pub second_order: Vec<SecondOrder>,
}

/// Number of scales on which the objective is scanned.
pub const MU_GRID: usize = 400;

fn objective(p_minus: &EnergyProfile, p_plus: &EnergyProfile, mu: f64, h: f64) -> f64 {
    predicted_rate(p_minus, p_plus, mu, h).unwrap_or(f64::INFINITY)
}

/// Minimizes `mu -> max_i {mu - e_i(a_i - h)}` over a grid inside `I_R`.
pub fn resonance_point(p_minus: &EnergyProfile, p_plus: &EnergyProfile, h: f64) -> Result<ResonancePoint> {
    let (lower, upper) = resonance_interval(p_minus, p_plus)?.bounds()?;
    let step = (upper - lower) / MU_GRID as f64;
    let grid: Vec<f64> = (0..MU_GRID).map(|k| lower + (k as f64 + 0.5) * step).collect();
    let values: Vec<f64> = grid.iter().map(|&mu| objective(p_minus, p_plus, mu, h)).collect();
    let (k, best) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    if !best.is_finite() {
        return Err(invalid("h", format!("no admissible scale for window half-width {h}")));
    }
    let boundary = k == 0 || k == MU_GRID - 1 || !values[k - 1].is_finite() || !values[k + 1].is_finite();
    if boundary {
        return Ok(ResonancePoint {
            h,
            mu: grid[k],
            objective: best,
            boundary,
        });
    }
    let f = |mu: f64| objective(p_minus, p_plus, mu, h);
    let (mu, value) = golden_min(&f, grid[k - 1], grid[k + 1], 1e-12);
    let (mu, value) = if value <= best { (mu, value) } else { (grid[k], best) };
    Ok(ResonancePoint {
        h,
        mu,
        objective: value,
        boundary,
    })
}

/// Inflection on the decreasing branch (from the peak to the trough) of `profile`.
pub fn inflection_point(profile: &EnergyProfile) -> Option<Inflection> {
    let m = profile.len();
    let v = profile.values();
    let (_, s_max) = profile.max();
    let (_, s_min) = profile.min();
    let mut end = s_min;
    while end <= s_max {
        end += 1.0;
    }
    let first = (s_max * m as f64).ceil() as usize;
    let last = (end * m as f64).floor() as usize;
    let d2 = |j: usize| v[(j + 1) % m] - 2.0 * v[j % m] + v[(j + m - 1) % m];
    for j in first + 1..last {
        let (c0, c1) = (d2(j - 1), d2(j));
        if c0 < 0.0 && c1 >= 0.0 {
            let w = c0 / (c0 - c1);
            let phase = ((j - 1) as f64 + w) / m as f64;
            return Some(Inflection {
                phase,
                value: profile.eval(phase),
            });
        }
    }
    None
}

/// Second-order conditions at a resonance point, by finite differences.
pub fn second_order_check(p_minus: &EnergyProfile, p_plus: &EnergyProfile, point: &ResonancePoint) -> Result<SecondOrder> {
    let spec = WindowSpec::new(p_minus, point.mu, point.h)?;
    let step = p_minus.grid_step();
    let d2 = |t: f64| (p_minus.eval(t + step) - 2.0 * p_minus.eval(t) + p_minus.eval(t - step)) / (step * step);
    let dm = 1e-3 * point.mu.abs().max(1.0);
    let f = |mu: f64| objective(p_minus, p_plus, mu, point.h);
    let objective_curvature = (f(point.mu + dm) - 2.0 * f(point.mu) + f(point.mu - dm)) / (dm * dm);
    let slope_at_a = p_minus.derivative(spec.a);
    let curvature_at_a = d2(spec.a);
    let curvature_before = d2(spec.a - point.h);
    Ok(SecondOrder {
        h: point.h,
        slope_at_a,
        curvature_at_a,
        curvature_before,
        objective_curvature,
        consistent: slope_at_a < 0.0 && curvature_at_a > 0.0 && curvature_before < 0.0 && objective_curvature > 0.0,
    })
}

/// Resonance points for every half-width in `h_ladder`, their
/// extrapolation to `h = 0`, and the inflection cross-check.
pub fn find_resonance_point(p_minus: &EnergyProfile, p_plus: &EnergyProfile, h_ladder: &[f64]) -> Result<ResonanceReport> {
    let interval = resonance_interval(p_minus, p_plus)?.bounds()?;
    p_minus.validate_monotone_extremes(1e-12)?;
    p_plus.validate_monotone_extremes(1e-12)?;
    if h_ladder.len() < 2 {
        return Err(invalid("h_ladder", "at least two half-widths are needed to extrapolate"));
    }
    let mut points = h_ladder
        .iter()
        .map(|&h| resonance_point(p_minus, p_plus, h))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.h.total_cmp(&b.h));
    let extrapolate = |p: &ResonancePoint, q: &ResonancePoint| p.mu - p.h * (q.mu - p.mu) / (q.h - p.h);
    let extrapolated = extrapolate(&points[0], &points[1]);
    let extrapolation_error = if points.len() >= 3 {
        (extrapolate(&points[1], &points[2]) - extrapolated).abs()
    } else {
        0.0
    };
    let tol = extrapolation_error.max((interval.1 - interval.0) / MU_GRID as f64);
    let extrapolated_boundary = extrapolated >= interval.1 - tol || extrapolated <= interval.0 + tol;
    let second_order = points
        .iter()
        .filter(|p| !p.boundary)
        .map(|p| second_order_check(p_minus, p_plus, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResonanceReport {
        interval,
        points,
        extrapolated,
        extrapolation_error,
        extrapolated_boundary,
        inflection: inflection_point(p_minus),
        second_order,
    })
}
