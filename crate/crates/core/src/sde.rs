//! Euler–Maruyama simulation of the slowly forced diffusion
//!
//! ```text
//! dX_t = b(t / T, X_t) dt + sqrt(eps) dW_t,    T = exp(mu / eps)
//! ```
//!
//! with detection of the first entry into a target ball and the first exit
//! from an abort ball. Batches run in parallel; every path owns a ChaCha
//! stream derived from the master seed and its index, and results are
//! collected in path order, so tallies do not depend on the worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::landscape::{lipschitz_bounds, DriftField};
use crate::linalg::{dist, norm};
use crate::rng::{path_rng, stream_id, StreamDomain};

/// Largest number of Euler steps a single path may take.
pub const MAX_STEPS: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Noise intensity; `0` gives the deterministic flow.
    pub epsilon: f64,
    /// Energy scale setting the time scale `exp(mu / epsilon)`.
    pub mu: f64,
    pub dt: f64,
    /// Longest simulated duration in natural time.
    pub horizon: f64,
    pub abort_radius: f64,
    pub master_seed: u64,
    pub path_count: usize,
}

impl SimConfig {
    pub fn time_scale(&self) -> f64 {
        (self.mu / self.epsilon).exp()
    }

    pub fn validate(&self, field: &DriftField) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon / self.dt <= MAX_STEPS) {
            return Err(invalid(
                "horizon",
                format!("horizon / dt must lie in [0, {MAX_STEPS:e}], got {}", self.horizon / self.dt),
            ));
        }
        let mut floor = field.inward().r0;
        if let Some(g) = field.geometry() {
            floor = floor.max(norm(&g.minus)).max(norm(&g.plus));
        }
        if !(self.abort_radius > floor) {
            return Err(invalid(
                "abort_radius",
                format!("must exceed {floor} (equilibria and inward-drift radius)"),
            ));
        }
        if self.path_count == 0 {
            return Err(invalid("path_count", "at least one path is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    HitTarget,
    EscapedR,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathOutcome {
    pub stop_reason: StopReason,
    /// Elapsed natural time since the start of the path.
    pub stop_time: f64,
    /// `(start_time + stop_time) / T`.
    pub phase_at_stop: f64,
    pub final_point: Vec<f64>,
}

/// Closed ball the path is waiting to enter.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Runs one path from `start` at natural time `start_time` until it enters
/// `target`, leaves the abort ball, or has run for `cfg.horizon`.
pub fn simulate_until<R: Rng>(
    field: &DriftField,
    cfg: &SimConfig,
    start: &[f64],
    start_time: f64,
    target: Option<&Target>,
    rng: &mut R,
) -> Result<PathOutcome> {
    let d = field.dim();
    let scale = cfg.time_scale();
    let outcome = |reason, elapsed: f64, point: Vec<f64>| PathOutcome {
        stop_reason: reason,
        stop_time: elapsed,
        phase_at_stop: (start_time + elapsed) / scale,
        final_point: point,
    };
    if let Some(t) = target {
        if dist(start, &t.center) <= t.radius {
            return Ok(outcome(StopReason::HitTarget, 0.0, start.to_vec()));
        }
    }
    let mut x = start.to_vec();
    let mut next = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut elapsed = 0.0;
    let mut step: u64 = 0;
    while elapsed < cfg.horizon {
        let h = cfg.dt.min(cfg.horizon - elapsed);
        let sigma = (cfg.epsilon * h).sqrt();
        field.drift((start_time + elapsed) / scale, &x, &mut b);
        for i in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            next[i] = x[i] + b[i] * h + sigma * xi;
        }
        step += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step, dt: cfg.dt });
        }
        if let Some(t) = target {
            let (d0, d1) = (dist(&x, &t.center), dist(&next, &t.center));
            if d1 <= t.radius {
                let w = (d0 - t.radius) / (d0 - d1);
                return Ok(outcome(StopReason::HitTarget, elapsed + w * h, lerp(&x, &next, w)));
            }
        }
        let (r0, r1) = (norm(&x), norm(&next));
        if r1 > cfg.abort_radius {
            let w = (cfg.abort_radius - r0) / (r1 - r0);
            return Ok(outcome(StopReason::EscapedR, elapsed + w * h, lerp(&x, &next, w)));
        }
        std::mem::swap(&mut x, &mut next);
        elapsed = if h < cfg.dt { cfg.horizon } else { elapsed + h };
    }
    Ok(outcome(StopReason::Horizon, cfg.horizon, x))
}

fn lerp(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + w * (q - p)).collect()
}

/// Runs `cfg.path_count` paths from the same start; path `k` uses stream
/// `(domain, k)`. Outcomes are returned in path order.
pub fn simulate_batch(
    field: &DriftField,
    cfg: &SimConfig,
    start: &[f64],
    start_time: f64,
    target: Option<&Target>,
    domain: StreamDomain,
) -> Result<Vec<PathOutcome>> {
    cfg.validate(field)?;
    if start.len() != field.dim() {
        return Err(invalid("start", "dimension mismatch"));
    }
    (0..cfg.path_count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.master_seed, stream_id(domain, k));
            simulate_until(field, cfg, start, start_time, target, &mut rng)
        })
        .collect()
}

/// Sampled spatial Lipschitz constant of the drift on balls of radius
/// `0.25 |x_+ - x_-|` around the equilibria (or on the inward-drift ball
/// when the field has no geometry).
pub fn equilibrium_lipschitz(field: &DriftField) -> f64 {
    match field.geometry() {
        Some(g) => {
            let r = 0.25 * dist(&g.minus, &g.plus);
            lipschitz_bounds(field, &g.minus, r)
                .spatial
                .max(lipschitz_bounds(field, &g.plus, r).spatial)
        }
        None => lipschitz_bounds(field, &vec![0.0; field.dim()], field.inward().r0).spatial,
    }
}

/// Stiffness guard `dt <= 0.1 / L`; returns `L`.
pub fn check_step_size(field: &DriftField, dt: f64) -> Result<f64> {
    let lipschitz = equilibrium_lipschitz(field);
    let limit = 0.1 / lipschitz;
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit, lipschitz });
    }
    Ok(lipschitz)
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub std_error: f64,
}

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Self {
        let p = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let se = if trials == 0 { 0.0 } else { (p * (1.0 - p) / trials as f64).sqrt() };
        Proportion {
            successes,
            trials,
            estimate: p,
            std_error: se,
        }
    }
}

/// Fraction of paths started at `start` that leave the ball of radius
/// `radius` before `deadline`. All radii reuse the same streams, so the
/// estimate is non-increasing in the radius path by path.
pub fn estimate_escape_probability(
    field: &DriftField,
    cfg: &SimConfig,
    start: &[f64],
    radius: f64,
    deadline: f64,
) -> Result<Proportion> {
    if !(radius > 0.0) || norm(start) > radius / 2.0 {
        return Err(invalid("radius", "the start point must lie in the ball of half the radius"));
    }
    if !(deadline >= 0.0) {
        return Err(invalid("deadline", "must be >= 0"));
    }
    let run = SimConfig {
        horizon: deadline,
        abort_radius: radius,
        ..*cfg
    };
    if run.path_count == 0 {
        return Err(invalid("path_count", "at least one path is required"));
    }
    let outcomes: Vec<StopReason> = (0..run.path_count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(run.master_seed, stream_id(StreamDomain::Escape, k));
            simulate_until(field, &run, start, 0.0, None, &mut rng).map(|o| o.stop_reason)
        })
        .collect::<Result<_>>()?;
    let escapes = outcomes.iter().filter(|r| **r == StopReason::EscapedR).count();
    Ok(Proportion::new(escapes, run.path_count))
}
