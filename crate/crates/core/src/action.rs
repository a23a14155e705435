//! Frozen action functional, cost minimization and quasi-potentials.
//!
//! For a phase `s` frozen in the drift, the action of a path on `[0, T]` is
//!
//! ```text
//! I(phi) = 1/2 int_0^T |phi'(t) - b(s, phi(t))|^2 dt
//! ```
//!
//! and is discretized on a uniform grid with the composite midpoint rule.
//! The cost `V(x, y, T)` minimizes the discrete action with pinned
//! endpoints; the quasi-potential takes the minimum over a doubling ladder
//! of horizons, warm-starting each rung from the previous optimum. The exit
//! energy `e(s)` lets the final node slide on the separatrix hyperplane.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::landscape::{frozen_trajectory, lipschitz_bounds, Basin, DriftField, Separatrix};
use crate::linalg::{dist, dot};
use crate::optim::{lbfgs, LbfgsOptions};
use crate::profile::{EnergyProfile, ProfileFlags};

/// Minimum number of grid intervals for a path handed to the optimizer.
pub const MIN_INTERVALS: usize = 16;

/// A path sampled at `N + 1` uniformly spaced times on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathGrid {
    horizon: f64,
    dim: usize,
    nodes: Vec<f64>,
}

impl PathGrid {
    /// `nodes` holds the `N + 1` points back to back.
    pub fn new(horizon: f64, dim: usize, nodes: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        if dim == 0 || !nodes.len().is_multiple_of(dim) || nodes.len() / dim < 2 {
            return Err(invalid("nodes", "need at least two nodes of the given dimension"));
        }
        Ok(PathGrid {
            horizon,
            dim,
            nodes,
        })
    }

    pub fn straight_line(x: &[f64], y: &[f64], horizon: f64, intervals: usize) -> Result<Self> {
        let mut nodes = Vec::with_capacity((intervals + 1) * x.len());
        for k in 0..=intervals {
            let t = k as f64 / intervals as f64;
            nodes.extend(x.iter().zip(y).map(|(a, b)| a + t * (b - a)));
        }
        PathGrid::new(horizon, x.len(), nodes)
    }

    pub fn constant(x: &[f64], horizon: f64, intervals: usize) -> Result<Self> {
        PathGrid::straight_line(x, x, horizon, intervals)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() / self.dim - 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn start(&self) -> &[f64] {
        self.node(0)
    }

    pub fn end(&self) -> &[f64] {
        self.node(self.intervals())
    }

    /// Position at time `t`, linearly interpolated between nodes.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let n = self.intervals();
        let x = (t / self.step()).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let w = x - k as f64;
        self.node(k)
            .iter()
            .zip(self.node(k + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Joins two grids with equal spacing whose shared endpoint coincides.
    pub fn concat(&self, other: &PathGrid) -> Result<PathGrid> {
        if self.dim != other.dim {
            return Err(invalid("path", "dimension mismatch"));
        }
        if (self.step() - other.step()).abs() > 1e-12 * self.step() {
            return Err(invalid("path", "grids must share the same spacing"));
        }
        if dist(self.end(), other.start()) > 1e-12 {
            return Err(invalid("path", "end of the first path must equal the start of the second"));
        }
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&other.nodes[other.dim..]);
        PathGrid::new(self.horizon + other.horizon, self.dim, nodes)
    }
}

/// Composite-midpoint discretization of the frozen action:
/// `1/2 sum_k dt |(phi_{k+1} - phi_k)/dt - b(s, (phi_k + phi_{k+1})/2)|^2`.
pub fn evaluate_action(field: &DriftField, s: f64, path: &PathGrid) -> f64 {
    let d = path.dim;
    let dt = path.step();
    let mut mid = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..path.intervals() {
        let (a, c) = (path.node(k), path.node(k + 1));
        for i in 0..d {
            mid[i] = 0.5 * (a[i] + c[i]);
        }
        field.drift(s, &mid, &mut b);
        let mut r2 = 0.0;
        for i in 0..d {
            let r = (c[i] - a[i]) / dt - b[i];
            r2 += r * r;
        }
        total += 0.5 * dt * r2;
    }
    total
}

/// Discrete action and its gradient with respect to every node.
fn action_with_gradient(
    field: &DriftField,
    s: f64,
    dim: usize,
    dt: f64,
    nodes: &[f64],
    grad: &mut [f64],
) -> f64 {
    let n = nodes.len() / dim - 1;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut mid = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut r = vec![0.0; dim];
    let mut jt = vec![0.0; dim];
    let mut total = 0.0;
    for k in 0..n {
        let a = &nodes[k * dim..(k + 1) * dim];
        let c = &nodes[(k + 1) * dim..(k + 2) * dim];
        for i in 0..dim {
            mid[i] = 0.5 * (a[i] + c[i]);
        }
        field.drift(s, &mid, &mut b);
        let mut r2 = 0.0;
        for i in 0..dim {
            r[i] = (c[i] - a[i]) / dt - b[i];
            r2 += r[i] * r[i];
        }
        total += 0.5 * dt * r2;
        field.jacobian_transpose_apply(s, &mid, &r, &mut jt);
        for i in 0..dim {
            grad[k * dim + i] += -r[i] - 0.5 * dt * jt[i];
            grad[(k + 1) * dim + i] += r[i] - 0.5 * dt * jt[i];
        }
    }
    total
}

/// Constraint on the final node of a path.
#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Point(Vec<f64>),
    /// The final node may slide on `{<x, normal> = offset}` (`normal` of unit length).
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

/// Tuning of the path optimizer and the horizon ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionOptions {
    /// Largest horizon of the ladder.
    pub t_max: f64,
    /// First horizon; `None` uses five relaxation times at the start point.
    pub t0: Option<f64>,
    pub nodes_per_time: f64,
    pub min_intervals: usize,
    pub gtol: f64,
    pub max_iter: usize,
    /// Relative gap between the last two rungs above which the ladder is flagged.
    pub ladder_tol: f64,
}

impl Default for ActionOptions {
    fn default() -> Self {
        ActionOptions {
            t_max: 320.0,
            t0: None,
            nodes_per_time: 10.0,
            min_intervals: 200,
            gtol: 1e-6,
            max_iter: 10_000,
            ladder_tol: 0.01,
        }
    }
}

impl ActionOptions {
    pub fn intervals_for(&self, horizon: f64) -> usize {
        self.min_intervals
            .max((self.nodes_per_time * horizon).ceil() as usize)
            .max(MIN_INTERVALS)
    }

    fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iter: self.max_iter,
            gtol: self.gtol,
            ..LbfgsOptions::default()
        }
    }

    /// Horizons `t0, 2 t0, 4 t0, ...` up to `t_max` (at least one rung).
    pub fn ladder(&self, field: &DriftField, s: f64, x: &[f64]) -> Vec<f64> {
        let t0 = self.t0.unwrap_or_else(|| {
            let rate = field.relaxation_rate(s, x);
            if rate > 1e-6 {
                (5.0 / rate).clamp(0.5, 20.0)
            } else {
                5.0
            }
        });
        let mut ladder = vec![t0];
        while ladder.last().unwrap() * 2.0 <= self.t_max + 1e-9 {
            let next = ladder.last().unwrap() * 2.0;
            ladder.push(next);
        }
        ladder
    }
}

/// Optimal discrete path for one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct CostResult {
    pub value: f64,
    pub path: PathGrid,
    pub converged: bool,
    pub iterations: usize,
}

fn check_point(field: &DriftField, name: &'static str, x: &[f64]) -> Result<()> {
    if x.len() != field.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(invalid(name, "must be finite with the field's dimension"));
    }
    Ok(())
}

/// Descends the discrete action from `init`, with the first node pinned and
/// the last one constrained by `end`.
pub fn minimize_path(
    field: &DriftField,
    s: f64,
    init: &PathGrid,
    end: &Endpoint,
    opts: &ActionOptions,
) -> CostResult {
    let dim = init.dim;
    let dt = init.step();
    let n = init.intervals();
    let mut x0 = init.nodes.clone();
    match end {
        Endpoint::Point(y) => x0[n * dim..].copy_from_slice(y),
        Endpoint::Hyperplane { normal, offset } => {
            let last = &mut x0[n * dim..];
            let t = dot(normal, last) - offset;
            last.iter_mut().zip(normal).for_each(|(v, ni)| *v -= t * ni);
        }
    }
    let outcome = lbfgs(
        x0,
        |nodes, grad| {
            let v = action_with_gradient(field, s, dim, dt, nodes, grad);
            grad[..dim].iter_mut().for_each(|g| *g = 0.0);
            let last = &mut grad[n * dim..];
            match end {
                Endpoint::Point(_) => last.iter_mut().for_each(|g| *g = 0.0),
                Endpoint::Hyperplane { normal, .. } => {
                    let t = dot(normal, last);
                    last.iter_mut().zip(normal).for_each(|(g, ni)| *g -= t * ni);
                }
            }
            v
        },
        opts.lbfgs(),
    );
    CostResult {
        value: outcome.value.max(0.0),
        path: PathGrid {
            horizon: init.horizon,
            dim,
            nodes: outcome.x,
        },
        converged: outcome.converged,
        iterations: outcome.iterations,
    }
}

/// Initial path from the time-reversed downhill flow started next to `y`,
/// with a linear correction so that it runs exactly from `x` to `y`.
fn reversed_flow_guess(
    field: &DriftField,
    s: f64,
    x: &[f64],
    y: &[f64],
    horizon: f64,
    intervals: usize,
) -> Result<PathGrid> {
    let d = x.len();
    let gap = dist(x, y);
    if gap == 0.0 {
        return PathGrid::constant(x, horizon, intervals);
    }
    let nudge = 1e-3 * gap.min(1.0);
    let y_start: Vec<f64> = y
        .iter()
        .zip(x)
        .map(|(yi, xi)| yi + nudge * (xi - yi) / gap)
        .collect();
    let dt = horizon / intervals as f64;
    let flow = frozen_trajectory(field, s, &y_start, dt, intervals);
    if flow.iter().any(|v| !v.is_finite()) {
        return PathGrid::straight_line(x, y, horizon, intervals);
    }
    let flow_end = &flow[intervals * d..];
    let mut nodes = Vec::with_capacity(flow.len());
    for k in 0..=intervals {
        let w = k as f64 / intervals as f64;
        let src = &flow[(intervals - k) * d..(intervals - k + 1) * d];
        for i in 0..d {
            nodes.push(src[i] + (1.0 - w) * (x[i] - flow_end[i]) + w * (y[i] - y_start[i]));
        }
    }
    PathGrid::new(horizon, d, nodes)
}

/// Stretches a previous optimum to a longer horizon by waiting at its start.
fn padded_guess(prev: &PathGrid, horizon: f64, intervals: usize) -> Result<PathGrid> {
    let lead = horizon - prev.horizon;
    let dt = horizon / intervals as f64;
    let mut nodes = Vec::with_capacity((intervals + 1) * prev.dim);
    for k in 0..=intervals {
        let t = k as f64 * dt;
        if t <= lead {
            nodes.extend_from_slice(prev.start());
        } else {
            nodes.extend(prev.at(t - lead));
        }
    }
    PathGrid::new(horizon, prev.dim, nodes)
}

fn best_of(
    field: &DriftField,
    s: f64,
    starts: Vec<PathGrid>,
    end: &Endpoint,
    opts: &ActionOptions,
) -> CostResult {
    let mut best: Option<CostResult> = None;
    for init in starts {
        let res = minimize_path(field, s, &init, end, opts);
        let better = match &best {
            None => true,
            Some(b) => res.value < b.value,
        };
        if better {
            best = Some(res);
        }
    }
    best.expect("at least one start")
}

/// Cost `V^s(x, y, T)`: minimal discrete action over paths from `x` to `y`
/// in time `T` on `N` intervals, best of a straight-line and a
/// reversed-flow initialization.
pub fn minimize_cost(
    field: &DriftField,
    s: f64,
    x: &[f64],
    y: &[f64],
    horizon: f64,
    intervals: usize,
) -> Result<CostResult> {
    minimize_cost_with(field, s, x, y, horizon, intervals, &ActionOptions::default())
}

pub fn minimize_cost_with(
    field: &DriftField,
    s: f64,
    x: &[f64],
    y: &[f64],
    horizon: f64,
    intervals: usize,
    opts: &ActionOptions,
) -> Result<CostResult> {
    check_point(field, "x", x)?;
    check_point(field, "y", y)?;
    if intervals < MIN_INTERVALS {
        return Err(invalid("intervals", format!("need at least {MIN_INTERVALS}, got {intervals}")));
    }
    let starts = vec![
        PathGrid::straight_line(x, y, horizon, intervals)?,
        reversed_flow_guess(field, s, x, y, horizon, intervals)?,
    ];
    Ok(best_of(field, s, starts, &Endpoint::Point(y.to_vec()), opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung {
    pub horizon: f64,
    pub intervals: usize,
    pub value: f64,
    pub converged: bool,
}

/// Minimum of the cost over the horizon ladder.
#[derive(Debug, Clone, Serialize)]
pub struct QuasiPotential {
    pub value: f64,
    /// Horizon achieving the minimum (0 when `x = y`).
    pub horizon: f64,
    pub ladder: Vec<LadderRung>,
    /// The optimizer converged on the rung achieving the minimum.
    pub converged: bool,
    /// The last two rungs agree within the ladder tolerance.
    pub ladder_converged: bool,
    #[serde(skip)]
    pub path: Option<PathGrid>,
}

impl QuasiPotential {
    pub fn flags(&self) -> ProfileFlags {
        ProfileFlags {
            not_converged: !self.converged,
            ladder_unconverged: !self.ladder_converged,
        }
    }
}

fn run_ladder(
    field: &DriftField,
    s: f64,
    x: &[f64],
    end: &Endpoint,
    y_hint: &[f64],
    opts: &ActionOptions,
) -> Result<QuasiPotential> {
    let mut rungs = Vec::new();
    let mut best: Option<(CostResult, f64)> = None;
    let mut prev: Option<PathGrid> = None;
    for horizon in opts.ladder(field, s, x) {
        let intervals = opts.intervals_for(horizon);
        let mut starts = Vec::with_capacity(2);
        match &prev {
            None => starts.push(PathGrid::straight_line(x, y_hint, horizon, intervals)?),
            Some(p) => starts.push(padded_guess(p, horizon, intervals)?),
        }
        starts.push(reversed_flow_guess(field, s, x, y_hint, horizon, intervals)?);
        let res = best_of(field, s, starts, end, opts);
        rungs.push(LadderRung {
            horizon,
            intervals,
            value: res.value,
            converged: res.converged,
        });
        prev = Some(res.path.clone());
        let better = match &best {
            None => true,
            Some((b, _)) => res.value < b.value,
        };
        if better {
            best = Some((res, horizon));
        }
    }
    let (best, horizon) = best.expect("ladder has at least one rung");
    let ladder_converged = match rungs.as_slice() {
        [.., a, b] => (a.value - b.value).abs() <= opts.ladder_tol * b.value.abs().max(a.value.abs()) + 1e-9,
        _ => true,
    };
    Ok(QuasiPotential {
        value: best.value,
        horizon,
        ladder: rungs,
        converged: best.converged,
        ladder_converged,
        path: Some(best.path),
    })
}

/// Quasi-potential `V^s(x, y) = inf_T V^s(x, y, T)` over the horizon ladder.
pub fn quasi_potential(
    field: &DriftField,
    s: f64,
    x: &[f64],
    y: &[f64],
    opts: &ActionOptions,
) -> Result<QuasiPotential> {
    check_point(field, "x", x)?;
    check_point(field, "y", y)?;
    if dist(x, y) == 0.0 {
        return Ok(QuasiPotential {
            value: 0.0,
            horizon: 0.0,
            ladder: Vec::new(),
            converged: true,
            ladder_converged: true,
            path: None,
        });
    }
    run_ladder(field, s, x, &Endpoint::Point(y.to_vec()), y, opts)
}

fn hyperplane(field: &DriftField) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let geom = field.require_geometry()?;
    match &geom.separatrix {
        Separatrix::Hyperplane { normal, offset } => {
            let mid: Vec<f64> = geom
                .minus
                .iter()
                .zip(&geom.plus)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let hint = geom.separatrix.project(&mid).expect("hyperplane projection");
            Ok((normal.clone(), *offset, hint))
        }
        Separatrix::Implicit => Err(Error::UnsupportedSeparatrix),
    }
}

/// Energy `inf_{y in separatrix} V^s(x_basin, y)` needed to leave a basin at frozen phase `s`.
pub fn exit_energy(
    field: &DriftField,
    s: f64,
    basin: Basin,
    opts: &ActionOptions,
) -> Result<QuasiPotential> {
    let (normal, offset, hint) = hyperplane(field)?;
    let x = field.require_geometry()?.equilibrium(basin).to_vec();
    run_ladder(field, s, &x, &Endpoint::Hyperplane { normal, offset }, &hint, opts)
}

/// Exit energy of `basin` on the uniform phase grid `j / m`. Phases are
/// computed concurrently; each entry carries the convergence flags of its
/// minimization.
pub fn energy_profile(
    field: &DriftField,
    basin: Basin,
    m: usize,
    opts: &ActionOptions,
) -> Result<EnergyProfile> {
    hyperplane(field)?;
    let results: Vec<Result<QuasiPotential>> = (0..m)
        .into_par_iter()
        .map(|j| exit_energy(field, j as f64 / m as f64, basin, opts))
        .collect();
    let mut values = Vec::with_capacity(m);
    let mut flags = Vec::with_capacity(m);
    for r in results {
        let qp = r?;
        values.push(qp.value);
        flags.push(qp.flags());
    }
    EnergyProfile::new(basin, values, flags)
}

/// Well depth `inf_{y in separatrix} U(s, y) - U(s, x_basin)` of a gradient field.
pub fn well_depth(field: &DriftField, s: f64, basin: Basin) -> Result<f64> {
    if !field.is_gradient() {
        return Err(Error::NotGradient);
    }
    let (normal, _, hint) = hyperplane(field)?;
    let x = field.require_geometry()?.equilibrium(basin).to_vec();
    let d = field.dim();
    let outcome = lbfgs(
        hint,
        |y, grad| {
            field.drift(s, y, grad);
            grad.iter_mut().for_each(|g| *g = -*g);
            let t = dot(&normal, grad);
            grad.iter_mut().zip(&normal).for_each(|(g, ni)| *g -= t * ni);
            field.potential(s, y).expect("gradient field")
        },
        LbfgsOptions {
            gtol: 1e-10,
            ..LbfgsOptions::default()
        },
    );
    debug_assert_eq!(outcome.x.len(), d);
    Ok(outcome.value - field.potential(s, &x).expect("gradient field"))
}

/// Constant `Gamma_K = 1/2 (1 + kappa_R + R K_R + |b(0, 0)|)^2` bounding the
/// quasi-potential between points of the ball of radius `R` by `Gamma_K` times
/// their distance, with the local Lipschitz constants sampled on the ball.
pub fn lipschitz_gamma(field: &DriftField, radius: f64) -> f64 {
    let origin = vec![0.0; field.dim()];
    let bounds = lipschitz_bounds(field, &origin, radius);
    let b0 = crate::linalg::norm(&field.drift_vec(0.0, &origin));
    0.5 * (1.0 + bounds.temporal + radius * bounds.spatial + b0).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{make_benchmark, DepthFunction, InwardDrift, VectorField};

    struct Zero;
    impl VectorField for Zero {
        fn dim(&self) -> usize {
            1
        }
        fn drift(&self, _s: f64, _x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
    }

    fn static_well() -> DriftField {
        make_benchmark(1, DepthFunction::Constant(0.5), 0.5).unwrap()
    }

    #[test]
    fn free_motion_action_is_half() {
        let field = DriftField::new(Zero, InwardDrift { eta: 1.0, r0: 1.0 });
        let path = PathGrid::straight_line(&[0.0], &[1.0], 1.0, 32).unwrap();
        assert!((evaluate_action(&field, 0.0, &path) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn deterministic_flow_has_negligible_action() {
        let field = static_well();
        let traj = frozen_trajectory(&field, 0.0, &[-0.5], 0.05, 400);
        let path = PathGrid::new(20.0, 1, traj).unwrap();
        assert!(evaluate_action(&field, 0.0, &path) <= 1e-4);
    }

    #[test]
    fn reversed_flow_action_is_twice_the_barrier() {
        let field = static_well();
        let guess = reversed_flow_guess(&field, 0.0, &[-1.0], &[0.0], 40.0, 400).unwrap();
        let action = evaluate_action(&field, 0.0, &guess);
        assert!((0.98..=1.02).contains(&action), "{action}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let field = make_benchmark(
            2,
            DepthFunction::Cosine {
                mean: 0.5,
                amplitude: 0.25,
            },
            0.5,
        )
        .unwrap();
        let mut path = PathGrid::straight_line(&[-1.0, 0.2], &[0.3, -0.4], 3.0, 20).unwrap();
        for (k, v) in path.nodes.iter_mut().enumerate() {
            *v += 0.05 * ((k as f64) * 1.7).sin();
        }
        let mut grad = vec![0.0; path.nodes.len()];
        let dt = path.step();
        action_with_gradient(&field, 0.3, 2, dt, &path.nodes, &mut grad);
        let h = 1e-6;
        for i in [2, 7, 15, 30, 40] {
            let mut p = path.nodes.clone();
            p[i] += h;
            let mut tmp = vec![0.0; p.len()];
            let up = action_with_gradient(&field, 0.3, 2, dt, &p, &mut tmp);
            p[i] -= 2.0 * h;
            let dn = action_with_gradient(&field, 0.3, 2, dt, &p, &mut tmp);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn constant_path_at_equilibrium_costs_nothing() {
        let field = static_well();
        let res = minimize_cost(&field, 0.0, &[-1.0], &[-1.0], 5.0, 32).unwrap();
        assert!(res.value < 1e-12);
        let qp = quasi_potential(&field, 0.0, &[-1.0], &[-1.0], &ActionOptions::default()).unwrap();
        assert_eq!(qp.value, 0.0);
    }

    #[test]
    fn downhill_cost_is_free() {
        let field = static_well();
        let res = minimize_cost(&field, 0.0, &[0.0], &[-1.0], 40.0, 400).unwrap();
        assert!(res.value <= 1e-2, "{}", res.value);
    }

    #[test]
    fn uphill_cost_matches_twice_the_barrier() {
        let field = static_well();
        let res = minimize_cost(&field, 0.0, &[-1.0], &[0.0], 40.0, 400).unwrap();
        assert!((res.value - 1.0).abs() <= 0.03, "{}", res.value);
    }

    #[test]
    fn rejects_short_grids() {
        let field = static_well();
        assert!(minimize_cost(&field, 0.0, &[-1.0], &[0.0], 4.0, 8).is_err());
        assert!(PathGrid::new(0.0, 1, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn concatenation_adds_actions() {
        let field = static_well();
        let a = PathGrid::straight_line(&[-1.0], &[-0.4], 2.0, 20).unwrap();
        let b = PathGrid::straight_line(&[-0.4], &[0.3], 3.0, 30).unwrap();
        let joined = a.concat(&b).unwrap();
        let sum = evaluate_action(&field, 0.1, &a) + evaluate_action(&field, 0.1, &b);
        let whole = evaluate_action(&field, 0.1, &joined);
        assert!((sum - whole).abs() <= 1e-13 * sum);
        let c = PathGrid::straight_line(&[0.3], &[0.0], 1.0, 20).unwrap();
        assert!(b.concat(&c).is_err());
    }

    #[test]
    fn well_depths_of_the_benchmark() {
        let field = make_benchmark(
            2,
            DepthFunction::Cosine {
                mean: 0.5,
                amplitude: 0.25,
            },
            0.5,
        )
        .unwrap();
        assert!((well_depth(&field, 0.0, Basin::Minus).unwrap() - 0.75).abs() < 1e-12);
        assert!((well_depth(&field, 0.5, Basin::Minus).unwrap() - 0.25).abs() < 1e-12);
        assert!((well_depth(&field, 0.0, Basin::Plus).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn well_depth_needs_a_potential() {
        let field = DriftField::new(Zero, InwardDrift { eta: 1.0, r0: 1.0 });
        assert!(matches!(well_depth(&field, 0.0, Basin::Minus), Err(Error::NotGradient)));
    }
}
