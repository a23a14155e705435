//! Time-periodic drift fields, double-well benchmarks and basin classification.
//!
//! A [`DriftField`] wraps a period-one vector field `b(s, x)` together with
//! its inward-drift constants and, when known, the geometry of its two
//! domains of attraction. Phases are always reduced modulo one before the
//! field is evaluated, so periodicity holds structurally.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist, dot, norm};

/// Label of a domain of attraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basin {
    Minus,
    Plus,
}

impl Basin {
    pub const BOTH: [Basin; 2] = [Basin::Minus, Basin::Plus];

    pub fn opposite(self) -> Basin {
        match self {
            Basin::Minus => Basin::Plus,
            Basin::Plus => Basin::Minus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Basin::Minus => "-",
            Basin::Plus => "+",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Basin::Minus => 0,
            Basin::Plus => 1,
        }
    }
}

impl fmt::Display for Basin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Outcome of following the frozen flow from a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Basin(Basin),
    /// Step budget exhausted or flow stalled away from both attractors
    /// (separatrix-adjacent start).
    Unresolved,
}

/// A vector field `b(s, x)` with period one in the phase `s`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn drift(&self, s: f64, x: &[f64], out: &mut [f64]);

    /// Potential `U(s, x)` with `b = -grad U`, when the field is of gradient type.
    fn potential(&self, _s: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Writes `J(s, x)^T v` into `out`, where `J` is the spatial Jacobian of `b`.
    ///
    /// The default uses central differences with a relative step.
    fn jacobian_transpose_apply(&self, s: f64, x: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut xp = x.to_vec();
        let mut bp = vec![0.0; d];
        let mut bm = vec![0.0; d];
        for j in 0..d {
            let h = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            self.drift(s, &xp, &mut bp);
            xp[j] = x[j] - h;
            self.drift(s, &xp, &mut bm);
            xp[j] = x[j];
            out[j] = (0..d).map(|i| (bp[i] - bm[i]) / (2.0 * h) * v[i]).sum();
        }
    }
}

/// Constants of the inward-drift condition `<x, b(s,x)> < -eta |x|` for `|x| >= r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InwardDrift {
    pub eta: f64,
    pub r0: f64,
}

/// Time-invariant separatrix between the two domains of attraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Separatrix {
    /// `{x : <x, normal> = offset}`, with `normal` of unit length pointing into `A_+`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// Only known through the classifier.
    Implicit,
}

impl Separatrix {
    pub fn signed_distance(&self, x: &[f64]) -> Option<f64> {
        match self {
            Separatrix::Hyperplane { normal, offset } => Some(dot(normal, x) - offset),
            Separatrix::Implicit => None,
        }
    }

    /// Orthogonal projection onto the hyperplane.
    pub fn project(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Separatrix::Hyperplane { normal, offset } => {
                let t = dot(normal, x) - offset;
                Some(x.iter().zip(normal).map(|(xi, ni)| xi - t * ni).collect())
            }
            Separatrix::Implicit => None,
        }
    }
}

/// Stable equilibria `x_-`, `x_+` and the separatrix between their basins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    pub separatrix: Separatrix,
}

impl GeometrySpec {
    pub fn equilibrium(&self, basin: Basin) -> &[f64] {
        match basin {
            Basin::Minus => &self.minus,
            Basin::Plus => &self.plus,
        }
    }

    /// Radius of the balls around the equilibria that count as "arrived".
    pub fn classification_radius(&self) -> f64 {
        0.1 * dist(&self.minus, &self.plus)
    }
}

/// A period-one drift field with its metadata.
#[derive(Clone)]
pub struct DriftField {
    inner: Arc<dyn VectorField>,
    inward: InwardDrift,
    geometry: Option<GeometrySpec>,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("dim", &self.dim())
            .field("inward", &self.inward)
            .field("geometry", &self.geometry)
            .finish()
    }
}

impl DriftField {
    pub fn new(field: impl VectorField + 'static, inward: InwardDrift) -> Self {
        DriftField {
            inner: Arc::new(field),
            inward,
            geometry: None,
        }
    }

    pub fn with_geometry(mut self, geometry: GeometrySpec) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn drift(&self, s: f64, x: &[f64], out: &mut [f64]) {
        self.inner.drift(s.rem_euclid(1.0), x, out)
    }

    pub fn drift_vec(&self, s: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.drift(s, x, &mut out);
        out
    }

    pub fn potential(&self, s: f64, x: &[f64]) -> Option<f64> {
        self.inner.potential(s.rem_euclid(1.0), x)
    }

    pub fn is_gradient(&self) -> bool {
        self.potential(0.0, &vec![0.0; self.dim()]).is_some()
    }

    pub fn jacobian_transpose_apply(&self, s: f64, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.inner
            .jacobian_transpose_apply(s.rem_euclid(1.0), x, v, out)
    }

    pub fn inward(&self) -> InwardDrift {
        self.inward
    }

    pub fn geometry(&self) -> Option<&GeometrySpec> {
        self.geometry.as_ref()
    }

    pub(crate) fn require_geometry(&self) -> Result<&GeometrySpec> {
        self.geometry.as_ref().ok_or(Error::MissingGeometry)
    }

    /// Frobenius norm of the spatial Jacobian at `(s, x)`.
    pub fn jacobian_norm(&self, s: f64, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut e = vec![0.0; d];
        let mut row = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..d {
            e[i] = 1.0;
            self.jacobian_transpose_apply(s, x, &e, &mut row);
            acc += dot(&row, &row);
            e[i] = 0.0;
        }
        acc.sqrt()
    }

    /// Smallest contraction rate `-J_kk` over the coordinate directions at `x`,
    /// a cheap proxy for the inverse relaxation time near an equilibrium.
    pub fn relaxation_rate(&self, s: f64, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut e = vec![0.0; d];
        let mut row = vec![0.0; d];
        let mut rate = f64::INFINITY;
        for k in 0..d {
            e[k] = 1.0;
            self.jacobian_transpose_apply(s, x, &e, &mut row);
            rate = rate.min(-row[k]);
            e[k] = 0.0;
        }
        rate
    }
}

/// Closed-form, period-one well depth as a function of phase.
#[derive(Clone)]
pub enum DepthFunction {
    Constant(f64),
    /// `mean + amplitude * cos(2 pi t)`
    Cosine { mean: f64, amplitude: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DepthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthFunction::Constant(c) => write!(f, "Constant({c})"),
            DepthFunction::Cosine { mean, amplitude } => {
                write!(f, "Cosine {{ mean: {mean}, amplitude: {amplitude} }}")
            }
            DepthFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl DepthFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        match self {
            DepthFunction::Constant(c) => *c,
            DepthFunction::Cosine { mean, amplitude } => mean + amplitude * (TAU * t).cos(),
            DepthFunction::Custom(f) => f(t),
        }
    }
}

/// Quartic double well with independently modulated left and right depths:
///
/// `U(t, x) = 4 D(t, sign x1) (x1^4/4 - x1^2/2) + 1/2 sum_{k>=2} x_k^2`
///
/// with `D(t, -) = D_-(t)` and `D(t, +) = D_-(t + lag)`. Minima sit at
/// `(+-1, 0, ..)`, the saddle at the origin, and the separatrix is `x1 = 0`.
/// The potential is C^1 across the separatrix (the quartic's slope vanishes
/// there) but its curvature jumps when the two depths differ.
#[derive(Debug, Clone)]
pub struct QuarticDoubleWell {
    dim: usize,
    depth_minus: DepthFunction,
    phase_lag: f64,
}

impl QuarticDoubleWell {
    pub fn depth(&self, t: f64, basin: Basin) -> f64 {
        match basin {
            Basin::Minus => self.depth_minus.eval(t),
            Basin::Plus => self.depth_minus.eval(t + self.phase_lag),
        }
    }

    fn side_depth(&self, t: f64, x1: f64) -> f64 {
        if x1 <= 0.0 {
            self.depth(t, Basin::Minus)
        } else {
            self.depth(t, Basin::Plus)
        }
    }
}

impl VectorField for QuarticDoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let x1 = x[0];
        let d = self.side_depth(s, x1);
        out[0] = -4.0 * d * (x1 * x1 * x1 - x1);
        for k in 1..self.dim {
            out[k] = -x[k];
        }
    }

    fn potential(&self, s: f64, x: &[f64]) -> Option<f64> {
        let x1 = x[0];
        let x2 = x1 * x1;
        let d = self.side_depth(s, x1);
        let transverse: f64 = x[1..].iter().map(|v| 0.5 * v * v).sum();
        Some(4.0 * d * (0.25 * x2 * x2 - 0.5 * x2) + transverse)
    }

    fn jacobian_transpose_apply(&self, s: f64, x: &[f64], v: &[f64], out: &mut [f64]) {
        let x1 = x[0];
        let d = self.side_depth(s, x1);
        out[0] = -4.0 * d * (3.0 * x1 * x1 - 1.0) * v[0];
        for k in 1..self.dim {
            out[k] = -v[k];
        }
    }
}

/// Inward-drift constants used by the benchmark.
pub const BENCHMARK_INWARD: InwardDrift = InwardDrift { eta: 1.0, r0: 3.0 };

/// Builds the benchmark double well of dimension `d` with left depth
/// `depth_minus` and right depth `depth_minus(t + phase_lag)`.
pub fn make_benchmark(d: usize, depth_minus: DepthFunction, phase_lag: f64) -> Result<DriftField> {
    if !(1..=2).contains(&d) {
        return Err(invalid("dimension", format!("benchmark supports d in {{1, 2}}, got {d}")));
    }
    if !(phase_lag > 0.0 && phase_lag < 1.0) {
        return Err(invalid("phase_lag", format!("must lie in (0, 1), got {phase_lag}")));
    }
    for k in 0..1024 {
        let t = k as f64 / 1024.0;
        let v = depth_minus.eval(t);
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid("depth", format!("depth must be positive, D({t}) = {v}")));
        }
    }
    let well = QuarticDoubleWell {
        dim: d,
        depth_minus,
        phase_lag,
    };
    let mut minus = vec![0.0; d];
    let mut plus = vec![0.0; d];
    minus[0] = -1.0;
    plus[0] = 1.0;
    let mut normal = vec![0.0; d];
    normal[0] = 1.0;
    let field = DriftField::new(well, BENCHMARK_INWARD).with_geometry(GeometrySpec {
        minus,
        plus,
        separatrix: Separatrix::Hyperplane { normal, offset: 0.0 },
    });
    let report = check_inward_drift(&field);
    if report.worst_margin >= 0.0 {
        return Err(Error::AssumptionViolated(format!(
            "inward drift fails at {:?} (margin {})",
            report.worst_point, report.worst_margin
        )));
    }
    Ok(field)
}

/// Result of sampling the inward-drift condition on the shell `[r0, 2 r0]`.
#[derive(Debug, Clone, Serialize)]
pub struct InwardReport {
    /// Largest value of `<x, b> + eta |x|`; negative means the condition holds.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

fn sample_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for k in 0..d {
        for sign in [-1.0, 1.0] {
            let mut e = vec![0.0; d];
            e[k] = sign;
            dirs.push(e);
        }
    }
    if d > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..64 {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&v);
            dirs.push(v.iter().map(|c| c / n).collect());
        }
    }
    dirs
}

pub fn check_inward_drift(field: &DriftField) -> InwardReport {
    let InwardDrift { eta, r0 } = field.inward();
    let d = field.dim();
    let dirs = sample_directions(d);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = vec![0.0; d];
    let mut samples = 0;
    let mut b = vec![0.0; d];
    for k in 0..16 {
        let s = k as f64 / 16.0;
        for j in 0..=8 {
            let r = r0 * (1.0 + j as f64 / 8.0);
            for dir in &dirs {
                let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
                field.drift(s, &x, &mut b);
                let margin = dot(&x, &b) + eta * r;
                samples += 1;
                if margin > worst {
                    worst = margin;
                    worst_point = x;
                }
            }
        }
    }
    InwardReport {
        worst_margin: worst,
        worst_point,
        samples,
    }
}

/// Points on a regular grid in the cube `[-half_width, half_width]^d`.
pub(crate) fn box_grid(d: usize, half_width: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let coords: Vec<f64> = (0..per_axis)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (per_axis - 1) as f64)
        .collect();
    let mut points = vec![Vec::new()];
    for _ in 0..d {
        points = points
            .into_iter()
            .flat_map(|p| {
                coords.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    points
}

/// Largest `|b(s + 1, x) - b(s, x)|` over dyadic phases and a point grid.
pub fn periodicity_defect(field: &DriftField, half_width: f64) -> f64 {
    let d = field.dim();
    let mut worst: f64 = 0.0;
    for k in 0..32 {
        let s = k as f64 / 32.0;
        for x in box_grid(d, half_width, 11) {
            let b0 = field.drift_vec(s, &x);
            let b1 = field.drift_vec(s + 1.0, &x);
            worst = worst.max(dist(&b0, &b1));
        }
    }
    worst
}

/// Largest `|b + grad U|` on a sampled box, with `grad U` from central
/// differences of step `h`. Points within `10 h` of a hyperplane separatrix
/// are skipped, since the benchmark is only C^1 across it.
pub fn gradient_consistency(field: &DriftField, half_width: f64, h: f64) -> Result<f64> {
    if !field.is_gradient() {
        return Err(Error::NotGradient);
    }
    let d = field.dim();
    let per_axis = if d == 1 { 41 } else { 21 };
    let sep = field.geometry().map(|g| &g.separatrix);
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        let s = k as f64 / 8.0;
        for x in box_grid(d, half_width, per_axis) {
            if let Some(dist) = sep.and_then(|sp| sp.signed_distance(&x)) {
                if dist.abs() < 10.0 * h {
                    continue;
                }
            }
            let b = field.drift_vec(s, &x);
            let mut xp = x.clone();
            let mut err2 = 0.0;
            for j in 0..d {
                xp[j] = x[j] + h;
                let up = field.potential(s, &xp).unwrap_or(f64::NAN);
                xp[j] = x[j] - h;
                let um = field.potential(s, &xp).unwrap_or(f64::NAN);
                xp[j] = x[j];
                let g = (up - um) / (2.0 * h);
                err2 += (b[j] + g) * (b[j] + g);
            }
            worst = worst.max(err2.sqrt());
        }
    }
    Ok(worst)
}

/// Sampled local Lipschitz constants of the drift on a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzBounds {
    /// Spatial constant `K_R` (sup of the Jacobian's Frobenius norm).
    pub spatial: f64,
    /// Phase constant `kappa_R` (sup of `|b(t,y) - b(s,y)| / |t - s|`).
    pub temporal: f64,
}

pub fn lipschitz_bounds(field: &DriftField, center: &[f64], radius: f64) -> LipschitzBounds {
    let d = field.dim();
    let per_axis = if d == 1 { 81 } else { 25 };
    let points: Vec<Vec<f64>> = box_grid(d, radius, per_axis)
        .into_iter()
        .filter(|p| norm(p) <= radius + 1e-12)
        .map(|p| p.iter().zip(center).map(|(a, c)| a + c).collect())
        .collect();
    let phases = 64;
    let mut spatial: f64 = 0.0;
    let mut temporal: f64 = 0.0;
    for x in &points {
        let mut prev = field.drift_vec(0.0, x);
        for k in 1..=phases {
            let s = k as f64 / phases as f64;
            let cur = field.drift_vec(s, x);
            temporal = temporal.max(dist(&cur, &prev) * phases as f64);
            prev = cur;
            if k % 4 == 0 {
                spatial = spatial.max(field.jacobian_norm(s, x));
            }
        }
    }
    LipschitzBounds { spatial, temporal }
}

/// Tuning for [`classify_attraction`].
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub max_steps: usize,
    /// Defaults to `0.1 |x_+ - x_-|` when `None`.
    pub radius: Option<f64>,
    /// Defaults to `4 max(r0, |x_-|, |x_+|)` when `None`.
    pub escape_radius: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            max_steps: 1_000_000,
            radius: None,
            escape_radius: None,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

// Dormand-Prince 5(4) tableau (the field is autonomous, so the nodes are unused).
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince integrator for the frozen ODE `y' = b(s, y)`.
struct FrozenFlow<'a> {
    field: &'a DriftField,
    phase: f64,
    rtol: f64,
    atol: f64,
    h: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> FrozenFlow<'a> {
    fn new(field: &'a DriftField, phase: f64, rtol: f64, atol: f64) -> Self {
        let d = field.dim();
        FrozenFlow {
            field,
            phase,
            rtol,
            atol,
            h: 1e-3,
            k: vec![vec![0.0; d]; 7],
            tmp: vec![0.0; d],
            y_new: vec![0.0; d],
        }
    }

    /// Takes one accepted step of size at most `h_max`; returns the step taken.
    fn step(&mut self, y: &mut [f64], h_max: f64) -> f64 {
        let d = y.len();
        loop {
            let h = self.h.min(h_max);
            self.field.drift(self.phase, y, &mut self.k[0]);
            for stage in 1..7 {
                for i in 0..d {
                    let mut acc = y[i];
                    for (j, a) in DP_A[stage].iter().enumerate().take(stage) {
                        acc += h * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                self.field.drift(self.phase, &self.tmp, &mut self.k[stage]);
            }
            let mut err: f64 = 0.0;
            for i in 0..d {
                let mut acc = y[i];
                let mut e = 0.0;
                for j in 0..7 {
                    acc += h * DP_B[j] * self.k[j][i];
                    e += h * DP_E[j] * self.k[j][i];
                }
                self.y_new[i] = acc;
                let scale = self.atol + self.rtol * y[i].abs().max(acc.abs());
                err = err.max((e / scale).abs());
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 || h < 1e-14 {
                y.copy_from_slice(&self.y_new);
                self.h = (h * factor).min(10.0);
                return h;
            }
            self.h = h * factor;
        }
    }
}

/// Integrates the frozen ODE from `y` for `duration` time units.
pub fn frozen_flow(field: &DriftField, s: f64, y: &[f64], duration: f64) -> Vec<f64> {
    let mut state = y.to_vec();
    let mut flow = FrozenFlow::new(field, s, 1e-10, 1e-12);
    let mut t = 0.0;
    while t < duration {
        t += flow.step(&mut state, duration - t);
    }
    state
}

/// Fixed-step RK4 trajectory of the frozen ODE, `steps + 1` nodes stored flat.
pub fn frozen_trajectory(field: &DriftField, s: f64, y: &[f64], dt: f64, steps: usize) -> Vec<f64> {
    let d = field.dim();
    let mut out = Vec::with_capacity((steps + 1) * d);
    let mut state = y.to_vec();
    out.extend_from_slice(&state);
    let substeps = 4;
    let h = dt / substeps as f64;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    for _ in 0..steps {
        for _ in 0..substeps {
            field.drift(s, &state, &mut k1);
            for i in 0..d {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            field.drift(s, &tmp, &mut k2);
            for i in 0..d {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            field.drift(s, &tmp, &mut k3);
            for i in 0..d {
                tmp[i] = state[i] + h * k3[i];
            }
            field.drift(s, &tmp, &mut k4);
            for i in 0..d {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.extend_from_slice(&state);
    }
    out
}

/// Follows the frozen flow `phi' = b(s, phi)` from `y` until it enters a
/// ball around one of the equilibria.
pub fn classify_attraction(field: &DriftField, s: f64, y: &[f64]) -> Result<Classification> {
    classify_attraction_with(field, s, y, ClassifyOptions::default())
}

pub fn classify_attraction_with(
    field: &DriftField,
    s: f64,
    y: &[f64],
    opts: ClassifyOptions,
) -> Result<Classification> {
    let geom = field.require_geometry()?;
    if y.len() != field.dim() || y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("point", "must be finite with the field's dimension"));
    }
    let radius = opts.radius.unwrap_or_else(|| geom.classification_radius());
    let escape = opts.escape_radius.unwrap_or_else(|| {
        4.0 * field
            .inward()
            .r0
            .max(norm(&geom.minus))
            .max(norm(&geom.plus))
    });
    let mut state = y.to_vec();
    let mut flow = FrozenFlow::new(field, s, opts.rtol, opts.atol);
    let mut b = vec![0.0; field.dim()];
    let mut t = 0.0;
    for _ in 0..opts.max_steps {
        for basin in Basin::BOTH {
            if dist(&state, geom.equilibrium(basin)) < radius {
                return Ok(Classification::Basin(basin));
            }
        }
        let r = norm(&state);
        if r > escape {
            return Err(Error::Divergence { radius: escape, time: t });
        }
        field.drift(s, &state, &mut b);
        if norm(&b) < 1e-13 {
            // stationary outside both balls: a saddle or other non-attracting point
            return Ok(Classification::Unresolved);
        }
        t += flow.step(&mut state, 1.0);
    }
    Ok(Classification::Unresolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_depth() -> DepthFunction {
        DepthFunction::Cosine {
            mean: 0.5,
            amplitude: 0.25,
        }
    }

    #[test]
    fn benchmark_depths_at_phase_zero() {
        let field = make_benchmark(1, cosine_depth(), 0.5).unwrap();
        let u0 = field.potential(0.0, &[0.0]).unwrap();
        let left = u0 - field.potential(0.0, &[-1.0]).unwrap();
        let right = u0 - field.potential(0.0, &[1.0]).unwrap();
        assert!((left - 0.75).abs() < 1e-14);
        assert!((right - 0.25).abs() < 1e-14);
    }

    #[test]
    fn static_well_has_constant_depth() {
        let field = make_benchmark(1, DepthFunction::Constant(0.5), 0.3).unwrap();
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let depth = field.potential(t, &[0.0]).unwrap() - field.potential(t, &[-1.0]).unwrap();
            assert!((depth - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn transverse_confinement_on_separatrix() {
        let field = make_benchmark(2, cosine_depth(), 0.5).unwrap();
        let b = field.drift_vec(0.0, &[0.0, 1.0]);
        assert_eq!(b, vec![0.0, -1.0]);
    }

    #[test]
    fn equilibria_are_stationary_for_all_phases() {
        let field = make_benchmark(2, cosine_depth(), 0.5).unwrap();
        let geom = field.geometry().unwrap().clone();
        for k in 0..32 {
            let s = k as f64 / 32.0;
            for basin in Basin::BOTH {
                let b = field.drift_vec(s, geom.equilibrium(basin));
                assert_eq!(norm(&b), 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_benchmark(3, cosine_depth(), 0.5).is_err());
        assert!(make_benchmark(1, cosine_depth(), 0.0).is_err());
        assert!(make_benchmark(1, cosine_depth(), 1.0).is_err());
        let bad = DepthFunction::Cosine {
            mean: 0.2,
            amplitude: 0.3,
        };
        assert!(make_benchmark(1, bad, 0.5).is_err());
        assert!(make_benchmark(1, DepthFunction::Constant(-1.0), 0.5).is_err());
    }

    #[test]
    fn inward_drift_and_periodicity() {
        for d in 1..=2 {
            let field = make_benchmark(d, cosine_depth(), 0.5).unwrap();
            let report = check_inward_drift(&field);
            assert!(report.worst_margin < 0.0, "{report:?}");
            assert_eq!(periodicity_defect(&field, 2.0), 0.0);
        }
    }

    #[test]
    fn gradient_consistency_on_box() {
        for d in 1..=2 {
            let field = make_benchmark(d, cosine_depth(), 0.5).unwrap();
            let err = gradient_consistency(&field, 2.0, 1e-5).unwrap();
            assert!(err <= 1e-8, "d={d}: {err}");
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        struct Plain(QuarticDoubleWell);
        impl VectorField for Plain {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn drift(&self, s: f64, x: &[f64], out: &mut [f64]) {
                self.0.drift(s, x, out)
            }
        }
        let well = QuarticDoubleWell {
            dim: 2,
            depth_minus: cosine_depth(),
            phase_lag: 0.5,
        };
        let plain = Plain(well.clone());
        let v = [0.3, -0.7];
        for x in [[0.4, 0.2], [-1.3, 0.5], [0.9, -2.0]] {
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            well.jacobian_transpose_apply(0.3, &x, &v, &mut a);
            plain.jacobian_transpose_apply(0.3, &x, &v, &mut b);
            assert!(dist(&a, &b) < 1e-6, "{a:?} {b:?}");
        }
    }

    #[test]
    fn classification_examples() {
        let field = make_benchmark(2, cosine_depth(), 0.5).unwrap();
        assert_eq!(
            classify_attraction(&field, 0.0, &[-1.0, 0.0]).unwrap(),
            Classification::Basin(Basin::Minus)
        );
        assert_eq!(
            classify_attraction(&field, 0.0, &[0.5, 0.3]).unwrap(),
            Classification::Basin(Basin::Plus)
        );
        assert_eq!(
            classify_attraction(&field, 0.0, &[0.0, 0.7]).unwrap(),
            Classification::Unresolved
        );
        let field1 = make_benchmark(1, cosine_depth(), 0.5).unwrap();
        assert_eq!(
            classify_attraction(&field1, 0.25, &[0.0]).unwrap(),
            Classification::Unresolved
        );
    }

    #[test]
    fn classification_needs_geometry() {
        struct Linear;
        impl VectorField for Linear {
            fn dim(&self) -> usize {
                1
            }
            fn drift(&self, _s: f64, x: &[f64], out: &mut [f64]) {
                out[0] = -x[0];
            }
        }
        let field = DriftField::new(Linear, InwardDrift { eta: 1.0, r0: 2.0 });
        assert!(matches!(
            classify_attraction(&field, 0.0, &[0.1]),
            Err(Error::MissingGeometry)
        ));
    }

    #[test]
    fn divergent_field_is_reported() {
        struct Repelling;
        impl VectorField for Repelling {
            fn dim(&self) -> usize {
                1
            }
            fn drift(&self, _s: f64, x: &[f64], out: &mut [f64]) {
                out[0] = x[0] * (x[0] * x[0] - 1.0);
            }
        }
        // equilibria at -+1 are unstable here, so flow from 1.5 runs away
        let field = DriftField::new(Repelling, InwardDrift { eta: 1.0, r0: 2.0 }).with_geometry(
            GeometrySpec {
                minus: vec![-1.0],
                plus: vec![1.0],
                separatrix: Separatrix::Hyperplane {
                    normal: vec![1.0],
                    offset: 0.0,
                },
            },
        );
        assert!(matches!(
            classify_attraction(&field, 0.0, &[1.5]),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn frozen_flow_matches_linear_solution() {
        let field = make_benchmark(2, DepthFunction::Constant(0.5), 0.5).unwrap();
        let y = frozen_flow(&field, 0.0, &[1.0, 2.0], 1.5);
        assert!((y[1] - 2.0 * (-1.5f64).exp()).abs() < 1e-8);
        assert!((y[0] - 1.0).abs() < 1e-12);
        let traj = frozen_trajectory(&field, 0.0, &[1.0, 2.0], 0.1, 15);
        assert!((traj[31] - 2.0 * (-1.5f64).exp()).abs() < 1e-8);
    }
}
