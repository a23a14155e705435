//! Periodic energy profiles `e_-(s)`, `e_+(s)` sampled on a uniform phase grid.
//!
//! Between grid points the profile is a periodic monotone cubic (Fritsch-Carlson
//! slopes with the harmonic-mean rule), so sampled monotone stretches stay
//! monotone after interpolation and no spurious extrema appear.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::landscape::Basin;

/// Per-grid-point status of a computed profile value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFlags {
    /// The path optimizer hit its iteration budget.
    pub not_converged: bool,
    /// The last two rungs of the horizon ladder differ by more than the tolerance.
    pub ladder_unconverged: bool,
}

impl ProfileFlags {
    pub fn is_ok(&self) -> bool {
        !self.not_converged && !self.ladder_unconverged
    }

    fn merge(self, other: ProfileFlags) -> ProfileFlags {
        ProfileFlags {
            not_converged: self.not_converged || other.not_converged,
            ladder_unconverged: self.ladder_unconverged || other.ladder_unconverged,
        }
    }

    fn to_field(self) -> String {
        let mut parts = Vec::new();
        if self.not_converged {
            parts.push("not_converged");
        }
        if self.ladder_unconverged {
            parts.push("ladder_unconverged");
        }
        if parts.is_empty() {
            "ok".to_string()
        } else {
            parts.join("|")
        }
    }

    fn from_field(field: &str) -> Result<ProfileFlags> {
        let mut flags = ProfileFlags::default();
        for part in field.split('|') {
            match part.trim() {
                "ok" | "" => {}
                "not_converged" => flags.not_converged = true,
                "ladder_unconverged" => flags.ladder_unconverged = true,
                other => return Err(Error::Parse(format!("unknown flag `{other}`"))),
            }
        }
        Ok(flags)
    }
}

/// Periodic energy function for one basin, sampled at `s_j = j / M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    basin: Basin,
    values: Vec<f64>,
    flags: Vec<ProfileFlags>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl EnergyProfile {
    pub fn new(basin: Basin, values: Vec<f64>, flags: Vec<ProfileFlags>) -> Result<Self> {
        if values.len() < 4 {
            return Err(invalid("profile", "at least 4 grid points are required"));
        }
        if flags.len() != values.len() {
            return Err(invalid("profile", "one flag entry per grid point is required"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(invalid("profile", format!("values must be finite and positive, found {v}")));
        }
        let slopes = pchip_slopes(&values);
        Ok(EnergyProfile {
            basin,
            values,
            flags,
            slopes,
        })
    }

    pub fn from_values(basin: Basin, values: Vec<f64>) -> Result<Self> {
        let flags = vec![ProfileFlags::default(); values.len()];
        Self::new(basin, values, flags)
    }

    /// Samples a closed-form period-one function on `m` grid points.
    pub fn from_fn(basin: Basin, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(basin, (0..m).map(|j| f(j as f64 / m as f64)).collect())
    }

    /// `mean + amplitude * cos(2 pi (s + shift))`.
    pub fn cosine(basin: Basin, m: usize, mean: f64, amplitude: f64, shift: f64) -> Result<Self> {
        Self::from_fn(basin, m, |s| mean + amplitude * (TAU * (s + shift)).cos())
    }

    /// Profile shifted in phase: `e_new(s) = e(s + shift)`, resampled on the same grid.
    pub fn shifted(&self, basin: Basin, shift: f64) -> Result<Self> {
        let m = self.len();
        Self::from_fn(basin, m, |s| self.eval(s + shift))
    }

    pub fn basin(&self) -> Basin {
        self.basin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid_step(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn phase(&self, j: usize) -> f64 {
        j as f64 / self.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[ProfileFlags] {
        &self.flags
    }

    pub fn all_ok(&self) -> bool {
        self.flags.iter().all(ProfileFlags::is_ok)
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let m = self.len();
        let x = s.rem_euclid(1.0) * m as f64;
        let j = (x.floor() as usize).min(m - 1);
        (j, x - j as f64)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let m = self.len();
        let (j, t) = self.locate(s);
        let h = 1.0 / m as f64;
        let (y0, y1) = (self.values[j], self.values[(j + 1) % m]);
        let (m0, m1) = (self.slopes[j], self.slopes[(j + 1) % m]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let m = self.len();
        let (j, t) = self.locate(s);
        let h = 1.0 / m as f64;
        let (y0, y1) = (self.values[j], self.values[(j + 1) % m]);
        let (m0, m1) = (self.slopes[j], self.slopes[(j + 1) % m]);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * h * m1)
            / h
    }

    /// Minimum of the interpolant over one period and the phase where it is attained.
    pub fn min(&self) -> (f64, f64) {
        refine_extremum(|s| self.eval(s), self.len(), false)
    }

    /// Maximum of the interpolant over one period and the phase where it is attained.
    pub fn max(&self) -> (f64, f64) {
        refine_extremum(|s| self.eval(s), self.len(), true)
    }

    /// Checks that the profile is strictly monotone between its extremes and
    /// that every local extremum is global, on the grid values.
    pub fn validate_monotone_extremes(&self, tol: f64) -> Result<()> {
        let m = self.len();
        let v = &self.values;
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let diffs: Vec<f64> = (0..m).map(|j| v[(j + 1) % m] - v[j]).collect();
        if let Some(j) = diffs.iter().position(|d| *d == 0.0) {
            return Err(Error::AssumptionViolated(format!(
                "profile {} is flat between grid points {j} and {}",
                self.basin,
                (j + 1) % m
            )));
        }
        for j in 0..m {
            let before = diffs[(j + m - 1) % m];
            let after = diffs[j];
            if before > 0.0 && after < 0.0 && v[j] < hi - tol {
                return Err(Error::AssumptionViolated(format!(
                    "profile {} has a non-global local maximum {} at phase {}",
                    self.basin,
                    v[j],
                    self.phase(j)
                )));
            }
            if before < 0.0 && after > 0.0 && v[j] > lo + tol {
                return Err(Error::AssumptionViolated(format!(
                    "profile {} has a non-global local minimum {} at phase {}",
                    self.basin,
                    v[j],
                    self.phase(j)
                )));
            }
        }
        Ok(())
    }
}

/// Global extremum of a periodic function known on an `m`-point grid,
/// located on a 16x finer grid and refined by golden-section search.
pub(crate) fn refine_extremum(f: impl Fn(f64) -> f64, m: usize, maximize: bool) -> (f64, f64) {
    let sign = if maximize { -1.0 } else { 1.0 };
    let g = |s: f64| sign * f(s);
    let k = 16 * m;
    let (mut best_s, mut best) = (0.0, g(0.0));
    for i in 1..k {
        let s = i as f64 / k as f64;
        let v = g(s);
        if v < best {
            best = v;
            best_s = s;
        }
    }
    let h = 1.0 / k as f64;
    let (s, v) = golden_min(&g, best_s - h, best_s + h, 1e-13);
    if v < best {
        (sign * v, s.rem_euclid(1.0))
    } else {
        (sign * best, best_s)
    }
}

/// Golden-section minimization on `[a, b]`; returns the argmin and the value.
pub(crate) fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn pchip_slopes(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let h = 1.0 / m as f64;
    let secants: Vec<f64> = (0..m).map(|j| (values[(j + 1) % m] - values[j]) / h).collect();
    (0..m)
        .map(|j| {
            let left = secants[(j + m - 1) % m];
            let right = secants[j];
            if left * right <= 0.0 {
                0.0
            } else {
                2.0 * left * right / (left + right)
            }
        })
        .collect()
}

/// Writes a `s,e_minus,e_plus,flags` table, preceded by `#`-prefixed meta lines.
pub fn write_profiles_csv(
    minus: &EnergyProfile,
    plus: &EnergyProfile,
    meta: &[String],
    out: &mut impl Write,
) -> Result<()> {
    if minus.len() != plus.len() {
        return Err(Error::GridMismatch(minus.len(), plus.len()));
    }
    for line in meta {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "s,e_minus,e_plus,flags")?;
    for j in 0..minus.len() {
        let flags = minus.flags[j].merge(plus.flags[j]);
        writeln!(
            out,
            "{},{},{},{}",
            minus.phase(j),
            minus.values[j],
            plus.values[j],
            flags.to_field()
        )?;
    }
    Ok(())
}

/// Reads the table written by [`write_profiles_csv`].
pub fn read_profiles_csv(input: impl BufRead) -> Result<(EnergyProfile, EnergyProfile)> {
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    let mut flags = Vec::new();
    let mut phases = Vec::new();
    let mut header_seen = false;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "s,e_minus,e_plus,flags" {
                return Err(Error::Parse(format!("unexpected header `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!("expected 4 columns in `{line}`")));
        }
        let parse = |c: &str| {
            c.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number `{c}`: {e}")))
        };
        phases.push(parse(cols[0])?);
        minus.push(parse(cols[1])?);
        plus.push(parse(cols[2])?);
        flags.push(ProfileFlags::from_field(cols[3])?);
    }
    let m = phases.len();
    if let Some(j) = (0..m).find(|&j| (phases[j] - j as f64 / m as f64).abs() > 1e-9) {
        return Err(Error::Parse(format!(
            "row {j} has phase {} but a uniform {m}-point grid is required",
            phases[j]
        )));
    }
    let minus = EnergyProfile::new(Basin::Minus, minus, flags.clone())
        .map_err(|e| Error::Parse(e.to_string()))?;
    let plus = EnergyProfile::new(Basin::Plus, plus, flags).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((minus, plus))
}
