//! Limited-memory BFGS with Armijo backtracking.
//!
//! Constraints are handled by the objective itself: it must return a
//! gradient that is already projected onto the feasible directions (zero
//! for pinned variables, tangential for variables on a hyperplane). Every
//! search direction is then a combination of feasible directions, so the
//! iterates never leave the affine feasible set.

use std::collections::VecDeque;

use crate::linalg::{dot, max_abs};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Converged once the max-norm of the projected gradient drops below this.
    pub gtol: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 10_000,
            gtol: 1e-6,
            memory: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_max: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn lbfgs<F>(x0: Vec<f64>, mut objective: F, opts: LbfgsOptions) -> OptimOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let grad_max = max_abs(&g);
        if grad_max < opts.gtol {
            return OptimOutcome {
                x,
                value: f,
                grad_max,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / grad_max.max(1.0));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            let a = alpha_buf[k];
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }

        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi / grad_max.max(1.0));
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_trial = f;
        for _ in 0..60 {
            for i in 0..n {
                x_trial[i] = x[i] + step * dir[i];
            }
            f_trial = objective(&x_trial, &mut g_trial);
            if f_trial.is_finite() && f_trial <= f + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        }

        let s: Vec<f64> = x_trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_trial);
        std::mem::swap(&mut g, &mut g_trial);
        let improvement = f - f_trial;
        f = f_trial;
        if improvement == 0.0 && max_abs(&g) < opts.gtol * 1e3 {
            // stagnated at rounding level
            break;
        }
    }
    let grad_max = max_abs(&g);
    OptimOutcome {
        converged: grad_max < opts.gtol,
        x,
        value: f,
        grad_max,
        iterations,
    }
}
