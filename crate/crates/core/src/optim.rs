//! Limited-memory BFGS with Armijo backtracking on an unconstrained chart.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Options {
    pub max_iters: usize,
    /// Stop when the accepted step moves no coordinate by more than this.
    pub step_tol: f64,
    /// Objective decrease regarded as no progress.
    pub loss_tol: f64,
    /// Stop when the gradient's largest component falls below this.
    pub grad_tol: f64,
    pub memory: usize,
    /// Consecutive no-progress iterations tolerated before stopping.
    pub patience: usize,
}

impl Options {
    pub fn new(max_iters: usize, step_tol: f64, loss_tol: f64) -> Self {
        Options {
            max_iters,
            step_tol,
            loss_tol,
            grad_tol: 1e-12,
            memory: 10,
            patience: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Stop {
    Gradient,
    Step,
    Stall,
    LineSearch,
    MaxIters,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub f: f64,
    pub stop: Stop,
}

impl Outcome {
    pub fn converged(&self) -> bool {
        self.stop != Stop::MaxIters
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimises `f`, which returns the objective and writes its gradient.
pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut stalled = 0;

    if !fx.is_finite() {
        return Outcome { x, f: fx, stop: Stop::LineSearch };
    }

    for _ in 0..opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol {
            return Outcome { x, f: fx, stop: Stop::Gradient };
        }

        // Two-loop recursion for d = -H g.
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / inf_norm(&g).max(1.0),
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha_buf[k] - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi * scale);
            slope = dot(&g, &dir);
        }

        // Armijo backtracking.
        let mut step = 1.0;
        let mut f_new = f64::INFINITY;
        let mut accepted = false;
        for _ in 0..60 {
            x_new.iter_mut().zip(&x).zip(&dir).for_each(|((xn, xi), di)| *xn = xi + step * di);
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                return Outcome { x, f: fx, stop: Stop::LineSearch };
            }
            history.clear();
            continue;
        }

        let moved = step * inf_norm(&dir);
        let decrease = fx - f_new;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        fx = f_new;

        if moved <= opts.step_tol {
            return Outcome { x, f: fx, stop: Stop::Step };
        }
        if decrease <= opts.loss_tol {
            stalled += 1;
            if stalled >= opts.patience {
                return Outcome { x, f: fx, stop: Stop::Stall };
            }
        } else {
            stalled = 0;
        }
    }
    Outcome { x, f: fx, stop: Stop::MaxIters }
}
