use serde::Serialize;

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    /// Returns the value at `x` and writes the gradient into `grad`
    /// (already zeroed, same length as `x`).
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Named loss terms at `x`, for reporting.
    fn terms(&mut self, _x: &[f64]) -> Vec<(String, f64)> {
        Vec::new()
    }
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for F {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Per-parameter multiplier on the learning rate; `None` means all ones.
    pub rate_scale: Option<Vec<f64>>,
    /// Stop early once the gradient's largest component is at most this.
    pub gradient_tolerance: f64,
}

impl Schedule {
    pub fn new(learning_rate: f64, iterations: usize) -> Self {
        Schedule { learning_rate, iterations, rate_scale: None, gradient_tolerance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveReport {
    /// Best loss seen so far, one entry per iteration plus the start.
    pub history: Vec<f64>,
    pub start_terms: Vec<(String, f64)>,
    pub end_terms: Vec<(String, f64)>,
    pub iterations: usize,
    pub converged: bool,
}

impl ObjectiveReport {
    pub fn initial_loss(&self) -> f64 {
        self.history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

/// Adaptive-moment descent from `x0`. Returns the best iterate seen.
pub fn minimize<O: Objective + ?Sized>(
    objective: &mut O,
    x0: &[f64],
    schedule: &Schedule,
) -> Result<(Vec<f64>, ObjectiveReport)> {
    let n = x0.len();
    if let Some(s) = &schedule.rate_scale {
        if s.len() != n {
            return Err(Error::ShapeMismatch(format!("rate scale has {} entries, parameters {n}", s.len())));
        }
    }
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let start_terms = objective.terms(&x);

    let mut best_x = x.clone();
    let mut best = f64::INFINITY;
    let mut history = Vec::with_capacity(schedule.iterations + 1);
    let mut converged = false;
    let mut iterations = 0;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for it in 0..=schedule.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let f = objective.evaluate(&x, &mut grad);
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: it, context: String::new() });
        }
        if f < best {
            best = f;
            best_x.copy_from_slice(&x);
        }
        history.push(best);
        if it == schedule.iterations {
            break;
        }
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax <= schedule.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        b1t *= ADAM_BETA1;
        b2t *= ADAM_BETA2;
        for i in 0..n {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            let lr = schedule.learning_rate * schedule.rate_scale.as_ref().map_or(1.0, |s| s[i]);
            x[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
    let end_terms = objective.terms(&best_x);
    Ok((best_x, ObjectiveReport { history, start_terms, end_terms, iterations, converged }))
}
