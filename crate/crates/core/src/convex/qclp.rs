//! Log-barrier interior-point solver for small dense programs of the form
//!
//! ```text
//! minimize    c^T x
//! subject to  x^T P_i x + q_i^T x + r_i <= 0,   P_i PSD
//!             x >= 0
//! ```
//!
//! Centering uses damped Newton steps with a feasibility-preserving
//! backtracking line search; the barrier weight grows by a constant factor
//! between centerings.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x^T P x + q^T x + r <= 0`. A missing `P` is a linear row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub quad: Option<DMatrix<f64>>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadRow {
    pub fn linear(linear: DVector<f64>, constant: f64) -> Self {
        QuadRow {
            quad: None,
            linear,
            constant,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.linear.dot(x) + self.constant;
        if let Some(p) = &self.quad {
            v += x.dot(&(p * x));
        }
        v
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.quad {
            Some(p) => p * x * 2.0 + &self.linear,
            None => self.linear.clone(),
        }
    }

    fn scaled(&self, factor: f64) -> QuadRow {
        QuadRow {
            quad: self.quad.as_ref().map(|p| p * factor),
            linear: &self.linear * factor,
            constant: self.constant * factor,
        }
    }
}

/// Linear objective, convex quadratic rows, implicit nonnegativity.
#[derive(Debug, Clone, PartialEq)]
pub struct Qclp {
    pub objective: DVector<f64>,
    pub constraints: Vec<QuadRow>,
}

impl Qclp {
    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    /// Largest row value and largest bound violation, clipped at zero.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let rows = self.constraints.iter().map(|r| r.value(x));
        let bounds = x.iter().map(|v| -v);
        rows.chain(bounds).fold(0.0, f64::max)
    }

    fn strictly_feasible(&self, x: &DVector<f64>, margin: f64) -> bool {
        x.iter().all(|v| *v > 0.0) && self.constraints.iter().all(|r| r.value(x) < -margin)
    }

    fn barrier_count(&self) -> usize {
        self.constraints.len() + self.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QclpOptions {
    /// Stop when `(#constraints + #bounds) / t <= gap_tol * max(|c^T x|, 1)`.
    pub gap_tol: f64,
    /// Barrier weight growth per outer iteration.
    pub mu_factor: f64,
    /// Newton step budget across all centerings.
    pub max_newton_steps: usize,
    /// Strict-feasibility margin demanded from phase I.
    pub phase1_margin: f64,
}

impl Default for QclpOptions {
    fn default() -> Self {
        QclpOptions {
            gap_tol: 1e-8,
            mu_factor: 10.0,
            max_newton_steps: 2_000,
            phase1_margin: 1e-9,
        }
    }
}

/// Optimality residuals at the returned point, using the barrier's dual
/// estimates `lambda_i = 1 / (t (-f_i))`, `nu_j = 1 / (t x_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `||c + sum lambda_i grad f_i - nu||_inf / max(||c||_inf, 1)`.
    pub stationarity: f64,
    /// `sum lambda_i (-f_i) + sum nu_j x_j`, the duality-gap surrogate.
    pub complementarity: f64,
    /// Largest constraint or bound violation.
    pub primal_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QclpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt: KktResiduals,
    pub newton_steps: usize,
}

/// Returns a point with every row below `-phase1_margin` and every entry
/// positive, starting from `start` (all ones when absent).
pub fn phase1_feasible(
    prob: &Qclp,
    start: Option<&DVector<f64>>,
    opts: &QclpOptions,
) -> Result<DVector<f64>> {
    phase1_with_steps(prob, start, opts).map(|(x, _)| x)
}

fn phase1_with_steps(
    prob: &Qclp,
    start: Option<&DVector<f64>>,
    opts: &QclpOptions,
) -> Result<(DVector<f64>, usize)> {
    let n = prob.dim();
    let x0 = match start {
        Some(x) if x.len() == n => x.map(|v| if v > 0.0 { v } else { 1.0 }),
        _ => DVector::from_element(n, 1.0),
    };
    if prob.strictly_feasible(&x0, opts.phase1_margin) {
        return Ok((x0, 0));
    }

    // minimize sigma  s.t.  f_i(x) - sigma + 1 <= 0,  x, sigma >= 0
    let rows = prob
        .constraints
        .iter()
        .map(|r| {
            let quad = r.quad.as_ref().map(|p| {
                let mut big = DMatrix::zeros(n + 1, n + 1);
                big.view_mut((0, 0), (n, n)).copy_from(p);
                big
            });
            let mut linear = DVector::zeros(n + 1);
            linear.rows_mut(0, n).copy_from(&r.linear);
            linear[n] = -1.0;
            QuadRow {
                quad,
                linear,
                constant: r.constant + 1.0,
            }
        })
        .collect();
    let mut objective = DVector::zeros(n + 1);
    objective[n] = 1.0;
    let aux = Qclp {
        objective,
        constraints: rows,
    };
    let worst = prob
        .constraints
        .iter()
        .map(|r| r.value(&x0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(&x0);
    z0[n] = worst.max(0.0) + 2.0;

    let margin = opts.phase1_margin;
    let outcome = barrier(&aux, z0, opts, |z| z[n] - 1.0 < -margin)?;
    let x = outcome.x.rows(0, n).into_owned();
    if outcome.stopped_early && prob.strictly_feasible(&x, margin) {
        Ok((x, outcome.steps))
    } else {
        Err(Error::Infeasible {
            phase1_value: outcome.x[n] - 1.0,
            iterations: outcome.steps,
        })
    }
}

/// Solves `prob` from `warm_start` (phase I is run when it is not strictly
/// feasible).
pub fn solve_qclp(
    prob: &Qclp,
    warm_start: Option<&DVector<f64>>,
    opts: &QclpOptions,
) -> Result<QclpSolution> {
    let (x0, phase1_steps) = phase1_with_steps(prob, warm_start, opts)?;
    let outcome = barrier(prob, x0, opts, |_| false)?;
    let x = outcome.x;
    let t = outcome.t;
    let mut dual_grad = prob.objective.clone();
    let mut complementarity = 0.0;
    for row in &prob.constraints {
        let f = row.value(&x);
        let lambda = 1.0 / (t * -f);
        dual_grad += row.gradient(&x) * lambda;
        complementarity += lambda * -f;
    }
    for j in 0..x.len() {
        let nu = 1.0 / (t * x[j]);
        dual_grad[j] -= nu;
        complementarity += nu * x[j];
    }
    let c_norm = prob.objective.amax().max(1.0);
    let kkt = KktResiduals {
        stationarity: dual_grad.amax() / c_norm,
        complementarity,
        primal_violation: prob.violation(&x),
    };
    Ok(QclpSolution {
        objective: prob.objective.dot(&x),
        x,
        kkt,
        newton_steps: phase1_steps + outcome.steps,
    })
}

struct BarrierOutcome {
    x: DVector<f64>,
    t: f64,
    steps: usize,
    stopped_early: bool,
}

fn barrier<F>(prob: &Qclp, x0: DVector<f64>, opts: &QclpOptions, stop: F) -> Result<BarrierOutcome>
where
    F: Fn(&DVector<f64>) -> bool,
{
    let count = prob.barrier_count() as f64;
    let mut x = x0;
    let mut t = count / prob.objective.dot(&x).abs().max(1e-12);
    let mut steps = 0;
    loop {
        let centered = center(prob, &mut x, t, opts, &mut steps, &stop)?;
        if !centered || stop(&x) {
            return Ok(BarrierOutcome {
                x,
                t,
                steps,
                stopped_early: true,
            });
        }
        let scale = prob.objective.dot(&x).abs().max(1.0);
        if count / t <= opts.gap_tol * scale {
            return Ok(BarrierOutcome {
                x,
                t,
                steps,
                stopped_early: false,
            });
        }
        t *= opts.mu_factor;
    }
}

fn barrier_value(prob: &Qclp, x: &DVector<f64>, t: f64) -> Option<f64> {
    let mut phi = t * prob.objective.dot(x);
    for v in x.iter() {
        if *v <= 0.0 {
            return None;
        }
        phi -= v.ln();
    }
    for row in &prob.constraints {
        let f = row.value(x);
        if !(f < 0.0) {
            return None;
        }
        phi -= (-f).ln();
    }
    Some(phi)
}

/// Newton centering at weight `t`. Returns `Ok(false)` when `stop` fired.
fn center<F>(
    prob: &Qclp,
    x: &mut DVector<f64>,
    t: f64,
    opts: &QclpOptions,
    steps: &mut usize,
    stop: &F,
) -> Result<bool>
where
    F: Fn(&DVector<f64>) -> bool,
{
    let n = prob.dim();
    loop {
        if stop(x) {
            return Ok(false);
        }
        if *steps >= opts.max_newton_steps {
            return Err(Error::NumericalStall {
                iterations: *steps,
                gap: prob.barrier_count() as f64 / t,
            });
        }
        *steps += 1;

        let mut grad = &prob.objective * t;
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for row in &prob.constraints {
            let f = row.value(x);
            let g = row.gradient(x);
            let inv = 1.0 / -f;
            grad.axpy(inv, &g, 1.0);
            hess.ger(inv * inv, &g, &g, 1.0);
            if let Some(p) = &row.quad {
                hess += p * (2.0 * inv);
            }
        }
        for j in 0..n {
            grad[j] -= 1.0 / x[j];
            hess[(j, j)] += 1.0 / (x[j] * x[j]);
        }

        let step = newton_direction(&hess, &grad).ok_or(Error::NumericalStall {
            iterations: *steps,
            gap: prob.barrier_count() as f64 / t,
        })?;
        let decrement = -grad.dot(&step);
        if decrement / 2.0 <= 1e-10 {
            return Ok(true);
        }

        let mut s = 1.0f64;
        for j in 0..n {
            if step[j] < 0.0 {
                s = s.min(-0.99 * x[j] / step[j]);
            }
        }
        let phi0 = barrier_value(prob, x, t).expect("iterate stays interior");
        let mut accepted = false;
        while s > 1e-16 {
            let trial = &*x + &step * s;
            if let Some(phi) = barrier_value(prob, &trial, t) {
                if phi <= phi0 - 0.01 * s * decrement {
                    *x = trial;
                    accepted = true;
                    // progress below round-off of the barrier value
                    if decrement <= 1e-6 && phi0 - phi <= 1e-13 * phi0.abs().max(1.0) {
                        return Ok(true);
                    }
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            // Armijo can fail from round-off once the barrier is nearly flat.
            if decrement <= 1e-6 {
                return Ok(true);
            }
            return Err(Error::NumericalStall {
                iterations: *steps,
                gap: prob.barrier_count() as f64 / t,
            });
        }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -grad;
    if let Some(ch) = Cholesky::new(hess.clone()) {
        return Some(ch.solve(&rhs));
    }
    let shift = hess.diagonal().amax().max(1e-300) * 1e-12;
    let mut reg = hess.clone();
    for _ in 0..8 {
        for j in 0..reg.nrows() {
            reg[(j, j)] += shift;
        }
        if let Some(ch) = Cholesky::new(reg.clone()) {
            return Some(ch.solve(&rhs));
        }
    }
    None
}

/// Normalizes every row by its largest coefficient.
pub fn normalize_rows(prob: &mut Qclp) {
    for row in prob.constraints.iter_mut() {
        let mut scale = row.constant.abs().max(row.linear.amax());
        if let Some(p) = &row.quad {
            scale = scale.max(p.amax());
        }
        if scale > 0.0 && scale.is_finite() {
            *row = row.scaled(1.0 / scale);
        }
    }
}
