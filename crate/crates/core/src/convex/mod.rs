//! Convexified subproblem of the sequential approximation.
//!
//! Each target constraint `s^T z - z^T H z <= 0` is written as a convex part
//! (`-z^T H^- z`, with `H^-` the nonpositive spectral part of `H`) plus a
//! concave part (`-z^T H^+ z`). Linearizing the concave part, and the concave
//! `-y_m^(k+1)` of the slack link `z_m <= y_m^(k+1)`, at the current point gives
//! a program with a linear objective and convex quadratic rows whose feasible
//! set lies inside the original one.

pub mod qclp;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use qclp::{
    phase1_feasible, solve_qclp, KktResiduals, Qclp, QclpOptions, QclpSolution, QuadRow,
};

const SYMMETRY_TOL: f64 = 1e-10;

/// Eigendecomposition of a symmetric matrix scaled to unit norm.
///
/// The default convergence test of [`SymmetricEigen::new`] can deflate early
/// and lose small eigenpairs of strongly graded matrices, so a much tighter
/// threshold is used.
pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::try_new(m.clone(), 1e-20, 0).unwrap_or_else(|| SymmetricEigen::new(m))
}

/// `H = plus + minus` with `plus` PSD and `minus` NSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSplit {
    pub plus: DMatrix<f64>,
    pub minus: DMatrix<f64>,
}

/// Spectral split of a symmetric matrix. Zero eigenvalues go to `plus`.
pub fn split_h(h: &DMatrix<f64>) -> Result<EigenSplit> {
    if !h.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let norm = h.norm();
    let n = h.nrows();
    if norm == 0.0 {
        return Ok(EigenSplit {
            plus: DMatrix::zeros(n, n),
            minus: DMatrix::zeros(n, n),
        });
    }
    let asymmetry = (h - h.transpose()).norm() / norm;
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (h + h.transpose()) * (0.5 / norm);
    let eig = symmetric_eigen(sym);
    let v = &eig.eigenvectors;
    let pos = eig.eigenvalues.map(|l| l.max(0.0) * norm);
    let neg = eig.eigenvalues.map(|l| l.min(0.0) * norm);
    let plus = v * DMatrix::from_diagonal(&pos) * v.transpose();
    let minus = v * DMatrix::from_diagonal(&neg) * v.transpose();
    Ok(EigenSplit {
        plus: (&plus + plus.transpose()) * 0.5,
        minus: (&minus + minus.transpose()) * 0.5,
    })
}

/// One target's constraint data in canonical form: `s = a + b`, `H` and its split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTarget {
    pub s: DVector<f64>,
    pub h: DMatrix<f64>,
    pub split: EigenSplit,
}

impl SplitTarget {
    pub fn new(s: DVector<f64>, h: DMatrix<f64>) -> Result<Self> {
        if s.len() != h.nrows() {
            return Err(Error::InvalidArgument("s and H dimensions differ".into()));
        }
        let split = split_h(&h)?;
        Ok(SplitTarget { s, h, split })
    }

    /// `s^T z - z^T H z`, the unconvexified constraint.
    pub fn constraint_value(&self, z: &DVector<f64>) -> f64 {
        self.s.dot(z) - z.dot(&(&self.h * z))
    }
}

/// `z^T quad z + linear^T z + constant <= 0` over the slack variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadConstraint {
    pub linear: DVector<f64>,
    /// `-H^-`, positive semidefinite.
    pub quad: DMatrix<f64>,
    pub constant: f64,
}

impl QuadConstraint {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.quad * z)) + self.linear.dot(z) + self.constant
    }
}

/// `z_coeff * z_m + y_coeff * y_m + constant <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConstraint {
    pub z_coeff: f64,
    pub y_coeff: f64,
    pub constant: f64,
}

impl LinkConstraint {
    pub fn value(&self, y: f64, z: f64) -> f64 {
        self.z_coeff * z + self.y_coeff * y + self.constant
    }
}

/// Convex program over `(y, z)`: minimize `1^T y` subject to one quadratic
/// row per target, one linear link per transmitter and `y, z >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSubproblem {
    pub k: u32,
    pub y_point: DVector<f64>,
    pub z_point: DVector<f64>,
    /// Coefficients over the stacked `(y, z)`.
    pub objective: DVector<f64>,
    pub quad_constraints: Vec<QuadConstraint>,
    pub link_constraints: Vec<LinkConstraint>,
}

/// Linearizes every target constraint and slack link at `(y_point, z_point)`.
pub fn build_subproblem(
    targets: &[SplitTarget],
    k: u32,
    y_point: &DVector<f64>,
    z_point: &DVector<f64>,
) -> Result<ConvexSubproblem> {
    let m = y_point.len();
    if z_point.len() != m || targets.iter().any(|t| t.s.len() != m) {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    for (i, (y, z)) in y_point.iter().zip(z_point.iter()).enumerate() {
        if !(*y > 0.0 && *z > 0.0 && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidPoint { index: i });
        }
    }
    let quad_constraints = targets
        .iter()
        .map(|t| {
            let hz = &t.split.plus * z_point;
            QuadConstraint {
                linear: &t.s - &hz * 2.0,
                quad: -&t.split.minus,
                constant: z_point.dot(&hz),
            }
        })
        .collect();
    let kf = k as f64;
    let link_constraints = y_point
        .iter()
        .map(|&y| LinkConstraint {
            z_coeff: 1.0,
            y_coeff: -(kf + 1.0) * y.powi(k as i32),
            constant: kf * y.powi(k as i32 + 1),
        })
        .collect();
    let mut objective = DVector::zeros(2 * m);
    objective.rows_mut(0, m).fill(1.0);
    Ok(ConvexSubproblem {
        k,
        y_point: y_point.clone(),
        z_point: z_point.clone(),
        objective,
        quad_constraints,
        link_constraints,
    })
}

/// Solution of a [`ConvexSubproblem`] in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub objective: f64,
    pub kkt: KktResiduals,
    pub newton_steps: usize,
}

impl ConvexSubproblem {
    pub fn n_tx(&self) -> usize {
        self.y_point.len()
    }

    /// Largest violation of any row or bound at `(y, z)`, clipped at zero.
    pub fn violation(&self, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let quad = self.quad_constraints.iter().map(|c| c.value(z));
        let link = self
            .link_constraints
            .iter()
            .enumerate()
            .map(|(i, l)| l.value(y[i], z[i]));
        let bounds = y.iter().chain(z.iter()).map(|v| -v);
        quad.chain(link).chain(bounds).fold(0.0, f64::max)
    }

    /// Program in variables scaled by the linearization point,
    /// `y = diag(y_point) u`, `z = diag(z_point) v`, each row normalized.
    pub fn to_scaled_qclp(&self) -> Qclp {
        let m = self.n_tx();
        let y_sum: f64 = self.y_point.sum();
        let mut objective = DVector::zeros(2 * m);
        for i in 0..m {
            objective[i] = self.y_point[i] / y_sum;
        }
        let zd = DMatrix::from_diagonal(&self.z_point);
        let mut rows = Vec::with_capacity(self.quad_constraints.len() + m);
        for c in &self.quad_constraints {
            let quad_z = &zd * &c.quad * &zd;
            let lin_z = &zd * &c.linear;
            let mut quad = DMatrix::zeros(2 * m, 2 * m);
            quad.view_mut((m, m), (m, m)).copy_from(&quad_z);
            let mut linear = DVector::zeros(2 * m);
            linear.rows_mut(m, m).copy_from(&lin_z);
            let has_quad = quad_z.amax() > 0.0;
            rows.push(QuadRow {
                quad: has_quad.then_some(quad),
                linear,
                constant: c.constant,
            });
        }
        for (i, l) in self.link_constraints.iter().enumerate() {
            let mut linear = DVector::zeros(2 * m);
            linear[i] = l.y_coeff * self.y_point[i];
            linear[m + i] = l.z_coeff * self.z_point[i];
            rows.push(QuadRow::linear(linear, l.constant));
        }
        let mut prob = Qclp {
            objective,
            constraints: rows,
        };
        qclp::normalize_rows(&mut prob);
        prob
    }

    /// Interior starting point near the linearization point, in scaled units.
    fn scaled_start(&self, prob: &Qclp, margin: f64) -> Option<DVector<f64>> {
        let m = self.n_tx();
        for eps in [1e-3, 1e-5, 1e-7, 1e-2, 1e-1] {
            let mut x = DVector::zeros(2 * m);
            for i in 0..m {
                let l = &self.link_constraints[i];
                let v = 1.0 + eps;
                // smallest u satisfying the link at this v
                let y_weight = (-l.y_coeff * self.y_point[i]).max(f64::MIN_POSITIVE);
                let u_min = ((l.z_coeff * self.z_point[i] * v + l.constant) / y_weight).max(0.0);
                x[i] = u_min + eps * u_min.max(1.0);
                x[m + i] = v;
            }
            if x.iter().all(|v| *v > 0.0) && prob.constraints.iter().all(|r| r.value(&x) < -margin) {
                return Some(x);
            }
        }
        None
    }

    /// Solves the subproblem with the barrier method, starting next to the
    /// linearization point and falling back to phase I.
    pub fn solve(&self, opts: &QclpOptions) -> Result<SubproblemSolution> {
        let m = self.n_tx();
        let prob = self.to_scaled_qclp();
        let start = self.scaled_start(&prob, opts.phase1_margin);
        let sol = solve_qclp(&prob, start.as_ref(), opts)?;
        let y = DVector::from_fn(m, |i, _| sol.x[i] * self.y_point[i]);
        let z = DVector::from_fn(m, |i, _| sol.x[m + i] * self.z_point[i]);
        Ok(SubproblemSolution {
            objective: y.sum(),
            y,
            z,
            kkt: sol.kkt,
            newton_steps: sol.newton_steps,
        })
    }

    /// Plain-text LP-style dump (CPLEX LP flavour) in original units.
    pub fn to_lp_string(&self) -> String {
        let m = self.n_tx();
        let mut out = String::new();
        let _ = writeln!(out, "\\ convexified subproblem, k = {}, M = {}", self.k, m);
        let _ = writeln!(out, "Minimize");
        let terms: Vec<String> = (0..m).map(|i| format!("y{}", i + 1)).collect();
        let _ = writeln!(out, " obj: {}", terms.join(" + "));
        let _ = writeln!(out, "Subject To");
        for (q, c) in self.quad_constraints.iter().enumerate() {
            let mut line = format!(" tgt{}:", q + 1);
            for i in 0..m {
                let _ = write!(line, " {:+e} z{}", c.linear[i], i + 1);
            }
            let mut quad = Vec::new();
            for i in 0..m {
                for j in i..m {
                    let coef = if i == j { c.quad[(i, i)] } else { c.quad[(i, j)] + c.quad[(j, i)] };
                    if coef != 0.0 {
                        if i == j {
                            quad.push(format!("{:+e} z{} ^ 2", 2.0 * coef, i + 1));
                        } else {
                            quad.push(format!("{:+e} z{} * z{}", 2.0 * coef, i + 1, j + 1));
                        }
                    }
                }
            }
            if !quad.is_empty() {
                let _ = write!(line, " + [ {} ] / 2", quad.join(" "));
            }
            let _ = writeln!(line, " <= {:e}", -c.constant);
            out.push_str(&line);
        }
        for (i, l) in self.link_constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                " link{}: {:+e} z{} {:+e} y{} <= {:e}",
                i + 1,
                l.z_coeff,
                i + 1,
                l.y_coeff,
                i + 1,
                -l.constant
            );
        }
        let _ = writeln!(out, "Bounds");
        for i in 0..m {
            let _ = writeln!(out, " y{} >= 0", i + 1);
            let _ = writeln!(out, " z{} >= 0", i + 1);
        }
        let _ = writeln!(out, "End");
        out
    }
}
