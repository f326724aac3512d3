//! Lower bounds on the optimal worst-case CRLB.
//!
//! Keeping only target `q`'s constraint and replacing `y^(k+1)` by `z` gives
//!
//! ```text
//! minimize 1^T z   s.t.   (a+b)^T z <= z^T H z,   z >= 0,  z != 0
//! ```
//!
//! whose optimum lower-bounds `(1^T y)^(k+1)` at every feasible `y`. Writing
//! `z = t u` with `u` on the unit simplex shows the optimum equals the minimum
//! of `F(u) = (a+b)^T u / u^T H u`. `F` depends on `u` only through
//! `(a^T u, b^T u, c^T u)`, so a minimizer with at most three nonzero entries
//! exists; the solver enumerates those supports and solves the stationarity
//! conditions on each in closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex::symmetric_eigen;
use crate::error::{Error, Result};
use crate::spca::{CanonicalProblem, ProblemKind};

/// Largest transmitter count accepted by the enumeration.
pub const MAX_ENUMERATION_TX: usize = 12;

/// Largest support that can hold a minimizer.
const MAX_SUPPORT: usize = 3;

/// Relative eigenvalue cutoff for treating a support block as singular.
const RANK_TOL: f64 = 1e-12;

/// Global minimizer of the single-constraint relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub support: Vec<usize>,
    pub supports_tried: usize,
    /// Stationarity residual `||1 + lambda ((a+b) - 2 H z)||_inf` on the
    /// support, relative to one.
    pub kkt_residual: f64,
}

/// Globally solves `min 1^T z  s.t.  s^T z <= z^T H z,  z >= 0,  z != 0`.
pub fn solve_single_constraint_global(s: &DVector<f64>, h: &DMatrix<f64>) -> Result<RelaxedSolution> {
    let m = s.len();
    if h.nrows() != m || h.ncols() != m {
        return Err(Error::InvalidArgument("s and H dimensions differ".into()));
    }
    if m > MAX_ENUMERATION_TX {
        return Err(Error::TooManyTransmitters {
            got: m,
            max: MAX_ENUMERATION_TX,
        });
    }
    let mut best: Option<(f64, DVector<f64>, Vec<usize>, f64)> = None;
    let mut tried = 0;
    for support in supports(m, MAX_SUPPORT.min(m)) {
        tried += 1;
        for (u, lambda) in support_candidates(s, h, &support) {
            let Some(value) = ratio(s, h, &u) else { continue };
            if best.as_ref().map_or(true, |(b, ..)| value < *b) {
                let z = &u * value;
                let residual = stationarity(s, h, &z, &support, lambda);
                best = Some((value, z, support.clone(), residual));
            }
        }
    }
    let (objective, z, support, kkt_residual) = best.ok_or(Error::InfeasibleRelaxation { target: 0 })?;
    Ok(RelaxedSolution {
        z: z.iter().copied().collect(),
        objective,
        support,
        supports_tried: tried,
        kkt_residual,
    })
}

/// `s^T u / u^T H u` at a simplex point, `None` when the denominator is
/// not positive.
fn ratio(s: &DVector<f64>, h: &DMatrix<f64>, u: &DVector<f64>) -> Option<f64> {
    let den = u.dot(&(h * u));
    let num = s.dot(u);
    (den > 0.0 && num.is_finite()).then(|| num / den).filter(|v| *v > 0.0 && v.is_finite())
}

fn stationarity(s: &DVector<f64>, h: &DMatrix<f64>, z: &DVector<f64>, support: &[usize], lambda: f64) -> f64 {
    let hz = h * z;
    support
        .iter()
        .map(|&i| (1.0 + lambda * (s[i] - 2.0 * hz[i])).abs())
        .fold(0.0, f64::max)
}

/// All nonempty index subsets of `0..m` with at most `max_len` elements.
fn supports(m: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << m) {
        if mask.count_ones() as usize <= max_len {
            out.push((0..m).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Stationary points of `1^T z` on `s^T z = z^T H z` restricted to `support`,
/// returned as simplex points with positive entries on the support, paired
/// with their multiplier `lambda`.
///
/// Stationarity reads `2 lambda H_S z = 1 + lambda s_S`. With `mu = 1/lambda`
/// and `H_S` invertible, `z = H_S^{-1}(s + mu 1)/2` and activity forces
/// `mu^2 = s^T H_S^{-1} s / 1^T H_S^{-1} 1`. On singular blocks every null
/// vector `n` fixes `mu = -n^T s / n^T 1`, and the null-space component of `z`
/// follows from the (linear) activity equation.
fn support_candidates(s: &DVector<f64>, h: &DMatrix<f64>, support: &[usize]) -> Vec<(DVector<f64>, f64)> {
    let m = s.len();
    let k = support.len();
    let hs = DMatrix::from_fn(k, k, |i, j| h[(support[i], support[j])]);
    let ss = DVector::from_fn(k, |i, _| s[support[i]]);
    let ones = DVector::from_element(k, 1.0);
    let norm = hs.amax();
    if !(norm > 0.0) {
        return Vec::new();
    }
    let eig = symmetric_eigen(&hs / norm);
    let cutoff = RANK_TOL * eig.eigenvalues.amax();
    let (range, null): (Vec<usize>, Vec<usize>) =
        (0..k).partition(|&i| eig.eigenvalues[i].abs() > cutoff);
    let v = &eig.eigenvectors;
    // pseudo-inverse applied to a vector, in original units
    let pinv = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(k);
        for &i in &range {
            let col = v.column(i);
            out += col * (col.dot(x) / (eig.eigenvalues[i] * norm));
        }
        out
    };

    let mut local = Vec::new();
    // mu from the null directions that see the constant vector
    let mut null_mu = None;
    for &i in &null {
        let n = v.column(i);
        let (ns, n1) = (n.dot(&ss), n.dot(&ones));
        if n1.abs() > 1e-12 {
            let cand = -ns / n1;
            match null_mu {
                None => null_mu = Some(cand),
                Some(prev) if (prev - cand).abs() > 1e-9 * f64::max(prev.abs(), cand.abs()) => {
                    return Vec::new();
                }
                _ => {}
            }
        } else if ns.abs() > 1e-12 * ss.norm() {
            return Vec::new();
        }
    }
    match null_mu {
        None => {
            let hs_s = pinv(&ss);
            let hs_1 = pinv(&ones);
            let ratio = ss.dot(&hs_s) / ones.dot(&hs_1);
            if ratio > 0.0 {
                let mu = ratio.sqrt();
                for mu in [mu, -mu] {
                    local.push(((&hs_s + &hs_1 * mu) * 0.5, 1.0 / mu));
                }
            }
        }
        Some(mu) if mu != 0.0 => {
            let base = pinv(&(&ss + &ones * mu)) * 0.5;
            // activity: s^T (base + N tau) = base^T H base, minimum-norm tau
            let gap = base.dot(&(&hs * &base)) - ss.dot(&base);
            let proj = DVector::from_fn(null.len(), |j, _| v.column(null[j]).dot(&ss));
            let pn = proj.norm_squared();
            if pn > 0.0 {
                let mut z = base;
                for (j, &i) in null.iter().enumerate() {
                    z += v.column(i) * (gap * proj[j] / pn);
                }
                local.push((z, 1.0 / mu));
            }
        }
        Some(_) => {}
    }

    local
        .into_iter()
        .filter_map(|(zs, lambda)| {
            if !zs.iter().all(|x| *x > 0.0 && x.is_finite()) {
                return None;
            }
            let total = zs.sum();
            let mut u = DVector::zeros(m);
            for (i, &idx) in support.iter().enumerate() {
                u[idx] = zs[i] / total;
            }
            Some((u, lambda))
        })
        .collect()
}

/// Optimality certificate for one canonical instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: ProblemKind,
    /// Lower bound on `1^T y` of the canonical problem.
    pub l_c: f64,
    /// Lower bound on the worst-case CRLB trace, in m^2.
    pub l_problem: f64,
    /// `(q, 1^T z'_q)` in original units.
    pub per_target_relaxed: Vec<(usize, f64)>,
    pub supports_tried: usize,
    pub max_kkt_residual: f64,
}

/// Bounds every target's relaxation and combines them into `L_c` and the
/// problem-level bound (`L_p`, `L_b` or `L_j`).
pub fn lower_bound(cp: &CanonicalProblem) -> Result<Certificate> {
    let kappa = cp.z_scale();
    let mut per_target = Vec::with_capacity(cp.n_targets());
    let mut tried = 0;
    let mut residual = 0.0f64;
    for (q, t) in cp.normalized_targets().iter().enumerate() {
        let sol = solve_single_constraint_global(&t.s, &t.h).map_err(|e| match e {
            Error::InfeasibleRelaxation { .. } => Error::InfeasibleRelaxation { target: q },
            other => other,
        })?;
        tried += sol.supports_tried;
        residual = residual.max(sol.kkt_residual);
        per_target.push((q, kappa * sol.objective));
    }
    let worst = per_target.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let k = cp.k() as f64;
    Ok(Certificate {
        kind: cp.kind(),
        l_c: worst.powf(1.0 / (k + 1.0)),
        l_problem: cp.cost_from_sum(1.0) * worst,
        per_target_relaxed: per_target,
        supports_tried: tried,
        max_kkt_residual: residual,
    })
}
