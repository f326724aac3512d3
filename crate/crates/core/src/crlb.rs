//! Per-target CRLB algebra.
//!
//! For target `q` the trace of the localization CRLB under powers `p` and
//! effective bandwidths `w` is
//!
//! ```text
//! T_q = (a + b)^T u / (u^T H u),   u = diag(w)^2 p,
//! H   = (a b^T + b a^T) / 2 - c c^T
//! ```
//!
//! where `a`, `b`, `c` collect the x-x, y-y and x-y direction cosine products
//! of every path through the target, weighted by pathloss and gain. The
//! denominator is the determinant of the 2x2 Fisher information, so it is
//! nonnegative for any nonnegative `u`.

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::Scenario;

/// Denominators at or below this are treated as an unlocalizable target.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + DeserializeOwned")]
pub struct CrlbComponents<T: Real> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub h: DMatrix<T>,
    pub eta: T,
}

/// One transmitter-target-receiver path as seen from the target: the
/// transmitter index, the weight `alpha |h|^2` and the summed direction
/// cosines towards the transmitter and the receiver.
#[derive(Debug, Clone, Copy)]
pub struct PathTerm<T> {
    pub tx: usize,
    pub weight: T,
    pub cos_x: T,
    pub cos_y: T,
}

impl<T: Real> CrlbComponents<T> {
    /// Accumulates `a`, `b`, `c` from path terms and assembles `H`.
    pub fn from_paths<I>(n_tx: usize, eta: T, paths: I) -> Self
    where
        I: IntoIterator<Item = PathTerm<T>>,
    {
        let mut a = vec![T::zero(); n_tx];
        let mut b = vec![T::zero(); n_tx];
        let mut c = vec![T::zero(); n_tx];
        for p in paths {
            a[p.tx] += p.weight * p.cos_x * p.cos_x;
            b[p.tx] += p.weight * p.cos_y * p.cos_y;
            c[p.tx] += p.weight * p.cos_x * p.cos_y;
        }
        for v in a.iter_mut().chain(b.iter_mut()).chain(c.iter_mut()) {
            *v *= eta;
        }
        Self::from_vectors(a, b, c, eta)
    }

    /// Components from already scaled `a`, `b`, `c`.
    pub fn from_vectors(a: Vec<T>, b: Vec<T>, c: Vec<T>, eta: T) -> Self {
        let m = a.len();
        assert!(b.len() == m && c.len() == m, "a, b, c must have equal length");
        let half = T::lit(0.5);
        let h = DMatrix::from_fn(m, m, |i, j| half * a[i] * b[j] + half * b[i] * a[j] - c[i] * c[j]);
        CrlbComponents { a, b, c, h, eta }
    }

    pub fn n_tx(&self) -> usize {
        self.a.len()
    }

    /// `a + b`, the numerator weights.
    pub fn a_plus_b(&self) -> Vec<T> {
        self.a.iter().zip(&self.b).map(|(&a, &b)| a + b).collect()
    }

    fn ratio(&self, u: &[T]) -> Result<T> {
        let m = self.n_tx();
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..m {
            num += (self.a[i] + self.b[i]) * u[i];
            let mut row = T::zero();
            for j in 0..m {
                row += self.h[(i, j)] * u[j];
            }
            den += u[i] * row;
        }
        if !(den > T::lit(DENOMINATOR_FLOOR)) || !num.is_finite() {
            return Err(Error::SingularGeometry { target: None });
        }
        Ok(num / den)
    }
}

/// Builds the CRLB components of target `q`.
pub fn build_components<T: Real>(s: &Scenario<T>, q: usize) -> Result<CrlbComponents<T>> {
    if q >= s.n_targets() {
        return Err(Error::InvalidArgument(format!(
            "target index {q} out of range (Q = {})",
            s.n_targets()
        )));
    }
    let d = s.distances()?;
    let alpha = s.pathloss()?;
    let tar = s.targets()[q];
    let mut paths = Vec::with_capacity(s.n_tx() * s.n_rx());
    for (m, t) in s.transmitters().iter().enumerate() {
        let dt = d.tx(m, q);
        let (tx_cx, tx_cy) = ((t.x - tar.x) / dt, (t.y - tar.y) / dt);
        for (n, r) in s.receivers().iter().enumerate() {
            let dr = d.rx(q, n);
            paths.push(PathTerm {
                tx: m,
                weight: alpha.get(m, q, n) * s.gain(m, q, n).norm_sqr(),
                cos_x: tx_cx + (r.x - tar.x) / dr,
                cos_y: tx_cy + (r.y - tar.y) / dr,
            });
        }
    }
    Ok(CrlbComponents::from_paths(s.n_tx(), s.consts().eta(), paths))
}

/// Components of every target, in target order.
pub fn build_all<T: Real>(s: &Scenario<T>) -> Result<Vec<CrlbComponents<T>>> {
    (0..s.n_targets()).map(|q| build_components(s, q)).collect()
}

/// Power and effective bandwidth per transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + DeserializeOwned")]
pub struct AllocationPair<T: Real> {
    pub power: Vec<T>,
    pub bandwidth: Vec<T>,
}

impl<T: Real> AllocationPair<T> {
    pub fn new(power: Vec<T>, bandwidth: Vec<T>) -> Result<Self> {
        if power.len() != bandwidth.len() {
            return Err(Error::InvalidArgument(
                "power and bandwidth vectors differ in length".into(),
            ));
        }
        if !power.iter().chain(&bandwidth).all(|v| v.is_finite() && *v >= T::zero()) {
            return Err(Error::InvalidArgument(
                "allocations must be finite and nonnegative".into(),
            ));
        }
        Ok(AllocationPair { power, bandwidth })
    }

    /// Equal split of the totals.
    pub fn uniform(n_tx: usize, total_power: T, total_bandwidth: T) -> Self {
        let m = T::from_usize(n_tx).expect("transmitter count");
        AllocationPair {
            power: vec![total_power / m; n_tx],
            bandwidth: vec![total_bandwidth / m; n_tx],
        }
    }

    pub fn n_tx(&self) -> usize {
        self.power.len()
    }

    fn weights(&self) -> Vec<T> {
        self.power
            .iter()
            .zip(&self.bandwidth)
            .map(|(&p, &w)| w * w * p)
            .collect()
    }
}

/// Trace of the single-target CRLB, in m^2.
pub fn trace_crlb<T: Real>(comp: &CrlbComponents<T>, alloc: &AllocationPair<T>) -> Result<T> {
    check_len(comp, alloc.n_tx())?;
    comp.ratio(&alloc.weights())
}

/// `(a+b)^T y^(k+1) / (y^(k+1))^T H y^(k+1)`, powers taken elementwise.
pub fn unified_cost<T: Real>(comp: &CrlbComponents<T>, y: &[T], k: u32) -> Result<T> {
    check_len(comp, y.len())?;
    if y.iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::InvalidArgument("y must be nonnegative".into()));
    }
    let u: Vec<T> = y.iter().map(|v| v.powi(k as i32 + 1)).collect();
    comp.ratio(&u)
}

/// Worst-case CRLB trace over targets and its (lowest) attaining index.
pub fn max_trace_crlb<T: Real>(
    comps: &[CrlbComponents<T>],
    alloc: &AllocationPair<T>,
) -> Result<(T, usize)> {
    max_over(comps, |c| trace_crlb(c, alloc))
}

/// Worst-case unified cost over targets and its (lowest) attaining index.
pub fn max_unified_cost<T: Real>(
    comps: &[CrlbComponents<T>],
    y: &[T],
    k: u32,
) -> Result<(T, usize)> {
    max_over(comps, |c| unified_cost(c, y, k))
}

fn max_over<T: Real, F>(comps: &[CrlbComponents<T>], mut f: F) -> Result<(T, usize)>
where
    F: FnMut(&CrlbComponents<T>) -> Result<T>,
{
    if comps.is_empty() {
        return Err(Error::InvalidArgument("no targets".into()));
    }
    let mut best: Option<(T, usize)> = None;
    for (q, c) in comps.iter().enumerate() {
        let v = f(c).map_err(|e| e.at_target(q))?;
        if best.map_or(true, |(b, _)| v > b) {
            best = Some((v, q));
        }
    }
    Ok(best.expect("nonempty"))
}

fn check_len<T: Real>(comp: &CrlbComponents<T>, len: usize) -> Result<()> {
    if comp.n_tx() != len {
        return Err(Error::InvalidArgument(format!(
            "allocation has {len} entries, components have {}",
            comp.n_tx()
        )));
    }
    Ok(())
}
