//! Sequential convex approximation on the canonical problem
//!
//! ```text
//! minimize 1^T y   s.t.   g_q(y) = (a+b)^T y^(k+1) / (y^(k+1))^T H y^(k+1) <= 1,  y >= 0
//! ```
//!
//! with `k = 0` for power, `1` for bandwidth and `2` for joint allocation,
//! and the maps back to budgeted allocations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::{lower_bound, solve_single_constraint_global, Certificate, MAX_ENUMERATION_TX};
use crate::convex::{build_subproblem, QclpOptions, SplitTarget};
use crate::crlb::{build_all, max_trace_crlb, AllocationPair, CrlbComponents};
use crate::error::{Error, Result};
use crate::scenario::{Budgets, Scenario};

/// Which resource is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Power,
    Bandwidth,
    Joint,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Power, ProblemKind::Bandwidth, ProblemKind::Joint];

    /// Exponent of the canonical problem.
    pub fn k(self) -> u32 {
        match self {
            ProblemKind::Power => 0,
            ProblemKind::Bandwidth => 1,
            ProblemKind::Joint => 2,
        }
    }

    pub fn from_k(k: u32) -> Option<Self> {
        match k {
            0 => Some(ProblemKind::Power),
            1 => Some(ProblemKind::Bandwidth),
            2 => Some(ProblemKind::Joint),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Power => "power",
            ProblemKind::Bandwidth => "bandwidth",
            ProblemKind::Joint => "joint",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power" | "p" | "0" => Ok(ProblemKind::Power),
            "bandwidth" | "b" | "1" => Ok(ProblemKind::Bandwidth),
            "joint" | "j" | "2" => Ok(ProblemKind::Joint),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem kind `{other}` (expected power, bandwidth or joint)"
            ))),
        }
    }
}

/// One canonical instance.
///
/// Internally `s = a + b` and `H` are divided by common scales `sigma` and
/// `rho` so the solver works near unit magnitude; the canonical variable
/// then satisfies `y^(k+1) = kappa * zeta` with `kappa = sigma / rho`.
#[derive(Debug, Clone)]
pub struct CanonicalProblem {
    kind: ProblemKind,
    budgets: Budgets,
    components: Vec<CrlbComponents<f64>>,
    targets: Vec<SplitTarget>,
    kappa: f64,
}

impl CanonicalProblem {
    pub fn new(kind: ProblemKind, components: Vec<CrlbComponents<f64>>, budgets: Budgets) -> Result<Self> {
        budgets.validate()?;
        let m = components.first().map(|c| c.n_tx()).unwrap_or(0);
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one target and one transmitter".into()));
        }
        if components.iter().any(|c| c.n_tx() != m) {
            return Err(Error::InvalidArgument("components differ in transmitter count".into()));
        }
        let sums: Vec<Vec<f64>> = components.iter().map(|c| c.a_plus_b()).collect();
        let sigma = sums.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let rho = components.iter().fold(0.0f64, |acc, c| acc.max(c.h.amax()));
        if !(sigma > 0.0 && rho > 0.0 && sigma.is_finite() && rho.is_finite()) {
            return Err(Error::InfeasibleStart);
        }
        let targets = sums
            .into_iter()
            .zip(&components)
            .map(|(s, c)| SplitTarget::new(DVector::from_vec(s) / sigma, &c.h / rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(CanonicalProblem {
            kind,
            budgets,
            components,
            targets,
            kappa: sigma / rho,
        })
    }

    pub fn from_scenario(kind: ProblemKind, scenario: &Scenario<f64>, budgets: Budgets) -> Result<Self> {
        Self::new(kind, build_all(scenario)?, budgets)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn k(&self) -> u32 {
        self.kind.k()
    }

    pub fn budgets(&self) -> &Budgets {
        &self.budgets
    }

    /// `P` for power and joint allocation, `B` for bandwidth allocation.
    pub fn budget(&self) -> f64 {
        match self.kind {
            ProblemKind::Bandwidth => self.budgets.total_bandwidth,
            _ => self.budgets.total_power,
        }
    }

    pub fn components(&self) -> &[CrlbComponents<f64>] {
        &self.components
    }

    /// Normalized per-target data, `(a+b)/sigma` and `H/rho`.
    pub fn normalized_targets(&self) -> &[SplitTarget] {
        &self.targets
    }

    /// `kappa` with `y^(k+1) = kappa * zeta`.
    pub fn z_scale(&self) -> f64 {
        self.kappa
    }

    pub fn n_tx(&self) -> usize {
        self.components[0].n_tx()
    }

    pub fn n_targets(&self) -> usize {
        self.components.len()
    }

    fn y_scale(&self) -> f64 {
        self.kappa.powf(1.0 / (self.k() as f64 + 1.0))
    }

    /// Cost of the recovered allocation as a function of `1^T y'`:
    /// `S/(P w^2)`, `S^2/(p B^2)` or `S^3/(P B^2)`.
    pub fn cost_from_sum(&self, sum: f64) -> f64 {
        let b = &self.budgets;
        let pow = sum.powi(self.k() as i32 + 1);
        match self.kind {
            ProblemKind::Power => pow / (b.total_power * b.per_tx_bandwidth.powi(2)),
            ProblemKind::Bandwidth => pow / (b.per_tx_power * b.total_bandwidth.powi(2)),
            ProblemKind::Joint => pow / (b.total_power * b.total_bandwidth.powi(2)),
        }
    }

    /// Largest `g_q` over targets in normalized units; `None` when some
    /// denominator is not positive.
    fn max_g(&self, upsilon: &DVector<f64>) -> Option<f64> {
        let kp = self.k() as i32 + 1;
        let zeta = upsilon.map(|v| v.powi(kp));
        let mut worst = 0.0f64;
        for t in &self.targets {
            let den = zeta.dot(&(&t.h * &zeta));
            let num = t.s.dot(&zeta);
            if !(den > 0.0) || !num.is_finite() {
                return None;
            }
            worst = worst.max(num / den);
        }
        worst.is_finite().then_some(worst)
    }

    /// Scales `upsilon` so the worst constraint holds with equality.
    fn activate(&self, upsilon: &DVector<f64>) -> Option<DVector<f64>> {
        let g = self.max_g(upsilon)?;
        if !(g > 0.0) {
            return None;
        }
        Some(upsilon * g.powf(1.0 / (self.k() as f64 + 1.0)))
    }
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpcaOptions {
    /// Stop when the relative objective decrease falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// A transmitter is active when its share of the budget exceeds this.
    pub activity_threshold: f64,
    /// Extra runs after the uniform start; the best result is kept. Starts
    /// are taken first from the single-transmitter vertices, then from each
    /// target's relaxed minimizer, then at random. Sparse optima of the
    /// bandwidth and joint problems are often missed from the uniform start.
    pub restarts: usize,
    pub restart_seed: u64,
    /// Attach a lower-bound certificate (needs at most 12 transmitters).
    pub certify: bool,
    pub qclp: QclpOptions,
}

impl Default for SpcaOptions {
    fn default() -> Self {
        SpcaOptions {
            tolerance: 1e-6,
            max_iterations: 200,
            activity_threshold: 1e-4,
            restarts: 0,
            restart_seed: 0,
            certify: true,
            qclp: QclpOptions::default(),
        }
    }
}

/// Canonical solution in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSolution {
    pub y: Vec<f64>,
    /// `1^T y` after every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    pub newton_steps: usize,
    /// Set when a subproblem failed and the best iterate so far was returned.
    pub warning: Option<String>,
}

impl CanonicalSolution {
    pub fn objective(&self) -> f64 {
        self.y.iter().sum()
    }
}

/// Runs the outer loop from the scaled uniform point (and from random
/// points when restarts are requested).
pub fn solve_canonical(cp: &CanonicalProblem, opts: &SpcaOptions) -> Result<CanonicalSolution> {
    let m = cp.n_tx();
    let start = cp
        .activate(&DVector::from_element(m, 1.0))
        .ok_or(Error::InfeasibleStart)?;
    let mut best = run_from(cp, start, opts)?;
    if opts.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.restart_seed);
        let mut structured = structured_starts(cp).into_iter();
        for _ in 0..opts.restarts {
            let point = structured
                .next()
                .unwrap_or_else(|| DVector::from_fn(m, |_, _| -(1.0 - rng.gen::<f64>()).ln()));
            let Some(point) = cp.activate(&point) else {
                continue;
            };
            if let Ok(run) = run_from(cp, point, opts) {
                if run.objective() < best.objective() {
                    best = run;
                }
            }
        }
    }
    Ok(best)
}

/// Vertices `e_m`, then `z_q^(1/(k+1))` for each target's relaxed minimizer
/// when the enumeration is affordable.
fn structured_starts(cp: &CanonicalProblem) -> Vec<DVector<f64>> {
    let m = cp.n_tx();
    let mut starts: Vec<DVector<f64>> = (0..m)
        .map(|i| DVector::from_fn(m, |j, _| if i == j { 1.0 } else { 0.0 }))
        .collect();
    if m <= MAX_ENUMERATION_TX {
        let root = 1.0 / (cp.k() as f64 + 1.0);
        for t in &cp.targets {
            if let Ok(relaxed) = solve_single_constraint_global(&t.s, &t.h) {
                starts.push(DVector::from_iterator(m, relaxed.z.iter().map(|v| v.max(0.0).powf(root))));
            }
        }
    }
    starts
}

fn run_from(cp: &CanonicalProblem, start: DVector<f64>, opts: &SpcaOptions) -> Result<CanonicalSolution> {
    let k = cp.k();
    let kp = k as i32 + 1;
    let scale = cp.y_scale();
    let mut y = start;
    let mut trace = vec![scale * y.sum()];
    let mut warning = None;
    let mut newton_steps = 0;

    for _ in 0..opts.max_iterations {
        let floor = 1e-14 * y.max();
        if y.iter().any(|v| *v < floor) {
            let floored = y.map(|v| v.max(floor));
            match cp.activate(&floored) {
                Some(f) if f.sum() <= y.sum() * (1.0 + 1e-12) => y = f,
                _ => break,
            }
        }
        let z = y.map(|v| v.powi(kp));
        let sub = build_subproblem(&cp.targets, k, &y, &z)?;
        let sol = match sub.solve(&opts.qclp) {
            Ok(sol) => sol,
            Err(e) if e.is_numerical() => {
                warning = Some(format!("subproblem failed, returning best iterate: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        newton_steps += sol.newton_steps;
        let root = sol.z.map(|v| v.max(0.0).powf(1.0 / kp as f64));
        let Some(next) = cp.activate(&root) else {
            warning = Some("subproblem returned a point with a singular target".into());
            break;
        };
        let (old, new) = (y.sum(), next.sum());
        if !(new <= old) {
            break;
        }
        y = next;
        trace.push(scale * new);
        if (old - new) / old < opts.tolerance {
            break;
        }
    }

    let y = prune(cp, y, opts.activity_threshold, &mut trace, scale);
    Ok(CanonicalSolution {
        y: (y * scale).iter().copied().collect(),
        trace,
        newton_steps,
        warning,
    })
}

/// Zeroes entries whose share is at most `threshold` when that does not
/// increase the objective. Interior-point iterates keep inactive entries
/// slightly positive, and the root `z^(1/(k+1))` inflates them.
fn prune(
    cp: &CanonicalProblem,
    y: DVector<f64>,
    threshold: f64,
    trace: &mut Vec<f64>,
    scale: f64,
) -> DVector<f64> {
    let total = y.sum();
    if !y.iter().any(|v| *v > 0.0 && *v <= threshold * total) {
        return y;
    }
    let cut = y.map(|v| if v <= threshold * total { 0.0 } else { v });
    match cp.activate(&cut) {
        Some(p) if p.sum() <= total => {
            trace.push(scale * p.sum());
            p
        }
        _ => y,
    }
}

/// Maps a canonical solution to powers and bandwidths.
pub fn recover_allocation(y: &[f64], cp: &CanonicalProblem) -> Result<AllocationPair<f64>> {
    if y.len() != cp.n_tx() {
        return Err(Error::InvalidArgument("canonical vector has wrong length".into()));
    }
    let sum: f64 = y.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::DegenerateSolution { sum });
    }
    let b = cp.budgets();
    let m = y.len();
    let share = |total: f64| y.iter().map(|v| total * v / sum).collect::<Vec<_>>();
    let (power, bandwidth) = match cp.kind() {
        ProblemKind::Power => (share(b.total_power), vec![b.per_tx_bandwidth; m]),
        ProblemKind::Bandwidth => (vec![b.per_tx_power; m], share(b.total_bandwidth)),
        ProblemKind::Joint => (share(b.total_power), share(b.total_bandwidth)),
    };
    AllocationPair::new(power, bandwidth)
}

/// Everything a single allocation run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub kind: ProblemKind,
    pub allocation: AllocationPair<f64>,
    pub canonical_y: Vec<f64>,
    /// Worst-case CRLB trace of `allocation`, in m^2.
    pub achieved_cost: f64,
    /// Cost after every accepted iterate, in m^2.
    pub iterations: Vec<f64>,
    pub active_set: Vec<usize>,
    pub certificate: Option<Certificate>,
    /// `achieved_cost / lower_bound`.
    pub certificate_gap: Option<f64>,
    pub warning: Option<String>,
}

/// Solves the canonical problem for `kind` and recovers the allocation.
pub fn allocate(
    kind: ProblemKind,
    components: &[CrlbComponents<f64>],
    budgets: &Budgets,
    opts: &SpcaOptions,
) -> Result<AllocationResult> {
    let cp = CanonicalProblem::new(kind, components.to_vec(), *budgets)?;
    allocate_canonical(&cp, opts)
}

pub fn allocate_scenario(
    kind: ProblemKind,
    scenario: &Scenario<f64>,
    budgets: &Budgets,
    opts: &SpcaOptions,
) -> Result<AllocationResult> {
    allocate(kind, &build_all(scenario)?, budgets, opts)
}

pub fn allocate_canonical(cp: &CanonicalProblem, opts: &SpcaOptions) -> Result<AllocationResult> {
    let sol = solve_canonical(cp, opts)?;
    let allocation = recover_allocation(&sol.y, cp)?;
    let (achieved_cost, _) = max_trace_crlb(cp.components(), &allocation)?;
    let sum = sol.objective();
    let active_set = sol
        .y
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > opts.activity_threshold * sum)
        .map(|(i, _)| i)
        .collect();
    let certificate = if opts.certify && cp.n_tx() <= MAX_ENUMERATION_TX {
        Some(lower_bound(cp)?)
    } else {
        None
    };
    let certificate_gap = certificate.as_ref().map(|c| achieved_cost / c.l_problem);
    Ok(AllocationResult {
        kind: cp.kind(),
        allocation,
        canonical_y: sol.y.clone(),
        achieved_cost,
        iterations: sol.trace.iter().map(|s| cp.cost_from_sum(*s)).collect(),
        active_set,
        certificate,
        certificate_gap,
        warning: sol.warning,
    })
}

/// Worst-case CRLB trace of the even split of both budgets.
pub fn uniform_cost(components: &[CrlbComponents<f64>], budgets: &Budgets) -> Result<f64> {
    let m = components
        .first()
        .map(|c| c.n_tx())
        .ok_or_else(|| Error::InvalidArgument("no targets".into()))?;
    let alloc = AllocationPair::uniform(m, budgets.total_power, budgets.total_bandwidth);
    Ok(max_trace_crlb(components, &alloc)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crlb::{max_unified_cost, trace_crlb};
    use crate::scenario::{random_scenario, LayoutDistribution, Point2D, PhysConst};
    use num_complex::Complex;

    fn scalar_components(s: f64, h: f64) -> CrlbComponents<f64> {
        // a = s/2 = b and c chosen so that a b - c^2 = h
        let a = s / 2.0;
        let c = (a * a - h).sqrt();
        CrlbComponents::from_vectors(vec![a], vec![a], vec![c], 1.0)
    }

    fn seeded(seed: u64) -> Vec<CrlbComponents<f64>> {
        build_all(&random_scenario(&LayoutDistribution::default(), seed).unwrap()).unwrap()
    }

    fn budgets() -> Budgets {
        Budgets::even(10.0, 3e6, 5)
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("joint".parse::<ProblemKind>().unwrap(), ProblemKind::Joint);
        assert_eq!("Power".parse::<ProblemKind>().unwrap(), ProblemKind::Power);
        assert_eq!("1".parse::<ProblemKind>().unwrap(), ProblemKind::Bandwidth);
        assert!("both".parse::<ProblemKind>().is_err());
        assert_eq!(ProblemKind::from_k(3), None);
    }

    #[test]
    fn scalar_canonical_solution() {
        let comp = scalar_components(4.0, 3.0);
        let cp = CanonicalProblem::new(ProblemKind::Power, vec![comp], Budgets::even(1.0, 1.0, 1)).unwrap();
        let sol = solve_canonical(&cp, &SpcaOptions::default()).unwrap();
        assert!((sol.y[0] - 4.0 / 3.0).abs() < 1e-12, "{}", sol.y[0]);
    }

    #[test]
    fn mirror_geometry_gives_equal_entries() {
        let consts = PhysConst::standard();
        let s = Scenario::new(
            consts,
            vec![Point2D::new(-3000.0, 0.0), Point2D::new(3000.0, 0.0)],
            vec![Point2D::new(-1000.0, 4000.0), Point2D::new(1000.0, 4000.0)],
            vec![Point2D::new(0.0, 2000.0)],
            vec![Complex::new(1.0, 0.0); 4],
        )
        .unwrap();
        for kind in ProblemKind::ALL {
            let cp = CanonicalProblem::from_scenario(kind, &s, Budgets::even(2.0, 2e6, 2)).unwrap();
            let sol = solve_canonical(&cp, &SpcaOptions::default()).unwrap();
            assert!((sol.y[0] - sol.y[1]).abs() <= 1e-6 * sol.y[0], "{kind}: {:?}", sol.y);
        }
    }

    #[test]
    fn recovery_examples() {
        let comps = seeded(1);
        let comps2: Vec<_> = comps
            .iter()
            .map(|c| CrlbComponents::from_vectors(c.a[..2].to_vec(), c.b[..2].to_vec(), c.c[..2].to_vec(), c.eta))
            .collect();
        let b = Budgets::even(8.0, 3e6, 2);
        let cp = CanonicalProblem::new(ProblemKind::Power, comps2.clone(), b).unwrap();
        let pair = recover_allocation(&[1.0, 3.0], &cp).unwrap();
        assert_eq!(pair.power, vec![2.0, 6.0]);
        assert_eq!(pair.bandwidth, vec![1.5e6, 1.5e6]);

        let cp = CanonicalProblem::new(ProblemKind::Joint, comps2.clone(), b).unwrap();
        let pair = recover_allocation(&[1.0, 3.0], &cp).unwrap();
        assert_eq!(pair.power, vec![2.0, 6.0]);
        assert_eq!(pair.bandwidth, vec![0.75e6, 2.25e6]);

        let cp = CanonicalProblem::new(ProblemKind::Bandwidth, comps2, b).unwrap();
        let pair = recover_allocation(&[1.0, 3.0], &cp).unwrap();
        assert_eq!(pair.power, vec![4.0, 4.0]);
        assert_eq!(pair.bandwidth, vec![0.75e6, 2.25e6]);

        assert!(matches!(
            recover_allocation(&[0.0, 0.0], &cp),
            Err(Error::DegenerateSolution { .. })
        ));
    }

    #[test]
    fn single_transmitter_gets_whole_budget() {
        let s = Scenario::new(
            PhysConst::standard(),
            vec![Point2D::new(0.0, 0.0)],
            vec![Point2D::new(5000.0, 0.0), Point2D::new(0.0, 5000.0)],
            vec![Point2D::new(2000.0, 2000.0)],
            vec![Complex::new(1.0, 0.5); 2],
        )
        .unwrap();
        let b = Budgets::even(3.0, 2e6, 1);
        let res = allocate_scenario(ProblemKind::Power, &s, &b, &SpcaOptions::default()).unwrap();
        assert!((res.allocation.power[0] - 3.0).abs() < 1e-12);
        assert_eq!(res.active_set, vec![0]);
    }

    #[test]
    fn result_invariants_on_seeded_instance() {
        let comps = seeded(11);
        let b = budgets();
        for kind in ProblemKind::ALL {
            let res = allocate(kind, &comps, &b, &SpcaOptions::default()).unwrap();
            let p: f64 = res.allocation.power.iter().sum();
            let w: f64 = res.allocation.bandwidth.iter().sum();
            assert!((p - b.total_power).abs() <= 1e-9 * b.total_power);
            assert!((w - b.total_bandwidth).abs() <= 1e-9 * b.total_bandwidth);
            let (g, _) = max_unified_cost(&comps, &res.canonical_y, kind.k()).unwrap();
            assert!((g - 1.0).abs() <= 1e-6, "{kind}: {g}");
            for pair in res.iterations.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
            }
            let uniform = uniform_cost(&comps, &b).unwrap();
            assert!(res.achieved_cost <= uniform * (1.0 + 1e-9));
            let gap = res.certificate_gap.unwrap();
            assert!(gap >= 1.0 - 1e-9, "{kind}: gap {gap}");
            let expected = cp_cost(kind, &comps, &b, &res.canonical_y);
            assert!((res.achieved_cost - expected).abs() <= 1e-9 * expected);
        }
    }

    fn cp_cost(kind: ProblemKind, comps: &[CrlbComponents<f64>], b: &Budgets, y: &[f64]) -> f64 {
        let cp = CanonicalProblem::new(kind, comps.to_vec(), *b).unwrap();
        cp.cost_from_sum(y.iter().sum())
    }

    #[test]
    fn bandwidth_cost_scales_with_power_and_bandwidth() {
        let comps = seeded(5);
        let base = Budgets::even(10.0, 3e6, 5);
        let c0 = allocate(ProblemKind::Bandwidth, &comps, &base, &SpcaOptions::default()).unwrap();
        let scaled = Budgets::even(20.0, 6e6, 5);
        let c1 = allocate(ProblemKind::Bandwidth, &comps, &scaled, &SpcaOptions::default()).unwrap();
        let ratio = c0.achieved_cost / c1.achieved_cost;
        assert!((ratio - 8.0).abs() <= 1e-9 * 8.0, "{ratio}");
    }

    #[test]
    fn joint_allocation_is_colinear() {
        let comps = seeded(3);
        let b = budgets();
        let res = allocate(ProblemKind::Joint, &comps, &b, &SpcaOptions::default()).unwrap();
        let ratio = b.total_bandwidth / b.total_power;
        for (p, w) in res.allocation.power.iter().zip(&res.allocation.bandwidth) {
            assert!((w - ratio * p).abs() <= 1e-9 * w.max(1.0));
        }
    }

    #[test]
    fn sampled_feasible_allocations_do_no_better() {
        let comps = seeded(8);
        let b = budgets();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in ProblemKind::ALL {
            let res = allocate(kind, &comps, &b, &SpcaOptions::default()).unwrap();
            for _ in 0..1000 {
                let raw: Vec<f64> = (0..5).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let sum: f64 = raw.iter().sum();
                let share: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                let pair = match kind {
                    ProblemKind::Power => AllocationPair::new(
                        share.iter().map(|s| s * b.total_power).collect(),
                        vec![b.per_tx_bandwidth; 5],
                    ),
                    ProblemKind::Bandwidth => AllocationPair::new(
                        vec![b.per_tx_power; 5],
                        share.iter().map(|s| s * b.total_bandwidth).collect(),
                    ),
                    ProblemKind::Joint => {
                        let raw2: Vec<f64> = (0..5).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                        let sum2: f64 = raw2.iter().sum();
                        AllocationPair::new(
                            share.iter().map(|s| s * b.total_power).collect(),
                            raw2.iter().map(|v| v / sum2 * b.total_bandwidth).collect(),
                        )
                    }
                }
                .unwrap();
                let cost = comps
                    .iter()
                    .map(|c| trace_crlb(c, &pair).unwrap_or(f64::INFINITY))
                    .fold(0.0, f64::max);
                assert!(res.achieved_cost <= cost * (1.0 + 1e-9), "{kind}");
            }
        }
    }

    #[test]
    fn active_set_survives_budget_scaling() {
        let comps = seeded(21);
        for kind in ProblemKind::ALL {
            let a = allocate(kind, &comps, &Budgets::even(10.0, 3e6, 5), &SpcaOptions::default()).unwrap();
            let b = allocate(kind, &comps, &Budgets::even(1000.0, 3e6, 5), &SpcaOptions::default()).unwrap();
            assert_eq!(a.active_set, b.active_set, "{kind}");
        }
    }

    #[test]
    fn restarts_never_hurt() {
        let comps = seeded(13);
        let b = budgets();
        let plain = allocate(ProblemKind::Joint, &comps, &b, &SpcaOptions::default()).unwrap();
        let opts = SpcaOptions {
            restarts: 3,
            restart_seed: 5,
            ..SpcaOptions::default()
        };
        let multi = allocate(ProblemKind::Joint, &comps, &b, &opts).unwrap();
        assert!(multi.achieved_cost <= plain.achieved_cost * (1.0 + 1e-12));
    }

    #[test]
    fn vertex_restart_escapes_interior_local_minimum() {
        // two transmitters, one target: the uniform start settles near the
        // middle while the optimum uses transmitter 0 alone
        let layout = crate::scenario::LayoutDistribution {
            n_tx: 2,
            n_targets: 1,
            ..Default::default()
        };
        let comps = build_all(&crate::scenario::random_scenario(&layout, 5012).unwrap()).unwrap();
        let b = Budgets::even(10.0, 3e6, 2);
        let plain = allocate(ProblemKind::Bandwidth, &comps, &b, &SpcaOptions::default()).unwrap();
        let opts = SpcaOptions {
            restarts: 3,
            ..SpcaOptions::default()
        };
        let multi = allocate(ProblemKind::Bandwidth, &comps, &b, &opts).unwrap();
        assert!(multi.achieved_cost < 0.9 * plain.achieved_cost);
        assert_eq!(multi.active_set, vec![0]);
    }

    #[test]
    fn result_round_trips_through_json() {
        let res = allocate(ProblemKind::Joint, &seeded(2), &budgets(), &SpcaOptions::default()).unwrap();
        let text = serde_json::to_string(&res).unwrap();
        let back: AllocationResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, res);
    }
}
