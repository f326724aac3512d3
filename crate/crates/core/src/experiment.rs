//! Monte Carlo harness: seeded layouts, every allocation policy over an SNR
//! grid, CSV output and summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::lower_bound;
use crate::crlb::{build_all, max_trace_crlb, AllocationPair, CrlbComponents};
use crate::error::{Error, Result};
use crate::localization::{blue_estimate, max_position_error, standard_normals, toas_with_noise};
use crate::scenario::{path_pathloss, random_scenario, Budgets, LayoutDistribution, Point2D, Scenario};
use crate::spca::{recover_allocation, solve_canonical, CanonicalProblem, ProblemKind, SpcaOptions};

/// Fixed CSV header.
pub const CSV_HEADER: &str = "seed,policy,snr_db,cost,sqrt_cost,lower_bound,gap,active_tx,max_loc_err,wall_ms";

/// Allocation policy compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Uniform,
    Power,
    Bandwidth,
    Joint,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Uniform, Policy::Power, Policy::Bandwidth, Policy::Joint];

    pub fn kind(self) -> Option<ProblemKind> {
        match self {
            Policy::Uniform => None,
            Policy::Power => Some(ProblemKind::Power),
            Policy::Bandwidth => Some(ProblemKind::Bandwidth),
            Policy::Joint => Some(ProblemKind::Joint),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Uniform => "uniform",
            Policy::Power => "power",
            Policy::Bandwidth => "bandwidth",
            Policy::Joint => "joint",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Policy::Uniform),
            other => other.parse::<ProblemKind>().map(Policy::from).map_err(|_| {
                Error::InvalidArgument(format!(
                    "unknown policy `{other}` (expected uniform, power, bandwidth or joint)"
                ))
            }),
        }
    }
}

impl From<ProblemKind> for Policy {
    fn from(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Power => Policy::Power,
            ProblemKind::Bandwidth => Policy::Bandwidth,
            ProblemKind::Joint => Policy::Joint,
        }
    }
}

/// Monte Carlo configuration. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub layout: LayoutDistribution,
    /// Total bandwidth `B` in Hz.
    pub total_bandwidth: f64,
    /// Relative SNR grid in dB; each point scales the total power.
    pub snr_grid_db: Vec<f64>,
    /// Per-path post-integration SNR at the middle grid point, in dB, for a
    /// reference path with both legs half the area side long.
    pub reference_snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub policies: Vec<Policy>,
    /// Run the multilateration experiment for every record.
    pub localize: bool,
    /// Standard deviation in m of the target positions the optimizer sees.
    pub target_estimate_std: f64,
    /// Record wall time per allocation; off by default so output is reproducible.
    pub timing: bool,
    pub spca: SpcaOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            layout: LayoutDistribution::default(),
            total_bandwidth: 3e6,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            reference_snr_db: 15.0,
            trials: 100,
            seed: 0,
            policies: Policy::ALL.to_vec(),
            localize: true,
            target_estimate_std: 0.0,
            timing: false,
            spca: SpcaOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("SNR grid must be nonempty and finite".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidArgument("at least one policy required".into()));
        }
        if !(self.total_bandwidth > 0.0 && self.total_bandwidth.is_finite()) {
            return Err(Error::InvalidArgument("total bandwidth must be positive".into()));
        }
        if !(self.target_estimate_std >= 0.0) {
            return Err(Error::InvalidArgument("target estimate spread must be nonnegative".into()));
        }
        self.layout.consts.validate()
    }

    /// Middle of the grid (lower middle for even lengths).
    pub fn mid_snr_db(&self) -> f64 {
        let mut grid = self.snr_grid_db.clone();
        grid.sort_by(f64::total_cmp);
        grid[(grid.len() - 1) / 2]
    }

    /// Total power `P0` at the middle grid point: the reference path then
    /// has per-path SNR `p alpha E|h|^2 T_int / N0` equal to `reference_snr_db`
    /// with `p = P0 / M`.
    pub fn reference_power(&self) -> f64 {
        let l = &self.layout;
        let leg = l.area_side / 2.0;
        let alpha = path_pathloss(leg, leg, l.consts.carrier_freq);
        let snr = 10f64.powf(self.reference_snr_db / 10.0);
        l.n_tx as f64 * snr * l.consts.noise_psd / (alpha * l.gain_variance * l.consts.integration_time)
    }

    /// Total power at relative SNR `snr_db`.
    pub fn power_at(&self, snr_db: f64) -> f64 {
        self.reference_power() * 10f64.powf((snr_db - self.mid_snr_db()) / 10.0)
    }

    pub fn budgets_at(&self, snr_db: f64) -> Budgets {
        Budgets::even(self.power_at(snr_db), self.total_bandwidth, self.layout.n_tx)
    }
}

/// Seed of trial `index`: the `index`-th ChaCha stream under the master seed,
/// so every trial is reproducible independently of execution order.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    stream(master, index).next_u64()
}

fn stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub policy: Policy,
    pub snr_db: f64,
    /// Worst-case CRLB trace in m^2 after pulse integration, i.e. the single
    /// pulse bound divided by `f_r * T_int`.
    pub cost: f64,
    pub sqrt_cost: f64,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub active_tx: usize,
    pub max_loc_err: Option<f64>,
    pub wall_ms: f64,
}

/// A trial or record excluded from the output, with its reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub policy: Option<Policy>,
    pub reason: String,
    pub message: String,
}

/// Everything produced for one trial: the records plus extra data used by
/// checks that the CSV does not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<Failure>,
    /// Canonical objective trace per optimized policy.
    pub traces: Vec<(Policy, Vec<f64>)>,
    /// Integrated worst-case CRLB (m^2) at the true target positions, per
    /// record, in record order.
    pub integrated_crlb: Vec<f64>,
    /// Active transmitter indices per optimized policy.
    pub active_sets: Vec<(Policy, Vec<usize>)>,
}

/// Mean statistics of one `(policy, snr)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: Policy,
    pub snr_db: f64,
    pub count: usize,
    pub mean_cost: f64,
    pub mean_sqrt_cost: f64,
    pub mean_gap: Option<f64>,
    pub mean_max_loc_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    /// Failure counts keyed by reason.
    pub failures: BTreeMap<String, usize>,
    pub active_histogram: BTreeMap<Policy, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.outcomes.iter().flat_map(|o| o.records.iter())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Failure> {
        self.outcomes.iter().flat_map(|o| o.failures.iter())
    }
}

/// Runs every trial (in parallel) and streams rows to `csv_out` in trial
/// order.
pub fn run_experiment(cfg: &ExperimentConfig, csv_out: Option<&mut dyn Write>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut writer = csv_out.map(|w| csv::WriterBuilder::new().has_headers(false).from_writer(w));
    if let Some(w) = writer.as_mut() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(csv_error)?;
    }
    let chunk = (rayon::current_num_threads() * 4).max(1);
    let mut outcomes = Vec::with_capacity(cfg.trials);
    let indices: Vec<usize> = (0..cfg.trials).collect();
    for block in indices.chunks(chunk) {
        let done: Vec<TrialOutcome> = block.par_iter().map(|&i| run_trial(cfg, i)).collect();
        if let Some(w) = writer.as_mut() {
            for rec in done.iter().flat_map(|o| &o.records) {
                w.serialize(rec).map_err(csv_error)?;
            }
            w.flush()?;
        }
        outcomes.extend(done);
    }
    let records: Vec<&TrialRecord> = outcomes.iter().flat_map(|o| &o.records).collect();
    let failures: Vec<&Failure> = outcomes.iter().flat_map(|o| &o.failures).collect();
    let summary = Summary {
        cells: summarize(records.iter().copied(), &cfg.policies, &cfg.snr_grid_db),
        failures: count_failures(failures.into_iter()),
        active_histogram: active_histogram(records.iter().copied(), cfg.layout.n_tx),
    };
    Ok(ExperimentOutput { outcomes, summary })
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Runs trial `index` of `cfg` on its own.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> TrialOutcome {
    let mut rng = stream(cfg.seed, index as u64);
    let seed = rng.next_u64();
    let noise_seed = rng.next_u64();
    let estimate_seed = rng.next_u64();
    let mut out = TrialOutcome {
        index,
        seed,
        records: Vec::new(),
        failures: Vec::new(),
        traces: Vec::new(),
        integrated_crlb: Vec::new(),
        active_sets: Vec::new(),
    };
    let fail = |policy: Option<Policy>, e: &Error| Failure {
        seed,
        policy,
        reason: reason(e).to_string(),
        message: e.to_string(),
    };

    let prepared = random_scenario(&cfg.layout, seed).and_then(|truth| {
        let seen = perceived(&truth, cfg.target_estimate_std, estimate_seed)?;
        let comps = build_all(&seen)?;
        let true_comps = build_all(&truth)?;
        Ok((truth, comps, true_comps))
    });
    let (truth, comps, true_comps) = match prepared {
        Ok(v) => v,
        Err(e) => {
            out.failures.push(fail(None, &e));
            return out;
        }
    };
    let eps = standard_normals(&truth, noise_seed);
    let m = truth.n_tx();
    let pulses = truth.consts().pulses_integrated();

    // the joint bound is valid for every allocation with the same totals
    let joint_bound = lower_bound_at(ProblemKind::Joint, &comps, cfg, cfg.mid_snr_db());

    for &policy in &cfg.policies {
        let started = Instant::now();
        let plan = plan_policy(policy, &comps, cfg);
        let wall_ms = if cfg.timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                out.failures.push(fail(Some(policy), &e));
                continue;
            }
        };
        if let Some(trace) = &plan.trace {
            out.traces.push((policy, trace.clone()));
            out.active_sets.push((policy, plan.active.clone()));
        }
        let bound_mid = match policy {
            Policy::Uniform => joint_bound.as_ref().ok().copied(),
            _ => plan.bound_mid,
        };
        for &snr in &cfg.snr_grid_db {
            let factor = 10f64.powf((snr - cfg.mid_snr_db()) / 10.0);
            let alloc = plan.allocation_at(cfg, snr);
            // integrated over every pulse, comparable with localization errors
            let cost = match max_trace_crlb(&comps, &alloc) {
                Ok((c, _)) => c / pulses,
                Err(e) => {
                    out.failures.push(fail(Some(policy), &e));
                    continue;
                }
            };
            let lower = bound_mid.map(|b| b / factor / pulses);
            let max_loc_err = if cfg.localize {
                match localize(&truth, &alloc, &eps) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        out.failures.push(fail(Some(policy), &e));
                        None
                    }
                }
            } else {
                None
            };
            let crlb_true = max_trace_crlb(&true_comps, &alloc).map(|(c, _)| c / pulses).unwrap_or(f64::NAN);
            out.integrated_crlb.push(crlb_true);
            out.records.push(TrialRecord {
                seed,
                policy,
                snr_db: snr,
                cost,
                sqrt_cost: cost.sqrt(),
                lower_bound: lower,
                gap: lower.map(|l| cost / l),
                active_tx: if policy == Policy::Uniform { m } else { plan.active.len() },
                max_loc_err,
                wall_ms,
            });
        }
    }
    out
}

/// Scenario with target positions perturbed by isotropic Gaussian error.
fn perceived(truth: &Scenario<f64>, std: f64, seed: u64) -> Result<Scenario<f64>> {
    if std == 0.0 {
        return Ok(truth.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let targets = truth
        .targets()
        .iter()
        .map(|t| Point2D::new(t.x + normal.sample(&mut rng), t.y + normal.sample(&mut rng)))
        .collect();
    truth.with_targets(targets)
}

fn localize(truth: &Scenario<f64>, alloc: &AllocationPair<f64>, eps: &[f64]) -> Result<f64> {
    let obs = toas_with_noise(truth, alloc, eps)?;
    let est = blue_estimate(truth, &obs, truth.targets())?;
    let positions: Vec<_> = est.iter().map(|e| e.position).collect();
    Ok(max_position_error(&positions, truth.targets()))
}

fn lower_bound_at(kind: ProblemKind, comps: &[CrlbComponents<f64>], cfg: &ExperimentConfig, snr: f64) -> Result<f64> {
    let cp = CanonicalProblem::new(kind, comps.to_vec(), cfg.budgets_at(snr))?;
    Ok(lower_bound(&cp)?.l_problem)
}

/// Policy solved once at the middle grid point; the canonical solution does
/// not depend on the power level, so other grid points only rescale it.
struct PolicyPlan {
    kind: Option<ProblemKind>,
    canonical_y: Vec<f64>,
    active: Vec<usize>,
    trace: Option<Vec<f64>>,
    bound_mid: Option<f64>,
    comps: Vec<CrlbComponents<f64>>,
}

fn plan_policy(policy: Policy, comps: &[CrlbComponents<f64>], cfg: &ExperimentConfig) -> Result<PolicyPlan> {
    let m = comps[0].n_tx();
    let Some(kind) = policy.kind() else {
        return Ok(PolicyPlan {
            kind: None,
            canonical_y: vec![1.0; m],
            active: (0..m).collect(),
            trace: None,
            bound_mid: None,
            comps: comps.to_vec(),
        });
    };
    let cp = CanonicalProblem::new(kind, comps.to_vec(), cfg.budgets_at(cfg.mid_snr_db()))?;
    let sol = solve_canonical(&cp, &cfg.spca)?;
    let sum = sol.objective();
    let active = sol
        .y
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > cfg.spca.activity_threshold * sum)
        .map(|(i, _)| i)
        .collect();
    let bound_mid = if cfg.spca.certify {
        Some(lower_bound(&cp)?.l_problem)
    } else {
        None
    };
    Ok(PolicyPlan {
        kind: Some(kind),
        canonical_y: sol.y,
        active,
        trace: Some(sol.trace),
        bound_mid,
        comps: comps.to_vec(),
    })
}

impl PolicyPlan {
    fn allocation_at(&self, cfg: &ExperimentConfig, snr: f64) -> AllocationPair<f64> {
        let budgets = cfg.budgets_at(snr);
        match self.kind {
            None => AllocationPair::uniform(self.canonical_y.len(), budgets.total_power, budgets.total_bandwidth),
            Some(kind) => {
                let cp = CanonicalProblem::new(kind, self.comps.clone(), budgets)
                    .expect("components were accepted at the middle grid point");
                recover_allocation(&self.canonical_y, &cp).expect("canonical solution has a positive sum")
            }
        }
    }
}

fn reason(e: &Error) -> &'static str {
    match e {
        Error::InvalidScenario(_) => "invalid_scenario",
        Error::ZeroDistance { .. } => "zero_distance",
        Error::LayoutRejected { .. } => "layout_rejected",
        Error::SingularGeometry { .. } => "singular_geometry",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::InvalidPoint { .. } => "invalid_point",
        Error::Infeasible { .. } => "infeasible_subproblem",
        Error::NumericalStall { .. } => "numerical_stall",
        Error::InfeasibleStart => "infeasible_start",
        Error::DegenerateSolution { .. } => "degenerate_solution",
        Error::InfeasibleRelaxation { .. } => "infeasible_relaxation",
        Error::TooManyTransmitters { .. } => "too_many_transmitters",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn count_failures<'a>(failures: impl Iterator<Item = &'a Failure>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for f in failures {
        *counts.entry(f.reason.clone()).or_insert(0) += 1;
    }
    counts
}

/// Per-cell means in policy-then-grid order; empty cells are skipped.
pub fn summarize<'a>(
    records: impl Iterator<Item = &'a TrialRecord> + Clone,
    policies: &[Policy],
    grid: &[f64],
) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &policy in policies {
        for &snr in grid {
            let cell: Vec<&TrialRecord> = records
                .clone()
                .filter(|r| r.policy == policy && r.snr_db == snr)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let n = cell.len() as f64;
            let mean_opt = |f: &dyn Fn(&TrialRecord) -> Option<f64>| {
                let vals: Vec<f64> = cell.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            cells.push(CellSummary {
                policy,
                snr_db: snr,
                count: cell.len(),
                mean_cost: cell.iter().map(|r| r.cost).sum::<f64>() / n,
                mean_sqrt_cost: cell.iter().map(|r| r.sqrt_cost).sum::<f64>() / n,
                mean_gap: mean_opt(&|r| r.gap),
                mean_max_loc_err: mean_opt(&|r| r.max_loc_err),
            });
        }
    }
    cells
}

/// Relative frequency of active-transmitter counts `1..=m` per policy,
/// counting each `(seed, policy)` once.
pub fn active_histogram<'a>(records: impl Iterator<Item = &'a TrialRecord>, m: usize) -> BTreeMap<Policy, Vec<f64>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut counts: BTreeMap<Policy, Vec<usize>> = BTreeMap::new();
    for r in records {
        if !seen.insert((r.seed, r.policy)) {
            continue;
        }
        let bins = counts.entry(r.policy).or_insert_with(|| vec![0; m]);
        if (1..=m).contains(&r.active_tx) {
            bins[r.active_tx - 1] += 1;
        }
    }
    counts
        .into_iter()
        .map(|(p, bins)| {
            let total: usize = bins.iter().sum();
            let freq = bins
                .iter()
                .map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 })
                .collect();
            (p, freq)
        })
        .collect()
}

/// Python/matplotlib script that redraws the four figures from `csv_name`
/// (resolved next to the script).
pub fn plot_script(csv_name: &str) -> String {
    PLOT_TEMPLATE.replace("@CSV@", csv_name)
}

const PLOT_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Plots for a Monte Carlo run. Usage: python3 plot.py [results.csv]"""
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "@CSV@")
df = pd.read_csv(path)
order = [p for p in ["uniform", "power", "bandwidth", "joint"] if p in set(df.policy)]

fig, ax = plt.subplots()
for p in order:
    cell = df[df.policy == p].groupby("snr_db").sqrt_cost.mean()
    ax.semilogy(cell.index, cell.values, marker="o", label=p)
ax.set_xlabel("relative SNR [dB]")
ax.set_ylabel("mean sqrt(max CRLB) [m]")
ax.legend()
fig.savefig(os.path.join(here, "cost_vs_snr.png"), dpi=150)

if df.max_loc_err.notna().any():
    fig, ax = plt.subplots()
    for p in order:
        cell = df[df.policy == p].groupby("snr_db").max_loc_err.mean()
        ax.semilogy(cell.index, cell.values, marker="o", label=p)
    ax.set_xlabel("relative SNR [dB]")
    ax.set_ylabel("mean max localization error [m]")
    ax.legend()
    fig.savefig(os.path.join(here, "error_vs_snr.png"), dpi=150)

first = df.drop_duplicates(["seed", "policy"])
fig, ax = plt.subplots()
width = 0.8 / max(len(order), 1)
m = int(df.active_tx.max())
for i, p in enumerate(order):
    counts = first[first.policy == p].active_tx.value_counts(normalize=True)
    xs = [k + i * width for k in range(1, m + 1)]
    ax.bar(xs, [counts.get(k, 0.0) for k in range(1, m + 1)], width=width, label=p)
ax.set_xlabel("active transmitters")
ax.set_ylabel("relative frequency")
ax.legend()
fig.savefig(os.path.join(here, "active_tx.png"), dpi=150)

fig, ax = plt.subplots()
for p in order:
    cell = df[df.policy == p].groupby("snr_db")[["cost", "lower_bound"]].mean()
    line = ax.semilogy(cell.index, cell.cost, marker="o", label=f"{p} cost")
    ax.semilogy(cell.index, cell.lower_bound, ls="--", color=line[0].get_color(), label=f"{p} bound")
ax.set_xlabel("relative SNR [dB]")
ax.set_ylabel("max CRLB [m^2]")
ax.legend(fontsize="small")
fig.savefig(os.path.join(here, "bound_vs_cost.png"), dpi=150)
"#;
