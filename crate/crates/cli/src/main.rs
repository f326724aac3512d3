//! `mimo-alloc`: worst-case CRLB resource allocation for non-coherent MIMO
//! radar networks.
//!
//! Exit status is 0 on success, 1 on usage or input errors and 2 when a
//! solve fails numerically or `validate` finds a violated invariant.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mimo_alloc::crlb::max_unified_cost;
use mimo_alloc::experiment::{plot_script, run_experiment, ExperimentConfig, Policy};
use mimo_alloc::spca::{allocate, uniform_cost, CanonicalProblem, ProblemKind, SpcaOptions};
use mimo_alloc::{build_all, lower_bound, random_scenario, Budgets, Error, LayoutDistribution, Scenario};

const SCENARIO_SCHEMA: &str = r#"Scenario JSON:
  {
    "consts": {"carrier_freq_hz": f, "speed_of_light_mps": f, "noise_psd_w_per_hz": f,
               "pulse_rep_freq_hz": f, "integration_time_s": f},
    "transmitters": [[x, y], ...],                    M entries, meters
    "receivers":    [[x, y], ...],                    N entries
    "targets":      [[x, y], ...],                    Q entries
    "gains": [[re, im], ...]                          M*Q*N entries, index (m*Q + q)*N + n
  }
`mimo-alloc scenario --seed 1` prints a valid example."#;

const CONFIG_SCHEMA: &str = r#"Monte Carlo config JSON (every field optional):
  {
    "layout": {"area_side": m, "n_tx": M, "n_rx": N, "n_targets": Q,
               "gain_variance": m^2, "min_separation": m, "consts": {...}},
    "total_bandwidth": Hz, "snr_grid_db": [dB, ...], "reference_snr_db": dB,
    "trials": n, "seed": n, "policies": ["uniform", "power", "bandwidth", "joint"],
    "localize": bool, "target_estimate_std": m, "timing": bool,
    "spca": {"tolerance": x, "max_iterations": n, "activity_threshold": x,
             "restarts": n, "restart_seed": n, "certify": bool, "qclp": {...}}
  }"#;

#[derive(Parser)]
#[command(name = "mimo-alloc", version, about = "Worst-case CRLB power and bandwidth allocation for MIMO radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate resources for one scenario and print the result as JSON.
    Allocate(SolveArgs),
    /// Print only the lower-bound certificate for one scenario.
    Bound(SolveArgs),
    /// Run the Monte Carlo harness; writes results.csv and plot.py.
    Montecarlo(MonteCarloArgs),
    /// Check the allocation invariants on one scenario for every problem kind.
    Validate(ValidateArgs),
    /// Print a random scenario drawn from the default layout distribution.
    Scenario(ScenarioArgs),
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Total power in W [default: the harness reference power for this M]
    #[arg(long)]
    power: Option<f64>,
    /// Total bandwidth in Hz
    #[arg(long, default_value_t = 3e6)]
    bandwidth: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem kind: power, bandwidth or joint
    #[arg(long, short = 'k', default_value = "joint")]
    k: ProblemKind,
    #[command(flatten)]
    budgets: BudgetArgs,
    /// Extra SPCA starts (vertices, relaxed minimizers, then random)
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    /// Scenario JSON file
    scenario: PathBuf,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Config JSON file; defaults apply when omitted
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of uniform,power,bandwidth,joint
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Record wall time per allocation (makes the CSV non-reproducible)
    #[arg(long)]
    timing: bool,
    /// Skip the multilateration experiment
    #[arg(long)]
    no_localize: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    budgets: BudgetArgs,
    scenario: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    transmitters: usize,
    #[arg(long, default_value_t = 5)]
    receivers: usize,
    #[arg(long, default_value_t = 4)]
    targets: usize,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) if inner.is_numerical() && !is_input_error(inner) => Failure::Numerical(e),
            _ => Failure::Usage(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

/// Scenario defects the user has to fix in the input file.
fn is_input_error(e: &Error) -> bool {
    matches!(e, Error::ZeroDistance { .. } | Error::NotSymmetric { .. } | Error::LayoutRejected { .. })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{SCENARIO_SCHEMA}\n\n{CONFIG_SCHEMA}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Error>().is_some_and(|inner| matches!(inner, Error::Json(_) | Error::InvalidScenario(_))) {
                eprintln!("\n{SCENARIO_SCHEMA}\n\n{CONFIG_SCHEMA}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Allocate(args) => cmd_allocate(&args),
        Command::Bound(args) => cmd_bound(&args),
        Command::Montecarlo(args) => cmd_montecarlo(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Scenario(args) => cmd_scenario(&args),
    }
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Scenario::from_json(&text)?)
}

fn budgets_for(args: &BudgetArgs, scenario: &Scenario) -> Result<Budgets, Failure> {
    let m = scenario.n_tx();
    let power = args.power.unwrap_or_else(|| {
        let mut cfg = ExperimentConfig::default();
        cfg.layout.n_tx = m;
        cfg.layout.consts = *scenario.consts();
        cfg.reference_power()
    });
    let budgets = Budgets::even(power, args.bandwidth, m);
    budgets.validate()?;
    Ok(budgets)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_allocate(args: &SolveArgs) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let budgets = budgets_for(&args.budgets, &scenario)?;
    let opts = SpcaOptions {
        restarts: args.restarts,
        certify: scenario.n_tx() <= mimo_alloc::certificate::MAX_ENUMERATION_TX,
        ..SpcaOptions::default()
    };
    let res = allocate(args.k, &build_all(&scenario)?, &budgets, &opts)?;
    if let Some(w) = &res.warning {
        eprintln!("warning: {w}");
    }
    print_json(&json!({
        "kind": res.kind,
        "total_power": budgets.total_power,
        "total_bandwidth": budgets.total_bandwidth,
        "p": res.allocation.power,
        "w": res.allocation.bandwidth,
        "cost": res.achieved_cost,
        "sqrt_cost": res.achieved_cost.sqrt(),
        // integrated over f_r * T_int pulses, the unit of the harness CSV
        "integrated_cost": res.achieved_cost / scenario.consts().pulses_integrated(),
        "active_set": res.active_set,
        "iterations": res.iterations,
        "certificate": res.certificate,
        "certificate_gap": res.certificate_gap,
        "warning": res.warning,
    }))?;
    Ok(())
}

fn cmd_bound(args: &SolveArgs) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let budgets = budgets_for(&args.budgets, &scenario)?;
    let cp = CanonicalProblem::new(args.k, build_all(&scenario)?, budgets)?;
    let cert = lower_bound(&cp)?;
    print_json(&serde_json::to_value(&cert).context("serializing certificate")?)?;
    Ok(())
}

fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(policies) = &args.policies {
        cfg.policies = policies.clone();
    }
    cfg.timing |= args.timing;
    cfg.localize &= !args.no_localize;
    cfg.validate()?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("results.csv");
    let mut csv = io::BufWriter::new(
        fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?,
    );
    let out = run_experiment(&cfg, Some(&mut csv))?;
    csv.flush().context("writing results.csv")?;
    fs::write(args.out.join("plot.py"), plot_script("results.csv")).context("writing plot.py")?;

    let mut stdout = io::stdout().lock();
    let w = &mut stdout;
    let write = |w: &mut io::StdoutLock, line: String| writeln!(w, "{line}").context("writing summary");
    write(w, format!("{:<10} {:>7} {:>14} {:>14} {:>10}", "policy", "snr_db", "mean_sqrt_m", "mean_err_m", "mean_gap"))?;
    for c in &out.summary.cells {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        write(
            w,
            format!(
                "{:<10} {:>7.1} {:>14.4} {:>14} {:>10}",
                c.policy.as_str(),
                c.snr_db,
                c.mean_sqrt_cost,
                opt(c.mean_max_loc_err, 4),
                opt(c.mean_gap, 3)
            ),
        )?;
    }
    for (p, freq) in &out.summary.active_histogram {
        let bins: Vec<String> = freq.iter().map(|f| format!("{f:.2}")).collect();
        write(w, format!("active tx {:<10} [{}]", p.as_str(), bins.join(" ")))?;
    }
    for (reason, count) in &out.summary.failures {
        write(w, format!("excluded {count} ({reason})"))?;
    }
    write(w, format!("wrote {}", csv_path.display()))?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let budgets = budgets_for(&args.budgets, &scenario)?;
    let comps = build_all(&scenario)?;
    let uniform = uniform_cost(&comps, &budgets)?;
    let mut failed = 0;
    let mut check = |name: String, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        failed += usize::from(!ok);
    };
    for kind in ProblemKind::ALL {
        let opts = SpcaOptions {
            certify: scenario.n_tx() <= mimo_alloc::certificate::MAX_ENUMERATION_TX,
            ..SpcaOptions::default()
        };
        let res = allocate(kind, &comps, &budgets, &opts)?;
        let p: f64 = res.allocation.power.iter().sum();
        let w: f64 = res.allocation.bandwidth.iter().sum();
        let residual = match kind {
            ProblemKind::Power => (p / budgets.total_power - 1.0).abs(),
            ProblemKind::Bandwidth => (w / budgets.total_bandwidth - 1.0).abs(),
            ProblemKind::Joint => (p / budgets.total_power - 1.0)
                .abs()
                .max((w / budgets.total_bandwidth - 1.0).abs()),
        };
        check(format!("{kind} budget"), residual <= 1e-9, format!("relative residual {residual:.2e}"));
        let (g, _) = max_unified_cost(&comps, &res.canonical_y, kind.k())?;
        check(format!("{kind} activity"), (g - 1.0).abs() <= 1e-6, format!("max g = {g:.9}"));
        let rises = res.iterations.windows(2).filter(|v| v[1] > v[0] * (1.0 + 1e-12)).count();
        check(format!("{kind} monotone"), rises == 0, format!("{} iterates, {rises} increases", res.iterations.len()));
        check(
            format!("{kind} vs uniform"),
            res.achieved_cost <= uniform * (1.0 + 1e-9),
            format!("cost {:.4e} m^2, uniform {uniform:.4e} m^2", res.achieved_cost),
        );
        if let Some(cert) = &res.certificate {
            check(
                format!("{kind} certificate"),
                cert.l_problem <= res.achieved_cost * (1.0 + 1e-9),
                format!("bound {:.4e} m^2, gap {:.4}", cert.l_problem, res.achieved_cost / cert.l_problem),
            );
        }
        if kind == ProblemKind::Joint {
            let ratio = budgets.total_bandwidth / budgets.total_power;
            let a = &res.allocation;
            let diff: f64 = a.bandwidth.iter().zip(&a.power).map(|(w, p)| (w - ratio * p).powi(2)).sum();
            let norm: f64 = a.bandwidth.iter().map(|w| w * w).sum();
            let rel = (diff / norm).sqrt();
            check("joint colinearity".into(), rel <= 1e-9, format!("||w - (B/P) p|| / ||w|| = {rel:.2e}"));
        }
    }
    if failed > 0 {
        return Err(Failure::Numerical(anyhow::anyhow!("{failed} invariant checks failed")));
    }
    Ok(())
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<(), Failure> {
    let layout = LayoutDistribution {
        n_tx: args.transmitters,
        n_rx: args.receivers,
        n_targets: args.targets,
        ..LayoutDistribution::default()
    };
    let scenario = random_scenario(&layout, args.seed)?;
    println!("{}", scenario.to_json()?);
    Ok(())
}
