use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nemsched::config::load_valid_config;
use nemsched::export::{write_boundaries, write_results, write_thresholds, write_traces, write_values};
use nemsched::model::Period;
use nemsched::scenario::{read_scenario, ScenarioModel};
use nemsched::sim::{monte_carlo, BenchmarkResult, BenchmarkSpec, Planner, PolicyKind};
use nemsched::value::{delta_boundaries, ValueModel};
use nemsched::{Error, HouseholdConfig};

/// Threshold policies for EV charging, flexible loads and home storage
/// under net metering.
#[derive(Parser)]
#[command(name = "nemsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a household config against the price chain and parameter ranges.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the threshold table and write thresholds, value functions and Δ boundaries as CSV.
    Thresholds(ThresholdArgs),
    /// Monte-Carlo comparison of policies against the oracle.
    Benchmark(BenchmarkArgs),
    /// Per-interval traces of sampled episodes.
    Trace(TraceArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// y-grid spacing; defaults to v̄/50.
    #[arg(long)]
    grid_spacing: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Myopic,
    StorageFree,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Plug-in hour; defaults to the first connection hour of the scenario.
    #[arg(long)]
    hour: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Myopic)]
    model: ModelArg,
    /// Remaining demand for the Δ-boundary rows; defaults to the config's initial demand.
    #[arg(long)]
    y: Option<f64>,
    /// State of charge for the Δ-boundary rows; defaults to the initial SoC.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    /// Episodes for MPC, which re-solves an optimization at every interval.
    #[arg(long, default_value_t = 200)]
    mpc_runs: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5")]
    scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "mo,cco,nco,pr,mpc")]
    policies: Vec<PolicyKind>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exit with status 1 unless the MO gap lies in [0, 10%] at every scale.
    #[arg(long)]
    paper_band_check: bool,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of episodes, starting at index 0.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_delimiter = ',', default_value = "mo")]
    policies: Vec<PolicyKind>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Exit status 1 for domain failures, 2 for I/O and usage problems.
enum Failure {
    Domain(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Csv { .. } | Error::ConfigParse { .. } => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Thresholds(args) => thresholds(&args),
        Command::Benchmark(args) => benchmark(&args),
        Command::Trace(args) => trace(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn validate(path: &Path) -> CmdResult {
    let (_, report) = load_valid_config(path)?;
    print!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(Failure::Domain(format!("{} violation(s) in {}", report.violations.len(), path.display())))
    }
}

fn load(inputs: &Inputs) -> Result<(HouseholdConfig, ScenarioModel), Failure> {
    let (config, report) = load_valid_config(&inputs.config)?;
    if !report.is_ok() {
        eprint!("{report}");
        return Err(Failure::Domain(format!("invalid config {}", inputs.config.display())));
    }
    let scenario = read_scenario(&inputs.scenario)?;
    Ok((config, scenario))
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))
}

fn thresholds(args: &ThresholdArgs) -> CmdResult {
    let (config, scenario) = load(&args.inputs)?;
    let hour = args.hour.unwrap_or(scenario.connection_hours[0]);
    if !scenario.connection_hours.contains(&hour) {
        return Err(Failure::Domain(format!("hour {hour} is not a connection hour of the scenario")));
    }
    let (model, policy) = match args.model {
        ModelArg::Myopic => (ValueModel::Myopic, PolicyKind::Mo),
        ModelArg::StorageFree => (ValueModel::StorageFree, PolicyKind::Cco),
    };
    let planner = Planner::build(&config, &scenario, args.scale, &[policy], args.inputs.grid_spacing)?;
    let tables = planner.tables(hour, model).expect("built for this model");
    let cfg = &tables.config;
    let v_max = cfg.ev.max_rate;

    println!("hour {hour}, scale {}, grid spacing {}", args.scale, tables.spacing());
    println!("{:>3} {:>8} {:>10} {:>10} {:>10} {:>10} {:>14}", "t", "period", "tau", "sigma+", "sigma-", "delta", "tau_t-tau_t+1");
    let rows = &tables.thresholds.rows;
    for (k, r) in rows.iter().enumerate() {
        let period = match cfg.tariff.period(r.t) {
            Period::OffPeak1 => "off1",
            Period::OnPeak => "on",
            Period::OffPeak2 => "off2",
        };
        let step = rows
            .get(k + 1)
            .filter(|n| cfg.tariff.period(n.t) == cfg.tariff.period(r.t))
            .map(|n| format!("{:.4}", r.tau - n.tau))
            .unwrap_or_else(|| "-".into());
        println!("{:>3} {:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>14}", r.t, period, r.tau, r.sigma_plus, r.sigma_minus, r.delta, step);
    }
    println!("v̄ = {v_max}");
    for flag in &tables.thresholds.flags {
        println!("ordering: {flag}");
    }

    let y = args.y.unwrap_or(config.normalized().ev.initial_demand);
    let s = args.s.unwrap_or(cfg.storage.initial_soc);
    let bounds = match model {
        ValueModel::Myopic => nemsched::model::effective_storage_bounds(s, &cfg.storage),
        ValueModel::StorageFree => (0.0, 0.0),
    };
    let boundaries: Vec<_> = rows.iter().map(|r| (r.t, y, s, delta_boundaries(cfg, cfg.tariff.prices(r.t), y, bounds, r))).collect();

    out_dir(&args.out)?;
    write_thresholds(args.out.join("thresholds.csv"), &tables.thresholds)?;
    write_values(args.out.join("values.csv"), tables)?;
    write_boundaries(args.out.join("boundaries.csv"), &boundaries)?;
    Ok(())
}

fn benchmark(args: &BenchmarkArgs) -> CmdResult {
    let (config, scenario) = load(&args.inputs)?;
    if args.scales.is_empty() || args.policies.is_empty() {
        return Err(Failure::Domain("need at least one scale and one policy".into()));
    }
    let spec = BenchmarkSpec {
        policies: args.policies.clone(),
        n_runs: args.runs,
        seed: args.seed,
        run_overrides: vec![(PolicyKind::Mpc, args.mpc_runs.min(args.runs))],
    };
    let mut results: Vec<BenchmarkResult> = Vec::new();
    let mut failures = Vec::new();
    for &scale in &args.scales {
        let planner = Planner::build(&config, &scenario, scale, &args.policies, args.inputs.grid_spacing)?;
        for outcome in monte_carlo(&planner, &spec)? {
            match outcome {
                Ok(r) => results.push(r),
                Err(e) => {
                    eprintln!("scale {scale}: {e}");
                    failures.push(e.to_string());
                }
            }
        }
    }

    out_dir(&args.out)?;
    write_results(args.out.join("results.csv"), &results)?;
    print_gap_table(&results, &args.scales, &args.policies);

    if !failures.is_empty() {
        return Err(Failure::Domain(format!("{} policy run(s) failed", failures.len())));
    }
    if args.paper_band_check {
        let mo: Vec<_> = results.iter().filter(|r| r.policy == PolicyKind::Mo).collect();
        if mo.is_empty() {
            return Err(Failure::Domain("--paper-band-check needs mo among the policies".into()));
        }
        let outside: Vec<_> = mo.iter().filter(|r| !(0.0..=0.10).contains(&r.gap_to_oracle)).collect();
        if !outside.is_empty() {
            let list: Vec<_> = outside.iter().map(|r| format!("scale {}: {:.4}", r.renewable_scale, r.gap_to_oracle)).collect();
            return Err(Failure::Domain(format!("MO gap outside [0, 0.10]: {}", list.join(", "))));
        }
        println!("MO gap within [0, 10%] at every scale");
    }
    Ok(())
}

fn print_gap_table(results: &[BenchmarkResult], scales: &[f64], policies: &[PolicyKind]) {
    print!("{:>8}", "policy");
    for s in scales {
        print!(" {:>12}", format!("scale {s}"));
    }
    println!();
    for &p in policies {
        print!("{:>8}", p.name());
        for &s in scales {
            match results.iter().find(|r| r.policy == p && r.renewable_scale == s) {
                Some(r) => print!(" {:>11.3}%", 100.0 * r.gap_to_oracle),
                None => print!(" {:>12}", "failed"),
            }
        }
        println!();
    }
}

fn trace(args: &TraceArgs) -> CmdResult {
    let (config, scenario) = load(&args.inputs)?;
    let planner = Planner::build(&config, &scenario, args.scale, &args.policies, args.inputs.grid_spacing)?;
    out_dir(&args.out)?;
    for &policy in &args.policies {
        let mut traces = Vec::with_capacity(args.runs);
        for episode in 0..args.runs {
            let real = planner.sample(args.seed, episode as u64);
            let tr = planner.run(policy, &real).map_err(|e| match e {
                Error::Episode { policy, t, reason, .. } => {
                    Failure::Domain(format!("policy `{policy}` failed in episode {episode}, t={t}: {reason}"))
                }
                other => other.into(),
            })?;
            traces.push((episode, tr));
        }
        let total: f64 = traces.iter().map(|(_, t)| t.surplus).sum();
        println!("{}: mean surplus {:.4} over {} episode(s)", policy.name(), total / args.runs.max(1) as f64, args.runs);
        write_traces(args.out.join(format!("trace_{}.csv", policy.name())), &traces)?;
    }
    Ok(())
}
