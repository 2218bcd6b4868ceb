use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use irs_pilot::allocation::{allocate, papr, AllocationProblem};
use irs_pilot::channel::{LinkStatistics, Position3D, ScenarioConfig};
use irs_pilot::estimation::{PilotAllocation, Strategy};
use irs_pilot::experiments::{
    builtin_experiment, manifest_path, run_to_file, ExperimentFile, ScenarioFile, BUILTIN_EXPERIMENTS,
};
use irs_pilot::montecarlo::{allocate_for, closed_form_bound, ergodic_rate, IrsMask, PhaseScheme};
use irs_pilot::units::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm};

/// Pilot power allocation and rate simulation for multi-IRS links.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate pilot power across IRSs and report the PAPR.
    Allocate(AllocateArgs),
    /// Closed-form average gain and ergodic rate bound.
    Capacity(LinkArgs),
    /// Monte Carlo ergodic rate next to its closed-form bound.
    Simulate(SimulateArgs),
    /// Run a built-in experiment or an experiment file and write CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in experiment whose base deployment and user are used.
    #[arg(long, conflicts_with = "scenario")]
    builtin: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// User position `x,y,z` in metres.
    #[arg(long, value_parser = parse_position, allow_hyphen_values = true)]
    user: Option<Position3D>,
    /// Elements per IRS, overriding the scenario.
    #[arg(long, value_delimiter = ',')]
    elements: Option<Vec<usize>>,
    /// Average pilot power (dBm), overriding the scenario.
    #[arg(long, allow_hyphen_values = true)]
    pilot_dbm: Option<f64>,
}

#[derive(Args)]
struct AllocateArgs {
    /// Cascaded channel powers β_k² in dB, bypassing the geometry.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["builtin", "scenario", "user"])]
    gain_db: Option<Vec<f64>>,
    /// BS noise power during estimation (dBm), with `--gain-db`.
    #[arg(long, default_value_t = -110.0, allow_hyphen_values = true)]
    noise_bs_dbm: f64,
    /// identical, simplified, refined, exact-numeric or all.
    #[arg(long, default_value = "all")]
    strategy: String,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Allocation strategy used for estimation.
    #[arg(long, default_value = "simplified")]
    strategy: Strategy,
    /// Phases from the true channel instead of estimates.
    #[arg(long, conflicts_with = "random_phase")]
    perfect_csi: bool,
    /// Uniformly random phases.
    #[arg(long)]
    random_phase: bool,
    /// IRSs left on, e.g. `101`. All on by default.
    #[arg(long)]
    mask: Option<IrsMask>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    link: LinkArgs,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 2021)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Built-in name or path to an experiment TOML file.
    experiment: String,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Print the resolved experiment as TOML and exit.
    #[arg(long)]
    dump_spec: bool,
}

fn parse_position(text: &str) -> std::result::Result<Position3D, String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Position3D::new(x, y, z).map_err(|e| e.to_string()),
        _ => Err(format!("expected x,y,z, got {text:?}")),
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<(ScenarioConfig, Position3D)> {
        let (mut scenario, default_user) = match (&self.builtin, &self.scenario) {
            (Some(name), None) => {
                let spec = builtin_experiment(name)?;
                (spec.scenario, Some(spec.user))
            }
            (None, Some(path)) => (ScenarioFile::load(path)?, None),
            _ => bail!("give --builtin <name> or --scenario <file>"),
        };
        if let Some(elements) = &self.elements {
            if elements.len() != scenario.irs.len() {
                bail!("--elements has {} entries for {} IRSs", elements.len(), scenario.irs.len());
            }
            for (irs, &m) in scenario.irs.iter_mut().zip(elements) {
                irs.elements = m;
            }
        }
        if let Some(dbm) = self.pilot_dbm {
            scenario.pilot_power = dbm_to_watts(dbm);
        }
        scenario.validate()?;
        let user = self
            .user
            .or(default_user)
            .context("--user is required with --scenario")?;
        Ok((scenario, user))
    }
}

fn strategies(text: &str) -> Result<Vec<Strategy>> {
    if text == "all" {
        return Ok(vec![
            Strategy::Identical,
            Strategy::Simplified,
            Strategy::Refined,
            Strategy::ExactNumeric,
        ]);
    }
    text.split(',').map(|s| Ok(s.trim().parse()?)).collect()
}

fn print_allocation(alloc: &PilotAllocation, problem: &AllocationProblem) {
    let report = papr(alloc, problem);
    println!("{}:", alloc.strategy());
    for (k, &p) in alloc.powers().iter().enumerate() {
        println!("  IRS {}: {:>9.3} dBm  {:.6e} W", k + 1, watts_to_dbm(p), p);
    }
    println!(
        "  PAPR {:.3} dB (bound {:.3} dB)",
        report.papr_db, report.upper_bound_db
    );
}

fn run_allocate(args: &AllocateArgs) -> Result<()> {
    let problem = match &args.gain_db {
        Some(gains) => {
            let elements = args
                .scenario
                .elements
                .clone()
                .unwrap_or_else(|| vec![1; gains.len()]);
            let stats = LinkStatistics::new(gains.iter().map(|&g| db_to_linear(g)).collect())?;
            let budget = dbm_to_watts(args.scenario.pilot_dbm.context("--pilot-dbm is required with --gain-db")?);
            AllocationProblem::from_stats(&stats, elements, budget, dbm_to_watts(args.noise_bs_dbm))?
        }
        None => {
            let (scenario, user) = args.scenario.resolve()?;
            let stats = irs_pilot::channel::link_statistics(&scenario, &user)?;
            AllocationProblem::from_stats(&stats, scenario.elements(), scenario.pilot_power, scenario.noise_bs)?
        }
    };
    let snr: Vec<String> = problem
        .estimation_snr()
        .iter()
        .map(|s| format!("{:.1}", linear_to_db(*s)))
        .collect();
    println!("estimation SNR per IRS (dB): {}", snr.join(", "));
    if !problem.is_moderate_snr() {
        println!("note: below the moderate-SNR regime the closed-form strategies are approximate");
    }
    for strategy in strategies(&args.strategy)? {
        match allocate(&problem, strategy) {
            Ok(alloc) => print_allocation(&alloc, &problem),
            Err(e) => println!("{strategy}: {e}"),
        }
    }
    Ok(())
}

fn link_setup(args: &LinkArgs) -> Result<(ScenarioConfig, Position3D, PhaseScheme, IrsMask)> {
    let (scenario, user) = args.scenario.resolve()?;
    let mask = args.mask.clone().unwrap_or_else(|| IrsMask::all_on(scenario.irs.len()));
    let scheme = if args.perfect_csi {
        PhaseScheme::PerfectCsi
    } else if args.random_phase {
        PhaseScheme::RandomPhase
    } else {
        allocate_for(&scenario, &user, &mask, args.strategy)?.into()
    };
    Ok((scenario, user, scheme, mask))
}

fn run_capacity(args: &LinkArgs) -> Result<()> {
    let (scenario, user, scheme, mask) = link_setup(args)?;
    let (gain, bound) = closed_form_bound(&scenario, &user, &scheme, &mask)?;
    println!("scheme {}, mask {mask}", scheme.label());
    println!("average gain {:.6e}", gain.total);
    println!("  diagonal   {:.6e}", gain.diagonal);
    println!("  intra-IRS  {:.6e}", gain.intra);
    println!("  inter-IRS  {:.6e}", gain.inter);
    println!("rate bound {bound:.4} b/s/Hz");
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let (scenario, user, scheme, mask) = link_setup(&args.link)?;
    let r = ergodic_rate(&scenario, &user, &scheme, &mask, args.trials, args.seed)?;
    println!("scheme {}, mask {mask}, {} trials, seed {}", r.scheme, r.n_trials, args.seed);
    if r.single_trial {
        println!("mean rate {:.4} b/s/Hz (single trial, no error estimate)", r.mean_rate);
    } else {
        println!("mean rate {:.4} ± {:.4} b/s/Hz", r.mean_rate, r.std_error);
    }
    println!("rate bound {:.4} b/s/Hz", r.closed_form_bound);
    println!(
        "mean gain {:.6e} ± {:.2e} (closed form {:.6e})",
        r.mean_gain, r.gain_std_error, r.expected_gain.total
    );
    Ok(())
}

fn run_experiment_command(args: &ExperimentArgs) -> Result<()> {
    let mut spec = if BUILTIN_EXPERIMENTS.contains(&args.experiment.as_str()) {
        builtin_experiment(&args.experiment)?
    } else {
        let path = PathBuf::from(&args.experiment);
        if !path.exists() {
            bail!(
                "{:?} is neither a file nor a built-in experiment ({})",
                args.experiment,
                BUILTIN_EXPERIMENTS.join(", ")
            );
        }
        ExperimentFile::load(&path)?
    };
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.n_trials = trials;
    }
    spec.validate()?;
    if args.dump_spec {
        print!("{}", ExperimentFile::emit(&spec)?);
        return Ok(());
    }
    let out = args
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.name)));
    let rows = run_to_file(&spec, &out)?;
    println!(
        "{} rows written to {} (manifest {})",
        rows.len(),
        out.display(),
        manifest_path(&out).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Allocate(a) => run_allocate(a),
        Command::Capacity(a) => run_capacity(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Experiment(a) => run_experiment_command(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
