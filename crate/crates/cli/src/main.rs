//! `wheelleg`: synthesize gains, run scenarios, and check the acceptance
//! criteria.
//!
//! Exit codes: 0 success, 1 synthesis or I/O failure, 2 bad input,
//! 3 a run completed but missed its criteria, 4 the robot fell.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use wheelleg_core::lqr::{build_gain_schedule, GainSchedule};
use wheelleg_core::params::{load_params, ControllerGains, RobotParams};
use wheelleg_core::sim::{
    run_scenario, scenario_by_name, NoiseConfig, RunReport, SummaryPlacement, TrajectoryLog,
};
use wheelleg_core::verify::{run_all, CRITERIA};
use wheelleg_core::Error;

#[derive(Parser)]
#[command(name = "wheelleg", version, about)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the leg-length gain schedule and save it as TOML.
    Synthesize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted scenario and write its CSV log and report.
    Simulate(SimulateArgs),
    /// Re-judge a log written by `simulate`.
    Report { log: PathBuf },
    /// Run every acceptance criterion and print a table.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use this schedule instead of synthesizing one from the config.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Print the criteria without running them.
        #[arg(long)]
        list: bool,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the scenario length, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the scenario's sensor noise setting.
    #[arg(long)]
    noise: Option<Switch>,
    #[arg(long, value_enum, default_value_t = Placement::Sidecar)]
    summary: Placement,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Placement {
    /// `<scenario>.summary.txt` next to the CSV.
    Sidecar,
    /// `#` comment block at the end of the CSV.
    Comment,
}

/// An error together with the exit code it maps to.
struct Failure(u8, Error);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. }
            | Error::Validation { .. }
            | Error::Domain(_)
            | Error::Scenario(_)
            | Error::UnknownScenario { .. }
            | Error::Format { .. } => 2,
            _ => 1,
        };
        Failure(code, e)
    }
}

/// Errors while reading inputs are the caller's fault, whatever their kind.
fn bad_input(e: Error) -> Failure {
    Failure(2, e)
}

fn load_config(path: Option<&Path>) -> Result<(RobotParams, ControllerGains), Failure> {
    match path {
        Some(p) => load_params(p).map_err(bad_input),
        None => Ok(Default::default()),
    }
}

fn load_schedule(
    path: Option<&Path>,
    params: &RobotParams,
    gains: &ControllerGains,
) -> Result<GainSchedule, Failure> {
    match path {
        Some(p) => GainSchedule::load(p).map_err(bad_input),
        None => Ok(build_gain_schedule(params, gains, gains.n_grid)?),
    }
}

fn synthesize(config: Option<&Path>, out: &Path) -> Result<u8, Failure> {
    let (params, gains) = load_config(config)?;
    let schedule = build_gain_schedule(&params, &gains, gains.n_grid)?;
    schedule.save(out)?;
    println!(
        "wrote {} ({} leg lengths, {:.3}-{:.3} m)",
        out.display(),
        schedule.grid.len(),
        schedule.grid[0],
        schedule.grid[schedule.grid.len() - 1]
    );
    Ok(0)
}

fn simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let mut scenario = scenario_by_name(&args.scenario)?;
    let (params, gains) = load_config(args.config.as_deref())?;
    let schedule = load_schedule(args.schedule.as_deref(), &params, &gains)?;
    scenario.seed = args.seed;
    if let Some(d) = args.duration {
        scenario.duration = d;
    }
    match args.noise {
        Some(Switch::Off) => scenario.noise = NoiseConfig::off(),
        Some(Switch::On) => scenario.noise = NoiseConfig::default(),
        None => {}
    }
    scenario.validate()?;

    let start = Instant::now();
    let log = run_scenario(&scenario, &params, &gains, &schedule)?;
    let runtime = start.elapsed();

    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    let csv = args.out.join(format!("{}.csv", scenario.name));
    let placement = match args.summary {
        Placement::Sidecar => SummaryPlacement::Sidecar,
        Placement::Comment => SummaryPlacement::TrailingComment,
    };
    let mut artifacts = log.write(&csv, placement)?;
    let report_path = args.out.join(format!("{}.report.txt", scenario.name));
    artifacts.push(report_path.clone());
    let report = RunReport::new(&scenario, &log, artifacts, runtime);
    let text = report.render();
    wheelleg_core::io::write_atomic(&report_path, text.as_bytes())?;
    print!("{text}");
    Ok(report.outcome().exit_code())
}

fn report(path: &Path) -> Result<u8, Failure> {
    let log = TrajectoryLog::read(path).map_err(bad_input)?;
    let scenario = scenario_by_name(&log.scenario)?;
    let report = RunReport::new(&scenario, &log, Vec::new(), Default::default());
    print!("{}", report.render());
    Ok(report.outcome().exit_code())
}

fn verify(config: Option<&Path>, schedule: Option<&Path>, list: bool) -> Result<u8, Failure> {
    if list {
        for (id, name) in CRITERIA {
            println!("{id:>2} {name}");
        }
        return Ok(0);
    }
    let (params, gains) = load_config(config)?;
    let schedule = match schedule {
        Some(p) => Some(GainSchedule::load(p).map_err(bad_input)?),
        None => None,
    };
    let results = run_all(&params, &gains, schedule.as_ref());
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    Ok(if passed == results.len() { 0 } else { 3 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Synthesize { config, out } => synthesize(config.as_deref(), out),
        Command::Simulate(args) => simulate(args),
        Command::Report { log } => report(log),
        Command::Verify { config, schedule, list } => {
            verify(config.as_deref(), schedule.as_deref(), *list)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
