use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sdefl::run::{write_comparison, Phases};
use sdefl::scenario::BUILTIN;
use sdefl::{benchmark, execute, reproduce, run_scenario, CliError, Scenario};

#[derive(Parser)]
#[command(name = "sdefl", version, about = "Simulate, filter and calibrate stochastic differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenario's series and write it as CSV.
    Simulate(RunArgs),
    /// Track the latent state with the scenario's filter at the true parameters.
    Filter(RunArgs),
    /// Calibrate the scenario's model by its method's objective.
    Estimate(RunArgs),
    /// Time two calibrations of one series (median of repeated runs).
    Benchmark(BenchArgs),
    /// Run every shipped scenario, the robustness sweep and the timings.
    Reproduce(ReproduceArgs),
    /// Print the shipped scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Common {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root directory.
    #[arg(long, env = "SDEFL_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a shipped scenario.
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Two scenarios (repeat the flag); one alone is compared with itself.
    #[arg(long, required = true, num_args = 1)]
    scenario: Vec<String>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Run only this scenario instead of the whole suite.
    #[arg(long)]
    scenario: Option<String>,
    /// Benchmark repetitions; 0 skips the timings.
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[command(flatten)]
    common: Common,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => single(a, Some(Phases::SIMULATE)),
        Command::Filter(a) => single(a, Some(Phases::FILTER)),
        Command::Estimate(a) => single(a, Some(Phases::ESTIMATE)),
        Command::Benchmark(a) => {
            if a.scenario.len() > 2 {
                return Err(CliError::validation("benchmark compares at most two scenarios"));
            }
            let first = Scenario::load(&a.scenario[0])?.with_seed(a.common.seed);
            let second = match a.scenario.get(1) {
                Some(s) => Scenario::load(s)?.with_seed(a.common.seed),
                None => first.clone(),
            };
            let c = benchmark(&first, &second, a.repetitions)?;
            print!("{}", c.render());
            println!("wrote {}", write_comparison(&c, &a.common.out)?.display());
            Ok(())
        }
        Command::Reproduce(a) => match a.scenario {
            Some(s) => single(RunArgs { scenario: s, common: a.common }, None),
            None => {
                let rep = reproduce(&a.common.out, a.common.seed, a.repetitions)?;
                for r in rep.reports.iter().chain(&rep.table5) {
                    print!("{}", r.render());
                }
                for c in &rep.benchmarks {
                    print!("{}", c.render());
                }
                println!("wrote {}", a.common.out.display());
                Ok(())
            }
        },
        Command::ListScenarios => {
            for (name, _) in BUILTIN {
                let sc = Scenario::builtin(name).expect("shipped");
                println!("{name:<32} {:<8} {:<13} {}", sc.model().as_str(), sc.method.kind.as_str(), sc.description);
            }
            Ok(())
        }
    }
}

fn single(a: RunArgs, phases: Option<Phases>) -> Result<(), CliError> {
    let sc = Scenario::load(&a.scenario)?.with_seed(a.common.seed);
    let report = match phases {
        Some(p) => execute(&sc, p, Some(&a.common.out))?,
        None => run_scenario(&sc, &a.common.out)?,
    };
    print!("{}", report.render());
    for f in &report.artifacts {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
