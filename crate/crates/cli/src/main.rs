use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpkflow_core::io::emit_plot_data;
use fpkflow_core::par::init_threads;
use fpkflow_core::scenario::{bundled, bundled_names, run_scenario, run_scenario_file, RunOptions, RunReport, BUNDLED};
use fpkflow_core::Error;

#[derive(Parser)]
#[command(name = "fpkflow", version, about = "Solve, select and verify Fokker-Planck-Kolmogorov flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by name.
    Run {
        scenario: String,
        /// Output directory [default: fpkflow-out/<scenario name>].
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Overrides the scenario's enumeration seed.
        #[arg(long)]
        enumeration_seed: Option<u64>,
        /// Overrides the scenario's selection tie tolerance.
        #[arg(long)]
        tie_tol: Option<f64>,
    },
    /// Write long-format plot CSV for a curve, kernel, measure or Lyapunov artifact.
    Plot {
        artifact: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("FPKFLOW_THREADS").ok().and_then(|v| v.parse().ok());
    init_threads(threads);
    match cli.command {
        Command::Run { scenario, output, enumeration_seed, tie_tol } => run(&scenario, output, enumeration_seed, tie_tol),
        Command::Plot { artifact, output } => match emit_plot_data(&artifact, &output) {
            Ok(p) => {
                println!("{}", p.display());
                ExitCode::SUCCESS
            }
            Err(e) => input_error(&e),
        },
        Command::ListScenarios => {
            for (name, _) in BUNDLED {
                let desc = bundled(name).map(|s| s.description).unwrap_or_default();
                println!("{name:<24} {desc}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn run(scenario: &str, output: Option<PathBuf>, enumeration_seed: Option<u64>, tie_tol: Option<f64>) -> ExitCode {
    let path = Path::new(scenario);
    let mut opts = RunOptions { out_dir: None, enumeration_seed, tie_tol, ..RunOptions::default() };
    let result = if path.is_file() {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        opts.out_dir = Some(output.unwrap_or_else(|| default_out(name)));
        run_scenario_file(path, &opts)
    } else if bundled_names().contains(&scenario) {
        opts.out_dir = Some(output.unwrap_or_else(|| default_out(scenario)));
        bundled(scenario).and_then(|sc| run_scenario(&sc, Path::new("."), &opts))
    } else {
        Err(Error::Scenario(format!("`{scenario}` is neither a file nor a bundled scenario")))
    };
    match result {
        Ok(report) => {
            print_report(&report, opts.out_dir.as_deref());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => input_error(&e),
    }
}

fn default_out(name: &str) -> PathBuf {
    Path::new("fpkflow-out").join(name)
}

fn print_report(r: &RunReport, out: Option<&Path>) {
    println!("scenario {} ({}), config {}", r.scenario, r.coefficients, &r.config_hash[..16]);
    println!("selected {}", r.selection["label"]);
    for v in &r.verifications {
        println!("  {:<30} {}", v.name, if v.passed { "pass" } else { "FAIL" });
    }
    if let Some(dir) = out {
        println!("report written to {}", dir.join("report.json").display());
    }
}

fn input_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}
