use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcf_lab::cli::{self, Scenario};
use mcf_lab::Result;

#[derive(Parser)]
#[command(name = "mcf-lab", version, about = "Curves and patches under mean curvature flow with a potential force")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's, then out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write trace.csv, report.json and snapshots/.
    Simulate(Common),
    /// Finite-difference residuals of the geometric identities on a patch.
    VerifyIdentities(Common),
    /// Evaluate the existence hypotheses for the initial curve.
    Check(Common),
    /// Rerun the scenario for each value of one numeric field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted key path of the swept field, e.g. initial.shape.r.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Exact round-sphere solution under a radial potential.
    Radial(Common),
}

fn load(common: &Common) -> Result<(Scenario, PathBuf)> {
    let scenario = cli::parse_scenario(&common.scenario)?;
    let out = scenario.output_dir(common.out.as_deref());
    Ok((scenario, out))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Simulate(common) => {
            let (scenario, out) = load(common)?;
            let report = cli::simulate(&scenario, &out)?;
            println!(
                "{}: {} at t = {} (max |A|^2 = {:e}), outputs in {}",
                scenario.name,
                report.outcome.name(),
                report.headline.terminal_time,
                report.headline.max_max_a2,
                out.display()
            );
            Ok(report.exit_code)
        }
        Command::VerifyIdentities(common) => {
            let (scenario, out) = load(common)?;
            let report = cli::verify_identities(&scenario, &out)?;
            print_json(&report)?;
            Ok(cli::EXIT_OK)
        }
        Command::Check(common) => {
            let (scenario, out) = load(common)?;
            let report = cli::check(&scenario, &out)?;
            print_json(&report)?;
            Ok(report.exit_code)
        }
        Command::Sweep { common, axis, values } => {
            let text = std::fs::read_to_string(&common.scenario)?;
            let template: serde_json::Value = serde_json::from_str(&text)?;
            // the template itself must be a valid scenario
            let scenario = cli::parse_scenario_value(template.clone())?;
            let out = scenario.output_dir(common.out.as_deref());
            let values = cli::parse_values(values)?;
            let rows = cli::sweep_to_dir(&template, axis, &values, &out)?;
            for row in &rows {
                match &row.error {
                    Some(e) => eprintln!("{axis} = {}: {e}", row.value),
                    None => println!("{axis} = {}: {}", row.value, row.outcome),
                }
            }
            println!("wrote {}", out.join("sweep.csv").display());
            Ok(cli::EXIT_OK)
        }
        Command::Radial(common) => {
            let (scenario, out) = load(common)?;
            let (report, _) = cli::radial(&scenario, &out)?;
            print_json(&report)?;
            Ok(report.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match execute(&args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
