use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use edasim::config::{load_config, PolicyKind, SimConfig};
use edasim::experiment::{compare_policies, sweep, SweepParam, SweepSpec};
use edasim::output::{
    compare_csv, compare_summary_text, fmt_num, ledger_csv, summary_csv, sweep_csv, sweep_svg, write_atomic,
};
use edasim::sim::Simulation;

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SIM: u8 = 3;

#[derive(Parser)]
#[command(name = "edasim", version, about = "Sensor network lifetime simulator with per-constituent energy ledgers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Random,
    Selective,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicySet {
    Random,
    Selective,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ParamArg {
    SensingRadius,
    TxRadius,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seed and write ledger.csv and summary.csv
    Run {
        /// JSON config file (required)
        #[arg(long)]
        config: PathBuf,
        /// Seed for deployment, events and policy draws
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Next-hop policy
        #[arg(long, value_enum, default_value = "selective")]
        policy: PolicyArg,
        /// Write the event trace to this file
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output directory (required)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both policies on matched seeds and write compare.csv and compare_summary.txt
    Compare {
        /// JSON config file (required)
        #[arg(long)]
        config: PathBuf,
        /// Matched seeds, counted up from experiment.base_seed
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
        seeds: u32,
        /// Output directory (required)
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one radius over a grid and write sweep.csv
    Sweep {
        /// JSON config file (required)
        #[arg(long)]
        config: PathBuf,
        /// Swept radius (required)
        #[arg(long, value_enum)]
        param: ParamArg,
        /// First grid value in meters (required)
        #[arg(long)]
        min: f64,
        /// Last grid value in meters (required)
        #[arg(long)]
        max: f64,
        /// Grid points, at least 2
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..))]
        steps: u32,
        /// Seeds per grid point
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        seeds: u32,
        /// Policies to run
        #[arg(long, value_enum, default_value = "both")]
        policy: PolicySet,
        /// Output directory (required)
        #[arg(long)]
        out: PathBuf,
        /// Also write sweep.svg
        #[arg(long, default_value_t = false)]
        svg: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn config_at(path: &Path) -> Result<SimConfig, Failure> {
    load_config(path).map_err(|e| fail(EXIT_CONFIG, e))
}

fn emit(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    write_atomic(&dir.join(name), contents.as_bytes())
        .map_err(|e| fail(EXIT_SIM, format!("writing {}: {e}", dir.join(name).display())))
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| fail(EXIT_SIM, format!("creating {}: {e}", dir.display())))
}

fn policy_kind(p: PolicyArg) -> PolicyKind {
    match p {
        PolicyArg::Random => PolicyKind::Random,
        PolicyArg::Selective => PolicyKind::Selective,
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            seed,
            policy,
            trace,
            out,
        } => {
            let cfg = config_at(&config)?.with_policy(policy_kind(policy));
            let sim = Simulation::new(&cfg, seed).map_err(|e| fail(EXIT_SIM, e))?;
            let (result, lines) = if trace.is_some() {
                let (r, lines) = sim.run_traced();
                (r, Some(lines))
            } else {
                (sim.run(), None)
            };
            prepare_out(&out)?;
            emit(&out, "ledger.csv", &ledger_csv(&result))?;
            emit(&out, "summary.csv", &summary_csv(&result))?;
            if let (Some(path), Some(lines)) = (trace, lines) {
                let mut text = lines.join("\n");
                text.push('\n');
                write_atomic(&path, text.as_bytes())
                    .map_err(|e| fail(EXIT_SIM, format!("writing {}: {e}", path.display())))?;
            }
            println!(
                "monitored node {} lifetime {} s{}",
                result.monitored_node,
                fmt_num(result.lifetime),
                if result.censored { " (censored)" } else { "" }
            );
        }
        Command::Compare { config, seeds, out } => {
            let cfg = config_at(&config)?;
            let report = compare_policies(&cfg, seeds, true).map_err(|e| fail(EXIT_SIM, e))?;
            prepare_out(&out)?;
            emit(&out, "compare.csv", &compare_csv(&report))?;
            let text = compare_summary_text(&report);
            emit(&out, "compare_summary.txt", &text)?;
            print!("{text}");
        }
        Command::Sweep {
            config,
            param,
            min,
            max,
            steps,
            seeds,
            policy,
            out,
            svg,
        } => {
            let spec = SweepSpec {
                param: match param {
                    ParamArg::SensingRadius => SweepParam::SensingRadius,
                    ParamArg::TxRadius => SweepParam::TxRadius,
                },
                min,
                max,
                steps,
                seeds,
            };
            spec.validate().map_err(|e| fail(EXIT_USAGE, e))?;
            let cfg = config_at(&config)?;
            let policies = match policy {
                PolicySet::Random => vec![PolicyKind::Random],
                PolicySet::Selective => vec![PolicyKind::Selective],
                PolicySet::Both => PolicyKind::ALL.to_vec(),
            };
            let outcome = sweep(&cfg, &spec, &policies, true).map_err(|e| fail(EXIT_SIM, e))?;
            prepare_out(&out)?;
            emit(&out, "sweep.csv", &sweep_csv(&outcome))?;
            if svg {
                emit(&out, "sweep.svg", &sweep_svg(&outcome))?;
            }
            for (p, _, value) in &outcome.argmax {
                println!("{} argmax {} = {}", p.name(), spec.param.name(), fmt_num(*value));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
