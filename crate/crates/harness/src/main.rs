use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lmo_optim::config::{parse_flops, parse_theory};
use lmo_optim::reports::{flops_report, theory_report};
use lmo_optim::run::RunSummary;
use lmo_optim::sweep::{write_sweep_csv, CellOutcome};
use lmo_optim::{oracle_selfcheck, parse_config, run_sweep, run_training, ExecOrder, HarnessError, OracleOptions, TrainConfig};

#[derive(Parser)]
#[command(name = "lmo-optim", version, about = "Alternating spectral/sign optimizer experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "lmo-out")]
    out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write run.csv and summary.json.
    Run { config: PathBuf },
    /// Run a hyperparameter grid and write sweep.csv and best.json.
    Sweep { config: PathBuf },
    /// Write theory.json: constants, bound terms, optimal parameters, φ table.
    Theory { config: PathBuf },
    /// Write flops.json for the given model shapes.
    Flops { config: PathBuf },
    /// Run the kernel self-check battery.
    Oracle,
}

enum Outcome {
    Ok,
    RuntimeFailure(String),
    OracleFailure,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn summary_line(s: &RunSummary) -> String {
    format!(
        "{}: P={} best_loss={:.6e} final_loss={:.6e} flops={:.3e} ({:.2}s)",
        s.name, s.period, s.best_loss, s.final_loss, s.total_flops, s.wall_time_s
    )
}

fn execute(cli: &Cli) -> Result<Outcome, HarnessError> {
    let q = cli.quiet;
    match &cli.command {
        Command::Run { config } | Command::Sweep { config } => {
            let parsed = parse_config(config)?;
            ensure_dir(&cli.out)?;
            match parsed {
                TrainConfig::Run(mut spec) => {
                    if matches!(cli.command, Command::Sweep { .. }) {
                        return Err(HarnessError::Validation("sweep needs a config with `base` and `axes`".into()));
                    }
                    if let Some(s) = cli.seed {
                        spec.seed = s;
                    }
                    let csv = match &spec.output_path {
                        Some(p) => cli.out.join(p),
                        None => cli.out.join("run.csv"),
                    };
                    let rec = run_training(&spec, Some(&csv))?;
                    write_json(&cli.out.join("summary.json"), &rec.summary)?;
                    say(q, summary_line(&rec.summary));
                    say(q, format!("wrote {}", csv.display()));
                    Ok(match &rec.summary.failure {
                        Some(f) => Outcome::RuntimeFailure(format!("step {}: {}", f.step, f.message)),
                        None => Outcome::Ok,
                    })
                }
                TrainConfig::Sweep(mut spec) => {
                    if let Some(s) = cli.seed {
                        spec.base.seed = s;
                    }
                    let cells_dir = cli.out.join("cells");
                    ensure_dir(&cells_dir)?;
                    let result = run_sweep(&spec, Some(&cells_dir), ExecOrder::Parallel)?;
                    write_sweep_csv(&result, &cli.out.join("sweep.csv"))?;
                    let failed = result
                        .cells
                        .iter()
                        .filter(|c| c.best_loss().is_none())
                        .count();
                    match result.best {
                        Some(i) => {
                            let best = &result.cells[i];
                            write_json(&cli.out.join("best.json"), best)?;
                            if let CellOutcome::Ok(s) = &best.outcome {
                                say(q, format!("best cell {i}: {}", summary_line(s)));
                            }
                            say(q, format!("{} cells, {failed} failed", result.cells.len()));
                            Ok(Outcome::Ok)
                        }
                        None => Ok(Outcome::RuntimeFailure("every sweep cell failed".into())),
                    }
                }
            }
        }
        Command::Theory { config } => {
            let spec = parse_theory(config)?;
            let report = theory_report(&spec)?;
            ensure_dir(&cli.out)?;
            write_json(&cli.out.join("theory.json"), &report)?;
            say(
                q,
                format!(
                    "T = {}, beta2 = {}, eta_M = {:.3e}, eta_L = {:.3e}, P* = {} ({})",
                    report.optimal_params.t,
                    report.optimal_params.beta2,
                    report.optimal_params.eta_m,
                    report.optimal_params.eta_l,
                    report.phi.p_star,
                    report.case_label
                ),
            );
            Ok(Outcome::Ok)
        }
        Command::Flops { config } => {
            let spec = parse_flops(config)?;
            let report = flops_report(&spec)?;
            ensure_dir(&cli.out)?;
            write_json(&cli.out.join("flops.json"), &report)?;
            for s in &report.shapes {
                say(q, format!("{}: ns_share = {:.4}", s.name, s.ns_share));
            }
            Ok(Outcome::Ok)
        }
        Command::Oracle => {
            let mut opts = OracleOptions::default();
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            let report = oracle_selfcheck(&opts);
            say(q, report.to_text().trim_end());
            Ok(if report.passed() {
                Outcome::Ok
            } else {
                Outcome::OracleFailure
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::RuntimeFailure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Outcome::OracleFailure) => {
            eprintln!("error: oracle self-check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
