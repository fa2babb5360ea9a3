//! Command-line entry points: `run`, `compare`, `postprocess`, `validate`.
//!
//! Exit codes: 0 on success, 1 on configuration/validation errors, 2 on
//! runtime failures.

use clap::{Parser, Subcommand};
use heatopt::config::{parse_config, ParsedConfig};
use heatopt::driver;
use heatopt::metrics::IterationRecord;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "heatopt",
    about = "Topology optimization for steady-state heat conduction",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full design loop and write fields, metrics.csv and summary.txt
    Run {
        /// Configuration file
        config: PathBuf,
    },
    /// Run two configurations and report objective parity and cost
    Compare {
        /// Configuration of the run under test
        config_a: PathBuf,
        /// Configuration of the baseline run
        config_b: PathBuf,
    },
    /// Smooth an exported density field and re-solve on the result
    Postprocess {
        /// Configuration file describing the model
        config: PathBuf,
        /// Density field CSV (as written by `run`)
        field: PathBuf,
    },
    /// Parse and validate a configuration, then exit
    Validate {
        /// Configuration file
        config: PathBuf,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

fn load_config(path: &Path) -> Result<ParsedConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn progress(tag: &str) -> impl FnMut(&IterationRecord) + '_ {
    move |rec: &IterationRecord| {
        if rec.cycle % 10 == 0 {
            eprintln!(
                "[{tag}] cycle {:4}  objective {:.6e}  volume {:.4}  radius {:.3}  path {}",
                rec.cycle, rec.objective, rec.volume, rec.radius, rec.solver_path
            );
        }
    }
}

fn print_summary(tag: &str, s: &heatopt::Summary) {
    println!("{tag}cycles                = {}", s.cycles);
    println!("{tag}final objective       = {}", s.final_objective);
    println!("{tag}final volume          = {}", s.final_volume);
    println!("{tag}total V-cycles        = {}", s.total_vcycles);
    println!("{tag}total CG iterations   = {}", s.total_cg_iterations);
    println!("{tag}MGCG evaluations      = {}", s.mgcg_evaluations);
    println!("{tag}wall time             = {:.1} ms", s.total_wall_ms);
}

/// Runs one subcommand; returns the process exit code.
pub fn cli(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(_) => {
                println!("{}: OK", config.display());
                EXIT_OK
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                EXIT_VALIDATION
            }
        },
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return EXIT_VALIDATION;
                }
            };
            let outdir = cfg.output_dir.clone();
            match driver::execute_run(&cfg, &outdir, progress("run")) {
                Ok(artifacts) => {
                    print_summary("", &artifacts.summary);
                    if let Some(post) = &artifacts.post {
                        println!("smoothing level       = {}", post.level);
                        println!("smoothed volume       = {}", post.volume);
                        println!("objective before/after = {} / {}", post.objective_before, post.objective_after);
                    }
                    println!("outputs written to {}", outdir.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
        Command::Compare { config_a, config_b } => {
            let (cfg_a, cfg_b) = match (load_config(&config_a), load_config(&config_b)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(msg), _) | (_, Err(msg)) => {
                    eprintln!("error: {msg}");
                    return EXIT_VALIDATION;
                }
            };
            match driver::execute_compare(&cfg_a, &cfg_b, |tag, rec| {
                if rec.cycle % 25 == 0 {
                    eprintln!("[{tag}] cycle {:4}  objective {:.6e}", rec.cycle, rec.objective);
                }
            }) {
                Ok(report) => {
                    println!("run A ({}):", config_a.display());
                    print_summary("  ", &report.summary_a);
                    println!("run B ({}):", config_b.display());
                    print_summary("  ", &report.summary_b);
                    println!("relative objective difference = {:.6}", report.rel_objective_diff);
                    println!("vcycle ratio (A/B)            = {:.4}", report.vcycle_ratio);
                    println!("efficiency improvement        = {:.2}%", 100.0 * report.improvement_vcycles);
                    println!("wall time ratio (A/B)         = {:.4}", report.wall_ratio);
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
        Command::Postprocess { config, field } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return EXIT_VALIDATION;
                }
            };
            let outdir = cfg.output_dir.clone();
            match driver::execute_postprocess(&cfg, &field, &outdir) {
                Ok(report) => {
                    println!("smoothing level       = {}", report.level);
                    println!("smoothed volume       = {}", report.volume);
                    println!("objective before/after = {} / {}", report.objective_before, report.objective_after);
                    println!("outputs written to {}", outdir.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
    }
}
