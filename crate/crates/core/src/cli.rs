//! Command-line surface.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid
//! configuration or input, 3 numerical failure of the integrator.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::io::config::{load_config, RunConfig};
use crate::io::output::{
    write_atomic, write_moments, write_report, write_trajectory, VerificationReport,
};
use crate::io::pipeline::{
    convergence_study, oracle_compare, output_paths, run_and_write, verify_and_write,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "coagbreak",
    version,
    about = "Coagulation with collisional breakage: solver and estimate checks"
)]
struct Cli {
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for operator evaluation; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the random-field property sweeps
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate and write the trajectory and moment log
    Run { config: PathBuf },
    /// Integrate, run every enabled check and write a report
    Verify { config: PathBuf },
    /// Mass defect under joint (n, z_min, cells) refinement and mesh self-convergence
    ConvergenceStudy {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
    /// Constant-kernel run against the closed-form solution
    OracleCompare { config: Option<PathBuf> },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CheckFailed(_) => EXIT_CHECK_FAILED,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn print_report(report: &VerificationReport) {
    print!("{}", report.to_text());
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let traj = run_and_write(&cfg, out)?;
            let last = traj.moments.last().expect("moment log is never empty");
            println!(
                "t={} steps={} M0={:e} M1={:e} flux_out={:e}",
                last.t, traj.steps_accepted, last.m0, last.m1, last.flux_out
            );
            Ok(EXIT_OK)
        }
        Command::Verify { config } => {
            let cfg = load_config(&config)?;
            let report = verify_and_write(&cfg, out, cli.seed)?;
            print_report(&report);
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::ConvergenceStudy { config, levels } => {
            let cfg = load_config(&config)?;
            let study = convergence_study(&cfg, levels)?;
            let report = VerificationReport {
                fingerprint: cfg.fingerprint(),
                checks: vec![study.limit, study.table.report],
                ledger: None,
            };
            write_named_report(&cfg, out, "convergence.txt", &report)?;
            print_report(&report);
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::OracleCompare { config } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => RunConfig::default(),
            };
            let cmp = oracle_compare(&cfg)?;
            let (traj_path, moments_path, _, dir) = output_paths(&cfg, out);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_trajectory(&cmp.trajectory, &traj_path)?;
            write_moments(&cmp.trajectory, &moments_path)?;
            let report = VerificationReport {
                fingerprint: cfg.fingerprint(),
                checks: vec![cmp.report],
                ledger: None,
            };
            write_named_report(&cfg, out, "oracle.txt", &report)?;
            print_report(&report);
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
    }
}

fn write_named_report(
    cfg: &RunConfig,
    out: Option<&Path>,
    name: &str,
    report: &VerificationReport,
) -> Result<(), Error> {
    let (_, _, _, dir) = output_paths(cfg, out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    if name == cfg.output.report {
        write_report(report, &dir.join(name))
    } else {
        write_atomic(&dir.join(name), &report.to_text())
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_CONFIG,
            };
        }
    };
    let threads = cli.threads;
    let result = match threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return EXIT_CONFIG;
            }
        },
        None => dispatch(cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
