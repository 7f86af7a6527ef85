//! Command-line driver for the `fsreg` experiments.
//!
//! A run resolves its config (flags over config file over defaults),
//! validates it, computes every cell on a rayon pool of `--jobs` threads and
//! then writes all artifacts once into `<output_dir>/<subcommand>/<run_name>/`:
//! the CSV tables, `config_resolved.toml`, `summary.txt` and `meta.txt`.
//! Timestamps appear only in `meta.txt`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

use crate::cli::{resolve, Cli};
use crate::config::FileConfig;
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_USAGE};
use crate::output::{create_run_dir, render_summary, write_file, Check};

/// Where a finished run wrote its artifacts, and how its checks went.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub run_dir: PathBuf,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{}", c.line());
            }
            println!("artifacts: {}", outcome.run_dir.display());
            if outcome.passed() {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let jobs = cli.global.jobs.or(file.jobs).unwrap_or(0);
    let config_file = cli.global.config.clone();
    let run_config = resolve(&cli.global, cli.command, file)?;
    let plan = commands::plan(&run_config.section, run_config.master_seed)?;
    let resolved = run_config.to_toml()?;

    let started = unix_seconds();
    let subcommand = run_config.section.subcommand();
    let run_name = cli
        .global
        .run_name
        .clone()
        .unwrap_or_else(|| format!("run-{started}-{}", std::process::id()));
    let dir = create_run_dir(&cli.global.output_dir, subcommand, &run_name)?;
    write_file(&dir, "config_resolved.toml", resolved.as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| commands::execute(plan)).and_then(|report| {
        // encode everything first so a non-finite value leaves no partial tables
        let encoded = report
            .tables
            .iter()
            .map(|t| t.to_csv().map(|bytes| (t.name.clone(), bytes)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((report, encoded))
    });
    let (report, encoded) = match report {
        Ok(r) => r,
        Err(e) => {
            write_file(
                &dir,
                "summary.txt",
                format!("subcommand: {subcommand}\nstatus: error\nerror: {e}\n").as_bytes(),
            )?;
            return Err(e);
        }
    };
    for (name, bytes) in &encoded {
        write_file(&dir, name, bytes)?;
    }
    write_file(
        &dir,
        "summary.txt",
        render_summary(subcommand, &report.checks, &report.notes).as_bytes(),
    )?;
    let meta = format!(
        "run_name = {run_name}\noutput_dir = {}\nconfig_file = {}\njobs = {}\nversion = {}\nstarted_unix = {started}\nfinished_unix = {}\n",
        cli.global.output_dir.display(),
        config_file.map_or("none".to_string(), |p| p.display().to_string()),
        pool.current_num_threads(),
        env!("CARGO_PKG_VERSION"),
        unix_seconds()
    );
    write_file(&dir, "meta.txt", meta.as_bytes())?;
    Ok(Outcome {
        run_dir: dir,
        checks: report.checks,
    })
}
