//! `spongelab`: command-line driver for the experiments.

mod config;
mod experiments;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig};

/// All checks passed.
const EXIT_PASS: u8 = 0;
/// The experiment ran but a check failed.
const EXIT_FAIL: u8 = 1;
/// Bad flags, configuration or parameters.
const EXIT_USAGE: u8 = 2;
/// The experiment itself errored.
const EXIT_RUNTIME: u8 = 3;

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("usage error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return usage("--threads must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return usage(format!("--threads {threads}: {e}"));
        }
    }
    let config = match RunConfig::resolve(&cli).and_then(|c| experiments::validate(&c).map(|_| c)) {
        Ok(c) => c,
        Err(msg) => return usage(msg),
    };
    let report = match experiments::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let written = match &config.output {
        Some(path) => File::create(path)
            .map_err(anyhow::Error::from)
            .and_then(|f| report::write_report(BufWriter::new(f), &config, &report)),
        None => report::write_report(io::stdout().lock(), &config, &report),
    };
    if let Err(e) = written {
        eprintln!("error: writing report: {e:#}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(io::stderr(), "{verdict} {}: {}", config.experiment.id(), report.summary);
    ExitCode::from(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}
