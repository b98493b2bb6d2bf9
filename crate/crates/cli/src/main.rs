use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stopbound_cli::report::{write_csv, write_json};
use stopbound_cli::{load, run_bound, run_certify, run_validate, Overrides, Report};

#[derive(Parser)]
#[command(name = "stopbound", version, about = "Bounds on expected stopping times, checked by simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Master seed; overrides the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo runs per scenario; overrides the file.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Report path; without it the paths in the file are used, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for simulation (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the requested bounds.
    Bound { config: PathBuf },
    /// Compute bounds and compare them with simulation; exits 1 on any failed comparison.
    Certify { config: PathBuf },
    /// Run the empirical inequality checks; exits 1 on any failure.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn write_to(report: &Report, format: Format, path: Option<&Path>) -> Result<(), String> {
    let emit = |w: &mut dyn Write| match format {
        Format::Csv => write_csv(report, w),
        Format::Json => write_json(report, w),
    };
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?;
            let mut w = BufWriter::new(f);
            emit(&mut w).map_err(|e| e.to_string())?;
            w.flush().map_err(|e| e.to_string())
        }
        None => emit(&mut io::stdout().lock()).map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides { seed: cli.seed, runs: cli.runs, workers: cli.workers };
    let path = match &cli.command {
        Cmd::Bound { config } | Cmd::Certify { config } | Cmd::Validate { config } => config,
    };
    let exp = match load(path, &ov) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match cli.command {
        Cmd::Bound { .. } => Ok(run_bound(&exp)),
        Cmd::Certify { .. } => run_certify(&exp),
        Cmd::Validate { .. } => run_validate(&exp),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let written = if let Some(p) = &cli.out {
        write_to(&report, cli.format, Some(p))
    } else if exp.output.csv.is_some() || exp.output.json.is_some() {
        let csv = exp.output.csv.as_deref().map(|p| write_to(&report, Format::Csv, Some(p)));
        let json = exp.output.json.as_deref().map(|p| write_to(&report, Format::Json, Some(p)));
        csv.into_iter().chain(json).collect()
    } else {
        write_to(&report, cli.format, None)
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    for sim in &report.simulations {
        if sim.summary.initial_violations > 0 {
            eprintln!(
                "warning: scenario `{}`: {} runs started outside the closed continuation region",
                sim.scenario, sim.summary.initial_violations
            );
        }
    }
    let failures = report.failures();
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        ExitCode::from(1)
    }
}
