//! `tightlab`: run exponential-tightness scenarios from the command line.
//!
//! Exit codes: 0 all premises hold and bounds dominate; 1 usage or config
//! error (and `diff` finding differences); 2 premise failure; 3 bound violation.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tightlab_core::report::{cover_table, diff_reports, run_stages, Stages};
use tightlab_core::scenario::{ConfigError, BUNDLED};
use tightlab_core::{Route, Scenario};

#[derive(Parser)]
#[command(name = "tightlab", version, about = "Exponential tightness: norms, entropy, majorizing measures and Monte Carlo bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Scenario file, or the name of a bundled scenario.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// entropy, majorizing or both.
    #[arg(long)]
    route: Option<Route>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Covering numbers and metric entropy of the scenario's space.
    Cover {
        #[command(flatten)]
        o: Overrides,
        /// Comma-separated radii (defaults to grids.eps, then every distinct distance).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// phi, chi, conjugate, natural distance and the entropy integral, without Monte Carlo.
    Calc {
        #[command(flatten)]
        o: Overrides,
    },
    /// Orlicz norms, w-distance and measure classification, without Monte Carlo.
    Measure {
        #[command(flatten)]
        o: Overrides,
    },
    /// Monte Carlo tail and exit-rate tables.
    Simulate {
        #[command(flatten)]
        o: Overrides,
    },
    /// Full pipeline: premise checks, tail tables, calibration; writes the report.
    Verify {
        #[command(flatten)]
        o: Overrides,
    },
    /// Compare two reports field by field.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Relative tolerance for numeric fields.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print a bundled scenario, or list them.
    Show { name: Option<String> },
}

fn config_error(e: ConfigError) -> anyhow::Error {
    anyhow::anyhow!("scenario: {e}")
}

fn load(o: &Overrides, route: Option<Route>) -> Result<Scenario> {
    let mut s = Scenario::resolve(&o.scenario).map_err(config_error)?;
    if let Some(seed) = o.seed {
        s.mc.seed = seed;
    }
    if let Some(reps) = o.reps {
        s.mc.reps = reps;
    }
    if let Some(r) = route.or(o.route) {
        s.route = r;
    }
    if let Some(out) = &o.out {
        s.output.dir = out.clone();
    }
    s.validate().map_err(|(field, message)| config_error(ConfigError { line: None, field, message }))?;
    Ok(s)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Cover { o, eps } => {
            let mut s = load(&o, None)?;
            if eps.is_some() {
                s.grids.eps = eps;
            }
            let rows = cover_table(&s)?;
            println!("eps,count,entropy");
            for r in rows {
                println!("{},{},{}", r.eps, r.count, r.entropy);
            }
            Ok(0)
        }
        Command::Calc { o } => analytic(&o, Route::Entropy),
        Command::Measure { o } => analytic(&o, Route::Majorizing),
        Command::Simulate { o } => {
            let s = load(&o, None)?;
            let run = run_stages(&s, Stages::TABLES);
            let dir = s.output.dir.clone();
            run.write_to(&dir).with_context(|| format!("writing {}", dir.display()))?;
            for a in run.artifacts.iter().filter(|a| a.name.ends_with("_tail.csv") || a.name.ends_with("_rates.csv")) {
                println!("# {}", a.name);
                print!("{}", a.contents);
            }
            summarize(&run.report);
            Ok(run.exit_code() as u8)
        }
        Command::Verify { o } => {
            let s = load(&o, None)?;
            let run = run_stages(&s, Stages::ALL);
            let dir = s.output.dir.clone();
            run.write_to(&dir).with_context(|| format!("writing {}", dir.display()))?;
            summarize(&run.report);
            println!("report: {}", dir.join("report.json").display());
            Ok(run.exit_code() as u8)
        }
        Command::Diff { a, b, tol } => {
            let read = |p: &PathBuf| -> Result<serde_json::Value> {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            };
            let d = diff_reports(&read(&a)?, &read(&b)?, tol);
            print!("{d}");
            Ok(if d.same() { 0 } else { 1 })
        }
        Command::Show { name } => {
            match name {
                None => BUNDLED.iter().for_each(|(n, _)| println!("{n}")),
                Some(n) => {
                    let src = tightlab_core::scenario::bundled(&n).with_context(|| format!("no bundled scenario {n:?}"))?;
                    print!("{src}");
                }
            }
            Ok(0)
        }
    }
}

fn analytic(o: &Overrides, route: Route) -> Result<u8> {
    let s = load(o, Some(route))?;
    let run = run_stages(&s, Stages::ANALYTIC);
    if o.out.is_some() {
        let dir = s.output.dir.clone();
        run.write_to(&dir).with_context(|| format!("writing {}", dir.display()))?;
    }
    print!("{}", run.report.to_json());
    Ok(run.exit_code() as u8)
}

fn summarize(r: &tightlab_core::BoundReport) {
    eprintln!("scenario {}: {:?} (exit {})", r.scenario.name, r.verdict.status, r.verdict.exit_code);
    for n in &r.verdict.notes {
        eprintln!("  note: {n}");
    }
    for e in &r.errors {
        eprintln!("  {} / {}: {}: {}", e.route, e.stage, e.error, e.message);
    }
    let tails = [r.entropy.as_ref().and_then(|e| e.tail.as_ref()), r.majorizing.as_ref().and_then(|m| m.tail.as_ref())];
    for (route, t) in ["entropy", "majorizing"].iter().zip(tails) {
        if let Some(t) = t {
            let flag = if t.calibration.saturated { " (saturated)" } else { "" };
            eprintln!("  {route}: calibrated C = {}{flag}", t.calibration.c);
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap's own usage code (2) would collide with "premise failure"
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
