use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tvop_cli::commands::{cmd_plot, cmd_report, cmd_run, summary_lines};

#[derive(Parser)]
#[command(name = "tvop", version, about = "Running fixed-point iterations of time-varying averaged operators")]
struct Cli {
    /// Report violated bounds as warnings instead of failing.
    #[arg(long, global = true)]
    verdict_warn: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write CSV, report and manifest files.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(short, long, env = "TVOP_OUTPUT_DIR", default_value = "tvop-runs")]
        output: PathBuf,
        /// Extra sweep, `key=v1,v2,...`; may be repeated.
        #[arg(long)]
        sweep: Vec<String>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-analyze stored runs from their CSV and manifest.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Draw tracking-error curves (and localization snapshots) as SVG.
    Plot {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn verdict_status(ok: bool, warn: bool, label: &str) -> bool {
    if !ok && warn {
        eprintln!("warning: {label}: some bounds are violated");
        return true;
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output, sweep, seed } => cmd_run(&config, &output, &sweep, seed).map(|outcomes| {
            let mut ok = true;
            for o in &outcomes {
                if let Some(r) = &o.report {
                    summary_lines(&o.label, r).iter().for_each(|l| println!("{l}"));
                }
                if let Some(m) = &o.message {
                    eprintln!("{}: {m}", o.label);
                }
                println!("  wrote {}", o.files.csv.display());
                ok &= o.completed && o.report.is_some();
                ok &= verdict_status(o.verdicts_hold(), cli.verdict_warn, &o.label);
            }
            ok
        }),
        Command::Report { files } => cmd_report(&files).map(|outcomes| {
            let mut ok = true;
            for o in &outcomes {
                summary_lines(&o.label, &o.report).iter().for_each(|l| println!("{l}"));
                match o.round_trip_identical {
                    Some(true) => println!("  round trip: identical to stored report"),
                    Some(false) => {
                        println!("  round trip: DIFFERS from stored report");
                        ok = false;
                    }
                    None => println!("  round trip: no stored report"),
                }
                if !o.completed {
                    println!("  run did not complete");
                    ok = false;
                }
                ok &= verdict_status(o.report.all_hold(), cli.verdict_warn, &o.label);
            }
            ok
        }),
        Command::Plot { files, output } => cmd_plot(&files, &output).map(|paths| {
            paths.iter().for_each(|p| println!("wrote {}", p.display()));
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
