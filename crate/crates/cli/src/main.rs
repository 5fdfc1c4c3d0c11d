use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use jetfield::config::{ScenarioConfig, SchemeName, Suite};
use jetfield::report::Report;

#[derive(Parser)]
#[command(name = "jetfield", version, about = "Run jet-field gauge theory verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites of a TOML or JSON scenario file.
    Run {
        config: PathBuf,
        /// Override the nodes per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the finite-difference scheme.
        #[arg(long)]
        scheme: Option<SchemeName>,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-grid CSV table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Suppress the console summary.
        #[arg(long)]
        quiet: bool,
    },
    /// List the available suites.
    Suites,
    /// Print the JSON schema of the scenario file.
    Schema,
}

fn write_outputs(report: &Report, out: Option<&PathBuf>, csv: Option<&PathBuf>, quiet: bool) -> anyhow::Result<()> {
    if let Some(path) = out {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.write_csv(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
    }
    if !quiet {
        report.print_console(io::stdout().lock())?;
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("JETFIELD_THREADS") {
        let n: usize = value.parse().with_context(|| format!("JETFIELD_THREADS = {value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Suites => {
            let mut out = io::stdout().lock();
            for s in Suite::ALL {
                let _ = writeln!(out, "{:<14} {}", s.name(), s.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::schema()).expect("schema serializes"));
            ExitCode::SUCCESS
        }
        Command::Run { config, grid, seed, scheme, out, csv, quiet } => {
            if let Err(e) = init_threads() {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            let mut cfg = match ScenarioConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(n) = grid {
                cfg.grid.n = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = scheme {
                cfg.scheme = s;
            }
            let report = match jetfield::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = write_outputs(&report, out.as_ref(), csv.as_ref(), quiet) {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
