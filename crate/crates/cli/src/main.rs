use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use posebench::mocap_io::load_reference_table;
use posebench_cli::{expand, load_config, merge_reports, read_report_file, run_simulate, run_sweep, RunOptions, RunOutcome};

#[derive(Parser)]
#[command(name = "posebench", version, about = "Artifact sweeps for full-body pose reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sparse and artifact-free Cartesian streams of every clip.
    Simulate(RunArgs),
    /// Evaluate the artifact grid and write report.csv, report.md and run_manifest.json.
    Sweep(RunArgs),
    /// Merge report CSVs, optionally recomputing deltas against a reference table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "avatarposer")]
        reference_model: String,
        /// Write report.csv and report.md here instead of printing markdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config, then list its grid points.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions { jobs: self.jobs, output_dir: self.out.clone(), reference: self.reference.clone() }
    }
}

fn finish(outcome: RunOutcome) -> ExitCode {
    let failures = &outcome.manifest.failures;
    if failures.is_empty() {
        log::info!("wrote {}", outcome.output_dir.display());
        ExitCode::SUCCESS
    } else {
        for f in failures {
            eprintln!("failed: {}: {}", f.item, f.message);
        }
        eprintln!("{} failure(s); completed results are in {}", failures.len(), outcome.output_dir.display());
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let (config, base) = load_config(&args.config)?;
            Ok(finish(run_simulate(&config, &base, &args.options())?))
        }
        Command::Sweep(args) => {
            let (config, base) = load_config(&args.config)?;
            let outcome = run_sweep(&config, &base, &args.options())?;
            if let Some(report) = &outcome.report {
                print!("{}", report.to_markdown());
            }
            Ok(finish(outcome))
        }
        Command::Report { reports, reference, reference_model, out } => {
            let parsed = reports.iter().map(|p| read_report_file(p)).collect::<Result<Vec<_>>>()?;
            let table = match &reference {
                Some(p) => {
                    let bytes = std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
                    Some(load_reference_table(&bytes).with_context(|| format!("reference table {}", p.display()))?)
                }
                None => None,
            };
            let merged = merge_reports(&parsed, table.as_ref().map(|t| (t, reference_model.as_str())))?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
                    std::fs::write(dir.join("report.csv"), merged.to_csv())?;
                    std::fs::write(dir.join("report.md"), merged.to_markdown())?;
                }
                None => print!("{}", merged.to_markdown()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config } => {
            let (config, _) = load_config(&config)?;
            let points = expand(&config.grid, config.full_product);
            println!("config ok: {} grid points, {} seeds, {} reconstructor(s)", points.len(), config.seeds.len(), config.reconstructors.len());
            for p in points {
                match p.level {
                    Some(l) => println!("  {} {l}", p.condition),
                    None => println!("  {}", p.condition),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
