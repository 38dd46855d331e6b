use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fwlab::report::{Check, RunReport};
use fwlab::verify::run_suite;

#[derive(Parser)]
#[command(name = "fwlab", version, about = "Small-noise diffusion experiments")]
struct Cli {
    /// Worker threads; FWLAB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the bundled acceptance checks.
    Verify {
        /// Name substring or criterion id such as `c3`.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Where to write report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    fwlab::configure_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Run { config, out, seed } => {
            let (report, dir) = fwlab::run(&config, out, seed)?;
            for (k, v) in &report.metrics {
                println!("{k:<32} {v}");
            }
            for c in &report.checks {
                println!("{}", c.line());
            }
            println!("report: {}", dir.join("report.json").display());
            Ok(report.passed)
        }
        Cmd::Verify { filter, seed, out } => {
            let t0 = std::time::Instant::now();
            let results = run_suite(seed, filter.as_deref(), |r| {
                for c in &r.checks {
                    println!("  {}", c.line());
                }
                println!("{}", r.line());
            })?;
            let checks: Vec<Check> = results.iter().flat_map(|r| r.checks.clone()).collect();
            let report = RunReport::new(
                "verify",
                fwlab::report::sha256_hex(format!("verify:{}", filter.as_deref().unwrap_or("")).as_bytes()),
                seed,
                t0.elapsed().as_secs_f64(),
                Default::default(),
                checks,
                vec!["report.json".into()],
            )?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                report.write(&dir.join("report.json"))?;
            }
            Ok(results.iter().all(|r| r.passed()))
        }
    }
}
