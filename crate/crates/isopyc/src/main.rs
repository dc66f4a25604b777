//! `isopyc`: run simulations and verification suites.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isopycnal::io::config::SUITES;
use isopycnal::io::run::{EXIT_CHECK_FAILED, EXIT_OK};
use isopycnal::io::verify::{run_suite, table};
use isopycnal::io::{exit_code, run, RunConfig};

#[derive(Parser)]
#[command(name = "isopyc", version, about = "Stratified Euler flow in isopycnal coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat `section.key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for the numerical kernels; 0 lets the pool decide.
    #[arg(long, value_name = "N", env = "ISOPYC_THREADS")]
    threads: Option<usize>,
    /// Seed for random initial data and random test states.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration to t_end or blow-up.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory, overriding output.dir.
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Run verification suites and print a pass/fail table.
    Verify {
        /// Suite name or `all`; defaults to verify.suites.
        suite: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<RunConfig, i32> {
    if let Some(n) = common.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            exit_code(&e)
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(common: &Common, output: Option<PathBuf>) -> i32 {
    let mut cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(dir) = output {
        cfg.output.dir = dir;
    }
    let dir = cfg.output.dir.clone();
    let mut log = std::io::stderr();
    match run(&cfg, &dir, &mut log) {
        Ok(summary) => {
            let last = &summary.last;
            println!(
                "{} steps, t = {:.6}, E = {:.6e}, status {}",
                summary.steps,
                last.t,
                last.e,
                last.status.tag()
            );
            println!("energy series: {}", summary.energy_csv.display());
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_verify(common: &Common, suite: Option<String>) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let suites: Vec<String> = match suite.as_deref() {
        None => cfg.verify.suites.clone(),
        Some("all") => SUITES.iter().map(|s| s.to_string()).collect(),
        Some(name) => vec![name.to_string()],
    };
    let mut checks = Vec::new();
    for name in &suites {
        match run_suite(name, &cfg) {
            Ok(c) => checks.extend(c),
            Err(e) => {
                eprintln!("error: suite {name}: {e}");
                return exit_code(&e);
            }
        }
    }
    print!("{}", table(&checks));
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed == 0 {
        EXIT_OK
    } else {
        println!("{failed} of {} checks failed", checks.len());
        EXIT_CHECK_FAILED
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { common, output } => cmd_run(&common, output),
        Command::Verify { suite, common } => cmd_verify(&common, suite),
    };
    ExitCode::from(code as u8)
}
