use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use compkern::driver::{run_files, RunOptions};

/// Splits an annotated loop nest into parametric kernel variants, one per
/// region of machine and program parameters.
#[derive(Parser)]
#[command(name = "compkern", version)]
struct Args {
    /// Source file with one meta_schedule block.
    input: PathBuf,
    /// Machine description; the built-in Fermi-class profile when omitted.
    machine: Option<PathBuf>,
    /// Cap on launched blocks per grid dimension.
    #[arg(long)]
    grid_stride: Option<i64>,
    /// Node budget of the witness search.
    #[arg(long)]
    budget: Option<u64>,
    /// Points sampled by the coverage check.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Seed of the coverage sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip coverage, optimality and witness checks.
    #[arg(long)]
    no_verify: bool,
    /// Add per-node counter values to the report.
    #[arg(long)]
    explain: bool,
    /// Directory for the artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        grid_stride: args.grid_stride,
        budget: args.budget,
        samples: args.samples,
        seed: args.seed,
        verify: !args.no_verify,
        explain: args.explain,
        out: args.out,
    };
    match run_files(&args.input, args.machine.as_deref(), &opts) {
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Ok(s) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{} case(s), tree height {}", s.cases, s.height);
            for p in &s.written {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            if s.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                for v in &s.violations {
                    eprintln!("verification: {v}");
                }
                ExitCode::from(2)
            }
        }
    }
}
