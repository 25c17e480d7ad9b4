use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use spline_pml::cli::{execute, ExperimentConfig, SweepAxis};
use spline_pml::Error;

#[derive(Parser)]
#[command(name = "spline-pml", version, about = "Spline PML solver for exterior Helmholtz problems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every degree and mesh width listed in a config.
    Solve {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Allow configs marked heavy.
        #[arg(long)]
        heavy: bool,
    },
    /// Sweep one or more config axes; repeated axes are crossed.
    Sweep {
        config: PathBuf,
        #[arg(long = "axis", value_enum, required = true)]
        axes: Vec<SweepAxis>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        heavy: bool,
    },
}

/// Exit code 1 for bad input, 2 for numerical failure.
fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SingularSystem(_) | Error::NotConverged { .. } | Error::EmptySampleSet) => 2,
        _ => 1,
    }
}

fn run(args: Args) -> anyhow::Result<()> {
    if let Ok(t) = std::env::var("SPLINE_PML_THREADS") {
        let n: usize = t.parse().map_err(|_| Error::InvalidArgument(format!("SPLINE_PML_THREADS={t}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (config, axes, out, heavy) = match args.command {
        Command::Solve { config, out, heavy } => (config, Vec::new(), out, heavy),
        Command::Sweep { config, axes, out, heavy } => (config, axes, out, heavy),
    };
    let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if cfg.heavy && !heavy {
        return Err(Error::InvalidArgument(format!("{} is marked heavy; pass --heavy to run it", config.display())).into());
    }
    let outputs = execute(&cfg, &axes, &out)?;
    for r in &outputs.rows {
        println!("{}", r.csv_row());
    }
    if let Some(csv) = &outputs.csv {
        eprintln!("wrote {}", csv.display());
    }
    for s in &outputs.snapshots {
        eprintln!("wrote {}", s.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}
