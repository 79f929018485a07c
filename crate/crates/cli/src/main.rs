use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use drco_cli::{
    case_runs, cmd_run, fig3, sweep_csv, table2_csv, table2_text, write_table2_artifacts, CommandError, Overrides,
    CASE_TOPOLOGIES,
};
use drco_core::{accuracy_sweep, Method, Topology};

#[derive(Parser)]
#[command(name = "drco", version, about = "Distributed robust convex optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON configuration
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write an SVG of the bound trajectory
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Solve the six-agent case study for every graph and stopping method
    Table2 {
        /// Directory for the CSV, per-run traces and bound plots
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy guarantees versus agent count, as CSV and SVG
    Fig3 {
        #[arg(long, default_value_t = 50)]
        m_max: usize,
        #[arg(long, default_value_t = 0.01)]
        eps_f: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Accuracy guarantees as CSV on stdout
    Sweep {
        #[arg(long, default_value_t = 2)]
        m_min: usize,
        #[arg(long, default_value_t = 50)]
        m_max: usize,
        #[arg(long, default_value_t = 0.01)]
        eps_f: f64,
        /// Restrict to one generated topology
        #[arg(long)]
        topology: Option<Topology>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    topology: Option<Topology>,
    #[arg(long)]
    eps_f: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run {
            config,
            out,
            plot,
            overrides,
        } => {
            let ov = Overrides {
                method: overrides.method,
                topology: overrides.topology,
                eps_f: overrides.eps_f,
                eps0: overrides.eps0,
                r: overrides.r,
                max_iter: overrides.max_iter,
            };
            match cmd_run(&config, &ov, &out, plot) {
                Ok(result) if result.terminated => {
                    println!(
                        "terminated after {} iterations; results in {}",
                        result.iterations,
                        out.display()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Ok(result) => {
                    eprintln!("iteration budget exhausted after {} iterations", result.iterations);
                    Ok(ExitCode::from(2))
                }
                Err(CommandError::Other(e)) => Err(e),
                Err(e) => Err(e.into()),
            }
        }
        Command::Table2 { out } => {
            let runs = case_runs()?;
            print!("{}", table2_text(&runs));
            print!("{}", table2_csv(&runs));
            if let Some(dir) = out {
                write_table2_artifacts(&runs, &dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fig3 { m_max, eps_f, out } => {
            let (rows, svg) = fig3(m_max, eps_f)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("accuracy.csv"), sweep_csv(&rows)?)?;
            std::fs::write(out.join("accuracy.svg"), svg)?;
            print!("{}", sweep_csv(&rows)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            m_min,
            m_max,
            eps_f,
            topology,
        } => {
            let topologies = topology.map_or(CASE_TOPOLOGIES.to_vec(), |t| vec![t]);
            let mut rows = Vec::new();
            for t in topologies {
                let lo = if t == Topology::Customized { m_min.max(3) } else { m_min };
                rows.extend(accuracy_sweep(&[t], lo..=m_max, eps_f)?);
            }
            print!("{}", sweep_csv(&rows)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
