//! `hydrotwin`: water-demand forecasting and maintenance scheduling from the
//! command line.
//!
//! Exit codes: 0 success, 2 no feasible schedule, 3 bad input, 1 anything
//! else.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use hydrotwin::pipeline::{self, ErrorKind, PipelineError, SolverMode, ToolConfig};

#[derive(Debug, Parser)]
#[command(name = "hydrotwin", version, about = "Water-demand forecasting and maintenance scheduling")]
struct Cli {
    /// TOML configuration file. Missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports and model files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Daily consumption CSV (`date,consumption_m3`).
    #[arg(long)]
    consumption: Option<PathBuf>,
    /// Daily weather CSV (`fecha,tmax,...`).
    #[arg(long)]
    meteo: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic consumption and weather files.
    GenData {
        #[command(flatten)]
        data: DataArgs,
        /// Number of days to generate.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Correlate every weather column with consumption.
    Correlate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one model and forecast the days after the training window.
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: String,
        /// Days to forecast.
        #[arg(long)]
        horizon: usize,
        /// Last training day (defaults to the last observed day).
        #[arg(long)]
        train_until: Option<NaiveDate>,
    },
    /// Train every configured model and write the comparison table.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Solve a maintenance instance.
    Schedule {
        /// Instance TOML file (defaults to the configured one).
        instance: Option<PathBuf>,
        /// Exact solver only (the default).
        #[arg(long, group = "mode")]
        exact: bool,
        /// Greedy baseline only.
        #[arg(long, group = "mode")]
        baseline: bool,
        /// Both solvers and the improvement table.
        #[arg(long, group = "mode")]
        compare: bool,
        /// Time budget of the exact solver in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Average both solvers over generated instances.
    Compare {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        budget: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<ToolConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ToolConfig::load(path)?,
        None => ToolConfig::default(),
    };
    cfg.apply_env();
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg = cfg.with_seed_applied();
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut ToolConfig, data: &DataArgs) {
    if let Some(p) = &data.consumption {
        cfg.data.consumption = p.clone();
    }
    if let Some(p) = &data.meteo {
        cfg.data.meteo = p.clone();
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenData { data, days } => {
            apply_data(&mut cfg, &data);
            if let Some(n) = days {
                cfg.synthetic.n_days = n;
            }
            let (c, m) = pipeline::gen_data(&cfg)?;
            println!("wrote {} and {}", c.display(), m.display());
        }
        Command::Correlate { data } => {
            apply_data(&mut cfg, &data);
            pipeline::correlate(&cfg)?;
            let report = cfg.output_dir.join("correlation_report.txt");
            print!("{}", std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?);
        }
        Command::Forecast { data, model, horizon, train_until } => {
            apply_data(&mut cfg, &data);
            let f = pipeline::forecast(&cfg, &model, horizon, train_until)?;
            print!("{}", f.to_csv());
        }
        Command::Evaluate { data } => {
            apply_data(&mut cfg, &data);
            let table = pipeline::evaluate(&cfg)?;
            print!("{}", table.to_text());
        }
        Command::Schedule { instance, exact: _, baseline, compare, budget } => {
            let mode = match (baseline, compare) {
                (true, _) => SolverMode::Baseline,
                (_, true) => SolverMode::Compare,
                _ => SolverMode::Exact,
            };
            let outcome = pipeline::schedule(&cfg, instance.as_deref(), mode, budget)?;
            for r in &outcome.reports {
                let flag = if r.optimal { "" } else { " (not proven optimal)" };
                println!("{}: Z = {:.4}{flag}, sequence {}", r.solver, r.objective.z, r.sequence.join(" "));
            }
            if let Some(c) = &outcome.comparison {
                print!("\n{}", c.to_text());
            }
        }
        Command::Compare { runs, budget } => {
            let report = pipeline::compare(&cfg, runs, budget)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>().map(PipelineError::kind) {
        Some(ErrorKind::Infeasible) => 2,
        Some(ErrorKind::Input) => 3,
        Some(ErrorKind::Runtime) | None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
