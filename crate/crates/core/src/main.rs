use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use compound_tput::harness::{self, ExperimentConfig, Format, Model};
use compound_tput::stochastic::{self, SimSettings};
use compound_tput::{fluid, limit, LossRate};

#[derive(Parser)]
#[command(version, about = "TCP Compound throughput under random losses")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON experiment config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed (falls back to the config, then COMPOUND_TPUT_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Fluid fixed point, period and response function
    Fluid {
        #[arg(long = "p", num_args = 1..)]
        p: Vec<f64>,
        /// Also write the drop-cycle trajectory from this initial window
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 30)]
        cycles: usize,
        /// Sampling step in seconds (defaults to one RTT)
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Monte-Carlo simulation of the finite-p window chain
    Simulate {
        #[arg(long = "p", num_args = 1..)]
        p: Vec<f64>,
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long)]
        warmup: Option<u64>,
        #[arg(long)]
        replicas: Option<u64>,
    },
    /// Stationary distribution of the truncated integer chain
    Stationary {
        #[arg(long = "p", num_args = 1..)]
        p: Vec<f64>,
        /// Truncation bound (default: automatic, doubled on tail-mass failure)
        #[arg(long)]
        w_max: Option<usize>,
    },
    /// Limit-chain estimate of E[Gbar] and the resulting window coefficient
    Limit {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        v0: Option<f64>,
        #[arg(long = "p", num_args = 1..)]
        p: Vec<f64>,
    },
    /// Average-window and goodput tables across models
    Tables {
        #[arg(long = "p", num_args = 1..)]
        p: Vec<f64>,
        #[arg(long, value_enum, num_args = 1..)]
        models: Vec<Model>,
    },
    /// CSV data for the fluid sawtooth and running-mean figures
    Figures,
}

fn load_config(global: &GlobalOpts) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if global.seed.is_some() {
        config.seed = global.seed;
    }
    if let Some(dir) = &global.out_dir {
        config.output.out_dir = dir.clone();
    }
    if let Some(format) = global.format {
        config.output.format = format;
    }
    Ok(config)
}

fn loss_rates(cli: &[f64], config: &ExperimentConfig) -> anyhow::Result<Vec<LossRate>> {
    let list = if cli.is_empty() { &config.p_list } else { cli };
    Ok(list
        .iter()
        .map(|&p| LossRate::new(p))
        .collect::<Result<_, _>>()?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut config = load_config(&cli.global)?;
    let params = config.params;
    params.validate()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();

    match cli.command {
        Command::Fluid { p, x0, cycles, dt } => {
            writeln!(
                out,
                "p,fixed_point,period_seconds,mean_window_packets,goodput_pkts_per_sec"
            )?;
            for q in loss_rates(&p, &config)? {
                let w = fluid::fluid_avg_window(q, &params);
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    q.get(),
                    fluid::fixed_point(q, &params),
                    fluid::period(q, &params),
                    w,
                    stochastic::goodput(w, q.get(), &params)
                )?;
            }
            if let Some(x0) = x0 {
                if x0 < 1.0 {
                    bail!("--x0 must be >= 1");
                }
                let q = loss_rates(&p, &config)?[0];
                let dt = dt.unwrap_or(params.rtt);
                if dt <= 0.0 {
                    bail!("--dt must be > 0");
                }
                let traj = fluid::simulate_fluid(x0, q, cycles, Some(dt), &params);
                fs::create_dir_all(&config.output.out_dir)?;
                let path = config
                    .output
                    .out_dir
                    .join(format!("fluid_trajectory_x0_{x0}.csv"));
                fluid::write_trajectory_csv(&traj, BufWriter::new(File::create(&path)?))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Simulate {
            p,
            rounds,
            warmup,
            replicas,
        } => {
            let seed = config.effective_seed()?;
            let n_rounds = rounds.unwrap_or(config.sim.n_rounds);
            let settings = SimSettings {
                n_rounds,
                warmup_rounds: warmup.or(config.sim.warmup).unwrap_or(n_rounds / 10),
                seed,
                stream: 0,
            };
            let replicas = replicas.unwrap_or(config.sim.replicas);
            writeln!(
                out,
                "p,mean_window_packets,goodput_pkts_per_sec,ci_halfwidth,rounds,losses"
            )?;
            for q in loss_rates(&p, &config)? {
                let est = stochastic::simulate_replicas(q, &settings, replicas, &params)?;
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    q.get(),
                    est.mean_window,
                    est.goodput,
                    est.ci_halfwidth,
                    est.n_rounds,
                    est.n_losses
                )?;
            }
            Ok(true)
        }
        Command::Stationary { p, w_max } => {
            writeln!(
                out,
                "p,mean_window_packets,goodput_pkts_per_sec,w_max,tail_mass,iterations"
            )?;
            for q in loss_rates(&p, &config)? {
                let dist = match w_max {
                    Some(w) => stochastic::stationary_solver(q, w, &params)?,
                    None => stochastic::stationary_auto(q, &params)?,
                };
                writeln!(
                    out,
                    "{},{},{},{},{:e},{}",
                    q.get(),
                    dist.mean(),
                    stochastic::goodput(dist.mean(), q.get(), &params),
                    dist.w_max,
                    dist.tail_mass(),
                    dist.iterations
                )?;
            }
            Ok(true)
        }
        Command::Limit { n, burn_in, v0, p } => {
            let seed = config.effective_seed()?;
            let n = n.unwrap_or(config.limit.n);
            let burn_in = burn_in.unwrap_or(config.limit.burn_in);
            let v0 = v0.unwrap_or(config.limit.v0);
            let est = limit::estimate_mean_gbar(n, burn_in, v0, seed, &params)?;
            writeln!(out, "mean_g,ci_halfwidth,coefficient,n,burn_in,v0,seed")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                est.mean_g,
                est.ci_halfwidth,
                est.coefficient(),
                n,
                burn_in,
                v0,
                seed
            )?;
            eprintln!(
                "published reference: E[Gbar] = {}, coefficients {} / {}",
                limit::PUBLISHED_MEAN_GBAR,
                limit::PUBLISHED_COEFFICIENT,
                limit::TABLE_COEFFICIENT
            );
            if !p.is_empty() {
                writeln!(out)?;
                writeln!(out, "p,mean_window_packets,goodput_pkts_per_sec")?;
                for q in loss_rates(&p, &config)? {
                    writeln!(
                        out,
                        "{},{},{}",
                        q.get(),
                        limit::approx_avg_window(q, est.mean_g, &params),
                        limit::approx_goodput(q, est.mean_g, &params)
                    )?;
                }
            }
            Ok(true)
        }
        Command::Tables { p, models } => {
            if !p.is_empty() {
                config.p_list = p;
            }
            if !models.is_empty() {
                config.models = models;
            }
            let rows = harness::run_tables(&config)?;
            let dir = &config.output.out_dir;
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let csv_path = dir.join("tables.csv");
            harness::write_tables_csv(&rows, &config, BufWriter::new(File::create(&csv_path)?))?;
            eprintln!("wrote {}", csv_path.display());
            match config.output.format {
                Format::Csv => harness::write_tables_csv(&rows, &config, &mut out)?,
                Format::Md => {
                    let md_path = dir.join("tables.md");
                    harness::write_tables_md(
                        &rows,
                        &config,
                        BufWriter::new(File::create(&md_path)?),
                    )?;
                    eprintln!("wrote {}", md_path.display());
                    harness::write_tables_md(&rows, &config, &mut out)?;
                }
            }
            for row in &rows {
                for cell in &row.cells {
                    if let Err(reason) = &cell.outcome {
                        eprintln!("p={} {}: {reason}", row.p, cell.model.name());
                    }
                }
            }
            Ok(rows.iter().all(|r| r.all_ok()))
        }
        Command::Figures => {
            for path in harness::run_figures(&config)? {
                writeln!(out, "{}", path.display())?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
