use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lshade_fht::engine::pbest_count;
use lshade_fht::harness::{build_reports, curve_table, envelope_check, load_runs, run_experiment, ExperimentConfig};
use lshade_fht::survival::{
    expected_hit_bound, simulate_synthetic, tail_bound_constant, HazardRule, SyntheticHazard, TimeIndex,
};
use lshade_fht::witness::{combinatorial_prefactor, WitnessConfig};

#[derive(Parser)]
#[command(name = "lshade-fht", version, about = "L-SHADE first-hitting-time experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Rebuild the report tables from existing logs.
    Report {
        /// Log root written by `run` (`<out>/logs`).
        #[arg(long)]
        logs: PathBuf,
        /// Where to write the tables (default: parent of the log root).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kaplan-Meier curve and envelope for one cell directory.
    Km {
        #[arg(long)]
        cell: PathBuf,
        #[arg(long, value_enum, default_value_t = Clock::Gen)]
        clock: Clock,
        /// Multiply the logged floors before building the envelope.
        #[arg(long, default_value_t = 1.0)]
        a_scale: f64,
    },
    /// Hazard floor and tail bounds for given pool sizes.
    Bounds {
        #[arg(long)]
        dim: usize,
        /// Population size.
        #[arg(long)]
        n: usize,
        /// Archive capacity.
        #[arg(long)]
        archive: usize,
        #[arg(long, default_value_t = 6)]
        memory: usize,
        #[arg(long, default_value_t = 0.11)]
        p_best: f64,
        #[arg(long, default_value_t = 1.0)]
        p0c: f64,
        /// Generations at which to evaluate the tail bound.
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        at: Vec<usize>,
    },
    /// Monte Carlo check of the survival identity on a synthetic process.
    Synthetic {
        #[arg(long, value_enum)]
        rule: Rule,
        /// Constant hazard, decay constant or base hazard, by rule.
        #[arg(long)]
        param: f64,
        /// Per-step flag probability for the near-miss rule.
        #[arg(long, default_value_t = 0.1)]
        near_miss: f64,
        #[arg(long, default_value_t = 0.0)]
        p_e0: f64,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Clock {
    Gen,
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Constant,
    Decaying,
    NearMiss,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed, jobs } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if jobs == Some(0) {
                bail!("--jobs must be at least 1");
            }
            log::info!("running {} functions x {} eps x {} runs", cfg.functions.len(), cfg.eps.len(), cfg.runs);
            let res = run_experiment(&cfg, jobs)?;
            let reports = build_reports(&res.log_dir)?;
            reports.write(&cfg.out_dir)?;
            print!("{}", reports.km_table);
            log::info!("tables written to {}", cfg.out_dir.display());
        }
        Command::Report { logs, out } => {
            let reports = build_reports(&logs)?;
            let out = out.unwrap_or_else(|| logs.parent().map(PathBuf::from).unwrap_or_default());
            reports.write(&out)?;
            print!("{}", reports.km_table);
        }
        Command::Km { cell, clock, a_scale } => {
            let logs = load_runs(&cell)?;
            if logs.is_empty() {
                bail!("no run logs in {}", cell.display());
            }
            match clock {
                Clock::Gen if a_scale != 1.0 => {
                    let chk = envelope_check(&logs, a_scale)?;
                    println!("n\tS\tSE\tenvelope_product");
                    for n in 0..chk.envelope.product.len() {
                        println!("{n}\t{:e}\t{:e}\t{:e}", chk.km.survival_at(n), chk.km.se_at(n), chk.envelope.product[n]);
                    }
                    eprintln!("{} violations of {}", chk.validity.violations.len(), chk.validity.checked);
                }
                Clock::Gen => print!("{}", curve_table(&logs, TimeIndex::Gen)?),
                Clock::Eval => print!("{}", curve_table(&logs, TimeIndex::Eval)?),
            }
        }
        Command::Bounds { dim, n, archive, memory, p_best, p0c, at } => {
            if n < 4 {
                bail!("population size must be at least 4");
            }
            let m = pbest_count(p_best, n);
            let pref = combinatorial_prefactor(memory, m, n - 1, n + archive - 1);
            let a = pref * WitnessConfig::default().floor_product(dim)?;
            println!("m\t{m}\nprefactor\t{pref:e}\na\t{a:e}\nE[tau]<=\t{:e}", expected_hit_bound(a, p0c));
            for t in at {
                println!("P(tau>{t})<=\t{:e}", tail_bound_constant(a, t, p0c)?);
            }
        }
        Command::Synthetic { rule, param, near_miss, p_e0, horizon, reps, seed } => {
            let rule = match rule {
                Rule::Constant => HazardRule::Constant(param),
                Rule::Decaying => HazardRule::Decaying(param),
                Rule::NearMiss => HazardRule::NearMiss { base: param, near_miss },
            };
            let process = SyntheticHazard { rule, p_e0, horizon };
            let sim = simulate_synthetic(&process, reps, seed)?;
            let cert = process.certified_product();
            println!("n\tempirical\tse\tcertified\tz");
            for t in 0..=horizon {
                let z = if sim.se[t] > 0.0 { (sim.survival[t] - cert[t]) / sim.se[t] } else { 0.0 };
                println!("{t}\t{:e}\t{:e}\t{:e}\t{z:.3}", sim.survival[t], sim.se[t], cert[t]);
            }
        }
    }
    Ok(())
}
