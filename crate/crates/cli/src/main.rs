//! `lexrl`: train, verify and render lexicographic safe policies.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lexrl::learn::Checkpoint;

use lexrl_cli::commands;
use lexrl_cli::config::{ExperimentConfig, Overrides, ScheduleConfig};
use lexrl_cli::render::{self, PolicyExport};

#[derive(Parser)]
#[command(
    name = "lexrl",
    version,
    about = "Lexicographic safe reinforcement learning on labeled MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate, build the product, train, evaluate and write artifacts.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Independent seeds to run concurrently, starting at the configured seed.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Compare a checkpoint with the exact oracle; prints a JSON report.
    Verify {
        config: PathBuf,
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Product state at which values are reported, e.g. "<(0,5),0,2>".
        #[arg(long)]
        at: Option<String>,
        /// Visit count above which a state counts as frequently visited.
        #[arg(long, default_value_t = 100)]
        min_visits: u64,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a policy export as text, SVG and CSV.
    Render {
        policy: PathBuf,
        /// Directory for the renders; defaults to the export's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact probabilities and action sets of the configured product as JSON.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Translate a safety formula into a deterministic automaton.
    Translate {
        formula: String,
        /// Atomic propositions, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "")]
        props: Vec<String>,
        /// Print HOA instead of a transition table.
        #[arg(long)]
        hoa: bool,
    },
}

/// Config overrides. Schedules take `v` for a constant or `start:end` for a
/// decay over the episodes.
#[derive(Args, Clone, Default)]
struct Flags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r_safety: Option<f64>,
    #[arg(long)]
    r_ltl: Option<f64>,
    #[arg(long, value_parser = ScheduleConfig::parse_flag)]
    tau_safety: Option<ScheduleConfig>,
    #[arg(long, value_parser = ScheduleConfig::parse_flag)]
    tau_ltl: Option<ScheduleConfig>,
    #[arg(long, value_parser = ScheduleConfig::parse_flag)]
    upsilon: Option<ScheduleConfig>,
    #[arg(long, value_parser = ScheduleConfig::parse_flag)]
    epsilon: Option<ScheduleConfig>,
    #[arg(long, value_parser = ScheduleConfig::parse_flag)]
    alpha: Option<ScheduleConfig>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the config's [paper_scale] episode and horizon counts.
    #[arg(long)]
    paper_scale: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            gamma: self.gamma,
            r_safety: self.r_safety,
            r_ltl: self.r_ltl,
            alpha: self.alpha,
            epsilon: self.epsilon,
            upsilon: self.upsilon,
            tau_safety: self.tau_safety,
            tau_ltl: self.tau_ltl,
            episodes: self.episodes,
            horizon: self.horizon,
            seed: self.seed,
            output: self.out.clone(),
            paper_scale: self.paper_scale,
        }
    }
}

fn emit_json<T: serde::Serialize>(value: &T, file: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(path) = file {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            flags,
            runs,
        } => {
            let r = ExperimentConfig::load(&config, &flags.overrides())?;
            for (seed, e) in commands::run(&r, runs)? {
                println!(
                    "seed {seed}: return {:.4} ± {:.4} ({} of {} episodes), safety {:.4}, buchi {:.4}",
                    e.mean_return, e.stderr, e.counted, e.episodes, e.safety_freq, e.buchi_freq
                );
            }
            println!("artifacts in {}", r.config.output.display());
        }
        Command::Verify {
            config,
            checkpoint,
            flags,
            at,
            min_visits,
            report,
        } => {
            let r = ExperimentConfig::load(&config, &flags.overrides())?;
            let b = r.build()?;
            let ck = Checkpoint::load(&checkpoint)
                .with_context(|| format!("reading {}", checkpoint.display()))?;
            let rep = commands::verify(&b.product, &ck, at.as_deref(), min_visits)?;
            emit_json(&rep, report.as_ref())?;
        }
        Command::Render { policy, out } => {
            let text = fs::read_to_string(&policy)
                .with_context(|| format!("reading {}", policy.display()))?;
            let export: PolicyExport =
                serde_json::from_str(&text).context("parsing policy export")?;
            let dir = out.unwrap_or_else(|| policy.parent().map(PathBuf::from).unwrap_or_default());
            if let Some(t) = render::ascii(&export) {
                print!("{t}");
            } else {
                log::warn!("policy has no grid; writing CSV only");
            }
            for path in commands::render(&export, &dir)? {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Oracle {
            config,
            flags,
            report,
        } => {
            let r = ExperimentConfig::load(&config, &flags.overrides())?;
            let b = r.build()?;
            emit_json(&commands::oracle(&b.product), report.as_ref())?;
        }
        Command::Translate {
            formula,
            props,
            hoa,
        } => {
            let props: Vec<String> = props.into_iter().filter(|p| !p.is_empty()).collect();
            print!("{}", commands::translate(&formula, &props, hoa)?);
        }
    }
    Ok(())
}
