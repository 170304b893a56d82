//! `greenhouse`: simulate baselines, run the PID trials, train and evaluate
//! the learning agents, and summarize training curves.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use greenhouse_core::agents::pid::PidTrial;
use greenhouse_core::agents::{Agent, AgentKind, EpsSchedule};
use greenhouse_core::env::EnvConfig;
use greenhouse_core::harness::{
    self, aggregate, checkpoint_agent_dir, read_metrics, run_episodes, write_episode_logs, write_metrics,
    write_stats, Baseline, Policy, TrainConfig, EVAL_BASE_SEED,
};
use greenhouse_core::Error;

#[derive(Debug, Parser)]
#[command(name = "greenhouse", version, about = "Greenhouse-control simulator and controller benchmarks")]
struct Cli {
    /// Environment constants (key = value file). Built-in defaults otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Progress on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a fixed baseline policy.
    Simulate {
        #[arg(long, default_value = "noop")]
        policy: Baseline,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run one of the PID trials.
    Pid {
        #[arg(long)]
        trial: PidTrial,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a learning agent.
    Train {
        #[arg(long)]
        agent: AgentKind,
        #[arg(long, default_value_t = 2000)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-episode CSV.
        #[arg(long, value_name = "PATH")]
        metrics: PathBuf,
        /// Checkpoint directory; an existing checkpoint there is resumed.
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        #[arg(long, default_value = "geometric")]
        eps_schedule: EpsSchedule,
        /// Write 0 in the seconds column so metrics are byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Evaluate a trained agent with exploration off.
    Eval {
        #[arg(long)]
        agent: AgentKind,
        /// A training checkpoint directory or an agent directory.
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        #[arg(long, default_value_t = EVAL_BASE_SEED)]
        seed: u64,
        /// Stats CSV; stdout otherwise.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rolling-mean curve and summary of a training metrics file.
    Report {
        #[arg(long, value_name = "PATH")]
        metrics: PathBuf,
        /// Curve CSV (episode,score,rolling_mean).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Score thresholds for episodes-to-threshold.
        #[arg(long, value_delimiter = ',', default_values_t = [50.0, 200.0])]
        threshold: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    episodes: u64,
    /// First episode seed; episodes use seed..seed+episodes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Episode logs as JSONL.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Stats CSV; stdout otherwise.
    #[arg(long, value_name = "PATH")]
    stats: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("greenhouse: {e}");
            ExitCode::from(match e {
                Error::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let env = match &cli.config {
        Some(p) => EnvConfig::load(p)?,
        None => EnvConfig::default(),
    };
    env.validate()?;
    match cli.command {
        Command::Simulate { policy, run } => baseline(&env, policy.policy(), &run),
        Command::Pid { trial, run } => baseline(&env, Policy::Pid(trial), &run),
        Command::Train {
            agent,
            episodes,
            seed,
            metrics,
            checkpoint,
            eps_schedule,
            no_timing,
        } => {
            positive(episodes)?;
            // Fail on bad paths before hours of training.
            let metrics_file = create(&metrics)?;
            std::fs::create_dir_all(&checkpoint).map_err(|e| io_context(&checkpoint, e))?;
            let mut config = TrainConfig::new(agent, episodes, seed);
            config.env = env;
            config.schedule = eps_schedule;
            config.checkpoint_dir = Some(checkpoint);
            config.record_time = !no_timing;
            let verbose = cli.verbose;
            let mut window = Vec::new();
            let outcome = harness::train_with(&config, |r| {
                window.push(r.score as f64);
                if verbose > 0 && (r.episode + 1) % 100 == 0 {
                    let recent = &window[window.len().saturating_sub(100)..];
                    eprintln!(
                        "episode {:>5}  mean score (last {}) {:>7.1}  epsilon {:.3}",
                        r.episode + 1,
                        recent.len(),
                        recent.iter().sum::<f64>() / recent.len() as f64,
                        r.epsilon
                    );
                }
            })?;
            write_metrics(BufWriter::new(metrics_file), &outcome.records)
        }
        Command::Eval {
            agent,
            checkpoint,
            episodes,
            seed,
            out,
            jobs,
        } => {
            positive(episodes)?;
            let dir = checkpoint_agent_dir(&checkpoint).unwrap_or(checkpoint.clone());
            if !dir.join("manifest.txt").is_file() {
                return Err(Error::Config(format!("no agent checkpoint in {}", checkpoint.display())));
            }
            let sink = output(out.as_deref())?;
            let (loaded, _) = Agent::load(&dir)?;
            if loaded.kind() != agent {
                return Err(Error::Config(format!(
                    "{} holds a {} agent, not {agent}",
                    dir.display(),
                    loaded.kind()
                )));
            }
            let stats = harness::evaluate_parallel(&env, Policy::Agent(&loaded), episodes, seed, jobs)?;
            write_stats(sink, &[stats])
        }
        Command::Report { metrics, out, threshold } => {
            let file = File::open(&metrics).map_err(|e| io_context(&metrics, e))?;
            let records = read_metrics(io::BufReader::new(file))?;
            let summary = aggregate(&records, &threshold)?;
            let mut w = BufWriter::new(create(&out)?);
            writeln!(w, "episode,score,rolling_mean")?;
            for (r, m) in records.iter().zip(&summary.rolling) {
                writeln!(w, "{},{},{}", r.episode, r.score, m)?;
            }
            w.flush()?;
            let mut o = io::stdout().lock();
            writeln!(o, "episodes,{}", summary.episodes)?;
            writeln!(o, "peak,{}", summary.peak)?;
            writeln!(o, "peak_episode,{}", summary.peak_episode)?;
            writeln!(o, "final_rolling_mean,{}", summary.final_rolling)?;
            for (t, e) in &summary.thresholds {
                let e = e.map_or_else(|| "none".to_string(), |e| e.to_string());
                writeln!(o, "episodes_to_{t},{e}")?;
            }
            Ok(())
        }
    }
}

fn baseline(env: &EnvConfig, policy: Policy, run: &RunArgs) -> Result<(), Error> {
    positive(run.episodes)?;
    let logs_file = create(&run.out)?;
    let stats_sink = output(run.stats.as_deref())?;
    let (stats, logs) = run_episodes(env, policy, run.episodes, run.seed, true)?;
    write_episode_logs(BufWriter::new(logs_file), &logs)?;
    write_stats(stats_sink, &[stats])
}

fn positive(episodes: u64) -> Result<(), Error> {
    if episodes == 0 {
        return Err(Error::Usage("--episodes must be at least 1".into()));
    }
    Ok(())
}

fn io_context(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File, Error> {
    File::create(path).map_err(|e| io_context(path, e))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}
