//! Seeded experiment orchestration: episodes, training, evaluation and the
//! statistics reported over them.

mod io;
mod stats;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{read_metrics, write_episode_logs, write_metrics, write_stats, METRICS_HEADER, STATS_HEADER};
pub use stats::{aggregate, rolling_mean, ScoreStats, Summary, ROLLING_WINDOW};
pub use train::{
    checkpoint_agent_dir, episode_seed, train, train_with, TrainConfig, TrainOutcome, TrainRecord, CHECKPOINT_EVERY,
    WARMUP,
};

use crate::agents::pid::{pid_policy, PidBank, PidTrial};
use crate::agents::{normalize_obs, Agent};
use crate::env::{Action, EnvConfig, Greenhouse, TerminalReason, TraceRecord};
use crate::error::{Error, Result};

/// Default first seed for evaluation runs.
pub const EVAL_BASE_SEED: u64 = 1_000_000;

/// A controller an episode can be run with.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    NoOp,
    /// Uniform over the 8 agent actions.
    Random,
    Pid(PidTrial),
    /// Acts with the agent's own ε; callers freeze it first for evaluation.
    Agent(&'a Agent),
}

impl Policy<'_> {
    pub fn label(&self) -> String {
        match self {
            Policy::NoOp => "noop".into(),
            Policy::Random => "random".into(),
            Policy::Pid(t) => format!("pid_{}", t.to_string().to_lowercase()),
            Policy::Agent(a) => a.kind().to_string(),
        }
    }
}

/// Names accepted on the command line for the fixed baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    NoOp,
    Random,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noop" => Ok(Baseline::NoOp),
            "random" => Ok(Baseline::Random),
            _ => Err(Error::Usage(format!("unknown policy `{s}` (expected noop or random)"))),
        }
    }
}

impl Baseline {
    pub fn policy(self) -> Policy<'static> {
        match self {
            Baseline::NoOp => Policy::NoOp,
            Baseline::Random => Policy::Random,
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::NoOp => "noop",
            Baseline::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub policy: String,
    pub records: Vec<TraceRecord>,
    /// Hours survived.
    pub score: u32,
    pub reason: TerminalReason,
}

/// Seed for the policy's own randomness in an episode, kept apart from the
/// environment stream.
pub fn policy_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs one episode from reset to termination.
pub fn run_episode(config: &EnvConfig, policy: Policy, seed: u64) -> Result<EpisodeLog> {
    let mut env = Greenhouse::new(config.clone())?;
    let mut obs = env.reset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(policy_seed(seed));
    let mut bank = PidBank::for_config(config);
    let mut records = Vec::new();
    let mut score = 0;
    loop {
        let action = match policy {
            Policy::NoOp => Action::NoOp,
            Policy::Random => Action::AGENT_ACTIONS[rng.gen_range(0..Action::COUNT)],
            Policy::Pid(trial) => pid_policy(&obs, &mut bank, trial, env.clock()),
            Policy::Agent(agent) => {
                let i = agent.act(&normalize_obs(&obs), &mut rng)?;
                Action::from_index(i)
                    .ok_or_else(|| Error::Usage(format!("agent emitted action index {i}")))?
            }
        };
        let step = env.step(action)?;
        if step.reason.survived() {
            score += 1;
        }
        records.push(TraceRecord::new(env.clock(), action, &step));
        obs = step.observation;
        if step.done {
            return Ok(EpisodeLog {
                seed,
                policy: policy.label(),
                records,
                score,
                reason: step.reason,
            });
        }
    }
}

/// Scores of episodes `base_seed..base_seed + n`, optionally keeping the logs.
pub fn run_episodes(
    config: &EnvConfig,
    policy: Policy,
    n: u64,
    base_seed: u64,
    keep_logs: bool,
) -> Result<(ScoreStats, Vec<EpisodeLog>)> {
    let mut scores = Vec::with_capacity(n as usize);
    let mut logs = Vec::new();
    for seed in base_seed..base_seed + n {
        let log = run_episode(config, policy, seed)?;
        scores.push(log.score as f64);
        if keep_logs {
            logs.push(log);
        }
    }
    Ok((ScoreStats::from_scores(&policy.label(), scores)?, logs))
}

/// Statistics over `n` episodes with seeds `base_seed..base_seed + n`.
/// Agents are evaluated frozen with ε = 0 (their softmax still samples).
pub fn evaluate(config: &EnvConfig, policy: Policy, n: u64, base_seed: u64) -> Result<ScoreStats> {
    evaluate_parallel(config, policy, n, base_seed, 1)
}

/// As [`evaluate`], split over `workers` threads; the result does not depend
/// on the worker count.
pub fn evaluate_parallel(
    config: &EnvConfig,
    policy: Policy,
    n: u64,
    base_seed: u64,
    workers: usize,
) -> Result<ScoreStats> {
    let frozen;
    let policy = match policy {
        Policy::Agent(a) => {
            let mut f = a.clone();
            f.set_epsilon(0.0);
            frozen = f;
            Policy::Agent(&frozen)
        }
        p => p,
    };
    let workers = workers.clamp(1, n.max(1) as usize) as u64;
    if workers == 1 {
        return run_episodes(config, policy, n, base_seed, false).map(|(s, _)| s);
    }
    let chunk = n.div_ceil(workers);
    let parts: Vec<Result<ScoreStats>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| (base_seed + w * chunk, (base_seed + (w + 1) * chunk).min(base_seed + n)))
            .filter(|(lo, hi)| lo < hi)
            .map(|(lo, hi)| scope.spawn(move || run_episodes(config, policy, hi - lo, lo, false).map(|(s, _)| s)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut merged: Option<ScoreStats> = None;
    for p in parts {
        let p = p?;
        merged = Some(match merged {
            None => p,
            Some(m) => m.merge(&p)?,
        });
    }
    merged.ok_or_else(|| Error::Usage("evaluation needs at least one episode".into()))
}
