use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::replay::{BATCH_SIZE, DEFAULT_CAPACITY};
use crate::agents::{normalize_obs, Agent, AgentKind, EpsSchedule, ReplayBuffer, Transition};
use crate::env::{Action, EnvConfig, Greenhouse, TerminalReason};
use crate::error::{Error, Result};

/// Learning starts once the buffer holds this many transitions.
pub const WARMUP: usize = BATCH_SIZE;
pub const CHECKPOINT_EVERY: u64 = 100;

const LATEST: &str = "latest";
const PREVIOUS: &str = "previous";
const STAGING: &str = "staging";
const STATE_FILE: &str = "trainer.json";
const AGENT_DIR: &str = "agent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub episode: u64,
    pub score: u32,
    pub epsilon: f64,
    /// Mean training loss over the episode; empty while the buffer warms up.
    pub loss: Option<f64>,
    /// Wall-clock time of the episode; 0 when timing is disabled.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub kind: AgentKind,
    /// Total episodes, counting any already in a checkpoint.
    pub episodes: u64,
    pub seed: u64,
    pub env: EnvConfig,
    pub schedule: EpsSchedule,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// When set, training state is saved here every `checkpoint_every`
    /// episodes and at the end, and an existing checkpoint is resumed.
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: u64,
    /// Record wall-clock seconds. Off gives byte-reproducible metrics.
    pub record_time: bool,
}

impl TrainConfig {
    pub fn new(kind: AgentKind, episodes: u64, seed: u64) -> Self {
        Self {
            kind,
            episodes,
            seed,
            env: EnvConfig::default(),
            schedule: EpsSchedule::default(),
            replay_capacity: DEFAULT_CAPACITY,
            batch_size: BATCH_SIZE,
            checkpoint_dir: None,
            checkpoint_every: CHECKPOINT_EVERY,
            record_time: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub records: Vec<TrainRecord>,
}

/// Everything besides the agent that a resumed run needs to continue exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainerState {
    kind: AgentKind,
    seed: u64,
    schedule: EpsSchedule,
    episodes_done: u64,
    rng: ChaCha8Rng,
    buffer: ReplayBuffer,
    records: Vec<TrainRecord>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Environment seed of training episode `episode`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    mix(seed ^ mix(episode))
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(config, |_| {})
}

/// As [`train`], calling `observer` after every episode.
pub fn train_with(config: &TrainConfig, mut observer: impl FnMut(&TrainRecord)) -> Result<TrainOutcome> {
    if config.episodes == 0 {
        return Err(Error::Usage("training needs at least one episode".into()));
    }
    if config.batch_size == 0 || config.replay_capacity < config.batch_size {
        return Err(Error::Config("replay capacity must hold at least one batch".into()));
    }
    let resumed = match &config.checkpoint_dir {
        Some(dir) => load_checkpoint(dir, config)?,
        None => None,
    };
    let (mut agent, mut state) = match resumed {
        Some(r) => r,
        None => (
            Agent::new(config.kind, config.seed),
            TrainerState {
                kind: config.kind,
                seed: config.seed,
                schedule: config.schedule,
                episodes_done: 0,
                rng: ChaCha8Rng::seed_from_u64(mix(config.seed ^ 0xa6e4_7000)),
                buffer: ReplayBuffer::new(config.replay_capacity),
                records: Vec::new(),
            },
        ),
    };
    if state.episodes_done > config.episodes {
        return Err(Error::Config(format!(
            "checkpoint already holds {} episodes, more than the {} requested",
            state.episodes_done, config.episodes
        )));
    }

    let mut env = Greenhouse::new(config.env.clone())?;
    let warmup = WARMUP.max(config.batch_size);
    while state.episodes_done < config.episodes {
        let episode = state.episodes_done;
        let started = Instant::now();
        let epsilon = config.schedule.epsilon(episode);
        agent.set_epsilon(epsilon);

        let mut obs = normalize_obs(&env.reset(episode_seed(config.seed, episode)));
        let (mut score, mut loss_sum, mut loss_n) = (0u32, 0.0, 0u32);
        loop {
            let index = agent.act(&obs, &mut state.rng)?;
            let action = Action::from_index(index)
                .ok_or_else(|| Error::Usage(format!("agent emitted action index {index}")))?;
            let step = env.step(action)?;
            if step.reason.survived() {
                score += 1;
            }
            let next = normalize_obs(&step.observation);
            state.buffer.push(Transition {
                obs,
                action: index,
                reward: step.reward,
                next_obs: next,
                // Hitting the cap truncates; the value beyond it is still bootstrapped.
                done: step.done && step.reason != TerminalReason::EpisodeCap,
            });
            if state.buffer.len() >= warmup {
                let batch = state
                    .buffer
                    .sample_batch(config.batch_size, &mut state.rng)
                    .expect("buffer is past warm-up");
                loss_sum += agent.train_step(&batch)?;
                loss_n += 1;
            }
            obs = next;
            if step.done {
                break;
            }
        }

        let record = TrainRecord {
            episode,
            score,
            epsilon,
            loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
            seconds: if config.record_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        observer(&record);
        state.records.push(record);
        state.episodes_done += 1;

        if let Some(dir) = &config.checkpoint_dir {
            let every = config.checkpoint_every.max(1);
            if state.episodes_done % every == 0 || state.episodes_done == config.episodes {
                save_checkpoint(dir, &agent, &state)?;
            }
        }
    }
    Ok(TrainOutcome {
        agent,
        records: state.records,
    })
}

/// The agent directory inside a training checkpoint directory, if there is one.
pub fn checkpoint_agent_dir(dir: &Path) -> Option<PathBuf> {
    [LATEST, PREVIOUS]
        .iter()
        .map(|d| dir.join(d))
        .find(|d| d.join(STATE_FILE).is_file())
        .map(|d| d.join(AGENT_DIR))
}

fn save_checkpoint(dir: &Path, agent: &Agent, state: &TrainerState) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let staging = dir.join(STAGING);
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    std::fs::create_dir_all(&staging)?;
    agent.save(&staging.join(AGENT_DIR), state.episodes_done)?;
    let file = std::fs::File::create(staging.join(STATE_FILE))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, state)?;
    std::io::Write::flush(&mut w)?;

    // Keep the last complete checkpoint until the new one is in place.
    let latest = dir.join(LATEST);
    let previous = dir.join(PREVIOUS);
    if previous.exists() {
        std::fs::remove_dir_all(&previous)?;
    }
    if latest.exists() {
        std::fs::rename(&latest, &previous)?;
    }
    std::fs::rename(&staging, &latest)?;
    if previous.exists() {
        std::fs::remove_dir_all(&previous)?;
    }
    Ok(())
}

fn load_checkpoint(dir: &Path, config: &TrainConfig) -> Result<Option<(Agent, TrainerState)>> {
    let Some(agent_dir) = checkpoint_agent_dir(dir) else {
        return Ok(None);
    };
    let root = agent_dir.parent().expect("agent dir has a parent");
    let corrupt = |e: Error| Error::Config(format!("corrupt checkpoint in {}: {e}", root.display()));
    let file = std::fs::File::open(root.join(STATE_FILE))?;
    let state: TrainerState =
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| corrupt(e.into()))?;
    let (agent, episode) = Agent::load(&agent_dir).map_err(corrupt)?;
    if episode != state.episodes_done || agent.kind() != state.kind {
        return Err(corrupt(Error::Config("agent files and trainer state disagree".into())));
    }
    if state.records.len() as u64 != state.episodes_done {
        return Err(corrupt(Error::Config("record count does not match episode count".into())));
    }
    if state.kind != config.kind || state.seed != config.seed || state.schedule != config.schedule {
        return Err(Error::Config(format!(
            "checkpoint in {} was made with agent {}, seed {}, schedule {}; refusing to resume with agent {}, seed {}, schedule {}",
            root.display(),
            state.kind,
            state.seed,
            state.schedule,
            config.kind,
            config.seed,
            config.schedule
        )));
    }
    Ok(Some((agent, state)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: AgentKind, episodes: u64) -> TrainConfig {
        let mut c = TrainConfig::new(kind, episodes, 3);
        c.batch_size = 16;
        c.replay_capacity = 500;
        c.record_time = false;
        c
    }

    #[test]
    fn one_episode_one_record() {
        let out = train(&quick(AgentKind::Dqn, 1)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].episode, 0);
        assert_eq!(out.records[0].epsilon, 0.95);
    }

    #[test]
    fn zero_episodes_rejected() {
        assert!(matches!(train(&quick(AgentKind::Ac, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn episode_indices_increase_and_loss_appears() {
        let out = train(&quick(AgentKind::Dqn, 120)).unwrap();
        assert!(out.records.windows(2).all(|w| w[1].episode == w[0].episode + 1));
        assert!(out.records.iter().any(|r| r.loss.is_some()));
        assert!(out.records.iter().all(|r| r.seconds == 0.0));
    }

    #[test]
    fn episode_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|e| episode_seed(1, e)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(episode_seed(1, 0), episode_seed(2, 0));
    }
}
