//! The controllers: a PID bank, a deep Q-network and an actor-critic agent,
//! plus the replay buffer and exploration schedule the learners share.

pub mod actor_critic;
pub mod dqn;
mod manifest;
pub mod pid;
pub mod replay;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use actor_critic::{ActorCriticAgent, Critic, CriticCache, CriticGrads};
pub use dqn::DqnAgent;
pub use manifest::Manifest;
pub use replay::{Batch, ReplayBuffer, Transition};

use crate::env::{Action, ObservableState};
use crate::error::{Error, Result};

pub const GAMMA: f64 = 0.99;
pub const TAU: f64 = 0.001;
pub const ACTOR_LR: f64 = 1e-4;
pub const CRITIC_LR: f64 = 1e-3;
/// Hidden widths shared by the actor and the Q-network.
pub const HIDDEN: [usize; 3] = [128, 128, 32];

/// Network input: scalars scaled by 1/100, flags as 0/1, in sensor order.
pub fn normalize_obs(o: &ObservableState) -> [f64; ObservableState::LEN] {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    [
        o.temp_in / 100.0,
        o.air_humidity / 100.0,
        o.ground_humidity / 100.0,
        o.plant_height / 100.0,
        o.pesticide_density / 100.0,
        flag(o.human_present),
        flag(o.insect_present),
    ]
}

pub fn one_hot(index: usize) -> [f64; Action::COUNT] {
    let mut v = [0.0; Action::COUNT];
    v[index] = 1.0;
    v
}

/// Exploration probability per episode. Every variant starts at 0.95.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSchedule {
    /// ×0.9 every 9 episodes, floor 0.05.
    #[default]
    Geometric,
    /// ×0.1 every 9 episodes, floor 0.05.
    Tenfold,
    /// Straight line down to 0.10 over the first 9 episodes, then flat.
    Linear,
}

impl EpsSchedule {
    pub const START: f64 = 0.95;
    pub const FLOOR: f64 = 0.05;
    pub const PERIOD: u64 = 9;

    pub fn epsilon(self, episode: u64) -> f64 {
        let steps = (episode / Self::PERIOD).min(i32::MAX as u64) as i32;
        match self {
            EpsSchedule::Geometric => (Self::START * 0.9f64.powi(steps)).max(Self::FLOOR),
            EpsSchedule::Tenfold => (Self::START * 0.1f64.powi(steps)).max(Self::FLOOR),
            EpsSchedule::Linear => {
                let frac = (episode as f64 / Self::PERIOD as f64).min(1.0);
                Self::START + (0.10 - Self::START) * frac
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EpsSchedule::Geometric => "geometric",
            EpsSchedule::Tenfold => "tenfold",
            EpsSchedule::Linear => "linear",
        }
    }
}

impl FromStr for EpsSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(EpsSchedule::Geometric),
            "tenfold" => Ok(EpsSchedule::Tenfold),
            "linear" => Ok(EpsSchedule::Linear),
            _ => Err(Error::Usage(format!(
                "unknown epsilon schedule `{s}` (expected geometric, tenfold or linear)"
            ))),
        }
    }
}

impl fmt::Display for EpsSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ε(e) = max(0.05, 0.95 · 0.9^⌊e/9⌋)`.
pub fn eps_schedule(episode: u64) -> f64 {
    EpsSchedule::Geometric.epsilon(episode)
}

/// Index drawn from a probability vector by inverse CDF.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Ac,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ac => "ac",
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(AgentKind::Dqn),
            "ac" => Ok(AgentKind::Ac),
            _ => Err(Error::Usage(format!("unknown agent `{s}` (expected dqn or ac)"))),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either learner behind one interface, for the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Dqn(DqnAgent),
    Ac(ActorCriticAgent),
}

impl Agent {
    pub fn new(kind: AgentKind, seed: u64) -> Self {
        match kind {
            AgentKind::Dqn => Agent::Dqn(DqnAgent::new(seed)),
            AgentKind::Ac => Agent::Ac(ActorCriticAgent::new(seed)),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Dqn(_) => AgentKind::Dqn,
            Agent::Ac(_) => AgentKind::Ac,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Agent::Dqn(a) => a.epsilon,
            Agent::Ac(a) => a.epsilon,
        }
    }

    pub fn set_epsilon(&mut self, eps: f64) {
        match self {
            Agent::Dqn(a) => a.epsilon = eps,
            Agent::Ac(a) => a.epsilon = eps,
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64; ObservableState::LEN], rng: &mut R) -> Result<usize> {
        match self {
            Agent::Dqn(a) => a.act(obs, rng),
            Agent::Ac(a) => a.act(obs, rng).map(|(i, _)| i),
        }
    }

    /// One learning step; returns the (critic or Q) loss before the update.
    pub fn train_step(&mut self, batch: &Batch) -> Result<f64> {
        match self {
            Agent::Dqn(a) => a.train_step(batch),
            Agent::Ac(a) => a.train_step(batch).map(|(loss, _)| loss),
        }
    }

    pub fn save(&self, dir: &Path, episode: u64) -> Result<()> {
        match self {
            Agent::Dqn(a) => a.save(dir, episode),
            Agent::Ac(a) => a.save(dir, episode),
        }
    }

    /// Loads whichever agent the manifest in `dir` names, with its episode counter.
    pub fn load(dir: &Path) -> Result<(Self, u64)> {
        let m = Manifest::load(dir)?;
        let agent = match m.kind {
            AgentKind::Dqn => Agent::Dqn(DqnAgent::load_with(dir, &m)?),
            AgentKind::Ac => Agent::Ac(ActorCriticAgent::load_with(dir, &m)?),
        };
        Ok((agent, m.episode))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalization() {
        let o = ObservableState {
            temp_in: 21.0,
            air_humidity: 50.0,
            ground_humidity: 0.0,
            plant_height: 100.0,
            pesticide_density: 3.0,
            human_present: true,
            insect_present: false,
        };
        assert_eq!(normalize_obs(&o), [0.21, 0.5, 0.0, 1.0, 0.03, 1.0, 0.0]);
        let zero = ObservableState {
            temp_in: 0.0,
            air_humidity: 0.0,
            ground_humidity: 0.0,
            plant_height: 0.0,
            pesticide_density: 0.0,
            human_present: false,
            insect_present: false,
        };
        assert_eq!(normalize_obs(&zero), [0.0; 7]);
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(eps_schedule(0), 0.95);
        assert_eq!(eps_schedule(8), 0.95);
        assert!((eps_schedule(9) - 0.855).abs() < 1e-12);
        assert_eq!(eps_schedule(10_000), 0.05);
        assert!((EpsSchedule::Tenfold.epsilon(9) - 0.095).abs() < 1e-12);
        assert_eq!(EpsSchedule::Tenfold.epsilon(18), 0.05);
        assert_eq!(EpsSchedule::Linear.epsilon(0), 0.95);
        assert!((EpsSchedule::Linear.epsilon(9) - 0.10).abs() < 1e-12);
        assert!((EpsSchedule::Linear.epsilon(500) - 0.10).abs() < 1e-12);
        assert!(EpsSchedule::Linear.epsilon(4) < 0.95 && EpsSchedule::Linear.epsilon(4) > 0.10);
        for s in [EpsSchedule::Geometric, EpsSchedule::Tenfold, EpsSchedule::Linear] {
            assert_eq!(s.name().parse::<EpsSchedule>().unwrap(), s);
        }
    }

    #[test]
    fn epsilon_never_increases() {
        for s in [EpsSchedule::Geometric, EpsSchedule::Tenfold, EpsSchedule::Linear] {
            let mut prev = 1.0;
            for e in 0..1000 {
                let eps = s.epsilon(e);
                assert!(eps <= prev && (0.0..=1.0).contains(&eps));
                prev = eps;
            }
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0; 8]), 0);
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0]), 7);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn sampling_follows_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = [0.1, 0.6, 0.3];
        let mut counts = [0usize; 3];
        let n = 20_000;
        for _ in 0..n {
            counts[sample_index(&p, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(p) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.015);
        }
    }

    #[test]
    fn one_hot_vector() {
        let v = one_hot(3);
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), 7);
        assert_eq!(v[3], 1.0);
    }
}
