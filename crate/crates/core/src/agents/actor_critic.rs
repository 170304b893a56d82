//! Policy-gradient learner: a softmax actor trained through the action
//! gradient of a two-branch critic.
//!
//! The critic encodes the observation (7→128 ReLU → 128→128 linear) and the
//! action (8→128 linear) separately, adds the two, applies ReLU and reads Q
//! off a 128→1 head. The actor step follows `∇_a Q(s, π(s))` back through the
//! actor, using the full softmax vector as the action.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{sample_index, AgentKind, Batch, Manifest, ACTOR_LR, CRITIC_LR, GAMMA, HIDDEN, TAU};
use crate::env::{Action, ObservableState};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Adam, ForwardCache, MlpNet, ParamGrads};

pub const CRITIC_WIDTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub obs_branch: MlpNet,
    pub action_branch: MlpNet,
    pub head: MlpNet,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    obs: ForwardCache,
    action: ForwardCache,
    /// Sum of the two branches, before the ReLU.
    pub fused: Array2<f64>,
    head: ForwardCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGrads {
    pub obs_branch: ParamGrads,
    pub action_branch: ParamGrads,
    pub head: ParamGrads,
}

impl CriticGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.obs_branch.to_flat();
        v.extend(self.action_branch.to_flat());
        v.extend(self.head.to_flat());
        v
    }
}

const OBS_SIZES: [usize; 3] = [ObservableState::LEN, CRITIC_WIDTH, CRITIC_WIDTH];
const OBS_ACTS: [Activation; 2] = [Activation::Relu, Activation::Linear];
const ACTION_SIZES: [usize; 2] = [Action::COUNT, CRITIC_WIDTH];
const HEAD_SIZES: [usize; 2] = [CRITIC_WIDTH, 1];
const LINEAR: [Activation; 1] = [Activation::Linear];

impl Critic {
    pub fn new(seed: u64) -> Self {
        Self {
            obs_branch: MlpNet::new(&OBS_SIZES, &OBS_ACTS, seed).expect("fixed topology"),
            action_branch: MlpNet::new(&ACTION_SIZES, &LINEAR, seed.wrapping_add(1)).expect("fixed topology"),
            head: MlpNet::new(&HEAD_SIZES, &LINEAR, seed.wrapping_add(2)).expect("fixed topology"),
        }
    }

    pub fn zeros() -> Self {
        Self {
            obs_branch: MlpNet::zeros(&OBS_SIZES, &OBS_ACTS).expect("fixed topology"),
            action_branch: MlpNet::zeros(&ACTION_SIZES, &LINEAR).expect("fixed topology"),
            head: MlpNet::zeros(&HEAD_SIZES, &LINEAR).expect("fixed topology"),
        }
    }

    fn has_topology(&self) -> bool {
        self.obs_branch.sizes() == OBS_SIZES
            && self.obs_branch.activations() == OBS_ACTS
            && self.action_branch.sizes() == ACTION_SIZES
            && self.action_branch.activations() == LINEAR
            && self.head.sizes() == HEAD_SIZES
            && self.head.activations() == LINEAR
    }

    pub fn parts(&self) -> [&MlpNet; 3] {
        [&self.obs_branch, &self.action_branch, &self.head]
    }

    pub fn forward_batch(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>) -> Result<(Array1<f64>, CriticCache)> {
        if obs.nrows() != action.nrows() {
            return Err(Error::Dimension {
                expected: obs.nrows(),
                got: action.nrows(),
            });
        }
        let (o, obs_cache) = self.obs_branch.forward_batch(obs)?;
        let (a, action_cache) = self.action_branch.forward_batch(action)?;
        let fused = o + a;
        let hidden = fused.mapv(|v| v.max(0.0));
        let (q, head_cache) = self.head.forward_batch(hidden.view())?;
        let cache = CriticCache {
            obs: obs_cache,
            action: action_cache,
            fused,
            head: head_cache,
        };
        Ok((q.index_axis_move(Axis(1), 0), cache))
    }

    pub fn predict_batch(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>) -> Result<Array1<f64>> {
        let o = self.obs_branch.predict_batch(obs)?;
        let a = self.action_branch.predict_batch(action)?;
        if o.nrows() != a.nrows() {
            return Err(Error::Dimension {
                expected: o.nrows(),
                got: a.nrows(),
            });
        }
        let hidden = (o + a).mapv(|v| v.max(0.0));
        Ok(self.head.predict_batch(hidden.view())?.index_axis_move(Axis(1), 0))
    }

    pub fn forward(&self, obs: &[f64], action: &[f64]) -> Result<(f64, CriticCache)> {
        let (q, cache) = self.forward_batch(row(obs).view(), row(action).view())?;
        Ok((q[0], cache))
    }

    pub fn q(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.predict_batch(row(obs).view(), row(action).view())?[0])
    }

    /// Reverse mode for `Σ dq_i · Q_i`. Returns parameter gradients and the
    /// gradients with respect to the observation and action inputs.
    pub fn backward_batch(
        &self,
        cache: CriticCache,
        dq: ArrayView1<f64>,
    ) -> Result<(CriticGrads, Array2<f64>, Array2<f64>)> {
        let n = cache.fused.nrows();
        if dq.len() != n {
            return Err(Error::Dimension { expected: n, got: dq.len() });
        }
        let dq = dq.to_owned().insert_axis(Axis(1));
        let (head, mut d_fused) = self.head.backward_batch(cache.head, dq.view())?;
        Zip::from(&mut d_fused).and(&cache.fused).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let (obs_branch, d_obs) = self.obs_branch.backward_batch(cache.obs, d_fused.view())?;
        let (action_branch, d_action) = self.action_branch.backward_batch(cache.action, d_fused.view())?;
        Ok((
            CriticGrads {
                obs_branch,
                action_branch,
                head,
            },
            d_obs,
            d_action,
        ))
    }

    pub fn backward(&self, cache: CriticCache, dq: f64) -> Result<(CriticGrads, Vec<f64>, Vec<f64>)> {
        let (g, d_obs, d_action) = self.backward_batch(cache, ndarray::arr1(&[dq]).view())?;
        Ok((g, d_obs.into_raw_vec_and_offset().0, d_action.into_raw_vec_and_offset().0))
    }

    /// Active ReLU units (observation branch hidden layer and fused layer).
    pub fn relu_pattern(&self, cache: &CriticCache) -> Vec<bool> {
        let mut p = crate::numerics::gradcheck::relu_pattern(&self.obs_branch, &cache.obs);
        p.extend(cache.fused.iter().map(|&v| v > 0.0));
        p
    }

    pub fn soft_update(&mut self, source: &Critic, tau: f64) -> Result<()> {
        self.obs_branch.soft_update(&source.obs_branch, tau)?;
        self.action_branch.soft_update(&source.action_branch, tau)?;
        self.head.soft_update(&source.head, tau)
    }

    pub fn param_count(&self) -> usize {
        self.parts().iter().map(|p| p.param_count()).sum()
    }

    /// All parameters: observation branch, action branch, head.
    pub fn to_flat(&self) -> Vec<f64> {
        self.parts().iter().flat_map(|p| p.to_flat()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let a = self.obs_branch.param_count();
        let b = a + self.action_branch.param_count();
        self.obs_branch.set_flat(&flat[..a])?;
        self.action_branch.set_flat(&flat[a..b])?;
        self.head.set_flat(&flat[b..])
    }
}

/// One Adam per critic part.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticAdam {
    pub obs_branch: Adam,
    pub action_branch: Adam,
    pub head: Adam,
}

impl CriticAdam {
    pub fn new(critic: &Critic, lr: f64) -> Self {
        Self {
            obs_branch: Adam::new(&critic.obs_branch, lr),
            action_branch: Adam::new(&critic.action_branch, lr),
            head: Adam::new(&critic.head, lr),
        }
    }

    pub fn step(&mut self, critic: &mut Critic, g: &CriticGrads) -> Result<()> {
        self.obs_branch.step(&mut critic.obs_branch, &g.obs_branch)?;
        self.action_branch.step(&mut critic.action_branch, &g.action_branch)?;
        self.head.step(&mut critic.head, &g.head)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticAgent {
    pub actor: MlpNet,
    pub critic: Critic,
    pub actor_target: MlpNet,
    pub critic_target: Critic,
    pub actor_opt: Adam,
    pub critic_opt: CriticAdam,
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector shape")
}

impl ActorCriticAgent {
    pub fn actor_topology() -> (Vec<usize>, Vec<Activation>) {
        let sizes = [ObservableState::LEN, HIDDEN[0], HIDDEN[1], HIDDEN[2], Action::COUNT];
        let acts = [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Softmax];
        (sizes.to_vec(), acts.to_vec())
    }

    pub fn new(seed: u64) -> Self {
        let (sizes, acts) = Self::actor_topology();
        let actor = MlpNet::new(&sizes, &acts, seed).expect("fixed topology");
        Self::from_parts(actor, Critic::new(seed.wrapping_add(0x5eed)))
    }

    /// Targets start as copies of the live networks.
    pub fn from_parts(actor: MlpNet, critic: Critic) -> Self {
        Self {
            actor_opt: Adam::new(&actor, ACTOR_LR),
            critic_opt: CriticAdam::new(&critic, CRITIC_LR),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            gamma: GAMMA,
            tau: TAU,
            epsilon: 1.0,
        }
    }

    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(obs)
    }

    /// With probability ε a uniform action, otherwise a draw from the actor's
    /// softmax. Returns the index and its one-hot encoding.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(usize, [f64; Action::COUNT])> {
        let index = if rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..Action::COUNT)
        } else {
            sample_index(&self.policy(obs)?, rng)
        };
        Ok((index, super::one_hot(index)))
    }

    /// `r` for terminal transitions, else `r + γ·Q_target(s′, π_target(s′))`.
    pub fn critic_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next_actions = self.actor_target.predict_batch(batch.next_obs.view())?;
        let q_next = self.critic_target.predict_batch(batch.next_obs.view(), next_actions.view())?;
        Ok(q_next
            .iter()
            .zip(batch.rewards.iter().zip(&batch.done))
            .map(|(&q, (&r, &done))| if done { r } else { r + self.gamma * q })
            .collect())
    }

    /// Mean squared error of the critic on `batch` against the current targets.
    pub fn critic_loss(&self, batch: &Batch) -> Result<f64> {
        let y = self.critic_targets(batch)?;
        let q = self.critic.predict_batch(batch.obs.view(), batch.one_hot_actions().view())?;
        Ok(q.iter().zip(&y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / batch.len() as f64)
    }

    /// Critic step, then actor step, then soft target updates. Returns the
    /// critic loss before its step and the norm of the actor gradient.
    pub fn train_step(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty training batch".into()));
        }
        let n = batch.len() as f64;

        let y = self.critic_targets(batch)?;
        let (q, cache) = self.critic.forward_batch(batch.obs.view(), batch.one_hot_actions().view())?;
        let mut loss = 0.0;
        let dq: Array1<f64> = q
            .iter()
            .zip(&y)
            .map(|(q, y)| {
                let e = q - y;
                loss += e * e;
                2.0 * e / n
            })
            .collect();
        let (grads, _, _) = self.critic.backward_batch(cache, dq.view())?;
        self.critic_opt.step(&mut self.critic, &grads)?;

        let actor_norm = self.actor_step(batch.obs.view())?;

        self.actor_target.soft_update(&self.actor, self.tau)?;
        self.critic_target.soft_update(&self.critic, self.tau)?;
        Ok((loss / n, actor_norm))
    }

    /// Ascends the batch-mean of `Q(s, π(s))` with respect to the actor.
    fn actor_step(&mut self, obs: ArrayView2<f64>) -> Result<f64> {
        let (probs, actor_cache) = self.actor.forward_batch(obs)?;
        let (_, cache) = self.critic.forward_batch(obs, probs.view())?;
        // Minimizing −mean Q.
        let dq = Array1::from_elem(obs.nrows(), -1.0 / obs.nrows() as f64);
        let (_, _, d_action) = self.critic.backward_batch(cache, dq.view())?;
        let (grads, _) = self.actor.backward_batch(actor_cache, d_action.view())?;
        let norm = grads.l2_norm();
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(norm)
    }

    pub fn save(&self, dir: &Path, episode: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.actor.save(dir.join("actor.net"))?;
        self.actor_target.save(dir.join("actor_target.net"))?;
        self.actor_opt.save(dir.join("actor.adam"))?;
        for (name, live, target, opt) in [
            ("obs", &self.critic.obs_branch, &self.critic_target.obs_branch, &self.critic_opt.obs_branch),
            ("action", &self.critic.action_branch, &self.critic_target.action_branch, &self.critic_opt.action_branch),
            ("head", &self.critic.head, &self.critic_target.head, &self.critic_opt.head),
        ] {
            live.save(dir.join(format!("critic_{name}.net")))?;
            target.save(dir.join(format!("critic_{name}_target.net")))?;
            opt.save(dir.join(format!("critic_{name}.adam")))?;
        }
        Manifest {
            kind: AgentKind::Ac,
            gamma: self.gamma,
            tau: self.tau,
            epsilon: self.epsilon,
            episode,
        }
        .save(dir)
    }

    pub fn load(dir: &Path) -> Result<(Self, u64)> {
        let m = Manifest::load(dir)?;
        if m.kind != AgentKind::Ac {
            return Err(Error::Config(format!("{} holds a {} agent, not ac", dir.display(), m.kind)));
        }
        Ok((Self::load_with(dir, &m)?, m.episode))
    }

    pub(super) fn load_with(dir: &Path, m: &Manifest) -> Result<Self> {
        let actor = MlpNet::load(dir.join("actor.net"))?;
        let actor_target = MlpNet::load(dir.join("actor_target.net"))?;
        let (sizes, acts) = Self::actor_topology();
        if actor.sizes() != sizes || actor.activations() != acts || !actor_target.same_topology(&actor) {
            return Err(Error::Config("checkpoint actor does not have the actor topology".into()));
        }
        let actor_opt = Adam::load(dir.join("actor.adam"), &actor)?;
        let net = |name: &str| MlpNet::load(dir.join(format!("critic_{name}.net")));
        let target = |name: &str| MlpNet::load(dir.join(format!("critic_{name}_target.net")));
        let critic = Critic {
            obs_branch: net("obs")?,
            action_branch: net("action")?,
            head: net("head")?,
        };
        let critic_target = Critic {
            obs_branch: target("obs")?,
            action_branch: target("action")?,
            head: target("head")?,
        };
        if !critic.has_topology() || !critic_target.has_topology() {
            return Err(Error::Config("checkpoint critic does not have the critic topology".into()));
        }
        let opt = |name: &str, net: &MlpNet| Adam::load(dir.join(format!("critic_{name}.adam")), net);
        let critic_opt = CriticAdam {
            obs_branch: opt("obs", &critic.obs_branch)?,
            action_branch: opt("action", &critic.action_branch)?,
            head: opt("head", &critic.head)?,
        };
        Ok(Self {
            actor,
            critic,
            actor_target,
            critic_target,
            actor_opt,
            critic_opt,
            gamma: m.gamma,
            tau: m.tau,
            epsilon: m.epsilon,
        })
    }
}
