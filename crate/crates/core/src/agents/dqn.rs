use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;

use super::{argmax, AgentKind, Batch, Manifest, CRITIC_LR, GAMMA, HIDDEN, TAU};
use crate::env::{Action, ObservableState};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Adam, MlpNet};

const QNET: &str = "qnet.net";
const QNET_TARGET: &str = "qnet_target.net";
const QNET_ADAM: &str = "qnet.adam";

/// Value-based learner: ε-greedy over a Q-network, trained against a
/// softly-tracking target network.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgent {
    pub qnet: MlpNet,
    pub target: MlpNet,
    pub opt: Adam,
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
}

impl DqnAgent {
    pub fn topology() -> (Vec<usize>, Vec<Activation>) {
        let sizes = [ObservableState::LEN, HIDDEN[0], HIDDEN[1], HIDDEN[2], Action::COUNT];
        let acts = [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Linear];
        (sizes.to_vec(), acts.to_vec())
    }

    pub fn new(seed: u64) -> Self {
        let (sizes, acts) = Self::topology();
        let qnet = MlpNet::new(&sizes, &acts, seed).expect("fixed topology");
        Self::from_net(qnet)
    }

    /// Target starts as a copy of `qnet`.
    pub fn from_net(qnet: MlpNet) -> Self {
        let opt = Adam::new(&qnet, CRITIC_LR);
        Self {
            target: qnet.clone(),
            qnet,
            opt,
            gamma: GAMMA,
            tau: TAU,
            epsilon: 1.0,
        }
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.qnet.predict(obs)
    }

    /// ε-greedy: uniform over all 8 actions with probability ε, otherwise the
    /// first maximizing Q-value.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<usize> {
        if rng.gen::<f64>() < self.epsilon {
            return Ok(rng.gen_range(0..Action::COUNT));
        }
        Ok(argmax(&self.q_values(obs)?))
    }

    /// Per-sample targets `r` (done) or `r + γ·max Q_target(s′)`.
    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next = self.target.predict_batch(batch.next_obs.view())?;
        Ok(next
            .axis_iter(Axis(0))
            .zip(batch.rewards.iter().zip(&batch.done))
            .map(|(q, (&r, &done))| {
                if done {
                    r
                } else {
                    r + self.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect())
    }

    /// One optimizer step on the mean squared TD error; returns the loss
    /// before the step. Soft-updates the target afterwards.
    pub fn train_step(&mut self, batch: &Batch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("empty training batch".into()));
        }
        let y = self.targets(batch)?;
        let (q, cache) = self.qnet.forward_batch(batch.obs.view())?;
        let n = batch.len() as f64;
        let mut grad = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, (&a, &y)) in batch.actions.iter().zip(&y).enumerate() {
            let err = q[[i, a]] - y;
            loss += err * err;
            grad[[i, a]] = 2.0 * err / n;
        }
        let (grads, _) = self.qnet.backward_batch(cache, grad.view())?;
        self.opt.step(&mut self.qnet, &grads)?;
        self.target.soft_update(&self.qnet, self.tau)?;
        Ok(loss / n)
    }

    pub fn save(&self, dir: &Path, episode: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.qnet.save(dir.join(QNET))?;
        self.target.save(dir.join(QNET_TARGET))?;
        self.opt.save(dir.join(QNET_ADAM))?;
        Manifest {
            kind: AgentKind::Dqn,
            gamma: self.gamma,
            tau: self.tau,
            epsilon: self.epsilon,
            episode,
        }
        .save(dir)
    }

    pub fn load(dir: &Path) -> Result<(Self, u64)> {
        let m = Manifest::load(dir)?;
        if m.kind != AgentKind::Dqn {
            return Err(Error::Config(format!("{} holds a {} agent, not dqn", dir.display(), m.kind)));
        }
        Ok((Self::load_with(dir, &m)?, m.episode))
    }

    pub(super) fn load_with(dir: &Path, m: &Manifest) -> Result<Self> {
        let qnet = MlpNet::load(dir.join(QNET))?;
        let target = MlpNet::load(dir.join(QNET_TARGET))?;
        let (sizes, acts) = Self::topology();
        if qnet.sizes() != sizes || qnet.activations() != acts || !target.same_topology(&qnet) {
            return Err(Error::Config("checkpoint networks do not have the Q-network topology".into()));
        }
        let opt = Adam::load(dir.join(QNET_ADAM), &qnet)?;
        Ok(Self {
            qnet,
            target,
            opt,
            gamma: m.gamma,
            tau: m.tau,
            epsilon: m.epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A Q-network whose output is exactly `q` for every input.
    fn constant_q(q: [f64; 8]) -> DqnAgent {
        let (sizes, acts) = DqnAgent::topology();
        let mut net = MlpNet::zeros(&sizes, &acts).unwrap();
        net.layers_mut()[3].biases.assign(&ndarray::arr1(&q));
        DqnAgent::from_net(net)
    }

    fn tr(reward: f64, done: bool) -> Transition {
        Transition {
            obs: [0.2; 7],
            action: 2,
            reward,
            next_obs: [0.3; 7],
            done,
        }
    }

    #[test]
    fn greedy_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = constant_q([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0]);
        a.epsilon = 0.0;
        assert_eq!(a.act(&[0.5; 7], &mut rng).unwrap(), 7);
        let mut a = constant_q([0.0; 8]);
        a.epsilon = 0.0;
        assert_eq!(a.act(&[0.5; 7], &mut rng).unwrap(), 0);
    }

    #[test]
    fn terminal_target_is_reward() {
        let mut a = constant_q([0.0; 8]);
        let b = Batch::from_transitions(&[tr(1.0, true)]);
        assert_eq!(a.targets(&b).unwrap(), vec![1.0]);
        assert_eq!(a.train_step(&b).unwrap(), 1.0);
    }

    #[test]
    fn bootstrapped_target() {
        let a = constant_q([0.0, 2.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let b = Batch::from_transitions(&[tr(1.0, false)]);
        assert!((a.targets(&b).unwrap()[0] - 2.98).abs() < 1e-12);
        let mut a = a;
        a.gamma = 0.0;
        assert_eq!(a.targets(&b).unwrap(), vec![1.0]);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut a = DqnAgent::new(1);
        let b = Batch::from_transitions(&[]);
        assert!(matches!(a.train_step(&b), Err(Error::Usage(_))));
    }

    #[test]
    fn training_reduces_loss_on_a_fixed_batch() {
        let mut a = DqnAgent::new(4);
        let items: Vec<_> = (0..32).map(|k| tr(k as f64 / 8.0, k % 2 == 0)).collect();
        let b = Batch::from_transitions(&items);
        let first = a.train_step(&b).unwrap();
        let mut last = first;
        for _ in 0..50 {
            last = a.train_step(&b).unwrap();
        }
        assert!(last < first, "{first} → {last}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = DqnAgent::new(2);
        a.epsilon = 0.3;
        let b = Batch::from_transitions(&[tr(1.0, false), tr(0.0, true)]);
        a.train_step(&b).unwrap();
        a.save(dir.path(), 17).unwrap();
        let (back, ep) = DqnAgent::load(dir.path()).unwrap();
        assert_eq!(ep, 17);
        assert_eq!(back, a);
    }
}
