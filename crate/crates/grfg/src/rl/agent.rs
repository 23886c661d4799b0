//! The two agent shapes used in the selection cascade.
//!
//! Group-picking agents score a (state, candidate) pair with a scalar-output
//! network, because the number of candidate groups changes every step.
//! The operation-picking agent has a fixed action set, so it uses one output
//! unit per operation. Both learn one-step TD targets from replayed
//! transitions with the current network also providing the bootstrap value
//! (no separate target network).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::mlp::{Mlp, MlpGrads};
use super::replay::ReplayBuffer;
use crate::{Error, Result};

/// When agents run their replay updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainCadence {
    PerStep,
    PerEpoch,
}

/// Exploration, discounting, capacity, and network width knobs shared by all
/// three agents.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub hidden_dim: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub train_cadence: TrainCadence,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            epsilon_start: 0.5,
            epsilon_decay: 0.99,
            epsilon_floor: 0.05,
            hidden_dim: 64,
            replay_capacity: 32,
            batch_size: 8,
            train_cadence: TrainCadence::PerStep,
        }
    }
}

pub(crate) const LEARNING_RATE: f64 = 0.01;

/// Epsilon-greedy pick over precomputed scores. The exploration coin is
/// always flipped first, so the rng stream advances identically whether the
/// greedy or random arm wins; greedy ties go to the lowest index.
pub fn select_action(scores: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("action selection over no candidates"));
    }
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        return Ok(rng.gen_range(0..scores.len()));
    }
    Ok(argmax(scores))
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

/// One remembered decision of a group-picking agent. The action is stored as
/// the chosen candidate's representation, and the next state carries the
/// candidate set that will be available there, so the TD target can take a
/// max without consulting the environment again.
#[derive(Debug, Clone)]
pub struct GroupTransition {
    pub state: Vec<f64>,
    pub action_rep: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_candidates: Vec<Vec<f64>>,
}

/// One remembered decision of the operation-picking agent.
#[derive(Debug, Clone)]
pub struct OpTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Scores variable candidate sets: `Q(state, candidate)` via a scalar-output
/// network over the concatenated pair.
pub struct GroupAgent {
    pub(crate) net: Mlp,
    pub(crate) opt: AdamState,
    pub(crate) cfg: AgentConfig,
    pub(crate) epsilon: f64,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) buffer: ReplayBuffer<GroupTransition>,
    pub(crate) state_dim: usize,
    pub(crate) candidate_dim: usize,
}

impl GroupAgent {
    pub fn new(state_dim: usize, candidate_dim: usize, cfg: &AgentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(state_dim + candidate_dim, cfg.hidden_dim, 1, &mut rng);
        let opt = AdamState::new(&net, LEARNING_RATE);
        GroupAgent {
            net,
            opt,
            cfg: cfg.clone(),
            epsilon: cfg.epsilon_start,
            rng,
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            state_dim,
            candidate_dim,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.cfg.epsilon_decay).max(self.cfg.epsilon_floor);
    }

    fn check_dims(&self, state: &[f64], candidate: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::DimMismatch {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        if candidate.len() != self.candidate_dim {
            return Err(Error::DimMismatch {
                expected: self.candidate_dim,
                got: candidate.len(),
            });
        }
        Ok(())
    }

    pub fn q_score(&self, state: &[f64], candidate: &[f64]) -> Result<f64> {
        self.check_dims(state, candidate)?;
        let mut x = Vec::with_capacity(self.state_dim + self.candidate_dim);
        x.extend_from_slice(state);
        x.extend_from_slice(candidate);
        Ok(self.net.forward(&x)[0])
    }

    pub fn score_candidates(&self, state: &[f64], candidates: &[Vec<f64>]) -> Result<Vec<f64>> {
        candidates.iter().map(|c| self.q_score(state, c)).collect()
    }

    /// Epsilon-greedy choice among candidates, advancing this agent's rng.
    pub fn choose(&mut self, state: &[f64], candidates: &[Vec<f64>]) -> Result<usize> {
        let scores = self.score_candidates(state, candidates)?;
        select_action(&scores, self.epsilon, &mut self.rng)
    }

    pub fn remember(&mut self, t: GroupTransition) -> Result<()> {
        self.check_dims(&t.state, &t.action_rep)?;
        self.check_dims(&t.next_state, &t.action_rep)?;
        for c in &t.next_candidates {
            self.check_dims(&t.next_state, c)?;
        }
        self.buffer.push(t);
        Ok(())
    }

    fn best_next_q(&self, t: &GroupTransition) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for c in &t.next_candidates {
            let q = self
                .q_score(&t.next_state, c)
                .expect("dims validated on remember");
            if q > best {
                best = q;
            }
        }
        if best == f64::NEG_INFINITY {
            0.0
        } else {
            best
        }
    }

    /// One replay update. Returns the pre-update mean squared TD error, or
    /// `None` when the buffer has not reached a full batch yet.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let indices = self
            .buffer
            .sample_indices(self.cfg.batch_size, &mut self.rng);
        let batch = self.cfg.batch_size as f64;
        let mut grads = MlpGrads::zeros_like(&self.net);
        let mut loss = 0.0;
        for idx in indices {
            let t = self.buffer.get(idx);
            let target = t.reward + self.cfg.gamma * self.best_next_q(t);
            let mut x = Vec::with_capacity(self.state_dim + self.candidate_dim);
            x.extend_from_slice(&t.state);
            x.extend_from_slice(&t.action_rep);
            let (out, hidden) = self.net.forward_cached(&x);
            let diff = out[0] - target;
            loss += diff * diff / batch;
            self.net
                .backward(&x, &hidden, &[2.0 * diff / batch], &mut grads);
        }
        self.opt.step(&mut self.net, &grads);
        Ok(Some(loss))
    }
}

/// Scores the fixed operation set with one output unit per operation.
pub struct OpAgent {
    pub(crate) net: Mlp,
    pub(crate) opt: AdamState,
    pub(crate) cfg: AgentConfig,
    pub(crate) epsilon: f64,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) buffer: ReplayBuffer<OpTransition>,
    pub(crate) state_dim: usize,
    pub(crate) n_actions: usize,
}

impl OpAgent {
    pub fn new(state_dim: usize, n_actions: usize, cfg: &AgentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(state_dim, cfg.hidden_dim, n_actions, &mut rng);
        let opt = AdamState::new(&net, LEARNING_RATE);
        OpAgent {
            net,
            opt,
            cfg: cfg.clone(),
            epsilon: cfg.epsilon_start,
            rng,
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            state_dim,
            n_actions,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.cfg.epsilon_decay).max(self.cfg.epsilon_floor);
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::DimMismatch {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        Ok(())
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        Ok(self.net.forward(state))
    }

    pub fn choose(&mut self, state: &[f64]) -> Result<usize> {
        let scores = self.q_values(state)?;
        select_action(&scores, self.epsilon, &mut self.rng)
    }

    pub fn remember(&mut self, t: OpTransition) -> Result<()> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        if t.action >= self.n_actions {
            return Err(Error::DimMismatch {
                expected: self.n_actions,
                got: t.action,
            });
        }
        self.buffer.push(t);
        Ok(())
    }

    /// One replay update, mirroring `GroupAgent::train_step`; the bootstrap
    /// value is the max over this agent's own action head at the next state.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let indices = self
            .buffer
            .sample_indices(self.cfg.batch_size, &mut self.rng);
        let batch = self.cfg.batch_size as f64;
        let mut grads = MlpGrads::zeros_like(&self.net);
        let mut loss = 0.0;
        for idx in indices {
            let t = self.buffer.get(idx);
            let next_q = self.net.forward(&t.next_state);
            let target = t.reward + self.cfg.gamma * next_q[argmax(&next_q)];
            let (out, hidden) = self.net.forward_cached(&t.state);
            let diff = out[t.action] - target;
            loss += diff * diff / batch;
            let mut upstream = vec![0.0; self.n_actions];
            upstream[t.action] = 2.0 * diff / batch;
            self.net.backward(&t.state, &hidden, &upstream, &mut grads);
        }
        self.opt.step(&mut self.net, &grads);
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_action_greedy_takes_lowest_tied_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scores = [1.0, 3.0, 3.0, 2.0];
        assert_eq!(select_action(&scores, 0.0, &mut rng).unwrap(), 1);
        assert!(select_action(&[], 0.0, &mut rng).is_err());
    }

    #[test]
    fn select_action_explores_every_arm_at_epsilon_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scores = [0.0, 0.0, 0.0];
        let mut seen = [false; 3];
        for _ in 0..100 {
            seen[select_action(&scores, 1.0, &mut rng).unwrap()] = true;
        }
        assert_eq!(seen, [true, true, true]);
    }

    #[test]
    fn epsilon_decays_to_floor_exactly() {
        let cfg = AgentConfig::default();
        let mut agent = GroupAgent::new(2, 2, &cfg, 1);
        assert_eq!(agent.epsilon(), 0.5);
        for _ in 0..500 {
            agent.decay_epsilon();
        }
        assert_eq!(agent.epsilon(), 0.05);
    }

    #[test]
    fn group_agent_validates_dimensions() {
        let cfg = AgentConfig::default();
        let agent = GroupAgent::new(3, 2, &cfg, 0);
        assert!(agent.q_score(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_ok());
        assert!(matches!(
            agent.q_score(&[1.0], &[1.0, 2.0]),
            Err(Error::DimMismatch {
                expected: 3,
                got: 1
            })
        ));
        assert!(matches!(
            agent.q_score(&[1.0, 2.0, 3.0], &[1.0]),
            Err(Error::DimMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    fn hand_group_agent(cfg: &AgentConfig) -> GroupAgent {
        // Q(s, c) = relu(c): one hidden unit reading only the candidate.
        let mut agent = GroupAgent::new(1, 1, cfg, 0);
        agent.net = Mlp {
            input_dim: 2,
            hidden_dim: 1,
            output_dim: 1,
            w1: vec![0.0, 1.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: vec![0.0],
        };
        agent.opt = AdamState::new(&agent.net, LEARNING_RATE);
        agent
    }

    #[test]
    fn group_td_loss_hand_computed() {
        let cfg = AgentConfig {
            batch_size: 1,
            ..AgentConfig::default()
        };
        let mut agent = hand_group_agent(&cfg);
        agent
            .remember(GroupTransition {
                state: vec![0.0],
                action_rep: vec![0.5],
                reward: 1.0,
                next_state: vec![0.0],
                next_candidates: vec![vec![0.2]],
            })
            .unwrap();
        // Q = relu(0.5) = 0.5, target = 1 + 0.9 * relu(0.2) = 1.18,
        // loss = (0.5 - 1.18)^2 = 0.4624.
        let loss = agent.train_step().unwrap().unwrap();
        assert!((loss - 0.4624).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn group_training_reduces_td_error() {
        let cfg = AgentConfig {
            batch_size: 1,
            ..AgentConfig::default()
        };
        let mut agent = hand_group_agent(&cfg);
        agent
            .remember(GroupTransition {
                state: vec![0.0],
                action_rep: vec![0.5],
                reward: 1.0,
                next_state: vec![0.0],
                next_candidates: vec![vec![0.2]],
            })
            .unwrap();
        let first = agent.train_step().unwrap().unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = agent.train_step().unwrap().unwrap();
        }
        assert!(last < first / 4.0, "first {first}, last {last}");
    }

    #[test]
    fn train_step_needs_a_full_batch() {
        let cfg = AgentConfig {
            batch_size: 4,
            ..AgentConfig::default()
        };
        let mut agent = GroupAgent::new(1, 1, &cfg, 5);
        for _ in 0..3 {
            agent
                .remember(GroupTransition {
                    state: vec![0.0],
                    action_rep: vec![1.0],
                    reward: 0.0,
                    next_state: vec![0.0],
                    next_candidates: vec![],
                })
                .unwrap();
        }
        assert!(agent.train_step().unwrap().is_none());
    }

    #[test]
    fn empty_next_candidates_bootstrap_zero() {
        let cfg = AgentConfig {
            batch_size: 1,
            ..AgentConfig::default()
        };
        let mut agent = hand_group_agent(&cfg);
        agent
            .remember(GroupTransition {
                state: vec![0.0],
                action_rep: vec![0.5],
                reward: 1.0,
                next_state: vec![0.0],
                next_candidates: vec![],
            })
            .unwrap();
        // Target collapses to the raw reward: loss = (0.5 - 1)^2.
        let loss = agent.train_step().unwrap().unwrap();
        assert!((loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn op_td_loss_hand_computed() {
        let cfg = AgentConfig {
            batch_size: 1,
            ..AgentConfig::default()
        };
        let mut agent = OpAgent::new(1, 2, &cfg, 0);
        agent.net = Mlp {
            input_dim: 1,
            hidden_dim: 1,
            output_dim: 2,
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![1.0, 2.0],
            b2: vec![0.0, 0.0],
        };
        agent.opt = AdamState::new(&agent.net, LEARNING_RATE);
        agent
            .remember(OpTransition {
                state: vec![0.5],
                action: 0,
                reward: 0.2,
                next_state: vec![1.0],
            })
            .unwrap();
        // q(s) = [0.5, 1.0], q(s') = [1, 2], target = 0.2 + 0.9 * 2 = 2.0,
        // loss = (0.5 - 2)^2 = 2.25.
        let loss = agent.train_step().unwrap().unwrap();
        assert!((loss - 2.25).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn op_agent_rejects_out_of_range_action() {
        let cfg = AgentConfig::default();
        let mut agent = OpAgent::new(1, 3, &cfg, 0);
        let err = agent.remember(OpTransition {
            state: vec![0.0],
            action: 3,
            reward: 0.0,
            next_state: vec![0.0],
        });
        assert!(err.is_err());
    }

    #[test]
    fn choices_are_seed_deterministic() {
        let cfg = AgentConfig::default();
        let state = vec![0.3, -0.2];
        let candidates = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let mut a = GroupAgent::new(2, 2, &cfg, 42);
        let mut b = GroupAgent::new(2, 2, &cfg, 42);
        for _ in 0..10 {
            assert_eq!(
                a.choose(&state, &candidates).unwrap(),
                b.choose(&state, &candidates).unwrap()
            );
        }
    }
}
