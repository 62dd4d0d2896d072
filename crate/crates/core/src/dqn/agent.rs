use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{copy_params, Adam, AdamConfig, Mlp};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon decays linearly from start to end.
    pub epsilon_decay_steps: u64,
    /// No gradient updates before this many environment steps.
    pub learning_starts: u64,
    pub buffer_capacity: usize,
    pub hidden_layers: Vec<usize>,
    pub optimizer: AdamConfig,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.9,
            batch_size: 32,
            target_sync_interval: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 5000,
            learning_starts: 500,
            buffer_capacity: 10_000,
            hidden_layers: vec![64, 64],
            optimizer: AdamConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.target_sync_interval == 0 || self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, target_sync_interval and buffer_capacity must be positive".into(),
            ));
        }
        for eps in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidConfig("epsilon must lie in [0, 1]".into()));
            }
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig("hidden layers must be non-empty".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn layer_sizes(&self, obs_dim: usize, n_actions: usize) -> Vec<usize> {
        let mut sizes = vec![obs_dim];
        sizes.extend(&self.hidden_layers);
        sizes.push(n_actions);
        sizes
    }
}

/// Index of the largest value; the lowest index wins exact ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// Epsilon-greedy choice. With probability `1 - epsilon` the greedy action,
/// otherwise a uniformly random one.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "no actions to choose from");
    // Draw unconditionally so the stream does not depend on epsilon.
    let explore = rng.gen::<f64>() < epsilon;
    let random = rng.gen_range(0..q_values.len());
    if explore {
        random
    } else {
        argmax(q_values)
    }
}

/// `y = r` for terminal transitions, else `r + gamma * max_a' Q'(s', a')`.
pub fn compute_target(t: &Transition, target_net: &Mlp, gamma: f64) -> Result<f64> {
    if t.ifend {
        return Ok(t.r);
    }
    let q_next = target_net.forward(&t.s_next)?;
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(t.r + gamma * best)
}

/// One minibatch update of the prediction network on the mean squared error
/// `(1/N) sum (y_i - Q(s_i, a_i))^2`. Returns the loss before the update.
pub fn train_step<R: Rng + ?Sized>(
    prediction: &mut Mlp,
    target: &Mlp,
    buffer: &ReplayBuffer,
    config: &DqnConfig,
    optimizer: &mut Adam,
    rng: &mut R,
) -> Result<f64> {
    let batch = buffer.sample(config.batch_size, rng)?;
    let targets = batch
        .iter()
        .map(|t| compute_target(t, target, config.gamma))
        .collect::<Result<Vec<_>>>()?;
    minibatch_update(prediction, optimizer, &batch, &targets)
}

/// Gradient step on `(1/N) sum (y_i - Q(s_i, a_i))^2` for fixed targets.
pub fn minibatch_update(prediction: &mut Mlp, optimizer: &mut Adam, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
    let n = batch.len() as f64;
    let mut grads = prediction.zeros_like();
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let q = prediction.accumulate_gradient(&t.s, t.a, y, 1.0 / n, &mut grads)?;
        loss += (y - q).powi(2);
    }
    optimizer.apply_update(prediction, &grads)?;
    Ok(loss / n)
}

/// Copies the prediction network into the target network when `step` is a
/// multiple of `interval`. Returns whether a sync happened.
pub fn maybe_sync_target(step: u64, interval: u64, prediction: &Mlp, target: &mut Mlp) -> bool {
    if step.is_multiple_of(interval) {
        *target = copy_params(prediction);
        true
    } else {
        false
    }
}

/// A complete DQN learner: networks, optimizer, replay pool and the random
/// streams it draws from.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    prediction: Mlp,
    target: Mlp,
    optimizer: Adam,
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    steps: u64,
    syncs: u64,
    updates: u64,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes(obs_dim, n_actions);
        let prediction = Mlp::random(&sizes, &mut stream(seed, Stream::NetworkInit))?;
        Ok(Self::with_network(config, prediction, seed))
    }

    pub fn with_network(config: DqnConfig, prediction: Mlp, seed: u64) -> Self {
        DqnAgent {
            target: copy_params(&prediction),
            optimizer: Adam::new(config.optimizer, &prediction),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            explore_rng: stream(seed, Stream::Exploration),
            replay_rng: stream(seed, Stream::Replay),
            prediction,
            config,
            steps: 0,
            syncs: 0,
            updates: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn prediction(&self) -> &Mlp {
        &self.prediction
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.buffer
    }

    /// Environment steps recorded so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_at(self.steps)
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.prediction.forward(obs)
    }

    /// Epsilon-greedy under the current schedule.
    pub fn act(&mut self, obs: &[f64]) -> Result<usize> {
        let q = self.prediction.forward(obs)?;
        let eps = self.epsilon();
        Ok(select_action(&q, eps, &mut self.explore_rng))
    }

    pub fn act_greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(argmax(&self.prediction.forward(obs)?))
    }

    /// Stores a transition and advances the step counter. Once
    /// `learning_starts` is reached, performs one minibatch update, then syncs
    /// the target network every `target_sync_interval` steps. Returns the
    /// pre-update loss when an update happened.
    pub fn observe(&mut self, transition: Transition) -> Result<Option<f64>> {
        if transition.a >= self.prediction.output_dim() {
            return Err(Error::ActionOutOfRange {
                index: transition.a,
                len: self.prediction.output_dim(),
            });
        }
        if !transition.r.is_finite() {
            return Err(Error::NonFinite("transition reward"));
        }
        self.buffer.push(transition);
        self.steps += 1;

        let loss = if self.steps >= self.config.learning_starts && self.buffer.len() >= self.config.batch_size {
            let loss = train_step(
                &mut self.prediction,
                &self.target,
                &self.buffer,
                &self.config,
                &mut self.optimizer,
                &mut self.replay_rng,
            )?;
            self.updates += 1;
            Some(loss)
        } else {
            None
        };
        if maybe_sync_target(self.steps, self.config.target_sync_interval, &self.prediction, &mut self.target) {
            self.syncs += 1;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use rand::SeedableRng;

    fn linear_net(weights: Vec<f64>, biases: Vec<f64>, inputs: usize) -> Mlp {
        let outputs = biases.len();
        Mlp::from_layers(vec![Dense {
            inputs,
            outputs,
            weights,
            biases,
        }])
        .unwrap()
    }

    fn transition(r: f64, ifend: bool) -> Transition {
        Transition {
            s: vec![1.0],
            a: 0,
            r,
            s_next: vec![1.0],
            ifend,
        }
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn greedy_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&[0.1, 0.9, 0.3], 0.0, &mut rng), 1);
            assert_eq!(select_action(&[0.5, 0.5], 0.0, &mut rng), 0);
        }
    }

    #[test]
    fn uniform_exploration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[select_action(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0, &mut rng)] += 1;
        }
        let sigma = (draws as f64 * 0.2 * 0.8).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * 0.2).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = DqnConfig::default();
        assert_eq!(cfg.epsilon_at(0), 1.0);
        assert!((cfg.epsilon_at(2500) - 0.525).abs() < 1e-12);
        assert_eq!(cfg.epsilon_at(5000), 0.05);
        assert_eq!(cfg.epsilon_at(50_000), 0.05);
    }

    #[test]
    fn target_terminal_branch() {
        let net = linear_net(vec![1.0], vec![0.0], 1);
        assert_eq!(compute_target(&transition(0.4, true), &net, 0.9).unwrap(), 0.4);
    }

    #[test]
    fn target_bootstrap_branch() {
        // Q'(s') = (1.0) for s' = [1].
        let net = linear_net(vec![1.0], vec![0.0], 1);
        let y = compute_target(&transition(0.1, false), &net, 0.9).unwrap();
        assert!((y - 1.0).abs() < 1e-12);

        // Q'(s') = (0.2, -0.4).
        let net = linear_net(vec![0.0, 0.0], vec![0.2, -0.4], 1);
        let y = compute_target(&transition(-0.25, false), &net, 0.9).unwrap();
        assert!((y + 0.07).abs() < 1e-12);
    }

    #[test]
    fn single_sample_loss() {
        // Q(s, 0) = 0.5, y = 1 (terminal, r = 1): loss (1 - 0.5)^2 = 0.25.
        let mut pred = linear_net(vec![0.0], vec![0.5], 1);
        let target = pred.clone();
        let mut buffer = ReplayBuffer::new(1);
        buffer.push(transition(1.0, true));
        let cfg = DqnConfig {
            batch_size: 1,
            ..Default::default()
        };
        let mut opt = Adam::new(cfg.optimizer, &pred);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let loss = train_step(&mut pred, &target, &buffer, &cfg, &mut opt, &mut rng).unwrap();
        assert!((loss - 0.25).abs() < 1e-12);
        assert_eq!(target, linear_net(vec![0.0], vec![0.5], 1));
        assert_ne!(pred, target);
    }

    #[test]
    fn zero_residual_batch_leaves_params() {
        let mut pred = linear_net(vec![0.0], vec![0.4], 1);
        let target = pred.clone();
        let mut buffer = ReplayBuffer::new(4);
        buffer.push(transition(0.4, true));
        let cfg = DqnConfig {
            batch_size: 3,
            ..Default::default()
        };
        let mut opt = Adam::new(cfg.optimizer, &pred);
        let before = pred.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        buffer.push(transition(0.4, true));
        buffer.push(transition(0.4, true));
        let loss = train_step(&mut pred, &target, &buffer, &cfg, &mut opt, &mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(pred, before);
    }

    #[test]
    fn not_ready_propagates() {
        let mut pred = linear_net(vec![0.0], vec![0.0], 1);
        let target = pred.clone();
        let buffer = ReplayBuffer::new(4);
        let cfg = DqnConfig::default();
        let mut opt = Adam::new(cfg.optimizer, &pred);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = train_step(&mut pred, &target, &buffer, &cfg, &mut opt, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NotReady { .. }));
    }

    #[test]
    fn frozen_buffer_converges() {
        let cfg = DqnConfig {
            batch_size: 1,
            learning_starts: 0,
            hidden_layers: vec![8],
            optimizer: AdamConfig {
                learning_rate: 1e-2,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pred = Mlp::random(&cfg.layer_sizes(1, 2), &mut rng).unwrap();
        let target = pred.clone();
        let mut opt = Adam::new(cfg.optimizer, &pred);
        let mut buffer = ReplayBuffer::new(1);
        buffer.push(transition(1.0, true));
        let mut gaps = Vec::new();
        for _ in 0..2000 {
            train_step(&mut pred, &target, &buffer, &cfg, &mut opt, &mut rng).unwrap();
            gaps.push((pred.forward(&[1.0]).unwrap()[0] - 1.0).abs());
        }
        assert!(*gaps.last().unwrap() < 0.01, "final gap {}", gaps.last().unwrap());
        assert!(gaps[1999] < gaps[100]);
    }

    #[test]
    fn sync_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pred = Mlp::random(&[2, 4, 2], &mut rng).unwrap();
        let mut target = pred.zeros_like();
        assert!(maybe_sync_target(200, 200, &pred, &mut target));
        assert_eq!(target, pred);
        pred.params_mut().for_each(|p| *p += 1.0);
        assert!(!maybe_sync_target(201, 200, &pred, &mut target));
        assert_ne!(target, pred);
    }

    #[test]
    fn agent_syncs_every_interval() {
        let cfg = DqnConfig {
            learning_starts: 50,
            hidden_layers: vec![4],
            ..Default::default()
        };
        let mut agent = DqnAgent::new(cfg, 1, 2, 0).unwrap();
        let mut last_synced = agent.target().clone();
        for step in 1..=1000u64 {
            let obs = [(step % 7) as f64];
            let a = agent.act(&obs).unwrap();
            agent
                .observe(Transition {
                    s: obs.to_vec(),
                    a,
                    r: 0.1,
                    s_next: obs.to_vec(),
                    ifend: false,
                })
                .unwrap();
            if step % 200 == 0 {
                assert_eq!(agent.target(), agent.prediction());
                last_synced = agent.target().clone();
            } else {
                assert_eq!(agent.target(), &last_synced);
            }
        }
        assert_eq!(agent.syncs(), 5);
        assert_eq!(agent.updates(), 1000 - 49);
    }
}
