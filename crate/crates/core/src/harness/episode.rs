use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TrainerConfig};
use super::trainer::ScriptedTrainer;
use crate::dqn::{DqnAgent, Transition};
use crate::error::Result;
use crate::feedback::{Pacer, StateMessage, TrainerLink};
use crate::guidance::{observe, GuidanceObservation, PathSpec, Task};
use crate::nn::Mlp;
use crate::reward::{combine, env_reward, AgentMode, RewardWeights};
use crate::rng::{stream, Stream};
use crate::sim::{self, ActionSpace, EpisodeConfig, VehicleState};

/// Everything that defines the environment side of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub task: Task,
    pub path: PathSpec,
    pub lookahead: f64,
    pub actions: ActionSpace,
    pub episode: EpisodeConfig,
    pub rewards: RewardWeights,
}

impl Environment {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Environment {
            task: config.task,
            path: config.path(),
            lookahead: config.lookahead,
            actions: config.actions.clone(),
            episode: config.episode.clone(),
            rewards: config.rewards.clone(),
        }
    }

    pub fn observe(&self, state: &VehicleState) -> GuidanceObservation {
        observe(state, &self.path, self.lookahead, self.task)
    }

    pub fn obs_dim(&self) -> usize {
        self.task.obs_dim()
    }

    pub fn reward(&self, obs: &GuidanceObservation) -> Result<f64> {
        env_reward(obs.course_error().abs(), obs.d.abs(), &self.rewards)
    }
}

/// One logged environment step. `x`, `y`, `heading` and the guidance fields
/// describe the state reached after `action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub d: f64,
    pub c: f64,
    pub c_d: f64,
    pub action: usize,
    pub env_r: f64,
    #[serde(rename = "R_h")]
    pub r_h: Option<f64>,
    pub combined_r: f64,
    pub ifend: bool,
    pub episode: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub episode: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("step records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<StepRecord>)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let (episode, seed) = steps.first().map(|s| (s.episode, s.seed)).unwrap_or_default();
        Ok(EpisodeLog { episode, seed, steps })
    }
}

/// Decision-maker driven by the episode loop.
pub trait Agent {
    fn act(&mut self, features: &[f64]) -> Result<usize>;

    /// Records a transition; learning agents may update here.
    fn observe(&mut self, transition: Transition) -> Result<()>;

    /// Overwrites the reward of the most recently observed transition.
    fn amend_latest_reward(&mut self, reward: f64);
}

impl Agent for DqnAgent {
    fn act(&mut self, features: &[f64]) -> Result<usize> {
        DqnAgent::act(self, features)
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        DqnAgent::observe(self, transition).map(|_| ())
    }

    fn amend_latest_reward(&mut self, reward: f64) {
        if let Some(t) = self.buffer_mut().latest_mut() {
            t.r = reward;
        }
    }
}

/// Frozen network acting greedily.
#[derive(Debug, Clone)]
pub struct GreedyPolicy(pub Mlp);

impl Agent for GreedyPolicy {
    fn act(&mut self, features: &[f64]) -> Result<usize> {
        Ok(crate::dqn::argmax(&self.0.forward(features)?))
    }

    fn observe(&mut self, _transition: Transition) -> Result<()> {
        Ok(())
    }

    fn amend_latest_reward(&mut self, _reward: f64) {}
}

/// Always takes the same action.
#[derive(Debug, Clone, Copy)]
pub struct FixedAction(pub usize);

impl Agent for FixedAction {
    fn act(&mut self, _features: &[f64]) -> Result<usize> {
        Ok(self.0)
    }

    fn observe(&mut self, _transition: Transition) -> Result<()> {
        Ok(())
    }

    fn amend_latest_reward(&mut self, _reward: f64) {}
}

/// Runs consecutive episodes of one seed: owns the environment random stream,
/// the optional scripted trainer and pacing state.
pub struct Session<'a> {
    env: Environment,
    mode: AgentMode,
    seed: u64,
    env_rng: ChaCha8Rng,
    trainer: Option<ScriptedTrainer>,
    link: &'a mut dyn TrainerLink,
    pacer: Pacer,
    next_episode: usize,
    dropped_feedback: u64,
}

impl<'a> Session<'a> {
    pub fn new(config: &ExperimentConfig, seed: u64, link: &'a mut dyn TrainerLink) -> Self {
        let trainer = match config.trainer {
            TrainerConfig::None => None,
            TrainerConfig::Scripted { p_fb, values } => Some(ScriptedTrainer::new(
                p_fb,
                values[0],
                values[1],
                stream(seed, Stream::Trainer),
            )),
        };
        Session {
            env: Environment::from_config(config),
            mode: config.mode,
            seed,
            env_rng: stream(seed, Stream::Environment),
            trainer,
            link,
            pacer: Pacer::new(config.pace_steps_per_second),
            next_episode: 1,
            dropped_feedback: 0,
        }
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn dropped_feedback(&self) -> u64 {
        self.dropped_feedback
    }

    /// Runs one episode to termination, logging every step.
    ///
    /// Per step: act, advance the vehicle, observe, score, push the
    /// transition (which may trigger a learning update and target sync),
    /// publish the state, then wait out the pace. Human feedback published
    /// against a step is drained at the start of the next step, or after the
    /// last step, while that step's transition is still the latest.
    pub fn run_episode(&mut self, agent: &mut dyn Agent) -> Result<EpisodeLog> {
        let episode = self.next_episode;
        self.next_episode += 1;
        // Human-paced only when nobody scripted is giving feedback.
        let throttle = self.trainer.is_none() && self.link.human_connected();
        self.pacer.begin_episode(throttle);

        let mut state = sim::reset(&self.env.episode, self.env.path.start(), &mut self.env_rng);
        let mut obs = self.env.observe(&state);
        let mut log = EpisodeLog {
            episode,
            seed: self.seed,
            steps: Vec::with_capacity(self.env.episode.max_steps),
        };

        for step in 0..self.env.episode.max_steps {
            if step > 0 {
                self.apply_human_feedback(agent, &mut log)?;
            }
            let features = obs.features();
            let action = agent.act(&features)?;
            let next_state = sim::step(&state, action, &self.env.actions, self.env.episode.dt)?;
            let next_obs = self.env.observe(&next_state);
            let env_r = self.env.reward(&next_obs)?;
            let ifend = sim::is_terminal(&next_obs, step + 1, &self.env.episode);
            let r_h = match &mut self.trainer {
                Some(trainer) => trainer.feedback(&obs, &next_obs),
                None => None,
            };
            let combined_r = combine(env_r, r_h, self.mode);

            log.steps.push(StepRecord {
                t: (step + 1) as f64 * self.env.episode.dt,
                x: next_state.x,
                y: next_state.y,
                heading: next_state.heading,
                d: next_obs.d,
                c: next_obs.c,
                c_d: next_obs.c_d,
                action,
                env_r,
                r_h,
                combined_r,
                ifend,
                episode,
                seed: self.seed,
            });
            agent.observe(Transition {
                s: features,
                a: action,
                r: combined_r,
                s_next: next_obs.features(),
                ifend,
            })?;
            self.link.publish(&StateMessage {
                episode,
                step,
                t: (step + 1) as f64 * self.env.episode.dt,
                x: next_state.x,
                y: next_state.y,
                heading: next_state.heading,
                c_d: next_obs.c_d,
                d: next_obs.d,
                last_action: action,
                env_r,
                mode: self.mode,
            });
            self.pacer.wait();

            state = next_state;
            obs = next_obs;
            if ifend {
                break;
            }
        }
        self.apply_human_feedback(agent, &mut log)?;
        Ok(log)
    }

    /// Sums queued human feedback for the latest logged step into its
    /// reward; feedback aimed at any other step is dropped and counted.
    fn apply_human_feedback(&mut self, agent: &mut dyn Agent, log: &mut EpisodeLog) -> Result<()> {
        let events = self.link.drain();
        if events.is_empty() {
            return Ok(());
        }
        let Some(latest_index) = log.steps.len().checked_sub(1) else {
            self.record_dropped(events.len() as u64);
            return Ok(());
        };
        let mut dropped = 0;
        let mut applied = false;
        let record = &mut log.steps[latest_index];
        for event in events {
            if event.episode == log.episode && event.step_index == latest_index {
                record.r_h = Some(record.r_h.unwrap_or(0.0) + event.value);
                applied = true;
            } else {
                dropped += 1;
            }
        }
        if applied {
            record.combined_r = combine(record.env_r, record.r_h, self.mode);
            agent.amend_latest_reward(record.combined_r);
        }
        self.record_dropped(dropped);
        Ok(())
    }

    fn record_dropped(&mut self, count: u64) {
        if count > 0 {
            self.dropped_feedback += count;
            self.link.record_dropped(count);
        }
    }
}
