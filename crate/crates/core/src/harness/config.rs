use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqn::DqnConfig;
use crate::error::{Error, Result};
use crate::guidance::{PathSpec, Task};
use crate::reward::{AdmissibleRewards, AgentMode, RewardWeights};
use crate::sim::{ActionSpace, EpisodeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum TrainerConfig {
    #[default]
    None,
    Scripted {
        /// Probability of giving feedback on any given step.
        p_fb: f64,
        /// `[good, bad]` reward values.
        #[serde(default = "default_scripted_values")]
        values: [f64; 2],
    },
}

fn default_scripted_values() -> [f64; 2] {
    [0.8, -0.8]
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: AgentMode,
    pub task: Task,
    /// Defaults to the task's standard path.
    pub path: Option<PathSpec>,
    /// Lookahead length from the intersection point to the target point.
    #[serde(alias = "L")]
    pub lookahead: f64,
    pub episode: EpisodeConfig,
    pub actions: ActionSpace,
    pub dqn: DqnConfig,
    pub rewards: RewardWeights,
    pub admissible_feedback: AdmissibleRewards,
    pub trainer: TrainerConfig,
    pub seeds: Vec<u64>,
    /// Episodes per seed; defaults to 60 (line) or 120 (curve).
    pub episodes: Option<usize>,
    /// Tracking-error threshold for episodes-to-threshold; defaults to 2 m
    /// (line) or 3 m (curve).
    pub threshold: Option<f64>,
    pub checkpoint_every: usize,
    /// Step rate while a human trainer is connected.
    pub pace_steps_per_second: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: AgentMode::Dqne,
            task: Task::Line,
            path: None,
            lookahead: 20.0,
            episode: EpisodeConfig::default(),
            actions: ActionSpace::default(),
            dqn: DqnConfig::default(),
            rewards: RewardWeights::default(),
            admissible_feedback: AdmissibleRewards::default(),
            trainer: TrainerConfig::None,
            seeds: vec![0, 1, 2],
            episodes: None,
            threshold: None,
            checkpoint_every: 10,
            pace_steps_per_second: 2.0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Switches task, resetting the task-dependent defaults.
    pub fn with_task(mut self, task: Task) -> Self {
        if task != self.task {
            self.task = task;
            self.path = None;
        }
        self
    }

    pub fn path(&self) -> PathSpec {
        self.path.unwrap_or_else(|| self.task.default_path())
    }

    pub fn episodes(&self) -> usize {
        self.episodes.unwrap_or(match self.task {
            Task::Line => 60,
            Task::Curve => 120,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(match self.task {
            Task::Line => 2.0,
            Task::Curve => 3.0,
        })
    }

    /// Fills in every task-dependent default so the written config is
    /// self-describing.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.path = Some(self.path());
        c.episodes = Some(self.episodes());
        c.threshold = Some(self.threshold());
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        self.dqn.validate()?;
        self.rewards.validate()?;
        self.path().validate()?;
        if !(self.lookahead > 0.0 && self.lookahead.is_finite()) {
            return Err(Error::InvalidConfig("lookahead must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.episodes() == 0 {
            return Err(Error::InvalidConfig("episodes must be positive".into()));
        }
        if !(self.threshold() > 0.0) {
            return Err(Error::InvalidConfig("threshold must be positive".into()));
        }
        if !(self.pace_steps_per_second > 0.0 && self.pace_steps_per_second.is_finite()) {
            return Err(Error::InvalidConfig("pace must be positive".into()));
        }
        if let TrainerConfig::Scripted { p_fb, values } = &self.trainer {
            if !self.mode.uses_feedback() {
                return Err(Error::InvalidConfig(
                    "the scripted trainer requires mode DQNH or DQNHE".into(),
                ));
            }
            if !(0.0..=1.0).contains(p_fb) {
                return Err(Error::InvalidConfig("p_fb must lie in [0, 1]".into()));
            }
            for v in values {
                if self.admissible_feedback.validate(*v).is_none() {
                    return Err(Error::InvalidConfig(format!(
                        "scripted feedback value {v} is not admissible"
                    )));
                }
            }
        }
        Ok(())
    }
}
