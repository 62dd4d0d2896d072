//! Environment reward, human reward events, and the per-agent combination
//! rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the environment reward
/// `-w_course * |err| + w_dist * base^(offset - d / dist_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_course: f64,
    pub w_dist: f64,
    pub dist_scale: f64,
    pub dist_exponent_base: f64,
    pub exponent_offset: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_course: 0.9,
            w_dist: 0.1,
            dist_scale: 10.0,
            dist_exponent_base: 2.0,
            exponent_offset: 2.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_course,
            self.w_dist,
            self.dist_scale,
            self.dist_exponent_base,
            self.exponent_offset,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward weights"));
        }
        if all.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("reward weights must be positive".into()));
        }
        if self.dist_exponent_base <= 1.0 {
            // Otherwise the distance term would not decrease with distance.
            return Err(Error::InvalidConfig(
                "dist_exponent_base must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn env_reward(course_error_abs: f64, d_abs: f64, weights: &RewardWeights) -> Result<f64> {
    if !course_error_abs.is_finite() || !d_abs.is_finite() {
        return Err(Error::NonFinite("env_reward input"));
    }
    let distance_term = weights
        .dist_exponent_base
        .powf(weights.exponent_offset - d_abs / weights.dist_scale);
    Ok(-weights.w_course * course_error_abs + weights.w_dist * distance_term)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentMode {
    /// Environment reward only.
    #[serde(rename = "DQNE", alias = "dqne")]
    Dqne,
    /// Human reward only.
    #[serde(rename = "DQNH", alias = "dqnh")]
    Dqnh,
    /// Sum of environment and human reward.
    #[serde(rename = "DQNHE", alias = "dqnhe")]
    Dqnhe,
}

impl AgentMode {
    pub fn uses_feedback(self) -> bool {
        !matches!(self, AgentMode::Dqne)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Dqne => "DQNE",
            AgentMode::Dqnh => "DQNH",
            AgentMode::Dqnhe => "DQNHE",
        }
    }
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dqne" => Ok(AgentMode::Dqne),
            "dqnh" => Ok(AgentMode::Dqnh),
            "dqnhe" => Ok(AgentMode::Dqnhe),
            other => Err(Error::InvalidConfig(format!("unknown agent mode {other:?}"))),
        }
    }
}

/// Final training reward for one transition. `human` is the summed human
/// reward for the step, if any was given.
pub fn combine(env_r: f64, human: Option<f64>, mode: AgentMode) -> f64 {
    match mode {
        AgentMode::Dqne => env_r,
        AgentMode::Dqnh => human.unwrap_or(0.0),
        AgentMode::Dqnhe => env_r + human.unwrap_or(0.0),
    }
}

/// The set of reward values a trainer may deliver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdmissibleRewards(Vec<f64>);

impl Default for AdmissibleRewards {
    fn default() -> Self {
        AdmissibleRewards(vec![0.8, 0.5, -0.5, -0.8])
    }
}

impl AdmissibleRewards {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "admissible reward set must be non-empty and finite".into(),
            ));
        }
        Ok(AdmissibleRewards(values))
    }

    /// Matches within 1e-9 so JSON round trips of e.g. `0.8` are accepted.
    pub fn validate(&self, value: f64) -> Option<f64> {
        self.0.iter().copied().find(|&v| (v - value).abs() <= 1e-9)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackSource {
    Human,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub value: f64,
    /// Milliseconds since the Unix epoch, as reported by the sender. Zero for
    /// scripted events, which never touch the wall clock.
    pub wall_time: f64,
    pub episode: usize,
    pub step_index: usize,
    pub source: FeedbackSource,
}
