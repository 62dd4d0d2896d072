use std::fmt::Write as _;

use super::episode::EpisodeLog;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "episode,tracking_error,cumulative_env_reward";

/// Mean absolute cross-track distance over the episode, meters.
pub fn tracking_error(log: &EpisodeLog) -> Result<f64> {
    if log.steps.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log.steps.iter().map(|s| s.d.abs()).sum::<f64>() / log.steps.len() as f64)
}

/// Sum of environment reward over the episode. Human reward is never
/// included, whatever the agent trained on.
pub fn cumulative_env_reward(log: &EpisodeLog) -> Result<f64> {
    if log.steps.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log.steps.iter().map(|s| s.env_r).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    /// 1-based episode number.
    pub episode: usize,
    pub tracking_error: f64,
    pub cumulative_env_reward: f64,
}

impl EpisodeMetrics {
    pub fn from_log(log: &EpisodeLog) -> Result<Self> {
        Ok(EpisodeMetrics {
            episode: log.episode,
            tracking_error: tracking_error(log)?,
            cumulative_env_reward: cumulative_env_reward(log)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    pub episodes: Vec<EpisodeMetrics>,
}

impl MetricSeries {
    pub fn from_logs<'a>(logs: impl IntoIterator<Item = &'a EpisodeLog>) -> Result<Self> {
        Ok(MetricSeries {
            episodes: logs.into_iter().map(EpisodeMetrics::from_log).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// First episode number whose tracking error falls below `threshold`.
    pub fn episodes_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.episodes
            .iter()
            .find(|m| m.tracking_error < threshold)
            .map(|m| m.episode)
    }

    /// Mean tracking error over the 1-based inclusive episode range.
    pub fn mean_tracking_error(&self, first: usize, last: usize) -> Option<f64> {
        let values: Vec<f64> = self
            .episodes
            .iter()
            .filter(|m| (first..=last).contains(&m.episode))
            .map(|m| m.tracking_error)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Element-wise mean across seeds, in the given seed order. All series
    /// must cover the same episodes.
    pub fn average(series: &[MetricSeries]) -> Result<Self> {
        let Some(first) = series.first() else {
            return Ok(MetricSeries::default());
        };
        for s in series {
            if s.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    what: "episodes per seed",
                    expected: first.len(),
                    got: s.len(),
                });
            }
        }
        let n = series.len() as f64;
        let episodes = (0..first.len())
            .map(|i| {
                let te: f64 = series.iter().map(|s| s.episodes[i].tracking_error).sum();
                let cr: f64 = series.iter().map(|s| s.episodes[i].cumulative_env_reward).sum();
                EpisodeMetrics {
                    episode: first.episodes[i].episode,
                    tracking_error: te / n,
                    cumulative_env_reward: cr / n,
                }
            })
            .collect();
        Ok(MetricSeries { episodes })
    }

    /// CSV with shortest round-trip float formatting, so parsing the file
    /// back yields the exact values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for m in &self.episodes {
            writeln!(out, "{},{},{}", m.episode, m.tracking_error, m.cumulative_env_reward).expect("writing to a String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::InvalidConfig("metric CSV header mismatch".into()));
        }
        let episodes = lines
            .filter(|l| !l.is_empty())
            .map(|line| {
                let fields: Vec<&str> = line.split(',').collect();
                let bad = || Error::InvalidConfig(format!("bad metric row {line:?}"));
                if fields.len() != 3 {
                    return Err(bad());
                }
                Ok(EpisodeMetrics {
                    episode: fields[0].parse().map_err(|_| bad())?,
                    tracking_error: fields[1].parse().map_err(|_| bad())?,
                    cumulative_env_reward: fields[2].parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(MetricSeries { episodes })
    }
}
