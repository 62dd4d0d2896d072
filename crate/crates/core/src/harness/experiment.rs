//! Multi-seed experiment runs and their on-disk layout:
//!
//! ```text
//! <output_dir>/
//!   config.json                      resolved configuration
//!   metrics.csv                      seed-averaged metrics
//!   summary.json
//!   seed_<s>/metrics.csv
//!   seed_<s>/logs/episode_<NNN>.jsonl
//!   seed_<s>/checkpoints/episode_<NNN>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::episode::{EpisodeLog, Session};
use super::metrics::MetricSeries;
use crate::dqn::DqnAgent;
use crate::error::{Error, Result};
use crate::feedback::{NoLink, TrainerLink};
use crate::nn::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes_to_threshold: Option<usize>,
    pub dropped_feedback: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub mode: String,
    pub task: String,
    pub threshold: f64,
    pub episodes: usize,
    pub seeds: Vec<SeedSummary>,
    /// Mean over seeds; a seed that never reaches the threshold counts as
    /// `episodes + 1`.
    pub mean_episodes_to_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: MetricSeries,
    pub dropped_feedback: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub per_seed: Vec<SeedRun>,
    pub averaged: MetricSeries,
    pub summary: ExperimentSummary,
}

pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed_{seed}"))
}

pub fn episode_log_path(output_dir: &Path, seed: u64, episode: usize) -> PathBuf {
    seed_dir(output_dir, seed).join("logs").join(format!("episode_{episode:03}.jsonl"))
}

pub fn checkpoint_path(output_dir: &Path, seed: u64, episode: usize) -> PathBuf {
    seed_dir(output_dir, seed)
        .join("checkpoints")
        .join(format!("episode_{episode:03}.json"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Mean of per-seed first-crossing episodes, censoring misses at
/// `episodes + 1`.
pub fn mean_episodes_to_threshold(per_seed: &[Option<usize>], episodes: usize) -> f64 {
    let total: usize = per_seed.iter().map(|e| e.unwrap_or(episodes + 1)).sum();
    total as f64 / per_seed.len() as f64
}

/// Runs every seed headless (seeds in parallel) and writes all artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    prepare_output(config)?;
    let runs: Vec<Result<SeedRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_seed(config, seed, &mut NoLink)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    finish(config, runs)
}

/// Runs seeds one after another through a trainer link (interactive runs).
pub fn run_experiment_with_link(config: &ExperimentConfig, link: &mut dyn TrainerLink) -> Result<ExperimentResult> {
    prepare_output(config)?;
    let runs = config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, seed, link))
        .collect::<Result<Vec<_>>>()?;
    finish(config, runs)
}

/// Validates the config and makes sure the output directory is writable
/// before any training starts.
fn prepare_output(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let out = &config.output_dir;
    create_dir(out)?;
    let resolved = serde_json::to_string_pretty(&config.resolved()).expect("config serializes");
    write(&out.join("config.json"), resolved + "\n")?;
    for &seed in &config.seeds {
        create_dir(&seed_dir(out, seed).join("logs"))?;
        create_dir(&seed_dir(out, seed).join("checkpoints"))?;
    }
    Ok(())
}

fn run_seed(config: &ExperimentConfig, seed: u64, link: &mut dyn TrainerLink) -> Result<SeedRun> {
    let out = &config.output_dir;
    let episodes = config.episodes();
    let mut session = Session::new(config, seed, link);
    let env = session.environment().clone();
    let mut agent = DqnAgent::new(config.dqn.clone(), env.obs_dim(), env.actions.len(), seed)?;
    let mut metrics = MetricSeries::default();
    for _ in 0..episodes {
        let log = session.run_episode(&mut agent)?;
        write(&episode_log_path(out, seed, log.episode), log.to_jsonl())?;
        metrics.episodes.push(super::metrics::EpisodeMetrics::from_log(&log)?);
        let every = config.checkpoint_every.max(1);
        if log.episode % every == 0 || log.episode == episodes {
            let ckpt = Checkpoint {
                network: agent.prediction().clone(),
                optimizer: Some(agent.optimizer().clone()),
                step: agent.steps(),
            };
            write(&checkpoint_path(out, seed, log.episode), ckpt.to_json_bytes())?;
        }
    }
    write(&seed_dir(out, seed).join("metrics.csv"), metrics.to_csv())?;
    Ok(SeedRun {
        seed,
        metrics,
        dropped_feedback: session.dropped_feedback(),
    })
}

fn finish(config: &ExperimentConfig, runs: Vec<SeedRun>) -> Result<ExperimentResult> {
    let out = &config.output_dir;
    let series: Vec<MetricSeries> = runs.iter().map(|r| r.metrics.clone()).collect();
    let averaged = MetricSeries::average(&series)?;
    write(&out.join("metrics.csv"), averaged.to_csv())?;

    let threshold = config.threshold();
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            episodes_to_threshold: r.metrics.episodes_to_threshold(threshold),
            dropped_feedback: r.dropped_feedback,
        })
        .collect();
    let crossings: Vec<Option<usize>> = seeds.iter().map(|s| s.episodes_to_threshold).collect();
    let summary = ExperimentSummary {
        mode: config.mode.to_string(),
        task: format!("{:?}", config.task).to_lowercase(),
        threshold,
        episodes: config.episodes(),
        mean_episodes_to_threshold: mean_episodes_to_threshold(&crossings, config.episodes()),
        seeds,
    };
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&out.join("summary.json"), summary_json + "\n")?;
    Ok(ExperimentResult {
        per_seed: runs,
        averaged,
        summary,
    })
}

/// Loads every episode log of a finished run, grouped by seed in config
/// order.
pub fn load_logs(run_dir: &Path) -> Result<(ExperimentConfig, Vec<Vec<EpisodeLog>>)> {
    let config = ExperimentConfig::load(&run_dir.join("config.json"))?;
    let mut all = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut logs = Vec::new();
        for episode in 1..=config.episodes() {
            let path = episode_log_path(run_dir, seed, episode);
            if !path.exists() {
                break;
            }
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let log = EpisodeLog::from_jsonl(&text).map_err(|source| Error::Json { path, source })?;
            logs.push(log);
        }
        all.push(logs);
    }
    Ok((config, all))
}

/// Recomputes the seed-averaged metric series from a run's JSONL logs.
pub fn recompute_metrics(run_dir: &Path) -> Result<MetricSeries> {
    let (_, logs) = load_logs(run_dir)?;
    let per_seed = logs
        .iter()
        .map(MetricSeries::from_logs)
        .collect::<Result<Vec<_>>>()?;
    MetricSeries::average(&per_seed)
}
