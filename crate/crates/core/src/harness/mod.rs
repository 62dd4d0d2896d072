//! Assembles simulator, guidance, reward and learner into the three agents,
//! runs episodes and experiments, and computes the tracking metrics.

mod config;
mod episode;
mod experiment;
mod metrics;
mod trainer;

pub use config::{ExperimentConfig, TrainerConfig};
pub use episode::{Agent, Environment, EpisodeLog, FixedAction, GreedyPolicy, Session, StepRecord};
pub use experiment::{
    checkpoint_path, episode_log_path, load_logs, mean_episodes_to_threshold, recompute_metrics, run_experiment,
    run_experiment_with_link, seed_dir, ExperimentResult, ExperimentSummary, SeedRun, SeedSummary,
};
pub use metrics::{cumulative_env_reward, tracking_error, EpisodeMetrics, MetricSeries, CSV_HEADER};
pub use trainer::{ScriptedTrainer, COURSE_DEAD_BAND, DISTANCE_SLACK};
