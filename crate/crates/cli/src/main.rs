//! `auvrl`: train, export and replay path-following agents.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use auvrl_core::feedback::{FeedbackInbox, NoLink, DEFAULT_INBOX_CAPACITY};
use auvrl_core::guidance::Task;
use auvrl_core::harness::{
    load_logs, recompute_metrics, run_experiment, run_experiment_with_link, EpisodeLog, ExperimentConfig,
    ExperimentResult, GreedyPolicy, MetricSeries, Session,
};
use auvrl_core::nn::Checkpoint;
use auvrl_core::reward::AgentMode;
use auvrl_gateway::{Gateway, GatewayOptions};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "auvrl", version, about = "Interactive DRL workbench for AUV path following")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents for every configured seed and write logs, metrics and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Serve the trainer console and accept live feedback.
        #[arg(long, num_args = 0..=1, default_missing_value = auvrl_gateway::DEFAULT_ADDR, value_name = "ADDR:PORT")]
        serve: Option<SocketAddr>,
        /// Directory with console assets served at `/`.
        #[arg(long, requires = "serve")]
        static_dir: Option<PathBuf>,
    },
    /// Print a finished run's data as CSV, recomputed from its episode logs.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        what: ExportWhat,
    },
    /// Run a checkpointed network greedily and print per-episode metrics.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Experiment config; defaults to the `config.json` of the run the
        /// checkpoint belongs to.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Environment seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = ExportWhat::Metrics)]
        what: ExportWhat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dqne,
    Dqnh,
    Dqnhe,
}

impl From<ModeArg> for AgentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dqne => AgentMode::Dqne,
            ModeArg::Dqnh => AgentMode::Dqnh,
            ModeArg::Dqnhe => AgentMode::Dqnhe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Line,
    Curve,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Line => Task::Line,
            TaskArg::Curve => Task::Curve,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ExportWhat {
    Trajectories,
    Metrics,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Train {
            config,
            mode,
            task,
            seed,
            output,
            serve,
            static_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(task) = task {
                cfg = cfg.with_task(task.into());
            }
            if let Some(mode) = mode {
                cfg.mode = mode.into();
            }
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(output) = output {
                cfg.output_dir = output;
            }
            let result = train(&cfg, serve, static_dir)?;
            report(&cfg, &result);
        }
        Command::Export { run, what } => {
            let csv = match what {
                ExportWhat::Metrics => recompute_metrics(&run)?.to_csv(),
                ExportWhat::Trajectories => {
                    let (_, logs) = load_logs(&run)?;
                    trajectories_csv(logs.iter().flatten())
                }
            };
            emit(&csv)?;
        }
        Command::Replay {
            checkpoint,
            episodes,
            config,
            seed,
            what,
        } => {
            let csv = replay(&checkpoint, episodes, config.as_deref(), seed, what)?;
            emit(&csv)?;
        }
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig, serve: Option<SocketAddr>, static_dir: Option<PathBuf>) -> Result<ExperimentResult> {
    let Some(addr) = serve else {
        return Ok(run_experiment(cfg)?);
    };
    let inbox = FeedbackInbox::new(cfg.admissible_feedback.clone(), DEFAULT_INBOX_CAPACITY);
    let gateway = Gateway::start(addr, inbox, GatewayOptions { static_dir })
        .with_context(|| format!("starting trainer gateway on {addr}"))?;
    eprintln!("trainer console: http://{}/", gateway.local_addr());
    let mut link = gateway.link();
    Ok(run_experiment_with_link(cfg, &mut link)?)
}

fn report(cfg: &ExperimentConfig, result: &ExperimentResult) {
    let s = &result.summary;
    eprintln!(
        "{} {} over {} episodes: mean episodes to tracking error < {} m = {}",
        s.mode, s.task, s.episodes, s.threshold, s.mean_episodes_to_threshold
    );
    for seed in &s.seeds {
        let reached = seed
            .episodes_to_threshold
            .map_or_else(|| "not reached".to_string(), |e| e.to_string());
        eprintln!("  seed {}: {reached} (dropped feedback {})", seed.seed, seed.dropped_feedback);
    }
    eprintln!("outputs in {}", cfg.output_dir.display());
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

const TRAJECTORY_HEADER: &str = "seed,episode,t,x,y,heading,d,c,c_d,action,env_r,R_h,combined_r,ifend";

/// One row per logged step; an absent human reward is an empty field.
fn trajectories_csv<'a>(logs: impl IntoIterator<Item = &'a EpisodeLog>) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for log in logs {
        for s in &log.steps {
            let r_h = s.r_h.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.seed, s.episode, s.t, s.x, s.y, s.heading, s.d, s.c, s.c_d, s.action, s.env_r, r_h, s.combined_r, s.ifend
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Looks for `config.json` in the checkpoint's ancestor directories.
fn find_run_config(checkpoint: &Path) -> Option<PathBuf> {
    checkpoint
        .ancestors()
        .skip(1)
        .map(|dir| dir.join("config.json"))
        .find(|p| p.is_file())
}

fn replay(
    checkpoint: &Path,
    episodes: usize,
    config: Option<&Path>,
    seed: Option<u64>,
    what: ExportWhat,
) -> Result<String> {
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let config_path = match config {
        Some(p) => p.to_path_buf(),
        None => find_run_config(checkpoint)
            .with_context(|| format!("no config.json above {}; pass --config", checkpoint.display()))?,
    };
    let cfg = ExperimentConfig::load(&config_path)?;
    let bytes = std::fs::read(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    let ckpt = Checkpoint::from_json_bytes(&bytes).with_context(|| format!("loading {}", checkpoint.display()))?;

    let seed = seed.unwrap_or(cfg.seeds[0]);
    let mut link = NoLink;
    let mut session = Session::new(&cfg, seed, &mut link);
    let env = session.environment();
    if ckpt.network.input_dim() != env.obs_dim() || ckpt.network.output_dim() != env.actions.len() {
        bail!(
            "checkpoint network is {}->{} but the {:?} task needs {}->{}",
            ckpt.network.input_dim(),
            ckpt.network.output_dim(),
            cfg.task,
            env.obs_dim(),
            env.actions.len()
        );
    }
    let mut policy = GreedyPolicy(ckpt.network);
    let logs = (0..episodes)
        .map(|_| session.run_episode(&mut policy))
        .collect::<auvrl_core::Result<Vec<_>>>()?;
    Ok(match what {
        ExportWhat::Metrics => MetricSeries::from_logs(&logs)?.to_csv(),
        ExportWhat::Trajectories => trajectories_csv(&logs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use auvrl_core::harness::StepRecord;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn serve_flag_defaults_address() {
        let cli = Cli::try_parse_from(["auvrl", "train", "--config", "c.json", "--serve"]).unwrap();
        let Command::Train { serve, .. } = cli.command else { panic!() };
        assert_eq!(serve, Some(auvrl_gateway::DEFAULT_ADDR.parse().unwrap()));

        let cli = Cli::try_parse_from(["auvrl", "train", "--config", "c.json", "--serve", "0.0.0.0:9000"]).unwrap();
        let Command::Train { serve, .. } = cli.command else { panic!() };
        assert_eq!(serve, Some("0.0.0.0:9000".parse().unwrap()));
    }

    #[test]
    fn trajectory_rows_leave_missing_human_reward_empty() {
        let step = |r_h| StepRecord {
            t: 1.0,
            x: 0.5,
            y: -0.25,
            heading: 0.0,
            d: 0.25,
            c: 0.0,
            c_d: 0.1,
            action: 2,
            env_r: 0.3,
            r_h,
            combined_r: 0.3,
            ifend: false,
            episode: 1,
            seed: 7,
        };
        let log = EpisodeLog {
            episode: 1,
            seed: 7,
            steps: vec![step(None), step(Some(0.8))],
        };
        let csv = trajectories_csv([&log]);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], TRAJECTORY_HEADER);
        assert_eq!(rows[1], "7,1,1,0.5,-0.25,0,0.25,0,0.1,2,0.3,,0.3,false");
        assert_eq!(rows[2], "7,1,1,0.5,-0.25,0,0.25,0,0.1,2,0.3,0.8,0.3,false");
    }
}
