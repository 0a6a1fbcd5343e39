use super::checkpoint::CheckpointError;
use super::config::DdqlConfig;
use super::learner::Learner;
use crate::agents::TwapConfig;
use crate::kernel::KernelConfig;
use crate::lobster::LobsterEvent;
use crate::rl::EpisodeResult;
use crate::rng::derive_seed;
use crate::scenario::{run_scenario, Executor, RosterConfig, ScenarioError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const LEARNING_CURVE_HEADER: &str = "episode,total_reward,filled,slippage,epsilon,loss_mean";

/// Everything needed to run one execution episode besides the data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeSetup {
    pub kernel: KernelConfig,
    pub roster: RosterConfig,
    pub ddql: DdqlConfig,
}

impl EpisodeSetup {
    /// Kernel configuration for episode `episode`; the seed is a function of
    /// the base seed and the episode index only.
    pub fn kernel_for(&self, episode: u64) -> KernelConfig {
        KernelConfig { rng_seed: derive_seed(self.kernel.rng_seed, episode), ..self.kernel.clone() }
    }

    /// The TWAP benchmark trading the same parent order over the same session.
    pub fn twap_baseline(&self) -> TwapConfig {
        TwapConfig {
            parent_quantity: self.ddql.parent_quantity,
            side: self.ddql.side,
            session_start: self.ddql.session_start,
            session_end: self.ddql.session_end,
            period: self.ddql.period,
            lambda: self.ddql.lambda,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error("episode {episode}: {source}")]
    Episode { episode: u64, source: ScenarioError },
    #[error("checkpoint write for episode {episode} failed ({source}); last good checkpoint: {last_good:?}")]
    Checkpoint { episode: u64, last_good: Option<PathBuf>, source: CheckpointError },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn run_episode(
    setup: &EpisodeSetup,
    mut learner: Learner,
    events: Arc<Vec<LobsterEvent>>,
    episode: u64,
) -> Result<(EpisodeResult, Learner), ScenarioError> {
    learner.begin_episode(episode);
    let out = run_scenario(&setup.kernel_for(episode), &setup.roster, events, Executor::Ddql(learner))?;
    let result = out.execution.expect("execution result");
    Ok((result, out.learner.expect("learner returned")))
}

pub fn run_twap_episode(
    setup: &EpisodeSetup,
    events: Arc<Vec<LobsterEvent>>,
    episode: u64,
) -> Result<EpisodeResult, ScenarioError> {
    let out = run_scenario(&setup.kernel_for(episode), &setup.roster, events, Executor::Twap(setup.twap_baseline()))?;
    Ok(out.execution.expect("execution result"))
}

pub fn checkpoint_path(dir: &Path, episode: u64) -> PathBuf {
    dir.join(format!("checkpoint_{episode:04}.bin"))
}

/// Most recent `checkpoint_NNNN.bin` in `dir`.
pub fn latest_checkpoint(dir: &Path) -> std::io::Result<Option<PathBuf>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(n) = name.strip_prefix("checkpoint_").and_then(|r| r.strip_suffix(".bin")) else { continue };
        if let Ok(n) = n.parse::<u64>() {
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, path));
            }
        }
    }
    Ok(best.map(|b| b.1))
}

pub fn learning_curve_row(episode: u64, r: &EpisodeResult) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    format!(
        "{episode},{},{},{},{},{}",
        r.total_reward,
        r.filled_quantity,
        opt(r.slippage()),
        r.final_epsilon,
        opt(r.mean_loss)
    )
}

pub struct TrainReport {
    pub learner: Learner,
    pub results: Vec<EpisodeResult>,
    pub checkpoints: Vec<PathBuf>,
    pub learning_curve: PathBuf,
    /// Episode index the run started from (non-zero after a resume).
    pub first_episode: u64,
}

/// Run `setup.ddql.episodes` episodes in total, episode `b` replaying
/// `days[b % days.len()]`. Learner state carries over between episodes and a
/// checkpoint is written after each one. With `resume`, training continues
/// from the latest checkpoint in `out_dir`.
pub fn train(
    setup: &EpisodeSetup,
    days: &[Arc<Vec<LobsterEvent>>],
    out_dir: &Path,
    resume: bool,
) -> Result<TrainReport, TrainError> {
    if days.is_empty() {
        return Err(TrainError::Config("no training days".into()));
    }
    fs::create_dir_all(out_dir)?;
    let curve_path = out_dir.join("learning_curve.csv");
    let mut learner = None;
    let mut rows = vec![LEARNING_CURVE_HEADER.to_string()];
    if resume {
        if let Some(path) = latest_checkpoint(out_dir)? {
            let mut l = Learner::load(&path).map_err(|e| TrainError::Resume(format!("{}: {e}", path.display())))?;
            // Only the episode budget may change between the original run and
            // the resumed one.
            if (DdqlConfig { episodes: setup.ddql.episodes, ..l.config.clone() }) != setup.ddql {
                return Err(TrainError::Resume(format!(
                    "{} was written with a different DDQL configuration",
                    path.display()
                )));
            }
            l.config.episodes = setup.ddql.episodes;
            let done = l.episodes_done() as usize;
            let existing = fs::read_to_string(&curve_path).unwrap_or_default();
            rows.extend(existing.lines().skip(1).take(done).map(str::to_string));
            if rows.len() != done + 1 {
                return Err(TrainError::Resume(format!(
                    "learning curve has {} rows but the checkpoint covers {done} episodes",
                    rows.len() - 1
                )));
            }
            log::info!("resuming after episode {done} from {}", path.display());
            learner = Some(l);
        }
    }
    let mut learner = match learner {
        Some(l) => l,
        None => Learner::new(setup.ddql.clone()).map_err(TrainError::Config)?,
    };
    let first_episode = learner.episodes_done();
    let mut results = Vec::new();
    let mut checkpoints = Vec::new();
    let mut last_good = latest_checkpoint(out_dir)?.filter(|_| resume);

    for episode in first_episode..setup.ddql.episodes as u64 {
        let day = days[episode as usize % days.len()].clone();
        let (result, next) =
            run_episode(setup, learner, day, episode).map_err(|source| TrainError::Episode { episode, source })?;
        learner = next;
        log::info!(
            "episode {episode}: reward {:.4}, filled {}/{}, epsilon {:.3}, train steps {}",
            result.total_reward,
            result.filled_quantity,
            result.parent_quantity,
            result.final_epsilon,
            result.train_steps
        );
        rows.push(learning_curve_row(episode, &result));
        let path = checkpoint_path(out_dir, episode);
        learner
            .save(&path)
            .map_err(|source| TrainError::Checkpoint { episode, last_good: last_good.clone(), source })?;
        let mut f = fs::File::create(&curve_path)?;
        for r in &rows {
            writeln!(f, "{r}")?;
        }
        last_good = Some(path.clone());
        checkpoints.push(path);
        results.push(result);
    }
    if rows.len() == 1 {
        let mut f = fs::File::create(&curve_path)?;
        writeln!(f, "{LEARNING_CURVE_HEADER}")?;
    }
    Ok(TrainReport { learner, results, checkpoints, learning_curve: curve_path, first_episode })
}

/// Paired greedy runs of the frozen learner and the TWAP benchmark on each
/// day, with identical kernel seeds.
pub fn evaluate(
    setup: &EpisodeSetup,
    mut learner: Learner,
    days: &[Arc<Vec<LobsterEvent>>],
) -> Result<Vec<(EpisodeResult, EpisodeResult)>, TrainError> {
    learner.freeze();
    let mut out = Vec::new();
    for (i, day) in days.iter().enumerate() {
        let episode = i as u64;
        let (ddql, next) = run_episode(setup, learner, day.clone(), episode)
            .map_err(|source| TrainError::Episode { episode, source })?;
        learner = next;
        let twap =
            run_twap_episode(setup, day.clone(), episode).map_err(|source| TrainError::Episode { episode, source })?;
        out.push((ddql, twap));
    }
    Ok(out)
}
