use crate::config::{Mode, RunConfig};
use crate::manifest::{sha256_file, Artifacts, Manifest};
use anyhow::{anyhow, bail, Context, Result};
use lobsim::ddql::{checkpoint_path, evaluate, train, Learner, LEARNING_CURVE_HEADER};
use lobsim::kernel::{KernelConfig, SimulationLog};
use lobsim::lobster::{write_synthetic, LobsterEvent};
use lobsim::realism::{
    execution_report, parameter_changes, realism_report, ExecutionComparison, FlowKind, FlowSeries, RealismReport,
};
use lobsim::rl::{ActionSpace, EpisodeResult};
use lobsim::rng::derive_seed;
use lobsim::scenario::{run_scenario, Executor, RosterConfig, EXCHANGE_ID};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// One resolved command invocation.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub mode: Mode,
    pub config: RunConfig,
    pub resume: bool,
    pub checkpoint: Option<PathBuf>,
}

pub fn execute(inv: &Invocation) -> Result<Manifest> {
    let cfg = &inv.config;
    cfg.validate(inv.mode)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut art = Artifacts::new(&cfg.out_dir);
    for f in &cfg.data.files {
        art.input(f);
    }
    match inv.mode {
        Mode::Replay => replay(cfg, &mut art)?,
        Mode::Train => train_cmd(cfg, inv.resume, &mut art)?,
        Mode::Evaluate => evaluate_cmd(cfg, inv.checkpoint.as_deref(), &mut art)?,
        Mode::Realism => realism_cmd(cfg, inv.checkpoint.as_deref(), &mut art)?,
        Mode::GenData => gen_data(cfg, &mut art)?,
    }
    let manifest = art.finish(inv.mode, cfg, inv.resume)?;
    log::info!("{} artifacts written to {}", manifest.artifacts.len(), cfg.out_dir.display());
    Ok(manifest)
}

fn day_kernel(cfg: &RunConfig, day: usize) -> KernelConfig {
    KernelConfig { rng_seed: derive_seed(cfg.kernel.rng_seed, day as u64), record_log: true, ..cfg.kernel.clone() }
}

fn write_log(art: &mut Artifacts, name: &str, log: &SimulationLog) -> Result<()> {
    let mut buf = Vec::new();
    log.write_jsonl(&mut buf)?;
    art.write(name, buf)?;
    Ok(())
}

#[derive(Serialize)]
struct ReplaySummary<'a> {
    events: usize,
    delivered: u64,
    end_time: lobsim::SimTime,
    replay: &'a lobsim::agents::ReplayStats,
    exchange: &'a lobsim::agents::ExchangeStats,
}

fn replay(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let roster = RosterConfig { momentum_agents: 0, background_twap: None, ..cfg.roster.clone() };
    for (d, events) in cfg.data.load()?.into_iter().enumerate() {
        let n = events.len();
        let out = run_scenario(&day_kernel(cfg, d), &roster, events, Executor::None)?;
        write_log(art, &format!("log_day{d:02}.jsonl"), &out.log)?;
        let mut book = Vec::new();
        out.exchange.book().write_csv(&mut book)?;
        art.write(&format!("book_day{d:02}.csv"), book)?;
        let summary = ReplaySummary {
            events: n,
            delivered: out.log.delivered,
            end_time: out.log.end_time,
            replay: &out.replay,
            exchange: out.exchange.stats(),
        };
        art.write_json(&format!("replay_day{d:02}.json"), &summary)?;
        log::info!("day {d}: replayed {} of {n} events", out.replay.submitted);
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    first_episode: u64,
    episodes: usize,
    final_epsilon: f64,
    train_steps: u64,
    target_syncs: u64,
    buffer_len: usize,
}

fn train_cmd(cfg: &RunConfig, resume: bool, art: &mut Artifacts) -> Result<()> {
    let days = cfg.data.load()?;
    let report = train(&cfg.episode_setup(), &days, art.dir(), resume)?;
    for ep in 0..report.learner.episodes_done() {
        art.record(&checkpoint_path(art.dir(), ep));
    }
    art.record(&report.learning_curve);
    let l = &report.learner;
    art.write_json(
        "train_summary.json",
        &TrainSummary {
            first_episode: report.first_episode,
            episodes: cfg.ddql.episodes,
            final_epsilon: l.epsilon(),
            train_steps: l.train_steps(),
            target_syncs: l.target_syncs(),
            buffer_len: l.buffer().len(),
        },
    )?;
    Ok(())
}

/// Load a learner checkpoint whose network must match the configured
/// architecture.
pub fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<Learner> {
    let learner = Learner::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let space = ActionSpace::new(cfg.ddql.multipliers.clone()).map_err(anyhow::Error::msg)?;
    let expected = cfg.ddql.layer_sizes(space.len());
    let found = learner.eval_net().sizes();
    if found != expected {
        bail!("checkpoint {} has layer sizes {found:?}, the configuration expects {expected:?}", path.display());
    }
    Ok(learner)
}

#[derive(Serialize)]
struct EvaluationSummary {
    days: usize,
    mean_action_trace_distance: f64,
    mean_abs_slippage_ddql: Option<f64>,
    mean_abs_slippage_twap: Option<f64>,
    mean_slippage_gap: Option<f64>,
    mean_fill_ratio_ddql: f64,
    mean_fill_ratio_twap: f64,
}

#[derive(Serialize)]
struct Evaluation {
    checkpoint_sha256: String,
    summary: EvaluationSummary,
    days: Vec<ExecutionComparison>,
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(days: &[ExecutionComparison]) -> (f64, Option<f64>, Option<f64>, Option<f64>) {
    let all_some = |f: &dyn Fn(&ExecutionComparison) -> Option<f64>| -> Option<f64> {
        days.iter().map(f).collect::<Option<Vec<f64>>>().and_then(mean)
    };
    (
        mean(days.iter().map(|c| c.action_trace_distance)).unwrap_or(0.0),
        all_some(&|c| c.ddql.slippage.map(f64::abs)),
        all_some(&|c| c.twap.slippage.map(f64::abs)),
        all_some(&|c| c.slippage_gap),
    )
}

fn trace_csv(r: &EpisodeResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.write_action_trace_csv(&mut buf)?;
    Ok(buf)
}

fn evaluate_cmd(cfg: &RunConfig, checkpoint: Option<&Path>, art: &mut Artifacts) -> Result<()> {
    let path = checkpoint
        .or(cfg.evaluate.checkpoint.as_deref())
        .ok_or_else(|| anyhow!("evaluate needs --checkpoint or evaluate.checkpoint"))?
        .to_path_buf();
    art.input(&path);
    let before = sha256_file(&path).with_context(|| format!("reading {}", path.display()))?;
    let learner = load_checkpoint(&path, cfg)?;
    let mut setup = cfg.episode_setup();
    let trained = learner.config();
    if (lobsim::ddql::DdqlConfig { episodes: setup.ddql.episodes, seed: setup.ddql.seed, ..trained.clone() }) != setup.ddql {
        log::warn!("checkpoint was trained with a different DDQL configuration; evaluating with the checkpoint's");
    }
    setup.ddql = trained.clone();
    let days = cfg.data.load()?;
    let pairs = evaluate(&setup, learner, &days)?;
    let mut comparisons = Vec::new();
    for (d, (ddql, twap)) in pairs.iter().enumerate() {
        comparisons.push(execution_report(ddql, twap)?);
        art.write(&format!("actions_ddql_day{d:02}.csv"), trace_csv(ddql)?)?;
        art.write(&format!("actions_twap_day{d:02}.csv"), trace_csv(twap)?)?;
    }
    let (distance, slip_d, slip_t, gap) = summarize(&comparisons);
    let summary = EvaluationSummary {
        days: comparisons.len(),
        mean_action_trace_distance: distance,
        mean_abs_slippage_ddql: slip_d,
        mean_abs_slippage_twap: slip_t,
        mean_slippage_gap: gap,
        mean_fill_ratio_ddql: mean(comparisons.iter().map(|c| c.ddql.fill_ratio)).unwrap_or(0.0),
        mean_fill_ratio_twap: mean(comparisons.iter().map(|c| c.twap.fill_ratio)).unwrap_or(0.0),
    };
    log::info!("mean action-trace distance to TWAP {distance:.4}");
    art.write_json("evaluation.json", &Evaluation { checkpoint_sha256: before.clone(), summary, days: comparisons })?;
    if sha256_file(&path)? != before {
        bail!("checkpoint {} changed during evaluation", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct PairedDay {
    day: usize,
    agent_volume_share: f64,
    without_agent: RealismReport,
    with_agent: RealismReport,
    /// `100 * |with - without| / |without|` for every parameter fitted in both.
    parameter_change_percent: BTreeMap<String, f64>,
    max_change_percent: Option<f64>,
}

#[derive(Serialize)]
struct SingleDay {
    day: usize,
    report: RealismReport,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RealismOutput {
    Log { report: Box<RealismReport> },
    Single { days: Vec<SingleDay> },
    Paired { days: Vec<PairedDay> },
}

/// Result of simulating one day with and without the execution agent.
pub struct PairedRun {
    pub without_agent: RealismReport,
    pub with_agent: RealismReport,
    pub agent_volume_share: f64,
    pub changes: BTreeMap<String, f64>,
}

/// Share of submitted limit and market volume that came from `agent`.
pub fn volume_share(flow: &FlowSeries, agent: usize) -> f64 {
    let (mut mine, mut all) = (0u64, 0u64);
    for r in flow.records().iter().filter(|r| matches!(r.kind, FlowKind::Limit | FlowKind::Market)) {
        all += r.size;
        if r.source == Some(agent) {
            mine += r.size;
        }
    }
    if all == 0 {
        0.0
    } else {
        mine as f64 / all as f64
    }
}

/// Run the configured roster on `events` twice, without and with a frozen
/// DDQL agent, on identical kernel seeds.
pub fn paired_run(cfg: &RunConfig, learner: Learner, events: Arc<Vec<LobsterEvent>>, day: usize) -> Result<PairedRun> {
    let kernel = day_kernel(cfg, day);
    let metrics = cfg.realism.metrics();
    let base = run_scenario(&kernel, &cfg.roster, events.clone(), Executor::None)?;
    let without_agent = realism_report(&FlowSeries::from_log(&base.log.entries, EXCHANGE_ID), &metrics);
    let mut learner = learner;
    learner.freeze();
    let with = run_scenario(&kernel, &cfg.roster, events, Executor::Ddql(learner))?;
    let agent = with.log.agents.len() - 1;
    let flow = FlowSeries::from_log(&with.log.entries, EXCHANGE_ID);
    let with_agent = realism_report(&flow, &metrics);
    let changes = parameter_changes(&without_agent, &with_agent).into_iter().map(|(k, v)| (k, 100.0 * v)).collect();
    Ok(PairedRun { agent_volume_share: volume_share(&flow, agent), without_agent, with_agent, changes })
}

fn samples(art: &mut Artifacts, name: &str, r: &RealismReport) -> Result<()> {
    let mut buf = Vec::new();
    r.write_samples_csv(&mut buf)?;
    art.write(name, buf)?;
    Ok(())
}

fn realism_cmd(cfg: &RunConfig, checkpoint: Option<&Path>, art: &mut Artifacts) -> Result<()> {
    let metrics = cfg.realism.metrics();
    let output = if let Some(path) = &cfg.realism.log {
        art.input(path);
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let entries = SimulationLog::read_jsonl(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
        let report = realism_report(&FlowSeries::from_log(&entries, EXCHANGE_ID), &metrics);
        samples(art, "realism_samples.csv", &report)?;
        RealismOutput::Log { report: Box::new(report) }
    } else if cfg.realism.paired {
        let learner = match checkpoint.or(cfg.realism.checkpoint.as_deref()) {
            Some(p) => {
                art.input(p);
                load_checkpoint(p, cfg)?
            }
            None => Learner::new(cfg.ddql.clone()).map_err(anyhow::Error::msg)?,
        };
        let mut days = Vec::new();
        for (d, events) in cfg.data.load()?.into_iter().enumerate() {
            let run = paired_run(cfg, learner.clone(), events, d)?;
            samples(art, &format!("realism_samples_without_day{d:02}.csv"), &run.without_agent)?;
            samples(art, &format!("realism_samples_with_day{d:02}.csv"), &run.with_agent)?;
            let max = run.changes.values().copied().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
            log::info!("day {d}: agent volume share {:.4}, largest parameter change {max:?}%", run.agent_volume_share);
            days.push(PairedDay {
                day: d,
                agent_volume_share: run.agent_volume_share,
                without_agent: run.without_agent,
                with_agent: run.with_agent,
                parameter_change_percent: run.changes,
                max_change_percent: max,
            });
        }
        RealismOutput::Paired { days }
    } else {
        let mut days = Vec::new();
        for (d, events) in cfg.data.load()?.into_iter().enumerate() {
            let report = realism_report(&FlowSeries::from_lobster(&events), &metrics);
            samples(art, &format!("realism_samples_day{d:02}.csv"), &report)?;
            days.push(SingleDay { day: d, report });
        }
        RealismOutput::Single { days }
    };
    art.write_json("realism.json", &output)?;
    Ok(())
}

fn gen_data(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    if !cfg.data.is_synthetic() {
        bail!("gen-data needs a synthetic data section, not data.files");
    }
    for d in 0..cfg.data.days {
        let flow_cfg = cfg.data.synthetic_day(d);
        let events: Vec<LobsterEvent> = lobsim::lobster::generate_synthetic(flow_cfg.clone()).map_err(anyhow::Error::msg)?.collect();
        let path = art.path(&format!("day{:03}.csv", cfg.data.first_day + d as u64));
        let meta = write_synthetic(&path, &events, &flow_cfg)?;
        art.record(&path);
        art.record(&meta);
        log::info!("wrote {} events to {}", events.len(), path.display());
    }
    Ok(())
}

/// Header line of the learning curve, for consumers of `learning_curve.csv`.
pub const CURVE_HEADER: &str = LEARNING_CURVE_HEADER;
