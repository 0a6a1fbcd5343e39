use anyhow::{bail, Context, Result};
use lobsim::ddql::{DdqlConfig, EpisodeSetup};
use lobsim::kernel::KernelConfig;
use lobsim::lobster::{generate_synthetic, read_message_file, LobsterEvent, SyntheticFlowConfig};
use lobsim::realism::RealismConfig;
use lobsim::rng::derive_seed;
use lobsim::scenario::RosterConfig;
use lobsim::SimTime;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Replay,
    Train,
    Evaluate,
    Realism,
    GenData,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Replay => "replay",
            Mode::Train => "train",
            Mode::Evaluate => "evaluate",
            Mode::Realism => "realism",
            Mode::GenData => "gen-data",
        })
    }
}

/// Where order flow comes from: LOBSTER message files when any are listed,
/// otherwise `days` synthetic sessions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub files: Vec<PathBuf>,
    pub synthetic: SyntheticFlowConfig,
    pub days: usize,
    /// Index of the first synthetic day; training and test sets use disjoint
    /// ranges.
    pub first_day: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { files: Vec::new(), synthetic: SyntheticFlowConfig::default(), days: 1, first_day: 0 }
    }
}

impl DataConfig {
    pub fn is_synthetic(&self) -> bool {
        self.files.is_empty()
    }

    pub fn day_count(&self) -> usize {
        if self.is_synthetic() {
            self.days
        } else {
            self.files.len()
        }
    }

    /// Generator configuration of synthetic day `d` (counted from `first_day`).
    pub fn synthetic_day(&self, d: usize) -> SyntheticFlowConfig {
        SyntheticFlowConfig { seed: derive_seed(self.synthetic.seed, self.first_day + d as u64), ..self.synthetic.clone() }
    }

    pub fn load(&self) -> Result<Vec<Arc<Vec<LobsterEvent>>>> {
        if self.is_synthetic() {
            (0..self.days)
                .map(|d| {
                    let flow = generate_synthetic(self.synthetic_day(d)).map_err(anyhow::Error::msg)?;
                    Ok(Arc::new(flow.collect()))
                })
                .collect()
        } else {
            self.files
                .iter()
                .map(|p| read_message_file(p).with_context(|| format!("reading {}", p.display())).map(Arc::new))
                .collect()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealismRunConfig {
    pub window: SimTime,
    pub bucket: SimTime,
    pub session: Option<(SimTime, SimTime)>,
    /// Analyse an existing JSONL simulation log instead of the data section.
    pub log: Option<PathBuf>,
    /// Simulate every data day with and without the DDQL agent and compare.
    pub paired: bool,
    /// Learner for the paired runs; a freshly initialized one when absent.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RealismRunConfig {
    fn default() -> Self {
        let m = RealismConfig::default();
        RealismRunConfig { window: m.window, bucket: m.bucket, session: m.session, log: None, paired: false, checkpoint: None }
    }
}

impl RealismRunConfig {
    pub fn metrics(&self) -> RealismConfig {
        RealismConfig { window: self.window, bucket: self.bucket, session: self.session }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; the kernel, learner and generator seeds derive from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub kernel: KernelConfig,
    pub roster: RosterConfig,
    pub ddql: DdqlConfig,
    pub evaluate: EvaluateConfig,
    pub realism: RealismRunConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            kernel: KernelConfig::default(),
            roster: RosterConfig::default(),
            ddql: DdqlConfig::default(),
            evaluate: EvaluateConfig::default(),
            realism: RealismRunConfig::default(),
        }
    }
}

#[derive(Deserialize)]
struct ManifestHead {
    command: Mode,
    config: RunConfig,
}

/// A run configuration and, when it came from a manifest, the command that
/// wrote it.
pub struct Loaded {
    pub config: RunConfig,
    pub manifest_command: Option<Mode>,
}

/// Read a TOML run configuration, or the `config` of a previous run's
/// `manifest.json`. Relative paths in a TOML file are taken relative to the
/// file's directory.
pub fn load_config(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let head: ManifestHead =
            serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))?;
        return Ok(Loaded { config: head.config, manifest_command: Some(head.command) });
    }
    let mut config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    config.data.files.iter_mut().for_each(rebase);
    config.evaluate.checkpoint.iter_mut().for_each(rebase);
    config.realism.log.iter_mut().for_each(rebase);
    config.realism.checkpoint.iter_mut().for_each(rebase);
    Ok(Loaded { config, manifest_command: None })
}

impl RunConfig {
    /// Fill the per-component seeds from the master seed. Idempotent, so a
    /// manifest's resolved config resolves to itself.
    pub fn resolve(mut self) -> Self {
        self.kernel.rng_seed = derive_seed(self.seed, 0);
        self.ddql.seed = derive_seed(self.seed, 1);
        self.data.synthetic.seed = derive_seed(self.seed, 2);
        self
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        self.kernel.validate()?;
        self.roster.momentum.validate().map_err(anyhow::Error::msg)?;
        if let Some(t) = &self.roster.background_twap {
            t.num_periods().context("background TWAP")?;
        }
        for f in &self.data.files {
            if !f.is_file() {
                bail!("data file {} does not exist", f.display());
            }
        }
        if self.data.is_synthetic() {
            self.data.synthetic.validate().map_err(anyhow::Error::msg).context("data.synthetic")?;
        }
        match mode {
            Mode::Train | Mode::Evaluate => {
                self.ddql.validate().map_err(anyhow::Error::msg).context("ddql")?;
                if self.data.day_count() == 0 {
                    bail!("no data days configured");
                }
            }
            Mode::Realism => {
                if let Some(log) = &self.realism.log {
                    if !log.is_file() {
                        bail!("realism log {} does not exist", log.display());
                    }
                }
                if self.realism.paired {
                    self.ddql.validate().map_err(anyhow::Error::msg).context("ddql")?;
                }
            }
            Mode::Replay | Mode::GenData => {}
        }
        Ok(())
    }

    pub fn episode_setup(&self) -> EpisodeSetup {
        EpisodeSetup { kernel: self.kernel.clone(), roster: self.roster.clone(), ddql: self.ddql.clone() }
    }
}
