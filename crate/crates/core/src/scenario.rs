//! Agent roster assembly: one exchange, market replay, momentum traders, an
//! optional background TWAP agent and at most one execution agent under test.

use crate::agents::{ExchangeAgent, MomentumAgent, MomentumConfig, ReplayAgent, ReplayStats, TwapAgent, TwapConfig};
use crate::ddql::{DdqlAgent, Learner};
use crate::kernel::{self, Agent, KernelConfig, KernelError, SimulationLog};
use crate::lob::{AgentId, SelfTradePolicy};
use crate::lobster::LobsterEvent;
use crate::rl::EpisodeResult;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub const EXCHANGE_ID: AgentId = 0;
pub const REPLAY_ID: AgentId = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosterConfig {
    pub momentum_agents: usize,
    pub momentum: MomentumConfig,
    /// Agent `k` starts polling `k * momentum_stagger` after the base offset.
    pub momentum_stagger: SimTime,
    /// `false` in a config file disables the benchmark agent.
    #[serde(with = "optional_agent")]
    pub background_twap: Option<TwapConfig>,
    pub self_trade: SelfTradePolicy,
    pub record_bbo: bool,
}

mod optional_agent {
    use crate::agents::TwapConfig;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Enabled(bool),
        Config(TwapConfig),
    }

    pub fn serialize<S: Serializer>(v: &Option<TwapConfig>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(c) => c.serialize(s),
            None => s.serialize_bool(false),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<TwapConfig>, D::Error> {
        Ok(match Option::<Repr>::deserialize(d)? {
            None | Some(Repr::Enabled(false)) => None,
            Some(Repr::Enabled(true)) => Some(TwapConfig::default()),
            Some(Repr::Config(c)) => Some(c),
        })
    }
}

impl Default for RosterConfig {
    fn default() -> Self {
        RosterConfig {
            momentum_agents: 6,
            momentum: MomentumConfig::default(),
            momentum_stagger: SimTime::from_nanos(150_000_000),
            background_twap: Some(TwapConfig::default()),
            self_trade: SelfTradePolicy::Allow,
            record_bbo: false,
        }
    }
}

pub enum Executor {
    None,
    Ddql(Learner),
    Twap(TwapConfig),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub struct ScenarioOutcome {
    pub log: SimulationLog,
    pub exchange: ExchangeAgent,
    pub replay: ReplayStats,
    pub execution: Option<EpisodeResult>,
    pub learner: Option<Learner>,
    pub background_twap: Option<EpisodeResult>,
}

pub fn run_scenario(
    kernel_config: &KernelConfig,
    roster: &RosterConfig,
    events: Arc<Vec<LobsterEvent>>,
    executor: Executor,
) -> Result<ScenarioOutcome, ScenarioError> {
    roster.momentum.validate().map_err(ScenarioError::Config)?;
    let mut exchange = ExchangeAgent::new(roster.self_trade);
    if roster.record_bbo {
        exchange = exchange.recording_bbo();
    }
    let mut agents: Vec<Box<dyn Agent>> = vec![Box::new(exchange), Box::new(ReplayAgent::new(EXCHANGE_ID, events))];
    for k in 0..roster.momentum_agents {
        let config = MomentumConfig {
            start_offset: roster.momentum.start_offset + SimTime(roster.momentum_stagger.0 * k as u64),
            ..roster.momentum.clone()
        };
        agents.push(Box::new(MomentumAgent::new(EXCHANGE_ID, config)));
    }
    let background_id = match &roster.background_twap {
        Some(cfg) => {
            let agent = TwapAgent::new(EXCHANGE_ID, cfg.clone()).map_err(|e| ScenarioError::Config(e.to_string()))?;
            agents.push(Box::new(agent));
            Some(agents.len() - 1)
        }
        None => None,
    };
    let executor_id = agents.len();
    let mut is_ddql = false;
    match executor {
        Executor::None => {}
        Executor::Ddql(learner) => {
            let c = learner.config();
            if kernel_config.stop_time < c.session_end + c.finalize_delay {
                return Err(ScenarioError::Config(format!(
                    "kernel stops at {} before the execution session closes at {} (+{} finalize delay)",
                    kernel_config.stop_time, c.session_end, c.finalize_delay
                )));
            }
            is_ddql = true;
            agents.push(Box::new(DdqlAgent::new(EXCHANGE_ID, learner)));
        }
        Executor::Twap(cfg) => {
            if kernel_config.stop_time < cfg.session_end {
                return Err(ScenarioError::Config("kernel stops before the TWAP session ends".into()));
            }
            let agent = TwapAgent::new(EXCHANGE_ID, cfg).map_err(|e| ScenarioError::Config(e.to_string()))?;
            agents.push(Box::new(agent));
        }
    }
    let has_executor = agents.len() > executor_id;

    let mut outcome = kernel::run(kernel_config.clone(), agents)?;
    let (execution, learner) = if !has_executor {
        (None, None)
    } else if is_ddql {
        let agent: DdqlAgent = outcome.take_agent(executor_id).expect("execution agent present");
        let (result, learner) = agent.into_parts();
        (Some(result), Some(learner))
    } else {
        let agent: TwapAgent = outcome.take_agent(executor_id).expect("execution agent present");
        (Some(agent.result()), None)
    };
    let background_twap = background_id.map(|id| outcome.take_agent::<TwapAgent>(id).expect("twap agent").result());
    let replay = outcome.take_agent::<ReplayAgent>(REPLAY_ID).expect("replay agent").stats().clone();
    let exchange = outcome.take_agent::<ExchangeAgent>(EXCHANGE_ID).expect("exchange agent");
    Ok(ScenarioOutcome { log: outcome.log, exchange, replay, execution, learner, background_twap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lobster::{generate_synthetic, SyntheticFlowConfig};

    fn flow(seed: u64) -> Arc<Vec<LobsterEvent>> {
        let cfg = SyntheticFlowConfig {
            session_start: SimTime::from_hms(9, 30, 0),
            session_end: SimTime::from_hms(9, 40, 0),
            seed,
            ..Default::default()
        };
        Arc::new(generate_synthetic(cfg).unwrap().collect())
    }

    fn short_twap() -> TwapConfig {
        TwapConfig {
            parent_quantity: 100,
            session_start: SimTime::from_hms(9, 31, 0),
            session_end: SimTime::from_hms(9, 36, 0),
            ..Default::default()
        }
    }

    fn kernel() -> KernelConfig {
        KernelConfig { stop_time: SimTime::from_hms(9, 40, 0), record_log: false, ..Default::default() }
    }

    #[test]
    fn default_roster_runs() {
        let roster = RosterConfig { background_twap: Some(short_twap()), ..Default::default() };
        let out = run_scenario(&kernel(), &roster, flow(1), Executor::None).unwrap();
        assert!(out.replay.submitted > 0);
        let twap = out.background_twap.unwrap();
        assert_eq!(twap.actions.len(), 10);
        assert!(twap.filled_quantity <= 100);
    }

    #[test]
    fn twap_executor_fills_parent() {
        let roster = RosterConfig { background_twap: None, ..Default::default() };
        let out = run_scenario(&kernel(), &roster, flow(2), Executor::Twap(short_twap())).unwrap();
        let r = out.execution.unwrap();
        assert_eq!(r.filled_quantity, 100);
        assert!(r.slippage().unwrap() < 0.01);
    }

    #[test]
    fn background_twap_can_be_disabled_in_config() {
        let r: RosterConfig = serde_json::from_str(r#"{"background_twap": false}"#).unwrap();
        assert_eq!(r.background_twap, None);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RosterConfig>(&json).unwrap(), r);
        let r: RosterConfig = serde_json::from_str(r#"{"background_twap": {"parent_quantity": 60}}"#).unwrap();
        assert_eq!(r.background_twap.unwrap().parent_quantity, 60);
        let r: RosterConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(r, RosterConfig::default());
    }

    #[test]
    fn kernel_must_outlive_session() {
        let k = KernelConfig { stop_time: SimTime::from_hms(9, 35, 0), ..kernel() };
        let roster = RosterConfig { background_twap: None, ..Default::default() };
        assert!(matches!(
            run_scenario(&k, &roster, flow(1), Executor::Twap(short_twap())),
            Err(ScenarioError::Config(_))
        ));
    }
}
