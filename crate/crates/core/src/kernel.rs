//! Deterministic discrete-event kernel.
//!
//! Agents never touch each other directly: every interaction is a [`Message`]
//! carried by the kernel. A message sent at kernel time `now` is delivered at
//! `now + computation_delay + latency(sender, recipient)`; wakeups are
//! delivered at exactly the requested time. Events are popped in
//! `(deliver_at, insertion sequence)` order, so equal-time events are FIFO and
//! every run with the same configuration and agents is bit-identical.

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;

use crate::lob::{AgentId, BookSnapshot, Fill, Order, OrderId, Price, Quantity, Side};
use crate::rng::derive_seed;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    LimitOrder { order_id: OrderId, side: Side, price: Price, quantity: Quantity },
    MarketOrder { order_id: OrderId, side: Side, quantity: Quantity },
    CancelOrder { order_id: OrderId },
    /// Partial cancellation of a resting order.
    ReduceOrder { order_id: OrderId, by: Quantity },
    OrderAccepted { order: Order },
    /// `order_id` is the recipient's order that took part in `fill`.
    OrderExecuted { order_id: OrderId, fill: Fill },
    /// Resting quantity removed by a cancel, or the unfilled remainder of a
    /// market order.
    OrderCancelled { order_id: OrderId, quantity: Quantity },
    OrderRejected { order_id: OrderId, reason: String },
    MarketDataQuery { depth: usize },
    MarketDataReply { snapshot: BookSnapshot },
    Wakeup,
}

impl Payload {
    pub fn tag(&self) -> &'static str {
        match self {
            Payload::LimitOrder { .. } => "limit_order",
            Payload::MarketOrder { .. } => "market_order",
            Payload::CancelOrder { .. } => "cancel_order",
            Payload::ReduceOrder { .. } => "reduce_order",
            Payload::OrderAccepted { .. } => "order_accepted",
            Payload::OrderExecuted { .. } => "order_executed",
            Payload::OrderCancelled { .. } => "order_cancelled",
            Payload::OrderRejected { .. } => "order_rejected",
            Payload::MarketDataQuery { .. } => "market_data_query",
            Payload::MarketDataReply { .. } => "market_data_reply",
            Payload::Wakeup => "wakeup",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: AgentId,
    pub recipient: AgentId,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLatency {
    pub from: AgentId,
    pub to: AgentId,
    pub nanos: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub start_time: SimTime,
    pub stop_time: SimTime,
    /// Applied to every ordered pair without an override.
    pub latency_nanos: u64,
    pub pair_latency: Vec<PairLatency>,
    pub computation_delay_nanos: u64,
    pub rng_seed: u64,
    /// Keep every delivered message in the returned log.
    pub record_log: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            start_time: SimTime::from_hms(9, 30, 0),
            stop_time: SimTime::from_hms(16, 0, 0),
            latency_nanos: 0,
            pair_latency: Vec::new(),
            computation_delay_nanos: 0,
            rng_seed: 0,
            record_log: true,
        }
    }
}

impl KernelConfig {
    pub fn latency(&self, from: AgentId, to: AgentId) -> u64 {
        self.pair_latency
            .iter()
            .find(|p| p.from == from && p.to == to)
            .map_or(self.latency_nanos, |p| p.nanos)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.start_time >= self.stop_time {
            return Err(KernelError::InvalidConfig(format!(
                "start_time {} must precede stop_time {}",
                self.start_time, self.stop_time
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot schedule at {at} before current time {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {agent_id} ({name}) failed at {at}: {message}")]
    AgentFailed { agent_id: AgentId, name: String, at: SimTime, message: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct AgentError(pub String);

impl AgentError {
    pub fn new(msg: impl Into<String>) -> Self {
        AgentError(msg.into())
    }
}

impl From<KernelError> for AgentError {
    fn from(e: KernelError) -> Self {
        AgentError(e.to_string())
    }
}

enum Outgoing {
    Message { recipient: AgentId, payload: Payload },
    Wakeup { at: SimTime },
}

/// The kernel services visible to an agent during one callback.
pub struct AgentContext<'a> {
    now: SimTime,
    agent_id: AgentId,
    agent_count: usize,
    seed: u64,
    outbox: &'a mut Vec<Outgoing>,
}

impl AgentContext<'_> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn id(&self) -> AgentId {
        self.agent_id
    }

    /// Seed private to this agent, derived from the kernel seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn send(&mut self, recipient: AgentId, payload: Payload) -> Result<(), KernelError> {
        if recipient >= self.agent_count {
            return Err(KernelError::UnknownAgent(recipient));
        }
        self.outbox.push(Outgoing::Message { recipient, payload });
        Ok(())
    }

    pub fn wakeup_at(&mut self, at: SimTime) -> Result<(), KernelError> {
        if at < self.now {
            return Err(KernelError::ScheduleInPast { at, now: self.now });
        }
        self.outbox.push(Outgoing::Wakeup { at });
        Ok(())
    }
}

pub trait Agent: Any {
    fn name(&self) -> &str;

    fn on_start(&mut self, _ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        Ok(())
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError>;

    /// Summary recorded in the simulation log when the run ends.
    fn final_state(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub time: SimTime,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub tag: String,
    pub payload: Payload,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent_id: AgentId,
    pub name: String,
    pub state: serde_json::Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub entries: Vec<LogEntry>,
    pub delivered: u64,
    pub end_time: SimTime,
    pub agents: Vec<AgentSummary>,
}

impl SimulationLog {
    /// One JSON object per delivered message.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<LogEntry>> {
        let mut entries = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(entries)
    }
}

pub struct SimulationOutcome {
    pub log: SimulationLog,
    pub agents: Vec<Box<dyn Agent>>,
}

impl SimulationOutcome {
    /// Take agent `id` back out of the outcome as its concrete type.
    pub fn take_agent<A: Agent>(&mut self, id: AgentId) -> Option<A> {
        if id >= self.agents.len() {
            return None;
        }
        let placeholder: Box<dyn Agent> = Box::new(Vacant);
        let agent = std::mem::replace(&mut self.agents[id], placeholder);
        match agent.into_any().downcast::<A>() {
            Ok(a) => Some(*a),
            Err(_) => None,
        }
    }
}

struct Vacant;

impl Agent for Vacant {
    fn name(&self) -> &str {
        "vacant"
    }

    fn on_message(&mut self, _: &mut AgentContext<'_>, _: &Message) -> Result<(), AgentError> {
        Ok(())
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}

struct Queued {
    seq: u64,
    msg: Message,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.msg.deliver_at, self.seq).cmp(&(other.msg.deliver_at, other.seq))
    }
}

pub struct Kernel {
    config: KernelConfig,
    agents: Vec<Box<dyn Agent>>,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    now: SimTime,
}

impl Kernel {
    pub fn new(config: KernelConfig, agents: Vec<Box<dyn Agent>>) -> Result<Self, KernelError> {
        config.validate()?;
        let now = config.start_time;
        Ok(Kernel { config, agents, queue: BinaryHeap::new(), next_seq: 0, now })
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn schedule_wakeup(&mut self, agent: AgentId, at: SimTime) -> Result<(), KernelError> {
        if agent >= self.agents.len() {
            return Err(KernelError::UnknownAgent(agent));
        }
        if at < self.now {
            return Err(KernelError::ScheduleInPast { at, now: self.now });
        }
        self.enqueue(Message { sender: agent, recipient: agent, sent_at: self.now, deliver_at: at, payload: Payload::Wakeup });
        Ok(())
    }

    /// Send on behalf of `sender` at the current kernel time.
    pub fn send_message(&mut self, sender: AgentId, recipient: AgentId, payload: Payload) -> Result<(), KernelError> {
        if sender >= self.agents.len() {
            return Err(KernelError::UnknownAgent(sender));
        }
        if recipient >= self.agents.len() {
            return Err(KernelError::UnknownAgent(recipient));
        }
        let deliver_at = self.delivery_time(sender, recipient);
        self.enqueue(Message { sender, recipient, sent_at: self.now, deliver_at, payload });
        Ok(())
    }

    fn delivery_time(&self, sender: AgentId, recipient: AgentId) -> SimTime {
        SimTime(self.now.0 + self.config.computation_delay_nanos + self.config.latency(sender, recipient))
    }

    fn enqueue(&mut self, msg: Message) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued { seq, msg }));
    }

    fn flush(&mut self, sender: AgentId, outbox: &mut Vec<Outgoing>) {
        for out in outbox.drain(..) {
            match out {
                Outgoing::Message { recipient, payload } => {
                    let deliver_at = self.delivery_time(sender, recipient);
                    self.enqueue(Message { sender, recipient, sent_at: self.now, deliver_at, payload });
                }
                Outgoing::Wakeup { at } => {
                    self.enqueue(Message {
                        sender,
                        recipient: sender,
                        sent_at: self.now,
                        deliver_at: at,
                        payload: Payload::Wakeup,
                    });
                }
            }
        }
    }

    fn failure(&self, agent_id: AgentId, err: AgentError) -> KernelError {
        KernelError::AgentFailed {
            agent_id,
            name: self.agents[agent_id].name().to_string(),
            at: self.now,
            message: err.0,
        }
    }

    pub fn run(mut self) -> Result<SimulationOutcome, KernelError> {
        let agent_count = self.agents.len();
        let mut outbox = Vec::new();
        let mut log = SimulationLog::default();

        for id in 0..agent_count {
            let mut ctx = AgentContext {
                now: self.now,
                agent_id: id,
                agent_count,
                seed: derive_seed(self.config.rng_seed, id as u64),
                outbox: &mut outbox,
            };
            if let Err(e) = self.agents[id].on_start(&mut ctx) {
                return Err(self.failure(id, e));
            }
            self.flush(id, &mut outbox);
        }

        while let Some(Reverse(next)) = self.queue.pop() {
            let msg = next.msg;
            if msg.deliver_at > self.config.stop_time {
                break;
            }
            debug_assert!(msg.deliver_at >= self.now);
            self.now = msg.deliver_at;
            log.delivered += 1;
            let id = msg.recipient;
            let mut ctx = AgentContext {
                now: self.now,
                agent_id: id,
                agent_count,
                seed: derive_seed(self.config.rng_seed, id as u64),
                outbox: &mut outbox,
            };
            if let Err(e) = self.agents[id].on_message(&mut ctx, &msg) {
                return Err(self.failure(id, e));
            }
            self.flush(id, &mut outbox);
            if self.config.record_log {
                log.entries.push(LogEntry {
                    time: msg.deliver_at,
                    sender: msg.sender,
                    recipient: msg.recipient,
                    tag: msg.payload.tag().to_string(),
                    payload: msg.payload,
                });
            }
        }

        log.end_time = self.now;
        log.agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(agent_id, a)| AgentSummary { agent_id, name: a.name().to_string(), state: a.final_state() })
            .collect();
        Ok(SimulationOutcome { log, agents: self.agents })
    }
}

/// Run `agents` to completion under `config`.
pub fn run(config: KernelConfig, agents: Vec<Box<dyn Agent>>) -> Result<SimulationOutcome, KernelError> {
    Kernel::new(config, agents)?.run()
}
