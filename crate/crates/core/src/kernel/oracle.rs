//! Scripted agents and a naive event-list simulator used as an oracle for
//! [`super::Kernel`] delivery order.

use super::{run, Agent, AgentContext, AgentError, KernelConfig, LogEntry, Message, PairLatency, Payload};
use crate::lob::AgentId;
use crate::time::SimTime;
use rand::Rng;
use std::any::Any;

/// What an agent does on one callback: send opaque tokens, then optionally
/// wake itself `wake_in` nanoseconds later.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub sends: Vec<(AgentId, u64)>,
    pub wake_in: Option<u64>,
}

/// Per-agent scripts: step `k` runs on the agent's `k`-th callback, where
/// `on_start` is callback 0. Callbacks past the end of a script do nothing.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub config: KernelConfig,
    pub scripts: Vec<Vec<Step>>,
}

fn token(t: u64) -> Payload {
    Payload::CancelOrder { order_id: t }
}

pub struct ScriptedAgent {
    script: Vec<Step>,
    calls: usize,
    /// Every message received, with the kernel time at delivery.
    pub received: Vec<(SimTime, Message)>,
    pub observed_times: Vec<SimTime>,
    pub seed: u64,
}

impl ScriptedAgent {
    pub fn new(script: Vec<Step>) -> Self {
        ScriptedAgent { script, calls: 0, received: Vec::new(), observed_times: Vec::new(), seed: 0 }
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.observed_times.push(ctx.now());
        self.seed = ctx.seed();
        if let Some(step) = self.script.get(self.calls).cloned() {
            for (to, t) in step.sends {
                ctx.send(to, token(t))?;
            }
            if let Some(d) = step.wake_in {
                ctx.wakeup_at(ctx.now() + SimTime(d))?;
            }
        }
        self.calls += 1;
        Ok(())
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> &str {
        "scripted"
    }

    fn on_start(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.step(ctx)
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        self.received.push((ctx.now(), msg.clone()));
        self.step(ctx)
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}

pub fn random_schedule<R: Rng>(rng: &mut R) -> Schedule {
    let agents = rng.random_range(1..=6usize);
    let start = SimTime(rng.random_range(0..1_000_000));
    let mut config = KernelConfig {
        start_time: start,
        stop_time: start + SimTime(rng.random_range(1..20_000)),
        latency_nanos: rng.random_range(0..1_000),
        pair_latency: Vec::new(),
        computation_delay_nanos: if rng.random_bool(0.5) { 0 } else { rng.random_range(0..100) },
        rng_seed: rng.random(),
        record_log: true,
    };
    for _ in 0..rng.random_range(0..4) {
        config.pair_latency.push(PairLatency {
            from: rng.random_range(0..agents),
            to: rng.random_range(0..agents),
            nanos: rng.random_range(0..3_000),
        });
    }
    let mut next_token = 0;
    let scripts = (0..agents)
        .map(|_| {
            (0..rng.random_range(0..8))
                .map(|_| Step {
                    sends: (0..rng.random_range(0..=3))
                        .map(|_| {
                            next_token += 1;
                            (rng.random_range(0..agents), next_token)
                        })
                        .collect(),
                    // Small values make equal-time ties common.
                    wake_in: rng.random_bool(0.6).then(|| rng.random_range(0..4) * 500),
                })
                .collect()
        })
        .collect();
    Schedule { config, scripts }
}

/// Delivered messages in the order a flat pending list, scanned for the
/// minimum `(deliver_at, sequence)` on every step, would produce.
pub fn reference_deliveries(s: &Schedule) -> Vec<LogEntry> {
    struct Pending {
        at: SimTime,
        seq: u64,
        sender: AgentId,
        recipient: AgentId,
        payload: Payload,
    }
    let c = &s.config;
    let mut pending: Vec<Pending> = Vec::new();
    let mut seq = 0;
    let mut calls = vec![0usize; s.scripts.len()];
    let mut act = |who: AgentId, now: SimTime, pending: &mut Vec<Pending>, calls: &mut Vec<usize>| {
        if let Some(step) = s.scripts[who].get(calls[who]) {
            for (to, t) in &step.sends {
                let at = SimTime(now.0 + c.computation_delay_nanos + c.latency(who, *to));
                pending.push(Pending { at, seq, sender: who, recipient: *to, payload: token(*t) });
                seq += 1;
            }
            if let Some(d) = step.wake_in {
                pending.push(Pending { at: now + SimTime(d), seq, sender: who, recipient: who, payload: Payload::Wakeup });
                seq += 1;
            }
        }
        calls[who] += 1;
    };
    for who in 0..s.scripts.len() {
        act(who, c.start_time, &mut pending, &mut calls);
    }
    let mut out = Vec::new();
    while !pending.is_empty() {
        let i = (0..pending.len()).min_by_key(|&i| (pending[i].at, pending[i].seq)).unwrap();
        if pending[i].at > c.stop_time {
            break;
        }
        let p = pending.remove(i);
        act(p.recipient, p.at, &mut pending, &mut calls);
        out.push(LogEntry { time: p.at, sender: p.sender, recipient: p.recipient, tag: p.payload.tag().into(), payload: p.payload });
    }
    out
}

fn execute(s: &Schedule) -> Result<(Vec<LogEntry>, Vec<ScriptedAgent>), String> {
    let agents: Vec<Box<dyn Agent>> =
        s.scripts.iter().map(|sc| Box::new(ScriptedAgent::new(sc.clone())) as Box<dyn Agent>).collect();
    let mut out = run(s.config.clone(), agents).map_err(|e| e.to_string())?;
    let scripted = (0..s.scripts.len()).map(|i| out.take_agent::<ScriptedAgent>(i).expect("scripted agent")).collect();
    Ok((out.log.entries, scripted))
}

/// Run `s` twice through the kernel and check delivery order against
/// [`reference_deliveries`], causality per agent, the `[start, stop]` window,
/// the latency formula, and run-to-run identity.
pub fn check_schedule(s: &Schedule) -> Result<(), String> {
    let (log, agents) = execute(s)?;
    let expected = reference_deliveries(s);
    if log != expected {
        let at = log.iter().zip(&expected).position(|(a, b)| a != b).unwrap_or(log.len().min(expected.len()));
        return Err(format!("delivery order differs from the reference at index {at} ({} vs {} events)", log.len(), expected.len()));
    }
    let c = &s.config;
    for (id, a) in agents.iter().enumerate() {
        if a.observed_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("agent {id} observed time going backwards"));
        }
        for (now, m) in &a.received {
            if *now < c.start_time || *now > c.stop_time {
                return Err(format!("agent {id} received a message at {now}, outside the run window"));
            }
            if m.deliver_at != *now || m.deliver_at < m.sent_at {
                return Err(format!("agent {id}: inconsistent delivery {m:?} at {now}"));
            }
            if m.payload != Payload::Wakeup {
                let want = m.sent_at.0 + c.computation_delay_nanos + c.latency(m.sender, m.recipient);
                if m.deliver_at.0 != want {
                    return Err(format!("agent {id}: delivered at {} instead of {want}", m.deliver_at.0));
                }
            }
        }
    }
    let (again, agents2) = execute(s)?;
    if again != log {
        return Err("second run differs".into());
    }
    if agents.iter().map(|a| a.seed).ne(agents2.iter().map(|a| a.seed)) {
        return Err("agent seeds differ between runs".into());
    }
    Ok(())
}
