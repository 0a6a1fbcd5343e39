use crate::kernel::{LogEntry, Payload};
use crate::lob::{AgentId, Quantity, Side};
use crate::lobster::{EventType, LobsterEvent};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Limit,
    Market,
    Cancel,
    Execution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub time: SimTime,
    pub kind: FlowKind,
    pub size: Quantity,
    pub side: Side,
    /// Submitting agent, when known.
    pub source: Option<AgentId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSeries {
    records: Vec<FlowRecord>,
}

impl FlowSeries {
    pub fn new(records: Vec<FlowRecord>) -> Result<Self, String> {
        if let Some(w) = records.windows(2).find(|w| w[1].time < w[0].time) {
            return Err(format!("flow time decreases from {} to {}", w[0].time, w[1].time));
        }
        Ok(FlowSeries { records })
    }

    /// Types 1-5 of a LOBSTER stream; cross trades and halts carry no flow.
    pub fn from_lobster(events: &[LobsterEvent]) -> Self {
        let mut records: Vec<FlowRecord> = events
            .iter()
            .filter_map(|e| {
                let kind = match e.event_type {
                    EventType::NewLimit => FlowKind::Limit,
                    EventType::PartialCancel | EventType::Delete => FlowKind::Cancel,
                    EventType::VisibleExecution | EventType::HiddenExecution => FlowKind::Execution,
                    EventType::CrossTrade | EventType::Halt => return None,
                };
                Some(FlowRecord { time: e.time, kind, size: e.size, side: e.direction.side(), source: None })
            })
            .collect();
        records.sort_by_key(|r| r.time);
        FlowSeries { records }
    }

    /// Order instructions delivered to `exchange` in a simulation log.
    pub fn from_log(entries: &[LogEntry], exchange: AgentId) -> Self {
        let mut records: Vec<FlowRecord> = entries
            .iter()
            .filter(|e| e.recipient == exchange)
            .filter_map(|e| {
                let (kind, size, side) = match &e.payload {
                    Payload::LimitOrder { side, quantity, .. } => (FlowKind::Limit, *quantity, *side),
                    Payload::MarketOrder { side, quantity, .. } => (FlowKind::Market, *quantity, *side),
                    // Cancels carry no size or side in the instruction itself.
                    Payload::CancelOrder { .. } => (FlowKind::Cancel, 0, Side::Bid),
                    Payload::ReduceOrder { by, .. } => (FlowKind::Cancel, *by, Side::Bid),
                    _ => return None,
                };
                Some(FlowRecord { time: e.time, kind, size, side, source: Some(e.sender) })
            })
            .collect();
        records.sort_by_key(|r| r.time);
        FlowSeries { records }
    }

    pub fn records(&self) -> &[FlowRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn limit_orders(&self) -> impl Iterator<Item = &FlowRecord> {
        self.records.iter().filter(|r| r.kind == FlowKind::Limit)
    }

    /// Flow without the records submitted by `agent`.
    pub fn without_source(&self, agent: AgentId) -> FlowSeries {
        FlowSeries { records: self.records.iter().filter(|r| r.source != Some(agent)).copied().collect() }
    }

    pub fn span(&self) -> Option<(SimTime, SimTime)> {
        Some((self.records.first()?.time, self.records.last()?.time))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lobster::Direction;

    #[test]
    fn lobster_mapping() {
        let ev = |t, event_type| LobsterEvent {
            time: SimTime(t),
            event_type,
            order_id: 1,
            size: 5,
            price: 100,
            direction: Direction::Buy,
        };
        let f = FlowSeries::from_lobster(&[
            ev(1, EventType::NewLimit),
            ev(2, EventType::Delete),
            ev(3, EventType::CrossTrade),
            ev(4, EventType::VisibleExecution),
        ]);
        let kinds: Vec<FlowKind> = f.records().iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![FlowKind::Limit, FlowKind::Cancel, FlowKind::Execution]);
    }

    #[test]
    fn decreasing_time_rejected() {
        let r = |t| FlowRecord { time: SimTime(t), kind: FlowKind::Limit, size: 1, side: Side::Ask, source: None };
        assert!(FlowSeries::new(vec![r(2), r(1)]).is_err());
    }
}
