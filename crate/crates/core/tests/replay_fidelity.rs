use lobsim::agents::BboRecord;
use lobsim::kernel::KernelConfig;
use lobsim::lob::{Price, Quantity, Side};
use lobsim::lobster::{generate_synthetic, parse_str, EventType, LobsterEvent, SyntheticFlowConfig};
use lobsim::scenario::{run_scenario, Executor, RosterConfig};
use lobsim::SimTime;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Standalone book rebuilt directly from the message file: executions reduce
/// the named order instead of going through a matcher.
#[derive(Default)]
struct Rebuilt {
    orders: HashMap<u64, (Side, Price, Quantity)>,
    levels: [BTreeMap<Price, Quantity>; 2],
}

impl Rebuilt {
    fn level(&mut self, side: Side) -> &mut BTreeMap<Price, Quantity> {
        &mut self.levels[(side == Side::Ask) as usize]
    }

    fn take(&mut self, id: u64, size: Quantity) {
        let Some(&(side, price, qty)) = self.orders.get(&id) else { return };
        let cut = size.min(qty);
        let level = self.level(side);
        *level.get_mut(&price).unwrap() -= cut;
        if level[&price] == 0 {
            level.remove(&price);
        }
        if cut == qty {
            self.orders.remove(&id);
        } else {
            self.orders.get_mut(&id).unwrap().2 -= cut;
        }
    }

    /// Returns whether the event reaches the exchange.
    fn apply(&mut self, e: &LobsterEvent) -> bool {
        match e.event_type {
            EventType::NewLimit => {
                let side = e.direction.side();
                self.orders.insert(e.order_id, (side, e.price, e.size));
                *self.level(side).entry(e.price).or_default() += e.size;
            }
            EventType::PartialCancel | EventType::VisibleExecution => self.take(e.order_id, e.size),
            EventType::Delete => self.take(e.order_id, Quantity::MAX),
            _ => return false,
        }
        true
    }

    fn bbo(&self) -> (Option<Price>, Option<Price>) {
        (self.levels[0].keys().next_back().copied(), self.levels[1].keys().next().copied())
    }
}

fn replay_bbo(events: &[LobsterEvent], stop: SimTime) -> Vec<BboRecord> {
    let roster = RosterConfig { momentum_agents: 0, background_twap: None, record_bbo: true, ..Default::default() };
    let kernel = KernelConfig { start_time: SimTime(0), stop_time: stop, record_log: false, ..Default::default() };
    let out = run_scenario(&kernel, &roster, Arc::new(events.to_vec()), Executor::None).unwrap();
    assert_eq!(out.replay.rejected, 0);
    out.exchange.bbo_trace().to_vec()
}

fn assert_faithful(events: &[LobsterEvent], stop: SimTime) {
    let trace = replay_bbo(events, stop);
    let mut rebuilt = Rebuilt::default();
    let mut expected = Vec::new();
    for e in events {
        if rebuilt.apply(e) {
            expected.push((e.time, rebuilt.bbo()));
        }
    }
    let got: Vec<_> = trace.iter().map(|r| (r.time, (r.best_bid, r.best_ask))).collect();
    assert_eq!(got.len(), expected.len());
    for (i, (g, x)) in got.iter().zip(&expected).enumerate() {
        assert_eq!(g, x, "event boundary {i}");
    }
}

#[test]
fn synthetic_session_replays_faithfully() {
    for seed in [1, 2, 3] {
        let cfg = SyntheticFlowConfig {
            session_start: SimTime::from_hms(10, 0, 0),
            session_end: SimTime::from_hms(10, 30, 0),
            seed,
            ..Default::default()
        };
        let events: Vec<LobsterEvent> = generate_synthetic(cfg).unwrap().collect();
        assert!(events.iter().any(|e| e.event_type == EventType::VisibleExecution));
        assert!(events.iter().any(|e| e.event_type == EventType::PartialCancel));
        assert_faithful(&events, SimTime::from_hms(11, 0, 0));
    }
}

#[test]
fn hand_written_file_with_skipped_types() {
    let events = parse_str(
        "34200.0,1,1,100,1000000,1\n\
         34200.0,1,2,100,1000100,-1\n\
         34200.1,1,3,30,1000100,-1\n\
         34200.5,1,4,50,999900,1\n\
         34201.0,2,1,40,1000000,1\n\
         34201.2,5,99,10,1000000,1\n\
         34201.5,4,1,60,1000000,1\n\
         34201.7,7,0,0,-1,-1\n\
         34202.0,4,2,100,1000100,-1\n\
         34202.5,3,4,50,999900,1\n",
    )
    .unwrap();
    assert_faithful(&events, SimTime::from_hms(9, 31, 0));
    let trace = replay_bbo(&events, SimTime::from_hms(9, 31, 0));
    let last = trace.last().unwrap();
    assert_eq!((last.best_bid, last.best_ask), (None, Some(1_000_100)));
}
