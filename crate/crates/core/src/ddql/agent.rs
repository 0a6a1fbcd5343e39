use super::learner::Learner;
use crate::agents::OrderIds;
use crate::kernel::{Agent, AgentContext, AgentError, Message, Payload};
use crate::lob::{AgentId, BookSnapshot, OrderKind, Quantity};
use crate::rl::{
    compute_reward, featurize, schedule_orders, ActionRecord, EpisodeResult, ExecutionLedger, Experience,
    PriceHistory, PrivateState, RewardParams, StateVector,
};
use std::any::Any;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Waiting,
    Boundary(usize),
    Closing,
    Finalizing,
    Done,
}

/// Kernel-resident execution agent. It owns the [`Learner`] for the length of
/// one episode; take it back with [`DdqlAgent::into_parts`].
pub struct DdqlAgent {
    exchange: AgentId,
    learner: Learner,
    ledger: ExecutionLedger,
    ids: Option<OrderIds>,
    phase: Phase,
    prices: PriceHistory,
    arrival: Option<f64>,
    last: Option<(StateVector, usize)>,
    terminal_state: Option<StateVector>,
    records: Vec<ActionRecord>,
    residual: Quantity,
    aborted: bool,
    train_steps_at_start: u64,
    syncs_at_start: u64,
}

impl DdqlAgent {
    pub fn new(exchange: AgentId, learner: Learner) -> Self {
        DdqlAgent {
            exchange,
            ledger: ExecutionLedger::new(learner.config().parent_quantity),
            ids: None,
            phase: Phase::Waiting,
            prices: PriceHistory::default(),
            arrival: None,
            last: None,
            terminal_state: None,
            records: Vec::new(),
            residual: 0,
            aborted: false,
            train_steps_at_start: learner.train_steps(),
            syncs_at_start: learner.target_syncs(),
            learner,
        }
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn ledger(&self) -> &ExecutionLedger {
        &self.ledger
    }

    pub fn result(&self) -> EpisodeResult {
        let c = self.learner.config();
        EpisodeResult {
            side: c.side,
            parent_quantity: c.parent_quantity,
            twap_child_quantity: c.twap_child_quantity(),
            session_start: c.session_start,
            session_end: c.session_end,
            periods: c.periods,
            arrival_price: self.arrival,
            filled_quantity: self.ledger.filled(),
            vwap_fill_price: self.ledger.vwap(),
            total_reward: self.records.iter().map(|r| r.reward).sum(),
            actions: self.records.clone(),
            residual_quantity: self.residual,
            final_epsilon: self.learner.epsilon(),
            train_steps: self.learner.train_steps() - self.train_steps_at_start,
            target_syncs: self.learner.target_syncs() - self.syncs_at_start,
            mean_loss: self.learner.mean_episode_loss(),
            aborted: self.aborted || self.phase != Phase::Done,
        }
    }

    pub fn into_parts(self) -> (EpisodeResult, Learner) {
        (self.result(), self.learner)
    }

    fn send(&mut self, ctx: &mut AgentContext<'_>, payload: Payload) -> bool {
        if self.aborted {
            return false;
        }
        if let Err(e) = ctx.send(self.exchange, payload) {
            log::warn!("execution agent cannot reach the exchange: {e}; aborting episode");
            self.aborted = true;
            self.phase = Phase::Done;
        }
        !self.aborted
    }

    fn cancel_children(&mut self, ctx: &mut AgentContext<'_>) -> bool {
        for order_id in self.ledger.open_orders() {
            if !self.send(ctx, Payload::CancelOrder { order_id }) {
                return false;
            }
        }
        true
    }

    fn period_reward(&mut self) -> f64 {
        let fills = self.ledger.take_period_fills();
        let c = self.learner.config();
        let reward = match self.arrival {
            Some(arrival) if arrival > 0.0 => compute_reward(
                &fills,
                &RewardParams { lambda: c.lambda, parent_quantity: c.parent_quantity, arrival_price: arrival },
            ),
            _ => 0.0,
        };
        if let Some(rec) = self.records.last_mut() {
            rec.filled += fills.iter().map(|f| f.1).sum::<Quantity>();
            rec.reward += reward;
        }
        reward
    }

    fn observe(&mut self, period: usize, snapshot: &BookSnapshot) -> StateVector {
        let c = self.learner.config();
        let private = PrivateState {
            elapsed_periods: period,
            total_periods: c.periods,
            filled: self.ledger.filled(),
            parent_quantity: c.parent_quantity,
        };
        let f = featurize(&private, snapshot, &self.prices);
        if self.arrival.is_none() {
            self.arrival = f.price;
        }
        self.prices.observe(f.price);
        f.state
    }

    fn on_boundary(&mut self, ctx: &mut AgentContext<'_>, i: usize, snapshot: &BookSnapshot) -> Result<(), AgentError> {
        let state = self.observe(i, snapshot);
        let reward = self.period_reward();
        if let Some((s, a)) = self.last {
            self.learner.store(Experience { state: s, action: a, reward, next_state: state, terminal: false });
        }
        self.learner.on_period(i).map_err(|e| AgentError::new(format!("training failed at period {i}: {e}")))?;
        let action = self.learner.act(&state).map_err(|e| AgentError::new(e.to_string()))?;

        let c = self.learner.config().clone();
        let orders = schedule_orders(
            &action,
            self.ledger.remaining(),
            c.twap_child_quantity(),
            snapshot,
            c.side,
            c.price_step_ticks,
        );
        let mut scheduled = 0;
        for o in &orders {
            let order_id = self.ids.as_mut().expect("ids assigned at start").next_id();
            let payload = match (o.kind, o.price) {
                (OrderKind::Limit, Some(price)) => Payload::LimitOrder { order_id, side: o.side, price, quantity: o.quantity },
                _ => Payload::MarketOrder { order_id, side: o.side, quantity: o.quantity },
            };
            if !self.send(ctx, payload) {
                return Ok(());
            }
            self.ledger.on_submit(order_id, o.quantity);
            scheduled += o.quantity;
        }
        self.records.push(ActionRecord {
            period: i,
            time: ctx.now(),
            action: action.index,
            multiplier: action.multiplier,
            scheduled,
            filled: 0,
            reward: 0.0,
        });
        self.last = Some((state, action.index));
        let next = c.period_start(i + 1).max(ctx.now());
        ctx.wakeup_at(next)?;
        self.phase = Phase::Waiting;
        Ok(())
    }

    fn on_close(&mut self, ctx: &mut AgentContext<'_>, snapshot: &BookSnapshot) -> Result<(), AgentError> {
        let periods = self.learner.config().periods;
        self.terminal_state = Some(self.observe(periods, snapshot));
        let residual = self.ledger.remaining();
        if residual > 0 {
            let order_id = self.ids.as_mut().expect("ids assigned at start").next_id();
            let side = self.learner.config().side;
            if !self.send(ctx, Payload::MarketOrder { order_id, side, quantity: residual }) {
                return Ok(());
            }
            self.ledger.on_submit(order_id, residual);
            self.residual = residual;
        }
        ctx.wakeup_at(ctx.now() + self.learner.config().finalize_delay)?;
        self.phase = Phase::Finalizing;
        Ok(())
    }

    fn finalize(&mut self) {
        let reward = self.period_reward();
        if let (Some((s, a)), Some(next)) = (self.last, self.terminal_state) {
            self.learner.store(Experience { state: s, action: a, reward, next_state: next, terminal: true });
        }
        self.learner.end_episode();
        self.phase = Phase::Done;
    }
}

impl Agent for DdqlAgent {
    fn name(&self) -> &str {
        "ddql"
    }

    fn on_start(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.ids = Some(OrderIds::for_agent(ctx.id()));
        ctx.wakeup_at(self.learner.config().session_start.max(ctx.now()))?;
        Ok(())
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::Wakeup => match self.phase {
                Phase::Waiting => {
                    let c = self.learner.config();
                    let i = self.records.len();
                    let closing = i >= c.periods;
                    if !self.cancel_children(ctx) {
                        return Ok(());
                    }
                    let depth = if closing { 1 } else { 3 };
                    if !self.send(ctx, Payload::MarketDataQuery { depth }) {
                        return Ok(());
                    }
                    self.phase = if closing { Phase::Closing } else { Phase::Boundary(i) };
                }
                Phase::Finalizing => self.finalize(),
                _ => {}
            },
            Payload::MarketDataReply { snapshot } => match self.phase {
                Phase::Boundary(i) => self.on_boundary(ctx, i, snapshot)?,
                Phase::Closing => self.on_close(ctx, snapshot)?,
                _ => {}
            },
            Payload::OrderExecuted { order_id, fill } => self.ledger.on_fill(*order_id, fill.price, fill.quantity),
            Payload::OrderCancelled { order_id, quantity } => self.ledger.on_cancelled(*order_id, *quantity),
            Payload::OrderRejected { order_id, .. } => self.ledger.on_rejected(*order_id),
            _ => {}
        }
        Ok(())
    }

    fn final_state(&self) -> serde_json::Value {
        serde_json::json!({
            "filled": self.ledger.filled(),
            "vwap": self.ledger.vwap(),
            "arrival_price": self.arrival,
            "periods_acted": self.records.len(),
            "residual": self.residual,
            "aborted": self.aborted,
        })
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}
