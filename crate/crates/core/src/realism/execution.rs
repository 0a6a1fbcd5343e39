use super::RealismError;
use crate::lob::Quantity;
use crate::rl::EpisodeResult;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub arrival_price: Option<f64>,
    pub vwap_fill_price: Option<f64>,
    pub slippage: Option<f64>,
    pub filled_quantity: Quantity,
    pub fill_ratio: f64,
    pub total_reward: f64,
    pub action_trace_distance: f64,
}

impl RunMetrics {
    pub fn of(r: &EpisodeResult) -> Self {
        RunMetrics {
            arrival_price: r.arrival_price,
            vwap_fill_price: r.vwap_fill_price,
            slippage: r.slippage(),
            filled_quantity: r.filled_quantity,
            fill_ratio: r.fill_ratio(),
            total_reward: r.total_reward,
            action_trace_distance: action_trace_distance(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionComparison {
    pub ddql: RunMetrics,
    pub twap: RunMetrics,
    /// Mean `|a_i N_twap - N_twap| / N_twap` over the learning agent's periods.
    pub action_trace_distance: f64,
    /// `|slippage_ddql - slippage_twap|` when both are defined.
    pub slippage_gap: Option<f64>,
}

/// Mean of `|a_i * N_twap - N_twap| / N_twap`, i.e. `|a_i - 1|`, over the
/// periods of the run; zero for an empty trace.
pub fn action_trace_distance(r: &EpisodeResult) -> f64 {
    if r.actions.is_empty() {
        return 0.0;
    }
    r.actions.iter().map(|a| (a.multiplier - 1.0).abs()).sum::<f64>() / r.actions.len() as f64
}

pub fn execution_report(ddql: &EpisodeResult, twap: &EpisodeResult) -> Result<ExecutionComparison, RealismError> {
    if (ddql.session_start, ddql.session_end) != (twap.session_start, twap.session_end) {
        return Err(RealismError::MismatchedRuns(format!(
            "sessions {}..{} and {}..{}",
            ddql.session_start, ddql.session_end, twap.session_start, twap.session_end
        )));
    }
    if (ddql.side, ddql.parent_quantity) != (twap.side, twap.parent_quantity) {
        return Err(RealismError::MismatchedRuns("different parent orders".into()));
    }
    let (d, t) = (RunMetrics::of(ddql), RunMetrics::of(twap));
    Ok(ExecutionComparison {
        action_trace_distance: d.action_trace_distance,
        slippage_gap: d.slippage.zip(t.slippage).map(|(a, b)| (a - b).abs()),
        ddql: d,
        twap: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::Side;
    use crate::rl::ActionRecord;
    use crate::time::SimTime;

    fn run(multipliers: &[f64]) -> EpisodeResult {
        EpisodeResult {
            side: Side::Bid,
            parent_quantity: 600,
            twap_child_quantity: 10,
            session_start: SimTime::from_hms(10, 0, 0),
            session_end: SimTime::from_hms(10, 30, 0),
            periods: multipliers.len(),
            arrival_price: Some(1_000_000.0),
            filled_quantity: 600,
            vwap_fill_price: Some(1_000_050.0),
            total_reward: 1.0,
            actions: multipliers
                .iter()
                .enumerate()
                .map(|(i, m)| ActionRecord {
                    period: i,
                    time: SimTime::ZERO,
                    action: 0,
                    multiplier: *m,
                    scheduled: 0,
                    filled: 0,
                    reward: 0.0,
                })
                .collect(),
            residual_quantity: 0,
            final_epsilon: 0.0,
            train_steps: 0,
            target_syncs: 0,
            mean_loss: None,
            aborted: false,
        }
    }

    #[test]
    fn twap_against_itself() {
        let t = run(&[1.0; 60]);
        let c = execution_report(&t, &t).unwrap();
        assert_eq!(c.action_trace_distance, 0.0);
        assert_eq!(c.ddql.slippage, c.twap.slippage);
        assert_eq!(c.slippage_gap, Some(0.0));
    }

    #[test]
    fn alternating_half_and_one_and_a_half() {
        let d = run(&[0.5, 1.5, 0.5, 1.5]);
        assert!((action_trace_distance(&d) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mismatched_sessions_refused() {
        let a = run(&[1.0]);
        let mut b = run(&[1.0]);
        b.session_end = SimTime::from_hms(11, 0, 0);
        assert!(matches!(execution_report(&a, &b), Err(RealismError::MismatchedRuns(_))));
    }
}
