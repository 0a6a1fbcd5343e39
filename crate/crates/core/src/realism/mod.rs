//! Order-flow stylized facts (windowed volume, interarrival times, intraday
//! profile) and execution-quality comparison of two runs.

mod execution;
mod fit;
mod flow;
mod intraday;

pub use execution::{action_trace_distance, execution_report, ExecutionComparison, RunMetrics};
pub use fit::{
    fit_exponential, fit_gamma, fit_lognormal, fit_weibull, ks_distance, trigamma, FitError, FitReport, MAX_ITERATIONS,
    TOLERANCE,
};
pub use flow::{FlowKind, FlowRecord, FlowSeries};
pub use intraday::{intraday_profile, IntradayProfile};

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

/// Minimum number of non-empty windows for the windowed-volume fits.
pub const MIN_NONZERO_WINDOWS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealismError {
    #[error("flow contains no limit orders")]
    EmptyFlow,
    #[error("only {got} non-empty windows, {needed} required")]
    TooFewWindows { needed: usize, got: usize },
    #[error("need at least 2 limit orders, got {0}")]
    TooFewEvents(usize),
    #[error("all interarrival gaps are zero")]
    AllGapsZero,
    #[error("need at least 3 full buckets, got {0}")]
    TooFewBuckets(usize),
    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedVolume {
    pub window_secs: f64,
    /// Limit-order volume of every window, empty ones included.
    pub volumes: Vec<f64>,
    pub zero_windows: usize,
    /// Both fits use the non-empty windows only.
    pub gamma: FitReport,
    pub lognormal: FitReport,
}

/// Limit-order volume per non-overlapping window, aligned to multiples of
/// `window` since midnight, from the first to the last limit order.
pub fn windowed_volume(flow: &FlowSeries, window: SimTime) -> Result<WindowedVolume, RealismError> {
    if window == SimTime::ZERO {
        return Err(RealismError::Invalid("zero window".into()));
    }
    let limits: Vec<&FlowRecord> = flow.limit_orders().collect();
    let (Some(first), Some(last)) = (limits.first(), limits.last()) else {
        return Err(RealismError::EmptyFlow);
    };
    let w = window.0;
    let start = first.time.0 / w;
    let mut volumes = vec![0.0; (last.time.0 / w - start + 1) as usize];
    for r in &limits {
        volumes[(r.time.0 / w - start) as usize] += r.size as f64;
    }
    let nonzero: Vec<f64> = volumes.iter().copied().filter(|v| *v > 0.0).collect();
    if nonzero.len() < MIN_NONZERO_WINDOWS {
        return Err(RealismError::TooFewWindows { needed: MIN_NONZERO_WINDOWS, got: nonzero.len() });
    }
    let gamma = fit_gamma(&nonzero)?;
    let lognormal = fit_lognormal(&nonzero)?;
    Ok(WindowedVolume {
        window_secs: window.as_secs_f64(),
        zero_windows: volumes.len() - nonzero.len(),
        volumes,
        gamma,
        lognormal,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalFit {
    /// Gaps in seconds between consecutive limit orders, zeros included.
    pub gaps: Vec<f64>,
    /// Simultaneous arrivals; excluded from both fits.
    pub zero_gaps: usize,
    pub exponential: FitReport,
    pub weibull: Option<FitReport>,
    pub weibull_refusal: Option<String>,
}

pub fn interarrival_fit(flow: &FlowSeries) -> Result<InterarrivalFit, RealismError> {
    let times: Vec<SimTime> = flow.limit_orders().map(|r| r.time).collect();
    if times.len() < 2 {
        return Err(RealismError::TooFewEvents(times.len()));
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]).as_secs_f64()).collect();
    let positive: Vec<f64> = gaps.iter().copied().filter(|g| *g > 0.0).collect();
    if positive.is_empty() {
        return Err(RealismError::AllGapsZero);
    }
    let exponential = fit_exponential(&positive)?;
    let (weibull, weibull_refusal) = match fit_weibull(&positive) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(InterarrivalFit { zero_gaps: gaps.len() - positive.len(), gaps, exponential, weibull, weibull_refusal })
}

/// A metric value, or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Metric<T> {
    Ok { value: T },
    Refused { reason: String },
}

impl<T> Metric<T> {
    fn from_result(r: Result<T, RealismError>) -> Self {
        match r {
            Ok(value) => Metric::Ok { value },
            Err(e) => Metric::Refused { reason: e.to_string() },
        }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Metric::Ok { value } => Some(value),
            Metric::Refused { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealismConfig {
    pub window: SimTime,
    pub bucket: SimTime,
    /// Intraday session; the flow's own span when absent.
    pub session: Option<(SimTime, SimTime)>,
}

impl Default for RealismConfig {
    fn default() -> Self {
        RealismConfig { window: SimTime::from_secs(60), bucket: SimTime::from_secs(15 * 60), session: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealismReport {
    pub events: usize,
    pub limit_orders: usize,
    pub windowed_volume: Metric<WindowedVolume>,
    pub interarrival: Metric<InterarrivalFit>,
    pub intraday: Metric<IntradayProfile>,
}

pub fn realism_report(flow: &FlowSeries, config: &RealismConfig) -> RealismReport {
    let metrics = RealismReport {
        events: flow.len(),
        limit_orders: flow.limit_orders().count(),
        windowed_volume: Metric::from_result(windowed_volume(flow, config.window)),
        interarrival: Metric::from_result(interarrival_fit(flow)),
        intraday: Metric::from_result(intraday_profile(flow, config.bucket, config.session)),
    };
    for (name, refused) in [
        ("windowed volume", metrics.windowed_volume.value().is_none()),
        ("interarrival", metrics.interarrival.value().is_none()),
        ("intraday profile", metrics.intraday.value().is_none()),
    ] {
        if refused {
            log::warn!("{name} metric refused");
        }
    }
    metrics
}

impl RealismReport {
    /// Every fitted distribution parameter, keyed `metric.distribution.param`.
    pub fn fitted_parameters(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let mut add = |prefix: &str, r: &FitReport| {
            for (k, v) in &r.parameters {
                out.insert(format!("{prefix}.{}.{k}", r.distribution), *v);
            }
        };
        if let Some(w) = self.windowed_volume.value() {
            add("volume", &w.gamma);
            add("volume", &w.lognormal);
        }
        if let Some(i) = self.interarrival.value() {
            add("interarrival", &i.exponential);
            if let Some(wb) = &i.weibull {
                add("interarrival", wb);
            }
        }
        out
    }

    /// Raw samples as `metric,index,value` rows.
    pub fn write_samples_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "metric,index,value")?;
        if let Some(w) = self.windowed_volume.value() {
            for (i, v) in w.volumes.iter().enumerate() {
                writeln!(out, "window_volume,{i},{v}")?;
            }
        }
        if let Some(g) = self.interarrival.value() {
            for (i, v) in g.gaps.iter().enumerate() {
                writeln!(out, "interarrival_secs,{i},{v}")?;
            }
        }
        if let Some(p) = self.intraday.value() {
            for (i, v) in p.volumes.iter().enumerate() {
                writeln!(out, "bucket_volume,{i},{v}")?;
            }
        }
        Ok(())
    }
}

/// Relative change `|b - a| / |a|` of every parameter fitted in both reports.
pub fn parameter_changes(a: &RealismReport, b: &RealismReport) -> BTreeMap<String, f64> {
    let pb = b.fitted_parameters();
    a.fitted_parameters()
        .into_iter()
        .filter_map(|(k, va)| pb.get(&k).map(|vb| (k, (vb - va).abs() / va.abs())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::Side;

    fn limit(t_ms: u64, size: u64) -> FlowRecord {
        FlowRecord { time: SimTime(t_ms * 1_000_000), kind: FlowKind::Limit, size, side: Side::Bid, source: None }
    }

    #[test]
    fn empty_flow_is_refused() {
        let f = FlowSeries::new(vec![]).unwrap();
        assert_eq!(windowed_volume(&f, SimTime::from_secs(60)).unwrap_err(), RealismError::EmptyFlow);
        assert_eq!(interarrival_fit(&f).unwrap_err(), RealismError::TooFewEvents(0));
    }

    #[test]
    fn constant_windows_are_degenerate() {
        let f = FlowSeries::new((0..40).map(|i| limit(i * 60_000 + 5, 10)).collect()).unwrap();
        let err = windowed_volume(&f, SimTime::from_secs(60)).unwrap_err();
        assert_eq!(err, RealismError::Fit(FitError::Degenerate));
    }

    #[test]
    fn too_few_windows() {
        let f = FlowSeries::new((0..10).map(|i| limit(i * 60_000, 10 + i)).collect()).unwrap();
        assert!(matches!(windowed_volume(&f, SimTime::from_secs(60)), Err(RealismError::TooFewWindows { .. })));
    }

    #[test]
    fn zero_windows_are_counted() {
        let mut recs: Vec<FlowRecord> = (0..40).map(|i| limit(i * 120_000, 10 + i % 7)).collect();
        recs.sort_by_key(|r| r.time);
        let w = windowed_volume(&FlowSeries::new(recs).unwrap(), SimTime::from_secs(60)).unwrap();
        assert_eq!(w.zero_windows, 39);
        assert_eq!(w.gamma.samples, 40);
    }

    #[test]
    fn single_gap() {
        let f = FlowSeries::new(vec![limit(0, 1), limit(500, 1)]).unwrap();
        let fit = interarrival_fit(&f).unwrap();
        assert_eq!(fit.exponential.param("rate"), 2.0);
        assert!(fit.weibull.is_none() && fit.weibull_refusal.is_some());
    }

    #[test]
    fn simultaneous_orders_only() {
        let f = FlowSeries::new(vec![limit(7, 1), limit(7, 2), limit(7, 3)]).unwrap();
        assert_eq!(interarrival_fit(&f).unwrap_err(), RealismError::AllGapsZero);
    }

    #[test]
    fn report_records_refusals() {
        let f = FlowSeries::new(vec![limit(0, 1), limit(500, 1)]).unwrap();
        let r = realism_report(&f, &RealismConfig::default());
        assert!(matches!(r.windowed_volume, Metric::Refused { .. }));
        assert!(r.interarrival.value().is_some());
        assert_eq!(r.fitted_parameters().len(), 1);
    }
}
