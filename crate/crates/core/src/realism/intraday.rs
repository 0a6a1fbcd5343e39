use super::{FlowSeries, RealismError};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntradayProfile {
    pub bucket_secs: f64,
    pub session_start: SimTime,
    pub session_end: SimTime,
    /// Bucket midpoints in hours since the session start.
    pub midpoints: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `volume ~ a x^2 + b x + c` with `x` in hours since the session start.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_std_error: f64,
    pub vertex: Option<SimTime>,
    pub u_shape: bool,
}

// Relative size of the curvature term below which a fit counts as flat.
const FLAT_TOLERANCE: f64 = 1e-6;

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    // Adjugate: row i of the inverse times det is the cross product of two
    // columns of m.
    let col = |j: usize| [m[0][j], m[1][j], m[2][j]];
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let rows = [cross(col(1), col(2)), cross(col(2), col(0)), cross(col(0), col(1))];
    let det: f64 = (0..3).map(|k| rows[0][k] * m[k][0]).sum();
    if det.abs() < 1e-300 {
        return None;
    }
    Some(rows.map(|r| r.map(|v| v / det)))
}

/// Limit-order volume per `bucket` over the session and a least-squares
/// quadratic through (midpoint, volume). The profile is U-shaped when the
/// curvature is positive, exceeds twice its standard error, and the vertex
/// lies strictly inside the session. Only full buckets are used.
pub fn intraday_profile(
    flow: &FlowSeries,
    bucket: SimTime,
    session: Option<(SimTime, SimTime)>,
) -> Result<IntradayProfile, RealismError> {
    if bucket == SimTime::ZERO {
        return Err(RealismError::Invalid("zero bucket".into()));
    }
    let (start, end) = match session.or_else(|| flow.span()) {
        Some(s) => s,
        None => return Err(RealismError::TooFewBuckets(0)),
    };
    let n = if end > start { ((end - start).0 / bucket.0) as usize } else { 0 };
    if n < 3 {
        return Err(RealismError::TooFewBuckets(n));
    }
    let mut volumes = vec![0.0; n];
    for r in flow.limit_orders() {
        if r.time < start {
            continue;
        }
        let k = ((r.time - start).0 / bucket.0) as usize;
        if k < n {
            volumes[k] += r.size as f64;
        }
    }
    let hours = |ns: f64| ns / 3.6e12;
    let midpoints: Vec<f64> = (0..n).map(|k| hours((k as f64 + 0.5) * bucket.0 as f64)).collect();

    // Fit in centered coordinates for conditioning, then shift back.
    let m = midpoints.iter().sum::<f64>() / n as f64;
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for (x, y) in midpoints.iter().zip(&volumes) {
        let u = x - m;
        let row = [u * u, u, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * y;
        }
    }
    let inv = invert3(xtx).ok_or(RealismError::TooFewBuckets(n))?;
    let coef: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * xty[j]).sum()).collect();
    let (a, bc, cc) = (coef[0], coef[1], coef[2]);
    let rss: f64 = midpoints
        .iter()
        .zip(&volumes)
        .map(|(x, y)| {
            let u = x - m;
            (y - (a * u * u + bc * u + cc)).powi(2)
        })
        .sum();
    let sigma2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let a_std_error = (sigma2 * inv[0][0]).max(0.0).sqrt();
    let b = bc - 2.0 * a * m;
    let c = a * m * m - bc * m + cc;

    let span_h = hours((end - start).0 as f64);
    let mean_volume = volumes.iter().sum::<f64>() / n as f64;
    let curved = a > 2.0 * a_std_error && a * (span_h / 2.0).powi(2) > FLAT_TOLERANCE * mean_volume.abs().max(1e-12);
    let vertex_h = if a != 0.0 { Some(m - bc / (2.0 * a)) } else { None };
    let inside = vertex_h.filter(|v| *v > 0.0 && *v < span_h);
    let vertex = vertex_h
        .filter(|v| v.is_finite() && *v >= 0.0)
        .map(|v| start + SimTime((v * 3.6e12).round() as u64));
    Ok(IntradayProfile {
        bucket_secs: bucket.as_secs_f64(),
        session_start: start,
        session_end: end,
        midpoints,
        volumes,
        a,
        b,
        c,
        a_std_error,
        vertex,
        u_shape: curved && inside.is_some(),
    })
}
