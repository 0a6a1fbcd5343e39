use serde::{Deserialize, Deserializer, Serialize};
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

pub const NANOS_PER_SECOND: u64 = 1_000_000_000;

/// Nanoseconds since midnight of the simulated trading day.
///
/// Serialized as integer nanoseconds. Deserialization also accepts a clock
/// time (`"10:00:00"`, `"09:30:00.25"`) or a duration with a unit suffix
/// (`"30s"`, `"150ms"`, `"15m"`, `"1h"`, `"500ns"`, `"20us"`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(nanos: u64) -> Self {
        SimTime(nanos)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * NANOS_PER_SECOND)
    }

    pub const fn from_hms(h: u64, m: u64, s: u64) -> Self {
        SimTime::from_secs(h * 3600 + m * 60 + s)
    }

    pub const fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SECOND as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl FromStr for SimTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid time {s:?}");
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [h, m, sec] = parts[..] else { return Err(bad()) };
            let (whole, frac) = sec.split_once('.').unwrap_or((sec, ""));
            if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let num = |x: &str| x.parse::<u64>().map_err(|_| bad());
            let (h, m, whole) = (num(h)?, num(m)?, num(whole)?);
            if m >= 60 || whole >= 60 {
                return Err(bad());
            }
            let nanos = if frac.is_empty() { 0 } else { num(frac)? * 10u64.pow(9 - frac.len() as u32) };
            return Ok(SimTime::from_hms(h, m, whole) + SimTime(nanos));
        }
        let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).ok_or_else(bad)?;
        let (value, unit) = s.split_at(split);
        let scale = match unit.trim() {
            "ns" => 1.0,
            "us" => 1e3,
            "ms" => 1e6,
            "s" => 1e9,
            "m" | "min" => 60e9,
            "h" => 3600e9,
            _ => return Err(bad()),
        };
        let v: f64 = value.parse().map_err(|_| bad())?;
        let nanos = (v * scale).round();
        if !(nanos.is_finite() && nanos >= 0.0 && nanos < u64::MAX as f64) {
            return Err(bad());
        }
        Ok(SimTime(nanos as u64))
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Nanos(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Nanos(n) => Ok(SimTime(n)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0 / NANOS_PER_SECOND;
        let frac = self.0 % NANOS_PER_SECOND;
        write!(
            f,
            "{:02}:{:02}:{:02}.{:09}",
            secs / 3600,
            (secs / 60) % 60,
            secs % 60,
            frac
        )
    }
}
