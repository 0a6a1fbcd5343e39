//! LOBSTER message files.
//!
//! A message file is headerless CSV with six columns:
//! `time,event_type,order_id,size,price,direction`, where `time` is decimal
//! seconds after midnight, `price` is dollars × 10,000 and `direction` is `1`
//! (buy) or `-1` (sell).
//!
//! Canonical output formats `time` with exactly nine fractional digits, so a
//! parse/write round trip is byte-identical except where the input used fewer
//! digits (`36000.5` is written `36000.500000000`).

mod synthetic;

pub use synthetic::{generate_synthetic, write_synthetic, SyntheticFlow, SyntheticFlowConfig};

use crate::lob::{Price, Quantity, Side};
use crate::time::{SimTime, NANOS_PER_SECOND};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    NewLimit,
    PartialCancel,
    Delete,
    VisibleExecution,
    HiddenExecution,
    CrossTrade,
    Halt,
}

impl EventType {
    pub fn code(self) -> u8 {
        match self {
            EventType::NewLimit => 1,
            EventType::PartialCancel => 2,
            EventType::Delete => 3,
            EventType::VisibleExecution => 4,
            EventType::HiddenExecution => 5,
            EventType::CrossTrade => 6,
            EventType::Halt => 7,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => EventType::NewLimit,
            2 => EventType::PartialCancel,
            3 => EventType::Delete,
            4 => EventType::VisibleExecution,
            5 => EventType::HiddenExecution,
            6 => EventType::CrossTrade,
            7 => EventType::Halt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Buy,
    Sell,
}

impl Direction {
    pub fn code(self) -> i8 {
        match self {
            Direction::Buy => 1,
            Direction::Sell => -1,
        }
    }

    pub fn side(self) -> Side {
        match self {
            Direction::Buy => Side::Bid,
            Direction::Sell => Side::Ask,
        }
    }

    pub fn from_side(side: Side) -> Self {
        match side {
            Side::Bid => Direction::Buy,
            Side::Ask => Direction::Sell,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobsterEvent {
    pub time: SimTime,
    pub event_type: EventType,
    pub order_id: u64,
    pub size: Quantity,
    pub price: Price,
    pub direction: Direction,
}

impl LobsterEvent {
    /// Canonical LOBSTER line, without the trailing newline.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            format_time(self.time),
            self.event_type.code(),
            self.order_id,
            self.size,
            self.price,
            self.direction.code()
        )
    }
}

#[derive(Debug, Error)]
pub enum LobsterError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn format_time(t: SimTime) -> String {
    format!("{}.{:09}", t.0 / NANOS_PER_SECOND, t.0 % NANOS_PER_SECOND)
}

/// Parse decimal seconds into nanoseconds without going through floating point.
pub fn parse_time(field: &str) -> Result<SimTime, String> {
    let (whole, frac) = match field.split_once('.') {
        Some((w, f)) => (w, f),
        None => (field, ""),
    };
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("invalid time {field:?}"));
    }
    let secs: u64 = whole.parse().map_err(|_| format!("invalid time {field:?}"))?;
    let (digits, extra) = frac.split_at(frac.len().min(9));
    if extra.bytes().any(|b| b != b'0') {
        return Err(format!("time {field:?} has sub-nanosecond precision"));
    }
    let mut nanos: u64 = if digits.is_empty() { 0 } else { digits.parse().expect("ascii digits") };
    for _ in digits.len()..9 {
        nanos *= 10;
    }
    secs.checked_mul(NANOS_PER_SECOND)
        .and_then(|s| s.checked_add(nanos))
        .map(SimTime)
        .ok_or_else(|| format!("time {field:?} out of range"))
}

pub fn parse_line(text: &str, line: usize) -> Result<LobsterEvent, LobsterError> {
    let bad = |reason: String| LobsterError::Malformed { line, reason };
    let fields: Vec<&str> = text.trim().split(',').map(str::trim).collect();
    if fields.len() != 6 {
        return Err(bad(format!("expected 6 columns, found {}", fields.len())));
    }
    let time = parse_time(fields[0]).map_err(bad)?;
    let code: u8 = fields[1].parse().map_err(|_| bad(format!("invalid event type {:?}", fields[1])))?;
    let event_type = EventType::from_code(code).ok_or_else(|| bad(format!("unknown event type {code}")))?;
    let order_id: u64 = fields[2].parse().map_err(|_| bad(format!("invalid order id {:?}", fields[2])))?;
    let size: i64 = fields[3].parse().map_err(|_| bad(format!("invalid size {:?}", fields[3])))?;
    let price: Price = fields[4].parse().map_err(|_| bad(format!("invalid price {:?}", fields[4])))?;
    let direction = match fields[5] {
        "1" => Direction::Buy,
        "-1" => Direction::Sell,
        other => return Err(bad(format!("invalid direction {other:?}"))),
    };
    if code <= 5 && size <= 0 {
        return Err(bad(format!("event type {code} requires positive size, got {size}")));
    }
    if code <= 4 && price <= 0 {
        return Err(bad(format!("event type {code} requires positive price, got {price}")));
    }
    if size < 0 {
        return Err(bad(format!("negative size {size}")));
    }
    Ok(LobsterEvent { time, event_type, order_id, size: size as Quantity, price, direction })
}

/// Streaming reader over a LOBSTER message file. Blank lines are skipped;
/// out-of-order times are kept and counted.
pub struct MessageReader<R> {
    lines: io::Lines<R>,
    line: usize,
    last_time: Option<SimTime>,
    non_monotone: usize,
}

impl<R: BufRead> MessageReader<R> {
    pub fn new(input: R) -> Self {
        MessageReader { lines: input.lines(), line: 0, last_time: None, non_monotone: 0 }
    }

    /// Events seen so far whose time precedes the previous event's.
    pub fn non_monotone_count(&self) -> usize {
        self.non_monotone
    }
}

impl<R: BufRead> Iterator for MessageReader<R> {
    type Item = Result<LobsterEvent, LobsterError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let event = match parse_line(&text, self.line) {
                Ok(e) => e,
                Err(e) => return Some(Err(e)),
            };
            if let Some(prev) = self.last_time {
                if event.time < prev {
                    self.non_monotone += 1;
                    log::warn!("line {}: time {} precedes previous event at {}", self.line, event.time, prev);
                }
            }
            self.last_time = Some(event.time);
            return Some(Ok(event));
        }
    }
}

pub fn parse_message_file(path: impl AsRef<Path>) -> Result<MessageReader<BufReader<File>>, LobsterError> {
    Ok(MessageReader::new(BufReader::new(File::open(path)?)))
}

/// Read a whole message file, failing on the first malformed row.
pub fn read_message_file(path: impl AsRef<Path>) -> Result<Vec<LobsterEvent>, LobsterError> {
    parse_message_file(path)?.collect()
}

pub fn parse_str(text: &str) -> Result<Vec<LobsterEvent>, LobsterError> {
    MessageReader::new(text.as_bytes()).collect()
}

pub fn write_events<'a, W: Write>(mut out: W, events: impl IntoIterator<Item = &'a LobsterEvent>) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}", e.to_line())?;
    }
    Ok(())
}
