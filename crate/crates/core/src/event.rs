//! Events and time-sorted event streams.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign of a log-intensity change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_sign(sign: f64) -> Self {
        if sign < 0.0 {
            Polarity::Off
        } else {
            Polarity::On
        }
    }

    pub fn from_i8(p: i8) -> Option<Self> {
        match p {
            -1 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }
}

/// A single `(x, y, t, p)` record. `t` is in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: i64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: i64, p: Polarity) -> Self {
        Self { t, x, y, p }
    }

    /// Repo-wide ordering key: time, then row, column, polarity.
    #[inline]
    pub fn sort_key(&self) -> (i64, u16, u16, Polarity) {
        (self.t, self.y, self.x, self.p)
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    OutOfOrder,
    OutOfBounds,
    OutsideWindow,
    InvertedWindow,
}

/// First invariant violation found in a stream. `index` is `None` when the
/// window itself is malformed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::OutOfOrder => "events out of (t, y, x, p) order",
            ViolationKind::OutOfBounds => "event coordinates outside the sensor",
            ViolationKind::OutsideWindow => "event time outside the stream window",
            ViolationKind::InvertedWindow => "t_start > t_end",
        };
        match self.index {
            Some(i) => write!(f, "{what} at index {i}"),
            None => f.write_str(what),
        }
    }
}

/// Events over a sensor and a time window `[t_start, t_end]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub width: u32,
    pub height: u32,
    pub t_start: i64,
    pub t_end: i64,
}

impl EventStream {
    pub fn empty(width: u32, height: u32, t_start: i64, t_end: i64) -> Self {
        Self {
            events: Vec::new(),
            width,
            height,
            t_start,
            t_end,
        }
    }

    /// Sorts `events` into repo order and wraps them.
    pub fn from_unsorted(
        mut events: Vec<Event>,
        width: u32,
        height: u32,
        t_start: i64,
        t_end: i64,
    ) -> Self {
        events.sort_unstable();
        Self {
            events,
            width,
            height,
            t_start,
            t_end,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_stream(self)
    }

    pub fn slice(&self, a: i64, b: i64) -> Result<EventStream> {
        slice_by_time(self, a, b)
    }
}

/// Checks every `EventStream` invariant, reporting the first violating index.
pub fn validate_stream(stream: &EventStream) -> Result<(), Violation> {
    if stream.t_start > stream.t_end {
        return Err(Violation {
            index: None,
            kind: ViolationKind::InvertedWindow,
        });
    }
    let mut prev: Option<&Event> = None;
    for (i, e) in stream.events.iter().enumerate() {
        let kind = if u32::from(e.x) >= stream.width || u32::from(e.y) >= stream.height {
            Some(ViolationKind::OutOfBounds)
        } else if e.t < stream.t_start || e.t > stream.t_end {
            Some(ViolationKind::OutsideWindow)
        } else if prev.is_some_and(|p| p > e) {
            Some(ViolationKind::OutOfOrder)
        } else {
            None
        };
        if let Some(kind) = kind {
            return Err(Violation {
                index: Some(i),
                kind,
            });
        }
        prev = Some(e);
    }
    Ok(())
}

/// Events with `a <= t < b`. When `b` is the stream's own right edge the
/// window is closed there, so a partition of the stream window loses nothing.
pub fn slice_by_time(stream: &EventStream, a: i64, b: i64) -> Result<EventStream> {
    if a > b {
        return Err(Error::InvalidWindow { start: a, end: b });
    }
    let lo = stream.events.partition_point(|e| e.t < a);
    let hi = if b == stream.t_end {
        stream.events.partition_point(|e| e.t <= b)
    } else {
        stream.events.partition_point(|e| e.t < b)
    };
    let events = if hi > lo {
        stream.events[lo..hi].to_vec()
    } else {
        Vec::new()
    };
    Ok(EventStream {
        events,
        width: stream.width,
        height: stream.height,
        t_start: a,
        t_end: b,
    })
}
