//! Event, stream and sensor-geometry types shared by the rest of the crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted sensor side length in pixels (14-bit coordinate space).
pub const MAX_SIDE: u16 = 16384;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("invalid geometry {width}x{height}: sides must be in 1..={MAX_SIDE}")]
    InvalidGeometry { width: u32, height: u32 },
    #[error("inverted slice window: t0 = {t0} > t1 = {t1}")]
    InvertedWindow { t0: u64, t1: u64 },
    #[error("geometry mismatch: {0} vs {1}")]
    GeometryMismatch(SensorGeometry, SensorGeometry),
    #[error("invalid stream: {0}")]
    Invalid(Violation),
}

/// Pixel array dimensions of an event sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct SensorGeometry {
    width: u16,
    height: u16,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    width: u32,
    height: u32,
}

impl TryFrom<RawGeometry> for SensorGeometry {
    type Error = StreamError;

    fn try_from(raw: RawGeometry) -> Result<Self, Self::Error> {
        SensorGeometry::new(raw.width, raw.height)
    }
}

impl From<SensorGeometry> for RawGeometry {
    fn from(g: SensorGeometry) -> Self {
        RawGeometry {
            width: g.width.into(),
            height: g.height.into(),
        }
    }
}

impl SensorGeometry {
    /// iniVation DVS240 resolution.
    pub const DVS240: SensorGeometry = SensorGeometry {
        width: 240,
        height: 180,
    };
    /// iniVation DAVIS346 resolution.
    pub const DAVIS346: SensorGeometry = SensorGeometry {
        width: 346,
        height: 260,
    };

    pub fn new(width: u32, height: u32) -> Result<Self, StreamError> {
        let ok = |v: u32| (1..=u32::from(MAX_SIDE)).contains(&v);
        if ok(width) && ok(height) {
            Ok(SensorGeometry {
                width: width as u16,
                height: height as u16,
            })
        } else {
            Err(StreamError::InvalidGeometry { width, height })
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        usize::from(self.width) * usize::from(self.height)
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    /// Row-major index of pixel `(x, y)`.
    #[inline]
    pub fn index(&self, x: u16, y: u16) -> usize {
        usize::from(y) * usize::from(self.width) + usize::from(x)
    }
}

impl fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Sign of a detected log-intensity change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// Brighter (+1).
    On,
    /// Darker (-1).
    Off,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Polarity> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// One asynchronous brightness-change detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Microseconds since the stream epoch.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p }
    }
}

/// First invariant violation found by [`EventStream::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Unsorted { index: usize },
    XOutOfBounds { index: usize },
    YOutOfBounds { index: usize },
}

impl Violation {
    pub fn index(&self) -> usize {
        match *self {
            Violation::Unsorted { index }
            | Violation::XOutOfBounds { index }
            | Violation::YOutOfBounds { index } => index,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unsorted { index } => write!(f, "unsorted at index {index}"),
            Violation::XOutOfBounds { index } => write!(f, "x out of bounds at index {index}"),
            Violation::YOutOfBounds { index } => write!(f, "y out of bounds at index {index}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violation: Option<Violation>,
}

/// Time-ordered events bound to a sensor geometry.
///
/// Construction through [`EventStream::new`] does not check invariants so that
/// externally produced data can be inspected with [`EventStream::validate`];
/// use [`EventStream::try_new`] for a checked constructor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub geometry: SensorGeometry,
    pub events: Vec<Event>,
    pub epoch_label: Option<String>,
}

impl EventStream {
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        EventStream {
            geometry,
            events,
            epoch_label: None,
        }
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self::new(geometry, Vec::new())
    }

    pub fn try_new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self, StreamError> {
        let s = Self::new(geometry, events);
        match s.validate().violation {
            None => Ok(s),
            Some(v) => Err(StreamError::Invalid(v)),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.epoch_label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_t(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_t(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    /// Reports the first violated invariant, scanning in index order.
    pub fn validate(&self) -> ValidationReport {
        let mut prev_t = 0u64;
        for (index, e) in self.events.iter().enumerate() {
            if index > 0 && e.t < prev_t {
                return ValidationReport::fail(Violation::Unsorted { index });
            }
            if e.x >= self.geometry.width {
                return ValidationReport::fail(Violation::XOutOfBounds { index });
            }
            if e.y >= self.geometry.height {
                return ValidationReport::fail(Violation::YOutOfBounds { index });
            }
            prev_t = e.t;
        }
        ValidationReport {
            ok: true,
            violation: None,
        }
    }

    /// Index range of events with `t0 <= t < t1`. Requires a sorted stream.
    pub fn window_range(&self, t0: u64, t1: u64) -> std::ops::Range<usize> {
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = lo + self.events[lo..].partition_point(|e| e.t < t1);
        lo..hi
    }

    /// Events in the half-open window `[t0, t1)`.
    pub fn window(&self, t0: u64, t1: u64) -> &[Event] {
        &self.events[self.window_range(t0, t1)]
    }

    pub fn slice(&self, t0: u64, t1: u64) -> Result<EventStream, StreamError> {
        if t0 > t1 {
            return Err(StreamError::InvertedWindow { t0, t1 });
        }
        Ok(EventStream {
            geometry: self.geometry,
            events: self.window(t0, t1).to_vec(),
            epoch_label: self.epoch_label.clone(),
        })
    }

    /// Time-ordered merge; on equal timestamps events of `self` come first.
    pub fn merge(&self, other: &EventStream) -> Result<EventStream, StreamError> {
        if self.geometry != other.geometry {
            return Err(StreamError::GeometryMismatch(self.geometry, other.geometry));
        }
        let (a, b) = (&self.events, &other.events);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if b[j].t < a[i].t {
                out.push(b[j]);
                j += 1;
            } else {
                out.push(a[i]);
                i += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Ok(EventStream {
            geometry: self.geometry,
            events: out,
            epoch_label: self
                .epoch_label
                .clone()
                .or_else(|| other.epoch_label.clone()),
        })
    }
}

impl ValidationReport {
    fn fail(v: Violation) -> Self {
        ValidationReport {
            ok: false,
            violation: Some(v),
        }
    }
}
