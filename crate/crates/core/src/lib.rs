//! Event-based (neuromorphic) imaging toolkit for melt-pool monitoring.
//!
//! * [`event`]: events, streams and sensor geometry
//! * [`codec`]: EVT1 binary and CSV serialization
//! * [`sim`]: log-intensity DVS simulator and synthetic HDR scenes
//! * [`framing`]: windowed accumulation and digital coded exposure
//! * [`analytics`]: cumulative fractions, rates, bursts, storage accounting
//! * [`meltpool`]: pool segmentation, aspect-ratio series, anomaly tracks

pub mod analytics;
pub mod codec;
pub mod event;
pub mod framing;
pub mod meltpool;
pub mod sim;

pub use event::{Event, EventStream, Polarity, SensorGeometry};
