//! Adaptive-sampling diagnostics and storage accounting.
//!
//! Cumulative event fractions and windowed rates show how event generation
//! follows scene dynamics; the footprint functions compare an EVT1 event
//! file with uncompressed fixed-rate video of the same scene.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::evt1;
use crate::event::EventStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no events")]
    NoEvents,
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("window must be positive")]
    ZeroWindow,
    #[error("curve needs at least 3 bins, got {0}")]
    Degenerate(usize),
    #[error("no burst")]
    NoBurst,
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("invalid footprint model: {0}")]
    InvalidModel(&'static str),
}

/// Fraction of all events seen by the right edge of each uniform bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    /// `bin_count + 1` ascending edges.
    pub bin_edges_us: Vec<f64>,
    pub fraction: Vec<f64>,
}

impl CumulativeCurve {
    pub fn bin_centers_us(&self) -> Vec<f64> {
        self.bin_edges_us
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn bin_width_us(&self) -> f64 {
        match self.bin_edges_us.as_slice() {
            [first, .., last] => (last - first) / (self.bin_edges_us.len() - 1) as f64,
            _ => 0.0,
        }
    }

    /// Value at the first bin whose right edge is at or past `t_us`.
    pub fn fraction_at(&self, t_us: f64) -> f64 {
        let k = self.bin_edges_us[1..].partition_point(|&e| e < t_us);
        self.fraction[k.min(self.fraction.len() - 1)]
    }

    pub fn to_csv(&self) -> String {
        curve_csv(&self.bin_centers_us(), &self.fraction)
    }
}

/// Events per second in tiled windows.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub bin_centers_us: Vec<f64>,
    pub events_per_second: Vec<f64>,
}

impl RateCurve {
    pub fn to_csv(&self) -> String {
        curve_csv(&self.bin_centers_us, &self.events_per_second)
    }
}

fn curve_csv(x: &[f64], y: &[f64]) -> String {
    let mut out = String::from("bin_center_us,value\n");
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

pub fn cumulative_fraction(
    stream: &EventStream,
    bin_count: usize,
) -> Result<CumulativeCurve, AnalyticsError> {
    if bin_count == 0 {
        return Err(AnalyticsError::NoBins);
    }
    let (Some(first), Some(last)) = (stream.first_t(), stream.last_t()) else {
        return Err(AnalyticsError::NoEvents);
    };
    let span = (last - first) as f64;
    let mut edges: Vec<f64> = (0..=bin_count)
        .map(|k| first as f64 + span * k as f64 / bin_count as f64)
        .collect();
    edges[bin_count] = last as f64;
    let total = stream.len() as f64;
    let fraction = edges[1..]
        .iter()
        .map(|&edge| stream.events.partition_point(|e| e.t as f64 <= edge) as f64 / total)
        .collect();
    Ok(CumulativeCurve {
        bin_edges_us: edges,
        fraction,
    })
}

/// Fraction of events strictly before `t_us`; 0 for an empty stream.
pub fn fraction_before(stream: &EventStream, t_us: u64) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    stream.window_range(0, t_us).len() as f64 / stream.len() as f64
}

/// Rates over `[t_first + k w, t_first + (k+1) w)` covering the stream.
pub fn event_rate(stream: &EventStream, window_us: u64) -> Result<RateCurve, AnalyticsError> {
    if window_us == 0 {
        return Err(AnalyticsError::ZeroWindow);
    }
    let (Some(first), Some(last)) = (stream.first_t(), stream.last_t()) else {
        return Ok(RateCurve {
            bin_centers_us: Vec::new(),
            events_per_second: Vec::new(),
        });
    };
    let bins = (last - first) / window_us + 1;
    let mut counts = vec![0u64; bins as usize];
    for e in &stream.events {
        counts[((e.t - first) / window_us) as usize] += 1;
    }
    let seconds = window_us as f64 * 1e-6;
    Ok(RateCurve {
        bin_centers_us: (0..bins)
            .map(|k| first as f64 + (k as f64 + 0.5) * window_us as f64)
            .collect(),
        events_per_second: counts.into_iter().map(|c| c as f64 / seconds).collect(),
    })
}

/// Curve input for [`detect_burst`].
#[derive(Debug, Clone, Copy)]
pub enum BurstInput<'a> {
    Cumulative(&'a CumulativeCurve),
    Rate(&'a RateCurve),
}

impl<'a> From<&'a CumulativeCurve> for BurstInput<'a> {
    fn from(c: &'a CumulativeCurve) -> Self {
        BurstInput::Cumulative(c)
    }
}

impl<'a> From<&'a RateCurve> for BurstInput<'a> {
    fn from(c: &'a RateCurve) -> Self {
        BurstInput::Rate(c)
    }
}

/// Bin center of the steepest cumulative increase (or highest rate),
/// optionally after a centered moving average of `smooth` bins.
///
/// The increase attributed to bin `k` is `fraction[k] - fraction[k-1]`, with
/// `fraction[-1] = 0`. Ties go to the earliest bin; a curve whose increases
/// are all equal has no burst.
pub fn detect_burst<'a>(
    curve: impl Into<BurstInput<'a>>,
    smooth: usize,
) -> Result<f64, AnalyticsError> {
    let (centers, series): (Vec<f64>, Vec<f64>) = match curve.into() {
        BurstInput::Cumulative(c) => {
            let mut prev = 0.0;
            let inc = c
                .fraction
                .iter()
                .map(|&f| {
                    let d = f - prev;
                    prev = f;
                    d
                })
                .collect();
            (c.bin_centers_us(), inc)
        }
        BurstInput::Rate(r) => (r.bin_centers_us.clone(), r.events_per_second.clone()),
    };
    if series.len() < 3 {
        return Err(AnalyticsError::Degenerate(series.len()));
    }
    let series = if smooth > 1 {
        moving_average(&series, smooth)
    } else {
        series
    };
    let mut best = 0;
    for (k, v) in series.iter().enumerate() {
        if *v > series[best] {
            best = k;
        }
    }
    if series.iter().all(|v| *v == series[best]) {
        return Err(AnalyticsError::NoBurst);
    }
    Ok(centers[best])
}

fn moving_average(v: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Bytes of an EVT1 container holding the stream at `bytes_per_event`.
pub fn event_footprint(stream: &EventStream, bytes_per_event: u64) -> u64 {
    evt1::HEADER_LEN as u64 + bytes_per_event * stream.len() as u64
}

/// Storage parameters for the comparison between an event file and
/// uncompressed fixed-rate video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FootprintModel {
    pub bytes_per_event: u64,
    pub width: u64,
    pub height: u64,
    pub fps: u64,
    pub bytes_per_pixel: f64,
    pub duration_us: u64,
    /// Dynamic range of the event sensor, in dB.
    pub event_dynamic_range_db: f64,
}

impl Default for FootprintModel {
    fn default() -> Self {
        FootprintModel {
            bytes_per_event: evt1::RECORD_LEN as u64,
            width: 346,
            height: 260,
            fps: 1000,
            bytes_per_pixel: 3.0,
            duration_us: 1_000_000,
            event_dynamic_range_db: 120.0,
        }
    }
}

impl FootprintModel {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.bytes_per_event == 0 {
            return Err(AnalyticsError::InvalidModel(
                "bytes_per_event must be positive",
            ));
        }
        if self.width == 0 || self.height == 0 || self.fps == 0 {
            return Err(AnalyticsError::InvalidModel(
                "frame size and fps must be positive",
            ));
        }
        if !(self.bytes_per_pixel > 0.0 && self.bytes_per_pixel.is_finite()) {
            return Err(AnalyticsError::InvalidModel(
                "bytes_per_pixel must be positive",
            ));
        }
        if !(self.event_dynamic_range_db > 0.0 && self.event_dynamic_range_db.is_finite()) {
            return Err(AnalyticsError::InvalidModel(
                "dynamic range must be positive",
            ));
        }
        Ok(())
    }

    /// Frames recorded in `duration_us`, rounded up.
    pub fn frame_count(&self) -> u64 {
        (self.fps * self.duration_us).div_ceil(1_000_000)
    }
}

/// `width * height * bytes_per_pixel * ceil(fps * duration)`, no container.
pub fn conventional_footprint(model: &FootprintModel) -> f64 {
    (model.width * model.height * model.frame_count()) as f64 * model.bytes_per_pixel
}

pub fn db_to_bits(db: f64) -> Result<f64, AnalyticsError> {
    if db.is_nan() || db <= 0.0 {
        return Err(AnalyticsError::NonPositive(db));
    }
    Ok(db / (20.0 * std::f64::consts::LOG10_2))
}

pub fn bits_to_db(bits: f64) -> Result<f64, AnalyticsError> {
    if bits.is_nan() || bits <= 0.0 {
        return Err(AnalyticsError::NonPositive(bits));
    }
    Ok(bits * 20.0 * std::f64::consts::LOG10_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport {
    pub event_bytes: u64,
    pub conventional_bytes: f64,
    pub frame_count: u64,
    pub event_count: u64,
    /// conventional / event bytes.
    pub raw_ratio: f64,
    /// Bits per pixel needed to cover the event sensor's dynamic range.
    pub equivalent_bits: f64,
    /// `equivalent_bits` rounded up to whole bits, as packed bytes.
    pub hdr_bytes_packed: f64,
    /// `equivalent_bits` rounded up to whole bytes.
    pub hdr_bytes_aligned: f64,
    /// Ratio if conventional pixels had to be widened to the packed size.
    pub dr_adjusted_ratio: f64,
    /// Ratio if conventional pixels had to be widened to whole bytes.
    pub dr_adjusted_ratio_aligned: f64,
}

/// Compares the event file against conventional video.
///
/// The dynamic-range adjustment asks how much more a conventional imager
/// would store if each pixel had to hold `ceil(db_to_bits(dr))` bits:
/// `dr_adjusted_ratio = raw_ratio * max(1, hdr_bytes / bytes_per_pixel)`.
/// Pixels already at least that wide get no adjustment. With 8-bit pixels
/// and 120 dB this gives 2.5x (packed 20-bit) or 3x (3-byte aligned).
pub fn savings_report(
    stream: &EventStream,
    model: &FootprintModel,
) -> Result<SavingsReport, AnalyticsError> {
    model.validate()?;
    let event_bytes = event_footprint(stream, model.bytes_per_event);
    let conventional_bytes = conventional_footprint(model);
    let raw_ratio = conventional_bytes / event_bytes as f64;
    let equivalent_bits = db_to_bits(model.event_dynamic_range_db)?;
    let whole_bits = equivalent_bits.ceil();
    let hdr_bytes_packed = whole_bits / 8.0;
    let hdr_bytes_aligned = (whole_bits / 8.0).ceil();
    let widen = |hdr: f64| (hdr / model.bytes_per_pixel).max(1.0);
    Ok(SavingsReport {
        event_bytes,
        conventional_bytes,
        frame_count: model.frame_count(),
        event_count: stream.len() as u64,
        raw_ratio,
        equivalent_bits,
        hdr_bytes_packed,
        hdr_bytes_aligned,
        dr_adjusted_ratio: raw_ratio * widen(hdr_bytes_packed),
        dr_adjusted_ratio_aligned: raw_ratio * widen(hdr_bytes_aligned),
    })
}

impl SavingsReport {
    /// Human-readable summary followed by a `key=value` block.
    pub fn render(&self, model: &FootprintModel) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# storage comparison");
        let _ = writeln!(
            s,
            "event stream: {} events x {} B + {} B header = {} B",
            self.event_count,
            model.bytes_per_event,
            evt1::HEADER_LEN,
            self.event_bytes
        );
        let _ = writeln!(
            s,
            "conventional: {}x{} px x {} B/px x {} frames ({} fps) = {} B",
            model.width,
            model.height,
            model.bytes_per_pixel,
            self.frame_count,
            model.fps,
            self.conventional_bytes
        );
        let _ = writeln!(s, "raw ratio (conventional / event): {:.6}", self.raw_ratio);
        let _ = writeln!(
            s,
            "{} dB dynamic range = {:.4} bits -> {} bits per pixel ({} B packed, {} B byte-aligned)",
            model.event_dynamic_range_db,
            self.equivalent_bits,
            self.equivalent_bits.ceil(),
            self.hdr_bytes_packed,
            self.hdr_bytes_aligned
        );
        let _ = writeln!(
            s,
            "dynamic-range adjusted ratio = raw x max(1, hdr_bytes / {} B/px): {:.6} packed, {:.6} aligned",
            model.bytes_per_pixel, self.dr_adjusted_ratio, self.dr_adjusted_ratio_aligned
        );
        let _ = writeln!(
            s,
            "note: the adjustment widens conventional pixels to cover the event sensor's range; \
             the figure is a bit count (about 20 bits), not bytes"
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "[savings]");
        let kv: [(&str, String); 10] = [
            ("event_count", self.event_count.to_string()),
            ("event_bytes", self.event_bytes.to_string()),
            ("conventional_frames", self.frame_count.to_string()),
            ("conventional_bytes", self.conventional_bytes.to_string()),
            ("raw_ratio", format!("{:.9}", self.raw_ratio)),
            ("equivalent_bits", format!("{:.9}", self.equivalent_bits)),
            ("hdr_bytes_packed", self.hdr_bytes_packed.to_string()),
            ("hdr_bytes_aligned", self.hdr_bytes_aligned.to_string()),
            (
                "dr_adjusted_ratio",
                format!("{:.9}", self.dr_adjusted_ratio),
            ),
            (
                "dr_adjusted_ratio_aligned",
                format!("{:.9}", self.dr_adjusted_ratio_aligned),
            ),
        ];
        for (k, v) in kv {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
