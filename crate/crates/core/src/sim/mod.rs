//! Dynamic vision sensor simulation.
//!
//! Each pixel tracks the log intensity `L = ln(I + floor)` and fires an event
//! whenever `L` moves a per-pixel contrast threshold away from its reference
//! level. Between video frames `L` is interpolated linearly, and crossing
//! times are solved exactly on that segment before rounding to microseconds.

mod scene;
mod video;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{Event, EventStream, Polarity, SensorGeometry, StreamError};

pub use scene::{
    render_scene, simulate_scene, AnomalySpec, BalloonPopSpec, ConstantSpec, EdgeSpec, FlickerSpec,
    GroundTruth, MeltpoolSpec, RampSpec, Scene, SceneSpec, StepSpec,
};
pub use video::IntensityVideo;

/// Log-unit slack applied to threshold comparisons so that changes of exactly
/// `k * C` produce `k` events despite floating-point rounding.
pub const CROSSING_SLACK: f64 = 1e-9;

/// Smallest per-pixel threshold as a fraction of the nominal one.
const MIN_MISMATCH_FACTOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid sensor model: {0}")]
    InvalidModel(String),
    #[error("invalid video: {0}")]
    InvalidVideo(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// Pixel-level parameters of the simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Natural-log contrast threshold.
    pub contrast_threshold: f64,
    pub refractory_us: u64,
    /// Std-dev of the static per-pixel threshold variation, as a fraction of
    /// `contrast_threshold`.
    pub mismatch_sigma: f64,
    /// Linear intensity added before taking the log.
    pub intensity_floor: f64,
    /// Poisson background events per pixel per second.
    pub background_rate_hz: f64,
    pub rng_seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            contrast_threshold: 0.15,
            refractory_us: 0,
            mismatch_sigma: 0.0,
            intensity_floor: 1e-6,
            background_rate_hz: 0.0,
            rng_seed: 0,
        }
    }
}

impl SensorModel {
    /// Sets the intensity floor to 1e-6 of the given scene peak.
    pub fn with_floor_for_peak(mut self, peak: f64) -> Self {
        self.intensity_floor = peak * 1e-6;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidModel(m.to_owned()));
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return bad("contrast_threshold must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.mismatch_sigma) {
            return bad("mismatch_sigma must be in [0, 1)");
        }
        if !(self.intensity_floor > 0.0 && self.intensity_floor.is_finite()) {
            return bad("intensity_floor must be positive and finite");
        }
        if !(self.background_rate_hz >= 0.0 && self.background_rate_hz.is_finite()) {
            return bad("background_rate_hz must be nonnegative and finite");
        }
        Ok(())
    }

    /// Per-pixel thresholds in row-major order. No draws are made when
    /// `mismatch_sigma == 0`.
    pub fn pixel_thresholds(&self, geometry: SensorGeometry) -> Vec<f64> {
        let n = geometry.pixel_count();
        let c = self.contrast_threshold;
        if self.mismatch_sigma == 0.0 {
            return vec![c; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c * (1.0 + self.mismatch_sigma * z).max(MIN_MISMATCH_FACTOR)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct PixelState {
    threshold: f64,
    reference: f64,
    armed: bool,
    rearm_at: f64,
}

/// Incremental simulator fed one frame at a time.
///
/// Events are released in canonical `(t, y, x)` order as soon as no later
/// frame can produce an earlier one.
pub struct Simulator {
    geometry: SensorGeometry,
    frame_period_us: u64,
    refractory_us: f64,
    floor: f64,
    background_rate_hz: f64,
    noise_rng: ChaCha8Rng,
    pixels: Vec<PixelState>,
    prev_log: Vec<f64>,
    frames_seen: u64,
    pending: Vec<Event>,
    out: Vec<Event>,
}

impl Simulator {
    pub fn new(
        geometry: SensorGeometry,
        frame_period_us: u64,
        model: &SensorModel,
    ) -> Result<Self, SimError> {
        model.validate()?;
        if frame_period_us == 0 {
            return Err(SimError::InvalidVideo(
                "frame period must be positive".into(),
            ));
        }
        let pixels = model
            .pixel_thresholds(geometry)
            .into_iter()
            .map(|threshold| PixelState {
                threshold,
                reference: 0.0,
                armed: true,
                rearm_at: 0.0,
            })
            .collect();
        Ok(Simulator {
            geometry,
            frame_period_us,
            refractory_us: model.refractory_us as f64,
            floor: model.intensity_floor,
            background_rate_hz: model.background_rate_hz,
            noise_rng: ChaCha8Rng::seed_from_u64(model.rng_seed ^ 0x6e6f_6973_655f_7273),
            pixels,
            prev_log: vec![0.0; geometry.pixel_count()],
            frames_seen: 0,
            pending: Vec::new(),
            out: Vec::new(),
        })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Feeds the next linear-intensity frame (row-major).
    pub fn push_frame(&mut self, frame: &[f64]) -> Result<(), SimError> {
        self.check_frame(frame)?;
        let floor = self.floor;
        self.push_log_with(frame.iter().map(|&i| (i + floor).ln()))
    }

    /// Feeds the next frame given directly as `ln(I + floor)` values.
    pub fn push_log_frame(&mut self, log_frame: &[f64]) -> Result<(), SimError> {
        if log_frame.len() != self.geometry.pixel_count() {
            return Err(SimError::InvalidVideo(format!(
                "frame has {} samples, geometry needs {}",
                log_frame.len(),
                self.geometry.pixel_count()
            )));
        }
        if log_frame.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidVideo("non-finite log intensity".into()));
        }
        self.push_log_with(log_frame.iter().copied())
    }

    fn check_frame(&self, frame: &[f64]) -> Result<(), SimError> {
        if frame.len() != self.geometry.pixel_count() {
            return Err(SimError::InvalidVideo(format!(
                "frame has {} samples, geometry needs {}",
                frame.len(),
                self.geometry.pixel_count()
            )));
        }
        if let Some(v) = frame.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SimError::InvalidVideo(format!(
                "intensity {v} is negative or non-finite"
            )));
        }
        Ok(())
    }

    fn push_log_with(&mut self, logs: impl Iterator<Item = f64>) -> Result<(), SimError> {
        if self.frames_seen == 0 {
            for ((px, prev), l) in self.pixels.iter_mut().zip(&mut self.prev_log).zip(logs) {
                px.reference = l;
                *prev = l;
            }
            self.frames_seen = 1;
            return Ok(());
        }

        let ta_us = (self.frames_seen - 1) * self.frame_period_us;
        let tb_us = ta_us + self.frame_period_us;
        let (ta, tb) = (ta_us as f64, tb_us as f64);
        let width = usize::from(self.geometry.width());
        let refractory = self.refractory_us;
        let mut crossings = Vec::new();
        let mut batch = std::mem::take(&mut self.pending);

        for (idx, ((px, prev), lb)) in self
            .pixels
            .iter_mut()
            .zip(&mut self.prev_log)
            .zip(logs)
            .enumerate()
        {
            let la = *prev;
            *prev = lb;
            if la == lb && px.armed {
                continue;
            }
            crossings.clear();
            step_pixel(px, la, lb, ta, tb, refractory, &mut crossings);
            let (x, y) = ((idx % width) as u16, (idx / width) as u16);
            for &(t, p) in &crossings {
                let t = (t.round() as u64).clamp(ta_us, tb_us);
                batch.push(Event { t, x, y, p });
            }
        }

        if self.background_rate_hz > 0.0 {
            self.add_background(ta_us, tb_us, &mut batch);
        }

        // stable: keeps per-pixel emission order on equal timestamps
        batch.sort_by_key(|e| (e.t, e.y, e.x));
        let split = batch.partition_point(|e| e.t < tb_us);
        self.pending = batch.split_off(split);
        self.out.append(&mut batch);
        self.frames_seen += 1;
        Ok(())
    }

    fn add_background(&mut self, ta_us: u64, tb_us: u64, batch: &mut Vec<Event>) {
        let expected = self.background_rate_hz * (tb_us - ta_us) as f64 * 1e-6;
        let Ok(dist) = Poisson::new(expected) else {
            return;
        };
        let width = self.geometry.width();
        for idx in 0..self.geometry.pixel_count() {
            let n: f64 = dist.sample(&mut self.noise_rng);
            for _ in 0..n as u64 {
                let t = self.noise_rng.random_range(ta_us..tb_us);
                let p = if self.noise_rng.random_bool(0.5) {
                    Polarity::On
                } else {
                    Polarity::Off
                };
                let (x, y) = (
                    (idx % usize::from(width)) as u16,
                    (idx / usize::from(width)) as u16,
                );
                batch.push(Event { t, x, y, p });
            }
        }
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Takes events released so far.
    pub fn drain(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.out)
    }

    pub fn finish(mut self) -> EventStream {
        let mut events = std::mem::take(&mut self.out);
        events.append(&mut self.pending);
        EventStream::new(self.geometry, events)
    }
}

/// Advances one pixel across the segment `[ta, tb]` on which its log
/// intensity moves linearly from `la` to `lb`, collecting crossings.
fn step_pixel(
    px: &mut PixelState,
    la: f64,
    lb: f64,
    ta: f64,
    tb: f64,
    refractory: f64,
    out: &mut Vec<(f64, Polarity)>,
) {
    let slope = (lb - la) / (tb - ta);
    let at = |t: f64| la + slope * (t - ta);
    let mut cursor = ta;
    if !px.armed {
        if px.rearm_at > tb {
            return;
        }
        cursor = px.rearm_at.max(ta);
        px.reference = at(cursor);
        px.armed = true;
    }
    let c = px.threshold;
    loop {
        let (target, p) = if slope > 0.0 && lb >= px.reference + c - CROSSING_SLACK {
            (px.reference + c, Polarity::On)
        } else if slope < 0.0 && lb <= px.reference - c + CROSSING_SLACK {
            (px.reference - c, Polarity::Off)
        } else {
            break;
        };
        let tc = (ta + (target - la) / slope).clamp(cursor, tb);
        out.push((tc, p));
        px.reference = target;
        if refractory > 0.0 {
            px.rearm_at = tc + refractory;
            if px.rearm_at > tb {
                px.armed = false;
                break;
            }
            cursor = px.rearm_at;
            px.reference = at(cursor);
        } else {
            cursor = tc;
        }
    }
}

/// Runs the sensor model over a whole video.
pub fn simulate(video: &IntensityVideo, model: &SensorModel) -> Result<EventStream, SimError> {
    video.validate()?;
    let mut sim = Simulator::new(video.geometry, video.frame_period_us, model)?;
    for frame in &video.frames {
        sim.push_frame(frame)?;
    }
    Ok(sim.finish())
}
