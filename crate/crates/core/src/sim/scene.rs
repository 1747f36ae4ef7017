//! Parametric high-dynamic-range test scenes with known ground truth.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IntensityVideo, SensorModel, SimError, Simulator};
use crate::event::{EventStream, SensorGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSpec {
    Constant(ConstantSpec),
    Step(StepSpec),
    Ramp(RampSpec),
    Flicker(FlickerSpec),
    TranslatingEdge(EdgeSpec),
    BalloonPop(BalloonPopSpec),
    Meltpool(MeltpoolSpec),
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::Meltpool(MeltpoolSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantSpec {
    pub level: f64,
}

impl Default for ConstantSpec {
    fn default() -> Self {
        ConstantSpec { level: 1.0 }
    }
}

/// Uniform level multiplied by `ratio` from `t_step_us` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSpec {
    pub level: f64,
    pub ratio: f64,
    pub t_step_us: u64,
}

impl Default for StepSpec {
    fn default() -> Self {
        StepSpec {
            level: 1.0,
            ratio: 2.0,
            t_step_us: 1_000,
        }
    }
}

/// `level * exp(slope_per_s * t)`: a straight line in log intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampSpec {
    pub level: f64,
    pub slope_per_s: f64,
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec {
            level: 1.0,
            slope_per_s: 3.0,
        }
    }
}

/// `level * exp(amplitude * sin(2 pi freq_hz t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlickerSpec {
    pub level: f64,
    pub amplitude: f64,
    pub freq_hz: f64,
}

impl Default for FlickerSpec {
    fn default() -> Self {
        FlickerSpec {
            level: 1.0,
            amplitude: 0.6,
            freq_hz: 50.0,
        }
    }
}

/// Vertical logistic edge moving along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeSpec {
    pub level: f64,
    /// Log-intensity step across the edge.
    pub contrast: f64,
    pub start_x: f64,
    pub speed_px_per_s: f64,
    pub width_px: f64,
}

impl Default for EdgeSpec {
    fn default() -> Self {
        EdgeSpec {
            level: 1.0,
            contrast: 2.0,
            start_x: 10.0,
            speed_px_per_s: 2000.0,
            width_px: 1.0,
        }
    }
}

/// A checkered disc that is static until `t_pop_us`, then bursts outward
/// while fading with time constant `tau_us`. A thin swaying string below the
/// disc keeps a low event rate going for the whole scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalloonPopSpec {
    pub background: f64,
    pub radius_px: f64,
    pub cell_px: f64,
    /// Peak-to-peak log contrast of the checker texture.
    pub contrast: f64,
    pub t_pop_us: u64,
    pub tau_us: u64,
    pub burst_speed_px_per_s: f64,
    pub string_length_px: f64,
    /// Log-intensity offset of the string (negative = darker).
    pub string_contrast: f64,
    pub sway_amplitude_px: f64,
    pub sway_period_s: f64,
}

impl Default for BalloonPopSpec {
    fn default() -> Self {
        BalloonPopSpec {
            background: 100.0,
            radius_px: 30.0,
            cell_px: 6.0,
            contrast: 2.0,
            t_pop_us: 3_000_000,
            tau_us: 100_000,
            burst_speed_px_per_s: 400.0,
            string_length_px: 30.0,
            string_contrast: -1.0,
            sway_amplitude_px: 1.0,
            sway_period_s: 2.0,
        }
    }
}

/// Bright emissive blob riding a circular orbit around the pool center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySpec {
    /// Peak log-intensity excess of the blob.
    pub contrast: f64,
    pub sigma_px: f64,
    pub orbit_radius_px: f64,
    pub orbit_period_s: f64,
    pub phase_rad: f64,
    /// Frequency of the blob's own brightness fluctuation.
    pub sparkle_hz: f64,
    pub t_start_us: u64,
    pub t_end_us: u64,
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            contrast: 5.0,
            sigma_px: 2.0,
            orbit_radius_px: 22.0,
            orbit_period_s: 1.0,
            phase_rad: 0.0,
            sparkle_hz: 170.0,
            t_start_us: 0,
            t_end_us: u64::MAX,
        }
    }
}

impl AnomalySpec {
    pub fn active_at(&self, t_us: u64) -> bool {
        (self.t_start_us..self.t_end_us).contains(&t_us)
    }

    /// Blob center relative to the pool center.
    pub fn offset_at(&self, t_us: u64) -> (f64, f64) {
        let a = TAU * t_us as f64 * 1e-6 / self.orbit_period_s + self.phase_rad;
        (
            self.orbit_radius_px * a.cos(),
            self.orbit_radius_px * a.sin(),
        )
    }
}

/// Melt pool with a Gaussian hot spot spanning `peak_ratio` of dynamic range,
/// a dark keyhole whose aspect ratio oscillates sinusoidally, optional surface
/// shimmer across the pool and optional anomaly blobs.
///
/// Keyhole semi-axes are `size * sqrt(ar)` and `size / sqrt(ar)`, so its area
/// stays constant as the aspect ratio changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeltpoolSpec {
    pub background: f64,
    pub peak_ratio: f64,
    pub hotspot_sigma_px: f64,
    pub center_offset_px: (f64, f64),
    pub pool_semi_axes_px: (f64, f64),
    /// Log amplitude of the pool surface shimmer (0 disables it).
    pub pool_shimmer_amp: f64,
    pub pool_shimmer_hz: f64,
    /// Keyhole size in pixels; 0 disables the keyhole.
    pub keyhole_size_px: f64,
    pub ar_min: f64,
    pub ar_max: f64,
    pub ar_freq_hz: f64,
    pub keyhole_angle_rad: f64,
    pub keyhole_darkness: f64,
    pub keyhole_flicker_amp: f64,
    pub keyhole_flicker_hz: f64,
    pub anomalies: Vec<AnomalySpec>,
    /// Seed for the per-pixel fluctuation phases.
    pub seed: u64,
}

impl Default for MeltpoolSpec {
    fn default() -> Self {
        MeltpoolSpec {
            background: 1.0,
            peak_ratio: 1e6,
            hotspot_sigma_px: 30.0,
            center_offset_px: (0.0, 0.0),
            pool_semi_axes_px: (60.0, 40.0),
            pool_shimmer_amp: 0.0,
            pool_shimmer_hz: 150.0,
            keyhole_size_px: 12.0,
            ar_min: 1.0,
            ar_max: 2.5,
            ar_freq_hz: 5.0,
            keyhole_angle_rad: 0.3,
            keyhole_darkness: 1e-3,
            keyhole_flicker_amp: 0.8,
            keyhole_flicker_hz: 100.0,
            anomalies: Vec::new(),
            seed: 7,
        }
    }
}

impl MeltpoolSpec {
    pub fn aspect_ratio_at(&self, t_us: u64) -> f64 {
        let mid = 0.5 * (self.ar_max + self.ar_min);
        let amp = 0.5 * (self.ar_max - self.ar_min);
        mid + amp * (TAU * self.ar_freq_hz * t_us as f64 * 1e-6).sin()
    }
}

/// Ground truth sampled at the frame times of a rendered scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub frame_times_us: Vec<u64>,
    /// Keyhole aspect ratio per frame (meltpool scenes with a keyhole).
    pub aspect_ratio: Option<Vec<f64>>,
    /// Per anomaly, absolute pixel position per frame (`None` while inactive).
    pub anomaly_paths: Vec<Vec<Option<(f64, f64)>>>,
    pub t_pop_us: Option<u64>,
}

impl GroundTruth {
    /// `t_us,aspect_ratio`; `None` when the scene has no keyhole.
    pub fn aspect_ratio_csv(&self) -> Option<String> {
        let ar = self.aspect_ratio.as_ref()?;
        let mut out = String::from("t_us,aspect_ratio\n");
        for (t, a) in self.frame_times_us.iter().zip(ar) {
            let _ = writeln!(out, "{t},{a}");
        }
        Some(out)
    }

    /// `anomaly,t_us,x,y` for every frame where an anomaly is active.
    pub fn anomaly_csv(&self) -> String {
        let mut out = String::from("anomaly,t_us,x,y\n");
        for (k, path) in self.anomaly_paths.iter().enumerate() {
            for (t, pos) in self.frame_times_us.iter().zip(path) {
                if let Some((x, y)) = pos {
                    let _ = writeln!(out, "{k},{t},{x},{y}");
                }
            }
        }
        out
    }
}

/// A validated scene ready to render frames at arbitrary times.
pub struct Scene {
    spec: SceneSpec,
    geometry: SensorGeometry,
    center: (f64, f64),
    static_log: Vec<f64>,
    pool_mask: Vec<f64>,
    phases: [Vec<f64>; 3],
}

impl Scene {
    pub fn new(spec: SceneSpec, geometry: SensorGeometry) -> Result<Self, SimError> {
        validate_spec(&spec)?;
        let n = geometry.pixel_count();
        let w = usize::from(geometry.width());
        let mut center = (
            (f64::from(geometry.width()) - 1.0) / 2.0,
            (f64::from(geometry.height()) - 1.0) / 2.0,
        );
        let mut static_log = Vec::new();
        let mut pool_mask = Vec::new();
        let mut phases: [Vec<f64>; 3] = Default::default();

        if let SceneSpec::Meltpool(m) = &spec {
            center.0 += m.center_offset_px.0;
            center.1 += m.center_offset_px.1;
            let peak = m.background * m.peak_ratio;
            let two_s2 = 2.0 * m.hotspot_sigma_px * m.hotspot_sigma_px;
            static_log = Vec::with_capacity(n);
            pool_mask = Vec::with_capacity(n);
            for i in 0..n {
                let dx = (i % w) as f64 - center.0;
                let dy = (i / w) as f64 - center.1;
                let g = (-(dx * dx + dy * dy) / two_s2).exp();
                static_log.push((m.background + (peak - m.background) * g).ln());
                pool_mask.push(ellipse_mask(
                    dx,
                    dy,
                    m.pool_semi_axes_px.0,
                    m.pool_semi_axes_px.1,
                    0.0,
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
            for field in &mut phases {
                *field = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            }
        }

        Ok(Scene {
            spec,
            geometry,
            center,
            static_log,
            pool_mask,
            phases,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    /// Pixel position of the scene center (pool center for meltpool scenes).
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Largest linear intensity the scene can produce (upper bound).
    pub fn peak_intensity(&self) -> f64 {
        match &self.spec {
            SceneSpec::Constant(s) => s.level,
            SceneSpec::Step(s) => s.level * s.ratio.max(1.0),
            SceneSpec::Ramp(s) => s.level,
            SceneSpec::Flicker(s) => s.level * s.amplitude.abs().exp(),
            SceneSpec::TranslatingEdge(s) => s.level * s.contrast.max(0.0).exp(),
            SceneSpec::BalloonPop(s) => s.background * (0.5 * s.contrast).exp(),
            SceneSpec::Meltpool(m) => m.background * m.peak_ratio,
        }
    }

    pub fn keyhole_aspect_ratio(&self, t_us: u64) -> Option<f64> {
        match &self.spec {
            SceneSpec::Meltpool(m) if m.keyhole_size_px > 0.0 => Some(m.aspect_ratio_at(t_us)),
            _ => None,
        }
    }

    /// Absolute positions of each anomaly at `t_us` (`None` while inactive).
    pub fn anomaly_positions(&self, t_us: u64) -> Vec<Option<(f64, f64)>> {
        match &self.spec {
            SceneSpec::Meltpool(m) => m
                .anomalies
                .iter()
                .map(|a| {
                    a.active_at(t_us).then(|| {
                        let (ox, oy) = a.offset_at(t_us);
                        (self.center.0 + ox, self.center.1 + oy)
                    })
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn pop_time_us(&self) -> Option<u64> {
        match &self.spec {
            SceneSpec::BalloonPop(b) => Some(b.t_pop_us),
            _ => None,
        }
    }

    /// Renders linear intensity at `t_us` into `out` (row-major).
    pub fn render_into(&self, t_us: u64, out: &mut [f64]) {
        self.render_log_into(t_us, out);
        for v in out.iter_mut() {
            *v = v.exp();
        }
    }

    /// Renders natural-log intensity at `t_us` into `out` (row-major).
    pub fn render_log_into(&self, t_us: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.geometry.pixel_count());
        let t = t_us as f64 * 1e-6;
        let w = usize::from(self.geometry.width());
        match &self.spec {
            SceneSpec::Constant(s) => out.fill(s.level.ln()),
            SceneSpec::Step(s) => {
                let level = if t_us >= s.t_step_us {
                    s.level * s.ratio
                } else {
                    s.level
                };
                out.fill(level.ln());
            }
            SceneSpec::Ramp(s) => out.fill(s.level.ln() + s.slope_per_s * t),
            SceneSpec::Flicker(s) => {
                out.fill(s.level.ln() + s.amplitude * (TAU * s.freq_hz * t).sin())
            }
            SceneSpec::TranslatingEdge(s) => {
                let edge = s.start_x + s.speed_px_per_s * t;
                let base = s.level.ln();
                for (i, v) in out.iter_mut().enumerate() {
                    let x = (i % w) as f64;
                    *v = base + s.contrast * logistic((x - edge) / s.width_px);
                }
            }
            SceneSpec::BalloonPop(b) => self.render_balloon(b, t_us, out),
            SceneSpec::Meltpool(m) => self.render_meltpool(m, t, t_us, out),
        }
    }

    fn render_balloon(&self, b: &BalloonPopSpec, t_us: u64, out: &mut [f64]) {
        let w = usize::from(self.geometry.width());
        let t = t_us as f64 * 1e-6;
        let (scale, amp) = if t_us >= b.t_pop_us {
            let tau = b.tau_us as f64 * 1e-6;
            let decay = (-((t_us - b.t_pop_us) as f64 * 1e-6) / tau).exp();
            let grow = 1.0 + b.burst_speed_px_per_s * tau / b.radius_px * (1.0 - decay);
            (grow, decay)
        } else {
            (1.0, 1.0)
        };
        let radius = b.radius_px * scale;
        let sway = b.sway_amplitude_px * (TAU * t / b.sway_period_s).sin();
        let string_top = self.center.1 + b.radius_px;
        let base = b.background.ln();
        for (i, v) in out.iter_mut().enumerate() {
            let dx = (i % w) as f64 - self.center.0;
            let dy = (i / w) as f64 - self.center.1;
            let mut l = base;
            let r = (dx * dx + dy * dy).sqrt();
            if r < radius + 1.0 {
                let mask = (radius + 0.5 - r).clamp(0.0, 1.0);
                let (u, v) = (dx / scale, dy / scale);
                let tex =
                    0.5 * (3.0 * (PI * u / b.cell_px).sin() * (PI * v / b.cell_px).sin()).tanh();
                l += b.contrast * amp * tex * mask;
            }
            let y = dy + self.center.1;
            if y >= string_top && y <= string_top + b.string_length_px {
                let cover = (1.0 - (dx - sway).abs()).clamp(0.0, 1.0);
                l += b.string_contrast * cover;
            }
            *v = l;
        }
    }

    fn render_meltpool(&self, m: &MeltpoolSpec, t: f64, t_us: u64, out: &mut [f64]) {
        let w = usize::from(self.geometry.width());
        out.copy_from_slice(&self.static_log);

        let keyhole = (m.keyhole_size_px > 0.0).then(|| {
            let ar = m.aspect_ratio_at(t_us);
            (m.keyhole_size_px * ar.sqrt(), m.keyhole_size_px / ar.sqrt())
        });
        let dark = m.keyhole_darkness.ln();
        let kh_omega = TAU * m.keyhole_flicker_hz * t;
        let sh_omega = TAU * m.pool_shimmer_hz * t;

        for (i, v) in out.iter_mut().enumerate() {
            let dx = (i % w) as f64 - self.center.0;
            let dy = (i / w) as f64 - self.center.1;
            let k = keyhole.map_or(0.0, |(a, b)| {
                ellipse_mask(dx, dy, a, b, m.keyhole_angle_rad)
            });
            if k > 0.0 {
                *v += k * (dark + m.keyhole_flicker_amp * (kh_omega + self.phases[0][i]).sin());
            }
            let p = self.pool_mask[i] * (1.0 - k);
            if p > 0.0 && m.pool_shimmer_amp > 0.0 {
                *v += p * m.pool_shimmer_amp * (sh_omega + self.phases[1][i]).sin();
            }
        }

        for a in m.anomalies.iter().filter(|a| a.active_at(t_us)) {
            let (ox, oy) = a.offset_at(t_us);
            let (cx, cy) = (self.center.0 + ox, self.center.1 + oy);
            let reach = 4.0 * a.sigma_px;
            let x0 = (cx - reach).floor().max(0.0) as usize;
            let x1 = ((cx + reach).ceil().max(0.0) as usize).min(w - 1);
            let h = usize::from(self.geometry.height());
            let y0 = (cy - reach).floor().max(0.0) as usize;
            let y1 = ((cy + reach).ceil().max(0.0) as usize).min(h - 1);
            let two_s2 = 2.0 * a.sigma_px * a.sigma_px;
            let omega = TAU * a.sparkle_hz * t;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let g = (-(dx * dx + dy * dy) / two_s2).exp();
                    let i = y * w + x;
                    out[i] += a.contrast * g * (0.5 + 0.5 * (omega + self.phases[2][i]).sin());
                }
            }
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Coverage in [0, 1] of a pixel by an ellipse with a one-pixel soft edge.
fn ellipse_mask(dx: f64, dy: f64, a: f64, b: f64, angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    let rho = ((u / a).powi(2) + (v / b).powi(2)).sqrt();
    let r = (dx * dx + dy * dy).sqrt();
    if rho == 0.0 {
        return 1.0;
    }
    // distance to the boundary along the ray through the pixel
    let d = r * (1.0 - 1.0 / rho);
    (0.5 - d).clamp(0.0, 1.0)
}

fn validate_spec(spec: &SceneSpec) -> Result<(), SimError> {
    fn need(ok: bool, what: &str) -> Result<(), SimError> {
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidScene(what.to_owned()))
        }
    }
    let pos = |v: f64| v > 0.0 && v.is_finite();
    match spec {
        SceneSpec::Constant(s) => need(pos(s.level), "level must be positive"),
        SceneSpec::Step(s) => {
            need(pos(s.level), "level must be positive")?;
            need(pos(s.ratio), "ratio must be positive")
        }
        SceneSpec::Ramp(s) => {
            need(pos(s.level), "level must be positive")?;
            need(s.slope_per_s.is_finite(), "slope must be finite")
        }
        SceneSpec::Flicker(s) => {
            need(pos(s.level), "level must be positive")?;
            need(s.amplitude.is_finite(), "amplitude must be finite")?;
            need(pos(s.freq_hz), "freq_hz must be positive")
        }
        SceneSpec::TranslatingEdge(s) => {
            need(pos(s.level), "level must be positive")?;
            need(s.contrast.is_finite(), "contrast must be finite")?;
            need(
                s.start_x.is_finite() && s.speed_px_per_s.is_finite(),
                "edge motion must be finite",
            )?;
            need(pos(s.width_px), "width_px must be positive")
        }
        SceneSpec::BalloonPop(b) => {
            need(pos(b.background), "background must be positive")?;
            need(
                pos(b.radius_px) && pos(b.cell_px),
                "radius and cell must be positive",
            )?;
            need(
                b.contrast.is_finite() && b.string_contrast.is_finite(),
                "contrast must be finite",
            )?;
            need(b.tau_us > 0, "tau_us must be positive")?;
            need(
                b.burst_speed_px_per_s >= 0.0,
                "burst speed must be nonnegative",
            )?;
            need(
                b.string_length_px >= 0.0 && b.sway_amplitude_px >= 0.0,
                "string must be nonnegative",
            )?;
            need(pos(b.sway_period_s), "sway period must be positive")
        }
        SceneSpec::Meltpool(m) => {
            need(pos(m.background), "background must be positive")?;
            need(
                m.peak_ratio >= 1.0 && m.peak_ratio.is_finite(),
                "peak_ratio must be >= 1",
            )?;
            need(pos(m.hotspot_sigma_px), "hotspot sigma must be positive")?;
            need(
                pos(m.pool_semi_axes_px.0) && pos(m.pool_semi_axes_px.1),
                "pool axes must be positive",
            )?;
            need(
                m.pool_shimmer_amp >= 0.0 && m.pool_shimmer_hz >= 0.0,
                "shimmer must be nonnegative",
            )?;
            need(m.keyhole_size_px >= 0.0, "keyhole size must be nonnegative")?;
            need(
                m.ar_min >= 1.0 && m.ar_max >= m.ar_min,
                "need 1 <= ar_min <= ar_max",
            )?;
            need(m.ar_freq_hz >= 0.0, "ar_freq_hz must be nonnegative")?;
            need(pos(m.keyhole_darkness), "keyhole darkness must be positive")?;
            need(
                m.keyhole_flicker_amp >= 0.0 && m.keyhole_flicker_hz >= 0.0,
                "keyhole flicker must be nonnegative",
            )?;
            for a in &m.anomalies {
                need(
                    a.contrast.is_finite() && pos(a.sigma_px),
                    "anomaly contrast/sigma invalid",
                )?;
                need(
                    pos(a.orbit_period_s) && a.orbit_radius_px >= 0.0,
                    "anomaly orbit invalid",
                )?;
                need(
                    a.t_end_us > a.t_start_us,
                    "anomaly must have t_end_us > t_start_us",
                )?;
            }
            Ok(())
        }
    }
}

/// Frame period and count for a scene rendered at `fps` over `duration_us`.
pub(crate) fn frame_timing(duration_us: u64, fps: f64) -> Result<(u64, usize), SimError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(SimError::InvalidScene("fps must be positive".into()));
    }
    let period = (1e6 / fps).round() as u64;
    if period == 0 {
        return Err(SimError::InvalidScene("fps above 1 MHz".into()));
    }
    let frames = (duration_us / period) as usize + 1;
    if frames < 2 {
        return Err(SimError::InvalidScene(format!(
            "duration {duration_us} us at {fps} fps gives fewer than 2 frames"
        )));
    }
    Ok((period, frames))
}

fn ground_truth(scene: &Scene, times: Vec<u64>) -> GroundTruth {
    let aspect_ratio = scene.keyhole_aspect_ratio(0).map(|_| {
        times
            .iter()
            .map(|&t| scene.keyhole_aspect_ratio(t).unwrap())
            .collect()
    });
    let count = scene.anomaly_positions(0).len();
    let anomaly_paths = (0..count)
        .map(|k| {
            times
                .iter()
                .map(|&t| scene.anomaly_positions(t)[k])
                .collect()
        })
        .collect();
    GroundTruth {
        aspect_ratio,
        anomaly_paths,
        t_pop_us: scene.pop_time_us(),
        frame_times_us: times,
    }
}

/// Renders a whole scene as an intensity video with its ground truth.
pub fn render_scene(
    spec: &SceneSpec,
    geometry: SensorGeometry,
    duration_us: u64,
    fps: f64,
) -> Result<(IntensityVideo, GroundTruth), SimError> {
    let (period, count) = frame_timing(duration_us, fps)?;
    let scene = Scene::new(spec.clone(), geometry)?;
    let times: Vec<u64> = (0..count as u64).map(|k| k * period).collect();
    let frames = times
        .iter()
        .map(|&t| {
            let mut f = vec![0.0; geometry.pixel_count()];
            scene.render_into(t, &mut f);
            f
        })
        .collect();
    let video = IntensityVideo {
        geometry,
        frame_period_us: period,
        frames,
    };
    Ok((video, ground_truth(&scene, times)))
}

/// Renders and simulates frame by frame without holding the whole video.
/// Produces exactly `simulate(render_scene(..).0, model)`.
pub fn simulate_scene(
    spec: &SceneSpec,
    geometry: SensorGeometry,
    duration_us: u64,
    fps: f64,
    model: &SensorModel,
) -> Result<(EventStream, GroundTruth), SimError> {
    let (period, count) = frame_timing(duration_us, fps)?;
    let scene = Scene::new(spec.clone(), geometry)?;
    let mut sim = Simulator::new(geometry, period, model)?;
    let mut frame = vec![0.0; geometry.pixel_count()];
    let times: Vec<u64> = (0..count as u64).map(|k| k * period).collect();
    for &t in &times {
        scene.render_into(t, &mut frame);
        sim.push_frame(&frame)?;
    }
    Ok((sim.finish(), ground_truth(&scene, times)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate;

    fn tiny() -> SensorGeometry {
        SensorGeometry::new(16, 12).unwrap()
    }

    #[test]
    fn ground_truth_csv() {
        let truth = GroundTruth {
            frame_times_us: vec![0, 500],
            aspect_ratio: Some(vec![1.5, 2.0]),
            anomaly_paths: vec![vec![None, Some((3.5, 4.0))]],
            t_pop_us: None,
        };
        assert_eq!(
            truth.aspect_ratio_csv().unwrap(),
            "t_us,aspect_ratio\n0,1.5\n500,2\n"
        );
        assert_eq!(truth.anomaly_csv(), "anomaly,t_us,x,y\n0,500,3.5,4\n");
        let none = GroundTruth {
            aspect_ratio: None,
            ..truth
        };
        assert!(none.aspect_ratio_csv().is_none());
    }

    #[test]
    fn constant_scene_is_silent() {
        let (v, _) = render_scene(
            &SceneSpec::Constant(ConstantSpec { level: 42.0 }),
            tiny(),
            10_000,
            1000.0,
        )
        .unwrap();
        assert_eq!(v.frames.len(), 11);
        assert!(simulate(&v, &SensorModel::default()).unwrap().is_empty());
    }

    #[test]
    fn too_few_frames_rejected() {
        let spec = SceneSpec::Constant(ConstantSpec::default());
        assert!(render_scene(&spec, tiny(), 500, 1000.0).is_err());
        assert!(render_scene(&spec, tiny(), 1000, 1000.0).is_ok());
    }

    #[test]
    fn meltpool_metadata_echoes_formula() {
        let spec = MeltpoolSpec {
            ar_min: 1.0,
            ar_max: 2.5,
            ar_freq_hz: 5.0,
            ..MeltpoolSpec::default()
        };
        let (_, gt) = render_scene(
            &SceneSpec::Meltpool(spec),
            SensorGeometry::new(64, 48).unwrap(),
            20_000,
            1000.0,
        )
        .unwrap();
        let ar = gt.aspect_ratio.unwrap();
        for (t, a) in gt.frame_times_us.iter().zip(ar) {
            let expect = 1.75 + 0.75 * (TAU * 5.0 * *t as f64 * 1e-6).sin();
            assert_eq!(a, expect);
        }
    }

    #[test]
    fn meltpool_spans_six_decades() {
        let g = SensorGeometry::new(101, 81).unwrap();
        let scene = Scene::new(
            SceneSpec::Meltpool(MeltpoolSpec {
                keyhole_size_px: 0.0,
                hotspot_sigma_px: 8.0,
                ..MeltpoolSpec::default()
            }),
            g,
        )
        .unwrap();
        let mut f = vec![0.0; g.pixel_count()];
        scene.render_into(0, &mut f);
        let max = f.iter().cloned().fold(0.0, f64::max);
        let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max / 1e6 - 1.0).abs() < 1e-6, "{max}");
        assert!(min < 1.1);
        assert!(20.0 * (max / min).log10() > 110.0);
    }

    #[test]
    fn anomaly_inactive_outside_lifetime() {
        let spec = MeltpoolSpec {
            anomalies: vec![AnomalySpec {
                t_start_us: 100,
                t_end_us: 200,
                ..AnomalySpec::default()
            }],
            ..MeltpoolSpec::default()
        };
        let scene = Scene::new(SceneSpec::Meltpool(spec), SensorGeometry::DAVIS346).unwrap();
        assert_eq!(scene.anomaly_positions(50), vec![None]);
        assert!(scene.anomaly_positions(150)[0].is_some());
        assert_eq!(scene.anomaly_positions(200), vec![None]);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            SceneSpec::Constant(ConstantSpec { level: 0.0 }),
            SceneSpec::Meltpool(MeltpoolSpec {
                ar_min: 0.5,
                ..MeltpoolSpec::default()
            }),
            SceneSpec::Flicker(FlickerSpec {
                freq_hz: 0.0,
                ..FlickerSpec::default()
            }),
        ];
        for s in bad {
            assert!(Scene::new(s, tiny()).is_err());
        }
    }

    #[test]
    fn streaming_matches_materialized() {
        let spec = SceneSpec::TranslatingEdge(EdgeSpec::default());
        let model = SensorModel::default();
        let (v, _) = render_scene(&spec, tiny(), 5_000, 2000.0).unwrap();
        let a = simulate(&v, &model).unwrap();
        let (b, _) = simulate_scene(&spec, tiny(), 5_000, 2000.0, &model).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }
}
