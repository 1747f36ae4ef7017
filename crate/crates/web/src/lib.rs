//! WebAssembly bindings for the browser demo in `www/`.

use std::fmt::Display;

use evmelt::analytics::{cumulative_fraction, detect_burst, fraction_before};
use evmelt::framing::{coded_frame, to_image, CodeKind, CodeSpec, GrayMapping};
use evmelt::sim::{
    simulate_scene, AnomalySpec, BalloonPopSpec, FlickerSpec, MeltpoolSpec, Scene, SceneSpec,
    SensorModel,
};
use evmelt::{EventStream, SensorGeometry};
use wasm_bindgen::prelude::*;

const MELTPOOL_GEOMETRY: (u32, u32) = (160, 120);
const MELTPOOL_DURATION_US: u64 = 300_000;
const BALLOON_GEOMETRY: (u32, u32) = (120, 90);

fn geometry((w, h): (u32, u32)) -> SensorGeometry {
    SensorGeometry::new(w, h).expect("demo geometry is valid")
}

fn run(
    spec: &SceneSpec,
    g: SensorGeometry,
    duration_us: u64,
    fps: f64,
    seed: u64,
) -> Result<EventStream, String> {
    let scene = Scene::new(spec.clone(), g).map_err(|e| e.to_string())?;
    let model = SensorModel {
        rng_seed: seed,
        ..SensorModel::default()
    }
    .with_floor_for_peak(scene.peak_intensity());
    simulate_scene(spec, g, duration_us, fps, &model)
        .map(|(s, _)| s)
        .map_err(|e| e.to_string())
}

fn js_err(e: impl Display) -> JsError {
    JsError::new(&e.to_string())
}

/// A simulated melt pool, kept in memory so frames can be re-cut cheaply.
#[wasm_bindgen]
pub struct MeltpoolSession {
    stream: EventStream,
}

impl MeltpoolSession {
    pub fn simulate(seed: u64, with_anomaly: bool) -> Result<Self, String> {
        let spec = SceneSpec::Meltpool(MeltpoolSpec {
            pool_semi_axes_px: (30.0, 18.0),
            hotspot_sigma_px: 6.0,
            keyhole_size_px: 5.0,
            anomalies: if with_anomaly {
                vec![AnomalySpec {
                    orbit_radius_px: 22.0,
                    t_end_us: MELTPOOL_DURATION_US,
                    ..AnomalySpec::default()
                }]
            } else {
                Vec::new()
            },
            seed,
            ..MeltpoolSpec::default()
        });
        let stream = run(
            &spec,
            geometry(MELTPOOL_GEOMETRY),
            MELTPOOL_DURATION_US,
            2000.0,
            seed,
        )?;
        Ok(MeltpoolSession { stream })
    }

    pub fn gray_frame(
        &self,
        code: &str,
        t_start_us: u64,
        window_us: u64,
        center_freq_hz: f64,
    ) -> Result<Vec<u8>, String> {
        let kind = match code {
            "boxcar" => CodeKind::Boxcar,
            "flutter" => CodeKind::Flutter,
            "bandpass" => CodeKind::Bandpass,
            other => return Err(format!("unknown code `{other}`")),
        };
        let code = CodeSpec {
            kind,
            window_us,
            center_freq_hz,
            ..CodeSpec::default()
        }
        .build()
        .map_err(|e| e.to_string())?;
        let frame = coded_frame(&self.stream, &code, t_start_us);
        Ok(to_image(&frame, GrayMapping::SymmetricMax).into_raw())
    }
}

#[wasm_bindgen]
impl MeltpoolSession {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, with_anomaly: bool) -> Result<MeltpoolSession, JsError> {
        Self::simulate(u64::from(seed), with_anomaly).map_err(js_err)
    }

    pub fn width(&self) -> u32 {
        u32::from(self.stream.geometry.width())
    }

    pub fn height(&self) -> u32 {
        u32::from(self.stream.geometry.height())
    }

    pub fn duration_us(&self) -> u32 {
        MELTPOOL_DURATION_US as u32
    }

    pub fn event_count(&self) -> u32 {
        self.stream.len() as u32
    }

    /// RGBA pixels of one coded frame (`boxcar`, `flutter` or `bandpass`).
    pub fn frame(
        &self,
        code: &str,
        t_start_us: u32,
        window_us: u32,
        center_freq_hz: f64,
    ) -> Result<Vec<u8>, JsError> {
        let gray = self
            .gray_frame(
                code,
                u64::from(t_start_us),
                u64::from(window_us),
                center_freq_hz,
            )
            .map_err(js_err)?;
        Ok(gray.iter().flat_map(|&v| [v, v, v, 255]).collect())
    }
}

/// Frame energy of a flickering scene under bandpass codes tuned to each
/// probe frequency.
pub fn flicker_energies(
    flicker_hz: f64,
    window_us: u64,
    probes_hz: &[f64],
) -> Result<Vec<f64>, String> {
    let g = SensorGeometry::new(32, 24).expect("valid");
    let spec = SceneSpec::Flicker(FlickerSpec {
        level: 10.0,
        amplitude: 0.6,
        freq_hz: flicker_hz,
    });
    let stream = run(&spec, g, window_us + 20_000, 4000.0, 0)?;
    probes_hz
        .iter()
        .map(|&f| {
            let code = CodeSpec {
                kind: CodeKind::Bandpass,
                window_us,
                center_freq_hz: f,
                ..CodeSpec::default()
            }
            .build()
            .map_err(|e| e.to_string())?;
            Ok(coded_frame(&stream, &code, 10_000).energy())
        })
        .collect()
}

#[wasm_bindgen]
pub fn flicker_response(
    flicker_hz: f64,
    window_us: u32,
    probes_hz: Vec<f64>,
) -> Result<Vec<f64>, JsError> {
    flicker_energies(flicker_hz, u64::from(window_us), &probes_hz).map_err(js_err)
}

/// Cumulative event fraction of a popping balloon.
#[wasm_bindgen]
pub struct BalloonCurve {
    fraction: Vec<f64>,
    centers_s: Vec<f64>,
    burst_s: f64,
    pre_pop_fraction: f64,
    event_count: u32,
}

impl BalloonCurve {
    pub fn simulate(t_pop_ms: u32, bins: u32) -> Result<Self, String> {
        let t_pop_us = u64::from(t_pop_ms) * 1000;
        let spec = SceneSpec::BalloonPop(BalloonPopSpec {
            radius_px: 20.0,
            string_length_px: 20.0,
            t_pop_us,
            ..BalloonPopSpec::default()
        });
        let stream = run(&spec, geometry(BALLOON_GEOMETRY), 10_000_000, 250.0, 0)?;
        let curve = cumulative_fraction(&stream, bins as usize).map_err(|e| e.to_string())?;
        let burst_us = detect_burst(&curve, 0).map_err(|e| e.to_string())?;
        Ok(BalloonCurve {
            centers_s: curve.bin_centers_us().iter().map(|t| t * 1e-6).collect(),
            fraction: curve.fraction,
            burst_s: burst_us * 1e-6,
            pre_pop_fraction: fraction_before(&stream, t_pop_us),
            event_count: stream.len() as u32,
        })
    }
}

#[wasm_bindgen]
impl BalloonCurve {
    #[wasm_bindgen(constructor)]
    pub fn new(t_pop_ms: u32, bins: u32) -> Result<BalloonCurve, JsError> {
        Self::simulate(t_pop_ms, bins).map_err(js_err)
    }

    pub fn fraction(&self) -> Vec<f64> {
        self.fraction.clone()
    }

    pub fn centers_s(&self) -> Vec<f64> {
        self.centers_s.clone()
    }

    pub fn burst_s(&self) -> f64 {
        self.burst_s
    }

    pub fn pre_pop_fraction(&self) -> f64 {
        self.pre_pop_fraction
    }

    pub fn event_count(&self) -> u32 {
        self.event_count
    }
}
