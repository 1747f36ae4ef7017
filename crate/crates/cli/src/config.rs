//! Pipeline configuration: one TOML document with a table per stage.
//!
//! ```toml
//! [run]
//! seed = 7
//! out_dir = "out"
//!
//! [scene]
//! kind = "balloon_pop"
//! t_pop_us = 3000000
//! ```
//!
//! Every key can be overridden with `--set section.key=value`, where the value
//! is read as a TOML literal and falls back to a plain string. A `[scene]`
//! table without `kind` is a melt-pool scene.

use std::path::{Path, PathBuf};

use evmelt::analytics::FootprintModel;
use evmelt::framing::{CodeSpec, GrayMapping};
use evmelt::meltpool::{AnomalyParams, PoolParams};
use evmelt::sim::{SceneSpec, SensorModel};
use evmelt::SensorGeometry;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{invalid, CliError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub run: RunConfig,
    pub scene: SceneSpec,
    pub sensor: SensorModel,
    pub codec: CodecConfig,
    pub framing: FramingConfig,
    pub analytics: AnalyticsConfig,
    pub meltpool: MeltpoolConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Replaces the sensor, scene and flutter-code seeds.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub width: u32,
    pub height: u32,
    pub duration_us: u64,
    /// Rate at which the scene is sampled for simulation.
    pub fps: f64,
    /// Replace `sensor.intensity_floor` with 1e-6 of the scene peak.
    pub floor_from_peak: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            width: 346,
            height: 260,
            duration_us: 1_000_000,
            fps: 2000.0,
            floor_from_peak: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    /// Events to read instead of simulating (`.evt1`, or `.csv` using the
    /// run geometry).
    pub input: Option<PathBuf>,
    pub events_file: String,
    pub write_csv: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            input: None,
            events_file: "events.evt1".into(),
            write_csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramingConfig {
    pub code: CodeSpec,
    pub stride_us: u64,
    /// Boxcar windows for `frames`; one subdirectory each when more than one.
    /// Empty means `code.window_us`.
    pub windows_us: Vec<u64>,
    pub mapping: GrayMapping,
    /// Write at most this many images per sequence (0 = all).
    pub max_images: usize,
}

impl Default for FramingConfig {
    fn default() -> Self {
        FramingConfig {
            code: CodeSpec::default(),
            stride_us: 10_000,
            windows_us: Vec::new(),
            mapping: GrayMapping::SymmetricMax,
            max_images: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub bins: usize,
    pub rate_window_us: u64,
    /// Moving-average width applied before burst detection.
    pub smooth: usize,
    pub footprint: FootprintModel,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            bins: 200,
            rate_window_us: 50_000,
            smooth: 0,
            footprint: FootprintModel::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeltpoolConfig {
    pub pool: PoolParams,
    pub anomaly: AnomalyParams,
    /// Write an overlay image every this many frames (0 = none).
    pub overlay_stride: usize,
}

impl PipelineConfig {
    /// Parses TOML text and applies `section.key=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Parse(format!("config: {}", e.message())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(Value::Table(scene)) = table.get_mut("scene") {
            scene
                .entry("kind")
                .or_insert_with(|| Value::String("meltpool".into()));
        }
        let cfg: PipelineConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(format!("config: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn load(
        path: Option<&Path>,
        fallback: &str,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::from_toml(&text, overrides)
            }
            None => Self::from_toml(fallback, overrides),
        }
    }

    /// Propagates `run.seed` to every seeded component.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.run.seed = s;
        }
        let s = self.run.seed;
        self.sensor.rng_seed = s;
        self.framing.code.seed = s;
        if let SceneSpec::Meltpool(m) = &mut self.scene {
            m.seed = s;
        }
    }

    pub fn geometry(&self) -> Result<SensorGeometry, CliError> {
        SensorGeometry::new(self.run.width, self.run.height).map_err(invalid)
    }

    /// Checks every embedded spec without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        let g = self.geometry()?;
        self.sensor.validate().map_err(invalid)?;
        evmelt::sim::Scene::new(self.scene.clone(), g).map_err(invalid)?;
        self.framing.code.build().map_err(invalid)?;
        if self.framing.stride_us == 0 {
            return Err(invalid("framing.stride_us must be positive"));
        }
        if self.framing.windows_us.contains(&0) {
            return Err(invalid("framing.windows_us entries must be positive"));
        }
        if self.analytics.bins == 0 || self.analytics.rate_window_us == 0 {
            return Err(invalid(
                "analytics.bins and analytics.rate_window_us must be positive",
            ));
        }
        self.analytics.footprint.validate().map_err(invalid)?;
        let a = &self.meltpool.anomaly;
        if a.density_factor.is_nan()
            || a.density_factor < 1.0
            || a.max_link_dist.is_nan()
            || a.max_link_dist < 0.0
        {
            return Err(invalid(
                "meltpool.anomaly needs density_factor >= 1 and max_link_dist >= 0",
            ));
        }
        if self.codec.events_file.is_empty() {
            return Err(invalid("codec.events_file must not be empty"));
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

/// Applies one `a.b.c=value` override, creating tables as needed.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Parse(format!(
            "override `{spec}` has an empty key"
        )));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("override `{spec}`: `{k}` is not a table")))?;
    }
    cur.insert(last.to_string(), parse_literal(raw.trim()));
    Ok(())
}
