//! Melt-pool observables from event frames: pool outline and shape,
//! keyhole aspect-ratio series, and tracks of small high-activity anomalies.

mod segment;
mod track;

use std::fmt::Write as _;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::framing::{to_image, Frame, GrayMapping};

pub use segment::{default_activity_threshold, segment, BlobComponent};
pub use track::{
    candidates, detect_anomalies, tracks_csv, AnomalyParams, AnomalyTrack, TrackPoint,
};

/// Shape of the pool component in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolGeometry {
    pub t_us: f64,
    pub pool: BlobComponent,
    pub aspect_ratio: f64,
    pub orientation: f64,
}

/// One entry of a pool series; `geometry` is `None` for frames with no
/// active component.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSample {
    /// Window midpoint.
    pub t_us: f64,
    pub geometry: Option<PoolGeometry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolParams {
    /// Absolute `|value|` threshold; per-frame default when `None`.
    pub activity_threshold: Option<f64>,
}

pub(crate) fn threshold_for(frame: &Frame, fixed: Option<f64>) -> f64 {
    fixed.unwrap_or_else(|| default_activity_threshold(frame))
}

impl PoolGeometry {
    pub fn from_component(t_us: f64, pool: BlobComponent) -> Self {
        PoolGeometry {
            t_us,
            aspect_ratio: pool.aspect_ratio(),
            orientation: pool.orientation(),
            pool,
        }
    }
}

/// Largest component per frame and its moment-based shape.
pub fn pool_series(frames: &[Frame], params: &PoolParams) -> Vec<PoolSample> {
    frames
        .iter()
        .map(|f| {
            let t_us = f.mid_time_us();
            let thr = threshold_for(f, params.activity_threshold);
            let geometry = segment(f, thr)
                .into_iter()
                .next()
                .map(|pool| PoolGeometry::from_component(t_us, pool));
            PoolSample { t_us, geometry }
        })
        .collect()
}

/// `t_us,area,aspect_ratio,orientation`; gaps leave the shape fields empty.
pub fn pool_series_csv(series: &[PoolSample]) -> String {
    let mut out = String::from("t_us,area,aspect_ratio,orientation\n");
    for s in series {
        match &s.geometry {
            Some(g) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    s.t_us, g.pool.area, g.aspect_ratio, g.orientation
                );
            }
            None => {
                let _ = writeln!(out, "{},,,", s.t_us);
            }
        }
    }
    out
}

/// Frame rendered with symmetric gray mapping, pool boundary pixels set to
/// white and a small black cross at each mark.
pub fn overlay(frame: &Frame, pool: Option<&BlobComponent>, marks: &[(f64, f64)]) -> GrayImage {
    let mut img = to_image(frame, GrayMapping::SymmetricMax);
    let (w, h) = (img.width() as i64, img.height() as i64);
    if let Some(pool) = pool {
        let mut inside = vec![false; (w * h) as usize];
        for &(x, y, _) in &pool.pixels {
            inside[(i64::from(y) * w + i64::from(x)) as usize] = true;
        }
        let is_in =
            |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && inside[(y * w + x) as usize];
        for &(x, y, _) in &pool.pixels {
            let (x, y) = (i64::from(x), i64::from(y));
            if !(is_in(x - 1, y) && is_in(x + 1, y) && is_in(x, y - 1) && is_in(x, y + 1)) {
                img.put_pixel(x as u32, y as u32, Luma([255]));
            }
        }
    }
    for &(mx, my) in marks {
        let (cx, cy) = (mx.round() as i64, my.round() as i64);
        for d in -2..=2i64 {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if x >= 0 && y >= 0 && x < w && y < h {
                    img.put_pixel(x as u32, y as u32, Luma([0]));
                }
            }
        }
    }
    img
}
