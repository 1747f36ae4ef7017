use std::io;
use std::path::Path;

use image::{ImageBuffer, Luma};

use super::SimError;
use crate::event::SensorGeometry;

/// Linear-intensity frames sampled at a fixed period.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVideo {
    pub geometry: SensorGeometry,
    pub frame_period_us: u64,
    /// Row-major frames, each `geometry.pixel_count()` long.
    pub frames: Vec<Vec<f64>>,
}

impl IntensityVideo {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidVideo(m));
        if self.frame_period_us == 0 {
            return bad("frame period must be positive".into());
        }
        if self.frames.len() < 2 {
            return bad(format!("need at least 2 frames, got {}", self.frames.len()));
        }
        let n = self.geometry.pixel_count();
        for (k, f) in self.frames.iter().enumerate() {
            if f.len() != n {
                return bad(format!("frame {k} has {} samples, expected {n}", f.len()));
            }
            if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad(format!("frame {k} has a negative or non-finite intensity"));
            }
        }
        Ok(())
    }

    pub fn duration_us(&self) -> u64 {
        self.frame_period_us * (self.frames.len().saturating_sub(1) as u64)
    }

    pub fn frame_time_us(&self, k: usize) -> u64 {
        self.frame_period_us * k as u64
    }

    /// Writes each frame as a 16-bit PGM on a shared log scale, plus a
    /// `scale.txt` sidecar with the log range. Debug output only: the
    /// quantization loses precision.
    pub fn dump_pgm(&self, dir: &Path, floor: f64) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in self.frames.iter().flatten() {
            let l = (v + floor).ln();
            lo = lo.min(l);
            hi = hi.max(l);
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (w, h) = (
            u32::from(self.geometry.width()),
            u32::from(self.geometry.height()),
        );
        for (k, f) in self.frames.iter().enumerate() {
            let data: Vec<u16> = f
                .iter()
                .map(|v| (((v + floor).ln() - lo) / span * 65535.0).round() as u16)
                .collect();
            let img: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(w, h, data).expect("frame size matches geometry");
            img.save_with_format(
                dir.join(format!("frame_{k:06}.pgm")),
                image::ImageFormat::Pnm,
            )
            .map_err(io::Error::other)?;
        }
        std::fs::write(
            dir.join("scale.txt"),
            format!(
                "log_min={lo}\nlog_max={hi}\nfloor={floor}\nframe_period_us={}\n",
                self.frame_period_us
            ),
        )
    }
}
