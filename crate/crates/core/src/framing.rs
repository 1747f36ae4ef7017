//! Frame formation from events: plain windowed summation and digital coded
//! exposure, where each event is weighted by a temporal code evaluated at its
//! exact offset inside the window.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{GrayImage, ImageEncoder, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventStream, SensorGeometry};

/// Event timestamps have 1 us resolution, which bounds the usable carrier.
pub const CODE_SAMPLE_SPACING_US: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FramingError {
    #[error("window must be positive")]
    ZeroWindow,
    #[error("stride must be positive")]
    ZeroStride,
    #[error("flutter code needs at least one chip")]
    NoChips,
    #[error("flutter chips must be +1 or -1")]
    BadChip,
    #[error("bandpass frequency {0} Hz outside (0, {max}] Hz", max = nyquist_hz())]
    BadFrequency(f64),
}

fn nyquist_hz() -> f64 {
    1e6 / (2.0 * CODE_SAMPLE_SPACING_US)
}

/// Temporal weighting applied to events inside a frame window.
#[derive(Debug, Clone, PartialEq)]
pub enum ExposureCode {
    Boxcar {
        window_us: u64,
    },
    /// Pseudo-random +/-1 chips of equal length spanning the window.
    Flutter {
        window_us: u64,
        chips: Vec<i8>,
        seed: Option<u64>,
    },
    /// Raised-cosine envelope times a cosine carrier centred in the window.
    Bandpass {
        window_us: u64,
        center_freq_hz: f64,
    },
}

impl ExposureCode {
    pub fn boxcar(window_us: u64) -> Result<Self, FramingError> {
        if window_us == 0 {
            return Err(FramingError::ZeroWindow);
        }
        Ok(ExposureCode::Boxcar { window_us })
    }

    pub fn flutter(window_us: u64, chip_count: usize, seed: u64) -> Result<Self, FramingError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chips = (0..chip_count)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        let mut code = Self::flutter_from_chips(window_us, chips)?;
        if let ExposureCode::Flutter { seed: s, .. } = &mut code {
            *s = Some(seed);
        }
        Ok(code)
    }

    pub fn flutter_from_chips(window_us: u64, chips: Vec<i8>) -> Result<Self, FramingError> {
        if window_us == 0 {
            return Err(FramingError::ZeroWindow);
        }
        if chips.is_empty() {
            return Err(FramingError::NoChips);
        }
        if chips.iter().any(|c| c.abs() != 1) {
            return Err(FramingError::BadChip);
        }
        Ok(ExposureCode::Flutter {
            window_us,
            chips,
            seed: None,
        })
    }

    pub fn bandpass(window_us: u64, center_freq_hz: f64) -> Result<Self, FramingError> {
        if window_us == 0 {
            return Err(FramingError::ZeroWindow);
        }
        if !(center_freq_hz > 0.0 && center_freq_hz <= nyquist_hz()) {
            return Err(FramingError::BadFrequency(center_freq_hz));
        }
        Ok(ExposureCode::Bandpass {
            window_us,
            center_freq_hz,
        })
    }

    pub fn window_us(&self) -> u64 {
        match *self {
            ExposureCode::Boxcar { window_us }
            | ExposureCode::Flutter { window_us, .. }
            | ExposureCode::Bandpass { window_us, .. } => window_us,
        }
    }

    /// Weight of an event `offset_us` after the window start
    /// (`offset_us < window_us`).
    #[inline]
    pub fn weight(&self, offset_us: u64) -> f64 {
        match self {
            ExposureCode::Boxcar { .. } => 1.0,
            ExposureCode::Flutter {
                window_us, chips, ..
            } => {
                let k =
                    (u128::from(offset_us) * chips.len() as u128 / u128::from(*window_us)) as usize;
                f64::from(chips[k.min(chips.len() - 1)])
            }
            ExposureCode::Bandpass {
                window_us,
                center_freq_hz,
            } => {
                let w = *window_us as f64;
                let tau = offset_us as f64;
                let envelope = 0.5 * (1.0 - (TAU * tau / w).cos());
                envelope * (TAU * center_freq_hz * (tau - 0.5 * w) * 1e-6).cos()
            }
        }
    }
}

impl fmt::Display for ExposureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureCode::Boxcar { window_us } => write!(f, "boxcar(window_us={window_us})"),
            ExposureCode::Flutter {
                window_us,
                chips,
                seed,
            } => {
                write!(f, "flutter(window_us={window_us},chips=")?;
                for c in chips {
                    f.write_char(if *c > 0 { '+' } else { '-' })?;
                }
                match seed {
                    Some(s) => write!(f, ",seed={s})"),
                    None => f.write_char(')'),
                }
            }
            ExposureCode::Bandpass {
                window_us,
                center_freq_hz,
            } => write!(f, "bandpass(window_us={window_us},f0_hz={center_freq_hz})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Boxcar,
    Flutter,
    Bandpass,
}

/// Serializable description of an [`ExposureCode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub window_us: u64,
    pub chip_count: usize,
    pub seed: u64,
    pub center_freq_hz: f64,
}

impl Default for CodeSpec {
    fn default() -> Self {
        CodeSpec {
            kind: CodeKind::Boxcar,
            window_us: 10_000,
            chip_count: 16,
            seed: 0,
            center_freq_hz: 100.0,
        }
    }
}

impl CodeSpec {
    pub fn build(&self) -> Result<ExposureCode, FramingError> {
        match self.kind {
            CodeKind::Boxcar => ExposureCode::boxcar(self.window_us),
            CodeKind::Flutter => ExposureCode::flutter(self.window_us, self.chip_count, self.seed),
            CodeKind::Bandpass => ExposureCode::bandpass(self.window_us, self.center_freq_hz),
        }
    }
}

/// Per-pixel signed accumulation over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub geometry: SensorGeometry,
    pub t_start_us: u64,
    pub window_us: u64,
    /// Row-major values.
    pub values: Vec<f64>,
    pub code: String,
}

impl Frame {
    pub fn zeros(geometry: SensorGeometry, t_start_us: u64, window_us: u64, code: String) -> Self {
        Frame {
            geometry,
            t_start_us,
            window_us,
            values: vec![0.0; geometry.pixel_count()],
            code,
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> f64 {
        self.values[self.geometry.index(x, y)]
    }

    /// Window midpoint in microseconds.
    pub fn mid_time_us(&self) -> f64 {
        self.t_start_us as f64 + 0.5 * self.window_us as f64
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Net polarity count per pixel over `[t_start, t_start + window)`.
pub fn accumulate(
    stream: &EventStream,
    t_start: u64,
    window_us: u64,
) -> Result<Frame, FramingError> {
    let code = ExposureCode::boxcar(window_us)?;
    let mut frame = Frame::zeros(stream.geometry, t_start, window_us, "accumulate".into());
    let g = stream.geometry;
    for e in stream.window(t_start, t_start.saturating_add(window_us)) {
        frame.values[g.index(e.x, e.y)] += f64::from(e.p.sign());
    }
    frame.code = code.to_string();
    Ok(frame)
}

/// Code-weighted polarity sum per pixel over `[t_start, t_start + window)`.
pub fn coded_frame(stream: &EventStream, code: &ExposureCode, t_start: u64) -> Frame {
    let window = code.window_us();
    let g = stream.geometry;
    let mut frame = Frame::zeros(g, t_start, window, code.to_string());
    for e in stream.window(t_start, t_start.saturating_add(window)) {
        frame.values[g.index(e.x, e.y)] += f64::from(e.p.sign()) * code.weight(e.t - t_start);
    }
    frame
}

/// Frames starting at `t_first + k * stride` for every start before `t_last`.
pub fn frame_sequence(
    stream: &EventStream,
    stride_us: u64,
    code: &ExposureCode,
) -> Result<Vec<Frame>, FramingError> {
    if stride_us == 0 {
        return Err(FramingError::ZeroStride);
    }
    let (Some(first), Some(last)) = (stream.first_t(), stream.last_t()) else {
        return Ok(Vec::new());
    };
    Ok((0..)
        .map(|k| first + k * stride_us)
        .take_while(|&t| t < last)
        .map(|t| coded_frame(stream, code, t))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mapping", content = "scale", rename_all = "snake_case")]
pub enum GrayMapping {
    /// +/- the largest magnitude in the frame map to 255 / 0.
    SymmetricMax,
    /// +/- `s` map to 255 / 0, values beyond are clamped.
    FixedScale(f64),
}

/// Renders a frame to 8-bit gray with zero at 128.
pub fn to_image(frame: &Frame, mapping: GrayMapping) -> GrayImage {
    let scale = match mapping {
        GrayMapping::SymmetricMax => frame.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        GrayMapping::FixedScale(s) => s.abs(),
    };
    let (w, h) = (
        u32::from(frame.geometry.width()),
        u32::from(frame.geometry.height()),
    );
    let gray = |v: f64| -> u8 {
        if scale == 0.0 || v == 0.0 {
            return 128;
        }
        let r = (v / scale).clamp(-1.0, 1.0);
        let g = if r < 0.0 {
            128.0 + 128.0 * r
        } else {
            128.0 + 127.0 * r
        };
        g.round() as u8
    };
    GrayImage::from_fn(w, h, |x, y| {
        Luma([gray(frame.values[(y * w + x) as usize])])
    })
}

/// Binary PGM (P5, maxval 255) bytes.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.as_raw().len() + 20);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::L8,
        )
        .expect("in-memory PGM encoding");
    out
}

/// One manifest line per frame: `index,file,t_start_us,window_us,code`.
pub fn manifest(frames: &[Frame], file_names: &[String]) -> String {
    let mut out = String::from("index,file,t_start_us,window_us,code\n");
    for (i, (f, name)) in frames.iter().zip(file_names).enumerate() {
        let _ = writeln!(
            out,
            "{i},{name},{},{},\"{}\"",
            f.t_start_us, f.window_us, f.code
        );
    }
    out
}
