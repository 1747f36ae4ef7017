use std::f64::consts::FRAC_PI_2;

use crate::framing::Frame;

/// Variance of a unit square; added to the discrete second moments so each
/// pixel counts as an area element rather than a point.
const PIXEL_VARIANCE: f64 = 1.0 / 12.0;

/// One 8-connected group of active pixels with `|value|`-weighted moments.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobComponent {
    /// `(x, y, |value|)` in scan order.
    pub pixels: Vec<(u16, u16, f64)>,
    pub centroid: (f64, f64),
    pub area: usize,
    /// Weight-normalized central moments.
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
    /// Mean `|value|` over the component.
    pub density: f64,
}

impl BlobComponent {
    /// Computes centroid and moments from weighted pixels. Zero total weight
    /// falls back to uniform weights.
    pub fn from_pixels(pixels: Vec<(u16, u16, f64)>) -> Self {
        assert!(!pixels.is_empty(), "component needs at least one pixel");
        let total: f64 = pixels.iter().map(|p| p.2).sum();
        let weight = |w: f64| if total > 0.0 { w } else { 1.0 };
        let norm: f64 = pixels.iter().map(|p| weight(p.2)).sum();
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y, w) in &pixels {
            sx += weight(w) * f64::from(x);
            sy += weight(w) * f64::from(y);
        }
        let (cx, cy) = (sx / norm, sy / norm);
        let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
        for &(x, y, w) in &pixels {
            let (dx, dy) = (f64::from(x) - cx, f64::from(y) - cy);
            m20 += weight(w) * dx * dx;
            m02 += weight(w) * dy * dy;
            m11 += weight(w) * dx * dy;
        }
        let area = pixels.len();
        BlobComponent {
            centroid: (cx, cy),
            area,
            mu20: m20 / norm,
            mu02: m02 / norm,
            mu11: m11 / norm,
            density: total / area as f64,
            pixels,
        }
    }

    /// Eigenvalues `(max, min)` of the area-corrected moment matrix.
    pub fn principal_moments(&self) -> (f64, f64) {
        let a = self.mu20 + PIXEL_VARIANCE;
        let c = self.mu02 + PIXEL_VARIANCE;
        let b = self.mu11;
        let mean = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (mean + r, (mean - r).max(0.0))
    }

    /// `sqrt(lambda_max / lambda_min)`, at least 1.
    pub fn aspect_ratio(&self) -> f64 {
        let (hi, lo) = self.principal_moments();
        if lo <= 0.0 {
            return f64::INFINITY;
        }
        (hi / lo).sqrt().max(1.0)
    }

    /// Major-axis angle in `(-pi/2, pi/2]`, image coordinates (y down).
    pub fn orientation(&self) -> f64 {
        let theta = 0.5 * (2.0 * self.mu11).atan2(self.mu20 - self.mu02);
        if theta <= -FRAC_PI_2 {
            theta + std::f64::consts::PI
        } else {
            theta
        }
    }

    /// Median `|value|` over the component's pixels.
    pub fn median_value(&self) -> f64 {
        median(self.pixels.iter().map(|p| p.2).collect())
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Three times the median `|value|` of nonzero pixels; 1 when the frame is
/// empty or all nonzero magnitudes are equal.
pub fn default_activity_threshold(frame: &Frame) -> f64 {
    let nz: Vec<f64> = frame
        .values
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .collect();
    let Some(&first) = nz.first() else {
        return 1.0;
    };
    if nz.iter().all(|v| *v == first) {
        return 1.0;
    }
    3.0 * median(nz)
}

/// 8-connected components of `|value| >= threshold`, largest first.
/// Equal areas keep scan order of their first pixel.
pub fn segment(frame: &Frame, activity_threshold: f64) -> Vec<BlobComponent> {
    let w = usize::from(frame.geometry.width());
    let active: Vec<bool> = frame
        .values
        .iter()
        .map(|v| v.abs() >= activity_threshold)
        .collect();
    label_components(w, &active, |i| frame.values[i].abs())
}

/// 8-connected components of a row-major boolean mask, largest first.
pub(crate) fn label_components(
    width: usize,
    mask: &[bool],
    weight: impl Fn(usize) -> f64,
) -> Vec<BlobComponent> {
    let height = mask.len() / width.max(1);
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (x, y) = (i % width, i / width);
            for ny in y.saturating_sub(1)..=(y + 1).min(height - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(width - 1) {
                    let j = ny * width + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        members.sort_unstable();
        let pixels = members
            .into_iter()
            .map(|i| ((i % width) as u16, (i / width) as u16, weight(i)))
            .collect();
        comps.push(BlobComponent::from_pixels(pixels));
    }
    comps.sort_by_key(|c| std::cmp::Reverse(c.area));
    comps
}
