use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::segment::{label_components, segment, BlobComponent};
use super::threshold_for;
use crate::framing::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyParams {
    /// Candidates must exceed this multiple of the pool's median `|value|`.
    pub density_factor: f64,
    /// Largest centroid jump, in pixels, linked between frames.
    pub max_link_dist: f64,
    pub min_track_len: usize,
    /// Frames a track may go unmatched before it is closed.
    pub max_gap_frames: usize,
    pub min_area: usize,
    /// Absolute `|value|` threshold for the initial segmentation; per-frame
    /// default when `None`.
    pub activity_threshold: Option<f64>,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        AnomalyParams {
            density_factor: 3.0,
            max_link_dist: 6.0,
            min_track_len: 5,
            max_gap_frames: 2,
            min_area: 1,
            activity_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t_us: f64,
    pub centroid: (f64, f64),
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyTrack {
    pub id: usize,
    pub points: Vec<TrackPoint>,
}

impl AnomalyTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Anomaly candidates in one frame: non-pool components denser than
/// `k * median(pool)`, plus pool sub-blobs at or above that level.
pub fn candidates(frame: &Frame, params: &AnomalyParams) -> Vec<BlobComponent> {
    let thr = threshold_for(frame, params.activity_threshold);
    let mut comps = segment(frame, thr).into_iter();
    let Some(pool) = comps.next() else {
        return Vec::new();
    };
    let cut = params.density_factor * pool.median_value();
    let mut out: Vec<BlobComponent> = comps
        .filter(|c| c.density > cut && c.area >= params.min_area)
        .collect();

    let g = frame.geometry;
    let mut mask = vec![false; g.pixel_count()];
    for &(x, y, v) in &pool.pixels {
        mask[g.index(x, y)] = v >= cut;
    }
    out.extend(
        label_components(usize::from(g.width()), &mask, |i| frame.values[i].abs())
            .into_iter()
            .filter(|c| c.area >= params.min_area),
    );
    out
}

struct OpenTrack {
    points: Vec<TrackPoint>,
    last_frame: usize,
}

/// Greedy nearest-neighbour linking of per-frame candidates. Pairs are taken
/// in order of distance, then candidate index, then track age.
pub fn detect_anomalies(frames: &[Frame], params: &AnomalyParams) -> Vec<AnomalyTrack> {
    let mut tracks: Vec<OpenTrack> = Vec::new();
    for (fi, frame) in frames.iter().enumerate() {
        let cands = candidates(frame, params);
        let t_us = frame.mid_time_us();

        let mut pairs = Vec::new();
        for (ti, tr) in tracks.iter().enumerate() {
            if fi - tr.last_frame > params.max_gap_frames + 1 {
                continue;
            }
            let last = tr.points.last().expect("tracks are never empty").centroid;
            for (ci, c) in cands.iter().enumerate() {
                let d = (c.centroid.0 - last.0).hypot(c.centroid.1 - last.1);
                if d <= params.max_link_dist {
                    pairs.push((d, ci, ti));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut cand_used = vec![false; cands.len()];
        let mut track_used = vec![false; tracks.len()];
        for (_, ci, ti) in pairs {
            if cand_used[ci] || track_used[ti] {
                continue;
            }
            cand_used[ci] = true;
            track_used[ti] = true;
            tracks[ti].points.push(point(t_us, &cands[ci]));
            tracks[ti].last_frame = fi;
        }
        for (ci, c) in cands.iter().enumerate() {
            if !cand_used[ci] {
                tracks.push(OpenTrack {
                    points: vec![point(t_us, c)],
                    last_frame: fi,
                });
            }
        }
    }

    tracks
        .into_iter()
        .filter(|t| t.points.len() >= params.min_track_len.max(1))
        .enumerate()
        .map(|(id, t)| AnomalyTrack {
            id,
            points: t.points,
        })
        .collect()
}

fn point(t_us: f64, c: &BlobComponent) -> TrackPoint {
    TrackPoint {
        t_us,
        centroid: c.centroid,
        density: c.density,
    }
}

/// `track_id,t_us,cx,cy,density`.
pub fn tracks_csv(tracks: &[AnomalyTrack]) -> String {
    let mut out = String::from("track_id,t_us,cx,cy,density\n");
    for t in tracks {
        for p in &t.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t.id, p.t_us, p.centroid.0, p.centroid.1, p.density
            );
        }
    }
    out
}
