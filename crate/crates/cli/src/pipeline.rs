use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use evmelt::analytics::{
    cumulative_fraction, detect_burst, event_rate, fraction_before, savings_report,
};
use evmelt::codec::{decode_evt1, encode_evt1, read_csv, write_csv};
use evmelt::framing::{encode_pgm, frame_sequence, manifest, to_image, ExposureCode, Frame};
use evmelt::meltpool::{detect_anomalies, overlay, pool_series, pool_series_csv, tracks_csv};
use evmelt::sim::{simulate_scene, GroundTruth, Scene};
use evmelt::EventStream;
use tempfile::NamedTempFile;

use crate::config::PipelineConfig;
use crate::error::{invalid, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Simulate the configured scene and write the event file.
    Simulate,
    /// Boxcar frames for every configured window length.
    Frames,
    /// Frames under the configured exposure code.
    Coded,
    /// Cumulative fraction, event rate and burst time.
    Stats,
    /// Storage comparison against a fixed-rate imager.
    Footprint,
    /// Pool shape series, anomaly tracks and overlays.
    Meltpool,
    /// Anomaly tracking on a shimmering pool.
    DemoFig4,
    /// Keyhole aspect ratio over time.
    DemoFig6,
    /// Balloon pop: cumulative event fraction.
    DemoFig8,
    /// Frames at several window lengths and under coded exposure.
    DemoFig10,
}

impl Command {
    /// Built-in configuration used when no `--config` is given.
    pub fn default_config(self) -> &'static str {
        match self {
            Command::DemoFig4 => include_str!("../configs/fig4.toml"),
            Command::DemoFig6 => include_str!("../configs/fig6.toml"),
            Command::DemoFig8 => include_str!("../configs/fig8.toml"),
            Command::DemoFig10 => include_str!("../configs/fig10.toml"),
            _ => "",
        }
    }
}

/// Command-line settings layered over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub overrides: Vec<String>,
}

pub fn resolve_config(cmd: Command, opts: &Options) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(
        opts.config.as_deref(),
        cmd.default_config(),
        &opts.overrides,
    )?;
    if let Some(out) = &opts.out {
        cfg.run.out_dir = out.clone();
    }
    if let Some(input) = &opts.input {
        cfg.codec.input = Some(input.clone());
    }
    cfg.apply_seed(opts.seed);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns its `key=value` summary.
pub fn run(cmd: Command, opts: &Options) -> Result<String, CliError> {
    let cfg = resolve_config(cmd, opts)?;
    let mut out = Output::create(&cfg.run.out_dir)?;
    match cmd {
        Command::Simulate => {
            let (stream, truth) = simulate(&cfg)?;
            write_events(&cfg, &stream, &mut out)?;
            write_truth(truth.as_ref(), &mut out)?;
        }
        Command::Frames => {
            let (stream, _) = events(&cfg)?;
            boxcar_frames(&cfg, &stream, &mut out)?;
        }
        Command::Coded => {
            let (stream, _) = events(&cfg)?;
            coded_frames(&cfg, &stream, &mut out)?;
        }
        Command::Stats => {
            let (stream, truth) = events(&cfg)?;
            stats(&cfg, &stream, truth.as_ref(), &mut out)?;
        }
        Command::Footprint => {
            let (stream, _) = events(&cfg)?;
            footprint(&cfg, &stream, &mut out)?;
        }
        Command::Meltpool => {
            let (stream, truth) = events(&cfg)?;
            meltpool(&cfg, &stream, &mut out)?;
            write_truth(truth.as_ref(), &mut out)?;
        }
        Command::DemoFig4 | Command::DemoFig6 => {
            let (stream, truth) = events(&cfg)?;
            write_events(&cfg, &stream, &mut out)?;
            write_truth(truth.as_ref(), &mut out)?;
            meltpool(&cfg, &stream, &mut out)?;
        }
        Command::DemoFig8 => {
            let (stream, truth) = events(&cfg)?;
            write_events(&cfg, &stream, &mut out)?;
            write_truth(truth.as_ref(), &mut out)?;
            stats(&cfg, &stream, truth.as_ref(), &mut out)?;
        }
        Command::DemoFig10 => {
            let (stream, truth) = events(&cfg)?;
            write_events(&cfg, &stream, &mut out)?;
            write_truth(truth.as_ref(), &mut out)?;
            boxcar_frames(&cfg, &stream, &mut out)?;
            coded_frames(&cfg, &stream, &mut out)?;
        }
    }
    out.finish()
}

/// Artifact writer rooted at the output directory. Every file is written to
/// a temporary sibling and renamed into place.
struct Output {
    root: PathBuf,
    summary: Vec<(String, String)>,
}

impl Output {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Output {
            root: root.to_path_buf(),
            summary: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let dir = path.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        tmp.write_all(bytes)
            .map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.persist(&path)
            .map_err(|e| CliError::io(&path, e.error))?;
        Ok(())
    }

    /// Records a summary line; a repeated key keeps its first position.
    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        let value = value.to_string();
        match self.summary.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.summary.push((key.to_owned(), value)),
        }
    }

    fn finish(mut self) -> Result<String, CliError> {
        let mut text = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(text, "{k}={v}");
        }
        self.write("summary.txt", text.as_bytes())?;
        Ok(text)
    }
}

/// Simulates the configured scene, applying `run.floor_from_peak`.
pub fn simulate(cfg: &PipelineConfig) -> Result<(EventStream, Option<GroundTruth>), CliError> {
    let g = cfg.geometry()?;
    let mut model = cfg.sensor.clone();
    if cfg.run.floor_from_peak {
        let scene = Scene::new(cfg.scene.clone(), g).map_err(invalid)?;
        model = model.with_floor_for_peak(scene.peak_intensity());
    }
    let (stream, truth) =
        simulate_scene(&cfg.scene, g, cfg.run.duration_us, cfg.run.fps, &model).map_err(invalid)?;
    Ok((stream, Some(truth)))
}

/// Reads `codec.input` when set, otherwise simulates.
fn events(cfg: &PipelineConfig) -> Result<(EventStream, Option<GroundTruth>), CliError> {
    let Some(path) = &cfg.codec.input else {
        return simulate(cfg);
    };
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let stream = if is_csv {
        let text = String::from_utf8(bytes)
            .map_err(|_| invalid(format!("{}: not UTF-8", path.display())))?;
        read_csv(&text, cfg.geometry()?).map_err(|e| invalid(format!("{}: {e}", path.display())))?
    } else {
        decode_evt1(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?
    };
    Ok((stream, None))
}

fn write_events(
    cfg: &PipelineConfig,
    stream: &EventStream,
    out: &mut Output,
) -> Result<(), CliError> {
    let bytes = encode_evt1(stream).map_err(invalid)?;
    out.write(&cfg.codec.events_file, &bytes)?;
    if cfg.codec.write_csv {
        out.write("events.csv", write_csv(stream).as_bytes())?;
    }
    out.note("geometry", stream.geometry);
    out.note("event_count", stream.len());
    out.note("first_t_us", opt(stream.first_t()));
    out.note("last_t_us", opt(stream.last_t()));
    out.note("events_file", &cfg.codec.events_file);
    out.note("events_bytes", bytes.len());
    Ok(())
}

fn write_truth(truth: Option<&GroundTruth>, out: &mut Output) -> Result<(), CliError> {
    let Some(truth) = truth else {
        return Ok(());
    };
    if let Some(csv) = truth.aspect_ratio_csv() {
        out.write("truth_aspect_ratio.csv", csv.as_bytes())?;
    }
    if !truth.anomaly_paths.is_empty() {
        out.write("truth_anomalies.csv", truth.anomaly_csv().as_bytes())?;
    }
    if let Some(t) = truth.t_pop_us {
        out.note("truth_t_pop_us", t);
    }
    Ok(())
}

fn write_sequence(
    cfg: &PipelineConfig,
    dir: &str,
    frames: &[Frame],
    out: &mut Output,
) -> Result<(), CliError> {
    let keep = match cfg.framing.max_images {
        0 => frames.len(),
        n => n.min(frames.len()),
    };
    let frames = &frames[..keep];
    let names: Vec<String> = (0..frames.len())
        .map(|i| format!("frame_{i:05}.pgm"))
        .collect();
    for (f, name) in frames.iter().zip(&names) {
        let img = to_image(f, cfg.framing.mapping);
        out.write(&format!("{dir}/{name}"), &encode_pgm(&img))?;
    }
    out.write(
        &format!("{dir}/manifest.csv"),
        manifest(frames, &names).as_bytes(),
    )?;
    out.note(&format!("{dir}.images"), frames.len());
    Ok(())
}

fn boxcar_frames(
    cfg: &PipelineConfig,
    stream: &EventStream,
    out: &mut Output,
) -> Result<(), CliError> {
    let windows = if cfg.framing.windows_us.is_empty() {
        vec![cfg.framing.code.window_us]
    } else {
        cfg.framing.windows_us.clone()
    };
    for w in windows {
        let code = ExposureCode::boxcar(w).map_err(invalid)?;
        let frames = frame_sequence(stream, cfg.framing.stride_us, &code).map_err(invalid)?;
        write_sequence(cfg, &format!("frames_w{w}us"), &frames, out)?;
    }
    Ok(())
}

fn coded_frames(
    cfg: &PipelineConfig,
    stream: &EventStream,
    out: &mut Output,
) -> Result<(), CliError> {
    let code = cfg.framing.code.build().map_err(invalid)?;
    let frames = frame_sequence(stream, cfg.framing.stride_us, &code).map_err(invalid)?;
    out.note("code", &code);
    write_sequence(cfg, "coded", &frames, out)
}

fn stats(
    cfg: &PipelineConfig,
    stream: &EventStream,
    truth: Option<&GroundTruth>,
    out: &mut Output,
) -> Result<(), CliError> {
    let a = &cfg.analytics;
    let curve = cumulative_fraction(stream, a.bins).map_err(invalid)?;
    let rate = event_rate(stream, a.rate_window_us).map_err(invalid)?;
    out.write("cumulative.csv", curve.to_csv().as_bytes())?;
    out.write("rate.csv", rate.to_csv().as_bytes())?;
    out.note("event_count", stream.len());
    out.note("bins", a.bins);
    out.note("bin_width_us", curve.bin_width_us());
    match detect_burst(&curve, a.smooth) {
        Ok(t) => out.note("burst_t_us", t),
        Err(e) => out.note("burst_t_us", format!("none ({e})")),
    }
    if let Some(t) = truth.and_then(|t| t.t_pop_us) {
        out.note("fraction_before_pop", fraction_before(stream, t));
    }
    Ok(())
}

fn footprint(cfg: &PipelineConfig, stream: &EventStream, out: &mut Output) -> Result<(), CliError> {
    let model = &cfg.analytics.footprint;
    let report = savings_report(stream, model).map_err(invalid)?;
    out.write("footprint.txt", report.render(model).as_bytes())?;
    out.note("event_count", report.event_count);
    out.note("event_bytes", report.event_bytes);
    out.note("conventional_bytes", report.conventional_bytes);
    out.note("raw_ratio", report.raw_ratio);
    out.note("dr_adjusted_ratio", report.dr_adjusted_ratio);
    out.note(
        "dr_adjusted_ratio_aligned",
        report.dr_adjusted_ratio_aligned,
    );
    Ok(())
}

fn meltpool(cfg: &PipelineConfig, stream: &EventStream, out: &mut Output) -> Result<(), CliError> {
    let m = &cfg.meltpool;
    let code = cfg.framing.code.build().map_err(invalid)?;
    let frames = frame_sequence(stream, cfg.framing.stride_us, &code).map_err(invalid)?;
    let series = pool_series(&frames, &m.pool);
    let tracks = detect_anomalies(&frames, &m.anomaly);
    out.write("pool_series.csv", pool_series_csv(&series).as_bytes())?;
    out.write("tracks.csv", tracks_csv(&tracks).as_bytes())?;
    if m.overlay_stride > 0 {
        for (i, (f, s)) in frames
            .iter()
            .zip(&series)
            .enumerate()
            .step_by(m.overlay_stride)
        {
            let marks: Vec<(f64, f64)> = tracks
                .iter()
                .flat_map(|t| t.points.iter())
                .filter(|p| p.t_us == f.mid_time_us())
                .map(|p| p.centroid)
                .collect();
            let img = overlay(f, s.geometry.as_ref().map(|g| &g.pool), &marks);
            out.write(&format!("overlays/overlay_{i:05}.pgm"), &encode_pgm(&img))?;
        }
    }
    out.note("code", &code);
    out.note("frame_count", frames.len());
    out.note(
        "pool_frames",
        series.iter().filter(|s| s.geometry.is_some()).count(),
    );
    out.note("track_count", tracks.len());
    for t in &tracks {
        out.note(&format!("track_{}.points", t.id), t.len());
    }
    Ok(())
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "none".into(), |t| t.to_string())
}
