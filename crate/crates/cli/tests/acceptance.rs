//! Acceptance checks. Prints one `PASS` or `FAIL` line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use evmelt::analytics::{
    bits_to_db, cumulative_fraction, db_to_bits, detect_burst, event_footprint, fraction_before,
    savings_report,
};
use evmelt::codec::{decode_evt1, encode_evt1};
use evmelt::framing::{accumulate, coded_frame, frame_sequence, ExposureCode};
use evmelt::meltpool::{detect_anomalies, pool_series};
use evmelt::sim::{simulate_scene, FlickerSpec, RampSpec, Scene, SceneSpec, SensorModel, StepSpec};
use evmelt::{Event, EventStream, Polarity, SensorGeometry};
use evmelt_cli::pipeline::{resolve_config, simulate, Command as Sub, Options};
use evmelt_cli::PipelineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const C: f64 = 0.15;

/// Laser-weld demo scene at its built-in seed.
const GOLDEN_EVENT_COUNT: usize = 946_810;
const GOLDEN_RAW_RATIO: f64 = 35.630_051_072_644_35;
const GOLDEN_RATIO_REL_TOL: f64 = 1e-12;

const DB_FOR_8_BITS: (f64, f64) = (47.9, 48.3);
const BITS_FOR_120_DB: (f64, f64) = (19.9, 20.0);
const RATE_LAW_REL_TOL: f64 = 0.02;
const FLICKER_SELECTIVITY: f64 = 5.0;
const PRE_POP_MAX_FRACTION: f64 = 0.05;
const MIN_PEARSON_R: f64 = 0.9;
const MIN_AR_FRAMES: usize = 100;
const MIN_TRACK_COVERAGE: f64 = 0.8;
const MAX_MEAN_CENTROID_ERR_PX: f64 = 3.0;
const MIN_DECODE_EVENTS_PER_S: f64 = 1e7;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Check + 'a>);

fn demo_config(cmd: Sub) -> PipelineConfig {
    resolve_config(cmd, &Options::default()).expect("built-in config is valid")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_stream(seed: u64, n: usize, g: SensorGeometry, span_us: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts: Vec<u64> = (0..n).map(|_| rng.random_range(0..span_us)).collect();
    ts.sort_unstable();
    let events = ts
        .into_iter()
        .map(|t| {
            let p = if rng.random_bool(0.5) {
                Polarity::On
            } else {
                Polarity::Off
            };
            Event::new(
                t,
                rng.random_range(0..g.width()),
                rng.random_range(0..g.height()),
                p,
            )
        })
        .collect();
    EventStream::new(g, events)
}

fn dynamic_range() -> Check {
    let db8 = bits_to_db(8.0).map_err(|e| e.to_string())?;
    let bits120 = db_to_bits(120.0).map_err(|e| e.to_string())?;
    ensure(
        (DB_FOR_8_BITS.0..=DB_FOR_8_BITS.1).contains(&db8),
        format!("8 bits = {db8} dB"),
    )?;
    ensure(
        (BITS_FOR_120_DB.0..=BITS_FOR_120_DB.1).contains(&bits120),
        format!("120 dB = {bits120} bits"),
    )?;
    Ok(format!("8 bits = {db8:.3} dB, 120 dB = {bits120:.3} bits"))
}

fn memory_savings(stream: &EventStream, cfg: &PipelineConfig) -> Check {
    let report = savings_report(stream, &cfg.analytics.footprint).map_err(|e| e.to_string())?;
    let encoded = encode_evt1(stream).map_err(|e| e.to_string())?;
    let from_file = report.conventional_bytes / encoded.len() as f64;
    ensure(
        event_footprint(stream, 8) == encoded.len() as u64,
        "footprint formula disagrees with encoded length",
    )?;
    ensure(
        report.raw_ratio == from_file,
        format!("{} vs {from_file}", report.raw_ratio),
    )?;
    ensure(
        report.raw_ratio >= 10.0,
        format!("ratio {} below 10", report.raw_ratio),
    )?;
    ensure(
        stream.len() == GOLDEN_EVENT_COUNT,
        format!("{} events, golden {GOLDEN_EVENT_COUNT}", stream.len()),
    )?;
    ensure(
        (report.raw_ratio / GOLDEN_RAW_RATIO - 1.0).abs() <= GOLDEN_RATIO_REL_TOL,
        format!("ratio {} vs golden {GOLDEN_RAW_RATIO}", report.raw_ratio),
    )?;
    Ok(format!(
        "{} events, {} B encoded, raw ratio {:.6} both ways",
        stream.len(),
        encoded.len(),
        report.raw_ratio
    ))
}

fn step_oracle() -> Check {
    let g = SensorGeometry::new(100, 100).unwrap();
    let mut total = 0;
    for (k, sign) in [(1i32, 1.0), (3, 1.0), (2, -1.0), (4, -1.0)] {
        let spec = SceneSpec::Step(StepSpec {
            level: 40.0,
            ratio: (sign * f64::from(k) * C).exp(),
            t_step_us: 2_000,
        });
        let model = SensorModel {
            contrast_threshold: C,
            intensity_floor: 40.0 * 1e-12,
            refractory_us: 0,
            ..SensorModel::default()
        };
        let (s, _) = simulate_scene(&spec, g, 5_000, 1000.0, &model).map_err(|e| e.to_string())?;
        let mut per_pixel = vec![0i32; g.pixel_count()];
        for e in &s.events {
            ensure(f64::from(e.p.sign()) == sign, "wrong polarity")?;
            per_pixel[g.index(e.x, e.y)] += 1;
        }
        ensure(
            per_pixel.iter().all(|&n| n == k),
            format!("step of {k} thresholds"),
        )?;
        total += s.len();
    }
    Ok(format!(
        "{total} events, exactly k per pixel for steps of +1, +3, -2 and -4 thresholds"
    ))
}

fn rate_law() -> Check {
    let g = SensorGeometry::new(4, 4).unwrap();
    let mut worst: f64 = 0.0;
    for rate in [10.0, 30.0, 120.0, 500.0, 2500.0] {
        let spec = SceneSpec::Ramp(RampSpec {
            level: 2.0,
            slope_per_s: rate * C,
        });
        let model = SensorModel {
            contrast_threshold: C,
            intensity_floor: 2e-12,
            ..SensorModel::default()
        };
        let (s, _) =
            simulate_scene(&spec, g, 1_000_000, 100.0, &model).map_err(|e| e.to_string())?;
        let mut per: BTreeMap<(u16, u16), Vec<u64>> = BTreeMap::new();
        for e in &s.events {
            per.entry((e.x, e.y)).or_default().push(e.t);
        }
        ensure(per.len() == g.pixel_count(), "silent pixels")?;
        for ts in per.values() {
            let span_s = (ts[ts.len() - 1] - ts[0]) as f64 * 1e-6;
            let measured = (ts.len() - 1) as f64 / span_s;
            worst = worst.max((measured / rate - 1.0).abs());
        }
    }
    ensure(
        worst < RATE_LAW_REL_TOL,
        format!("worst relative error {worst}"),
    )?;
    Ok(format!("worst relative rate error {:.3}%", worst * 100.0))
}

fn boxcar_equivalence() -> Check {
    let g = SensorGeometry::new(64, 48).unwrap();
    for seed in 0..100u64 {
        let s = random_stream(seed, 100_000, g, 1_000_000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0C5);
        let window = rng.random_range(1..400_000);
        let t0 = rng.random_range(0..800_000);
        let code = ExposureCode::boxcar(window).map_err(|e| e.to_string())?;
        let coded = coded_frame(&s, &code, t0);
        let plain = accumulate(&s, t0, window).map_err(|e| e.to_string())?;
        ensure(coded.values == plain.values, format!("seed {seed} differs"))?;
    }
    Ok("100 seeds of 1e5 events bit-identical".into())
}

fn frequency_selectivity() -> Check {
    let g = SensorGeometry::new(32, 24).unwrap();
    let spec = SceneSpec::Flicker(FlickerSpec {
        level: 10.0,
        amplitude: 0.6,
        freq_hz: 50.0,
    });
    let model = SensorModel {
        mismatch_sigma: 0.05,
        rng_seed: 1,
        ..SensorModel::default()
    };
    let (s, _) = simulate_scene(&spec, g, 300_000, 2000.0, &model).map_err(|e| e.to_string())?;
    let on = coded_frame(&s, &ExposureCode::bandpass(100_000, 50.0).unwrap(), 100_000).energy();
    let off = coded_frame(
        &s,
        &ExposureCode::bandpass(100_000, 200.0).unwrap(),
        100_000,
    )
    .energy();
    ensure(on >= FLICKER_SELECTIVITY * off, format!("{on} vs {off}"))?;
    Ok(format!("energy ratio {:.3e}", on / off))
}

fn balloon_pop() -> Check {
    let cfg = demo_config(Sub::DemoFig8);
    let (s, truth) = simulate(&cfg).map_err(|e| e.to_string())?;
    let t_pop = truth.and_then(|t| t.t_pop_us).ok_or("scene has no pop")?;
    let curve = cumulative_fraction(&s, cfg.analytics.bins).map_err(|e| e.to_string())?;
    ensure(
        curve.fraction.windows(2).all(|w| w[0] <= w[1]),
        "curve decreases",
    )?;
    ensure(
        curve.fraction.last() == Some(&1.0),
        "curve does not end at 1",
    )?;
    let pre = fraction_before(&s, t_pop);
    ensure(
        pre < PRE_POP_MAX_FRACTION,
        format!("pre-pop fraction {pre}"),
    )?;
    let burst = detect_burst(&curve, 0).map_err(|e| e.to_string())?;
    let bin = curve.bin_width_us();
    ensure(
        (burst - t_pop as f64).abs() <= bin,
        format!("burst at {burst} us, pop {t_pop}, bin {bin}"),
    )?;
    Ok(format!(
        "{} events, pre-pop {pre:.4}, burst {:.4} s (bin {:.1} ms)",
        s.len(),
        burst * 1e-6,
        bin * 1e-3
    ))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn keyhole_aspect_ratio(stream: &EventStream, cfg: &PipelineConfig) -> Check {
    let scene = Scene::new(cfg.scene.clone(), stream.geometry).map_err(|e| e.to_string())?;
    let code = cfg.framing.code.build().map_err(|e| e.to_string())?;
    let frames = frame_sequence(stream, cfg.framing.stride_us, &code).map_err(|e| e.to_string())?;
    let (mut measured, mut truth) = (Vec::new(), Vec::new());
    for s in pool_series(&frames, &cfg.meltpool.pool) {
        if let (Some(g), Some(t)) = (s.geometry, scene.keyhole_aspect_ratio(s.t_us as u64)) {
            measured.push(g.aspect_ratio);
            truth.push(t);
        }
    }
    ensure(
        measured.len() >= MIN_AR_FRAMES,
        format!("{} frames", measured.len()),
    )?;
    let r = pearson(&measured, &truth);
    ensure(r >= MIN_PEARSON_R, format!("r = {r}"))?;
    Ok(format!("r = {r:.4} over {} frames", measured.len()))
}

fn anomaly_tracking() -> Check {
    let cfg = demo_config(Sub::DemoFig4);
    let SceneSpec::Meltpool(spec) = &cfg.scene else {
        return Err("demo scene is not a melt pool".into());
    };
    let anomaly = spec.anomalies.first().ok_or("demo has no anomaly")?.clone();
    let code = cfg.framing.code.build().map_err(|e| e.to_string())?;

    let (s, _) = simulate(&cfg).map_err(|e| e.to_string())?;
    let frames = frame_sequence(&s, cfg.framing.stride_us, &code).map_err(|e| e.to_string())?;
    let tracks = detect_anomalies(&frames, &cfg.meltpool.anomaly);
    ensure(tracks.len() == 1, format!("{} tracks", tracks.len()))?;
    let pts = &tracks[0].points;
    let span = pts[pts.len() - 1].t_us - pts[0].t_us + code.window_us() as f64;
    let coverage = span / (anomaly.t_end_us - anomaly.t_start_us) as f64;
    ensure(
        coverage >= MIN_TRACK_COVERAGE,
        format!("coverage {coverage}"),
    )?;

    let scene = Scene::new(cfg.scene.clone(), s.geometry).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = pts
        .iter()
        .filter_map(|p| {
            let (x, y) = scene.anomaly_positions(p.t_us as u64)[0]?;
            Some((p.centroid.0 - x).hypot(p.centroid.1 - y))
        })
        .collect();
    ensure(!errs.is_empty(), "no track point overlaps the anomaly")?;
    let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
    ensure(
        mean_err <= MAX_MEAN_CENTROID_ERR_PX,
        format!("mean error {mean_err} px"),
    )?;

    let mut control = cfg.clone();
    if let SceneSpec::Meltpool(m) = &mut control.scene {
        m.anomalies.clear();
    }
    let (cs, _) = simulate(&control).map_err(|e| e.to_string())?;
    let cframes = frame_sequence(&cs, cfg.framing.stride_us, &code).map_err(|e| e.to_string())?;
    let false_tracks = detect_anomalies(&cframes, &cfg.meltpool.anomaly).len();
    ensure(
        false_tracks == 0,
        format!("{false_tracks} tracks on the control scene"),
    )?;
    Ok(format!(
        "1 track of {} points, coverage {coverage:.3}, mean error {mean_err:.2} px, control 0 tracks",
        pts.len()
    ))
}

fn codec() -> Check {
    let g = SensorGeometry::DAVIS346;
    let s = random_stream(10, 1_000_000, g, 4_000_000);
    let bytes = encode_evt1(&s).map_err(|e| e.to_string())?;
    let back = decode_evt1(&bytes).map_err(|e| e.to_string())?;
    ensure(back == s, "round trip differs")?;

    let mut best = Duration::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        let d = decode_evt1(&bytes).map_err(|e| e.to_string())?;
        best = best.min(t.elapsed());
        ensure(d.len() == s.len(), "length changed")?;
    }
    let rate = s.len() as f64 / best.as_secs_f64();
    ensure(
        rate >= MIN_DECODE_EVENTS_PER_S,
        format!("decode {rate:.3e} ev/s"),
    )?;

    let small = encode_evt1(&random_stream(
        11,
        200,
        SensorGeometry::new(40, 30).unwrap(),
        5_000,
    ))
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut errors, cases) = (0, 20_000);
    for case in 0..cases {
        let mut b = small.clone();
        match case % 4 {
            0 => b.truncate(rng.random_range(0..b.len())),
            1 => {
                b = (0..rng.random_range(0..300))
                    .map(|_| rng.random())
                    .collect()
            }
            _ => {
                for _ in 0..rng.random_range(1..6) {
                    let i = rng.random_range(0..b.len());
                    b[i] ^= 1 << rng.random_range(0..8);
                }
            }
        }
        match catch_unwind(AssertUnwindSafe(|| decode_evt1(&b))) {
            Err(_) => return Err(format!("decoder panicked on case {case}")),
            Ok(Err(_)) => errors += 1,
            Ok(Ok(d)) => ensure(
                d.validate().ok,
                format!("case {case} decoded to an invalid stream"),
            )?,
        }
    }
    Ok(format!(
        "1e6 round trip exact, decode {:.1} M ev/s, {cases} fuzz cases ({errors} typed errors, no panics)",
        rate / 1e6
    ))
}

fn hash_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("output dir readable") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(
                    rel,
                    Sha256::digest(std::fs::read(&p).expect("artifact")).to_vec(),
                );
            }
        }
    }
    out
}

fn determinism() -> Check {
    let mut files = 0;
    for demo in ["demo-fig4", "demo-fig6", "demo-fig8", "demo-fig10"] {
        let runs: Vec<BTreeMap<String, Vec<u8>>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
                let out = Command::new(env!("CARGO_BIN_EXE_evmelt"))
                    .args([demo, "--seed", "1", "--out"])
                    .arg(dir.path())
                    .output()
                    .map_err(|e| e.to_string())?;
                ensure(
                    out.status.success(),
                    format!("{demo}: {}", String::from_utf8_lossy(&out.stderr)),
                )?;
                Ok(hash_tree(dir.path()))
            })
            .collect::<Result<_, String>>()?;
        ensure(runs[0].len() > 1, format!("{demo} wrote nothing"))?;
        ensure(runs[0] == runs[1], format!("{demo} artifacts differ"))?;
        files += runs[0].len();
    }
    Ok(format!(
        "4 demos x 2 runs, {files} artifacts hash-identical"
    ))
}

fn main() {
    let weld = demo_config(Sub::DemoFig6);
    let weld_stream = std::cell::OnceCell::new();
    let weld_events = || -> Result<&EventStream, String> {
        if weld_stream.get().is_none() {
            let (s, _) = simulate(&weld).map_err(|e| e.to_string())?;
            let _ = weld_stream.set(s);
        }
        Ok(weld_stream.get().expect("just set"))
    };

    let criteria: Vec<Criterion> = vec![
        (
            "dynamic-range arithmetic",
            Duration::from_secs(1),
            Box::new(dynamic_range),
        ),
        (
            "memory savings of the laser-weld scene",
            Duration::from_secs(30),
            Box::new(|| memory_savings(weld_events()?, &weld)),
        ),
        ("step oracle", Duration::from_secs(5), Box::new(step_oracle)),
        ("rate law", Duration::from_secs(10), Box::new(rate_law)),
        (
            "boxcar equivalence",
            Duration::from_secs(10),
            Box::new(boxcar_equivalence),
        ),
        (
            "coded-exposure frequency selectivity",
            Duration::from_secs(10),
            Box::new(frequency_selectivity),
        ),
        (
            "balloon-pop adaptive sampling",
            Duration::from_secs(30),
            Box::new(balloon_pop),
        ),
        (
            "keyhole aspect-ratio tracking",
            Duration::from_secs(60),
            Box::new(|| keyhole_aspect_ratio(weld_events()?, &weld)),
        ),
        (
            "anomaly tracking",
            Duration::from_secs(60),
            Box::new(anomaly_tracking),
        ),
        ("codec", Duration::from_secs(30), Box::new(codec)),
        (
            "determinism",
            Duration::from_secs(120),
            Box::new(determinism),
        ),
    ];

    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let took = start.elapsed();
                ensure(
                    took <= *budget,
                    format!("took {took:.1?}, budget {budget:?}"),
                )?;
                Ok(detail)
            });
        let took = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.1} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{took:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
