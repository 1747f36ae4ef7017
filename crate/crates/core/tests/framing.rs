mod common;

use common::random_stream;
use evmelt::framing::{accumulate, coded_frame, frame_sequence, ExposureCode, Frame};
use evmelt::sim::{simulate_scene, EdgeSpec, FlickerSpec, SceneSpec, SensorModel};
use evmelt::{Event, EventStream, Polarity, SensorGeometry};
use proptest::prelude::*;

fn add(a: &Frame, b: &Frame) -> Vec<f64> {
    a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect()
}

#[test]
fn hand_sum_in_one_pixel() {
    let g = SensorGeometry::new(4, 3).unwrap();
    let s = EventStream::new(
        g,
        vec![
            Event::new(10, 2, 1, Polarity::On),
            Event::new(11, 2, 1, Polarity::On),
            Event::new(12, 2, 1, Polarity::Off),
        ],
    );
    let f = accumulate(&s, 0, 100).unwrap();
    assert_eq!(f.get(2, 1), 1.0);
    assert_eq!(f.values.iter().filter(|v| **v != 0.0).count(), 1);
    assert!(accumulate(&EventStream::empty(g), 0, 5)
        .unwrap()
        .values
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn bandpass_peak_weight_is_one() {
    let g = SensorGeometry::new(1, 1).unwrap();
    let code = ExposureCode::bandpass(10_000, 300.0).unwrap();
    let s = EventStream::new(g, vec![Event::new(5_000 + 70, 0, 0, Polarity::Off)]);
    assert_eq!(coded_frame(&s, &code, 70).values, [-1.0]);
}

#[test]
fn all_plus_flutter_equals_boxcar() {
    let s = random_stream(3, 20_000, SensorGeometry::DVS240, 50_000);
    let flutter = ExposureCode::flutter_from_chips(20_000, vec![1; 13]).unwrap();
    let boxcar = ExposureCode::boxcar(20_000).unwrap();
    assert_eq!(
        coded_frame(&s, &flutter, 7_000).values,
        coded_frame(&s, &boxcar, 7_000).values
    );
}

#[test]
fn sequence_counts() {
    let g = SensorGeometry::new(2, 2).unwrap();
    let s = EventStream::new(
        g,
        vec![
            Event::new(0, 0, 0, Polarity::On),
            Event::new(10_000, 1, 1, Polarity::On),
        ],
    );
    let code = ExposureCode::boxcar(1_000).unwrap();
    assert_eq!(frame_sequence(&s, 1_000, &code).unwrap().len(), 10);

    let whole = ExposureCode::boxcar(10_001).unwrap();
    let frames = frame_sequence(&s, 10_001, &whole).unwrap();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].values, accumulate(&s, 0, 10_001).unwrap().values);
}

#[test]
fn flicker_energy_concentrates_at_its_frequency() {
    let g = SensorGeometry::new(32, 24).unwrap();
    let f0 = 50.0;
    let spec = SceneSpec::Flicker(FlickerSpec {
        level: 10.0,
        amplitude: 0.6,
        freq_hz: f0,
    });
    let model = SensorModel {
        mismatch_sigma: 0.05,
        rng_seed: 1,
        ..SensorModel::default()
    };
    let (s, _) = simulate_scene(&spec, g, 300_000, 2000.0, &model).unwrap();
    for &(window, t0) in &[(100_000, 0), (100_000, 137_000), (60_000, 20_000)] {
        let on = coded_frame(&s, &ExposureCode::bandpass(window, f0).unwrap(), t0).energy();
        let off = coded_frame(&s, &ExposureCode::bandpass(window, 4.0 * f0).unwrap(), t0).energy();
        assert!(on >= 5.0 * off, "window {window} t0 {t0}: {on} vs {off}");
    }
}

#[test]
fn motion_blur_grows_with_window() {
    let g = SensorGeometry::new(120, 20).unwrap();
    let spec = SceneSpec::TranslatingEdge(EdgeSpec::default());
    let (s, _) = simulate_scene(&spec, g, 40_000, 5000.0, &SensorModel::default()).unwrap();
    let mut last = 0;
    for window in (1..=30).map(|k| k * 1_000) {
        let f = accumulate(&s, 5_000, window).unwrap();
        let support = f.values.iter().filter(|v| v.abs() > 0.0).count();
        assert!(support >= last, "window {window}: {support} < {last}");
        last = support;
    }
    assert!(last > 20 * 40);
}

fn codes() -> impl Strategy<Value = ExposureCode> {
    prop_oneof![
        (1u64..50_000).prop_map(|w| ExposureCode::boxcar(w).unwrap()),
        (1u64..50_000, 1usize..40, any::<u64>())
            .prop_map(|(w, n, s)| ExposureCode::flutter(w, n, s).unwrap()),
        (1u64..50_000, 1.0f64..5_000.0).prop_map(|(w, f)| ExposureCode::bandpass(w, f).unwrap()),
    ]
}

proptest! {
    #[test]
    fn boxcar_equals_accumulate(seed in any::<u64>(), window in 1u64..60_000, t0 in 0u64..60_000) {
        let s = random_stream(seed, 5_000, SensorGeometry::new(40, 30).unwrap(), 100_000);
        let code = ExposureCode::boxcar(window).unwrap();
        prop_assert_eq!(coded_frame(&s, &code, t0).values, accumulate(&s, t0, window).unwrap().values);
    }

    #[test]
    fn coded_frames_are_linear(sa in any::<u64>(), sb in any::<u64>(), code in codes(), t0 in 0u64..50_000) {
        let g = SensorGeometry::new(16, 16).unwrap();
        let a = random_stream(sa, 2_000, g, 100_000);
        let b = random_stream(sb, 2_000, g, 100_000);
        let merged = coded_frame(&a.merge(&b).unwrap(), &code, t0);
        let sum = add(&coded_frame(&a, &code, t0), &coded_frame(&b, &code, t0));
        let exact = !matches!(code, ExposureCode::Bandpass { .. });
        for (m, s) in merged.values.iter().zip(&sum) {
            if exact {
                prop_assert_eq!(m, s);
            } else {
                prop_assert!((m - s).abs() <= 1e-9 * m.abs().max(s.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn boxcar_tiling_partitions_the_stream(seed in any::<u64>(), stride in 1u64..20_000) {
        let s = random_stream(seed, 3_000, SensorGeometry::new(20, 10).unwrap(), 100_000);
        let code = ExposureCode::boxcar(stride).unwrap();
        let frames = frame_sequence(&s, stride, &code).unwrap();
        let first = s.first_t().unwrap();
        let last = s.last_t().unwrap();
        // the final event may sit exactly on the last window boundary
        let covered_to = frames.last().map_or(first, |f| f.t_start_us + stride);
        let mut total = vec![0.0; 200];
        for f in &frames {
            for (t, v) in total.iter_mut().zip(&f.values) {
                *t += v;
            }
        }
        let reference = accumulate(&s, first, covered_to - first).unwrap();
        prop_assert_eq!(total, reference.values);
        prop_assert!(covered_to >= last);
    }
}
