mod common;

use common::random_stream;
use evmelt::codec::{decode_evt1, encode_evt1, encoded_len, read_csv, write_csv, Evt1Error};
use evmelt::{Event, EventStream, Polarity, SensorGeometry};
use proptest::prelude::*;

const GOLDEN: &[u8] = include_bytes!("fixtures/three_events.evt1");

fn golden_stream() -> EventStream {
    EventStream::new(
        SensorGeometry::new(16, 8).unwrap(),
        vec![
            Event::new(1000, 3, 5, Polarity::On),
            Event::new(1000, 4, 5, Polarity::Off),
            Event::new(1250, 15, 7, Polarity::On),
        ],
    )
}

#[test]
fn golden_fixture_encodes_bit_exact() {
    assert_eq!(encode_evt1(&golden_stream()).unwrap(), GOLDEN);
    assert_eq!(decode_evt1(GOLDEN).unwrap(), golden_stream());
}

#[test]
fn one_event_is_33_bytes() {
    let s = EventStream::new(
        SensorGeometry::DVS240,
        vec![Event::new(7, 3, 5, Polarity::On)],
    );
    assert_eq!(encode_evt1(&s).unwrap().len(), 33);
    assert_eq!(
        encode_evt1(&EventStream::empty(SensorGeometry::DVS240))
            .unwrap()
            .len(),
        25
    );
}

#[test]
fn round_trip_million_events() {
    let s = random_stream(11, 1_000_000, SensorGeometry::DAVIS346, 60_000_000);
    let bytes = encode_evt1(&s).unwrap();
    assert_eq!(bytes.len(), encoded_len(s.len()));
    assert_eq!(decode_evt1(&bytes).unwrap(), s);
}

#[test]
fn csv_round_trip_hundred_thousand() {
    let s = random_stream(12, 100_000, SensorGeometry::DVS240, 10_000_000);
    assert_eq!(read_csv(&write_csv(&s), s.geometry).unwrap(), s);
}

#[test]
fn corrupted_headers_give_typed_errors() {
    let mut b = GOLDEN.to_vec();
    b[0] = b'X';
    assert!(matches!(decode_evt1(&b), Err(Evt1Error::BadMagic(_))));

    let mut b = GOLDEN.to_vec();
    b[4] = 2;
    assert!(matches!(
        decode_evt1(&b),
        Err(Evt1Error::UnsupportedVersion(2))
    ));

    let mut b = GOLDEN.to_vec();
    b.truncate(GOLDEN.len() - 8);
    assert!(matches!(
        decode_evt1(&b),
        Err(Evt1Error::TruncatedBody {
            declared: 3,
            available: 2
        })
    ));

    // second record: x = 16 on a 16-wide sensor
    let mut b = GOLDEN.to_vec();
    b[37] = 16;
    assert!(matches!(
        decode_evt1(&b),
        Err(Evt1Error::OutOfBounds { index: 1, .. })
    ));

    // second delta raised above the third
    let mut b = GOLDEN.to_vec();
    b[33] = 251;
    assert!(matches!(
        decode_evt1(&b),
        Err(Evt1Error::NonMonotone { index: 2 })
    ));
}

fn small_geometry() -> impl Strategy<Value = SensorGeometry> {
    (1u32..64, 1u32..64).prop_map(|(w, h)| SensorGeometry::new(w, h).unwrap())
}

proptest! {
    #[test]
    fn evt1_round_trip(seed in any::<u64>(), n in 0usize..2000, g in small_geometry(), span in 1u64..5_000_000) {
        let s = random_stream(seed, n, g, span);
        let bytes = encode_evt1(&s).unwrap();
        prop_assert_eq!(bytes.len(), 25 + 8 * n);
        prop_assert_eq!(decode_evt1(&bytes).unwrap(), s);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 0usize..500, g in small_geometry()) {
        let s = random_stream(seed, n, g, 1_000_000);
        prop_assert_eq!(read_csv(&write_csv(&s), g).unwrap(), s);
    }

    #[test]
    fn fuzzed_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_evt1(&bytes);
    }

    #[test]
    fn mutated_golden_never_panics(pos in 0usize..49, val in any::<u8>(), cut in 0usize..=49) {
        let mut b = GOLDEN.to_vec();
        b[pos] = val;
        b.truncate(cut);
        if let Ok(s) = decode_evt1(&b) {
            prop_assert!(s.validate().ok);
        }
    }
}
