#![allow(dead_code)]

use evmelt::{Event, EventStream, Polarity, SensorGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sorted random stream with timestamps in `[0, span_us)`; roughly one in
/// eight events shares the previous timestamp.
pub fn random_stream(seed: u64, n: usize, geometry: SensorGeometry, span_us: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts: Vec<u64> = (0..n)
        .map(|_| rng.random_range(0..span_us.max(1)))
        .collect();
    ts.sort_unstable();
    for i in 1..n {
        if rng.random_ratio(1, 8) {
            ts[i] = ts[i - 1];
        }
    }
    let events = ts
        .into_iter()
        .map(|t| {
            let x = rng.random_range(0..geometry.width());
            let y = rng.random_range(0..geometry.height());
            let p = if rng.random_bool(0.5) {
                Polarity::On
            } else {
                Polarity::Off
            };
            Event::new(t, x, y, p)
        })
        .collect();
    EventStream::new(geometry, events)
}
