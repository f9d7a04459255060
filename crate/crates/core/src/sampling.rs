//! Deterministic pseudo-random sample points for the property drivers and
//! tests. SplitMix64 keeps the sequence stable across platforms without
//! pulling RNG state into library behavior.

/// SplitMix64 stream seeded by `seed`.
pub fn splitmix_stream(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed;
    move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        // uniform in [-1, 1)
        (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

/// `count` points with `dims` coordinates each, uniform in [-1, 1).
pub fn splitmix_points(seed: u64, count: usize, dims: usize) -> Vec<Vec<f64>> {
    let mut next = splitmix_stream(seed);
    (0..count)
        .map(|_| (0..dims).map(|_| next()).collect())
        .collect()
}
