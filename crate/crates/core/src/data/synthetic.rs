//! Seeded synthetic datasets used by tests, examples and the experiment runner.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Dataset;
use crate::error::Result;
use crate::rng;
use crate::scalar::Real;

/// Two balanced classes with ten unit-variance normal features. Class 0 is
/// centred at the origin; class 1 has means spaced linearly from 0 to 1, so
/// the features range from useless to mildly informative.
pub fn graded_normal<T: Real>(n: usize, seed: u64) -> Result<Dataset<T>> {
    let mut rng = rng::stream(seed, rng::SYNTH_STREAM);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let d = 10;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as u32;
        let row = (0..d)
            .map(|j| {
                let mean = if class == 1 { j as f64 / (d - 1) as f64 } else { 0.0 };
                T::of(mean + std.sample(&mut rng))
            })
            .collect();
        rows.push(row);
        labels.push(class);
    }
    Dataset::classification(&rows, &labels)
}

/// Two spherical Gaussian clusters whose centres are `separation` standard
/// deviations apart along the first axis.
pub fn separated_clusters<T: Real>(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset<T>> {
    let mut rng = rng::stream(seed, rng::SYNTH_STREAM);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as u32;
        let row = (0..d)
            .map(|j| {
                let shift = if j == 0 && class == 1 { separation } else { 0.0 };
                T::of(shift + std.sample(&mut rng))
            })
            .collect();
        rows.push(row);
        labels.push(class);
    }
    Dataset::classification(&rows, &labels)
}

/// Friedman #1 regression: ten uniform features, five of them informative,
/// unit Gaussian noise.
pub fn friedman1<T: Real>(n: usize, seed: u64) -> Result<Dataset<T>> {
    let mut rng = rng::stream(seed, rng::SYNTH_STREAM);
    let unit = Uniform::new(0.0, 1.0).expect("unit interval");
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..10).map(|_| rng.sample(unit)).collect();
        let target = 10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
            + 20.0 * (x[2] - 0.5).powi(2)
            + 10.0 * x[3]
            + 5.0 * x[4]
            + noise.sample(&mut rng);
        rows.push(x.into_iter().map(T::of).collect());
        y.push(T::of(target));
    }
    Dataset::regression(&rows, &y)
}

/// `k` Gaussian blobs in `d` dimensions with centres on a scaled simplex-ish
/// lattice; a multi-class counterpart to [`separated_clusters`].
pub fn blobs<T: Real>(n: usize, d: usize, k: usize, spread: f64, seed: u64) -> Result<Dataset<T>> {
    let mut rng = rng::stream(seed, rng::SYNTH_STREAM);
    let noise = Normal::new(0.0, spread).expect("positive spread");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % k;
        let row = (0..d)
            .map(|j| {
                let centre = if j % k == class { 2.0 } else { 0.0 };
                T::of(centre + noise.sample(&mut rng))
            })
            .collect();
        rows.push(row);
        labels.push(class as u32);
    }
    Dataset::classification(&rows, &labels)
}
