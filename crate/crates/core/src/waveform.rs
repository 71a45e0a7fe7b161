//! Multi-source complex waveforms, sparse down-sampled streams and per-sensor
//! narrowband snapshots.
//!
//! Noise is counter-based: the draw for `(seed, stream, index)` does not depend
//! on which other indices were requested, so streams can be generated lazily on
//! exactly the index set a schedule demands.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default minimum circular separation between source frequencies.
pub const DEFAULT_MIN_SEPARATION: f64 = TAU / 1000.0;

/// One complex exponential `A·e^{j(ωt + φ)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub amplitude: f64,
    /// Radians per Nyquist sample.
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    sources: Vec<Source>,
}

impl SourceSet {
    pub fn new(sources: Vec<Source>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::invalid("a source set needs at least one source"));
        }
        for s in &sources {
            if !(s.amplitude.is_finite() && s.amplitude > 0.0) {
                return Err(Error::invalid(format!(
                    "amplitude {} is not positive",
                    s.amplitude
                )));
            }
            if !s.frequency.is_finite() || !s.phase.is_finite() {
                return Err(Error::invalid("source frequency and phase must be finite"));
            }
        }
        Ok(Self { sources })
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.frequency).collect()
    }

    /// `Σ A_i²`, the signal power entering the SNR definition.
    pub fn power(&self) -> f64 {
        self.sources.iter().map(|s| s.amplitude * s.amplitude).sum()
    }

    /// `Σ A_i^order · e^{j(ω_i k + φ_i·[order = 3])}` evaluated at lag `k`.
    ///
    /// Order 2 is the autocorrelation, order 3 the limit of the triple-product
    /// statistic.
    pub fn moment(&self, order: u8, k: i64) -> Complex64 {
        self.sources
            .iter()
            .map(|s| {
                let phase = if order == 3 { s.phase } else { 0.0 };
                Complex64::from_polar(
                    s.amplitude.powi(i32::from(order)),
                    s.frequency * k as f64 + phase,
                )
            })
            .sum()
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    wrap_angle(x - y).abs()
}

/// `count` sorted points in `[lo, lo + width]` with consecutive gaps of at least `sep`,
/// uniform over all such configurations.
fn spaced_points<R: Rng>(rng: &mut R, count: usize, lo: f64, free: f64, sep: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * free).collect();
    u.sort_by(f64::total_cmp);
    u.iter()
        .enumerate()
        .map(|(i, &x)| lo + x + i as f64 * sep)
        .collect()
}

/// Draws `d` sources with pairwise circular frequency gaps of at least `min_sep`,
/// amplitudes uniform in `amp_range` and phases uniform in `[0, 2π)`.
pub fn random_sources(
    d: usize,
    min_sep: f64,
    amp_range: (f64, f64),
    seed: u64,
) -> Result<SourceSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_sources_with(&mut rng, d, min_sep, amp_range)
}

pub(crate) fn random_sources_with<R: Rng>(
    rng: &mut R,
    d: usize,
    min_sep: f64,
    amp_range: (f64, f64),
) -> Result<SourceSet> {
    if d == 0 {
        return Err(Error::invalid("at least one source is required"));
    }
    if !(min_sep.is_finite() && min_sep >= 0.0) {
        return Err(Error::invalid("minimum separation must be nonnegative"));
    }
    let (lo, hi) = amp_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::invalid(format!(
            "amplitude range ({lo}, {hi}) is not valid"
        )));
    }
    let sep = if d == 1 { 0.0 } else { min_sep };
    let free = TAU - d as f64 * sep;
    if free <= 0.0 {
        return Err(Error::invalid(format!(
            "{d} sources cannot be separated by {min_sep} rad on the circle"
        )));
    }
    let offset = rng.random::<f64>() * TAU;
    let freqs = spaced_points(rng, d, offset, free, sep);
    let sources = freqs
        .into_iter()
        .map(|f| Source {
            amplitude: if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            },
            frequency: wrap_angle(f),
            phase: rng.random::<f64>() * TAU,
        })
        .collect();
    SourceSet::new(sources)
}

/// The noiseless waveform `Σ A_i e^{j(ω_i t + φ_i)}` at Nyquist tick `t`.
pub fn sample_at(s: &SourceSet, t: i128) -> Complex64 {
    let t = t as f64;
    s.sources
        .iter()
        .map(|src| Complex64::from_polar(src.amplitude, src.frequency * t + src.phase))
        .sum()
}

/// Circularly-symmetric complex Gaussian noise of power `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub seed: u64,
    pub stream: u64,
}

// Each draw owns a 2^20-word window of the ChaCha keystream.
const WORDS_PER_DRAW: u32 = 20;

impl NoiseSpec {
    pub fn new(sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::invalid(format!("noise power {sigma2} must be >= 0")));
        }
        Ok(Self {
            sigma2,
            seed,
            stream: 0,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma2: 0.0,
            seed: 0,
            stream: 0,
        }
    }

    /// An independent stream under the same seed.
    pub fn substream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// The noise value at `counter`; a pure function of `(seed, stream, counter)`.
    pub fn draw(&self, counter: u64) -> Complex64 {
        if self.sigma2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(u128::from(counter) << WORDS_PER_DRAW);
        let scale = (self.sigma2 / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    }
}

/// Samples `x(n·M·T_s) + w(n)` held only at the indices that were requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    rate: u64,
    values: BTreeMap<u64, Complex64>,
}

impl SampleStream {
    pub fn rate(&self) -> u64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: u64) -> Result<Complex64> {
        self.values
            .get(&index)
            .copied()
            .ok_or(Error::IncompleteStream {
                rate: self.rate,
                index,
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.values.iter().map(|(&n, &v)| (n, v))
    }
}

/// Down-samples the waveform by `rate` on the given sample indices.
pub fn downsample_stream(
    s: &SourceSet,
    rate: u64,
    indices: impl IntoIterator<Item = u64>,
    noise: &NoiseSpec,
) -> SampleStream {
    let values = indices
        .into_iter()
        .map(|n| {
            let t = i128::from(n) * i128::from(rate);
            (n, sample_at(s, t) + noise.draw(n))
        })
        .collect();
    SampleStream { rate, values }
}

/// A far-field narrowband source held constant over one coherence block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarrowbandSource {
    /// Complex envelope `s_i`.
    pub envelope: Complex64,
    /// Direction of arrival in radians from broadside.
    pub direction: f64,
    /// Baseband offset frequency in cycles per snapshot.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandSet {
    sources: Vec<NarrowbandSource>,
}

impl NarrowbandSet {
    pub fn new(sources: Vec<NarrowbandSource>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::invalid("a source set needs at least one source"));
        }
        if sources.iter().any(|s| {
            !(s.envelope.norm().is_finite() && s.direction.is_finite() && s.frequency.is_finite())
        }) {
            return Err(Error::invalid(
                "narrowband source parameters must be finite",
            ));
        }
        Ok(Self { sources })
    }

    pub fn sources(&self) -> &[NarrowbandSource] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn directions(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.direction).collect()
    }

    pub fn power(&self) -> f64 {
        self.sources.iter().map(|s| s.envelope.norm_sqr()).sum()
    }

    /// `Σ |s_i|² s_i e^{jπ g sinθ_i}`, the limit of the plain triple statistic at lag `g`.
    pub fn third_order_lag(&self, g: i64) -> Complex64 {
        self.sources
            .iter()
            .map(|s| s.envelope.norm_sqr() * s.envelope * steering(g, s.direction))
            .sum()
    }

    /// `Σ |s_i|² e^{jπ g sinθ_i}`, the spatial autocorrelation at lag `g`.
    pub fn second_order_lag(&self, g: i64) -> Complex64 {
        self.sources
            .iter()
            .map(|s| s.envelope.norm_sqr() * steering(g, s.direction))
            .sum()
    }
}

/// Parameters for drawing random narrowband scenes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarrowbandPrior {
    /// Direction interval in degrees.
    pub direction_range: (f64, f64),
    pub min_direction_sep: f64,
    /// Frequency interval in cycles per snapshot.
    pub frequency_range: (f64, f64),
    pub min_frequency_sep: f64,
    pub amplitude: f64,
}

impl Default for NarrowbandPrior {
    fn default() -> Self {
        Self {
            direction_range: (-60.0, 60.0),
            min_direction_sep: 1.0,
            frequency_range: (0.02, 0.48),
            min_frequency_sep: 0.03,
            amplitude: 1.0,
        }
    }
}

pub fn random_narrowband(d: usize, prior: &NarrowbandPrior, seed: u64) -> Result<NarrowbandSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_narrowband_with(&mut rng, d, prior)
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn random_narrowband_with<R: Rng>(
    rng: &mut R,
    d: usize,
    prior: &NarrowbandPrior,
) -> Result<NarrowbandSet> {
    if d == 0 {
        return Err(Error::invalid("at least one source is required"));
    }
    if !(prior.amplitude.is_finite() && prior.amplitude > 0.0) {
        return Err(Error::invalid("source amplitude must be positive"));
    }
    let free_span = |(lo, hi): (f64, f64), sep: f64, what: &str| -> Result<f64> {
        let free = (hi - lo) - (d as f64 - 1.0) * sep;
        if !(lo < hi) || !(sep >= 0.0) || free <= 0.0 {
            return Err(Error::invalid(format!(
                "{d} {what} do not fit in ({lo}, {hi}) with separation {sep}"
            )));
        }
        Ok(free)
    };
    let dir_free = free_span(prior.direction_range, prior.min_direction_sep, "directions")?;
    let freq_free = free_span(
        prior.frequency_range,
        prior.min_frequency_sep,
        "frequencies",
    )?;
    let directions = spaced_points(
        rng,
        d,
        prior.direction_range.0,
        dir_free,
        prior.min_direction_sep,
    );
    let mut freqs = spaced_points(
        rng,
        d,
        prior.frequency_range.0,
        freq_free,
        prior.min_frequency_sep,
    );
    freqs.shuffle(rng);
    let sources = directions
        .into_iter()
        .zip(freqs)
        .map(|(deg, f)| NarrowbandSource {
            envelope: Complex64::new(prior.amplitude, 0.0),
            direction: deg.to_radians(),
            frequency: f,
        })
        .collect();
    NarrowbandSet::new(sources)
}

/// Steering phase `e^{jπ·d_l·sinθ}` for a sensor at `position` half-wavelengths.
pub fn steering(position: i64, theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, PI * position as f64 * theta.sin())
}

/// Baseband output of the sensor at `position` for snapshot time `n`.
pub fn sensor_snapshot(s: &NarrowbandSet, position: i64, n: i64, noise: &NoiseSpec) -> Complex64 {
    let signal: Complex64 = s
        .sources
        .iter()
        .map(|src| {
            src.envelope
                * steering(position, src.direction)
                * Complex64::from_polar(1.0, TAU * src.frequency * n as f64)
        })
        .sum();
    signal + noise.draw(n as u64)
}

/// Snapshots at times `n = 1..=snapshots`; element `i` holds time `i + 1`.
pub fn sensor_series(
    s: &NarrowbandSet,
    position: i64,
    snapshots: usize,
    noise: &NoiseSpec,
) -> Vec<Complex64> {
    (1..=snapshots as i64)
        .map(|n| sensor_snapshot(s, position, n, noise))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(amplitude: f64, frequency: f64, phase: f64) -> SourceSet {
        SourceSet::new(vec![Source {
            amplitude,
            frequency,
            phase,
        }])
        .unwrap()
    }

    #[test]
    fn sample_at_examples() {
        let dc = single(1.0, 0.0, 0.0);
        for t in [-7, 0, 3, 1_000_000_007] {
            assert_abs_diff_eq!(sample_at(&dc, t).re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(sample_at(&dc, t).im, 0.0, epsilon = 1e-15);
        }
        let quarter = single(2.0, PI / 2.0, 0.0);
        let v = sample_at(&quarter, 1);
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 2.0, epsilon = 1e-15);
        let two = SourceSet::new(vec![
            Source {
                amplitude: 1.0,
                frequency: 0.3,
                phase: 0.0,
            },
            Source {
                amplitude: 1.0,
                frequency: -1.1,
                phase: 0.0,
            },
        ])
        .unwrap();
        assert_abs_diff_eq!(sample_at(&two, 0).re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn random_sources_respect_separation() {
        let one = random_sources(1, 100.0, (1.0, 1.0), 3).unwrap();
        assert_eq!(one.len(), 1);
        for seed in 0..50 {
            let s = random_sources(5, 0.1, (0.5, 1.5), seed).unwrap();
            let f = s.frequencies();
            for i in 0..f.len() {
                assert!(f[i] > -PI && f[i] <= PI);
                for j in i + 1..f.len() {
                    assert!(circular_distance(f[i], f[j]) >= 0.1 - 1e-12);
                }
            }
            assert!(s
                .sources()
                .iter()
                .all(|x| (0.5..=1.5).contains(&x.amplitude)));
        }
        assert!(matches!(
            random_sources(100, 0.1, (1.0, 1.0), 0),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(
            random_sources(4, 0.2, (1.0, 2.0), 9).unwrap(),
            random_sources(4, 0.2, (1.0, 2.0), 9).unwrap()
        );
    }

    #[test]
    fn phases_are_uniform() {
        // Kolmogorov–Smirnov against U[0, 2π) with the 1% critical value 1.628/√n.
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut phases: Vec<f64> = (0..n)
            .map(|_| {
                random_sources_with(&mut rng, 1, 0.0, (1.0, 1.0))
                    .unwrap()
                    .sources()[0]
                    .phase
            })
            .collect();
        phases.sort_by(f64::total_cmp);
        let ks = phases
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let cdf = p / TAU;
                (cdf - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn noiseless_stream_matches_waveform() {
        let s = random_sources(3, 0.1, (1.0, 1.0), 1).unwrap();
        let stream = downsample_stream(&s, 7, [0, 4, 19], &NoiseSpec::noiseless());
        assert_eq!(stream.len(), 3);
        for (n, v) in stream.iter() {
            assert_eq!(v, sample_at(&s, i128::from(n) * 7));
        }
        assert!(matches!(
            stream.get(5),
            Err(Error::IncompleteStream { rate: 7, index: 5 })
        ));
        let empty = downsample_stream(&s, 7, std::iter::empty(), &NoiseSpec::noiseless());
        assert!(empty.is_empty());
    }

    #[test]
    fn noise_has_requested_power_and_is_circular() {
        let s = single(1.0, 0.4, 0.0);
        let noise = NoiseSpec::new(1.0, 2024).unwrap();
        let n = 100_000u64;
        let stream = downsample_stream(&s, 3, 0..n, &noise);
        let (mut power, mut pseudo) = (0.0, Complex64::new(0.0, 0.0));
        for (i, v) in stream.iter() {
            let w = v - sample_at(&s, i128::from(i) * 3);
            power += w.norm_sqr();
            pseudo += w * w;
        }
        power /= n as f64;
        pseudo /= n as f64;
        assert!((power - 1.0).abs() < 0.05, "power {power}");
        assert!(
            pseudo.norm() < 3.0 / (n as f64).sqrt(),
            "pseudo-variance {pseudo}"
        );
    }

    #[test]
    fn noise_is_counter_based() {
        let noise = NoiseSpec::new(0.5, 11).unwrap();
        let s = single(1.0, 0.0, 0.0);
        let dense = downsample_stream(&s, 2, 0..50, &noise);
        let sparse = downsample_stream(&s, 2, [13, 49], &noise);
        assert_eq!(dense.get(13).unwrap(), sparse.get(13).unwrap());
        assert_eq!(dense.get(49).unwrap(), sparse.get(49).unwrap());
        assert_ne!(noise.draw(3), noise.substream(1).draw(3));
    }

    fn narrowband(direction_deg: f64, frequency: f64) -> NarrowbandSet {
        NarrowbandSet::new(vec![NarrowbandSource {
            envelope: Complex64::new(1.5, 0.0),
            direction: direction_deg.to_radians(),
            frequency,
        }])
        .unwrap()
    }

    #[test]
    fn snapshot_examples() {
        let broadside = narrowband(0.0, 0.1);
        let clean = NoiseSpec::noiseless();
        for pos in [0, 3, 17] {
            let v = sensor_snapshot(&broadside, pos, 4, &clean);
            let expect = Complex64::from_polar(1.5, TAU * 0.1 * 4.0);
            assert_abs_diff_eq!((v - expect).norm(), 0.0, epsilon = 1e-12);
        }
        let tilted = narrowband(30.0, 0.1);
        let at2 = sensor_snapshot(&tilted, 2, 4, &clean);
        let at0 = sensor_snapshot(&tilted, 0, 4, &clean);
        assert_abs_diff_eq!((at2 + at0).norm(), 0.0, epsilon = 1e-12);
        // position 0 does not depend on direction
        assert_abs_diff_eq!(
            (at0 - sensor_snapshot(&broadside, 0, 4, &clean)).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_eq!(
            sensor_series(&tilted, 5, 6, &clean),
            sensor_series(&tilted, 5, 6, &clean)
        );
    }

    #[test]
    fn random_narrowband_respects_prior() {
        let prior = NarrowbandPrior::default();
        for seed in 0..20 {
            let s = random_narrowband(10, &prior, seed).unwrap();
            let mut dirs: Vec<f64> = s.directions().iter().map(|d| d.to_degrees()).collect();
            dirs.sort_by(f64::total_cmp);
            assert!(dirs.windows(2).all(|w| w[1] - w[0] >= 1.0 - 1e-9));
            assert!(dirs.iter().all(|d| (-60.0..=60.0).contains(d)));
            let mut f: Vec<f64> = s.sources().iter().map(|x| x.frequency).collect();
            f.sort_by(f64::total_cmp);
            assert!(f.windows(2).all(|w| w[1] - w[0] >= 0.03 - 1e-12));
            assert!(f.iter().all(|&x| x > 0.0 && x < 0.5));
        }
        let crowded = NarrowbandPrior {
            min_direction_sep: 20.0,
            ..prior
        };
        assert!(random_narrowband(10, &crowded, 0).is_err());
    }
}
