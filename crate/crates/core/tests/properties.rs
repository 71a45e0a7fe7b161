use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diosense::arrays::{coarray_lags, design_coprime_array, design_diophantine_array, lag_triples};
use diosense::diophantine::{
    build_schedule, consecutive_scheme, enumerate_triplets, ext_gcd, solvable_triplet_ceiling,
    solve_scheme, triplet_count, SamplerSet,
};
use diosense::moments::{diophantine_third_order, LagMomentSequence};
use diosense::spectral::{
    build_hankel, default_rows, estimate, music_spectrum, noise_subspace, pick_peaks, GridSpec,
};
use diosense::waveform::{
    circular_distance, downsample_stream, random_sources, NoiseSpec, SourceSet,
};

fn pairwise_coprime(v: [u64; 3]) -> bool {
    let g = |mut a: u64, mut b: u64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    g(v[0], v[1]) == 1 && g(v[0], v[2]) == 1 && g(v[1], v[2]) == 1
}

#[test]
fn ext_gcd_bezout_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100_000 {
        let x: i64 = rng.random_range(-1_000_000_000_000..1_000_000_000_000);
        let y: i64 = rng.random_range(-1_000_000_000_000..1_000_000_000_000);
        let (g, u, v) = ext_gcd(x, y).unwrap();
        assert_eq!(
            i128::from(u) * i128::from(x) + i128::from(v) * i128::from(y),
            i128::from(g)
        );
        assert!(g >= 0);
        if g > 0 {
            assert_eq!(x % g, 0);
            assert_eq!(y % g, 0);
        }
    }
}

#[test]
fn emitted_schemes_satisfy_identities() {
    for n in [10usize, 30, 50, 60] {
        let samplers = SamplerSet::consecutive(n, 0).unwrap();
        let schemes = enumerate_triplets(&samplers);
        assert!(schemes.len() as u64 <= solvable_triplet_ceiling(samplers.rates()));
        if n >= 50 {
            assert!(schemes.len() as f64 / triplet_count(n) as f64 >= 0.607);
        }
        for s in schemes {
            let m = s.rates();
            let dot = |v: [i64; 3]| {
                (0..3)
                    .map(|i| i128::from(v[i]) * i128::from(m[i]))
                    .sum::<i128>()
            };
            assert_eq!(dot(s.a()), 0);
            assert_eq!(dot(s.b()), 1);
            assert!(s.is_shift_invariant());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shift_invariance(m1 in 1u64..200, m2 in 1u64..200, m3 in 1u64..200, gamma in 0u64..2_000_000) {
        prop_assume!(m1 != m2 && m2 != m3 && m1 != m3);
        if let Ok(s) = solve_scheme([m1, m2, m3]) {
            let shifted = s.shifted(gamma).unwrap();
            prop_assert!(shifted.validate().is_ok());
            prop_assert_eq!(shifted.a(), s.a());
            prop_assert_eq!(shifted.b(), s.b());
        }
    }

    #[test]
    fn schedule_reproduces_every_lag(m1 in 1u64..60, m2 in 1u64..60, m3 in 1u64..60, k in 1u64..40, l in 1u64..40) {
        prop_assume!(m1 != m2 && m2 != m3 && m1 != m3);
        if let Ok(s) = solve_scheme([m1, m2, m3]) {
            let sched = build_schedule(&s, k, l).unwrap();
            prop_assert_eq!(sched.entries().len() as u64, k * l);
            for e in sched.entries() {
                prop_assert_eq!(sched.effective_lag(e), i128::from(e.k));
            }
        }
    }

    #[test]
    fn peaks_ignore_complex_scaling(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let s = random_sources(2, 0.6, (0.5, 1.5), seed).unwrap();
        let values: Vec<Complex64> = (0..24).map(|k| s.moment(3, k)).collect();
        let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
        let grid = GridSpec::Frequency { points: 1024 };
        let a = estimate(&seq, 2, grid).unwrap();
        let b = estimate(&seq.scaled(Complex64::new(re, im)), 2, grid).unwrap();
        for (x, y) in a.locations.iter().zip(&b.locations) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_rank_subspace_is_orthogonal_to_sources() {
    for seed in 0..30 {
        let d = 1 + (seed as usize % 4);
        let k = 4 * d + 2 + (seed as usize % 7);
        let s = random_sources(d, 2.0 * PI * 4.0 / k as f64, (0.5, 1.5), seed).unwrap();
        let values: Vec<Complex64> = (0..k as i64).map(|lag| s.moment(3, lag)).collect();
        let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
        let h = build_hankel(&seq, default_rows(k)).unwrap();
        let basis = noise_subspace(&h, d).unwrap();
        let p = basis.nrows();
        for w in s.frequencies() {
            let v: Vec<Complex64> = (0..p)
                .map(|i| Complex64::from_polar(1.0 / (p as f64).sqrt(), w * i as f64))
                .collect();
            let norm: f64 = basis
                .column_iter()
                .map(|c| {
                    c.iter()
                        .zip(&v)
                        .map(|(u, e)| u.conj() * e)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            assert!(norm < 1e-6, "seed {seed}: {norm}");
        }
    }
}

#[test]
fn exact_moments_recover_sources_for_several_orders() {
    let grid = GridSpec::DEFAULT_FREQUENCY;
    for d in 1..=4usize {
        let k = 16 * d + 2;
        for seed in 0..10 {
            let s = random_sources(d, 2.0 * PI * 10.0 / k as f64, (0.5, 1.5), 77 + seed).unwrap();
            let values: Vec<Complex64> = (0..k as i64).map(|lag| s.moment(3, lag)).collect();
            let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
            let peaks = estimate(&seq, d, grid).unwrap();
            let mut truth = s.frequencies();
            truth.sort_by(f64::total_cmp);
            let best = (0..d)
                .map(|shift| {
                    (0..d)
                        .map(|i| circular_distance(peaks.locations[(i + shift) % d], truth[i]))
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best <= grid.step(), "d={d} seed={seed}: {best}");
        }
    }
}

#[test]
fn refinement_stays_within_a_grid_step() {
    let grid = GridSpec::Frequency { points: 512 };
    let x = grid.abscissae().unwrap();
    for seed in 0..20 {
        let s = random_sources(3, 0.5, (0.5, 1.5), seed).unwrap();
        let values: Vec<Complex64> = (0..20).map(|k| s.moment(3, k)).collect();
        let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
        let basis = noise_subspace(&build_hankel(&seq, 10).unwrap(), 3).unwrap();
        let spec = music_spectrum(&basis, grid).unwrap();
        let peaks = pick_peaks(&spec, 3).unwrap();
        for loc in peaks.locations {
            let nearest = x
                .iter()
                .map(|&g| circular_distance(g, loc))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= grid.step() / 2.0 + 1e-12);
        }
    }
}

#[test]
fn third_order_bias_shrinks_with_snapshots() {
    let mean_error = |l: u64| -> f64 {
        let mut total = 0.0;
        for seed in 0..10 {
            let s: SourceSet = random_sources(3, 0.1, (0.5, 1.5), 500 + seed).unwrap();
            let scheme = consecutive_scheme(0).unwrap();
            let sched = build_schedule(&scheme, 8, l).unwrap();
            let demands = sched.demands();
            let streams: Vec<_> = (0..3)
                .map(|i| {
                    downsample_stream(
                        &s,
                        scheme.rates()[i],
                        demands[i].iter().copied(),
                        &NoiseSpec::noiseless(),
                    )
                })
                .collect();
            let seq =
                diophantine_third_order([&streams[0], &streams[1], &streams[2]], &sched).unwrap();
            total += seq
                .lags()
                .iter()
                .zip(seq.values())
                .map(|(&k, v)| (v - s.moment(3, k)).norm())
                .fold(0.0, f64::max);
        }
        total / 10.0
    };
    let errors: Vec<f64> = [10, 100, 1000].into_iter().map(mean_error).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn theorem_coverage_spacing_and_round_trip() {
    for p1 in 2..=8u64 {
        for p2 in 2..=8 {
            for q in 2..=8 {
                if !pairwise_coprime([p1, p2, q]) {
                    continue;
                }
                let g = design_diophantine_array(p1, p2, q).unwrap();
                let r = coarray_lags(&g);
                let s = (p1 * p2 * q) as i64;
                assert!((-s..=s).all(|lag| r.contains(lag)), "({p1},{p2},{q})");
                assert!(r.span >= s);
                assert_eq!(
                    r.min_spacing,
                    Some(p1.min(p2).min(q) as i64),
                    "({p1},{p2},{q})"
                );
                for (&lag, &count) in &r.witness_counts {
                    assert_eq!(lag_triples(&g, lag).unwrap().len(), count);
                }
            }
        }
    }
}

#[test]
fn coprime_baseline_contains_its_window() {
    for (m1, m2) in [(2u64, 3u64), (3, 5), (5, 3), (7, 4), (4, 7), (5, 6)] {
        let r = coarray_lags(&design_coprime_array(m1, m2).unwrap());
        let s = (m1 * m2) as i64;
        assert!((-s..=s).all(|lag| r.contains(lag)));
        assert_eq!(r.span, s + m2 as i64 - 1, "({m1},{m2})");
    }
}

#[test]
fn delays_are_gamma_invariant_schedules() {
    let base = consecutive_scheme(0).unwrap();
    let far = consecutive_scheme(1_000_000).unwrap();
    let a = build_schedule(&base, 20, 20).unwrap();
    let b = build_schedule(&far, 20, 20).unwrap();
    for (x, y) in a.entries().iter().zip(b.entries()) {
        assert_eq!(x.indices, y.indices);
        assert_eq!(b.effective_lag(y), i128::from(y.k));
    }
}
