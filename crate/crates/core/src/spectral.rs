//! Hankel-subspace MUSIC on lag moment sequences.
//!
//! Third-order sequences carry complex weights `A³e^{jφ}` and are not Hermitian
//! autocorrelations, so the sequence goes into a one-sided Hankel matrix whose
//! column space is spanned by the Vandermonde vectors of the source frequencies.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::LagMomentSequence;
use crate::waveform::circular_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    first_lag: i64,
    matrix: DMatrix<Complex64>,
}

impl HankelMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn first_lag(&self) -> i64 {
        self.first_lag
    }

    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        self.matrix[(p, q)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

/// Default row count `⌈(K+1)/2⌉` for a length-`K` sequence.
pub fn default_rows(len: usize) -> usize {
    (len + 1).div_ceil(2).min(len)
}

pub fn build_hankel(seq: &LagMomentSequence, rows: usize) -> Result<HankelMatrix> {
    let n = seq.len();
    if rows == 0 || rows > n {
        return Err(Error::invalid(format!(
            "Hankel rows {rows} must be in 1..={n}"
        )));
    }
    let lags = seq.lags();
    if lags.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::invalid("Hankel construction needs consecutive lags"));
    }
    if let Some(i) = seq.counts().iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("lag {} has no samples", lags[i])));
    }
    let values = seq.values();
    let cols = n - rows + 1;
    Ok(HankelMatrix {
        first_lag: lags[0],
        matrix: DMatrix::from_fn(rows, cols, |p, q| values[p + q]),
    })
}

/// Left singular vectors of the `P − D` smallest singular values, as columns.
pub fn noise_subspace(h: &HankelMatrix, order: usize) -> Result<DMatrix<Complex64>> {
    let (p, q) = (h.rows(), h.cols());
    if p.min(q) <= order {
        return Err(Error::invalid(format!(
            "model order {order} needs a Hankel matrix larger than {p}x{q}"
        )));
    }
    // Eigenvectors of H·Hᴴ are the left singular vectors of H; the complex SVD
    // in nalgebra mis-factors rank-deficient inputs, the Hermitian solver does not.
    let gram = h.matrix() * h.matrix().adjoint();
    let eig = SymmetricEigen::new(gram);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep = &idx[order..];
    let mut basis = DMatrix::<Complex64>::zeros(p, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(basis)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `points` frequencies evenly covering (−π, π], in radians.
    Frequency { points: usize },
    /// Directions over [−90°, 90°] every `step_deg` degrees.
    Direction { step_deg: f64 },
}

impl GridSpec {
    pub const DEFAULT_FREQUENCY: GridSpec = GridSpec::Frequency { points: 4096 };
    pub const DEFAULT_DIRECTION: GridSpec = GridSpec::Direction { step_deg: 0.05 };

    pub fn abscissae(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Frequency { points } => {
                if points < 3 {
                    return Err(Error::invalid("a frequency grid needs at least 3 points"));
                }
                let step = 2.0 * PI / points as f64;
                Ok((1..=points).map(|i| -PI + step * i as f64).collect())
            }
            GridSpec::Direction { step_deg } => {
                if !(step_deg.is_finite() && step_deg > 0.0 && step_deg <= 90.0) {
                    return Err(Error::invalid(format!(
                        "direction step {step_deg} must be in (0, 90]"
                    )));
                }
                let n = (180.0 / step_deg).round() as usize;
                Ok((0..=n)
                    .map(|i| (-90.0 + step_deg * i as f64).min(90.0))
                    .collect())
            }
        }
    }

    /// Grid spacing in the abscissa's unit.
    pub fn step(&self) -> f64 {
        match *self {
            GridSpec::Frequency { points } => 2.0 * PI / points as f64,
            GridSpec::Direction { step_deg } => step_deg,
        }
    }

    pub fn is_circular(&self) -> bool {
        matches!(self, GridSpec::Frequency { .. })
    }

    /// Vandermonde phase step for an abscissa.
    fn omega(&self, x: f64) -> f64 {
        match self {
            GridSpec::Frequency { .. } => x,
            GridSpec::Direction { .. } => PI * x.to_radians().sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pseudospectrum {
    abscissae: Vec<f64>,
    power: Vec<f64>,
    circular: bool,
}

impl Pseudospectrum {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(abscissae: Vec<f64>, power: Vec<f64>, circular: bool) -> Result<Self> {
        if abscissae.len() != power.len() {
            return Err(Error::invalid("grid and power lengths differ"));
        }
        if abscissae.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("power must be finite and nonnegative"));
        }
        Ok(Self {
            abscissae,
            power,
            circular,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn argmax(&self) -> Option<usize> {
        (0..self.len()).max_by(|&a, &b| self.power[a].total_cmp(&self.power[b]))
    }

    /// CSV with header `abscissa,power`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "abscissa,power")?;
        for (x, p) in self.abscissae.iter().zip(&self.power) {
            writeln!(out, "{x},{p}")?;
        }
        Ok(())
    }
}

/// `1 / ‖Uᴴ·v(ω)‖²` with `v(ω) = (1, e^{jω}, …)/√P` over the grid.
pub fn music_spectrum(basis: &DMatrix<Complex64>, grid: GridSpec) -> Result<Pseudospectrum> {
    let abscissae = grid.abscissae()?;
    let rows = basis.nrows();
    let norm = 1.0 / (rows as f64).sqrt();
    let power = abscissae
        .par_iter()
        .map(|&x| {
            let step = Complex64::from_polar(1.0, grid.omega(x));
            let mut v = Vec::with_capacity(rows);
            let mut z = Complex64::new(norm, 0.0);
            for _ in 0..rows {
                v.push(z);
                z *= step;
            }
            let mut energy = 0.0;
            for c in 0..basis.ncols() {
                let col = basis.column(c);
                let proj: Complex64 = col.iter().zip(&v).map(|(u, e)| u.conj() * e).sum();
                energy += proj.norm_sqr();
            }
            1.0 / energy.max(f64::MIN_POSITIVE)
        })
        .collect::<Vec<f64>>();
    let power = power
        .into_iter()
        .map(|p| if p.is_finite() { p } else { f64::MAX })
        .collect();
    Pseudospectrum::new(abscissae, power, grid.is_circular())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub locations: Vec<f64>,
}

impl PeakSet {
    pub fn count(&self) -> usize {
        self.locations.len()
    }
}

/// The `D` largest strict local maxima, refined by a parabola through the
/// log-power of each peak and its neighbours, sorted ascending.
pub fn pick_peaks(p: &Pseudospectrum, count: usize) -> Result<PeakSet> {
    if count == 0 {
        return Err(Error::invalid("peak count must be at least 1"));
    }
    let n = p.len();
    if count > n {
        return Err(Error::invalid(format!(
            "{count} peaks requested from a {n}-point grid"
        )));
    }
    let power = p.power();
    let neighbours = |i: usize| -> Option<(usize, usize)> {
        if p.circular {
            Some(((i + n - 1) % n, (i + 1) % n))
        } else if i == 0 || i + 1 == n {
            None
        } else {
            Some((i - 1, i + 1))
        }
    };
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| neighbours(i).is_some_and(|(l, r)| power[i] > power[l] && power[i] > power[r]))
        .collect();
    if maxima.len() < count {
        return Err(Error::DegenerateSpectrum {
            found: maxima.len(),
            wanted: count,
        });
    }
    maxima.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let x = p.abscissae();
    let step = if n > 1 {
        (x[n - 1] - x[0]) / (n - 1) as f64
    } else {
        0.0
    };
    let mut locations: Vec<f64> = maxima[..count]
        .iter()
        .map(|&i| {
            let (l, r) = neighbours(i).expect("maxima have neighbours");
            let (yl, yc, yr) = (power[l].ln(), power[i].ln(), power[r].ln());
            let denom = yl - 2.0 * yc + yr;
            let delta = if denom < 0.0 {
                (0.5 * (yl - yr) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut loc = x[i] + delta * step;
            if p.circular && loc > PI {
                loc -= 2.0 * PI;
            }
            loc
        })
        .collect();
    locations.sort_by(f64::total_cmp);
    Ok(PeakSet { locations })
}

/// RMSE after sorting both lists and pairing positionally.
pub fn rmse_matched(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    let (e, t) = sorted_pair(estimates, truth)?;
    let sq: f64 = e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sq / e.len() as f64).sqrt())
}

/// Angular RMSE: errors are shortest arcs, and the positional pairing is the
/// best cyclic rotation of the sorted estimates, so a source near ±π is matched
/// across the wrap.
pub fn rmse_circular(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    let (e, t) = sorted_pair(estimates, truth)?;
    let n = e.len();
    let best = (0..n)
        .map(|shift| {
            (0..n)
                .map(|i| circular_distance(e[(i + shift) % n], t[i]).powi(2))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok((best / n as f64).sqrt())
}

fn sorted_pair(estimates: &[f64], truth: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimates for {} true values",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid("no values to compare"));
    }
    let mut e = estimates.to_vec();
    let mut t = truth.to_vec();
    e.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    Ok((e, t))
}

/// Hankel → noise subspace → MUSIC → peaks on a populated, consecutive sequence.
pub fn estimate(seq: &LagMomentSequence, order: usize, grid: GridSpec) -> Result<PeakSet> {
    let h = build_hankel(seq, default_rows(seq.len()))?;
    let basis = noise_subspace(&h, order)?;
    let spectrum = music_spectrum(&basis, grid)?;
    pick_peaks(&spectrum, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::random_sources;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exponential(omega: f64, len: usize) -> LagMomentSequence {
        let v = (0..len)
            .map(|k| Complex64::from_polar(1.0, omega * k as f64))
            .collect();
        LagMomentSequence::from_values(3, 0, v).unwrap()
    }

    #[test]
    fn hankel_examples() {
        let seq = LagMomentSequence::from_values(
            3,
            0,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)],
        )
        .unwrap();
        let h = build_hankel(&seq, 2).unwrap();
        assert_eq!((h.rows(), h.cols()), (2, 3));
        let expect = [
            [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)],
            [c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)],
        ];
        for (p, row) in expect.iter().enumerate() {
            for (q, &v) in row.iter().enumerate() {
                assert_eq!(h.get(p, q), v);
            }
        }
        assert_eq!(h.matrix().rank(1e-9), 1);

        for k in [5usize, 8, 64] {
            let rows = k.div_ceil(2);
            let h = build_hankel(&exponential(0.3, k), rows).unwrap();
            assert_eq!((h.rows(), h.cols()), (rows, k - rows + 1));
        }

        let zeros = LagMomentSequence::from_values(3, 0, vec![c(0.0, 0.0); 6]).unwrap();
        assert!(build_hankel(&zeros, 3)
            .unwrap()
            .matrix()
            .iter()
            .all(|z| z.norm() == 0.0));

        let gap =
            LagMomentSequence::new(3, vec![0, 1, 3], vec![c(1.0, 0.0); 3], vec![1; 3]).unwrap();
        assert!(build_hankel(&gap, 2).is_err());
        assert!(build_hankel(&zeros, 0).is_err());
        assert!(build_hankel(&zeros, 7).is_err());
    }

    #[test]
    fn default_rows_is_near_square() {
        assert_eq!(default_rows(64), 33);
        assert_eq!(default_rows(61), 31);
        assert_eq!(default_rows(4), 3);
        assert_eq!(default_rows(1), 1);
    }

    #[test]
    fn noise_subspace_examples() {
        let omega = 0.7;
        let h = build_hankel(&exponential(omega, 12), 6).unwrap();
        let basis = noise_subspace(&h, 1).unwrap();
        assert_eq!(basis.ncols(), 5);
        let v: Vec<Complex64> = (0..6)
            .map(|i| Complex64::from_polar(1.0, omega * i as f64))
            .collect();
        for col in basis.column_iter() {
            let inner: Complex64 = col.iter().zip(&v).map(|(u, e)| u.conj() * e).sum();
            assert!(inner.norm() < 1e-8);
        }
        let gram = basis.adjoint() * &basis;
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((gram[(i, j)] - c(expect, 0.0)).norm(), 0.0, epsilon = 1e-12);
            }
        }
        assert!(noise_subspace(&h, 6).is_err());

        let zeros = LagMomentSequence::from_values(3, 0, vec![c(0.0, 0.0); 7]).unwrap();
        let basis = noise_subspace(&build_hankel(&zeros, 4).unwrap(), 0).unwrap();
        assert_eq!((basis.nrows(), basis.ncols()), (4, 4));
    }

    #[test]
    fn noise_subspace_with_complex_weight() {
        let omega = -0.32;
        let weight = Complex64::from_polar(0.42, 1.75);
        let values = (0..18)
            .map(|k| weight * Complex64::from_polar(1.0, omega * k as f64))
            .collect();
        let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
        let basis = noise_subspace(&build_hankel(&seq, 10).unwrap(), 1).unwrap();
        for col in basis.column_iter() {
            let inner: Complex64 = col
                .iter()
                .enumerate()
                .map(|(i, u)| u.conj() * Complex64::from_polar(1.0, omega * i as f64))
                .sum();
            assert!(inner.norm() < 1e-8);
        }
    }

    #[test]
    fn music_examples() {
        let omega = -1.1;
        let h = build_hankel(&exponential(omega, 32), 16).unwrap();
        let spec =
            music_spectrum(&noise_subspace(&h, 1).unwrap(), GridSpec::DEFAULT_FREQUENCY).unwrap();
        let top = spec.abscissae()[spec.argmax().unwrap()];
        assert!(circular_distance(top, omega) <= GridSpec::DEFAULT_FREQUENCY.step());

        let full = noise_subspace(&h, 0).unwrap();
        let flat = music_spectrum(&full, GridSpec::Frequency { points: 256 }).unwrap();
        assert!(flat.power().iter().all(|p| (p - 1.0).abs() < 1e-9));
    }

    #[test]
    fn direction_grid_shape() {
        let g = GridSpec::DEFAULT_DIRECTION.abscissae().unwrap();
        assert_eq!(g.len(), 3601);
        assert_eq!(g[0], -90.0);
        assert_eq!(*g.last().unwrap(), 90.0);
        let f = GridSpec::DEFAULT_FREQUENCY.abscissae().unwrap();
        assert_eq!(f.len(), 4096);
        assert!(f[0] > -PI && *f.last().unwrap() == PI);
    }

    #[test]
    fn peak_examples() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| {
                1.0 + 5.0 * (-(t - 0.5).powi(2) / 0.002).exp()
                    + 3.0 * (-(t - 1.4).powi(2) / 0.002).exp()
            })
            .collect();
        let spec = Pseudospectrum::new(x, y, false).unwrap();
        let peaks = pick_peaks(&spec, 2).unwrap();
        assert_eq!(peaks.count(), 2);
        assert!((peaks.locations[0] - 0.5).abs() <= 0.01);
        assert!((peaks.locations[1] - 1.4).abs() <= 0.01);

        let flat = Pseudospectrum::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], false).unwrap();
        assert!(matches!(
            pick_peaks(&flat, 1),
            Err(Error::DegenerateSpectrum {
                found: 0,
                wanted: 1
            })
        ));
        assert!(matches!(
            pick_peaks(&flat, 5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(pick_peaks(&flat, 0).is_err());
    }

    #[test]
    fn circular_peak_at_wrap() {
        let grid = GridSpec::Frequency { points: 64 };
        let x = grid.abscissae().unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| 1.0 / (0.01 + circular_distance(t, PI).powi(2)))
            .collect();
        let spec = Pseudospectrum::new(x, y, true).unwrap();
        let peaks = pick_peaks(&spec, 1).unwrap();
        assert!(circular_distance(peaks.locations[0], PI) < 1e-9);
    }

    #[test]
    fn rmse_examples() {
        let truth = [0.5, 1.2, -0.4];
        assert_eq!(rmse_matched(&truth, &truth).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|t| t + 0.01).collect();
        assert_abs_diff_eq!(
            rmse_matched(&shifted, &truth).unwrap(),
            0.01,
            epsilon = 1e-12
        );
        assert_eq!(rmse_matched(&[1.2, 0.5], &[0.5, 1.2]).unwrap(), 0.0);
        assert!(rmse_matched(&[1.0], &[1.0, 2.0]).is_err());

        assert_abs_diff_eq!(
            rmse_circular(&shifted, &truth).unwrap(),
            0.01,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            rmse_circular(&[PI - 0.01, 0.2], &[-PI + 0.01, 0.2]).unwrap(),
            0.02 / 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            rmse_circular(&[-3.1, 0.0], &[0.0, 3.1]).unwrap(),
            (2.0 * PI - 6.2) / 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exact_recovery_and_scaling() {
        let k = 64;
        let grid = GridSpec::DEFAULT_FREQUENCY;
        for seed in 0..10 {
            let s = random_sources(3, 2.0 * PI * 10.0 / k as f64, (0.5, 1.5), seed).unwrap();
            let values: Vec<Complex64> = (0..k as i64).map(|lag| s.moment(3, lag)).collect();
            let seq = LagMomentSequence::from_values(3, 0, values).unwrap();
            let peaks = estimate(&seq, 3, grid).unwrap();
            let mut truth = s.frequencies();
            truth.sort_by(f64::total_cmp);
            assert!(
                rmse_circular(&peaks.locations, &truth).unwrap() <= grid.step(),
                "seed {seed}"
            );
            let scaled = estimate(&seq.scaled(c(-0.3, 2.0)), 3, grid).unwrap();
            for (a, b) in peaks.locations.iter().zip(&scaled.locations) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }
}
