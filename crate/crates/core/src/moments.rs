//! Lag-indexed moment sequences estimated from sparse samples.
//!
//! * Second order (co-prime baseline): `x1[m1]·conj(x2[m2])` over Bezout pairs
//!   with `m1·M1 − m2·M2 = k`, converging to `Σ A²·e^{jωk}`.
//! * Third order (Diophantine schedule): `x1[c1]·conj(x2[|c2|])·x3[c3]` averaged
//!   over the snapshot index `l`, converging to `Σ A³·e^{jφ}·e^{jωk}`.
//! * Third order over a sparse array: triple products of sensor snapshots with
//!   times tied by `n_odd = n_a + n_b`, converging to `Σ |s|²s·e^{jπ g sinθ}`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_complex::Complex64;

use crate::arrays::{ArrayGeometry, SignPattern, Statistic, Witness};
use crate::diophantine::{ext_gcd, gcd_u64, SampleSchedule, SchemeCoefficients};
use crate::error::{Error, Result};
use crate::waveform::{wrap_angle, SampleStream, SourceSet};

/// Moment values on a set of integer lags. A zero `count` marks a lag with no
/// contributing samples; its value is zero and downstream stages skip it.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMomentSequence {
    order: u8,
    lags: Vec<i64>,
    values: Vec<Complex64>,
    counts: Vec<u64>,
}

impl LagMomentSequence {
    pub fn new(
        order: u8,
        lags: Vec<i64>,
        values: Vec<Complex64>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if order != 2 && order != 3 {
            return Err(Error::invalid(format!(
                "moment order must be 2 or 3, got {order}"
            )));
        }
        if lags.len() != values.len() || lags.len() != counts.len() {
            return Err(Error::invalid(
                "lags, values and counts must have equal length",
            ));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("moment values must be finite"));
        }
        Ok(Self {
            order,
            lags,
            values,
            counts,
        })
    }

    /// A fully-populated sequence on consecutive lags starting at `first_lag`.
    pub fn from_values(order: u8, first_lag: i64, values: Vec<Complex64>) -> Result<Self> {
        let n = values.len();
        let lags = (0..n as i64).map(|i| first_lag + i).collect();
        Self::new(order, lags, values, vec![1; n])
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn lags(&self) -> &[i64] {
        &self.lags
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn value_at(&self, lag: i64) -> Option<Complex64> {
        self.lags
            .iter()
            .position(|&l| l == lag)
            .filter(|&i| self.counts[i] > 0)
            .map(|i| self.values[i])
    }

    /// The leading run of consecutive, populated lags.
    pub fn consecutive_prefix(&self) -> Self {
        let mut end = 0;
        while end < self.lags.len()
            && self.counts[end] > 0
            && (end == 0 || self.lags[end] == self.lags[end - 1] + 1)
        {
            end += 1;
        }
        Self {
            order: self.order,
            lags: self.lags[..end].to_vec(),
            values: self.values[..end].to_vec(),
            counts: self.counts[..end].to_vec(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// CSV with header `lag,re,im,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag,re,im,count")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.lags[i], self.values[i].re, self.values[i].im, self.counts[i]
            )?;
        }
        Ok(())
    }
}

/// Solves `m1·M1 − m2·M2 = k` inside the windows `m1 ∈ [r·M2, (r+2)·M2)`,
/// `m2 ∈ [r·M1, (r+1)·M1)`.
///
/// Only `0 ≤ k ≤ M1·M2` is guaranteed to have a solution in the windows;
/// negative lags follow from conjugate symmetry of the autocorrelation.
pub fn find_bezout_pair(m1: u64, m2: u64, k: i64, r: u64) -> Result<(u64, u64)> {
    if m1 == 0 || m2 == 0 || gcd_u64(m1, m2) != 1 {
        return Err(Error::invalid(format!(
            "rates ({m1}, {m2}) are not coprime"
        )));
    }
    let product = i128::from(m1) * i128::from(m2);
    if k < 0 || i128::from(k) > product {
        return Err(Error::invalid(format!(
            "lag {k} is outside [0, {product}] for rates ({m1}, {m2})"
        )));
    }
    let (m1i, m2i, ki, ri) = (i128::from(m1), i128::from(m2), i128::from(k), i128::from(r));
    // m1 ≡ k·M1⁻¹ (mod M2)
    let inverse = if m2 == 1 {
        0
    } else {
        let (_, u, _) = ext_gcd((m1 % m2) as i64, m2 as i64)?;
        i128::from(u)
    };
    let residue = (ki * inverse).rem_euclid(m2i);
    for extra in [0, m2i] {
        let a = ri * m2i + residue + extra;
        let num = a * m1i - ki;
        if num % m2i != 0 {
            continue;
        }
        let b = num / m2i;
        if (ri * m1i..(ri + 1) * m1i).contains(&b) {
            return Ok((
                u64::try_from(a).map_err(|_| Error::Overflow("Bezout pair"))?,
                u64::try_from(b).map_err(|_| Error::Overflow("Bezout pair"))?,
            ));
        }
    }
    Err(Error::Internal(format!(
        "no Bezout pair for k={k}, r={r} with rates ({m1}, {m2})"
    )))
}

/// Sample indices the two co-prime streams must hold for lags `1..=K` over `R` blocks.
pub fn coprime_demand(
    m1: u64,
    m2: u64,
    lags: u64,
    blocks: u64,
) -> Result<(BTreeSet<u64>, BTreeSet<u64>)> {
    let mut first = BTreeSet::new();
    let mut second = BTreeSet::new();
    for k in 1..=lags {
        let k = i64::try_from(k).map_err(|_| Error::Overflow("lag"))?;
        for r in 0..blocks {
            let (a, b) = find_bezout_pair(m1, m2, k, r)?;
            first.insert(a);
            second.insert(b);
        }
    }
    Ok((first, second))
}

/// Second-order lags `1..=K` from two co-prime streams, averaged over `R` blocks.
pub fn coprime_second_order(
    x1: &SampleStream,
    x2: &SampleStream,
    lags: u64,
    blocks: u64,
) -> Result<LagMomentSequence> {
    if blocks == 0 {
        return Err(Error::invalid("at least one averaging block is required"));
    }
    let mut values = Vec::with_capacity(lags as usize);
    for k in 1..=lags {
        let k = i64::try_from(k).map_err(|_| Error::Overflow("lag"))?;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..blocks {
            let (a, b) = find_bezout_pair(x1.rate(), x2.rate(), k, r)?;
            acc += x1.get(a)? * x2.get(b)?.conj();
        }
        values.push(acc / blocks as f64);
    }
    let n = values.len();
    LagMomentSequence::new(2, (1..=n as i64).collect(), values, vec![blocks; n])
}

/// Third-order lags `1..=K` from three streams laid out like the schedule's slots.
pub fn diophantine_third_order(
    streams: [&SampleStream; 3],
    sched: &SampleSchedule,
) -> Result<LagMomentSequence> {
    let rates = sched.rates();
    for (slot, stream) in streams.iter().enumerate() {
        if stream.rate() != rates[slot] {
            return Err(Error::invalid(format!(
                "stream {} has rate {}, schedule expects {}",
                slot + 1,
                stream.rate(),
                rates[slot]
            )));
        }
    }
    let conj = sched.conj_slot();
    let mut values = Vec::with_capacity(sched.lags() as usize);
    for k in 1..=sched.lags() {
        let entries = sched.entries_for_lag(k);
        let mut acc = Complex64::new(0.0, 0.0);
        for e in entries {
            let mut product = Complex64::new(1.0, 0.0);
            for (slot, stream) in streams.iter().enumerate() {
                let v = stream.get(e.indices[slot])?;
                product *= if slot == conj { v.conj() } else { v };
            }
            acc += product;
        }
        values.push(acc / entries.len() as f64);
    }
    let n = values.len();
    LagMomentSequence::new(
        3,
        (1..=n as i64).collect(),
        values,
        vec![sched.snapshots(); n],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneracyVerdict {
    Pass,
    /// Sources feeding (first plain slot, conjugated slot, last plain slot).
    Fail {
        i: usize,
        u: usize,
        v: usize,
    },
}

impl DegeneracyVerdict {
    pub fn into_result(self) -> Result<()> {
        match self {
            DegeneracyVerdict::Pass => Ok(()),
            DegeneracyVerdict::Fail { i, u, v } => Err(Error::Degenerate { i, u, v }),
        }
    }
}

const DEGENERACY_TOL: f64 = 1e-12;

/// Fails when some cross term `(i, u, v)` of the triple product has an
/// `l`-rotation `a_p·M_p·(ω_i − ω_v) + a_c·M_c·(ω_u − ω_v) ≡ 0 (mod 2π)`,
/// so averaging over `l` cannot suppress it.
pub fn degeneracy_check(s: &SourceSet, coeff: &SchemeCoefficients) -> DegeneracyVerdict {
    let conj = coeff.conj_slot();
    let plain: Vec<usize> = (0..3).filter(|&i| i != conj).collect();
    let (p, q) = (plain[0], plain[1]);
    let (a, m) = (coeff.a(), coeff.rates());
    let wp = a[p] as f64 * m[p] as f64;
    let wc = a[conj] as f64 * m[conj] as f64;
    let _ = q;
    let freqs = s.frequencies();
    let d = freqs.len();
    for i in 0..d {
        for u in 0..d {
            for v in 0..d {
                if i == u && u == v {
                    continue;
                }
                let rotation = wp * (freqs[i] - freqs[v]) + wc * (freqs[u] - freqs[v]);
                if wrap_angle(rotation).abs() < DEGENERACY_TOL {
                    return DegeneracyVerdict::Fail { i, u, v };
                }
            }
        }
    }
    DegeneracyVerdict::Pass
}

/// Number of time pairs used per sensor triple with `snapshots` snapshots.
pub fn doa_pair_count(snapshots: usize) -> u64 {
    let l = snapshots as u64;
    l * l.saturating_sub(1) / 2
}

/// Third-order statistic of three sensor series under a sign pattern.
///
/// Series element `i` is the snapshot at time `i + 1`. The two like-signed
/// slots range over times `n_a, n_b ≥ 1` and the odd slot is read at
/// `n_a + n_b ≤ L`, giving `L(L−1)/2` products. Returns the mean and the count.
pub fn doa_third_order(
    series: [&[Complex64]; 3],
    pattern: SignPattern,
) -> Result<(Complex64, u64)> {
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::invalid("sensor series must have equal length"));
    }
    if len < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 snapshots, got {len}"
        )));
    }
    let signs = pattern.signs();
    let odd = pattern.odd_slot();
    let (sa, sb) = match odd {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let take = |slot: usize, n: usize| -> Complex64 {
        let v = series[slot][n - 1];
        if signs[slot] < 0 {
            v.conj()
        } else {
            v
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for na in 1..len {
        let a = take(sa, na);
        for nb in 1..=len - na {
            acc += a * take(sb, nb) * take(odd, na + nb);
        }
    }
    let count = doa_pair_count(len);
    Ok((acc / count as f64, count))
}

/// Spatial autocorrelation of two sensor series: the mean of `x1[n]·conj(x2[n])`.
pub fn doa_second_order(x1: &[Complex64], x2: &[Complex64]) -> Result<(Complex64, u64)> {
    if x1.len() != x2.len() || x1.is_empty() {
        return Err(Error::invalid(
            "sensor series must be nonempty and of equal length",
        ));
    }
    let acc: Complex64 = x1.iter().zip(x2).map(|(a, b)| a * b.conj()).sum();
    Ok((acc / x1.len() as f64, x1.len() as u64))
}

fn series_at(series: &BTreeMap<i64, Vec<Complex64>>, position: i64) -> Result<&[Complex64]> {
    series
        .get(&position)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::invalid(format!("no snapshots for the sensor at {position}")))
}

/// Coarray moment sequence on lags `0..=max_lag` from per-sensor series.
///
/// Each lag averages every [`Statistic::Plain`] witness, weighted by its product
/// count. Triple geometries give order 3, pair geometries order 2. Lags without
/// a witness are kept with a zero count.
pub fn coarray_sequence(
    witnesses: &BTreeMap<i64, Vec<Witness>>,
    series: &BTreeMap<i64, Vec<Complex64>>,
    max_lag: i64,
) -> Result<LagMomentSequence> {
    let mut order = None;
    let mut lags = Vec::new();
    let mut values = Vec::new();
    let mut counts = Vec::new();
    for g in 0..=max_lag {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut total = 0u64;
        for w in witnesses.get(&g).into_iter().flatten() {
            if w.statistic() != Statistic::Plain {
                continue;
            }
            let (mean, count, o) = match *w {
                Witness::Triple { positions, pattern } => {
                    let s = [
                        series_at(series, positions[0])?,
                        series_at(series, positions[1])?,
                        series_at(series, positions[2])?,
                    ];
                    let (m, c) = doa_third_order(s, pattern)?;
                    (m, c, 3u8)
                }
                Witness::Pair { positions, .. } => {
                    let (m, c) = doa_second_order(
                        series_at(series, positions[0])?,
                        series_at(series, positions[1])?,
                    )?;
                    (m, c, 2u8)
                }
            };
            order.get_or_insert(o);
            acc += mean * count as f64;
            total += count;
        }
        lags.push(g);
        values.push(if total > 0 { acc / total as f64 } else { acc });
        counts.push(total);
    }
    LagMomentSequence::new(order.unwrap_or(3), lags, values, counts)
}

/// Per-sensor series keyed by position, for every sensor of `geometry`.
pub fn collect_series(
    geometry: &ArrayGeometry,
    mut series_for: impl FnMut(usize, i64) -> Vec<Complex64>,
) -> BTreeMap<i64, Vec<Complex64>> {
    geometry
        .positions()
        .iter()
        .enumerate()
        .map(|(id, &p)| (p, series_for(id, p)))
        .collect()
}
