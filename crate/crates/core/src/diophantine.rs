//! Integer machinery for Diophantine sampling schemes.
//!
//! A scheme over three samplers with down-sampling rates `M = (M1, M2, M3)` is a
//! pair of integer vectors `a`, `b` with `a·M = 0` and `b·M = 1`. For every lag
//! `k` and snapshot `l` the signed sample indices `k·b + l·a` then satisfy
//! `Σ (k·b_i + l·a_i)·M_i = k`, so the triple product
//! `x1[c1] · conj(x2[|c2|]) · x3[c3]` (with the conjugate on the single negative
//! slot) sees the waveform at an effective lag of exactly `k` Nyquist ticks.
//!
//! When additionally `Σa = Σb = 0`, the same vectors remain a valid scheme for
//! the shifted rates `M + Γ` for every `Γ`, which is what makes arbitrarily high
//! down-sampling rates usable.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Greatest common divisor of a nonempty list. Zero entries act as the identity.
pub fn gcd_many(values: &[i64]) -> Result<u64> {
    if values.is_empty() {
        return Err(Error::invalid("gcd of an empty list"));
    }
    Ok(values
        .iter()
        .fold(0u64, |acc, &v| gcd_u64(acc, v.unsigned_abs())))
}

pub(crate) fn gcd_u64(mut x: u64, mut y: u64) -> u64 {
    while y != 0 {
        let r = x % y;
        x = y;
        y = r;
    }
    x
}

/// Extended Euclid. Returns `(g, u, v)` with `u·x + v·y = g = gcd(x, y) ≥ 0`.
///
/// The coefficients are the minimal pair produced by the remainder sequence:
/// `|u| ≤ max(1, |y|/(2g))` and `|v| ≤ max(1, |x|/(2g))`.
pub fn ext_gcd(x: i64, y: i64) -> Result<(i64, i64, i64)> {
    if x == 0 && y == 0 {
        return Err(Error::invalid("ext_gcd(0, 0) is undefined"));
    }
    let (mut r0, mut r1) = (i128::from(x).abs(), i128::from(y).abs());
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    let g = r0;
    let u_abs = s0;
    // u_abs·|x| + v_abs·|y| = g
    let v_abs = if y == 0 {
        0
    } else {
        (g - u_abs * i128::from(x).abs()) / i128::from(y).abs()
    };
    let u = if x < 0 { -u_abs } else { u_abs };
    let v = if y < 0 { -v_abs } else { v_abs };
    let narrow = |z: i128| i64::try_from(z).map_err(|_| Error::Overflow("ext_gcd"));
    Ok((narrow(g)?, narrow(u)?, narrow(v)?))
}

/// Inverse of `x` modulo `m` as the least positive residue in `[1, m)`; `m = 1` yields 1.
fn mod_inverse(x: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(1);
    }
    let (g, u, _) = ext_gcd(i64::try_from(x % m).ok()?, i64::try_from(m).ok()?).ok()?;
    if g != 1 {
        return None;
    }
    Some(u.rem_euclid(m as i64) as u64)
}

/// A bank of samplers, each taking one sample every `M_i` Nyquist intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSet {
    rates: Vec<u64>,
    nyquist_interval: f64,
}

impl SamplerSet {
    pub fn new(rates: Vec<u64>, nyquist_interval: f64) -> Result<Self> {
        if rates.len() < 3 {
            return Err(Error::invalid(format!(
                "a sampler set needs at least 3 rates, got {}",
                rates.len()
            )));
        }
        if rates.contains(&0) {
            return Err(Error::invalid("down-sampling rates must be >= 1"));
        }
        if !(nyquist_interval.is_finite() && nyquist_interval > 0.0) {
            return Err(Error::invalid("the Nyquist interval must be positive"));
        }
        Ok(Self {
            rates,
            nyquist_interval,
        })
    }

    /// Rates `1+Γ, 2+Γ, …, N+Γ` with a unit Nyquist interval.
    pub fn consecutive(n: usize, gamma: u64) -> Result<Self> {
        let rates = (1..=n as u64)
            .map(|i| i.checked_add(gamma).ok_or(Error::Overflow("sampler rates")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rates, 1.0)
    }

    pub fn rates(&self) -> &[u64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn nyquist_interval(&self) -> f64 {
        self.nyquist_interval
    }

    pub fn max_rate(&self) -> u64 {
        self.rates.iter().copied().max().unwrap_or(0)
    }

    /// Lag `k` is reachable only if `gcd(M_1, …, M_N)` divides it.
    pub fn check_lag(&self, k: i64) -> Result<()> {
        let g = self.rates.iter().fold(0, |acc, &m| gcd_u64(acc, m));
        if !k.unsigned_abs().is_multiple_of(g) {
            return Err(Error::invalid(format!(
                "lag {k} is not a multiple of gcd(rates) = {g}"
            )));
        }
        Ok(())
    }
}

/// Integer vectors `a`, `b` over a triple of sampler rates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeCoefficients {
    triple: [usize; 3],
    rates: [u64; 3],
    a: [i64; 3],
    b: [i64; 3],
    gamma: u64,
}

fn dot(c: &[i64; 3], m: &[u64; 3]) -> i128 {
    c.iter()
        .zip(m)
        .map(|(&c, &m)| i128::from(c) * i128::from(m))
        .sum()
}

impl SchemeCoefficients {
    /// Builds a scheme from explicit coefficients, rejecting anything the
    /// validator does not accept.
    pub fn new(rates: [u64; 3], a: [i64; 3], b: [i64; 3]) -> Result<Self> {
        let scheme = Self {
            triple: [0, 1, 2],
            rates,
            a,
            b,
            gamma: 0,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Checks `a·M = 0`, `b·M = 1`, mixed signs in both vectors and a unique
    /// slot where both coefficients are negative.
    pub fn validate(&self) -> Result<()> {
        if self.rates.contains(&0) {
            return Err(Error::invalid("scheme rates must be >= 1"));
        }
        if dot(&self.a, &self.rates) != 0 {
            return Err(Error::invalid(format!(
                "a·M = {} for a = {:?}, M = {:?}",
                dot(&self.a, &self.rates),
                self.a,
                self.rates
            )));
        }
        if dot(&self.b, &self.rates) != 1 {
            return Err(Error::invalid(format!(
                "b·M = {} for b = {:?}, M = {:?}",
                dot(&self.b, &self.rates),
                self.b,
                self.rates
            )));
        }
        let mixed = |v: &[i64; 3]| v.iter().any(|&x| x > 0) && v.iter().any(|&x| x < 0);
        if !mixed(&self.a) || !mixed(&self.b) {
            return Err(Error::invalid("signs of a and of b must not all agree"));
        }
        let negatives = (0..3).filter(|&i| self.a[i] < 0 && self.b[i] < 0).count();
        if negatives != 1 {
            return Err(Error::invalid(format!(
                "exactly one slot must have a_i < 0 and b_i < 0, found {negatives}"
            )));
        }
        Ok(())
    }

    /// `Σa = Σb = 0`, the condition under which a common rate shift keeps the scheme valid.
    pub fn is_shift_invariant(&self) -> bool {
        self.a.iter().sum::<i64>() == 0 && self.b.iter().sum::<i64>() == 0
    }

    /// The same coefficients attached to rates `M_i + extra`.
    pub fn shifted(&self, extra: u64) -> Result<Self> {
        if !self.is_shift_invariant() {
            return Err(Error::invalid(format!(
                "scheme a = {:?}, b = {:?} does not sum to zero; rate shifts break it",
                self.a, self.b
            )));
        }
        let mut rates = self.rates;
        for m in &mut rates {
            *m = m
                .checked_add(extra)
                .ok_or(Error::Overflow("shifted rates"))?;
        }
        let shifted = Self {
            rates,
            gamma: self
                .gamma
                .checked_add(extra)
                .ok_or(Error::Overflow("gamma"))?,
            ..self.clone()
        };
        shifted.validate()?;
        Ok(shifted)
    }

    pub(crate) fn with_triple(mut self, triple: [usize; 3]) -> Self {
        self.triple = triple;
        self
    }

    /// Indices of the three samplers inside the originating [`SamplerSet`].
    pub fn triple(&self) -> [usize; 3] {
        self.triple
    }

    pub fn rates(&self) -> [u64; 3] {
        self.rates
    }

    pub fn a(&self) -> [i64; 3] {
        self.a
    }

    pub fn b(&self) -> [i64; 3] {
        self.b
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    pub fn max_rate(&self) -> u64 {
        self.rates.iter().copied().max().unwrap_or(0)
    }

    /// The slot whose sample enters the triple product conjugated.
    pub fn conj_slot(&self) -> usize {
        (0..3)
            .find(|&i| self.a[i] < 0 && self.b[i] < 0)
            .expect("validated schemes have a conjugated slot")
    }
}

/// Solves `a·M = 0, Σa = 0, b·M = 1, Σb = 0` for three distinct rates.
///
/// With the rates ordered `M_hi > M_mid > M_lo`, the gaps `P = M_hi − M_mid` and
/// `Q = M_mid − M_lo` must be coprime. The construction is
/// `a_hi = Q, a_lo = P, b_hi = P⁻¹ mod Q, b_lo = (b_hi·P − 1)/Q`, with the middle
/// slot absorbing the negated sums. Coefficients are reported in input order.
pub fn solve_scheme(rates: [u64; 3]) -> Result<SchemeCoefficients> {
    if rates.contains(&0) {
        return Err(Error::invalid("scheme rates must be >= 1"));
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| rates[j].cmp(&rates[i]));
    let [hi, mid, lo] = order;
    if rates[hi] == rates[mid] || rates[mid] == rates[lo] {
        return Err(Error::invalid(format!(
            "scheme rates must be distinct, got {rates:?}"
        )));
    }
    let p = rates[hi] - rates[mid];
    let q = rates[mid] - rates[lo];
    let common = gcd_u64(p, q);
    if common != 1 {
        return Err(Error::UnsolvableTriple {
            rates,
            high_gap: p,
            low_gap: q,
            common,
        });
    }
    let b_hi = mod_inverse(p, q).ok_or_else(|| Error::Internal("missing inverse".into()))?;
    let b_lo = (i128::from(b_hi) * i128::from(p) - 1) / i128::from(q);

    let narrow = |z: i128| i64::try_from(z).map_err(|_| Error::Overflow("scheme coefficients"));
    let (p, q, b_hi) = (i128::from(p), i128::from(q), i128::from(b_hi));
    let mut a = [0i64; 3];
    let mut b = [0i64; 3];
    a[hi] = narrow(q)?;
    a[lo] = narrow(p)?;
    a[mid] = narrow(-(p + q))?;
    b[hi] = narrow(b_hi)?;
    b[lo] = narrow(b_lo)?;
    b[mid] = narrow(-(b_hi + b_lo))?;

    let scheme = SchemeCoefficients {
        triple: [0, 1, 2],
        rates,
        a,
        b,
        gamma: 0,
    };
    scheme.validate()?;
    debug_assert!(scheme.is_shift_invariant());
    Ok(scheme)
}

/// The fixed scheme `a = (2, −3, 1)`, `b = (1, −2, 1)` on rates `(2+Γ, 3+Γ, 5+Γ)`.
pub fn consecutive_scheme(gamma: u64) -> Result<SchemeCoefficients> {
    let base = SchemeCoefficients::new([2, 3, 5], [2, -3, 1], [1, -2, 1])?;
    base.shifted(gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub k: u64,
    pub l: u64,
    /// Per-sampler sample indices `|k·b_i + l·a_i|`.
    pub indices: [u64; 3],
}

/// Sample indices for every `(k, l) ∈ [1, K] × [1, L]`, stored lag-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSchedule {
    rates: [u64; 3],
    conj_slot: usize,
    lags: u64,
    snapshots: u64,
    entries: Vec<ScheduleEntry>,
}

impl SampleSchedule {
    pub fn rates(&self) -> [u64; 3] {
        self.rates
    }

    pub fn conj_slot(&self) -> usize {
        self.conj_slot
    }

    pub fn lags(&self) -> u64 {
        self.lags
    }

    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn entry(&self, k: u64, l: u64) -> Option<&ScheduleEntry> {
        if k == 0 || l == 0 || k > self.lags || l > self.snapshots {
            return None;
        }
        self.entries
            .get(((k - 1) * self.snapshots + (l - 1)) as usize)
    }

    /// All `L` entries for lag `k`.
    pub fn entries_for_lag(&self, k: u64) -> &[ScheduleEntry] {
        if k == 0 || k > self.lags {
            return &[];
        }
        let start = ((k - 1) * self.snapshots) as usize;
        &self.entries[start..start + self.snapshots as usize]
    }

    /// Signed coefficients `k·b_i + l·a_i` recovered from the stored magnitudes.
    pub fn signed(&self, entry: &ScheduleEntry) -> [i128; 3] {
        let mut out = [0i128; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let v = i128::from(entry.indices[i]);
            *o = if i == self.conj_slot { -v } else { v };
        }
        out
    }

    /// `Σ signed_i · M_i` for an entry; equals `entry.k` for a correct schedule.
    pub fn effective_lag(&self, entry: &ScheduleEntry) -> i128 {
        self.signed(entry)
            .iter()
            .zip(&self.rates)
            .map(|(&c, &m)| c * i128::from(m))
            .sum()
    }

    pub fn max_index(&self) -> u64 {
        self.entries
            .iter()
            .flat_map(|e| e.indices)
            .max()
            .unwrap_or(0)
    }

    /// Per-sampler index sets the streams must cover.
    pub fn demands(&self) -> [BTreeSet<u64>; 3] {
        let mut out: [BTreeSet<u64>; 3] = Default::default();
        for e in &self.entries {
            for (set, &n) in out.iter_mut().zip(&e.indices) {
                set.insert(n);
            }
        }
        out
    }
}

fn coefficient(s: &SchemeCoefficients, i: usize, k: u64, l: u64) -> Result<i64> {
    let k = i64::try_from(k).map_err(|_| Error::Overflow("schedule lag"))?;
    let l = i64::try_from(l).map_err(|_| Error::Overflow("schedule snapshot"))?;
    k.checked_mul(s.b[i])
        .and_then(|x| l.checked_mul(s.a[i]).and_then(|y| x.checked_add(y)))
        .ok_or(Error::Overflow("schedule index"))
}

/// Expands a scheme into per-`(k, l)` sample indices.
pub fn build_schedule(s: &SchemeCoefficients, lags: u64, snapshots: u64) -> Result<SampleSchedule> {
    if lags == 0 || snapshots == 0 {
        return Err(Error::invalid(format!(
            "schedule needs K >= 1 and L >= 1, got K={lags}, L={snapshots}"
        )));
    }
    let conj_slot = s.conj_slot();
    let len = lags
        .checked_mul(snapshots)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or(Error::Overflow("schedule size"))?;
    let mut entries = Vec::with_capacity(len);
    for k in 1..=lags {
        for l in 1..=snapshots {
            let mut indices = [0u64; 3];
            let mut lag = 0i128;
            for (i, idx) in indices.iter_mut().enumerate() {
                let c = coefficient(s, i, k, l)?;
                let wrong_sign = if i == conj_slot { c > 0 } else { c < 0 };
                if wrong_sign {
                    return Err(Error::ScheduleInconsistency {
                        k,
                        l,
                        reason: format!("coefficient {c} in slot {} has the wrong sign", i + 1),
                    });
                }
                lag += i128::from(c) * i128::from(s.rates[i]);
                *idx = c.unsigned_abs();
            }
            if lag != i128::from(k) {
                return Err(Error::ScheduleInconsistency {
                    k,
                    l,
                    reason: format!("signed combination gives lag {lag}"),
                });
            }
            entries.push(ScheduleEntry { k, l, indices });
        }
    }
    Ok(SampleSchedule {
        rates: s.rates,
        conj_slot,
        lags,
        snapshots,
        entries,
    })
}

/// Worst-case acquisition delay in Nyquist intervals: `max |k·b_i + l·a_i| · max M_i`.
pub fn delay_bound(s: &SchemeCoefficients, lags: u64, snapshots: u64) -> Result<u64> {
    if lags == 0 || snapshots == 0 {
        return Err(Error::invalid(format!(
            "delay bound needs K >= 1 and L >= 1, got K={lags}, L={snapshots}"
        )));
    }
    // |k·b_i + l·a_i| is convex in (k, l), so the grid corners attain the maximum.
    let mut max_index = 0u64;
    for i in 0..3 {
        for (k, l) in [(1, 1), (lags, 1), (1, snapshots), (lags, snapshots)] {
            max_index = max_index.max(coefficient(s, i, k, l)?.unsigned_abs());
        }
    }
    max_index
        .checked_mul(s.max_rate())
        .ok_or(Error::Overflow("delay bound"))
}

/// The consecutive-rate delay ceiling `2(N−1)(K+L)·max M`.
pub fn consecutive_delay_ceiling(n: u64, lags: u64, snapshots: u64, max_rate: u64) -> Option<u64> {
    2u64.checked_mul(n.checked_sub(1)?)?
        .checked_mul(lags.checked_add(snapshots)?)?
        .checked_mul(max_rate)
}

/// Every 3-subset of the sampler bank admitting a scheme, in lexicographic index order.
pub fn enumerate_triplets(samplers: &SamplerSet) -> Vec<SchemeCoefficients> {
    let rates = samplers.rates();
    let n = rates.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if let Ok(s) = solve_scheme([rates[i], rates[j], rates[k]]) {
                    out.push(s.with_triple([i, j, k]));
                }
            }
        }
    }
    out
}

fn choose3(n: u64) -> u64 {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// `C(N,3) − C(N_e,3) − C(N−N_e,3)`: triples that are not all even or all odd.
pub fn solvable_triplet_ceiling(rates: &[u64]) -> u64 {
    let n = rates.len() as u64;
    let even = rates.iter().filter(|&&m| m % 2 == 0).count() as u64;
    choose3(n) - choose3(even) - choose3(n - even)
}

pub fn triplet_count(n: usize) -> u64 {
    choose3(n as u64)
}
