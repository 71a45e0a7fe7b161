//! Sparse linear arrays and their difference coarrays.
//!
//! Positions are integers in units of half a wavelength. A Diophantine array
//! interleaves three uniform subarrays with spacings `q·p1`, `q·p2` and `p1·p2`;
//! its coarray is the set of signed triple combinations `±(d1 − d2) ± d3`. The
//! co-prime baseline uses two subarrays and the pair differences `±(d1 − d2)`.

use std::collections::BTreeMap;

use crate::diophantine::gcd_u64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Diophantine { p1: u64, p2: u64, q: u64 },
    Coprime { m1: u64, m2: u64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    positions: Vec<i64>,
    subarrays: Vec<Vec<i64>>,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit subarrays (two for the pair coarray,
    /// three for the triple coarray). Shared positions become one sensor.
    pub fn from_subarrays(subarrays: Vec<Vec<i64>>) -> Result<Self> {
        Self::build(ArrayKind::Custom, subarrays)
    }

    fn build(kind: ArrayKind, subarrays: Vec<Vec<i64>>) -> Result<Self> {
        if !(2..=3).contains(&subarrays.len()) || subarrays.iter().any(Vec::is_empty) {
            return Err(Error::invalid(
                "an array needs two or three nonempty subarrays",
            ));
        }
        let mut positions: Vec<i64> = subarrays.iter().flatten().copied().collect();
        if positions.iter().any(|&p| p < 0) {
            return Err(Error::invalid("sensor positions must be nonnegative"));
        }
        positions.sort_unstable();
        positions.dedup();
        Ok(Self {
            kind,
            positions,
            subarrays,
        })
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    /// Sorted distinct sensor positions.
    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn subarrays(&self) -> &[Vec<i64>] {
        &self.subarrays
    }

    /// Subarrays (0-based) that contain `position`.
    pub fn labels_at(&self, position: i64) -> Vec<usize> {
        self.subarrays
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&position))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sensor_count(&self) -> usize {
        self.positions.len()
    }

    /// Sensor count from the closed-form subarray sizes, which counts the shared
    /// origin more than once.
    pub fn formula_sensor_count(&self) -> u64 {
        match self.kind {
            ArrayKind::Diophantine { p1, p2, q } => p1 + 2 * p2 + q - 1,
            ArrayKind::Coprime { m1, m2 } => m1 + 2 * m2 - 1,
            ArrayKind::Custom => self.subarrays.iter().map(|s| s.len() as u64).sum(),
        }
    }

    pub fn min_spacing(&self) -> Option<i64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).min()
    }

    /// Span guaranteed by construction: `p1·p2·q` or `M1·M2`.
    pub fn guaranteed_span(&self) -> Option<i64> {
        match self.kind {
            ArrayKind::Diophantine { p1, p2, q } => Some((p1 * p2 * q) as i64),
            ArrayKind::Coprime { m1, m2 } => Some((m1 * m2) as i64),
            ArrayKind::Custom => None,
        }
    }
}

fn pairwise_coprime(values: &[u64]) -> bool {
    values
        .iter()
        .enumerate()
        .all(|(i, &x)| values[i + 1..].iter().all(|&y| gcd_u64(x, y) == 1))
}

/// Three uniform subarrays at multiples of `M1 = q·p1` (`2·p2` sensors),
/// `M2 = q·p2` (`p1` sensors) and `M3 = p1·p2` (`q` sensors).
pub fn design_diophantine_array(p1: u64, p2: u64, q: u64) -> Result<ArrayGeometry> {
    if p1 < 2 || p2 < 2 || q < 2 {
        return Err(Error::invalid(format!(
            "p1, p2, q must each be >= 2, got ({p1}, {p2}, {q})"
        )));
    }
    if !pairwise_coprime(&[p1, p2, q]) {
        return Err(Error::invalid(format!(
            "p1, p2, q must be pairwise coprime, got ({p1}, {p2}, {q})"
        )));
    }
    let (m1, m2, m3) = (q * p1, q * p2, p1 * p2);
    let sub = |spacing: u64, count: u64| -> Vec<i64> {
        (0..count).map(|m| (m * spacing) as i64).collect()
    };
    ArrayGeometry::build(
        ArrayKind::Diophantine { p1, p2, q },
        vec![sub(m1, 2 * p2), sub(m2, p1), sub(m3, q)],
    )
}

/// The co-prime baseline: `2·M2` sensors at multiples of `M1` and `M1 − 1`
/// further sensors at nonzero multiples of `M2`.
///
/// The origin is listed in both subarrays so the pair coarray can use it on
/// either side; it is still one sensor.
pub fn design_coprime_array(m1: u64, m2: u64) -> Result<ArrayGeometry> {
    if m1 < 2 || m2 < 2 {
        return Err(Error::invalid(format!(
            "co-prime rates must be >= 2, got ({m1}, {m2})"
        )));
    }
    if gcd_u64(m1, m2) != 1 {
        return Err(Error::invalid(format!("({m1}, {m2}) are not coprime")));
    }
    let first = (0..2 * m2).map(|m| (m * m1) as i64).collect();
    let second = (0..m1).map(|m| (m * m2) as i64).collect();
    ArrayGeometry::build(ArrayKind::Coprime { m1, m2 }, vec![first, second])
}

/// Signs applied to the three subarray positions.
///
/// A `+` slot enters the triple product unconjugated, a `−` slot conjugated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignPattern([i8; 3]);

impl SignPattern {
    /// `d1 − d2 + d3`.
    pub const PLAIN: SignPattern = SignPattern([1, -1, 1]);
    /// `−d1 + d2 + d3`.
    pub const SWAPPED: SignPattern = SignPattern([-1, 1, 1]);
    /// `d1 − d2 − d3`.
    pub const PLAIN_MINUS: SignPattern = SignPattern([1, -1, -1]);
    /// `−d1 + d2 − d3`, the full conjugate of [`SignPattern::PLAIN`].
    pub const CONJUGATED: SignPattern = SignPattern([-1, 1, -1]);

    pub const ALL: [SignPattern; 4] = [
        SignPattern::PLAIN,
        SignPattern::SWAPPED,
        SignPattern::PLAIN_MINUS,
        SignPattern::CONJUGATED,
    ];

    /// Any sign vector that is not constant.
    pub fn new(signs: [i8; 3]) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) || signs.iter().all(|&s| s == signs[0]) {
            return Err(Error::invalid(format!(
                "{signs:?} is not a mixed sign pattern"
            )));
        }
        Ok(Self(signs))
    }

    pub fn signs(&self) -> [i8; 3] {
        self.0
    }

    pub fn lag(&self, positions: [i64; 3]) -> i64 {
        (0..3).map(|i| i64::from(self.0[i]) * positions[i]).sum()
    }

    /// The slot whose sign differs from the other two. Its snapshot time is the
    /// sum of the other two times.
    pub fn odd_slot(&self) -> usize {
        let plus = self.0.iter().filter(|&&s| s > 0).count();
        let odd_sign = if plus == 1 { 1 } else { -1 };
        self.0
            .iter()
            .position(|&s| s == odd_sign)
            .expect("mixed pattern")
    }

    /// The statistic family this pattern belongs to.
    pub fn statistic(&self) -> Statistic {
        if self.0.iter().filter(|&&s| s > 0).count() == 2 {
            Statistic::Plain
        } else {
            Statistic::Conjugated
        }
    }

    pub fn negated(&self) -> SignPattern {
        SignPattern(self.0.map(|s| -s))
    }
}

/// Which product estimates a coarray lag.
///
/// `Plain` products have one conjugated factor and converge to coefficients
/// `|s|²·s`; `Conjugated` products have two and converge to `|s|²·conj(s)`.
/// For pairs, `Plain` means subarray 1 times the conjugate of subarray 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Plain,
    Conjugated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    /// `positions[0] − positions[1]` (subarray 1 minus subarray 2), or its negation when `flipped`.
    Pair { positions: [i64; 2], flipped: bool },
    Triple {
        positions: [i64; 3],
        pattern: SignPattern,
    },
}

impl Witness {
    pub fn lag(&self) -> i64 {
        match *self {
            Witness::Pair { positions, flipped } => {
                let d = positions[0] - positions[1];
                if flipped {
                    -d
                } else {
                    d
                }
            }
            Witness::Triple { positions, pattern } => pattern.lag(positions),
        }
    }

    pub fn statistic(&self) -> Statistic {
        match *self {
            Witness::Pair { flipped: false, .. } => Statistic::Plain,
            Witness::Pair { flipped: true, .. } => Statistic::Conjugated,
            Witness::Triple { pattern, .. } => pattern.statistic(),
        }
    }
}

fn witnesses(g: &ArrayGeometry) -> Vec<Witness> {
    let subs = g.subarrays();
    let mut out = Vec::new();
    if subs.len() == 2 {
        for &d1 in &subs[0] {
            for &d2 in &subs[1] {
                for flipped in [false, true] {
                    out.push(Witness::Pair {
                        positions: [d1, d2],
                        flipped,
                    });
                }
            }
        }
    } else {
        for &d1 in &subs[0] {
            for &d2 in &subs[1] {
                for &d3 in &subs[2] {
                    for pattern in SignPattern::ALL {
                        out.push(Witness::Triple {
                            positions: [d1, d2, d3],
                            pattern,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Lags reachable by the designated pattern, with span, DOF and spacing summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarrayReport {
    pub witness_counts: BTreeMap<i64, usize>,
    /// Largest `S` with every lag in `[−S, S]` present.
    pub span: i64,
    /// `2S + 1`.
    pub dof: i64,
    pub distinct_lags: usize,
    pub min_spacing: Option<i64>,
    pub sensor_count: usize,
    pub formula_sensor_count: u64,
    /// Span promised by the construction (`p1·p2·q` or `M1·M2`), if known.
    pub guaranteed_span: Option<i64>,
}

impl CoarrayReport {
    pub fn contains(&self, lag: i64) -> bool {
        self.witness_counts.contains_key(&lag)
    }

    pub fn guaranteed_dof(&self) -> Option<i64> {
        self.guaranteed_span.map(|s| 2 * s + 1)
    }

    /// Whether the enumerated and closed-form sensor counts disagree.
    pub fn sensor_count_mismatch(&self) -> bool {
        self.sensor_count as u64 != self.formula_sensor_count
    }
}

pub fn coarray_lags(g: &ArrayGeometry) -> CoarrayReport {
    let mut witness_counts = BTreeMap::new();
    for w in witnesses(g) {
        *witness_counts.entry(w.lag()).or_insert(0) += 1;
    }
    let mut span = 0;
    while witness_counts.contains_key(&(span + 1)) && witness_counts.contains_key(&-(span + 1)) {
        span += 1;
    }
    CoarrayReport {
        distinct_lags: witness_counts.len(),
        witness_counts,
        span,
        dof: 2 * span + 1,
        min_spacing: g.min_spacing(),
        sensor_count: g.sensor_count(),
        formula_sensor_count: g.formula_sensor_count(),
        guaranteed_span: g.guaranteed_span(),
    }
}

/// Every subarray combination realizing `lag`, tagged with its statistic.
pub fn lag_triples(g: &ArrayGeometry, lag: i64) -> Result<Vec<Witness>> {
    let found: Vec<Witness> = witnesses(g)
        .into_iter()
        .filter(|w| w.lag() == lag)
        .collect();
    if found.is_empty() {
        return Err(Error::NotCovered(lag));
    }
    Ok(found)
}

/// Witnesses for every lag at once, grouped by lag.
pub fn witness_table(g: &ArrayGeometry) -> BTreeMap<i64, Vec<Witness>> {
    let mut table: BTreeMap<i64, Vec<Witness>> = BTreeMap::new();
    for w in witnesses(g) {
        table.entry(w.lag()).or_default().push(w);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diophantine_435_layout() {
        let g = design_diophantine_array(4, 3, 5).unwrap();
        let sizes: Vec<usize> = g.subarrays().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![6, 4, 5]);
        assert_eq!(g.sensor_count(), 13);
        assert_eq!(g.formula_sensor_count(), 14);
        assert_eq!(&g.positions()[..5], &[0, 12, 15, 20, 24]);
        assert_eq!(g.min_spacing(), Some(3));
        assert_eq!(g.labels_at(0), vec![0, 1, 2]);
        assert_eq!(g.labels_at(60), vec![0]);
        assert_eq!(g.labels_at(45), vec![1]);
        assert_eq!(g.labels_at(24), vec![2]);
        assert!(matches!(
            design_diophantine_array(2, 4, 5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn coprime_layout() {
        let g = design_coprime_array(3, 5).unwrap();
        assert_eq!(g.sensor_count(), 12);
        assert_eq!(g.formula_sensor_count(), 12);
        assert!(
            g.positions().contains(&5)
                && g.positions().contains(&10)
                && g.positions().contains(&27)
        );
        assert_eq!(design_coprime_array(2, 3).unwrap().sensor_count(), 7);
        assert!(matches!(
            design_coprime_array(4, 6),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn diophantine_coarray_counts() {
        let r = coarray_lags(&design_diophantine_array(4, 3, 5).unwrap());
        assert!((-60..=60).all(|g| r.contains(g)));
        assert_eq!(r.guaranteed_dof(), Some(121));
        // Exhaustive enumeration over (m1, m2, m3, signs).
        assert_eq!(r.span, 74);
        assert_eq!(r.dof, 149);
        assert_eq!(r.distinct_lags, 223);
        assert!(r.sensor_count_mismatch());
    }

    #[test]
    fn coprime_coarray_covers_product() {
        let r = coarray_lags(&design_coprime_array(3, 5).unwrap());
        assert!((-15..=15).all(|g| r.contains(g)));
        // the pair difference set reaches M1·M2 + M2 − 1 before its first hole
        assert_eq!(r.span, 19);
        assert!(!r.contains(20));
    }

    #[test]
    fn single_sensor_coarray() {
        let g = ArrayGeometry::from_subarrays(vec![vec![0], vec![0], vec![0]]).unwrap();
        let r = coarray_lags(&g);
        assert_eq!(
            r.witness_counts.keys().copied().collect::<Vec<_>>(),
            vec![0]
        );
        assert_eq!(r.dof, 1);
        assert_eq!(r.min_spacing, None);
    }

    #[test]
    fn lag_one_witness() {
        let g = design_diophantine_array(4, 3, 5).unwrap();
        let w = lag_triples(&g, 1).unwrap();
        let target = Witness::Triple {
            positions: [40, 15, 24],
            pattern: SignPattern::PLAIN_MINUS,
        };
        assert!(w.contains(&target));
        assert_eq!(target.statistic(), Statistic::Conjugated);
        let zero = lag_triples(&g, 0).unwrap();
        assert!(zero.iter().any(|w| matches!(
            w,
            Witness::Triple {
                positions: [0, 0, 0],
                ..
            }
        )));
        assert!(matches!(
            lag_triples(&g, 1_000_000),
            Err(Error::NotCovered(1_000_000))
        ));
    }

    #[test]
    fn sign_patterns() {
        assert_eq!(SignPattern::PLAIN.odd_slot(), 1);
        assert_eq!(SignPattern::SWAPPED.odd_slot(), 0);
        assert_eq!(SignPattern::PLAIN_MINUS.odd_slot(), 0);
        assert_eq!(SignPattern::PLAIN.negated(), SignPattern::CONJUGATED);
        assert_eq!(SignPattern::PLAIN.statistic(), Statistic::Plain);
        assert_eq!(SignPattern::SWAPPED.statistic(), Statistic::Plain);
        assert!(SignPattern::new([1, 1, 1]).is_err());
        assert!(SignPattern::new([1, 0, -1]).is_err());
    }
}
