//! Exact interval arithmetic for frequency supports.
//!
//! Every endpoint is an integer and every operation here is exact, so
//! disjointness tests, unions, and windowed-measure calculations carry no
//! floating-point ambiguity. Intervals are closed; two intervals that share
//! even a single endpoint count as overlapping, and they merge under union.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used for windowed measures and their ratios.
pub type Rational = num_rational::Ratio<i128>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntervalError {
    #[error("interval endpoints out of order: lo={lo}, hi={hi}")]
    EndpointsOutOfOrder { lo: i64, hi: i64 },
    #[error("hull of an empty set is undefined")]
    EmptyHull,
    #[error("dilation factor must be at least 1, got {0}")]
    DilationFactor(i64),
    #[error("modulation frequency must be positive, got {0}")]
    NonPositiveFrequency(i64),
    #[error("window radius must be positive, got {0}")]
    NonPositiveRadius(Rational),
    #[error("window radii must be positive and strictly ascending")]
    NonAscendingRadii,
    #[error("integer overflow in interval arithmetic")]
    Overflow,
}

/// Closed interval `[lo, hi]` with integer endpoints, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct FreqInterval {
    lo: i64,
    hi: i64,
}

impl FreqInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self, IntervalError> {
        if lo > hi {
            return Err(IntervalError::EndpointsOutOfOrder { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Symmetric interval `[-r, r]`; requires `r >= 0`.
    pub fn symmetric(r: i64) -> Result<Self, IntervalError> {
        Self::new(r.checked_neg().ok_or(IntervalError::Overflow)?, r)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn length(&self) -> i128 {
        self.hi as i128 - self.lo as i128
    }

    /// Scale both endpoints by an integer `factor >= 1`.
    pub fn dilate(&self, factor: i64) -> Result<Self, IntervalError> {
        if factor < 1 {
            return Err(IntervalError::DilationFactor(factor));
        }
        Ok(Self {
            lo: self.lo.checked_mul(factor).ok_or(IntervalError::Overflow)?,
            hi: self.hi.checked_mul(factor).ok_or(IntervalError::Overflow)?,
        })
    }

    /// Shift both endpoints by `shift` (any sign).
    pub fn translate(&self, shift: i64) -> Result<Self, IntervalError> {
        Ok(Self {
            lo: self.lo.checked_add(shift).ok_or(IntervalError::Overflow)?,
            hi: self.hi.checked_add(shift).ok_or(IntervalError::Overflow)?,
        })
    }

    /// Closed-interval overlap; sharing a single endpoint counts.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for FreqInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl TryFrom<(i64, i64)> for FreqInterval {
    type Error = IntervalError;

    fn try_from((lo, hi): (i64, i64)) -> Result<Self, Self::Error> {
        Self::new(lo, hi)
    }
}

impl From<FreqInterval> for (i64, i64) {
    fn from(iv: FreqInterval) -> Self {
        (iv.lo, iv.hi)
    }
}

/// Normalized finite union of closed integer intervals.
///
/// Invariant: parts are sorted ascending with a strict gap between
/// consecutive parts (`prev.hi < next.lo`). Construction through
/// [`FreqIntervalSet::from_intervals`] restores this form, merging parts that
/// overlap or touch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, i64)>", into = "Vec<(i64, i64)>")]
pub struct FreqIntervalSet {
    parts: Vec<FreqInterval>,
}

impl FreqIntervalSet {
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn singleton(iv: FreqInterval) -> Self {
        Self { parts: vec![iv] }
    }

    /// Build a normalized set from arbitrary intervals: sorts, then merges
    /// everything that overlaps or touches at an endpoint.
    pub fn from_intervals<I>(intervals: I) -> Self
    where
        I: IntoIterator<Item = FreqInterval>,
    {
        let mut v: Vec<FreqInterval> = intervals.into_iter().collect();
        v.sort_by_key(|iv| (iv.lo, iv.hi));
        let mut parts: Vec<FreqInterval> = Vec::with_capacity(v.len());
        for iv in v {
            match parts.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => parts.push(iv),
            }
        }
        Self { parts }
    }

    pub fn parts(&self) -> &[FreqInterval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Smallest single interval containing the set; errors on the empty set.
    pub fn hull(&self) -> Result<FreqInterval, IntervalError> {
        match (self.parts.first(), self.parts.last()) {
            (Some(first), Some(last)) => Ok(FreqInterval {
                lo: first.lo,
                hi: last.hi,
            }),
            _ => Err(IntervalError::EmptyHull),
        }
    }

    /// Scale every part by `factor >= 1`. Ordering and strict gaps are
    /// preserved, so no re-normalization is needed.
    pub fn dilate(&self, factor: i64) -> Result<Self, IntervalError> {
        let parts = self
            .parts
            .iter()
            .map(|iv| iv.dilate(factor))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { parts })
    }

    /// Shift every part by `shift`.
    pub fn translate(&self, shift: i64) -> Result<Self, IntervalError> {
        let parts = self
            .parts
            .iter()
            .map(|iv| iv.translate(shift))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { parts })
    }

    /// Normalized union; touching parts merge (`[0,1] ∪ [1,2] = [0,2]`).
    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.parts.iter().chain(other.parts.iter()).copied())
    }

    /// Exact intersection; the result is automatically normalized.
    pub fn intersect(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0usize, 0usize);
        let mut parts = Vec::new();
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                parts.push(FreqInterval { lo, hi });
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { parts }
    }

    /// True iff the two sets share no point; a shared endpoint is overlap.
    pub fn are_disjoint(&self, other: &Self) -> bool {
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.parts.len() && j < other.parts.len() {
            let a = &self.parts[i];
            let b = &other.parts[j];
            if a.overlaps(b) {
                return false;
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        true
    }

    /// Total length (Lebesgue measure), exact.
    pub fn measure(&self) -> i128 {
        self.parts.iter().map(|iv| iv.length()).sum()
    }

    /// Exact measure of the set clipped to the open window `(-radius, radius)`.
    ///
    /// Open versus closed clipping cannot change the measure; the open window
    /// matches how the profile is read off at half-integer radii.
    pub fn density(&self, radius: Rational) -> Result<Rational, IntervalError> {
        let zero = Rational::from_integer(0);
        if radius <= zero {
            return Err(IntervalError::NonPositiveRadius(radius));
        }
        let mut total = zero;
        for iv in &self.parts {
            let lo = Rational::from_integer(iv.lo as i128).max(-radius);
            let hi = Rational::from_integer(iv.hi as i128).min(radius);
            if hi > lo {
                total += hi - lo;
            }
        }
        Ok(total)
    }

    /// Windowed measures at a strictly ascending list of positive radii.
    pub fn density_profile(&self, radii: &[Rational]) -> Result<Vec<DensityPoint>, IntervalError> {
        let zero = Rational::from_integer(0);
        let mut prev: Option<Rational> = None;
        for &r in radii {
            if r <= zero {
                return Err(IntervalError::NonAscendingRadii);
            }
            if let Some(p) = prev {
                if r <= p {
                    return Err(IntervalError::NonAscendingRadii);
                }
            }
            prev = Some(r);
        }
        radii
            .iter()
            .map(|&radius| {
                let h = self.density(radius)?;
                Ok(DensityPoint {
                    radius,
                    h,
                    ratio: h / radius,
                })
            })
            .collect()
    }
}

impl fmt::Display for FreqIntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "∅");
        }
        for (i, iv) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<(i64, i64)>> for FreqIntervalSet {
    type Error = IntervalError;

    fn try_from(pairs: Vec<(i64, i64)>) -> Result<Self, Self::Error> {
        let parts = pairs
            .into_iter()
            .map(FreqInterval::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_intervals(parts))
    }
}

impl From<FreqIntervalSet> for Vec<(i64, i64)> {
    fn from(set: FreqIntervalSet) -> Self {
        set.parts.into_iter().map(Into::into).collect()
    }
}

/// One row of a density profile: the window radius, the exact measure of the
/// set within `(-radius, radius)` (written `h` in the CSV output), and the
/// ratio of the two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensityPoint {
    pub radius: Rational,
    pub h: Rational,
    pub ratio: Rational,
}

/// Support of a signal after multiplication by `cos(k t)`: the doubled
/// previous hull, translated to `+k` and `-k`, as a normalized union.
///
/// For a symmetric hull `[-r, r]` this is `[k-2r, k+2r] ∪ [-k-2r, -k+2r]`;
/// when `k <= 4r` the two pieces meet and merge into one part.
pub fn spectrum_pieces(prev_hull: FreqInterval, k: i64) -> Result<FreqIntervalSet, IntervalError> {
    if k <= 0 {
        return Err(IntervalError::NonPositiveFrequency(k));
    }
    let doubled = prev_hull.dilate(2)?;
    Ok(FreqIntervalSet::from_intervals([
        doubled.translate(-k)?,
        doubled.translate(k)?,
    ]))
}

/// Hull of the previous hull together with both modulated pieces; for a
/// symmetric hull `[-r, r]` this is `[-(k+2r), k+2r]`.
pub fn next_hull(prev_hull: FreqInterval, k: i64) -> Result<FreqInterval, IntervalError> {
    if k <= 0 {
        return Err(IntervalError::NonPositiveFrequency(k));
    }
    let doubled = prev_hull.dilate(2)?;
    let minus = doubled.translate(-k)?;
    let plus = doubled.translate(k)?;
    FreqInterval::new(prev_hull.lo.min(minus.lo), prev_hull.hi.max(plus.hi))
}

/// Render an exact rational as a decimal string with `digits` places after
/// the point, rounding half away from zero. Digit-by-digit long division, so
/// it cannot overflow for any representable rational.
pub fn rational_to_decimal(value: &Rational, digits: u32) -> String {
    let numer = *value.numer();
    let denom = *value.denom(); // Ratio keeps denom > 0
    let negative = numer < 0;
    let mut n = numer.unsigned_abs();
    let d = denom.unsigned_abs();
    let int_part = n / d;
    n %= d;
    let mut frac = String::with_capacity(digits as usize);
    for _ in 0..digits {
        n *= 10;
        frac.push(char::from(b'0' + (n / d) as u8));
        n %= d;
    }
    // round the last rendered digit half away from zero
    let mut digits_vec: Vec<u8> = frac.into_bytes();
    let mut int_carry = 0u128;
    if 2 * n >= d {
        let mut i = digits_vec.len();
        loop {
            if i == 0 {
                int_carry = 1;
                break;
            }
            i -= 1;
            if digits_vec[i] == b'9' {
                digits_vec[i] = b'0';
            } else {
                digits_vec[i] += 1;
                break;
            }
        }
    }
    let int_part = int_part + int_carry;
    let sign = if negative && (int_part > 0 || digits_vec.iter().any(|&b| b != b'0')) {
        "-"
    } else {
        ""
    };
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!(
            "{sign}{int_part}.{}",
            String::from_utf8(digits_vec).expect("decimal digits are ascii")
        )
    }
}
