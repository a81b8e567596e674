//! The k-rank operator and sup-norm helpers.
//!
//! `k_rank(v, k)` is the k-th largest entry of `v`, counting duplicates, so
//! `k = 1` is the maximum and `k = v.len()` the minimum. It is
//! sup-non-expansive: `|k_rank(x, k) - k_rank(y, k)| <= sup_distance(x, y)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based rank position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct RankIndex(usize);

impl RankIndex {
    /// Rank 1, the maximum.
    pub const TOP: RankIndex = RankIndex(1);

    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::arg("rank index is 1-based, got 0"));
        }
        Ok(RankIndex(k))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Checks `k <= len` for a vector of length `len`.
    pub fn check(self, len: usize) -> Result<()> {
        if self.0 > len {
            return Err(Error::arg(format!(
                "rank {} out of range for {} entries",
                self.0, len
            )));
        }
        Ok(())
    }
}

impl TryFrom<usize> for RankIndex {
    type Error = Error;

    fn try_from(k: usize) -> Result<Self> {
        RankIndex::new(k)
    }
}

impl From<RankIndex> for usize {
    fn from(k: RankIndex) -> usize {
        k.0
    }
}

impl fmt::Display for RankIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// k-th largest entry of `v`.
pub fn k_rank(v: &[f64], k: RankIndex) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::arg("k-rank of an empty vector"));
    }
    k.check(v.len())?;
    check_finite(v)?;
    let mut scratch = v.to_vec();
    Ok(k_rank_in_place(&mut scratch, k.get()))
}

/// Unchecked kernel: reorders `buf` and returns its `k`-th largest entry.
/// Callers guarantee `1 <= k <= buf.len()` and finite entries.
pub(crate) fn k_rank_in_place(buf: &mut [f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= buf.len());
    match k {
        1 => buf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        _ if k == buf.len() => buf.iter().copied().fold(f64::INFINITY, f64::min),
        _ => {
            let idx = buf.len() - k;
            let (_, nth, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
            *nth
        }
    }
}

/// `max_i |x_i - y_i|`.
pub fn sup_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    check_finite(x)?;
    check_finite(y)?;
    Ok(sup_distance_unchecked(x, y))
}

pub(crate) fn sup_distance_unchecked(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Median of an odd-length vector, i.e. the `(M+1)/2`-rank.
pub fn median(v: &[f64]) -> Result<f64> {
    if v.len() % 2 == 0 {
        return Err(Error::arg(format!(
            "median needs an odd number of entries, got {}",
            v.len()
        )));
    }
    k_rank(v, RankIndex(v.len().div_ceil(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(k: usize) -> RankIndex {
        RankIndex::new(k).unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(k_rank(&[3.0, 1.0, 2.0], r(2)).unwrap(), 2.0);
        assert_eq!(k_rank(&[4.0, 4.0, 1.0], r(2)).unwrap(), 4.0);
        assert_eq!(k_rank(&[-5.0, -7.0], r(1)).unwrap(), -5.0);
        assert_eq!(k_rank(&[7.0], r(1)).unwrap(), 7.0);
    }

    #[test]
    fn rank_extremes_are_max_and_min() {
        let v = [0.5, -3.0, 9.0, 2.0, 2.0];
        assert_eq!(k_rank(&v, r(1)).unwrap(), 9.0);
        assert_eq!(k_rank(&v, r(5)).unwrap(), -3.0);
        assert_eq!(k_rank(&v, r(3)).unwrap(), 2.0);
        assert_eq!(k_rank(&v, r(4)).unwrap(), 0.5);
    }

    #[test]
    fn rank_errors() {
        assert!(RankIndex::new(0).is_err());
        assert!(matches!(
            k_rank(&[1.0, 2.0], r(3)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            k_rank(&[1.0, f64::NAN], r(1)),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            k_rank(&[f64::INFINITY], r(1)),
            Err(Error::NonFinite { index: 0, .. })
        ));
        assert!(k_rank(&[], r(1)).is_err());
    }

    #[test]
    fn sup_distance_examples() {
        assert_eq!(sup_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sup_distance(&[0.0, 0.0], &[3.0, -4.0]).unwrap(), 4.0);
        assert_eq!(sup_distance(&[1.0], &[-1.0]).unwrap(), 2.0);
        assert!(sup_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[5.0, 1.0, 3.0]).unwrap(), 3.0);
        assert_eq!(median(&[2.0, 2.0, 9.0]).unwrap(), 2.0);
        assert_eq!(median(&[-0.25]).unwrap(), -0.25);
        assert!(median(&[1.0, 2.0]).is_err());
    }
}
