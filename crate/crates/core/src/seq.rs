//! Finitely supported real sequences.
//!
//! Coordinates are numbered from 1. A [`FinSeq`] stores `offset` leading
//! zeros followed by an explicit coefficient list; everything after the list
//! is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FinSeq {
    #[serde(default)]
    pub offset: usize,
    pub coeffs: Vec<f64>,
}

impl FinSeq {
    pub fn new(coeffs: Vec<f64>) -> Self {
        FinSeq { offset: 0, coeffs }
    }

    pub fn with_offset(offset: usize, coeffs: Vec<f64>) -> Self {
        FinSeq { offset, coeffs }
    }

    pub fn empty() -> Self {
        FinSeq::default()
    }

    /// Constant tuple of length `k`.
    pub fn constant(k: usize, value: f64) -> Self {
        FinSeq::new(vec![value; k])
    }

    /// Indicator of the listed coordinates (1-based, any order, duplicates ignored).
    pub fn indicator(coords: &[usize]) -> Self {
        let mut f = FinSeq::empty();
        for &c in coords {
            f.set(c, 1.0);
        }
        f
    }

    /// Number of stored coordinates including the leading zeros.
    pub fn extent(&self) -> usize {
        self.offset + self.coeffs.len()
    }

    /// Coefficient at 1-based coordinate `j` (0 outside the stored range).
    pub fn get(&self, j: usize) -> f64 {
        if j <= self.offset {
            return 0.0;
        }
        self.coeffs.get(j - self.offset - 1).copied().unwrap_or(0.0)
    }

    /// Sets coordinate `j`, growing storage as needed.
    pub fn set(&mut self, j: usize, value: f64) {
        assert!(j >= 1, "coordinates are 1-based");
        if self.coeffs.is_empty() {
            if value == 0.0 {
                return;
            }
            self.offset = j - 1;
            self.coeffs.push(value);
            return;
        }
        if j <= self.offset {
            if value == 0.0 {
                return;
            }
            let grow = self.offset - (j - 1);
            let mut coeffs = vec![0.0; grow];
            coeffs.append(&mut self.coeffs);
            self.coeffs = coeffs;
            self.offset = j - 1;
        }
        let idx = j - self.offset - 1;
        if idx >= self.coeffs.len() {
            if value == 0.0 {
                return;
            }
            self.coeffs.resize(idx + 1, 0.0);
        }
        self.coeffs[idx] = value;
    }

    /// Iterator over `(coordinate, value)` for the nonzero coefficients.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(i, v)| (self.offset + i + 1, *v))
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|v| *v == 0.0)
    }

    /// Trims trailing zeros and absorbs leading zeros into the offset.
    pub fn canonical(&self) -> FinSeq {
        let Some(first) = self.coeffs.iter().position(|v| *v != 0.0) else {
            return FinSeq::empty();
        };
        let last = self.coeffs.iter().rposition(|v| *v != 0.0).unwrap();
        FinSeq {
            offset: self.offset + first,
            coeffs: self.coeffs[first..=last].to_vec(),
        }
    }

    /// The shift `I_m`: the same coefficients preceded by `m` zeros.
    pub fn shift(&self, m: usize) -> FinSeq {
        FinSeq {
            offset: m,
            coeffs: self.dense(),
        }
    }

    /// Dense coefficient list starting at coordinate 1.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.offset];
        out.extend_from_slice(&self.coeffs);
        out
    }

    /// Concatenation `(self, g)`: `g` is placed right after the last stored
    /// coordinate of `self`.
    pub fn concat(&self, g: &FinSeq) -> FinSeq {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + g.extent());
        coeffs.extend_from_slice(&self.coeffs);
        coeffs.resize(coeffs.len() + g.offset, 0.0);
        coeffs.extend_from_slice(&g.coeffs);
        FinSeq {
            offset: self.offset,
            coeffs,
        }
    }

    /// Places the stored coefficients at the given strictly increasing
    /// 1-based coordinates.
    pub fn spread(&self, positions: &[usize]) -> Result<FinSeq> {
        if positions.len() != self.coeffs.len() {
            return Err(Error::ShapeMismatch(format!(
                "spread needs {} positions, got {}",
                self.coeffs.len(),
                positions.len()
            )));
        }
        if positions.first() == Some(&0) || positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ShapeMismatch(
                "spread positions must be strictly increasing and >= 1".into(),
            ));
        }
        let mut out = FinSeq::empty();
        for (&pos, &v) in positions.iter().zip(&self.coeffs) {
            out.set(pos, v);
        }
        Ok(out)
    }

    /// Keeps the coefficients whose coordinates lie in `keep` and closes the
    /// gaps, in increasing coordinate order.
    pub fn restrict_compress(&self, keep: &[usize]) -> FinSeq {
        let mut coords = keep.to_vec();
        coords.sort_unstable();
        coords.dedup();
        FinSeq::new(coords.into_iter().map(|j| self.get(j)).collect())
    }

    pub fn scale(&self, s: f64) -> FinSeq {
        FinSeq {
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|v| v * s).collect(),
        }
    }

    /// Coordinatewise sum.
    pub fn add(&self, other: &FinSeq) -> FinSeq {
        let len = self.extent().max(other.extent());
        let mut out = FinSeq::new((1..=len).map(|j| self.get(j) + other.get(j)).collect());
        if let Some(start) = out.coeffs.iter().position(|v| *v != 0.0) {
            out = FinSeq::with_offset(start, out.coeffs[start..].to_vec());
        }
        out
    }

    /// Flips the sign of the coefficient at each listed coordinate.
    pub fn flip_signs(&self, coords: &[usize]) -> FinSeq {
        let mut out = self.clone();
        for &j in coords {
            if j > out.offset && j <= out.extent() {
                let idx = j - out.offset - 1;
                out.coeffs[idx] = -out.coeffs[idx];
            }
        }
        out
    }
}

impl From<Vec<f64>> for FinSeq {
    fn from(coeffs: Vec<f64>) -> Self {
        FinSeq::new(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_prepends_zeros() {
        let f = FinSeq::new(vec![1.0, 2.0]);
        assert_eq!(f.shift(3).dense(), vec![0.0, 0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn concat_places_after_last_stored_coordinate() {
        let f = FinSeq::with_offset(1, vec![1.0, 0.0]);
        let g = FinSeq::with_offset(2, vec![3.0]);
        assert_eq!(f.concat(&g).dense(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(FinSeq::empty().concat(&g).dense(), g.dense());
    }

    #[test]
    fn restrict_compress_closes_gaps() {
        let f = FinSeq::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(f.restrict_compress(&[3, 1]).coeffs, vec![1.0, 3.0]);
        assert_eq!(f.restrict_compress(&[5]).coeffs, vec![0.0]);
    }

    #[test]
    fn spread_validates_positions() {
        let f = FinSeq::new(vec![1.0, 2.0]);
        assert_eq!(
            f.spread(&[2, 5]).unwrap().dense(),
            vec![0.0, 1.0, 0.0, 0.0, 2.0]
        );
        assert!(f.spread(&[2]).is_err());
        assert!(f.spread(&[3, 3]).is_err());
        assert!(f.spread(&[0, 3]).is_err());
    }

    #[test]
    fn canonical_trims() {
        let f = FinSeq::with_offset(2, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.canonical(), FinSeq::with_offset(3, vec![1.0]));
        assert_eq!(FinSeq::new(vec![0.0, 0.0]).canonical(), FinSeq::empty());
    }

    #[test]
    fn set_grows_both_ways() {
        let mut f = FinSeq::empty();
        f.set(5, 1.0);
        f.set(2, 2.0);
        f.set(7, 3.0);
        assert_eq!(f.dense(), vec![0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0]);
        assert_eq!(
            f.support().collect::<Vec<_>>(),
            vec![(2, 2.0), (5, 1.0), (7, 3.0)]
        );
    }

    #[test]
    fn json_shape() {
        let f: FinSeq = serde_json::from_str(r#"{"offset":2,"coeffs":[1.0,-1.5]}"#).unwrap();
        assert_eq!(f, FinSeq::with_offset(2, vec![1.0, -1.5]));
    }
}
