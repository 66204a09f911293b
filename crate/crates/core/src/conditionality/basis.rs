use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::SpaceNorm;
use crate::seq::FinSeq;

/// Largest dimension for which the condition number is computed.
pub const CONDITION_ESTIMATE_MAX_DIM: usize = 512;

/// `d` vectors spanning a `d`-dimensional coordinate space, with the norm of
/// the ambient space. Coordinates are 1-based in the public interface.
#[derive(Debug, Clone)]
pub struct FiniteBasis {
    /// Sparse columns: `(coordinate - 1, value)`.
    columns: Vec<Vec<(usize, f64)>>,
    ambient: SpaceNorm,
    label: String,
    full_coordinate_span_prefix: Option<usize>,
    unit: bool,
    condition_estimate: Option<f64>,
}

/// How a basis is described in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub label: String,
    pub dim: usize,
    pub ambient: crate::norms::SpaceSpec,
    pub full_coordinate_span_prefix: Option<usize>,
    pub condition_estimate: Option<f64>,
}

impl FiniteBasis {
    /// Validates linear independence and, if declared, the prefix property:
    /// for `j <= s` the vector `x_j` lives on coordinates `1..=j` and has a
    /// nonzero `j`-th coordinate.
    pub fn new(
        vectors: Vec<FinSeq>,
        ambient: SpaceNorm,
        label: impl Into<String>,
        full_coordinate_span_prefix: Option<usize>,
    ) -> Result<FiniteBasis> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::ShapeMismatch(
                "a basis needs at least one vector".into(),
            ));
        }
        let mut columns = Vec::with_capacity(d);
        for (j, v) in vectors.iter().enumerate() {
            let col: Vec<(usize, f64)> = v.support().map(|(c, a)| (c - 1, a)).collect();
            if let Some(&(c, _)) = col.last() {
                if c >= d {
                    return Err(Error::ShapeMismatch(format!(
                        "vector {} has coordinate {} outside 1..={d}",
                        j + 1,
                        c + 1
                    )));
                }
            }
            columns.push(col);
        }
        if let Some(s) = full_coordinate_span_prefix {
            if s > d {
                return Err(Error::ShapeMismatch(format!(
                    "prefix {s} exceeds dimension {d}"
                )));
            }
            for (j, col) in columns.iter().enumerate().take(s) {
                let inside = col.iter().all(|&(c, _)| c <= j);
                let pivot = col.iter().any(|&(c, a)| c == j && a != 0.0);
                if !(inside && pivot) {
                    return Err(Error::PreconditionViolated(format!(
                        "vector {} does not extend the span of the first {} coordinates",
                        j + 1,
                        j
                    )));
                }
            }
        }
        let mut basis = FiniteBasis {
            columns,
            ambient,
            label: label.into(),
            full_coordinate_span_prefix,
            unit: false,
            condition_estimate: None,
        };
        let m = basis.matrix(d);
        let lu = m.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::PreconditionViolated("vectors are linearly dependent".into()))?;
        if d <= CONDITION_ESTIMATE_MAX_DIM {
            basis.condition_estimate = Some(one_norm(&m) * one_norm(&inv));
        }
        Ok(basis)
    }

    /// The unit vector basis of a `d`-dimensional coordinate space.
    pub fn unit_vectors(
        d: usize,
        ambient: SpaceNorm,
        label: impl Into<String>,
    ) -> Result<FiniteBasis> {
        if d == 0 {
            return Err(Error::ShapeMismatch(
                "a basis needs at least one vector".into(),
            ));
        }
        Ok(FiniteBasis {
            columns: (0..d).map(|j| vec![(j, 1.0)]).collect(),
            ambient,
            label: label.into(),
            full_coordinate_span_prefix: Some(d),
            unit: true,
            condition_estimate: Some(1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn ambient(&self) -> &SpaceNorm {
        &self.ambient
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn full_coordinate_span_prefix(&self) -> Option<usize> {
        self.full_coordinate_span_prefix
    }

    pub fn is_unit_vector_basis(&self) -> bool {
        self.unit
    }

    /// `||M||_1 ||M^-1||_1` for the change-of-basis matrix `M`, when `d` is
    /// at most [`CONDITION_ESTIMATE_MAX_DIM`].
    pub fn condition_estimate(&self) -> Option<f64> {
        self.condition_estimate
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            label: self.label.clone(),
            dim: self.dim(),
            ambient: self.ambient.spec(),
            full_coordinate_span_prefix: self.full_coordinate_span_prefix,
            condition_estimate: self.condition_estimate,
        }
    }

    /// Vector `j` (1-based) as a sequence.
    pub fn vector(&self, j: usize) -> FinSeq {
        let mut f = FinSeq::empty();
        for &(c, a) in &self.columns[j - 1] {
            f.set(c + 1, a);
        }
        f
    }

    /// The leading `m x m` block of the change-of-basis matrix; column `j`
    /// holds the coordinates of `x_j`.
    pub fn matrix(&self, m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m, m);
        for (j, col) in self.columns.iter().enumerate().take(m) {
            for &(c, a) in col {
                if c < m {
                    out[(c, j)] = a;
                }
            }
        }
        out
    }

    /// Coordinates of `sum_j a_j x_j` (dense, length `d`).
    pub fn expand_dense(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        for (col, &a) in self.columns.iter().zip(coeffs) {
            if a != 0.0 {
                for &(c, v) in col {
                    z[c] += a * v;
                }
            }
        }
        z
    }

    pub fn expand(&self, coeffs: &[f64]) -> FinSeq {
        FinSeq::new(self.expand_dense(coeffs))
    }

    /// Adds `a x_j` (0-based `j`) into the dense coordinate vector `z`.
    pub(crate) fn axpy(&self, j: usize, a: f64, z: &mut [f64]) {
        for &(c, v) in &self.columns[j] {
            z[c] += a * v;
        }
    }

    pub(crate) fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    /// Ambient norm of a dense coordinate vector.
    pub fn norm_dense(&self, z: &[f64]) -> f64 {
        match &self.ambient {
            SpaceNorm::Sup => z.iter().fold(0.0, |m, a| m.max(a.abs())),
            SpaceNorm::Ellp { p } if *p == 1.0 => {
                crate::sum::compensated_sum(z.iter().map(|a| a.abs()))
            }
            SpaceNorm::Mixed { p, blocks } => {
                let mut acc = crate::sum::NeumaierSum::new();
                let mut start = 0;
                for &len in blocks {
                    let end = (start + len).min(z.len());
                    let m = z[start.min(end)..end]
                        .iter()
                        .fold(0.0f64, |m, a| m.max(a.abs()));
                    acc.add(if *p == 1.0 { m } else { m.powf(*p) });
                    start += len;
                }
                if *p == 1.0 {
                    acc.value()
                } else {
                    acc.value().powf(1.0 / p)
                }
            }
            other => other
                .eval(&FinSeq::new(z.to_vec()))
                .expect("dimension fits the ambient"),
        }
    }

    /// Norm of `sum_j a_j x_j`.
    pub fn norm_of(&self, coeffs: &[f64]) -> f64 {
        self.norm_dense(&self.expand_dense(coeffs))
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `s_j = e_1 + ... + e_j`, `j = 1..=n`, in `ℓ∞^n`.
pub fn summing_basis(n: usize) -> Result<FiniteBasis> {
    if n == 0 {
        return Err(Error::ShapeMismatch("summing basis needs n >= 1".into()));
    }
    let vectors = (1..=n).map(|j| FinSeq::constant(j, 1.0)).collect();
    FiniteBasis::new(vectors, SpaceNorm::Sup, format!("summing({n})"), Some(n))
}

/// Summing bases of sizes `2, 4, ..., 2^levels` laid end to end inside
/// `(⊕_n ℓ∞^{2^n})_p`.
pub fn besov_sum_basis(levels: usize, p: f64) -> Result<FiniteBasis> {
    if levels == 0 {
        return Err(Error::ShapeMismatch("besov basis needs levels >= 1".into()));
    }
    if levels > 20 {
        return Err(Error::TooLarge(format!(
            "levels = {levels} gives dimension beyond 2^21"
        )));
    }
    let sizes: Vec<usize> = (1..=levels).map(|n| 1usize << n).collect();
    let ambient = SpaceNorm::mixed(p, sizes.clone())?;
    let mut vectors = Vec::new();
    let mut offset = 0;
    for &size in &sizes {
        for j in 1..=size {
            vectors.push(FinSeq::with_offset(offset, vec![1.0; j]));
        }
        offset += size;
    }
    let d = offset;
    FiniteBasis::new(vectors, ambient, format!("besov({levels},p={p})"), Some(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summing_examples() {
        let s = summing_basis(2).unwrap();
        assert_eq!(s.vector(1).dense(), vec![1.0]);
        assert_eq!(s.vector(2).dense(), vec![1.0, 1.0]);
        let s = summing_basis(4).unwrap();
        // e_3 = s_3 - s_2
        assert_eq!(
            s.expand_dense(&[0.0, -1.0, 1.0, 0.0]),
            vec![0.0, 0.0, 1.0, 0.0]
        );
        // c_k = sum_{j >= k} a_j
        assert_eq!(
            s.expand_dense(&[1.0, 2.0, 3.0, 4.0]),
            vec![10.0, 9.0, 7.0, 4.0]
        );
        assert!(s.condition_estimate().unwrap() >= 1.0);
    }

    #[test]
    fn besov_examples() {
        let b = besov_sum_basis(1, 2.0).unwrap();
        assert_eq!(b.dim(), 2);
        let b = besov_sum_basis(2, 1.0).unwrap();
        assert_eq!(b.dim(), 6);
        assert_eq!(b.norm_of(&[1.0; 6]), 6.0);
        assert_eq!(besov_sum_basis(5, 1.0).unwrap().dim(), (1 << 6) - 2);
    }

    #[test]
    fn rejects_dependent_and_bad_prefix() {
        let v = vec![FinSeq::new(vec![1.0, 1.0]), FinSeq::new(vec![2.0, 2.0])];
        assert!(FiniteBasis::new(v, SpaceNorm::Sup, "x", None).is_err());
        let v = vec![FinSeq::new(vec![1.0, 1.0]), FinSeq::new(vec![0.0, 1.0])];
        assert!(FiniteBasis::new(v.clone(), SpaceNorm::Sup, "x", None).is_ok());
        assert!(FiniteBasis::new(v, SpaceNorm::Sup, "x", Some(1)).is_err());
    }
}
