//! Sequence-space norms on finitely supported vectors.

mod garling;

pub use garling::{
    brute_force_garling, garling_norm, garling_value, shifted_garling, shifted_garling_profile,
    GarlingNorm, SelectionWitness, BRUTE_FORCE_MAX_SUPPORT,
};
pub(crate) use garling::{garling_pow, profile, Runs};

use serde::{Deserialize, Serialize};

use crate::error::{check_p, Error, Result};
use crate::seq::FinSeq;
use crate::sum::{compensated_sum, NeumaierSum};
use crate::weights::{Weight, WeightSpec};

/// Lorentz norm: the decreasing rearrangement of `|a|` paired with the weights.
pub fn lorentz_norm(f: &FinSeq, w: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut mags: Vec<f64> = f.support().map(|(_, a)| a.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let s = compensated_sum(
        mags.iter()
            .enumerate()
            .map(|(j, a)| a.powf(p) * w.at(j + 1)),
    );
    Ok(s.powf(1.0 / p))
}

pub fn ellp_norm(f: &FinSeq, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(compensated_sum(f.coeffs.iter().map(|a| a.abs().powf(p))).powf(1.0 / p))
}

pub fn sup_norm(f: &FinSeq) -> f64 {
    f.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// `(sum_n (max_{j in block n} |x_j|)^p)^(1/p)` over explicitly given blocks.
pub fn mixed_norm_blocks<B: AsRef<[f64]>>(blocks: &[B], p: f64) -> Result<f64> {
    check_p(p)?;
    let mut acc = NeumaierSum::new();
    for b in blocks {
        let m = b.as_ref().iter().fold(0.0f64, |m, a| m.max(a.abs()));
        acc.add(m.powf(p));
    }
    Ok(acc.value().powf(1.0 / p))
}

/// Norm descriptor for the ambient spaces used throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceNorm {
    Garling {
        weight: Weight,
        p: f64,
    },
    Lorentz {
        weight: Weight,
        p: f64,
    },
    Ellp {
        p: f64,
    },
    Sup,
    /// `(⊕_n ℓ∞^{b_n})_p` with the given block sizes, laid out consecutively.
    Mixed {
        p: f64,
        blocks: Vec<usize>,
    },
}

/// JSON form of [`SpaceNorm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceSpec {
    Garling { weight: WeightSpec, p: f64 },
    Lorentz { weight: WeightSpec, p: f64 },
    Ellp { p: f64 },
    Sup,
    Mixed { p: f64, blocks: Vec<usize> },
}

impl SpaceNorm {
    pub fn garling(weight: Weight, p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(SpaceNorm::Garling { weight, p })
    }

    pub fn lorentz(weight: Weight, p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(SpaceNorm::Lorentz { weight, p })
    }

    pub fn ellp(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(SpaceNorm::Ellp { p })
    }

    pub fn mixed(p: f64, blocks: Vec<usize>) -> Result<Self> {
        check_p(p)?;
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::ShapeMismatch(
                "mixed norm needs a nonempty list of positive block sizes".into(),
            ));
        }
        Ok(SpaceNorm::Mixed { p, blocks })
    }

    pub fn from_spec(spec: &SpaceSpec) -> Result<Self> {
        match spec {
            SpaceSpec::Garling { weight, p } => {
                SpaceNorm::garling(Weight::new(weight.clone())?, *p)
            }
            SpaceSpec::Lorentz { weight, p } => {
                SpaceNorm::lorentz(Weight::new(weight.clone())?, *p)
            }
            SpaceSpec::Ellp { p } => SpaceNorm::ellp(*p),
            SpaceSpec::Sup => Ok(SpaceNorm::Sup),
            SpaceSpec::Mixed { p, blocks } => SpaceNorm::mixed(*p, blocks.clone()),
        }
    }

    pub fn spec(&self) -> SpaceSpec {
        match self {
            SpaceNorm::Garling { weight, p } => SpaceSpec::Garling {
                weight: weight.spec().clone(),
                p: *p,
            },
            SpaceNorm::Lorentz { weight, p } => SpaceSpec::Lorentz {
                weight: weight.spec().clone(),
                p: *p,
            },
            SpaceNorm::Ellp { p } => SpaceSpec::Ellp { p: *p },
            SpaceNorm::Sup => SpaceSpec::Sup,
            SpaceNorm::Mixed { p, blocks } => SpaceSpec::Mixed {
                p: *p,
                blocks: blocks.clone(),
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SpaceNorm::Garling { .. } => "garling",
            SpaceNorm::Lorentz { .. } => "lorentz",
            SpaceNorm::Ellp { .. } => "ellp",
            SpaceNorm::Sup => "sup",
            SpaceNorm::Mixed { .. } => "mixed",
        }
    }

    /// Norm of `sum_{j in A} e_j` depends only on `|A|` (true for every
    /// subsymmetric ambient here; false for mixed norms).
    pub fn is_spreading_invariant(&self) -> bool {
        !matches!(self, SpaceNorm::Mixed { .. })
    }

    /// Evaluates the norm. Mixed norms read the coordinates block after
    /// block and reject inputs stored beyond the last block.
    pub fn eval(&self, x: &FinSeq) -> Result<f64> {
        match self {
            SpaceNorm::Garling { weight, p } => garling_value(x, weight, *p),
            SpaceNorm::Lorentz { weight, p } => lorentz_norm(x, weight, *p),
            SpaceNorm::Ellp { p } => ellp_norm(x, *p),
            SpaceNorm::Sup => Ok(sup_norm(x)),
            SpaceNorm::Mixed { p, blocks } => {
                let total: usize = blocks.iter().sum();
                if x.canonical().extent() > total {
                    return Err(Error::ShapeMismatch(format!(
                        "vector extends to coordinate {} but the blocks cover {total}",
                        x.extent()
                    )));
                }
                let dense = x.dense();
                let mut start = 0;
                let mut acc = NeumaierSum::new();
                for &len in blocks {
                    let m = (start..start + len)
                        .map(|j| dense.get(j).copied().unwrap_or(0.0).abs())
                        .fold(0.0, f64::max);
                    acc.add(m.powf(*p));
                    start += len;
                }
                Ok(acc.value().powf(1.0 / p))
            }
        }
    }

    /// Evaluates a mixed norm on explicit blocks, checking their lengths.
    pub fn eval_blocks<B: AsRef<[f64]>>(&self, x: &[B]) -> Result<f64> {
        match self {
            SpaceNorm::Mixed { p, blocks } => {
                let shape_ok = x.len() == blocks.len()
                    && x.iter()
                        .zip(blocks)
                        .all(|(b, &len)| b.as_ref().len() == len);
                if !shape_ok {
                    return Err(Error::ShapeMismatch(format!(
                        "expected blocks of sizes {blocks:?}"
                    )));
                }
                mixed_norm_blocks(x, *p)
            }
            other => {
                let flat: Vec<f64> = x.iter().flat_map(|b| b.as_ref().iter().copied()).collect();
                other.eval(&FinSeq::new(flat))
            }
        }
    }
}

/// Free-function form of [`SpaceNorm::eval`].
pub fn eval_norm(x: &FinSeq, norm: &SpaceNorm) -> Result<f64> {
    norm.eval(x)
}
