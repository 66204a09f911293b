//! Admissible weights: non-increasing, positive, `w_1 = 1`, tending to zero
//! with divergent sum.
//!
//! A [`Weight`] is evaluated lazily. Every family has an analytic tail so that
//! searches may probe arbitrarily deep indices. Prefix sums `W_m = w_1 + ... + w_m`
//! are accumulated with compensated summation and memoized in a table shared
//! between clones of the same weight.

use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Default relative growth that flags a regularity profile as growing.
pub const DEFAULT_TREND_EPSILON: f64 = 0.05;

/// JSON-facing description of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `w_j = j^(-alpha)`, `0 < alpha <= 1`.
    Power { alpha: f64 },
    /// `w_j = log 2 / log(j + 1)`.
    Log,
    /// Explicit leading values followed by a power tail spliced at the last
    /// explicit value: `w_j = w_L (L / j)^alpha` for `j > L`.
    Explicit {
        prefix: Vec<f64>,
        tail: Box<WeightSpec>,
    },
}

impl WeightSpec {
    pub fn power(alpha: f64) -> Self {
        WeightSpec::Power { alpha }
    }

    pub fn explicit(prefix: Vec<f64>, tail_alpha: f64) -> Self {
        WeightSpec::Explicit {
            prefix,
            tail: Box::new(WeightSpec::Power { alpha: tail_alpha }),
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    Power(f64),
    Log,
    Explicit { prefix: Arc<[f64]>, alpha: f64 },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(format!(
            "power exponent {alpha} outside (0, 1]; the weight would not be in c0 \\ l1"
        )))
    }
}

struct PrefixTable {
    sums: Vec<f64>,
    acc: NeumaierSum,
}

/// Read-only snapshot of prefix sums: `sums[m] = W_m`, `sums[0] = 0`.
#[derive(Clone)]
pub struct PrefixSums(Arc<PrefixTable>);

impl Deref for PrefixSums {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0.sums
    }
}

/// A weight in the admissible class.
#[derive(Clone)]
pub struct Weight {
    spec: WeightSpec,
    family: Family,
    table: Arc<RwLock<Arc<PrefixTable>>>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight").field("spec", &self.spec).finish()
    }
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Weight {
    /// Validates a spec and builds the weight. Explicit prefixes are rescaled
    /// so that the first entry is exactly one.
    pub fn new(spec: WeightSpec) -> Result<Self> {
        let (family, spec) = match spec {
            WeightSpec::Power { alpha } => {
                check_alpha(alpha)?;
                (Family::Power(alpha), WeightSpec::Power { alpha })
            }
            WeightSpec::Log => (Family::Log, WeightSpec::Log),
            WeightSpec::Explicit { prefix, tail } => {
                let alpha = match *tail {
                    WeightSpec::Power { alpha } => alpha,
                    _ => {
                        return Err(Error::InvalidWeight(
                            "explicit weights need a power tail".into(),
                        ))
                    }
                };
                check_alpha(alpha)?;
                if prefix.is_empty() {
                    return Weight::new(WeightSpec::Power { alpha });
                }
                if prefix.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidWeight(
                        "explicit prefix entries must be finite and positive".into(),
                    ));
                }
                let scale = prefix[0];
                let prefix: Vec<f64> = prefix.iter().map(|v| v / scale).collect();
                if let Some(j) = prefix.windows(2).position(|w| w[1] > w[0]) {
                    return Err(Error::InvalidWeight(format!(
                        "explicit prefix increases between positions {} and {}",
                        j + 1,
                        j + 2
                    )));
                }
                let spec = WeightSpec::explicit(prefix.clone(), alpha);
                (
                    Family::Explicit {
                        prefix: prefix.into(),
                        alpha,
                    },
                    spec,
                )
            }
        };
        Ok(Weight {
            spec,
            family,
            table: Arc::new(RwLock::new(Arc::new(PrefixTable {
                sums: vec![0.0],
                acc: NeumaierSum::new(),
            }))),
        })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Weight::new(WeightSpec::Power { alpha })
    }

    pub fn log() -> Self {
        Weight::new(WeightSpec::Log).expect("log weight is admissible")
    }

    pub fn explicit(prefix: Vec<f64>, tail_alpha: f64) -> Result<Self> {
        Weight::new(WeightSpec::explicit(prefix, tail_alpha))
    }

    /// The normalized spec this weight was built from.
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// `w_j` for `j >= 1`.
    pub fn at(&self, j: usize) -> f64 {
        assert!(j >= 1, "weights are indexed from 1");
        match &self.family {
            Family::Power(a) => {
                if *a == 1.0 {
                    1.0 / j as f64
                } else if *a == 0.5 {
                    1.0 / (j as f64).sqrt()
                } else {
                    (j as f64).powf(-a)
                }
            }
            Family::Log => {
                if j == 1 {
                    1.0
                } else {
                    std::f64::consts::LN_2 / ((j + 1) as f64).ln()
                }
            }
            Family::Explicit { prefix, alpha } => {
                let len = prefix.len();
                if j <= len {
                    prefix[j - 1]
                } else {
                    prefix[len - 1] * (len as f64 / j as f64).powf(*alpha)
                }
            }
        }
    }

    /// Snapshot of prefix sums covering at least `W_0 ..= W_m`.
    pub fn prefix_sums(&self, m: usize) -> PrefixSums {
        {
            let guard = self.table.read().expect("weight cache poisoned");
            if guard.sums.len() > m {
                return PrefixSums(Arc::clone(&guard));
            }
        }
        let mut guard = self.table.write().expect("weight cache poisoned");
        if guard.sums.len() <= m {
            let old = &**guard;
            let target = (m + 1).max(2 * old.sums.len()).max(1024);
            let mut sums = Vec::with_capacity(target);
            sums.extend_from_slice(&old.sums);
            let mut acc = old.acc;
            for j in old.sums.len()..target {
                acc.add(self.at(j));
                sums.push(acc.value());
            }
            *guard = Arc::new(PrefixTable { sums, acc });
        }
        PrefixSums(Arc::clone(&guard))
    }

    /// `W_m = w_1 + ... + w_m`, with `W_0 = 0`.
    pub fn prefix_sum(&self, m: usize) -> f64 {
        self.prefix_sums(m)[m]
    }

    /// `(W_{m+k} - W_m) / W_k`: how much of an initial block's mass survives a
    /// shift by `m`.
    pub fn hump_ratio(&self, m: usize, k: usize) -> f64 {
        assert!(k >= 1, "hump ratio needs k >= 1");
        if m == 0 {
            return 1.0;
        }
        let sums = self.prefix_sums(m + k);
        (sums[m + k] - sums[m]) / sums[k]
    }

    /// Smallest `k` in `[k_min, k_cap]` with `hump_ratio(m, k) >= theta`.
    pub fn find_hump_index(
        &self,
        m: usize,
        theta: f64,
        k_min: usize,
        k_cap: usize,
    ) -> Result<usize> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::PreconditionViolated(format!(
                "theta = {theta} must lie in (0, 1)"
            )));
        }
        let k_min = k_min.max(1);
        if k_min > k_cap {
            return Err(Error::CapExceeded {
                what: "hump index search",
                cap: k_cap,
            });
        }
        let sums = self.prefix_sums(m + k_cap);
        (k_min..=k_cap)
            .find(|&k| m == 0 || (sums[m + k] - sums[m]) / sums[k] >= theta)
            .ok_or(Error::CapExceeded {
                what: "hump index search",
                cap: k_cap,
            })
    }

    /// Finite-horizon profile of `W_m / (m w_m)`. See [`RegularityReport`].
    pub fn regularity_report(&self, horizon: usize) -> RegularityReport {
        self.regularity_report_with(horizon, DEFAULT_TREND_EPSILON)
    }

    pub fn regularity_report_with(&self, horizon: usize, trend_epsilon: f64) -> RegularityReport {
        let horizon = horizon.max(1);
        let sums = self.prefix_sums(horizon);
        let half = (horizon / 2).max(1);
        let mut best = f64::NEG_INFINITY;
        let mut argmax = 1;
        let mut best_at_half = f64::NEG_INFINITY;
        for m in 1..=horizon {
            let r = sums[m] / (m as f64 * self.at(m));
            if r > best {
                best = r;
                argmax = m;
            }
            if m == half {
                best_at_half = best;
            }
        }
        let growth = best / best_at_half;
        RegularityReport {
            horizon,
            sup_value: best,
            argmax,
            half_horizon_value: best_at_half,
            trend_epsilon,
            trend: if growth > 1.0 + trend_epsilon {
                Trend::Growing
            } else {
                Trend::BoundedLooking
            },
        }
    }

    /// The conjugate weight `m -> 1 / (m w_m)`.
    pub fn conjugate(&self) -> GaugeSequence {
        if let Family::Power(a) = self.family {
            // m^(a-1), exact for a = 1.
            return GaugeSequence::from_fn("conjugate", move |m| {
                if a == 1.0 {
                    1.0
                } else {
                    (m as f64).powf(a - 1.0)
                }
            });
        }
        let w = self.clone();
        GaugeSequence::from_fn("conjugate", move |m| 1.0 / (m as f64 * w.at(m)))
    }

    /// The primitive weight raised to `1/p`: `m -> W_m^(1/p)`.
    pub fn primitive(&self, p: f64) -> GaugeSequence {
        let w = self.clone();
        GaugeSequence::from_fn("primitive", move |m| w.prefix_sum(m).powf(1.0 / p))
    }
}

/// Heuristic trend of a finite-horizon regularity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    BoundedLooking,
    Growing,
}

/// Result of [`Weight::regularity_report`].
///
/// This is evidence from a finite horizon, never a proof that the weight is
/// (or is not) regular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub horizon: usize,
    pub sup_value: f64,
    pub argmax: usize,
    pub half_horizon_value: f64,
    pub trend_epsilon: f64,
    pub trend: Trend,
}

/// A positive sequence `m -> lambda_m`, evaluable on demand.
#[derive(Clone)]
pub struct GaugeSequence {
    name: String,
    f: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
}

impl fmt::Debug for GaugeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GaugeSequence({})", self.name)
    }
}

impl GaugeSequence {
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        GaugeSequence {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `m -> m^exponent`.
    pub fn power(exponent: f64) -> Self {
        GaugeSequence::from_fn(format!("m^{exponent}"), move |m| {
            if exponent == 1.0 {
                m as f64
            } else if exponent == 0.5 {
                (m as f64).sqrt()
            } else {
                (m as f64).powf(exponent)
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, m: usize) -> f64 {
        (self.f)(m)
    }

    fn probe(&self, m: usize) -> Result<f64> {
        let v = self.value(m);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::PreconditionViolated(format!(
                "gauge {} is not positive at m = {m} (value {v})",
                self.name
            )))
        }
    }
}

/// Outcome of a doubling-condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum RegularityVerdict {
    HoldsUpToHorizon { horizon: usize },
    ViolatedAt { m: usize },
}

impl RegularityVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, RegularityVerdict::HoldsUpToHorizon { .. })
    }
}

/// Lower regularity property: `2 lambda_m <= lambda_{bm}` for `1 <= m <= horizon`.
pub fn has_lrp(lambda: &GaugeSequence, b: usize, horizon: usize) -> Result<RegularityVerdict> {
    if b < 2 {
        return Err(Error::PreconditionViolated(format!(
            "LRP needs b >= 2, got {b}"
        )));
    }
    for m in 1..=horizon {
        if 2.0 * lambda.probe(m)? > lambda.probe(b * m)? {
            return Ok(RegularityVerdict::ViolatedAt { m });
        }
    }
    Ok(RegularityVerdict::HoldsUpToHorizon { horizon })
}

/// Upper regularity property: `lambda_{bm} <= (b/2) lambda_m` for `1 <= m <= horizon`.
pub fn has_urp(lambda: &GaugeSequence, b: usize, horizon: usize) -> Result<RegularityVerdict> {
    if b < 3 {
        return Err(Error::PreconditionViolated(format!(
            "URP needs b >= 3, got {b}"
        )));
    }
    let half_b = b as f64 / 2.0;
    for m in 1..=horizon {
        if lambda.probe(b * m)? > half_b * lambda.probe(m)? {
            return Ok(RegularityVerdict::ViolatedAt { m });
        }
    }
    Ok(RegularityVerdict::HoldsUpToHorizon { horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_at_examples() {
        assert_eq!(Weight::power(0.5).unwrap().at(1), 1.0);
        assert_eq!(Weight::power(1.0).unwrap().at(4), 0.25);
        assert_relative_eq!(Weight::log().at(3), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn rejects_weights_outside_the_class() {
        assert!(Weight::power(0.0).is_err());
        assert!(Weight::power(1.5).is_err());
        assert!(Weight::explicit(vec![1.0, 2.0], 0.5).is_err());
        assert!(Weight::explicit(vec![1.0, -0.1], 0.5).is_err());
        assert!(Weight::explicit(vec![1.0], 2.0).is_err());
    }

    #[test]
    fn explicit_prefix_is_normalized_and_spliced() {
        let w = Weight::explicit(vec![2.0, 1.0, 1.0], 0.7).unwrap();
        assert_eq!(w.at(1), 1.0);
        assert_eq!(w.at(3), 0.5);
        assert!(w.at(4) < w.at(3));
        assert_relative_eq!(w.at(6), 0.5 * 0.5f64.powf(0.7), max_relative = 1e-15);
    }

    #[test]
    fn prefix_sum_examples() {
        let h = Weight::power(1.0).unwrap();
        assert_eq!(h.prefix_sum(0), 0.0);
        assert_relative_eq!(h.prefix_sum(3), 11.0 / 6.0, max_relative = 1e-15);
        let r = Weight::power(0.5).unwrap();
        assert_relative_eq!(r.prefix_sum(2), 1.0 + 0.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn hump_ratio_examples() {
        let h = Weight::power(1.0).unwrap();
        assert_eq!(h.hump_ratio(0, 17), 1.0);
        assert_relative_eq!(h.hump_ratio(1, 2), 5.0 / 9.0, max_relative = 1e-14);
        let r = Weight::power(0.5).unwrap();
        let a = r.hump_ratio(2, 100);
        let b = r.hump_ratio(2, 1_000_000);
        assert!(a < b && b < 1.0 && b > 0.99);
    }

    #[test]
    fn find_hump_index_matches_linear_scan() {
        let h = Weight::power(1.0).unwrap();
        assert_eq!(h.find_hump_index(0, 0.9, 1, 10).unwrap(), 1);
        let expected = (1..).find(|&k| h.hump_ratio(1, k) >= 0.5).unwrap();
        assert_eq!(h.find_hump_index(1, 0.5, 1, 1000).unwrap(), expected);

        let r = Weight::power(0.5).unwrap();
        assert!((1..=10).all(|k| r.hump_ratio(5, k) < 0.99));
        assert!(matches!(
            r.find_hump_index(5, 0.99, 1, 10),
            Err(Error::CapExceeded { .. })
        ));
        assert!(r.find_hump_index(5, 1.0, 1, 10).is_err());
    }

    #[test]
    fn conjugate_weight_examples() {
        let c = Weight::power(1.0).unwrap().conjugate();
        assert!((1..200).all(|m| c.value(m) == 1.0));
        assert_eq!(Weight::power(0.5).unwrap().conjugate().value(4), 0.5);
        assert_eq!(Weight::log().conjugate().value(1), 1.0);
    }

    #[test]
    fn lrp_and_urp_examples() {
        let lin = GaugeSequence::power(1.0);
        let root = GaugeSequence::power(0.5);
        assert!(has_lrp(&lin, 2, 1000).unwrap().holds());
        assert!(has_lrp(&root, 4, 1000).unwrap().holds());
        assert_eq!(
            has_lrp(&root, 3, 1000).unwrap(),
            RegularityVerdict::ViolatedAt { m: 1 }
        );
        assert_eq!(
            has_urp(&lin, 3, 1000).unwrap(),
            RegularityVerdict::ViolatedAt { m: 1 }
        );
        assert!(has_urp(&root, 8, 1000).unwrap().holds());
        let one = GaugeSequence::from_fn("one", |_| 1.0);
        assert!(has_urp(&one, 3, 1000).unwrap().holds());
        assert!(has_urp(&one, 2, 10).is_err());
    }

    #[test]
    fn regularity_report_small_horizon() {
        let h = Weight::power(1.0).unwrap();
        let rep = h.regularity_report(100);
        assert_eq!(rep.argmax, 100);
        assert_relative_eq!(rep.sup_value, h.prefix_sum(100), max_relative = 1e-12);
    }

    #[test]
    fn cache_is_shared_between_clones_and_threads() {
        let w = Weight::power(0.5).unwrap();
        let w2 = w.clone();
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let w = w.clone();
                std::thread::spawn(move || w.prefix_sum(10_000 * (i + 1)))
            })
            .collect();
        let vals: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(vals[3], w2.prefix_sum(40_000));
    }

    #[test]
    fn spec_json_shapes() {
        let s: WeightSpec = serde_json::from_str(r#"{"family":"power","alpha":0.5}"#).unwrap();
        assert_eq!(s, WeightSpec::power(0.5));
        let s: WeightSpec = serde_json::from_str(r#"{"family":"log"}"#).unwrap();
        assert_eq!(s, WeightSpec::Log);
        let s: WeightSpec = serde_json::from_str(
            r#"{"family":"explicit","prefix":[1.0,0.9],"tail":{"family":"power","alpha":0.7}}"#,
        )
        .unwrap();
        assert_eq!(s, WeightSpec::explicit(vec![1.0, 0.9], 0.7));
    }
}
