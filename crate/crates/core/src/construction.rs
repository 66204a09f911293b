//! Constant-block constructions in `g(w, p)`.
//!
//! * [`make_v`]: the constant `k`-tuple of Garling norm one, `v[k]`.
//! * [`lemma1_search`]: a constant tuple `h` that is small in front of `f1`
//!   but adds at least one unit of p-th power mass behind `f2`.
//! * [`lemma2_prepend`]: the smallest `k` with `||(v[k], f)||_g < t`.
//! * [`build_kappa`]: a chain `kappa = (k_1, ..., k_n)` with `||v[kappa]||_g <= t`,
//!   built by prepending one block at a time.
//!
//! All searches scan candidates in increasing order and take the first one
//! accepted; caps bound the scan and exceeding them is an error.

use serde::{Deserialize, Serialize};

use crate::envelope::MaxEnvelope;
use crate::error::{check_p, Error, Result};
use crate::norms::{garling_pow, profile, Runs};
use crate::seq::FinSeq;
use crate::weights::Weight;

pub const DEFAULT_K_CAP: usize = 1_000_000;

/// Optional extra acceptance test on a candidate block length.
pub type KPredicate<'a> = &'a (dyn Fn(usize) -> bool + Sync);

/// `v[k]`: every entry equal to `W_k^(-1/p)`.
pub fn make_v(k: usize, w: &Weight, p: f64) -> FinSeq {
    assert!(k >= 1, "v[k] needs k >= 1");
    FinSeq::constant(k, w.prefix_sum(k).powf(-1.0 / p))
}

/// `v[k_1, ..., k_n]`: the blocks `v[k_i]` laid end to end.
pub fn make_v_chain(entries: &[usize], w: &Weight, p: f64) -> FinSeq {
    let total: usize = entries.iter().sum();
    let mut coeffs = Vec::with_capacity(total);
    for &k in entries {
        let c = w.prefix_sum(k).powf(-1.0 / p);
        coeffs.resize(coeffs.len() + k, c);
    }
    FinSeq::new(coeffs)
}

/// Fraction of the interval `(max(1, ||f1||^p), t^p)` left above the level
/// `s` used by [`lemma1_search`]. The accepted `k` grows roughly like
/// `W^-1(W_m / (1 - 1/s))`, so `s` sits close to `t^p`.
pub const HUMP_LEVEL_GAP: f64 = 1e-3;

/// Record of an accepted [`lemma1_search`] step. Quantities marked `_pow`
/// are p-th powers of Garling norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumpCertificate {
    pub k: usize,
    pub alpha_k: f64,
    /// Intermediate level, on the p-th power scale: `max(1, ||f1||^p) < s < t^p`.
    pub s: f64,
    /// `v_1, ..., v_k`.
    pub v_values: Vec<f64>,
    /// Support size of `f2`.
    pub m: usize,
    /// `alpha_k (W_{m+k} - W_m) >= 1`.
    pub condition_i: bool,
    /// `alpha_i >= alpha_k` for `1 <= i <= k`.
    pub condition_ii: bool,
    pub norm_h_f1_pow: f64,
    pub norm_f2_pow: f64,
    pub norm_f2_h_pow: f64,
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t > 1.0 {
        Ok(())
    } else {
        Err(Error::PreconditionViolated(format!(
            "t = {t} must exceed 1"
        )))
    }
}

fn next_horizon(current: usize, k_min: usize, k_cap: usize) -> usize {
    current
        .saturating_mul(2)
        .max(64)
        .max(k_min.saturating_mul(2))
        .min(k_cap)
}

/// Finds a constant `k`-tuple `h` (with `k >= k_min`) such that
/// `||(h, f1)||_g < t` and `||(f2, h)||_g^p >= ||f2||_g^p + 1`.
///
/// With `v_i` the shifted Garling p-th powers of `f1` and
/// `alpha_i = (s - v_i) / W_i`, the first `k >= k_min` is accepted where
/// `alpha_k` is a running minimum and `alpha_k (W_{m+k} - W_m) >= 1`; then
/// `h` has entries `alpha_k^(1/p)`. Candidates that fail the direct DP
/// re-check (possible only at rounding level) are skipped.
pub fn lemma1_search(
    f1: &FinSeq,
    f2: &FinSeq,
    t: f64,
    w: &Weight,
    p: f64,
    k_min: usize,
    k_cap: usize,
) -> Result<(FinSeq, HumpCertificate)> {
    check_p(p)?;
    check_t(t)?;
    let tp = t.powf(p);
    let g1 = garling_pow(f1, w, p, 0);
    if g1 >= tp {
        return Err(Error::PreconditionViolated(format!(
            "||f1||_g = {} is not below t = {t}",
            g1.powf(1.0 / p)
        )));
    }
    let floor = g1.max(1.0);
    let s = floor + (1.0 - HUMP_LEVEL_GAP) * (tp - floor);
    let m = f2.support_len();
    let norm_f2_pow = garling_pow(f2, w, p, 0);
    let runs = Runs::new(f1, p);
    let k_min = k_min.max(1);
    const WHAT: &str = "hump tuple search";

    let mut v: Vec<f64> = Vec::new();
    let mut horizon = 0;
    let mut running_min = f64::INFINITY;
    let mut k = 1;
    loop {
        if k > horizon {
            if horizon >= k_cap {
                return Err(Error::CapExceeded {
                    what: WHAT,
                    cap: k_cap,
                });
            }
            horizon = next_horizon(horizon, k_min, k_cap);
            v = profile(&runs, w, horizon);
        }
        let sums = w.prefix_sums(m + horizon);
        while k <= horizon {
            let alpha = (s - v[k]) / sums[k];
            let is_min = alpha <= running_min;
            running_min = running_min.min(alpha);
            let mass = sums[m + k] - sums[m];
            if k >= k_min && is_min && alpha * mass >= 1.0 {
                let h = FinSeq::constant(k, alpha.powf(1.0 / p));
                let front = garling_pow(&h.concat(f1), w, p, 0);
                let back = garling_pow(&f2.concat(&h), w, p, 0);
                if front < tp && back >= norm_f2_pow + 1.0 {
                    let cert = HumpCertificate {
                        k,
                        alpha_k: alpha,
                        s,
                        v_values: v[1..=k].to_vec(),
                        m,
                        condition_i: true,
                        condition_ii: true,
                        norm_h_f1_pow: front,
                        norm_f2_pow,
                        norm_f2_h_pow: back,
                    };
                    return Ok((h, cert));
                }
            }
            k += 1;
        }
    }
}

/// A verified prepend step: `||(v[k], f)||_g = norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrependStep {
    pub k: usize,
    pub norm: f64,
}

/// Smallest `k` in `[k_min, k_cap]` with `||(v[k], f)||_g < t` and `extra(k)`.
pub fn lemma2_prepend(
    f: &FinSeq,
    t: f64,
    w: &Weight,
    p: f64,
    k_min: usize,
    k_cap: usize,
    extra: Option<KPredicate<'_>>,
) -> Result<usize> {
    prepend_step(f, t, w, p, k_min, k_cap, extra).map(|s| s.k)
}

/// [`lemma2_prepend`] returning the verified norm as well.
///
/// Choosing `r` entries of the constant block first, `||(v[k], f)||_g^p` is
/// `max_{0 <= r <= k} (W_r / W_k + v_r)` where `v_r` is the shifted p-th
/// power of `f`. The scan keeps the lines `W_r + x v_r` in an upper envelope
/// and queries it at `x = W_k`, so each candidate costs a logarithmic number
/// of line evaluations. The accepted `k` is re-checked by the DP on the
/// concatenated vector.
pub fn prepend_step(
    f: &FinSeq,
    t: f64,
    w: &Weight,
    p: f64,
    k_min: usize,
    k_cap: usize,
    extra: Option<KPredicate<'_>>,
) -> Result<PrependStep> {
    check_p(p)?;
    check_t(t)?;
    let tp = t.powf(p);
    let gf = garling_pow(f, w, p, 0);
    if gf >= tp {
        return Err(Error::PreconditionViolated(format!(
            "||f||_g = {} is not below t = {t}",
            gf.powf(1.0 / p)
        )));
    }
    let k_min = k_min.max(1);
    const WHAT: &str = "prepend search";
    if k_min > k_cap {
        return Err(Error::CapExceeded {
            what: WHAT,
            cap: k_cap,
        });
    }
    let runs = Runs::new(f, p);
    let mut start = k_min;
    let mut horizon = next_horizon(0, k_min, k_cap);
    loop {
        let v = profile(&runs, w, horizon);
        let sums = w.prefix_sums(horizon);
        let xs = &sums[..=horizon];
        let mut env = MaxEnvelope::new(xs);
        for r in 0..start {
            env.insert(v[r], xs[r]);
        }
        for k in start..=horizon {
            env.insert(v[k], xs[k]);
            if env.query(k) / xs[k] >= tp {
                continue;
            }
            if let Some(pred) = extra {
                if !pred(k) {
                    continue;
                }
            }
            let full = garling_pow(&make_v(k, w, p).concat(f), w, p, 0);
            if full < tp {
                return Ok(PrependStep {
                    k,
                    norm: full.powf(1.0 / p),
                });
            }
        }
        if horizon >= k_cap {
            return Err(Error::CapExceeded {
                what: WHAT,
                cap: k_cap,
            });
        }
        start = horizon + 1;
        horizon = next_horizon(horizon, k_min, k_cap);
    }
}

/// A block-length tuple `kappa = (k_1, ..., k_n)` with `||v[kappa]||_g <= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub entries: Vec<usize>,
    pub t: f64,
    /// Construction order: step `i` prepended `q_i` and reached `||v[q_i, ..., q_1]||_g`.
    pub steps: Vec<PrependStep>,
}

impl Kappa {
    pub fn v(&self, w: &Weight, p: f64) -> FinSeq {
        make_v_chain(&self.entries, w, p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_length(&self) -> usize {
        self.entries.iter().sum()
    }
}

/// Builds `kappa` of length `n` by repeated prepending: `q_1` is the first
/// admissible `k >= k_floor` in front of the empty tuple, and `q_{i+1}` the
/// first admissible `k >= k_floor` in front of `v[q_i, ..., q_1]`. Returns
/// `kappa = (q_n, ..., q_1)`.
pub fn build_kappa(
    n: usize,
    t: f64,
    w: &Weight,
    p: f64,
    k_floor: usize,
    extra: Option<KPredicate<'_>>,
    k_cap: usize,
) -> Result<Kappa> {
    check_p(p)?;
    check_t(t)?;
    if n == 0 {
        return Err(Error::PreconditionViolated("kappa needs n >= 1".into()));
    }
    let mut chain = FinSeq::empty();
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let step = prepend_step(&chain, t, w, p, k_floor, k_cap, extra)?;
        chain = make_v(step.k, w, p).concat(&chain);
        steps.push(step);
    }
    let entries = steps.iter().rev().map(|s| s.k).collect();
    Ok(Kappa { entries, t, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{brute_force_garling, garling_value};
    use approx::assert_relative_eq;

    #[test]
    fn make_v_examples() {
        let h = Weight::power(1.0).unwrap();
        assert_eq!(make_v(1, &h, 2.0).coeffs, vec![1.0]);
        let v2 = make_v(2, &h, 1.0);
        assert_relative_eq!(v2.coeffs[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(v2.coeffs[1], 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn lemma1_on_empty_tuples() {
        let w = Weight::power(0.5).unwrap();
        let (h, cert) =
            lemma1_search(&FinSeq::empty(), &FinSeq::empty(), 2.0, &w, 1.0, 1, 1000).unwrap();
        let hn = garling_value(&h, &w, 1.0).unwrap();
        assert!((1.0..2.0).contains(&hn));
        assert_relative_eq!(
            hn,
            cert.alpha_k * w.prefix_sum(cert.k),
            max_relative = 1e-12
        );
        // With f1 empty every v_i is zero and alpha_k W_k = s.
        assert_relative_eq!(
            cert.alpha_k * w.prefix_sum(cert.k),
            cert.s,
            max_relative = 1e-15
        );
    }

    #[test]
    fn lemma1_respects_k_min_and_running_minimum() {
        let w = Weight::log();
        let f1 = FinSeq::new(vec![0.4, 0.9, 0.1]);
        let f2 = FinSeq::new(vec![2.0, 0.0, 1.0]);
        let (h, cert) = lemma1_search(&f1, &f2, 1.5, &w, 2.0, 25, 100_000).unwrap();
        assert!(cert.k >= 25);
        assert_eq!(h.coeffs.len(), cert.k);
        let alphas: Vec<f64> = (1..=cert.k)
            .map(|i| (cert.s - cert.v_values[i - 1]) / w.prefix_sum(i))
            .collect();
        let min = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, cert.alpha_k);
        assert!(cert.norm_h_f1_pow < 1.5f64.powi(2));
        assert!(cert.norm_f2_h_pow >= cert.norm_f2_pow + 1.0);
        // v_i <= ||f1||^p and decays.
        let g1 = garling_value(&f1, &w, 2.0).unwrap().powi(2);
        assert!(cert.v_values.iter().all(|&v| v <= g1 * (1.0 + 1e-14)));
    }

    #[test]
    fn lemma1_rejects_large_f1() {
        let w = Weight::log();
        let f1 = FinSeq::new(vec![3.0]);
        assert!(matches!(
            lemma1_search(&f1, &FinSeq::empty(), 2.0, &w, 1.0, 1, 100),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(lemma1_search(&FinSeq::empty(), &FinSeq::empty(), 1.0, &w, 1.0, 1, 100).is_err());
    }

    #[test]
    fn prepend_to_empty_returns_k_min() {
        let w = Weight::power(0.5).unwrap();
        assert_eq!(
            lemma2_prepend(&FinSeq::empty(), 1.01, &w, 2.0, 7, 100, None).unwrap(),
            7
        );
    }

    #[test]
    fn prepend_in_front_of_v5() {
        let w = Weight::power(0.5).unwrap();
        let f = make_v(5, &w, 2.0);
        let k = lemma2_prepend(&f, 1.1, &w, 2.0, 1, 100_000, None).unwrap();
        let joined = make_v(k, &w, 2.0).concat(&f);
        assert!(garling_value(&joined, &w, 2.0).unwrap() < 1.1);
        if k > 1 {
            let before = make_v(k - 1, &w, 2.0).concat(&f);
            assert!(garling_value(&before, &w, 2.0).unwrap() >= 1.1);
        }
        if joined.coeffs.len() <= 20 {
            assert!(brute_force_garling(&joined, &w, 2.0).unwrap() < 1.1);
        }
    }

    #[test]
    fn prepend_matches_naive_scan() {
        // Naive: evaluate the DP on every candidate.
        let w = Weight::power(1.0).unwrap();
        let f = FinSeq::new(vec![0.3, 0.7, 0.2, 0.65]);
        for &t in &[1.05, 1.2, 1.5] {
            let k = lemma2_prepend(&f, t, &w, 1.5, 1, 10_000, None).unwrap();
            let naive = (1..)
                .find(|&k| garling_value(&make_v(k, &w, 1.5).concat(&f), &w, 1.5).unwrap() < t)
                .unwrap();
            assert_eq!(k, naive, "t = {t}");
        }
    }

    #[test]
    fn prepend_honours_extra_predicate_and_cap() {
        let w = Weight::power(1.0).unwrap();
        let even = |k: usize| k % 7 == 3;
        let k = lemma2_prepend(&FinSeq::empty(), 1.1, &w, 1.0, 1, 100, Some(&even)).unwrap();
        assert_eq!(k, 3);
        let never = |_: usize| false;
        assert!(matches!(
            lemma2_prepend(&FinSeq::empty(), 1.1, &w, 1.0, 1, 100, Some(&never)),
            Err(Error::CapExceeded { cap: 100, .. })
        ));
    }

    #[test]
    fn kappa_of_length_one_is_a_single_normalized_block() {
        let w = Weight::log();
        let kappa = build_kappa(1, 1.1, &w, 1.0, 4, None, 1000).unwrap();
        assert_eq!(kappa.entries, vec![4]);
        assert_relative_eq!(
            garling_value(&kappa.v(&w, 1.0), &w, 1.0).unwrap(),
            1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn kappa_small_chain_checked_by_brute_force() {
        let w = Weight::power(1.0).unwrap();
        let kappa = build_kappa(3, 1.3, &w, 2.0, 1, None, 10_000).unwrap();
        let v = kappa.v(&w, 2.0);
        let dp = garling_value(&v, &w, 2.0).unwrap();
        assert!(dp <= 1.3);
        if v.coeffs.len() <= 20 {
            assert_relative_eq!(
                brute_force_garling(&v, &w, 2.0).unwrap(),
                dp,
                max_relative = 1e-12
            );
        }
        // Steps record the chain norm at each prefix.
        for (i, step) in kappa.steps.iter().enumerate() {
            let suffix = &kappa.entries[kappa.len() - 1 - i..];
            let n = garling_value(&make_v_chain(suffix, &w, 2.0), &w, 2.0).unwrap();
            assert_relative_eq!(n, step.norm, max_relative = 1e-12);
            assert!(step.norm < 1.3);
        }
    }
}
