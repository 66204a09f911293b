//! The Garling norm
//!
//! `||f||_g = sup (sum_r |a_{s_r}|^p w_r)^(1/p)` over strictly increasing
//! selections `s_1 < s_2 < ...` of the support of `f`.
//!
//! The dynamic program works on *runs*: maximal stretches of the support on
//! which `|a|^p` is constant (zeros are dropped, they never help). Taking `x`
//! entries out of a run of value `c` after `X'` earlier selections contributes
//! `c (W_{X'+x} - W_{X'})`, independent of which `x` entries are taken. With
//! `g_b(X)` the best value using exactly `X` selections from runs `1..=b`,
//!
//! ```text
//! g_b(X) = c_b W_X + max_{X - L_b <= X' <= X} ( g_{b-1}(X') - c_b W_{X'} )
//! ```
//!
//! which is a sliding-window maximum, so each run costs `O(T)` for a support
//! of size `T`. A support of `n` distinct values degenerates to the textbook
//! `O(n^2)` selection DP; a concatenation of a few constant blocks costs
//! `O(blocks * length)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_p, Error, Result};
use crate::seq::FinSeq;
use crate::weights::Weight;

/// Largest support the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_SUPPORT: usize = 20;

/// A maximizing selection, as strictly increasing 1-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectionWitness {
    pub indices: Vec<usize>,
}

impl SelectionWitness {
    /// `sum_r |a_{s_r}|^p w_{r + shift}` along the selection, evaluated term by term.
    pub fn objective(&self, f: &FinSeq, w: &Weight, p: f64, shift: usize) -> f64 {
        crate::sum::compensated_sum(
            self.indices
                .iter()
                .enumerate()
                .map(|(r, &j)| f.get(j).abs().powf(p) * w.at(r + 1 + shift)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarlingNorm {
    pub value: f64,
    pub witness: SelectionWitness,
}

pub(crate) struct Runs {
    /// `|a|^p` per run.
    pub mags: Vec<f64>,
    pub lens: Vec<usize>,
    /// Support coordinates in increasing order, run after run.
    pub coords: Vec<usize>,
}

impl Runs {
    pub fn new(f: &FinSeq, p: f64) -> Runs {
        let mut runs = Runs {
            mags: Vec::new(),
            lens: Vec::new(),
            coords: Vec::new(),
        };
        for (j, a) in f.support() {
            let c = if p == 1.0 { a.abs() } else { a.abs().powf(p) };
            runs.coords.push(j);
            match runs.mags.last() {
                Some(&last) if last == c => *runs.lens.last_mut().unwrap() += 1,
                _ => {
                    runs.mags.push(c);
                    runs.lens.push(1);
                }
            }
        }
        runs
    }

    pub fn total(&self) -> usize {
        self.coords.len()
    }

    fn non_increasing(&self) -> bool {
        self.mags.windows(2).all(|m| m[1] <= m[0])
    }

    fn take_all(&self, sums: &[f64], shift: usize) -> f64 {
        let mut acc = crate::sum::NeumaierSum::new();
        let mut x = shift;
        for (&c, &len) in self.mags.iter().zip(&self.lens) {
            acc.add(c * (sums[x + len] - sums[x]));
            x += len;
        }
        acc.value()
    }
}

/// Forward DP. Returns the best sum of p-th powers with weights starting at
/// `w_{1+shift}`, plus a witness when asked for.
///
/// Ties favour earlier coordinates: fewer selections overall, and within the
/// backtrack, more selections from earlier runs.
pub(crate) fn forward(
    runs: &Runs,
    w: &Weight,
    shift: usize,
    want_witness: bool,
    allow_shortcut: bool,
) -> (f64, Option<Vec<usize>>) {
    let total = runs.total();
    if total == 0 {
        return (0.0, want_witness.then(Vec::new));
    }
    let sums = w.prefix_sums(shift + total);
    let sums = &sums[shift..];

    // Sorted magnitudes: the in-order full selection is the decreasing
    // rearrangement, which attains the Lorentz upper bound.
    if allow_shortcut && runs.non_increasing() {
        return (
            runs.take_all(sums, 0),
            want_witness.then(|| runs.coords.clone()),
        );
    }

    let mut prev: Vec<f64> = vec![0.0];
    let mut choices: Vec<Vec<u32>> = Vec::new();
    let mut deque: VecDeque<usize> = VecDeque::new();
    for (&c, &len) in runs.mags.iter().zip(&runs.lens) {
        let t_prev = prev.len() - 1;
        let t_new = t_prev + len;
        let key = |x: usize| prev[x] - c * sums[x];
        let mut cur = vec![0.0; t_new + 1];
        let mut choice = if want_witness {
            vec![0u32; t_new + 1]
        } else {
            Vec::new()
        };
        deque.clear();
        for x in 0..=t_new {
            if x <= t_prev {
                let kx = key(x);
                while let Some(&back) = deque.back() {
                    if key(back) <= kx {
                        deque.pop_back();
                    } else {
                        break;
                    }
                }
                deque.push_back(x);
            }
            while let Some(&front) = deque.front() {
                if front + len < x {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            let best = *deque.front().expect("window is never empty");
            cur[x] = c * sums[x] + key(best);
            if want_witness {
                choice[x] = (x - best) as u32;
            }
        }
        prev = cur;
        if want_witness {
            choices.push(choice);
        }
    }

    let mut best_x = 0;
    for (x, &v) in prev.iter().enumerate() {
        if v > prev[best_x] {
            best_x = x;
        }
    }
    let value = prev[best_x];
    if !want_witness {
        return (value, None);
    }

    let mut starts = Vec::with_capacity(runs.lens.len());
    let mut acc = 0;
    for &len in &runs.lens {
        starts.push(acc);
        acc += len;
    }
    let mut picked = Vec::with_capacity(best_x);
    let mut x = best_x;
    for b in (0..runs.lens.len()).rev() {
        let take = choices[b][x] as usize;
        for i in (0..take).rev() {
            picked.push(runs.coords[starts[b] + i]);
        }
        x -= take;
    }
    debug_assert_eq!(x, 0);
    picked.reverse();
    (value, Some(picked))
}

/// Garling norm with a maximizing selection.
pub fn garling_norm(f: &FinSeq, w: &Weight, p: f64) -> Result<GarlingNorm> {
    check_p(p)?;
    let runs = Runs::new(f, p);
    let (value, witness) = forward(&runs, w, 0, true, true);
    Ok(GarlingNorm {
        value: value.powf(1.0 / p),
        witness: SelectionWitness {
            indices: witness.unwrap_or_default(),
        },
    })
}

/// Garling norm without witness bookkeeping (linear memory).
pub fn garling_value(f: &FinSeq, w: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(garling_pow(f, w, p, 0).powf(1.0 / p))
}

/// `v_shift = sup sum_r |a_{s_r}|^p w_{r+shift}`. This is the p-th power
/// quantity; no root is taken.
pub fn shifted_garling(f: &FinSeq, w: &Weight, p: f64, shift: usize) -> Result<f64> {
    check_p(p)?;
    Ok(garling_pow(f, w, p, shift))
}

pub(crate) fn garling_pow(f: &FinSeq, w: &Weight, p: f64, shift: usize) -> f64 {
    forward(&Runs::new(f, p), w, shift, false, true).0
}

/// `[v_0, v_1, ..., v_max_shift]` in one backward pass.
///
/// With `h_b(r)` the best value from runs `b..` when `r` weights are already
/// used, `h_b(r) = -c_b W_r + max_{r <= r' <= r + L_b} (c_b W_{r'} + h_{b+1}(r'))`.
pub fn shifted_garling_profile(
    f: &FinSeq,
    w: &Weight,
    p: f64,
    max_shift: usize,
) -> Result<Vec<f64>> {
    check_p(p)?;
    Ok(profile(&Runs::new(f, p), w, max_shift))
}

pub(crate) fn profile(runs: &Runs, w: &Weight, max_shift: usize) -> Vec<f64> {
    let total = runs.total();
    let sums = w.prefix_sums(max_shift + total);
    let mut next = vec![0.0; max_shift + total + 1];
    let mut deque: VecDeque<usize> = VecDeque::new();
    for (&c, &len) in runs.mags.iter().zip(&runs.lens).rev() {
        let r_next = next.len() - 1;
        let r_cur = r_next - len;
        let key = |r: usize| c * sums[r] + next[r];
        let mut cur = vec![0.0; r_cur + 1];
        deque.clear();
        let push = |deque: &mut VecDeque<usize>, r: usize| {
            let kr = key(r);
            while let Some(&back) = deque.back() {
                if key(back) <= kr {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(r);
        };
        for r in (r_cur + 1..=r_next).rev() {
            push(&mut deque, r);
        }
        for r in (0..=r_cur).rev() {
            push(&mut deque, r);
            while let Some(&front) = deque.front() {
                if front > r + len {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            let best = *deque.front().unwrap();
            cur[r] = key(best) - c * sums[r];
        }
        next = cur;
    }
    next.truncate(max_shift + 1);
    next
}

/// Exhaustive oracle: every subsequence of the support, weights evaluated
/// one by one with [`Weight::at`].
pub fn brute_force_garling(f: &FinSeq, w: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    let support: Vec<f64> = f.support().map(|(_, a)| a.abs().powf(p)).collect();
    let n = support.len();
    if n > BRUTE_FORCE_MAX_SUPPORT {
        return Err(Error::TooLarge(format!(
            "brute force needs support <= {BRUTE_FORCE_MAX_SUPPORT}, got {n}"
        )));
    }
    let weights: Vec<f64> = (1..=n).map(|j| w.at(j)).collect();
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << n) {
        let mut acc = 0.0;
        let mut r = 0;
        for (i, c) in support.iter().enumerate() {
            if mask & (1 << i) != 0 {
                acc += c * weights[r];
                r += 1;
            }
        }
        best = best.max(acc);
    }
    Ok(best.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h() -> Weight {
        Weight::power(1.0).unwrap()
    }

    #[test]
    fn single_coefficient() {
        let g = garling_norm(&FinSeq::new(vec![1.0]), &h(), 2.0).unwrap();
        assert_eq!(g.value, 1.0);
        assert_eq!(g.witness.indices, vec![1]);
        let g = garling_norm(&FinSeq::with_offset(4, vec![-3.0]), &h(), 1.5).unwrap();
        assert_relative_eq!(g.value, 3.0, max_relative = 1e-15);
        assert_eq!(g.witness.indices, vec![5]);
    }

    #[test]
    fn half_one_under_harmonic_weight() {
        // {1} -> 0.5, {2} -> 1, {1,2} -> 0.5 + 0.5 = 1. Tie goes to the
        // shorter selection.
        let f = FinSeq::new(vec![0.5, 1.0]);
        let g = garling_norm(&f, &h(), 1.0).unwrap();
        assert_relative_eq!(g.value, 1.0, max_relative = 1e-15);
        assert_eq!(g.witness.indices, vec![2]);
        assert_relative_eq!(brute_force_garling(&f, &h(), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn skipping_beats_taking_both() {
        let w = Weight::explicit(vec![1.0, 0.1], 0.5).unwrap();
        let f = FinSeq::new(vec![0.5, 1.0]);
        let g = garling_norm(&f, &w, 1.0).unwrap();
        assert_relative_eq!(g.value, 1.0, max_relative = 1e-15);
        assert_eq!(g.witness.indices, vec![2]);
    }

    #[test]
    fn indicator_norm_is_prefix_sum_root() {
        let w = Weight::power(0.5).unwrap();
        let f = FinSeq::indicator(&[2, 3, 9, 11, 40]);
        let g = garling_norm(&f, &w, 3.0).unwrap();
        assert_relative_eq!(
            g.value,
            w.prefix_sum(5).powf(1.0 / 3.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn empty_is_zero() {
        let g = garling_norm(&FinSeq::empty(), &h(), 1.0).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.witness.indices.is_empty());
        assert!(garling_norm(&FinSeq::empty(), &h(), 0.5).is_err());
    }

    #[test]
    fn shifted_examples() {
        let f = FinSeq::new(vec![1.0]);
        assert_relative_eq!(shifted_garling(&f, &h(), 1.0, 1).unwrap(), 0.5);
        let f = FinSeq::new(vec![0.3, -2.0, 0.7, 1.1]);
        let w = Weight::log();
        let g = garling_value(&f, &w, 2.0).unwrap();
        assert_relative_eq!(
            shifted_garling(&f, &w, 2.0, 0).unwrap(),
            g * g,
            max_relative = 1e-14
        );
        for s in 0..20 {
            assert!(shifted_garling(&f, &w, 2.0, s).unwrap() <= g * g * (1.0 + 1e-14));
        }
    }

    #[test]
    fn profile_matches_forward_at_every_shift() {
        let w = Weight::power(0.5).unwrap();
        let f = FinSeq::new(vec![0.2, 0.2, 0.2, 1.0, 1.0, 0.0, 0.4, 0.9, 0.9, 0.9, 0.1]);
        let prof = shifted_garling_profile(&f, &w, 1.5, 30).unwrap();
        assert_eq!(prof.len(), 31);
        for (s, v) in prof.iter().enumerate() {
            let direct = shifted_garling(&f, &w, 1.5, s).unwrap();
            assert_relative_eq!(*v, direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn shortcut_agrees_with_dp_on_sorted_input() {
        let w = Weight::power(0.5).unwrap();
        let f = FinSeq::new(vec![3.0, 2.0, 2.0, 1.5, 0.0, 0.25]);
        let runs = Runs::new(&f, 2.0);
        let (fast, wf) = forward(&runs, &w, 3, true, true);
        let (slow, ws) = forward(&runs, &w, 3, true, false);
        assert_relative_eq!(fast, slow, max_relative = 1e-14);
        assert_eq!(wf, ws);
    }

    #[test]
    fn brute_force_rejects_large_support() {
        let f = FinSeq::constant(21, 1.0);
        assert!(matches!(
            brute_force_garling(&f, &h(), 1.0),
            Err(Error::TooLarge(_))
        ));
    }
}
