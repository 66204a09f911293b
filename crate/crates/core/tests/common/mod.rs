#![allow(dead_code)]

use garling::{FinSeq, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x6761_726c;

pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

pub type Family = (&'static str, Weight, fn(usize) -> f64);

/// The three built-in weights, with their closed forms.
pub fn builtin_weights() -> Vec<Family> {
    vec![
        ("power(1)", Weight::power(1.0).unwrap(), |j| 1.0 / j as f64),
        ("power(0.5)", Weight::power(0.5).unwrap(), |j| {
            (j as f64).powf(-0.5)
        }),
        ("log", Weight::log(), |j| 2f64.ln() / ((j + 1) as f64).ln()),
    ]
}

/// Kahan-summed `w_1 + ... + w_m` from the closed form.
pub fn prefix_oracle(w: fn(usize) -> f64, m: usize) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for j in 1..=m {
        let y = w(j) - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Garling norm by enumerating every subsequence of the support.
pub fn garling_oracle(f: &FinSeq, w: fn(usize) -> f64, p: f64) -> f64 {
    let mags: Vec<f64> = f
        .dense()
        .into_iter()
        .filter(|a| *a != 0.0)
        .map(|a| a.abs().powf(p))
        .collect();
    assert!(mags.len() <= 20);
    let mut best = 0.0f64;
    for mask in 0u32..(1 << mags.len()) {
        let mut acc = 0.0;
        let mut r = 0;
        for (i, c) in mags.iter().enumerate() {
            if mask >> i & 1 == 1 {
                r += 1;
                acc += c * w(r);
            }
        }
        best = best.max(acc);
    }
    best.powf(1.0 / p)
}

/// A random vector with `1..=max_support` nonzero entries, gaps of up to
/// three zeros, and repeated magnitudes about a third of the time.
pub fn random_vector(r: &mut ChaCha8Rng, max_support: usize) -> FinSeq {
    let s = r.gen_range(1..=max_support);
    let pool: Vec<f64> = (0..3).map(|_| r.gen_range(0.05..2.0)).collect();
    let mut coeffs = vec![0.0; r.gen_range(0..3)];
    for _ in 0..s {
        let mag = if r.gen_bool(0.35) {
            pool[r.gen_range(0..pool.len())]
        } else {
            r.gen_range(1e-3..2.0)
        };
        coeffs.push(if r.gen_bool(0.5) { mag } else { -mag });
        for _ in 0..r.gen_range(0..=3) {
            if r.gen_bool(0.4) {
                coeffs.push(0.0);
            }
        }
    }
    FinSeq::new(coeffs)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
