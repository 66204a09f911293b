//! A complemented copy of `(⊕_n ℓ∞^n)_p` inside `g(w, p)`, truncated to
//! `N` levels.
//!
//! Level `n` owns `n` consecutive intervals `J_{1,n}, ..., J_{n,n}` of lengths
//! `kappa_n = (k_{1,n}, ..., k_{n,n})`. The vector `y_{i,n}` is the normalized
//! indicator of `J_{i,n}` and `y*_{i,n}` the matching weighted average. `P`
//! maps a sequence to the triangular array of its `y*` coefficients and `S`
//! maps an array back to the corresponding combination of the `y`s.
//!
//! Both operators have norm at most `t = sqrt(1 + epsilon)` once every level
//! satisfies `||v[kappa_n]||_g <= t` and the hump condition
//! `(W_{m_n + k} - W_{m_n}) / W_k >= t^(-p)` for each of its entries, where
//! `m_n = sum_{r < n} max_i k_{i,r}`. [`verify_embedding`] certifies these
//! bounds on sampled inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{build_kappa, make_v_chain, DEFAULT_K_CAP};
use crate::error::{check_p, Error, Result};
use crate::norms::{garling_pow, garling_value, mixed_norm_blocks};
use crate::seq::FinSeq;
use crate::sum::{compensated_sum, NeumaierSum};
use crate::weights::{Weight, WeightSpec};

/// Absolute tolerance for the operator bounds on normalized inputs.
pub const BOUND_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance for `y*_a(y_b) = delta_{ab}`.
pub const BIORTHOGONALITY_TOLERANCE: f64 = 1e-12;
/// Tolerance for the DP re-check `||v[kappa_n]||_g <= t`.
pub const KAPPA_NORM_TOLERANCE: f64 = 1e-12;
/// Up to this many levels every path `(i_1, ..., i_N)` is checked.
pub const EXHAUSTIVE_PATH_LEVELS: usize = 8;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_190_101;

/// Search caps for [`build_embedding_plan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedCaps {
    pub k_cap: usize,
}

impl Default for EmbedCaps {
    fn default() -> Self {
        EmbedCaps {
            k_cap: DEFAULT_K_CAP,
        }
    }
}

/// Positions of the intervals, derived from the kappas.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    /// `m_n`, `n = 1..=N`.
    shifts: Vec<usize>,
    /// `m_{i,n}` for `i = 0..=n`, one row per level.
    ends: Vec<Vec<usize>>,
    /// Block order `(i, n)` lexicographic in `(n, i)`; 1-based.
    blocks: Vec<(usize, usize)>,
    /// First coordinate of each block, for binary search.
    starts: Vec<usize>,
    /// `k` of each block.
    lens: Vec<usize>,
    /// `sum_{j in J} w_j`.
    block_mass: Vec<f64>,
    /// `W_k^(1/p)`.
    scale: Vec<f64>,
    total: usize,
}

impl Layout {
    fn new(kappas: &[Vec<usize>], w: &Weight, p: f64) -> Layout {
        let mut shifts = Vec::with_capacity(kappas.len());
        let mut shift = 0;
        let mut ends = Vec::with_capacity(kappas.len());
        let mut end = 0;
        let mut blocks = Vec::new();
        let mut starts = Vec::new();
        let mut lens = Vec::new();
        for (level, kappa) in kappas.iter().enumerate() {
            shifts.push(shift);
            shift += kappa.iter().copied().max().unwrap_or(0);
            let mut row = vec![end];
            for (i, &k) in kappa.iter().enumerate() {
                blocks.push((i + 1, level + 1));
                starts.push(end + 1);
                lens.push(k);
                end += k;
                row.push(end);
            }
            ends.push(row);
        }
        let max_k = lens.iter().copied().max().unwrap_or(0);
        let sums = w.prefix_sums(end.max(max_k));
        let block_mass = starts
            .iter()
            .zip(&lens)
            .map(|(&s, &k)| compensated_sum((s..s + k).map(|j| w.at(j))))
            .collect();
        let scale = lens.iter().map(|&k| sums[k].powf(1.0 / p)).collect();
        Layout {
            shifts,
            ends,
            blocks,
            starts,
            lens,
            block_mass,
            scale,
            total: end,
        }
    }

    fn block_of(&self, j: usize) -> Option<usize> {
        if j == 0 || j > self.total {
            return None;
        }
        Some(self.starts.partition_point(|&s| s <= j) - 1)
    }

    fn flat(&self, i: usize, n: usize) -> usize {
        n * (n - 1) / 2 + i - 1
    }
}

/// A triangular array `((c_{i,n})_{i=1..n})_{n=1..N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriArray {
    pub rows: Vec<Vec<f64>>,
}

impl TriArray {
    pub fn zeros(levels: usize) -> TriArray {
        TriArray {
            rows: (1..=levels).map(|n| vec![0.0; n]).collect(),
        }
    }

    /// The array with a single 1 at `(i, n)`.
    pub fn unit(levels: usize, i: usize, n: usize) -> TriArray {
        let mut a = TriArray::zeros(levels);
        a.rows[n - 1][i - 1] = 1.0;
        a
    }

    /// Checks that row `n` has length `n`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<TriArray> {
        if let Some((n, r)) = rows.iter().enumerate().find(|(n, r)| r.len() != n + 1) {
            return Err(Error::ShapeMismatch(format!(
                "row {} has length {}, expected {}",
                n + 1,
                r.len(),
                n + 1
            )));
        }
        Ok(TriArray { rows })
    }

    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.rows[n - 1][i - 1]
    }

    /// `(sum_n max_i |c_{i,n}|^p)^(1/p)`.
    pub fn mixed_norm(&self, p: f64) -> Result<f64> {
        mixed_norm_blocks(&self.rows, p)
    }

    pub fn scale(&self, s: f64) -> TriArray {
        TriArray {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &TriArray) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `y*_{i,n}` as a coefficient table: `y*(f) = sum_j coeffs[j - start] a_j`
/// over `J_{i,n} = [start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub start: usize,
    pub end: usize,
    pub coeffs: Vec<f64>,
}

impl Functional {
    pub fn apply(&self, f: &FinSeq) -> f64 {
        compensated_sum(
            f.support()
                .filter(|(j, _)| (self.start..=self.end).contains(j))
                .map(|(j, a)| self.coeffs[j - self.start] * a),
        )
    }
}

/// JSON form of an [`EmbeddingPlan`]. The derived fields are stored for
/// inspection; loading recomputes them and the structural checks compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub epsilon: f64,
    pub t: f64,
    pub levels: usize,
    pub p: f64,
    pub weight: WeightSpec,
    pub kappas: Vec<Vec<usize>>,
    pub level_shifts: Vec<usize>,
    pub block_ends: Vec<Vec<usize>>,
    /// `[start, end]` of each `J_{i,n}`, one row per level.
    pub intervals: Vec<Vec<[usize; 2]>>,
}

/// The truncated embedding witness.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPlan {
    epsilon: f64,
    t: f64,
    p: f64,
    weight: Weight,
    kappas: Vec<Vec<usize>>,
    declared_shifts: Vec<usize>,
    declared_ends: Vec<Vec<usize>>,
    declared_intervals: Vec<Vec<[usize; 2]>>,
    layout: Layout,
}

impl EmbeddingPlan {
    /// Assembles a plan from its kappas, deriving everything else.
    pub fn from_kappas(
        epsilon: f64,
        weight: Weight,
        p: f64,
        kappas: Vec<Vec<usize>>,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_p(p)?;
        check_kappas(&kappas)?;
        let layout = Layout::new(&kappas, &weight, p);
        Ok(EmbeddingPlan {
            epsilon,
            t: (1.0 + epsilon).sqrt(),
            p,
            weight,
            declared_shifts: layout.shifts.clone(),
            declared_ends: layout.ends.clone(),
            declared_intervals: intervals_of(&layout),
            kappas,
            layout,
        })
    }

    pub fn from_record(rec: PlanRecord) -> Result<Self> {
        check_epsilon(rec.epsilon)?;
        check_p(rec.p)?;
        check_kappas(&rec.kappas)?;
        if rec.levels != rec.kappas.len() {
            return Err(Error::ShapeMismatch(format!(
                "levels = {} but {} kappas given",
                rec.levels,
                rec.kappas.len()
            )));
        }
        if !(rec.t.is_finite() && rec.t > 1.0) {
            return Err(Error::PreconditionViolated(format!(
                "t = {} must exceed 1",
                rec.t
            )));
        }
        let weight = Weight::new(rec.weight)?;
        let layout = Layout::new(&rec.kappas, &weight, rec.p);
        Ok(EmbeddingPlan {
            epsilon: rec.epsilon,
            t: rec.t,
            p: rec.p,
            weight,
            kappas: rec.kappas,
            declared_shifts: rec.level_shifts,
            declared_ends: rec.block_ends,
            declared_intervals: rec.intervals,
            layout,
        })
    }

    pub fn to_record(&self) -> PlanRecord {
        PlanRecord {
            epsilon: self.epsilon,
            t: self.t,
            levels: self.levels(),
            p: self.p,
            weight: self.weight.spec().clone(),
            kappas: self.kappas.clone(),
            level_shifts: self.declared_shifts.clone(),
            block_ends: self.declared_ends.clone(),
            intervals: self.declared_intervals.clone(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn levels(&self) -> usize {
        self.kappas.len()
    }

    pub fn kappas(&self) -> &[Vec<usize>] {
        &self.kappas
    }

    /// `m_n` for `n = 1..=N`.
    pub fn level_shifts(&self) -> &[usize] {
        &self.layout.shifts
    }

    /// `m_{i,n}` for `0 <= i <= n`.
    pub fn block_end(&self, i: usize, n: usize) -> usize {
        self.layout.ends[n - 1][i]
    }

    /// `J_{i,n}` as `(start, end)`, inclusive.
    pub fn interval(&self, i: usize, n: usize) -> Result<(usize, usize)> {
        self.check_index(i, n)?;
        Ok((self.block_end(i - 1, n) + 1, self.block_end(i, n)))
    }

    /// `m_{N,N}`: the last coordinate used.
    pub fn total_length(&self) -> usize {
        self.layout.total
    }

    fn check_index(&self, i: usize, n: usize) -> Result<()> {
        if n == 0 || n > self.levels() || i == 0 || i > n {
            return Err(Error::IndexOutOfRange(format!(
                "(i, n) = ({i}, {n}) outside 1 <= i <= n <= {}",
                self.levels()
            )));
        }
        Ok(())
    }

    /// The block vector `y_n = sum_i y_{i,n}`, a shift of `v[kappa_n]`.
    pub fn level_vector(&self, n: usize) -> Result<FinSeq> {
        self.check_index(1, n)?;
        let v = make_v_chain(&self.kappas[n - 1], &self.weight, self.p);
        Ok(v.shift(self.block_end(0, n)))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::PreconditionViolated(format!(
            "epsilon = {epsilon} must be positive"
        )))
    }
}

fn check_kappas(kappas: &[Vec<usize>]) -> Result<()> {
    if kappas.is_empty() {
        return Err(Error::PreconditionViolated(
            "a plan needs N >= 1 levels".into(),
        ));
    }
    for (n, kappa) in kappas.iter().enumerate() {
        if kappa.len() != n + 1 {
            return Err(Error::ShapeMismatch(format!(
                "kappa_{} has length {}, expected {}",
                n + 1,
                kappa.len(),
                n + 1
            )));
        }
        if kappa.contains(&0) {
            return Err(Error::PreconditionViolated(format!(
                "kappa_{} has a zero entry",
                n + 1
            )));
        }
    }
    Ok(())
}

fn intervals_of(layout: &Layout) -> Vec<Vec<[usize; 2]>> {
    layout
        .ends
        .iter()
        .map(|row| row.windows(2).map(|e| [e[0] + 1, e[1]]).collect())
        .collect()
}

/// Builds the plan level by level: `m_n` from the earlier levels, then
/// `kappa_n` by prepending with the hump condition at shift `m_n` as an
/// extra acceptance test.
pub fn build_embedding_plan(
    epsilon: f64,
    levels: usize,
    w: &Weight,
    p: f64,
    caps: EmbedCaps,
) -> Result<EmbeddingPlan> {
    check_epsilon(epsilon)?;
    check_p(p)?;
    if levels == 0 {
        return Err(Error::PreconditionViolated(
            "a plan needs N >= 1 levels".into(),
        ));
    }
    let t = (1.0 + epsilon).sqrt();
    let theta = t.powf(-p);
    let mut kappas: Vec<Vec<usize>> = Vec::with_capacity(levels);
    let mut shift = 0;
    for n in 1..=levels {
        let m_n = shift;
        let hump = move |k: usize| w.hump_ratio(m_n, k) >= theta;
        let kappa = build_kappa(n, t, w, p, 1, Some(&hump), caps.k_cap)?;
        shift += kappa.entries.iter().copied().max().unwrap_or(0);
        kappas.push(kappa.entries);
    }
    EmbeddingPlan::from_kappas(epsilon, w.clone(), p, kappas)
}

/// `y_{i,n} = W_{k_{i,n}}^(-1/p) 1_{J_{i,n}}`.
pub fn y_vector(plan: &EmbeddingPlan, i: usize, n: usize) -> Result<FinSeq> {
    let (start, end) = plan.interval(i, n)?;
    let b = plan.layout.flat(i, n);
    Ok(FinSeq::with_offset(
        start - 1,
        vec![1.0 / plan.layout.scale[b]; end + 1 - start],
    ))
}

/// `y*_{i,n}(f) = W_k^(1/p) (sum_J w_j)^(-1) sum_J w_j a_j`.
pub fn y_functional(plan: &EmbeddingPlan, i: usize, n: usize) -> Result<Functional> {
    let (start, end) = plan.interval(i, n)?;
    let b = plan.layout.flat(i, n);
    let factor = plan.layout.scale[b] / plan.layout.block_mass[b];
    Ok(Functional {
        start,
        end,
        coeffs: (start..=end).map(|j| factor * plan.weight.at(j)).collect(),
    })
}

/// `P f = (y*_{i,n}(f))`. Rejects `f` supported beyond `m_{N,N}`.
#[allow(non_snake_case)]
pub fn apply_P(plan: &EmbeddingPlan, f: &FinSeq) -> Result<TriArray> {
    let layout = &plan.layout;
    let mut acc = vec![NeumaierSum::new(); layout.blocks.len()];
    for (j, a) in f.support() {
        let b = layout.block_of(j).ok_or_else(|| {
            Error::SupportOutOfRange(format!(
                "coordinate {j} lies beyond the last interval (ends at {})",
                layout.total
            ))
        })?;
        acc[b].add(plan.weight.at(j) * a);
    }
    let mut out = TriArray::zeros(plan.levels());
    for (b, &(i, n)) in layout.blocks.iter().enumerate() {
        let v = acc[b].value();
        if v != 0.0 {
            out.rows[n - 1][i - 1] = layout.scale[b] * (v / layout.block_mass[b]);
        }
    }
    Ok(out)
}

/// `S x = sum x_{i,n} y_{i,n}`.
#[allow(non_snake_case)]
pub fn apply_S(plan: &EmbeddingPlan, x: &TriArray) -> Result<FinSeq> {
    let shape_ok =
        x.levels() == plan.levels() && x.rows.iter().enumerate().all(|(n, r)| r.len() == n + 1);
    if !shape_ok {
        return Err(Error::ShapeMismatch(format!(
            "array must have {} rows of lengths 1..={}",
            plan.levels(),
            plan.levels()
        )));
    }
    let layout = &plan.layout;
    let mut coeffs = Vec::with_capacity(layout.total);
    for (b, &(i, n)) in layout.blocks.iter().enumerate() {
        let c = x.get(i, n) / layout.scale[b];
        coeffs.resize(coeffs.len() + layout.lens[b], c);
    }
    Ok(FinSeq::new(coeffs))
}

/// Consecutive blocks of lengths `k_n` with partial sums `q_n`, certified to
/// satisfy `(W_{q_n} - W_{q_{n-1}}) / W_{k_n} >= theta` for every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub lengths: Vec<usize>,
    pub theta: f64,
}

impl GammaSpec {
    /// Certifies the given `theta`.
    pub fn new(lengths: Vec<usize>, theta: f64, w: &Weight) -> Result<GammaSpec> {
        let worst = gamma_min_ratio(&lengths, w)?;
        if theta.is_nan() || theta <= 0.0 || worst < theta {
            return Err(Error::UncertifiedGamma(format!(
                "smallest block ratio {worst} is below theta = {theta}"
            )));
        }
        Ok(GammaSpec { lengths, theta })
    }

    /// Uses the smallest block ratio as `theta`.
    pub fn certify(lengths: Vec<usize>, w: &Weight) -> Result<GammaSpec> {
        let theta = gamma_min_ratio(&lengths, w)?;
        Ok(GammaSpec { lengths, theta })
    }

    /// `q_0 = 0, q_1, ..., q_n`.
    pub fn partial_sums(&self) -> Vec<usize> {
        let mut q = vec![0];
        for &k in &self.lengths {
            q.push(q.last().unwrap() + k);
        }
        q
    }
}

fn gamma_min_ratio(lengths: &[usize], w: &Weight) -> Result<f64> {
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::UncertifiedGamma(
            "block lengths must be a nonempty list of positive integers".into(),
        ));
    }
    let total: usize = lengths.iter().sum();
    let max_k = lengths.iter().copied().max().unwrap();
    let sums = w.prefix_sums(total.max(max_k));
    let mut q = 0;
    let mut worst = f64::INFINITY;
    for &k in lengths {
        worst = worst.min((sums[q + k] - sums[q]) / sums[k]);
        q += k;
    }
    Ok(worst)
}

/// `P_gamma f`: entry `n` is `W_{k_n}^(1/p) (sum_{block n} w_j)^(-1) sum_{block n} a_j w_j`.
/// Coordinates past the last block are not read.
pub fn p_gamma(gamma: &GammaSpec, w: &Weight, p: f64, f: &FinSeq) -> Result<FinSeq> {
    check_p(p)?;
    let worst = gamma_min_ratio(&gamma.lengths, w)?;
    if worst < gamma.theta {
        return Err(Error::UncertifiedGamma(format!(
            "smallest block ratio {worst} is below theta = {}",
            gamma.theta
        )));
    }
    let q = gamma.partial_sums();
    let sums = w.prefix_sums(*q.last().unwrap());
    let mut acc = vec![NeumaierSum::new(); gamma.lengths.len()];
    for (j, a) in f.support() {
        if j > *q.last().unwrap() {
            break;
        }
        let b = q.partition_point(|&e| e < j) - 1;
        acc[b].add(a * w.at(j));
    }
    let out = acc
        .iter()
        .enumerate()
        .map(|(b, s)| {
            let v = s.value();
            if v == 0.0 {
                return 0.0;
            }
            let k = gamma.lengths[b];
            let mass = compensated_sum((q[b] + 1..=q[b + 1]).map(|j| w.at(j)));
            sums[k].powf(1.0 / p) * (v / mass)
        })
        .collect();
    Ok(FinSeq::new(out))
}

/// Both sides of `||sum b_n block_n||_g <= t (sum |b_n|^p)^(1/p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationVerdict {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn block_domination_check(
    blocks: &[FinSeq],
    t: f64,
    coeffs: &[f64],
    w: &Weight,
    p: f64,
) -> Result<DominationVerdict> {
    check_p(p)?;
    if blocks.len() != coeffs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} blocks but {} coefficients",
            blocks.len(),
            coeffs.len()
        )));
    }
    let mut last = 0;
    let mut combined = FinSeq::empty();
    for (n, (block, &b)) in blocks.iter().zip(coeffs).enumerate() {
        let norm = garling_value(block, w, p)?;
        if norm > t {
            return Err(Error::PreconditionViolated(format!(
                "block {} has norm {norm} > t = {t}",
                n + 1
            )));
        }
        let mut first = true;
        for (j, a) in block.support() {
            if first && j <= last {
                return Err(Error::PreconditionViolated(format!(
                    "block {} starts at {j}, not after the previous block",
                    n + 1
                )));
            }
            first = false;
            last = j;
            combined.set(j, a * b);
        }
    }
    let lhs = garling_value(&combined, w, p)?;
    let rhs = t * compensated_sum(coeffs.iter().map(|b| b.abs().powf(p))).powf(1.0 / p);
    Ok(DominationVerdict {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_TOLERANCE,
    })
}

/// One line of a verification report. `worst_slack` is the largest
/// `lhs - rhs` seen; the check passes iff it is at most `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub trials: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Trial (or path, or block) index attaining the worst slack.
    pub worst_case: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub trials: usize,
    pub input_distribution: String,
    /// Sorted by check name.
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }
}

pub const INPUT_DISTRIBUTION: &str = "coefficients: sign uniform in {-1,+1}, magnitude U(0,1) or \
10^U(-4,0) with probability 1/2 each; sequences cycle through sparse (1..=32 random coordinates), \
block-constant (each interval constant, half of them zero), single path (one interval per level), \
alternating signs of equal magnitude; arrays cycle through dense, sparse, one entry per level, \
row-constant";

fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let mag = if rng.gen_bool(0.5) {
        rng.gen::<f64>()
    } else {
        10f64.powf(rng.gen_range(-4.0..0.0))
    };
    if rng.gen_bool(0.5) {
        -mag
    } else {
        mag
    }
}

fn trial_rng(seed: u64, check: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((check << 32) | trial as u64);
    rng
}

fn random_sequence(plan: &EmbeddingPlan, trial: usize, rng: &mut ChaCha8Rng) -> FinSeq {
    let layout = &plan.layout;
    let mut f = FinSeq::empty();
    match trial % 4 {
        0 => {
            let s = rng.gen_range(1..=32);
            for _ in 0..s {
                f.set(rng.gen_range(1..=layout.total), coefficient(rng));
            }
        }
        1 => {
            let mut coeffs = Vec::with_capacity(layout.total);
            for &k in &layout.lens {
                let c = if rng.gen_bool(0.5) {
                    coefficient(rng)
                } else {
                    0.0
                };
                coeffs.resize(coeffs.len() + k, c);
            }
            f = FinSeq::new(coeffs);
        }
        2 => {
            for n in 1..=plan.levels() {
                let i = rng.gen_range(1..=n);
                let b = layout.flat(i, n);
                let c = coefficient(rng);
                for j in layout.starts[b]..layout.starts[b] + layout.lens[b] {
                    f.set(j, c);
                }
            }
        }
        _ => {
            let s = rng.gen_range(1..=32);
            let mut coords: Vec<usize> = (0..s).map(|_| rng.gen_range(1..=layout.total)).collect();
            coords.sort_unstable();
            coords.dedup();
            let c = coefficient(rng).abs();
            for (r, j) in coords.into_iter().enumerate() {
                f.set(j, if r % 2 == 0 { c } else { -c });
            }
        }
    }
    if f.is_zero() {
        f.set(1, 1.0);
    }
    f
}

fn random_array(levels: usize, trial: usize, rng: &mut ChaCha8Rng) -> TriArray {
    let mut x = TriArray::zeros(levels);
    match trial % 4 {
        0 => {
            for v in x.rows.iter_mut().flatten() {
                *v = coefficient(rng);
            }
        }
        1 => {
            let total = levels * (levels + 1) / 2;
            for _ in 0..rng.gen_range(1..=3) {
                let mut b = rng.gen_range(0..total);
                let mut n = 1;
                while b >= n {
                    b -= n;
                    n += 1;
                }
                x.rows[n - 1][b] = coefficient(rng);
            }
        }
        2 => {
            for row in x.rows.iter_mut() {
                let i = rng.gen_range(0..row.len());
                row[i] = coefficient(rng);
            }
        }
        _ => {
            for row in x.rows.iter_mut() {
                let c = coefficient(rng);
                for v in row.iter_mut() {
                    *v = if rng.gen_bool(0.5) { c } else { -c };
                }
            }
        }
    }
    if x.rows.iter().flatten().all(|v| *v == 0.0) {
        x.rows[0][0] = 1.0;
    }
    x
}

/// Runs `trials` independent seeded trials and keeps the worst slack.
/// Ties go to the smallest trial index, so the result does not depend on
/// the parallel schedule.
fn worst_over<F>(trials: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..trials).into_par_iter().map(|i| (f(i), i)).reduce(
        || (f64::NEG_INFINITY, usize::MAX),
        |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) || a.0.is_nan() {
                b
            } else {
                a
            }
        },
    )
}

fn result(check: &str, trials: usize, worst: (f64, usize), tolerance: f64) -> CheckResult {
    CheckResult {
        check: check.to_string(),
        trials,
        worst_slack: worst.0,
        tolerance,
        pass: worst.0 <= tolerance,
        worst_case: if worst.1 == usize::MAX { 0 } else { worst.1 },
    }
}

/// Structural checks: recomputable facts about the plan itself.
pub fn structural_checks(plan: &EmbeddingPlan) -> Vec<CheckResult> {
    let w = &plan.weight;
    let p = plan.p;
    let t = plan.t;
    let theta = t.powf(-p);
    let layout = &plan.layout;
    let mut out = Vec::new();

    // t must be sqrt(1 + epsilon).
    let t_err = (t - (1.0 + plan.epsilon).sqrt()).abs();
    out.push(result("t_value", 1, (t_err, 0), 1e-15));

    // Declared intervals partition [1, m_{N,N}] in (n, i) order with the
    // right lengths; declared shifts and ends match the formulas.
    let mut bad = 0usize;
    let mut first_bad = usize::MAX;
    let mut expect = 1usize;
    let mut b = 0usize;
    let mut note = |ok: bool, b: usize, bad: &mut usize| {
        if !ok {
            *bad += 1;
            first_bad = first_bad.min(b);
        }
    };
    let rows_ok = plan.declared_intervals.len() == plan.levels();
    note(rows_ok, 0, &mut bad);
    for (n, kappa) in plan.kappas.iter().enumerate() {
        let row = plan.declared_intervals.get(n);
        note(row.map(|r| r.len()) == Some(kappa.len()), b, &mut bad);
        for (i, &k) in kappa.iter().enumerate() {
            let iv = row.and_then(|r| r.get(i)).copied();
            let ok = iv == Some([expect, expect + k - 1]);
            note(ok, b, &mut bad);
            if let Some([s, e]) = iv {
                expect = e.max(s) + 1;
            } else {
                expect += k;
            }
            b += 1;
        }
    }
    note(expect == layout.total + 1, b, &mut bad);
    out.push(result("partition", b, (bad as f64, first_bad), 0.0));

    let mut bad = 0usize;
    let mut first_bad = usize::MAX;
    if plan.declared_shifts != layout.shifts {
        bad += 1;
        first_bad = 0;
    }
    if plan.declared_ends != layout.ends {
        bad += 1;
        first_bad = first_bad.min(1);
    }
    let strictly_increasing = layout
        .ends
        .iter()
        .flat_map(|r| r.iter().skip(1))
        .collect::<Vec<_>>()
        .windows(2)
        .all(|e| e[1] > e[0]);
    if !strictly_increasing {
        bad += 1;
        first_bad = first_bad.min(2);
    }
    out.push(result("shifts", 3, (bad as f64, first_bad), 0.0));

    // ||v[kappa_n]||_g <= t.
    let worst = worst_over(plan.levels(), |n| {
        let v = make_v_chain(&plan.kappas[n], w, p);
        garling_pow(&v, w, p, 0).powf(1.0 / p) - t
    });
    out.push(result(
        "kappa_norms",
        plan.levels(),
        worst,
        KAPPA_NORM_TOLERANCE,
    ));

    // Hump condition at every (i, n).
    let worst = worst_over(layout.blocks.len(), |b| {
        let (_, n) = layout.blocks[b];
        theta - w.hump_ratio(layout.shifts[n - 1], layout.lens[b])
    });
    out.push(result("hump_condition", layout.blocks.len(), worst, 0.0));

    // Every path (i_1, ..., i_N): q_{n-1} <= m_n and the block ratio along
    // the path is at least t^(-p).
    let levels = plan.levels();
    let exhaustive = levels <= EXHAUSTIVE_PATH_LEVELS;
    let paths = if exhaustive {
        (1..=levels).product::<usize>()
    } else {
        4096
    };
    let sums = w.prefix_sums(layout.total);
    let worst = worst_over(paths, |idx| {
        let path: Vec<usize> = if exhaustive {
            let mut rest = idx;
            (1..=levels)
                .map(|n| {
                    let i = rest % n;
                    rest /= n;
                    i + 1
                })
                .collect()
        } else {
            let mut rng = trial_rng(DEFAULT_SEED, 99, idx);
            (1..=levels).map(|n| rng.gen_range(1..=n)).collect()
        };
        let mut q = 0usize;
        let mut slack = f64::NEG_INFINITY;
        for (n, &i) in path.iter().enumerate() {
            if q > layout.shifts[n] {
                slack = slack.max((q - layout.shifts[n]) as f64);
            }
            let k = plan.kappas[n][i - 1];
            let ratio = (sums[q + k] - sums[q]) / sums[k];
            slack = slack.max(theta - ratio);
            q += k;
        }
        slack
    });
    out.push(result("shift_paths", paths, worst, 1e-12));

    // y*_a(y_b) = delta_ab over the full grid.
    let blocks = layout.blocks.len();
    let worst = worst_over(blocks, |bb| {
        let (i, n) = layout.blocks[bb];
        let y = y_vector(plan, i, n).expect("index from layout");
        let c = apply_P(plan, &y).expect("support inside the plan");
        let mut err: f64 = 0.0;
        for (a, &(ia, na)) in layout.blocks.iter().enumerate() {
            let delta = if a == bb { 1.0 } else { 0.0 };
            err = err.max((c.get(ia, na) - delta).abs());
        }
        err
    });
    out.push(result(
        "biorthogonality",
        blocks * blocks,
        worst,
        BIORTHOGONALITY_TOLERANCE,
    ));
    out
}

/// Structural checks plus the sampled operator bounds.
pub fn verify_embedding(plan: &EmbeddingPlan, trials: usize, seed: u64) -> VerificationReport {
    let w = &plan.weight;
    let p = plan.p;
    let t = plan.t;
    let levels = plan.levels();
    let mut checks = structural_checks(plan);

    // mixed(P f) <= t ||f||_g
    let worst = worst_over(trials, |i| {
        let mut rng = trial_rng(seed, 1, i);
        let f = random_sequence(plan, i, &mut rng);
        let norm = garling_value(&f, w, p).unwrap();
        let pf = apply_P(plan, &f).unwrap();
        pf.mixed_norm(p).unwrap() / norm - t
    });
    checks.push(result("p_bound", trials, worst, BOUND_TOLERANCE));

    // ||S x||_g <= t mixed(x), ||S x||_g >= mixed(x) / t, P S x = x.
    let s_trial = |i: usize| {
        let mut rng = trial_rng(seed, 2, i);
        let x = random_array(levels, i, &mut rng);
        let x = x.scale(1.0 / x.mixed_norm(p).unwrap());
        let sx = apply_S(plan, &x).unwrap();
        let norm = garling_value(&sx, w, p).unwrap();
        let back = apply_P(plan, &sx).unwrap();
        (norm, back.max_abs_diff(&x))
    };
    let s_runs: Vec<(f64, f64)> = (0..trials).into_par_iter().map(s_trial).collect();
    let pick = |g: &dyn Fn(&(f64, f64)) -> f64| {
        s_runs
            .iter()
            .enumerate()
            .fold((f64::NEG_INFINITY, usize::MAX), |acc, (i, r)| {
                let v = g(r);
                if v > acc.0 || acc.0.is_nan() {
                    (v, i)
                } else {
                    acc
                }
            })
    };
    checks.push(result(
        "s_bound",
        trials,
        pick(&|r| r.0 - t),
        BOUND_TOLERANCE,
    ));
    checks.push(result(
        "s_lower_bound",
        trials,
        pick(&|r| 1.0 / t - r.0),
        BOUND_TOLERANCE,
    ));
    checks.push(result(
        "p_s_identity",
        trials,
        pick(&|r| r.1),
        BOUND_TOLERANCE,
    ));

    // ||sum b_n y_n||_g <= t l_p(b)
    let level_vectors: Vec<FinSeq> = (1..=levels)
        .map(|n| plan.level_vector(n).expect("level in range"))
        .collect();
    let worst = worst_over(trials, |i| {
        let mut rng = trial_rng(seed, 3, i);
        let b: Vec<f64> = (0..levels)
            .map(|_| {
                if rng.gen_bool(0.75) {
                    coefficient(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        let lp = compensated_sum(b.iter().map(|v| v.abs().powf(p))).powf(1.0 / p);
        if lp == 0.0 {
            return f64::NEG_INFINITY;
        }
        match block_domination_check(&level_vectors, t, &b, w, p) {
            Ok(v) => (v.lhs - v.rhs) / lp,
            Err(_) => f64::INFINITY,
        }
    });
    checks.push(result("block_domination", trials, worst, BOUND_TOLERANCE));

    checks.sort_by(|a, b| a.check.cmp(&b.check));
    let pass = checks.iter().all(|c| c.pass);
    VerificationReport {
        seed,
        trials,
        input_distribution: INPUT_DISTRIBUTION.to_string(),
        checks,
        pass,
    }
}
