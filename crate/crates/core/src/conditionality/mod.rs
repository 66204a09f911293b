//! Conditionality gauges of finite bases.
//!
//! For a basis `(x_j)` and coefficients `f = (a_j)`, `S_A f = sum_{j in A} a_j x_j`.
//!
//! * `L_m = sup { ||S_A f|| / ||f|| : supp f ⊆ [1, m], A ⊆ [1, m] }`
//! * `k_m = sup { ||S_A f|| / ||f|| : |A| <= m }`
//!
//! Exact values come from enumerating the extreme points of the ambient ball
//! on the relevant coordinate subspace (where those are sign patterns) and
//! all admissible `A`; `||S_A f||` is convex in `f`, so the supremum over the
//! ball is attained at an extreme point. Unit vector bases of lattice norms
//! have both gauges equal to 1. Everything else is a seeded search that
//! returns a certified lower bound together with its witness.

mod basis;

pub use basis::{
    besov_sum_basis, summing_basis, BasisSummary, FiniteBasis, CONDITION_ESTIMATE_MAX_DIM,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::SpaceNorm;

/// Largest `m` for exact `L_m`.
pub const EXACT_L_MAX: usize = 14;
/// Largest dimension for exact `k_m`.
pub const EXACT_K_MAX_DIM: usize = 12;
/// Largest dimension for subset enumeration in the fundamental function and
/// democracy ratios.
pub const SUBSET_ENUMERATION_MAX_DIM: usize = 20;
/// Largest dimension for the exhaustive inner search in [`almost_greedy_ratio`].
pub const ALMOST_GREEDY_EXHAUSTIVE_MAX_DIM: usize = 16;
/// Denominators below this are skipped in [`almost_greedy_ratio`].
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Largest `m` for the signed democracy ratio.
pub const SIGNED_DEMOCRACY_MAX_M: usize = 14;
pub const DEFAULT_LINEAR_FLOOR: f64 = 0.25;
pub const DEFAULT_LOG_TREND_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeKind {
    #[serde(rename = "L")]
    L,
    #[serde(rename = "k")]
    K,
}

impl GaugeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GaugeKind::L => "L",
            GaugeKind::K => "k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEnumeration,
    /// Unit vector basis of a lattice norm: `||S_A f|| <= ||f||`, attained at `f = e_1`.
    LatticeExact,
    ProbeLowerBound,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactEnumeration => "exact-enumeration",
            Method::LatticeExact => "lattice-exact",
            Method::ProbeLowerBound => "probe-lower-bound",
        }
    }
}

/// Coefficients `f` (length `d`) and a 1-based index set `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub coeffs: Vec<f64>,
    pub set: Vec<usize>,
}

impl Witness {
    /// `||S_A f|| / ||f||`.
    pub fn ratio(&self, basis: &FiniteBasis) -> f64 {
        let projected = coordinate_projection(&self.set, &self.coeffs);
        basis.norm_of(&projected) / basis.norm_of(&self.coeffs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeEntry {
    pub m: usize,
    pub kind: GaugeKind,
    pub value: f64,
    pub method: Method,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub basis: BasisSummary,
    pub entries: Vec<GaugeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub restarts: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            restarts: 64,
            sweeps: 200,
            seed: crate::embedding::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Probe(ProbeOptions),
}

/// Zeroes the coefficients outside `A` (1-based indices).
pub fn coordinate_projection(set: &[usize], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for &j in set {
        if (1..=coeffs.len()).contains(&j) {
            out[j - 1] = coeffs[j - 1];
        }
    }
    out
}

/// Extreme points, up to sign, of the ambient ball restricted to
/// coordinates `1..=m`, when these are explicit sign patterns.
fn extreme_points(ambient: &SpaceNorm, m: usize) -> Option<Vec<Vec<f64>>> {
    let signs = |len: usize, fix_first: bool| -> Vec<Vec<f64>> {
        let count = if fix_first {
            1usize << (len - 1)
        } else {
            1usize << len
        };
        (0..count)
            .map(|mask| {
                (0..len)
                    .map(|i| {
                        let bit = if fix_first {
                            i.checked_sub(1).map(|b| (mask >> b) & 1)
                        } else {
                            Some((mask >> i) & 1)
                        };
                        if bit == Some(1) {
                            -1.0
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect()
    };
    match ambient {
        SpaceNorm::Sup => Some(signs(m, true)),
        SpaceNorm::Mixed { blocks, .. } if blocks[0] >= m => Some(signs(m, true)),
        SpaceNorm::Ellp { p } if *p == 1.0 => Some(
            (0..m)
                .map(|j| {
                    let mut v = vec![0.0; m];
                    v[j] = 1.0;
                    v
                })
                .collect(),
        ),
        SpaceNorm::Mixed { p, blocks } if *p == 1.0 => {
            let mut out = Vec::new();
            let mut start = 0;
            for &len in blocks {
                if start >= m {
                    break;
                }
                let end = (start + len).min(m);
                for pattern in signs(end - start, true) {
                    let mut v = vec![0.0; m];
                    v[start..end].copy_from_slice(&pattern);
                    out.push(v);
                }
                start += len;
            }
            Some(out)
        }
        _ if m == 1 => Some(vec![vec![1.0]]),
        _ => None,
    }
}

/// Picks the larger value; ties go to the smaller key.
fn better(a: (f64, usize, u64), b: (f64, usize, u64)) -> (f64, usize, u64) {
    if a.0.is_nan() || b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
        b
    } else {
        a
    }
}

fn mask_to_set(mask: u64) -> Vec<usize> {
    (0..64)
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| b + 1)
        .collect()
}

fn lattice_entry(basis: &FiniteBasis, m: usize, kind: GaugeKind) -> GaugeEntry {
    let mut coeffs = vec![0.0; basis.dim()];
    coeffs[0] = 1.0;
    GaugeEntry {
        m,
        kind,
        value: 1.0,
        method: Method::LatticeExact,
        witness: Witness {
            coeffs,
            set: vec![1],
        },
    }
}

/// Exact search: for every extreme point `y` on coordinates `1..=n`, solve
/// for the coefficients and scan every admissible mask in Gray-code order.
fn enumerate(
    basis: &FiniteBasis,
    n: usize,
    admissible: impl Fn(u64) -> bool + Sync,
) -> Result<(f64, Witness)> {
    let points = extreme_points(basis.ambient(), n).ok_or_else(|| {
        Error::ModeUnsupported(format!(
            "the {} ambient has no sign-pattern extreme points on {n} coordinates",
            basis.ambient().kind()
        ))
    })?;
    let lu = basis.matrix(n).lu();
    let coeffs: Vec<Vec<f64>> = points
        .iter()
        .map(|y| {
            let sol = lu
                .solve(&DVector::from_column_slice(y))
                .expect("leading block is invertible");
            sol.iter().copied().collect()
        })
        .collect();
    let best = coeffs
        .par_iter()
        .enumerate()
        .map(|(e, a)| {
            let mut z = vec![0.0; n];
            let mut mask = 0u64;
            let mut best = (f64::NEG_INFINITY, e, 0u64);
            for g in 1u64..(1u64 << n) {
                let bit = g.trailing_zeros() as usize;
                mask ^= 1 << bit;
                let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                for &(c, v) in basis.column(bit) {
                    z[c] += sign * a[bit] * v;
                }
                if admissible(mask) {
                    best = better(best, (basis.norm_dense(&z), e, mask));
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, usize::MAX, 0), better);
    let mut full = coeffs[best.1].clone();
    full.resize(basis.dim(), 0.0);
    let witness = Witness {
        coeffs: full,
        set: mask_to_set(best.2),
    };
    Ok((witness.ratio(basis), witness))
}

#[allow(non_snake_case)]
pub fn L_m(basis: &FiniteBasis, m: usize, mode: Mode) -> Result<GaugeEntry> {
    if m == 0 || m > basis.dim() {
        return Err(Error::IndexOutOfRange(format!(
            "m = {m} outside 1..={}",
            basis.dim()
        )));
    }
    match mode {
        Mode::Exact => {
            if basis.is_unit_vector_basis() {
                return Ok(lattice_entry(basis, m, GaugeKind::L));
            }
            if basis.full_coordinate_span_prefix().unwrap_or(0) < m {
                return Err(Error::ModeUnsupported(format!(
                    "exact L_{m} needs the first {m} vectors to span the first {m} coordinates"
                )));
            }
            if m > EXACT_L_MAX {
                return Err(Error::ModeUnsupported(format!(
                    "exact L_m is limited to m <= {EXACT_L_MAX}"
                )));
            }
            let (value, witness) = enumerate(basis, m, |_| true)?;
            Ok(GaugeEntry {
                m,
                kind: GaugeKind::L,
                value,
                method: Method::ExactEnumeration,
                witness,
            })
        }
        Mode::Probe(opts) => Ok(probe(basis, m, GaugeKind::L, opts)),
    }
}

#[allow(non_snake_case)]
pub fn k_m(basis: &FiniteBasis, m: usize, mode: Mode) -> Result<GaugeEntry> {
    let d = basis.dim();
    if m == 0 || m > d {
        return Err(Error::IndexOutOfRange(format!("m = {m} outside 1..={d}")));
    }
    match mode {
        Mode::Exact => {
            if basis.is_unit_vector_basis() {
                return Ok(lattice_entry(basis, m, GaugeKind::K));
            }
            if d > EXACT_K_MAX_DIM {
                return Err(Error::ModeUnsupported(format!(
                    "exact k_m is limited to dimension <= {EXACT_K_MAX_DIM}"
                )));
            }
            let (value, witness) = enumerate(basis, d, |mask| mask.count_ones() as usize <= m)?;
            Ok(GaugeEntry {
                m,
                kind: GaugeKind::K,
                value,
                method: Method::ExactEnumeration,
                witness,
            })
        }
        Mode::Probe(opts) => Ok(probe(basis, m, GaugeKind::K, opts)),
    }
}

/// `L_1..=L_{m_max}` or `k_1..=k_{m_max}` as a report.
pub fn gauge_report(
    basis: &FiniteBasis,
    kind: GaugeKind,
    m_max: usize,
    mode: Mode,
) -> Result<GaugeReport> {
    let entries = (1..=m_max)
        .map(|m| match kind {
            GaugeKind::L => L_m(basis, m, mode),
            GaugeKind::K => k_m(basis, m, mode),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeReport {
        basis: basis.summary(),
        entries,
    })
}

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

fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random restarts followed by coordinate ascent, moving coefficients,
/// coordinates (through the inverse change of basis) and membership of `A`.
fn probe(basis: &FiniteBasis, m: usize, kind: GaugeKind, opts: ProbeOptions) -> GaugeEntry {
    let d = basis.dim();
    let n = match kind {
        GaugeKind::L => m,
        GaugeKind::K => d,
    };
    let inverse: Option<DMatrix<f64>> = if n <= CONDITION_ESTIMATE_MAX_DIM {
        basis.matrix(n).lu().try_inverse()
    } else {
        None
    };
    let coordinates_closed = match kind {
        GaugeKind::L => basis.full_coordinate_span_prefix().unwrap_or(0) >= m,
        GaugeKind::K => true,
    };
    let admissible = |set: &[bool]| match kind {
        GaugeKind::L => true,
        GaugeKind::K => set.iter().filter(|b| **b).count() <= m,
    };
    let objective = |a: &[f64], set: &[bool]| -> f64 {
        let mut full = vec![0.0; d];
        full[..n].copy_from_slice(a);
        let denom = basis.norm_of(&full);
        if denom == 0.0 {
            return f64::NEG_INFINITY;
        }
        for (j, keep) in set.iter().enumerate() {
            if !keep {
                full[j] = 0.0;
            }
        }
        basis.norm_of(&full) / denom
    };

    let run = |r: usize| -> (f64, Vec<f64>, Vec<bool>) {
        let mut rng = probe_rng(opts.seed, r as u64);
        let mut a: Vec<f64> = (0..n).map(|_| coefficient(&mut rng)).collect();
        let mut set = vec![false; n];
        match kind {
            GaugeKind::L => {
                for s in set.iter_mut() {
                    *s = rng.gen_bool(0.5);
                }
            }
            GaugeKind::K => {
                let size = rng.gen_range(1..=m);
                for _ in 0..size {
                    set[rng.gen_range(0..n)] = true;
                }
            }
        }
        if !set.iter().any(|b| *b) {
            set[0] = true;
        }
        let mut cur = objective(&a, &set);
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
        let mut step = scale;
        for _ in 0..opts.sweeps {
            let mut improved = false;
            for j in 0..n {
                let old = a[j];
                for cand in [old + step, old - step, -old, 0.0] {
                    a[j] = cand;
                    let v = objective(&a, &set);
                    if v > cur * (1.0 + 1e-15) {
                        cur = v;
                        improved = true;
                        break;
                    }
                    a[j] = old;
                }
            }
            if let (Some(inv), true) = (&inverse, coordinates_closed) {
                for c in 0..n {
                    for dir in [step, -step] {
                        let trial: Vec<f64> = (0..n).map(|j| a[j] + dir * inv[(j, c)]).collect();
                        let v = objective(&trial, &set);
                        if v > cur * (1.0 + 1e-15) {
                            a = trial;
                            cur = v;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            for j in 0..n {
                set[j] = !set[j];
                if set.iter().any(|b| *b) && admissible(&set) {
                    let v = objective(&a, &set);
                    if v > cur * (1.0 + 1e-15) {
                        cur = v;
                        improved = true;
                        continue;
                    }
                }
                set[j] = !set[j];
            }
            if !improved {
                step /= 2.0;
                if step < scale * 1e-12 {
                    break;
                }
            }
        }
        (cur, a, set)
    };

    let best = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let (v, a, set) = run(r);
            (v, r, a, set)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, Vec::new(), Vec::new()),
            |x, y| {
                if x.0.is_nan() || y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }
            },
        );
    let mut coeffs = best.2;
    coeffs.resize(d, 0.0);
    let set: Vec<usize> = best
        .3
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(j, _)| j + 1)
        .collect();
    let witness = Witness { coeffs, set };
    GaugeEntry {
        m,
        kind,
        value: witness.ratio(basis),
        method: Method::ProbeLowerBound,
        witness,
    }
}

/// Iterates over the nonempty subsets of `0..d` of size at most `m`, keeping
/// the running sum `sum_{j in A} x_j` up to date; calls `visit(mask, z)`.
fn for_each_subset_sum(basis: &FiniteBasis, m: usize, mut visit: impl FnMut(u64, &[f64])) {
    let d = basis.dim();
    let mut z = vec![0.0; d];
    let mut mask = 0u64;
    for g in 1u64..(1u64 << d) {
        let bit = g.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
        basis.axpy(bit, sign, &mut z);
        if (mask.count_ones() as usize) <= m {
            visit(mask, &z);
        }
    }
}

fn spreading_unit(basis: &FiniteBasis) -> bool {
    basis.is_unit_vector_basis() && basis.ambient().is_spreading_invariant()
}

fn indicator_norm(basis: &FiniteBasis, mask: u64) -> f64 {
    let coeffs: Vec<f64> = (0..basis.dim())
        .map(|j| if mask >> j & 1 == 1 { 1.0 } else { 0.0 })
        .collect();
    basis.norm_of(&coeffs)
}

/// `phi_m = sup_{|A| <= m} ||sum_{j in A} x_j||`.
///
/// Unit vector bases of spreading-invariant norms use `A = [1, m]`. Other
/// bases enumerate all `A` up to dimension [`SUBSET_ENUMERATION_MAX_DIM`];
/// beyond that the value is a lower bound from a seeded swap search.
pub fn fundamental_fn(basis: &FiniteBasis, m: usize) -> Result<f64> {
    let d = basis.dim();
    if m > d {
        return Err(Error::IndexOutOfRange(format!(
            "m = {m} exceeds dimension {d}"
        )));
    }
    if m == 0 {
        return Ok(0.0);
    }
    if spreading_unit(basis) {
        return basis.ambient().eval(&crate::seq::FinSeq::constant(m, 1.0));
    }
    if d <= SUBSET_ENUMERATION_MAX_DIM {
        let mut best = (f64::NEG_INFINITY, 0u64);
        for_each_subset_sum(basis, m, |mask, z| {
            let v = basis.norm_dense(z);
            if v > best.0 {
                best = (v, mask);
            }
        });
        return Ok(indicator_norm(basis, best.1));
    }
    Ok(swap_search(basis, m, true))
}

/// Seeded swap search over sets of size `m` for the largest (or smallest)
/// indicator norm.
fn swap_search(basis: &FiniteBasis, m: usize, maximize: bool) -> f64 {
    let d = basis.dim();
    let sign = if maximize { 1.0 } else { -1.0 };
    let best = (0..16usize)
        .into_par_iter()
        .map(|r| {
            let mut rng = probe_rng(crate::embedding::DEFAULT_SEED, 1000 + r as u64);
            let mut idx: Vec<usize> = (0..d).collect();
            for i in 0..m {
                let j = rng.gen_range(i..d);
                idx.swap(i, j);
            }
            let mask_of = |idx: &[usize]| idx[..m].iter().fold(0u64, |acc, &j| acc | 1 << j);
            let mut cur = sign * indicator_norm(basis, mask_of(&idx));
            for _ in 0..50 {
                let mut improved = false;
                for i in 0..m {
                    for o in m..d {
                        idx.swap(i, o);
                        let v = sign * indicator_norm(basis, mask_of(&idx));
                        if v > cur {
                            cur = v;
                            improved = true;
                        } else {
                            idx.swap(i, o);
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            cur
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    sign * best
}

/// `sup_{|A| = m} ||sum_A x_j|| / inf_{|B| = m} ||sum_B x_j||` with plus signs.
pub fn democracy_ratio(basis: &FiniteBasis, m: usize) -> Result<f64> {
    let d = basis.dim();
    if m == 0 || m > d {
        return Err(Error::IndexOutOfRange(format!("m = {m} outside 1..={d}")));
    }
    if spreading_unit(basis) {
        return Ok(1.0);
    }
    if d > SUBSET_ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge(format!(
            "democracy ratio enumerates subsets only up to dimension {SUBSET_ENUMERATION_MAX_DIM}"
        )));
    }
    let mut hi = (f64::NEG_INFINITY, 0u64);
    let mut lo = (f64::INFINITY, 0u64);
    for_each_subset_sum(basis, m, |mask, z| {
        if mask.count_ones() as usize == m {
            let v = basis.norm_dense(z);
            if v > hi.0 {
                hi = (v, mask);
            }
            if v < lo.0 {
                lo = (v, mask);
            }
        }
    });
    Ok(indicator_norm(basis, hi.1) / indicator_norm(basis, lo.1))
}

/// Signed variant: `sup ||sum_A eps_j x_j|| / inf ||sum_B eps_j x_j||` over
/// `|A| = |B| = m` and all signs.
pub fn democracy_ratio_signed(basis: &FiniteBasis, m: usize) -> Result<f64> {
    let d = basis.dim();
    if m == 0 || m > d {
        return Err(Error::IndexOutOfRange(format!("m = {m} outside 1..={d}")));
    }
    if spreading_unit(basis) {
        return Ok(1.0);
    }
    if m > SIGNED_DEMOCRACY_MAX_M || d > SUBSET_ENUMERATION_MAX_DIM {
        return Err(Error::TooLarge(format!(
            "signed democracy needs m <= {SIGNED_DEMOCRACY_MAX_M} and dimension <= {SUBSET_ENUMERATION_MAX_DIM}"
        )));
    }
    let sets: Vec<u64> = (0u64..(1u64 << d))
        .filter(|s| s.count_ones() as usize == m)
        .collect();
    let (hi, lo) = sets
        .par_iter()
        .map(|&mask| {
            let members: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for signs in 0u64..(1u64 << (m - 1)) {
                let mut coeffs = vec![0.0; d];
                for (r, &j) in members.iter().enumerate() {
                    let neg = r > 0 && signs >> (r - 1) & 1 == 1;
                    coeffs[j] = if neg { -1.0 } else { 1.0 };
                }
                let v = basis.norm_of(&coeffs);
                hi = hi.max(v);
                lo = lo.min(v);
            }
            (hi, lo)
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::INFINITY),
            |a, b| (a.0.max(b.0), a.1.min(b.1)),
        );
    Ok(hi / lo)
}

/// The `m` indices (1-based, increasing) of the largest `|a_j|`; ties go to
/// the smaller index.
pub fn greedy_set(coeffs: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&i, &j| coeffs[j].abs().total_cmp(&coeffs[i].abs()).then(i.cmp(&j)));
    let mut g: Vec<usize> = order.into_iter().take(m).map(|j| j + 1).collect();
    g.sort_unstable();
    g
}

/// `|a_n| >= |a_j|` for every `n` in `G` and `j` outside.
pub fn is_greedy_set(coeffs: &[f64], set: &[usize]) -> bool {
    let inside = |j: usize| set.contains(&j);
    let min_in = set
        .iter()
        .map(|&j| coeffs[j - 1].abs())
        .fold(f64::INFINITY, f64::min);
    let max_out = (1..=coeffs.len())
        .filter(|&j| !inside(j))
        .map(|j| coeffs[j - 1].abs())
        .fold(0.0, f64::max);
    set.is_empty() || min_in >= max_out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostGreedyWitness {
    pub coeffs: Vec<f64>,
    pub m: usize,
    pub greedy: Vec<usize>,
    /// The best competing set of the same size.
    pub best_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostGreedyEstimate {
    pub estimate: f64,
    pub samples: usize,
    pub exhaustive_sets: bool,
    pub witness: Option<AlmostGreedyWitness>,
}

/// Largest sampled `||f - S_G f|| / min_{|A| = |G|} ||f - S_A f||` over
/// random `f` and `m`, with `G` the greedy set.
pub fn almost_greedy_ratio(basis: &FiniteBasis, samples: usize, seed: u64) -> AlmostGreedyEstimate {
    let d = basis.dim();
    let exhaustive = d <= ALMOST_GREEDY_EXHAUSTIVE_MAX_DIM;
    if d < 2 {
        return AlmostGreedyEstimate {
            estimate: 1.0,
            samples,
            exhaustive_sets: exhaustive,
            witness: None,
        };
    }
    let residual = |coeffs: &[f64], mask: u64| -> f64 {
        let rest: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| if mask >> j & 1 == 1 { 0.0 } else { *a })
            .collect();
        basis.norm_of(&rest)
    };
    let to_mask = |set: &[usize]| set.iter().fold(0u64, |acc, &j| acc | 1 << (j - 1));
    let best = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = probe_rng(seed, 5000 + s as u64);
            let coeffs: Vec<f64> = (0..d).map(|_| coefficient(&mut rng)).collect();
            let m = rng.gen_range(1..d);
            let greedy = greedy_set(&coeffs, m);
            let num = residual(&coeffs, to_mask(&greedy));
            let candidates: Vec<u64> = if exhaustive {
                (0u64..(1u64 << d))
                    .filter(|c| c.count_ones() as usize == m)
                    .collect()
            } else {
                (0..512)
                    .map(|_| {
                        let mut idx: Vec<usize> = (0..d).collect();
                        for i in 0..m {
                            let j = rng.gen_range(i..d);
                            idx.swap(i, j);
                        }
                        idx[..m].iter().fold(0u64, |acc, &j| acc | 1 << j)
                    })
                    .chain(std::iter::once(to_mask(&greedy)))
                    .collect()
            };
            let mut den = (f64::INFINITY, 0u64);
            for c in candidates {
                let v = residual(&coeffs, c);
                if v < den.0 {
                    den = (v, c);
                }
            }
            if den.0 < DENOMINATOR_FLOOR {
                return (f64::NEG_INFINITY, s, None);
            }
            let w = AlmostGreedyWitness {
                coeffs,
                m,
                greedy,
                best_set: mask_to_set(den.1),
            };
            (num / den.0, s, Some(w))
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, None),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    AlmostGreedyEstimate {
        estimate: best.0,
        samples,
        exhaustive_sets: exhaustive,
        witness: best.2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogConditionalityRow {
    pub m: usize,
    pub gauge: f64,
    /// Undefined at `m = 1`.
    pub gauge_over_log: Option<f64>,
    pub gauge_over_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogConditionalityTable {
    pub rows: Vec<LogConditionalityRow>,
    /// `gauge / log m` over the upper half of the range stays within
    /// `1 + trend_epsilon` of its maximum over the lower half.
    pub log_bounded: bool,
    /// `gauge / m >= linear_floor` over the whole range.
    pub linear_regime: bool,
    pub linear_floor: f64,
    pub trend_epsilon: f64,
}

/// Tabulates `(m, gauge, gauge / log m, gauge / m)` and flags the two growth
/// regimes on the computed range.
pub fn log_conditionality_check(
    values: &[(usize, f64)],
    linear_floor: f64,
    trend_epsilon: f64,
) -> LogConditionalityTable {
    let rows: Vec<LogConditionalityRow> = values
        .iter()
        .map(|&(m, gauge)| LogConditionalityRow {
            m,
            gauge,
            gauge_over_log: (m >= 2).then(|| gauge / (m as f64).ln()),
            gauge_over_m: gauge / m as f64,
        })
        .collect();
    let logs: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|r| r.gauge_over_log.map(|v| (r.m, v)))
        .collect();
    let log_bounded = match (logs.first(), logs.last()) {
        (Some(&(lo, _)), Some(&(hi, _))) if hi > lo => {
            let mid = (lo + hi) / 2;
            let lower = logs
                .iter()
                .filter(|r| r.0 <= mid)
                .map(|r| r.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let upper = logs
                .iter()
                .filter(|r| r.0 > mid)
                .map(|r| r.1)
                .fold(f64::NEG_INFINITY, f64::max);
            upper <= lower * (1.0 + trend_epsilon)
        }
        _ => true,
    };
    let linear_regime = rows.iter().all(|r| r.gauge_over_m >= linear_floor);
    LogConditionalityTable {
        rows,
        log_bounded,
        linear_regime,
        linear_floor,
        trend_epsilon,
    }
}
