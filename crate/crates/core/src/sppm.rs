//! Ground-truth SPPM by exhaustive enumeration, the Hubbard-Stratonovich
//! identities it satisfies, formation probabilities, and exact two-point
//! functions.

use crate::logsigned::LogSigned;
use crate::matrix::{det_lu_scratch, IndexSubset, SquareMatrix};
use crate::par;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hard ceiling for the exact enumerator: 2^24 subset determinants.
pub const EXACT_DIM_MAX: usize = 24;
/// Ceiling for the 2^l auxiliary-spin sums and subset listings.
pub const HS_DIM_MAX: usize = 20;

#[derive(Debug, Clone, Copy)]
pub struct SppmResult {
    pub value: LogSigned,
    pub n: u32,
    pub dim: usize,
    /// Number of subsets summed, always `2^dim`.
    pub terms: u64,
}

fn fill_submatrix(m: &SquareMatrix, mask: u64, idx: &mut Vec<usize>, buf: &mut Vec<Complex64>) {
    idx.clear();
    let mut bits = mask;
    while bits != 0 {
        idx.push(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
    let k = idx.len();
    buf.clear();
    buf.reserve(k * k);
    for &i in idx.iter() {
        for &j in idx.iter() {
            buf.push(m.get(i, j));
        }
    }
}

/// Log-domain determinant of the principal submatrix selected by `mask`.
pub fn minor_det(m: &SquareMatrix, mask: u64) -> LogSigned {
    let mut idx = Vec::new();
    let mut buf = Vec::new();
    fill_submatrix(m, mask, &mut idx, &mut buf);
    det_lu_scratch(&mut buf, idx.len())
}

/// `M^(n)(A) = sum_I det(A_I)^n` over all `2^l` subsets, the empty minor
/// counting 1. Subsets are visited in ascending subset-integer order with a
/// fixed pairwise reduction, so results do not depend on the worker count.
pub fn sppm_exact(m: &SquareMatrix, n: u32) -> Result<SppmResult> {
    if n < 1 {
        return Err(Error::Input("power n must be >= 1".into()));
    }
    let l = m.dim();
    if l > EXACT_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the exact-enumeration ceiling {EXACT_DIM_MAX}"
        )));
    }
    let terms = 1u64 << l;
    let value = par::sum_terms(terms, |mask| minor_det(m, mask).powi(n as i32));
    Ok(SppmResult {
        value,
        n,
        dim: l,
        terms,
    })
}

/// Weighted variant `sum_I w^(l - |I|) det(A_I)^2`; this is the expansion
/// of a quartic coupling `w` over insertion sites, used by the Hubbard
/// bridge as an independent route to the partition function.
pub fn sppm_weighted_complement(m: &SquareMatrix, w: Complex64) -> Result<LogSigned> {
    let l = m.dim();
    if l > HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the subset-sum ceiling {HS_DIM_MAX}"
        )));
    }
    let lw = LogSigned::from_complex(w);
    Ok(par::sum_terms(1u64 << l, |mask| {
        let removed = l as i32 - mask.count_ones() as i32;
        minor_det(m, mask).powi(2).mul(&lw.powi(removed))
    }))
}

/// Discrete Hubbard-Stratonovich identity:
/// `M^(2)(A) = 2^-l sum_S det(A + S)^2` over all diagonal sign matrices S.
pub fn sppm_hs_discrete(m: &SquareMatrix) -> Result<SppmResult> {
    let l = m.dim();
    if l > HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the HS-sum ceiling {HS_DIM_MAX}"
        )));
    }
    let value = par::sum_terms(1u64 << l, |mask| {
        let mut buf: Vec<Complex64> = m.entries().to_vec();
        for i in 0..l {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            buf[i * l + i] += Complex64::new(s, 0.0);
        }
        det_lu_scratch(&mut buf, l).powi(2)
    })
    .scale_exp(-(l as f64) * std::f64::consts::LN_2);
    Ok(SppmResult {
        value,
        n: 2,
        dim: l,
        terms: 1u64 << l,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SppmEstimate {
    pub mean: LogSigned,
    /// Standard error of the mean; zero collapses to the log-domain sentinel.
    pub std_err: LogSigned,
    pub samples: u64,
}

/// Randomized estimator `M^(2)(A) = E[det(A + S)^2]` with i.i.d. Rademacher
/// diagonal signs. Unbiased; the standard error shrinks like `1/sqrt(n)`.
pub fn sppm_hs_random(m: &SquareMatrix, samples: u64, seed: u64) -> Result<SppmEstimate> {
    if samples < 2 {
        return Err(Error::Input("need at least 2 samples".into()));
    }
    let l = m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = LogSigned::ZERO;
    let mut sum_sq = LogSigned::ZERO;
    let mut first: Option<LogSigned> = None;
    let mut all_equal = true;
    let mut buf: Vec<Complex64> = Vec::new();
    for _ in 0..samples {
        buf.clear();
        buf.extend_from_slice(m.entries());
        for i in 0..l {
            let s: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            buf[i * l + i] += Complex64::new(s, 0.0);
        }
        let d2 = det_lu_scratch(&mut buf, l).powi(2);
        match first {
            None => first = Some(d2),
            Some(f) => all_equal &= f == d2,
        }
        sum = sum.add(&d2);
        sum_sq = sum_sq.add(&d2.powi(2));
    }
    let n = samples as f64;
    let mean = sum.scale_exp(-n.ln());
    // var = (sum_sq - n * mean^2) / (n - 1), in the log domain; a run of
    // identical samples has exactly zero variance
    let var = if all_equal {
        LogSigned::ZERO
    } else {
        sum_sq
            .sub(&mean.powi(2).scale_exp(n.ln()))
            .scale_exp(-(n - 1.0).ln())
    };
    let std_err = if var.is_zero() || var.to_f64().map(|v| v <= 0.0).unwrap_or(false) {
        LogSigned::ZERO
    } else {
        LogSigned::new(0.5 * (var.log_mag - n.ln()), 0.0)
    };
    Ok(SppmEstimate {
        mean,
        std_err,
        samples,
    })
}

/// Formation probabilities of an L-ensemble: `P(I) = det(F_I) / det(I + F)`
/// for every subset, which sum to 1.
pub fn formation_probabilities(f: &SquareMatrix) -> Result<Vec<(IndexSubset, f64)>> {
    let l = f.dim();
    if l > HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the subset-listing ceiling {HS_DIM_MAX}"
        )));
    }
    let norm = crate::matrix::det_lu(&f.shift_diag(Complex64::new(1.0, 0.0)));
    if norm.is_zero() {
        return Err(Error::Numeric("I + F is singular".into()));
    }
    let mut out = Vec::with_capacity(1 << l);
    for mask in 0..(1u64 << l) {
        let p = minor_det(f, mask).div(&norm);
        let p = p.to_f64().unwrap_or_else(|| p.to_complex().re);
        out.push((IndexSubset::from_mask(mask), p));
    }
    Ok(out)
}

/// Exact 2d-point function of the replica representation:
/// `sum over kept subsets K containing j of det(M_{K minus j})^d det(M_K)^(n-d)`,
/// normalized by `M^(n)(M)`. Site `j` is 1-based.
///
/// For `n = d = 1` this reduces to `[(I + M)^-1]_{jj}` through the
/// directional-derivative identity of the determinant.
pub fn exact_two_point(m: &SquareMatrix, n: u32, d: u32, j: usize) -> Result<Complex64> {
    let l = m.dim();
    if l > HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the subset-sum ceiling {HS_DIM_MAX}"
        )));
    }
    if j < 1 || j > l {
        return Err(Error::Input(format!("site j = {j} outside 1..{l}")));
    }
    if d > n {
        return Err(Error::Input("need d <= n".into()));
    }
    let j0 = (j - 1) as u64;
    let total = sppm_exact(m, n)?.value;
    let numer = par::sum_terms(1u64 << l, |mask| {
        if mask >> j0 & 1 == 0 {
            return LogSigned::ZERO;
        }
        let without = mask & !(1 << j0);
        minor_det(m, without)
            .powi(d as i32)
            .mul(&minor_det(m, mask).powi((n - d) as i32))
    });
    Ok(numer.div(&total).to_complex())
}
