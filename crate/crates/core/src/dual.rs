//! Strong-weak duality for the n = 2 SPPM.
//!
//! The quartic coupling of strength 1 is traded for a coupling `u` in a
//! dual matrix `N`: with `m` solving `u / (u + m^2)^2 = 1` and
//! `N = m I - (A + m/(u + m^2) I)^-1`,
//!
//! `M^(2)(A) = c_l * sum_I u^(l - |I|) det(N_I)^2`,
//!
//! `c_l = (u + m^2)^-l det(A + m/(u + m^2) I)^2`. One factor of `u` rides
//! on every *dropped* index, i.e. the weight counts quartic insertions in
//! the dual system. The identity holds for every admissible `u`, which the
//! tests exercise as u-independence.

use crate::logsigned::LogSigned;
use crate::matrix::{det_lu, inverse, SquareMatrix};
use crate::par;
use crate::sppm::{minor_det, HS_DIM_MAX};
use crate::{Error, Result};
use num_complex::Complex64;

/// Sign branch of `m = -+ sqrt(sqrt(u) - u)`. The negative branch is the
/// default; dual mean field is most effective there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Negative,
    Positive,
}

#[derive(Debug, Clone)]
pub struct DualTransform {
    pub u: f64,
    pub m: f64,
    /// Dual matrix `N = m I - (A + (m / (u + m^2)) I)^-1`.
    pub n_matrix: SquareMatrix,
    /// Prefactor `c_l` in the log domain.
    pub log_c: LogSigned,
    pub source_dim: usize,
}

impl DualTransform {
    /// `u + m^2`, algebraically `sqrt(u)` on the SPPM branch.
    pub fn u_plus_m2(&self) -> f64 {
        self.u + self.m * self.m
    }

    /// Diagonal shift `m / (u + m^2)` applied to the source matrix.
    pub fn shift(&self) -> f64 {
        self.m / self.u_plus_m2()
    }
}

/// Build the dual transform of a real matrix at coupling `u` in (0, 1].
pub fn build_dual(a: &SquareMatrix, u: f64, branch: Branch) -> Result<DualTransform> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Input(format!("u = {u} outside (0, 1]")));
    }
    let m = match branch {
        Branch::Negative => -(u.sqrt() - u).sqrt(),
        Branch::Positive => (u.sqrt() - u).sqrt(),
    };
    let upm2 = u + m * m; // = sqrt(u) up to roundoff
    let shift = if upm2 == 0.0 { 0.0 } else { m / upm2 };
    let shifted = a.shift_diag(Complex64::new(shift, 0.0));
    let det_shifted = det_lu(&shifted);
    if det_shifted.is_zero() {
        return Err(Error::Numeric(format!(
            "A + {shift:.6} I is singular; pick a different u"
        )));
    }
    let inv = inverse(&shifted).map_err(|_| {
        Error::Numeric(format!("A + {shift:.6} I is singular; pick a different u"))
    })?;
    let n_matrix = inv
        .scaled(Complex64::new(-1.0, 0.0))
        .shift_diag(Complex64::new(m, 0.0));
    let l = a.dim();
    let log_c = det_shifted
        .powi(2)
        .scale_exp(-(l as f64) * upm2.ln());
    Ok(DualTransform {
        u,
        m,
        n_matrix,
        log_c,
        source_dim: l,
    })
}

/// Evaluate the dual sum exactly: `c_l sum_I u^(l - |I|) det(N_I)^2`.
/// Equals `sppm_exact(A, 2)` for every admissible `u`.
pub fn sppm_dual_exact(t: &DualTransform) -> Result<crate::sppm::SppmResult> {
    let l = t.source_dim;
    if l > HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "dim {l} exceeds the dual-sum ceiling {HS_DIM_MAX}"
        )));
    }
    let ln_u = t.u.ln();
    let value = par::sum_terms(1u64 << l, |mask| {
        let dropped = l as f64 - mask.count_ones() as f64;
        minor_det(&t.n_matrix, mask)
            .powi(2)
            .scale_exp(dropped * ln_u)
    })
    .mul(&t.log_c);
    Ok(crate::sppm::SppmResult {
        value,
        n: 2,
        dim: l,
        terms: 1u64 << l,
    })
}

/// Squared s-point functions `G^(s)` of the weak-coupling expansion,
/// evaluated from the inverse-transpose of `N` (Wick blocks).
fn g1(n_inv_t: &SquareMatrix, k: usize) -> LogSigned {
    LogSigned::from_complex(n_inv_t.get(k, k)).powi(2)
}

fn g2(n_inv_t: &SquareMatrix, k1: usize, k2: usize) -> LogSigned {
    let d = n_inv_t.get(k1, k1) * n_inv_t.get(k2, k2) - n_inv_t.get(k1, k2) * n_inv_t.get(k2, k1);
    LogSigned::from_complex(d).powi(2)
}

/// Partial sums of the weak-coupling series
/// `c_l det(N)^2 (1 + u sum_k G1(k) + u^2 sum_{k1>k2} G2(k1,k2) + ...)`
/// up to the requested order (0, 1 or 2).
pub fn weak_coupling_expansion(t: &DualTransform, order: u32) -> Result<LogSigned> {
    if order > 2 {
        return Err(Error::Input("expansion implemented through order 2".into()));
    }
    let det_n = det_lu(&t.n_matrix);
    if det_n.is_zero() {
        return Err(Error::Numeric("N is singular".into()));
    }
    let l = t.source_dim;
    let n_inv_t = inverse(&t.n_matrix)?.transpose();
    let mut series = LogSigned::ONE;
    if order >= 1 {
        let mut s1 = LogSigned::ZERO;
        for k in 0..l {
            s1 = s1.add(&g1(&n_inv_t, k));
        }
        series = series.add(&s1.scale_exp(t.u.ln()));
    }
    if order >= 2 {
        let mut s2 = LogSigned::ZERO;
        for k1 in 0..l {
            for k2 in 0..k1 {
                s2 = s2.add(&g2(&n_inv_t, k1, k2));
            }
        }
        series = series.add(&s2.scale_exp(2.0 * t.u.ln()));
    }
    Ok(t.log_c.mul(&det_n.powi(2)).mul(&series))
}

/// Dual-sum values across a grid of `u`, in grid order.
pub fn scan_u(a: &SquareMatrix, us: &[f64], branch: Branch) -> Vec<(f64, Result<LogSigned>)> {
    let results = par::map_slice(us, |&u| {
        build_dual(a, u, branch).and_then(|t| sppm_dual_exact(&t).map(|r| r.value))
    });
    us.iter().copied().zip(results).collect()
}

/// Default scan grid: 0.02 to 0.98 in steps of 0.02.
pub fn default_u_grid() -> Vec<f64> {
    (1..=49).map(|k| k as f64 * 0.02).collect()
}
