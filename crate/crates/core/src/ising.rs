//! Shannon-Renyi entropy (n = 2) of the transverse-field Ising chain ground
//! state.
//!
//! The chain maps to free fermions in the antiperiodic (NS) sector with
//! momenta `q_m = 2 pi (m - 1/2) / L`. The correlation symbol is
//! `sigma_q = (h - e^{iq}) / |h - e^{iq}|`, the pairing matrix has symbol
//! `F_q = (1 + sigma_q) / (1 - sigma_q)`, and
//!
//!   `R2 = -2 ln det[(I - G)/2] - ln M^(2)(F)`.
//!
//! Exact enumeration handles small L; the mean-field machinery (direct and
//! dual) extends to hundreds of sites; kink-corrected emptiness formation
//! probabilities cover the paramagnetic side.

use crate::logsigned::LogSigned;
use crate::matrix::{circulant_dense, CirculantSymbol, K0, SquareMatrix};
use crate::meanfield::{
    antisym_delta4, antisym_delta4_thermo, default_init_grid, mf_multistart, stability_ratio,
    MFParams, MFState, MFTarget, STABILITY_THRESHOLD,
};
use crate::par;
use crate::quad;
use crate::sppm::sppm_exact;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// How an `IsingPoint` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    Exact,
    Mf,
    DualMf { u: f64 },
    Efp,
    Kink2,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsingPoint {
    pub l: usize,
    pub h: f64,
    pub r2: f64,
    pub method: Method,
    pub deltas: Option<MFState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub alpha2: f64,
    pub beta2: f64,
    pub residual: f64,
    pub alpha2_std_err: f64,
    pub l_range: Vec<usize>,
}

/// NS momenta `q_m = 2 pi (m - 1/2) / L`.
pub fn ns_momenta(l: usize) -> Vec<f64> {
    (1..=l).map(|m| 2.0 * PI * (m as f64 - 0.5) / l as f64).collect()
}

fn sigma_q(h: f64, q: f64) -> Complex64 {
    let f = Complex64::new(h - q.cos(), -q.sin());
    f / f.norm()
}

/// `G` symbol over the NS momenta.
pub fn ising_g_symbol(l: usize, h: f64) -> Result<CirculantSymbol> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Input(format!("L = {l} must be even and positive")));
    }
    let values = ns_momenta(l).iter().map(|&q| sigma_q(h, q)).collect();
    Ok(CirculantSymbol {
        size: l,
        k0: K0::Half,
        values,
    })
}

/// `F` symbol `F_q = (1 + sigma_q) / (1 - sigma_q)`; purely imaginary.
pub fn ising_f_symbol(l: usize, h: f64) -> Result<CirculantSymbol> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Input(format!("L = {l} must be even and positive")));
    }
    let mut values = Vec::with_capacity(l);
    for q in ns_momenta(l) {
        let s = sigma_q(h, q);
        let denom = Complex64::new(1.0, 0.0) - s;
        if denom.norm() < 1e-13 {
            return Err(Error::Numeric(format!(
                "1 - sigma_q vanishes at q = {q}; F is singular there"
            )));
        }
        values.push((Complex64::new(1.0, 0.0) + s) / denom);
    }
    Ok(CirculantSymbol {
        size: l,
        k0: K0::Half,
        values,
    })
}

/// Strip the O(1e-15) imaginary residue left by the symbol reconstruction.
fn realify(m: SquareMatrix, what: &str) -> Result<SquareMatrix> {
    if !m.is_real(1e-9) {
        return Err(Error::Numeric(format!("{what} reconstruction came out complex")));
    }
    SquareMatrix::from_real(
        m.dim(),
        &m.entries().iter().map(|z| z.re).collect::<Vec<_>>(),
    )
}

/// Dense real `G` (a skew-circulant; e.g. a pure shift at h = 0).
pub fn ising_g(l: usize, h: f64) -> Result<SquareMatrix> {
    realify(circulant_dense(&ising_g_symbol(l, h)?), "G")
}

/// Dense real antisymmetric `F`, antisymmetrized exactly.
pub fn ising_f(l: usize, h: f64) -> Result<SquareMatrix> {
    let m = realify(circulant_dense(&ising_f_symbol(l, h)?), "F")?;
    if m.max_asymmetry() > 1e-9 {
        return Err(Error::Numeric("F reconstruction lost antisymmetry".into()));
    }
    let mut exact = SquareMatrix::zeros(m.dim());
    for i in 0..m.dim() {
        for j in (i + 1)..m.dim() {
            let v = 0.5 * (m.get(i, j) - m.get(j, i));
            exact.set(i, j, v);
            exact.set(j, i, -v);
        }
    }
    Ok(exact)
}

/// `ln det[(I - G)/2]` from the symbol; real and negative.
fn log_det_half_i_minus_g(l: usize, h: f64) -> Result<f64> {
    let mut acc = LogSigned::ONE;
    for q in ns_momenta(l) {
        let v = (Complex64::new(1.0, 0.0) - sigma_q(h, q)) / 2.0;
        acc = acc.mul(&LogSigned::from_complex(v));
    }
    if acc.phase.abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "det[(I-G)/2] came out non-real (phase {})",
            acc.phase
        )));
    }
    Ok(acc.log_mag)
}

/// `ln det[(I + G)/2]`, the log emptiness formation probability.
fn log_det_half_i_plus_g(l: usize, h: f64) -> Result<f64> {
    let mut acc = LogSigned::ONE;
    for q in ns_momenta(l) {
        let v = (Complex64::new(1.0, 0.0) + sigma_q(h, q)) / 2.0;
        acc = acc.mul(&LogSigned::from_complex(v));
    }
    if acc.phase.abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "det[(I+G)/2] came out non-real (phase {})",
            acc.phase
        )));
    }
    Ok(acc.log_mag)
}

/// `|F_q|^2` over the NS momenta; `x(q) = |F_q|^2 + Delta4` for the
/// antisymmetric mean field.
fn f_abs2(l: usize, h: f64) -> Result<Vec<f64>> {
    Ok(ising_f_symbol(l, h)?
        .values
        .iter()
        .map(|v| v.norm_sqr())
        .collect())
}

/// `|F_q|^2` as a function of momentum in the thermodynamic limit.
pub fn f_abs2_thermo(h: f64, q: f64) -> f64 {
    let s2 = (q / 2.0).sin().powi(2);
    let d = (h - 1.0) + 2.0 * s2;
    let eps = ((1.0 - h) * (1.0 - h) + 4.0 * h * s2).sqrt();
    // (eps + d)/(eps - d), each side kept cancellation-free
    if d >= 0.0 {
        (eps + d) * (eps + d) / q.sin().powi(2)
    } else {
        q.sin().powi(2) / ((eps - d) * (eps - d))
    }
}

// ---------------------------------------------------------------------------
// exact and mean-field entropies

/// Exact `R2` by enumeration of all `2^L` configurations (L <= 24).
pub fn renyi2_exact(l: usize, h: f64) -> Result<IsingPoint> {
    let f = ising_f(l, h)?;
    let log_m2 = sppm_exact(&f, 2)?.value;
    let r2 = -2.0 * log_det_half_i_minus_g(l, h)? - log_m2.log_mag;
    Ok(IsingPoint {
        l,
        h,
        r2,
        method: Method::Exact,
        deltas: None,
    })
}

/// Total formation probability `sum_C P(C)`; equals 1.
pub fn probability_normalization(l: usize, h: f64) -> Result<f64> {
    let f = ising_f(l, h)?;
    Ok(crate::sppm::formation_probabilities(&f)?
        .iter()
        .map(|(_, p)| p)
        .sum())
}

/// Direct mean field on the antisymmetric `F`: `Delta2 = 0` and everything
/// depends on `Delta4` alone, so the self-consistency collapses to a scalar
/// root-find. Returns the trivial solution above `h*`.
pub fn renyi2_mf(l: usize, h: f64) -> Result<IsingPoint> {
    let abs2 = f_abs2(l, h)?;
    let delta4 = antisym_delta4(&abs2);
    let mut log_m = 0.0;
    for &a2 in &abs2 {
        log_m += (a2 + delta4).ln();
    }
    log_m -= l as f64 * delta4;
    let r2 = -2.0 * log_det_half_i_minus_g(l, h)? - log_m;
    Ok(IsingPoint {
        l,
        h,
        r2,
        method: Method::Mf,
        deltas: Some(MFState::new(delta4.sqrt(), 0.0, 0.0)),
    })
}

/// Finite-size transition field: largest `h` with `Delta4 > 1e-8`, located
/// by bisection to 1e-6.
pub const DELTA4_THRESHOLD: f64 = 1e-8;

pub fn hstar(l: usize) -> Result<f64> {
    let broken = |h: f64| -> Result<bool> {
        Ok(antisym_delta4(&f_abs2(l, h)?) > DELTA4_THRESHOLD)
    };
    let mut lo = 0.2f64;
    let mut hi = 1.0f64;
    if !broken(lo)? {
        return Err(Error::Scan(format!(
            "Delta4 predicate never fires at L = {l} down to h = {lo}"
        )));
    }
    if broken(hi)? {
        return Err(Error::Scan(format!(
            "Delta4 predicate still fires at h = 1 for L = {l}"
        )));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if broken(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Dual-space mean field at coupling `u` (negative branch), via multistart
/// on the primed variables. The returned deltas are primed.
pub fn renyi2_dual_mf(l: usize, h: f64, u: f64) -> Result<IsingPoint> {
    let sym = ising_f_symbol(l, h)?;
    let m = -(u.sqrt() - u).sqrt();
    let target = MFTarget::DualCirculant { sym: &sym, u, m };
    let out = mf_multistart(&target, &default_init_grid(), &MFParams::default())?;
    let best = &out.solutions[out.best];
    let r2 = -2.0 * log_det_half_i_minus_g(l, h)? - best.log_sppm_mf.log_mag;
    Ok(IsingPoint {
        l,
        h,
        r2,
        method: Method::DualMf { u },
        deltas: Some(best.state),
    })
}

/// One row of a dual u-scan.
#[derive(Debug, Clone, Serialize)]
pub struct DualScanPoint {
    pub u: f64,
    pub r2: f64,
    pub stability: f64,
    pub stable: bool,
    pub deltas: MFState,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualScan {
    pub points: Vec<DualScanPoint>,
    /// Index of the best point: stable (ratio > 0.99) with maximal
    /// `log M`, i.e. minimal `R2` — the variational pick inside the
    /// stable window. Falls back to the global `R2` minimizer when no
    /// point is stable.
    pub best: Option<usize>,
}

/// Scan the dual mean field over a grid of `u` at fixed `(L, h)`.
pub fn dual_u_scan(l: usize, h: f64, us: &[f64]) -> Result<DualScan> {
    let runs = par::map_slice(us, |&u| renyi2_dual_mf(l, h, u));
    let mut points = Vec::new();
    for (&u, run) in us.iter().zip(runs) {
        let Ok(pt) = run else { continue };
        let deltas = pt.deltas.unwrap();
        let ratio = stability_ratio(&deltas, pt.r2 / l as f64, Some(u))?;
        points.push(DualScanPoint {
            u,
            r2: pt.r2,
            stability: ratio,
            stable: ratio > STABILITY_THRESHOLD,
            deltas,
        });
    }
    if points.is_empty() {
        return Err(Error::Solver("no u in the grid converged".into()));
    }
    let stable_best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.stable)
        .min_by(|a, b| a.1.r2.total_cmp(&b.1.r2))
        .map(|(i, _)| i);
    let best = stable_best.or_else(|| {
        points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.r2.total_cmp(&b.1.r2))
            .map(|(i, _)| i)
    });
    Ok(DualScan { points, best })
}

// ---------------------------------------------------------------------------
// emptiness formation probability and kinks

/// `zeta(h) = (1/2pi) int_0^pi ln(1/2 + (h - cos q)/(2 eps_q)) dq` with
/// `eps_q = sqrt(1 + h^2 - 2 h cos q)`; the EFP decay rate.
pub fn efp_zeta(h: f64) -> Result<f64> {
    if h < 0.0 {
        return Err(Error::Input("zeta(h) is defined for h >= 0".into()));
    }
    Ok(quad::integrate_de(
        |q| {
            // arg = (eps + h - cos q) / (2 eps), with every piece written
            // free of cancellation: eps^2 = (1-h)^2 + 4 h sin^2(q/2),
            // h - cos q = (h - 1) + 2 sin^2(q/2), and the d < 0 branch
            // recast through eps^2 - d^2 = sin^2 q
            let s2 = (q / 2.0).sin().powi(2);
            let d = (h - 1.0) + 2.0 * s2;
            let eps = ((1.0 - h) * (1.0 - h) + 4.0 * h * s2).sqrt();
            let arg = if d >= 0.0 {
                (eps + d) / (2.0 * eps)
            } else {
                q.sin().powi(2) / (2.0 * eps * (eps - d))
            };
            arg.ln()
        },
        0.0,
        PI,
        1e-12,
    ) / (2.0 * PI))
}

/// `zeta'(h)` by quadrature of the h-derivative of the integrand:
/// `(1/2pi) int_0^pi (eps - h + cos q) / eps^2 dq`.
pub fn efp_zeta_prime(h: f64) -> Result<f64> {
    if h < 0.0 {
        return Err(Error::Input("zeta(h) is defined for h >= 0".into()));
    }
    Ok(quad::integrate_de(
        |q| {
            // (eps - (h - cos q)) / eps^2, recast through sin^2 q when the
            // subtraction would cancel
            let s2 = (q / 2.0).sin().powi(2);
            let d = (h - 1.0) + 2.0 * s2;
            let eps2 = (1.0 - h) * (1.0 - h) + 4.0 * h * s2;
            let eps = eps2.sqrt();
            if d > 0.0 {
                q.sin().powi(2) / ((eps + d) * eps2)
            } else {
                (eps - d) / eps2
            }
        },
        0.0,
        PI,
        1e-12,
    ) / (2.0 * PI))
}

/// Closed form of `zeta'` through the complete elliptic integral:
/// `-Theta(h-1)/(2h) + K(4h/(1+h)^2) / (pi (1+h))`.
pub fn efp_zeta_prime_elliptic(h: f64) -> Result<f64> {
    if h < 0.0 {
        return Err(Error::Input("zeta(h) is defined for h >= 0".into()));
    }
    if (h - 1.0).abs() < 1e-12 {
        return Err(Error::Numeric("zeta' diverges logarithmically at h = 1".into()));
    }
    let step = if h > 1.0 { -1.0 / (2.0 * h) } else { 0.0 };
    let k = quad::elliptic_k(4.0 * h / (1.0 + h).powi(2));
    Ok(step + k / (PI * (1.0 + h)))
}

/// Kink-corrected entropy in the EFP-dominated regime: the most probable
/// configuration plus all two-spin-flip excitations,
/// `R2 = -2 ln P(C0) - ln(1 + sum_{i<j} x_ij^2)` with
/// `x_ij = det(F with rows/cols i,j dropped) / det F = ((F^-1)_ij)^2`.
pub fn kink_correction(l: usize, h: f64, flips: u32) -> Result<IsingPoint> {
    if l > 80 {
        return Err(Error::Capacity(format!("kink correction capped at L = 80, got {l}")));
    }
    if h < 1.0 {
        return Err(Error::Input(
            "kink correction applies in the EFP-dominated regime h >= 1".into(),
        ));
    }
    let log_p0 = log_det_half_i_plus_g(l, h)?;
    let r2 = match flips {
        0 => -2.0 * log_p0,
        2 => {
            let f = ising_f(l, h)?;
            let f_inv = crate::matrix::inverse(&f)?;
            let mut s = 0.0f64;
            for i in 0..l {
                for j in (i + 1)..l {
                    let x = f_inv.get(i, j).re.powi(2);
                    s += x * x;
                }
            }
            -2.0 * log_p0 - (1.0 + s).ln()
        }
        _ => {
            return Err(Error::Input(
                "only flips = 0 (pure EFP) and flips = 2 are implemented".into(),
            ))
        }
    };
    Ok(IsingPoint {
        l,
        h,
        r2,
        method: if flips == 0 { Method::Efp } else { Method::Kink2 },
        deltas: None,
    })
}

// ---------------------------------------------------------------------------
// fits and scans

/// Ordinary least squares of `R2` against `L`.
pub fn fit_alpha_beta(points: &[IsingPoint]) -> Result<FitResult> {
    let mut ls: Vec<usize> = points.iter().map(|p| p.l).collect();
    ls.sort_unstable();
    ls.dedup();
    if ls.len() < 3 {
        return Err(Error::Input(format!(
            "need at least 3 distinct sizes, got {}",
            ls.len()
        )));
    }
    if ls.iter().any(|l| l % 2 == 1) {
        return Err(Error::Input("fit sizes must be even".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.l as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.r2).collect();
    let (alpha2, beta2, residual, alpha2_std_err) = quad::linear_fit(&xs, &ys);
    Ok(FitResult {
        alpha2,
        beta2,
        residual,
        alpha2_std_err,
        l_range: ls,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HstarScan {
    pub per_l: Vec<(usize, f64)>,
    /// `1 - h* = zeta1 L^-zeta2`
    pub zeta1: f64,
    pub zeta2: f64,
    pub zeta2_std_err: f64,
}

/// Locate `h*(L)` for each size and fit the power law `1 - h* = z1 L^-z2`.
pub fn hstar_scan(l_list: &[usize]) -> Result<HstarScan> {
    let runs = par::map_slice(l_list, |&l| hstar(l));
    let mut per_l = Vec::new();
    for (&l, run) in l_list.iter().zip(runs) {
        per_l.push((l, run?));
    }
    let xs: Vec<f64> = per_l.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let ys: Vec<f64> = per_l.iter().map(|&(_, h)| (1.0 - h).ln()).collect();
    let (slope, intercept, _res, slope_se) = quad::linear_fit(&xs, &ys);
    Ok(HstarScan {
        per_l,
        zeta1: intercept.exp(),
        zeta2: -slope,
        zeta2_std_err: slope_se,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Delta4Scaling {
    pub per_h: Vec<(f64, f64)>,
    /// `Delta4 ~ (1 - h)^exponent` near `h -> 1^-`
    pub exponent: f64,
    pub exponent_std_err: f64,
}

/// Thermodynamic-limit `Delta4(h)` on a grid approaching `h = 1^-`, with a
/// log-log fit of the scaling exponent.
pub fn delta4_scaling(h_grid: &[f64]) -> Result<Delta4Scaling> {
    if h_grid.iter().any(|&h| !(0.0..1.0).contains(&h)) {
        return Err(Error::Input("Delta4 scaling needs 0 <= h < 1".into()));
    }
    let runs = par::map_slice(h_grid, |&h| {
        antisym_delta4_thermo(|q: f64| f_abs2_thermo(h, q))
    });
    let mut per_h = Vec::new();
    for (&h, d4) in h_grid.iter().zip(runs) {
        if d4 <= 0.0 {
            return Err(Error::Scan(format!("Delta4 vanished at h = {h}")));
        }
        per_h.push((h, d4));
    }
    let xs: Vec<f64> = per_h.iter().map(|&(h, _)| (1.0 - h).ln()).collect();
    let ys: Vec<f64> = per_h.iter().map(|&(_, d)| d.ln()).collect();
    let (slope, _icept, _res, slope_se) = quad::linear_fit(&xs, &ys);
    Ok(Delta4Scaling {
        per_h,
        exponent: slope,
        exponent_std_err: slope_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{det_lu, inverse};
    use crate::sppm::minor_det;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn f_symbol_limits() {
        // h = 0: F_q = -i tan(q/2)
        let sym = ising_f_symbol(8, 0.0).unwrap();
        for (k, &q) in ns_momenta(8).iter().enumerate() {
            let expect = Complex64::new(0.0, -(q / 2.0).tan());
            assert!(
                (sym.values[k] - expect).norm() < 1e-12,
                "q = {q}: {} vs {expect}",
                sym.values[k]
            );
        }
        // h = 1: F_q = -i tan((q + pi)/4)
        let sym = ising_f_symbol(10, 1.0).unwrap();
        for (k, &q) in ns_momenta(10).iter().enumerate() {
            let expect = Complex64::new(0.0, -((q + PI) / 4.0).tan());
            assert!((sym.values[k] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn f_is_real_antisymmetric_and_matches_g() {
        let (l, h) = (12, 0.7);
        let f = ising_f(l, h).unwrap();
        assert!(f.is_real(1e-10));
        assert!(f.max_asymmetry() < 1e-10);
        // F = (I + G)(I - G)^-1; G is real but not symmetric (at h = 0 it
        // is a pure shift)
        let g = ising_g(l, h).unwrap();
        assert!(g.is_real(1e-10));
        let id = SquareMatrix::identity(l);
        let lhs = f;
        let rhs = id
            .add(&g)
            .matmul(&inverse(&id.add(&g.scaled(Complex64::new(-1.0, 0.0)))).unwrap());
        for i in 0..l {
            for j in 0..l {
                assert!(
                    (lhs.get(i, j) - rhs.get(i, j)).norm() < 1e-9,
                    "({i},{j}): {} vs {}",
                    lhs.get(i, j),
                    rhs.get(i, j)
                );
            }
        }
    }

    #[test]
    fn exact_h0_is_l_minus_1_ln2() {
        // the Z2-symmetric ground state gives sum_C P^2 = 2^-(L-1); note the
        // fitted beta2(0) is therefore -ln 2
        for l in [4usize, 8] {
            let pt = renyi2_exact(l, 0.0).unwrap();
            let expect = (l as f64 - 1.0) * LN2;
            assert!(
                (pt.r2 - expect).abs() < 1e-9,
                "L = {l}: {} vs {}",
                pt.r2,
                expect
            );
        }
    }

    #[test]
    fn probabilities_normalize() {
        for &(l, h) in &[(8usize, 0.5f64), (10, 2.0), (12, 1.0)] {
            let s = probability_normalization(l, h).unwrap();
            assert!((s - 1.0).abs() < 1e-9, "L={l} h={h}: {s}");
        }
    }

    #[test]
    fn h_to_minus_h_symmetry() {
        for &(l, h) in &[(8usize, 0.5f64), (10, 1.3)] {
            let a = renyi2_exact(l, h).unwrap().r2;
            let b = renyi2_exact(l, -h).unwrap().r2;
            assert!((a - b).abs() < 1e-9, "L={l} h={h}: {a} vs {b}");
        }
    }

    #[test]
    fn large_h_is_efp_dominated() {
        let (l, h) = (8usize, 4.0f64);
        let exact = renyi2_exact(l, h).unwrap().r2;
        let efp = -2.0 * log_det_half_i_plus_g(l, h).unwrap();
        assert!((exact - efp).abs() / exact < 0.05, "{exact} vs {efp}");
        // h -> infinity: product state, R2 -> 0
        let far = renyi2_exact(8, 60.0).unwrap().r2;
        assert!(far < 0.01, "R2 at h=60: {far}");
    }

    #[test]
    fn mf_trivial_above_hstar_and_broken_below() {
        // h = 2 > h*: the trivial solution, R2 = -2 ln det[(I+G)/2]
        let pt = renyi2_mf(40, 2.0).unwrap();
        assert_eq!(pt.deltas.unwrap().delta4(), 0.0);
        let efp = -2.0 * log_det_half_i_plus_g(40, 2.0).unwrap();
        assert!((pt.r2 - efp).abs() < 1e-9);
        // h = 0.5 < h*: broken solution with Delta4 > 0
        let pt = renyi2_mf(40, 0.5).unwrap();
        assert!(pt.deltas.unwrap().delta4() > 1e-4);
    }

    #[test]
    fn scalar_mf_agrees_with_vector_multistart() {
        let (l, h) = (20usize, 0.5f64);
        let scalar = renyi2_mf(l, h).unwrap();
        let sym = ising_f_symbol(l, h).unwrap();
        let out = mf_multistart(
            &MFTarget::Circulant(&sym),
            &default_init_grid(),
            &MFParams::default(),
        )
        .unwrap();
        let best = &out.solutions[out.best];
        let d4_scalar = scalar.deltas.unwrap().delta4();
        let d4_vector = best.state.delta4();
        assert!(
            (d4_scalar - d4_vector).abs() < 1e-8,
            "scalar {d4_scalar} vs vector {d4_vector}"
        );
        let r2_vector = -2.0 * log_det_half_i_minus_g(l, h).unwrap() - best.log_sppm_mf.log_mag;
        assert!((scalar.r2 - r2_vector).abs() < 1e-8);
    }

    #[test]
    fn mf_is_an_upper_bound_on_exact_r2() {
        for &h in &[0.0, 0.5, 1.0, 1.5] {
            let l = 12;
            let exact = renyi2_exact(l, h).unwrap().r2;
            let mf = renyi2_mf(l, h).unwrap().r2;
            assert!(
                mf >= exact - 1e-9,
                "h = {h}: MF {mf} below exact {exact}"
            );
        }
    }

    #[test]
    fn mf_monotone_decreasing_in_h() {
        let l = 40;
        let mut prev = f64::INFINITY;
        for k in 0..=12 {
            let h = 0.2 + 0.15 * k as f64;
            let r2 = renyi2_mf(l, h).unwrap().r2;
            assert!(r2 < prev, "R2({h}) = {r2} vs previous {prev}");
            prev = r2;
        }
    }

    #[test]
    fn zeta_reference_values() {
        // zeta(1) = (2 C - pi ln 2) / pi with C the Catalan constant
        const CATALAN: f64 = 0.915_965_594_177_219_0;
        let expect = (2.0 * CATALAN - PI * LN2) / PI;
        let z1 = efp_zeta(1.0).unwrap();
        assert!((z1 - expect).abs() < 1e-9, "{z1} vs {expect}");
        assert!((-2.0 * z1 - 0.22005).abs() < 1e-4);
        // zeta(0) = -ln 2 (all-up probability 2^-(L-1) at h = 0)
        let z0 = efp_zeta(0.0).unwrap();
        assert!((z0 + LN2).abs() < 1e-8, "{z0}");
    }

    #[test]
    fn zeta_prime_matches_elliptic_form() {
        for &h in &[0.3, 0.5, 1.5, 2.0, 3.0] {
            let quadrature = efp_zeta_prime(h).unwrap();
            let elliptic = efp_zeta_prime_elliptic(h).unwrap();
            assert!(
                (quadrature - elliptic).abs() < 1e-8,
                "h = {h}: {quadrature} vs {elliptic}"
            );
        }
    }

    #[test]
    fn zeta_prime_log_divergence_at_h1() {
        // zeta'(h) ~ -(1/2pi) ln(|h-1|/8) near h = 1: fit the log slope
        let ds: Vec<f64> = vec![1e-3, 1e-4, 1e-5];
        let vals: Vec<f64> = ds.iter().map(|&d| efp_zeta_prime(1.0 + d).unwrap()).collect();
        let xs: Vec<f64> = ds.iter().map(|&d| (d / 8.0f64).ln()).collect();
        let (slope, _b, _r, _se) = quad::linear_fit(&xs, &vals);
        let expect = -1.0 / (2.0 * PI);
        assert!(
            (slope - expect).abs() / expect.abs() < 0.05,
            "slope {slope} vs {expect}"
        );
    }

    #[test]
    fn kink_x_matches_determinant_ratio() {
        let (l, h) = (8usize, 1.5f64);
        let f = ising_f(l, h).unwrap();
        let f_inv = inverse(&f).unwrap();
        let det_f = det_lu(&f);
        let full = (1u64 << l) - 1;
        for i in 0..l {
            for j in (i + 1)..l {
                let x_inv = f_inv.get(i, j).re.powi(2);
                let mask = full & !(1 << i) & !(1 << j);
                let x_det = minor_det(&f, mask).div(&det_f).to_f64().unwrap();
                assert!(
                    (x_inv - x_det).abs() < 1e-9 * x_det.abs().max(1e-12),
                    "({i},{j}): {x_inv} vs {x_det}"
                );
            }
        }
    }

    #[test]
    fn kink_correction_against_exact() {
        // flips = 0 reduces to the pure EFP
        let efp = kink_correction(12, 3.0, 0).unwrap().r2;
        assert!((efp + 2.0 * log_det_half_i_plus_g(12, 3.0).unwrap()).abs() < 1e-12);
        // at h = 3 the two-flip correction shrinks R2 by < 1%, moving toward
        // the exact value
        let k2 = kink_correction(12, 3.0, 2).unwrap().r2;
        let exact = renyi2_exact(12, 3.0).unwrap().r2;
        assert!(k2 < efp);
        assert!((efp - k2) / efp < 0.01);
        assert!((k2 - exact).abs() < (efp - exact).abs());
    }

    #[test]
    fn fit_recovers_exact_line() {
        let pts: Vec<IsingPoint> = [8usize, 10, 12, 14]
            .iter()
            .map(|&l| IsingPoint {
                l,
                h: 0.0,
                r2: 2.5 * l as f64 - 0.75,
                method: Method::Exact,
                deltas: None,
            })
            .collect();
        let fit = fit_alpha_beta(&pts).unwrap();
        assert!((fit.alpha2 - 2.5).abs() < 1e-12);
        assert!((fit.beta2 + 0.75).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        // degenerate design
        let two: Vec<IsingPoint> = pts[..2].to_vec();
        assert!(fit_alpha_beta(&two).is_err());
    }

    #[test]
    fn exact_h0_fit_is_ln2_line() {
        let pts: Vec<IsingPoint> = [8usize, 10, 12]
            .iter()
            .map(|&l| renyi2_exact(l, 0.0).unwrap())
            .collect();
        let fit = fit_alpha_beta(&pts).unwrap();
        assert!((fit.alpha2 - LN2).abs() < 1e-9);
        assert!((fit.beta2 + LN2).abs() < 1e-9);
    }

    #[test]
    fn hstar_approaches_one() {
        let h40 = hstar(40).unwrap();
        let h100 = hstar(100).unwrap();
        let h200 = hstar(200).unwrap();
        assert!(h40 < h100 && h100 < h200 && h200 < 1.0);
        // rough magnitude from the paper's power law
        assert!((h40 - 0.877).abs() < 0.03, "h*(40) = {h40}");
    }

    #[test]
    fn delta4_exponent_is_two() {
        let grid: Vec<f64> = (1..=6).map(|k| 1.0 - 0.02 * k as f64).collect();
        let fit = delta4_scaling(&grid).unwrap();
        assert!(
            (fit.exponent - 2.0).abs() < 0.2,
            "exponent {}",
            fit.exponent
        );
    }
}
