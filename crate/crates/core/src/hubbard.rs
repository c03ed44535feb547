//! Desk-scale check that the Hubbard partition function is an SPPM problem.
//!
//! The Trotterized partition function on `L` sites and `N` imaginary-time
//! slices is a Grassmann integral over a block matrix `A_Hub` (bidiagonal
//! in time with a periodic corner) with an on-site quartic coupling
//! `-U eps`. Trading the quartic for an auxiliary coupling gives
//!
//! `Z_N = (1+m^2)^-l det(A_Hub + m/(m^2+1) I)^2
//!        M^(2)(m I - (A_Hub + m/(m^2+1) I)^-1)`,
//!
//! with `m^2 = -1 +- 1/sqrt(-U eps)` (complex for repulsive U) and
//! `l = N L`. Two independent routes cross-check it: the discrete
//! auxiliary-spin sum and the direct expansion of the quartic term.

use crate::logsigned::LogSigned;
use crate::matrix::{det_lu, det_lu_scratch, inverse, SquareMatrix};
use crate::par;
use crate::sppm::{sppm_exact, sppm_weighted_complement};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Enumeration ceiling: `2^(NL)` determinants of complex `NL x NL` matrices.
pub const HUBBARD_DIM_MAX: usize = 14;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HubbardSpec {
    /// lattice sites
    pub sites: usize,
    /// imaginary-time slices
    pub slices: usize,
    /// hopping
    pub t: f64,
    /// on-site coupling
    pub u: f64,
    /// chemical potential
    pub mu: f64,
    /// inverse temperature
    pub beta: f64,
}

impl HubbardSpec {
    pub fn eps(&self) -> f64 {
        self.beta / self.slices as f64
    }

    pub fn dim(&self) -> usize {
        self.sites * self.slices
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.slices < 2 {
            return Err(Error::Input(
                "need at least 1 site and 2 time slices".into(),
            ));
        }
        Ok(())
    }
}

/// Which root of `m^2 = -1 +- 1/sqrt(-U eps)` to use; both give equal `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MBranch {
    Plus,
    Minus,
}

fn m_parameter(spec: &HubbardSpec, branch: MBranch) -> Complex64 {
    // principal square roots throughout; -U eps < 0 for repulsive U
    let arg = Complex64::new(-spec.u * spec.eps(), 0.0);
    let inv_sqrt = 1.0 / arg.sqrt();
    let m2 = match branch {
        MBranch::Plus => Complex64::new(-1.0, 0.0) + inv_sqrt,
        MBranch::Minus => Complex64::new(-1.0, 0.0) - inv_sqrt,
    };
    m2.sqrt()
}

/// Single-slice hopping block `B = (1 + mu eps) I + t eps (ring hops)`.
fn hopping_block(spec: &HubbardSpec) -> SquareMatrix {
    let l = spec.sites;
    let eps = spec.eps();
    let mut b = SquareMatrix::zeros(l);
    for i in 0..l {
        b.set(i, i, Complex64::new(1.0 + spec.mu * eps, 0.0));
    }
    if l > 1 {
        let te = Complex64::new(spec.t * eps, 0.0);
        for i in 0..l {
            let j = (i + 1) % l;
            b.set(i, j, b.get(i, j) + te);
            b.set(j, i, b.get(j, i) + te);
        }
    }
    b
}

/// The `NL x NL` block matrix: `-B` in the top-left block, `B` on the rest
/// of the diagonal, `-I` on the block superdiagonal and in the bottom-left
/// corner.
pub fn hubbard_matrix(spec: &HubbardSpec) -> Result<SquareMatrix> {
    spec.validate()?;
    let l = spec.sites;
    let n = spec.slices;
    let b = hopping_block(spec);
    let mut a = SquareMatrix::zeros(n * l);
    for k in 0..n {
        let sign = if k == 0 { -1.0 } else { 1.0 };
        for i in 0..l {
            for j in 0..l {
                let v = b.get(i, j) * sign;
                if v.re != 0.0 || v.im != 0.0 {
                    a.set(k * l + i, k * l + j, v);
                }
            }
        }
        if k + 1 < n {
            for i in 0..l {
                a.set(k * l + i, (k + 1) * l + i, Complex64::new(-1.0, 0.0));
            }
        }
    }
    for i in 0..l {
        a.set((n - 1) * l + i, i, Complex64::new(-1.0, 0.0));
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HubbardZ {
    pub z: f64,
    /// Relative magnitude of the discarded imaginary part.
    pub imag_rel: f64,
}

fn finish(z: Complex64) -> Result<HubbardZ> {
    let imag_rel = z.im.abs() / z.norm().max(1e-300);
    if imag_rel > 1e-8 {
        return Err(Error::Numeric(format!(
            "partition function came out complex: {z} (imag/|z| = {imag_rel:.3e})"
        )));
    }
    Ok(HubbardZ { z: z.re, imag_rel })
}

/// `Z_N` through the SPPM identity.
pub fn partition_sppm(spec: &HubbardSpec, branch: MBranch) -> Result<HubbardZ> {
    spec.validate()?;
    let l = spec.dim();
    if l > HUBBARD_DIM_MAX {
        return Err(Error::Capacity(format!(
            "NL = {l} exceeds the exact-SPPM ceiling {HUBBARD_DIM_MAX}"
        )));
    }
    let a = hubbard_matrix(spec)?;
    if spec.u == 0.0 {
        // free theory: the quartic term is absent and Z = det(A)^2
        return finish(det_lu(&a).powi(2).to_complex());
    }
    let m = m_parameter(spec, branch);
    let m2p1 = m * m + Complex64::new(1.0, 0.0);
    let shift = m / m2p1;
    let shifted = a.shift_diag(shift);
    let det_shifted = det_lu(&shifted);
    if det_shifted.is_zero() {
        return Err(Error::Numeric(format!(
            "A_Hub + {shift} I is singular; pick the other branch"
        )));
    }
    let n_dual = inverse(&shifted)?
        .scaled(Complex64::new(-1.0, 0.0))
        .shift_diag(m);
    let m2 = sppm_exact(&n_dual, 2)?.value;
    let prefactor = LogSigned::from_complex(m2p1).powi(-(l as i32));
    let z = prefactor.mul(&det_shifted.powi(2)).mul(&m2);
    finish(z.to_complex())
}

/// `Z_N` through the discrete auxiliary-spin sum:
/// `2^-l (m^2+1)^-l sum_S det[(m I + S)(A_Hub + m/(m^2+1) I) - I]^2`.
pub fn partition_hs(spec: &HubbardSpec, branch: MBranch) -> Result<HubbardZ> {
    spec.validate()?;
    let l = spec.dim();
    if l > HUBBARD_DIM_MAX {
        return Err(Error::Capacity(format!(
            "NL = {l} exceeds the auxiliary-spin ceiling {HUBBARD_DIM_MAX}"
        )));
    }
    let a = hubbard_matrix(spec)?;
    if spec.u == 0.0 {
        return finish(det_lu(&a).powi(2).to_complex());
    }
    let m = m_parameter(spec, branch);
    let m2p1 = m * m + Complex64::new(1.0, 0.0);
    let shifted = a.shift_diag(m / m2p1);
    let sum = par::sum_terms(1u64 << l, |mask| {
        let mut buf: Vec<Complex64> = Vec::with_capacity(l * l);
        for i in 0..l {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            let row_scale = m + Complex64::new(s, 0.0);
            for j in 0..l {
                let mut v = row_scale * shifted.get(i, j);
                if i == j {
                    v -= Complex64::new(1.0, 0.0);
                }
                buf.push(v);
            }
        }
        det_lu_scratch(&mut buf, l).powi(2)
    });
    let prefactor = LogSigned::from_complex(m2p1)
        .powi(-(l as i32))
        .scale_exp(-(l as f64) * std::f64::consts::LN_2);
    finish(prefactor.mul(&sum).to_complex())
}

/// `Z_N` through the direct expansion of the quartic coupling:
/// `sum_R (-U eps)^|R| det(A_Hub with R dropped)^2` — real arithmetic,
/// independent of the `m` machinery.
pub fn partition_direct_expansion(spec: &HubbardSpec) -> Result<HubbardZ> {
    spec.validate()?;
    let a = hubbard_matrix(spec)?;
    let w = Complex64::new(-spec.u * spec.eps(), 0.0);
    let value = sppm_weighted_complement(&a, w)?;
    finish(value.to_complex())
}

/// Closed-form single-site partition function
/// `Z_SS = 1 + 2 e^{beta mu} + e^{2 beta mu} e^{-beta U}`.
pub fn single_site_analytic(beta: f64, mu: f64, u: f64) -> f64 {
    1.0 + 2.0 * (beta * mu).exp() + (2.0 * beta * mu - beta * u).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomicCheck {
    pub z: f64,
    /// finite-N single-site value, whose L-th power factorizes Z at t = 0
    pub z_ss_finite: f64,
    pub z_ss_analytic: f64,
    /// relative deviation of Z from the finite-N factorization
    pub factorization_rel_err: f64,
    /// relative deviation of Z from the analytic factorization
    pub analytic_rel_err: f64,
}

/// At `t = 0` the partition function factorizes over sites:
/// `Z(t=0) = (Z_SS)^L` within the finite-N Trotter envelope.
pub fn atomic_check(spec: &HubbardSpec) -> Result<AtomicCheck> {
    if spec.t != 0.0 {
        return Err(Error::Input("atomic check needs t = 0".into()));
    }
    let z = partition_sppm(spec, MBranch::Plus)?.z;
    let ss_spec = HubbardSpec {
        sites: 1,
        ..*spec
    };
    let z_ss_finite = partition_sppm(&ss_spec, MBranch::Plus)?.z;
    let z_ss_analytic = single_site_analytic(spec.beta, spec.mu, spec.u);
    let factored = z_ss_finite.powi(spec.sites as i32);
    let analytic = z_ss_analytic.powi(spec.sites as i32);
    Ok(AtomicCheck {
        z,
        z_ss_finite,
        z_ss_analytic,
        factorization_rel_err: (z - factored).abs() / factored.abs(),
        analytic_rel_err: (z - analytic).abs() / analytic.abs(),
    })
}

/// Finite-N single-site values over a slice grid, for convergence studies.
pub fn single_site_convergence(
    beta: f64,
    mu: f64,
    u: f64,
    slice_grid: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let runs = par::map_slice(slice_grid, |&n| {
        partition_sppm(
            &HubbardSpec {
                sites: 1,
                slices: n,
                t: 0.0,
                u,
                mu,
                beta,
            },
            MBranch::Plus,
        )
        .map(|r| r.z)
    });
    let mut out = Vec::new();
    for (&n, run) in slice_grid.iter().zip(runs) {
        out.push((n, run?));
    }
    Ok(out)
}

/// Linear-in-1/N Richardson extrapolation of a convergence sequence.
pub fn richardson(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| 1.0 / n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, z)| z).collect();
    let (_, intercept, _, _) = crate::quad::linear_fit(&xs, &ys);
    intercept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matrix_structure() {
        // L = 1, N = 3, t = 0: entries from b = 1 + mu eps
        let spec = HubbardSpec {
            sites: 1,
            slices: 3,
            t: 0.0,
            u: 2.0,
            mu: 0.3,
            beta: 1.0,
        };
        let b = 1.0 + 0.3 / 3.0;
        let a = hubbard_matrix(&spec).unwrap();
        let expect = [
            -b, -1.0, 0.0, //
            0.0, b, -1.0, //
            -1.0, 0.0, b,
        ];
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(a.entries()[k], c(e, 0.0), "entry {k}");
        }
        // det = -(1 + b^N) for L = 1
        let det = det_lu(&a).to_f64().unwrap();
        assert!((det + (1.0 + b.powi(3))).abs() < 1e-12);
        // N -> infinity: det -> -(1 + e^{beta mu})
        let spec_big = HubbardSpec {
            slices: 4096,
            ..spec
        };
        let det = det_lu(&hubbard_matrix(&spec_big).unwrap())
            .to_f64()
            .unwrap();
        assert!((det + (1.0 + (0.3f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn block_structure_audit() {
        // exactly 2 N L nonzero off-(block-)diagonal unit entries: N L from
        // the superdiagonal/corner blocks and N L hops for the ring at L > 2
        let spec = HubbardSpec {
            sites: 3,
            slices: 4,
            t: 0.7,
            u: 1.0,
            mu: 0.1,
            beta: 2.0,
        };
        let a = hubbard_matrix(&spec).unwrap();
        let mut unit_corners = 0;
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                if (a.get(i, j) - c(-1.0, 0.0)).norm() < 1e-15
                    && (i / 3 != j / 3)
                {
                    unit_corners += 1;
                }
            }
        }
        assert_eq!(unit_corners, 12); // N L
    }

    #[test]
    fn single_site_against_analytic() {
        let (beta, mu, u) = (1.0, 0.3, 2.0);
        let analytic = single_site_analytic(beta, mu, u);
        let seq = single_site_convergence(beta, mu, u, &[4, 6, 8, 10, 12]).unwrap();
        let mut prev_err = f64::INFINITY;
        for &(n, z) in &seq {
            let err = (z - analytic).abs() / analytic;
            assert!(err < prev_err, "error not decreasing at N = {n}");
            prev_err = err;
        }
        let extrapolated = richardson(&seq);
        assert!(
            (extrapolated - analytic).abs() / analytic < 0.01,
            "richardson {extrapolated} vs analytic {analytic}"
        );
    }

    #[test]
    fn substitution_check() {
        assert!((single_site_analytic(1.0, 0.0, 0.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn branches_agree() {
        let spec = HubbardSpec {
            sites: 1,
            slices: 8,
            t: 0.0,
            u: 2.0,
            mu: 0.3,
            beta: 1.0,
        };
        let plus = partition_sppm(&spec, MBranch::Plus).unwrap();
        let minus = partition_sppm(&spec, MBranch::Minus).unwrap();
        assert!(
            (plus.z - minus.z).abs() <= 1e-8 * plus.z.abs(),
            "{} vs {}",
            plus.z,
            minus.z
        );
        assert!(plus.imag_rel < 1e-8);
    }

    #[test]
    fn three_routes_agree() {
        let spec = HubbardSpec {
            sites: 1,
            slices: 8,
            t: 0.0,
            u: 2.0,
            mu: 0.3,
            beta: 1.0,
        };
        let sppm = partition_sppm(&spec, MBranch::Plus).unwrap().z;
        let hs = partition_hs(&spec, MBranch::Plus).unwrap().z;
        let direct = partition_direct_expansion(&spec).unwrap().z;
        assert!((sppm - hs).abs() <= 1e-8 * sppm.abs(), "{sppm} vs hs {hs}");
        assert!(
            (sppm - direct).abs() <= 1e-8 * sppm.abs(),
            "{sppm} vs direct {direct}"
        );
        // with hopping on
        let spec = HubbardSpec {
            sites: 2,
            slices: 5,
            t: 0.4,
            u: 1.5,
            mu: 0.2,
            beta: 1.0,
        };
        let sppm = partition_sppm(&spec, MBranch::Plus).unwrap().z;
        let hs = partition_hs(&spec, MBranch::Minus).unwrap().z;
        let direct = partition_direct_expansion(&spec).unwrap().z;
        assert!((sppm - hs).abs() <= 1e-8 * sppm.abs());
        assert!((sppm - direct).abs() <= 1e-8 * sppm.abs());
    }

    #[test]
    fn free_theory_is_det_squared() {
        let spec = HubbardSpec {
            sites: 2,
            slices: 6,
            t: 0.4,
            u: 0.0,
            mu: 0.2,
            beta: 1.0,
        };
        let z = partition_sppm(&spec, MBranch::Plus).unwrap().z;
        let det2 = det_lu(&hubbard_matrix(&spec).unwrap())
            .powi(2)
            .to_f64()
            .unwrap();
        assert!((z - det2).abs() < 1e-10 * det2.abs());
    }

    #[test]
    fn atomic_limit_factorizes() {
        let spec = HubbardSpec {
            sites: 2,
            slices: 7,
            t: 0.0,
            u: 1.0,
            mu: 0.5,
            beta: 2.0,
        };
        let check = atomic_check(&spec).unwrap();
        // exact factorization over sites at finite N
        assert!(
            check.factorization_rel_err < 1e-9,
            "factorization error {}",
            check.factorization_rel_err
        );
        // analytic agreement within the Trotter envelope
        let envelope = (check.z_ss_finite - check.z_ss_analytic).abs() / check.z_ss_analytic;
        assert!(
            check.analytic_rel_err <= 2.0 * envelope * spec.sites as f64 + 1e-9,
            "analytic error {} vs envelope {envelope}",
            check.analytic_rel_err
        );
    }

    #[test]
    fn capacity_guard() {
        let spec = HubbardSpec {
            sites: 4,
            slices: 4,
            t: 0.1,
            u: 1.0,
            mu: 0.0,
            beta: 1.0,
        };
        assert!(matches!(
            partition_sppm(&spec, MBranch::Plus),
            Err(Error::Capacity(_))
        ));
    }
}
