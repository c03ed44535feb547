//! Mean-field approximations of the n = 2 SPPM.
//!
//! Three order parameters (Delta1, Delta2, Delta3) close the quartic theory
//! into a quadratic one. The self-consistency reads, with
//! `x = A A^T + 2 Delta1 A_s + Delta4 I` and `Delta4 = D1^2 - D2^2 - D3^2`,
//!
//!   Delta1 = avg diag of (A_s + D1 I) / (x + 2 D2 A_a)
//!   Delta2 = avg diag of (-A_a + D2 I) / (x + 2 D2 A_a)
//!   Delta3 = avg diag of  D3 I        / (x + 2 D2 A_a)
//!
//! and the converged value is `log M = -l Delta4 + log det(x + 2 D2 A_a)`.
//! The same equations run in three guises: dense matrices, circulant
//! symbols (momentum sums), and the thermodynamic limit (momentum
//! quadrature). A dual-space variant works on the Sourlas matrix `N` with
//! primed variables `D' = u D`. Every converged value is a variational
//! lower bound on the exact SPPM.

use crate::dual::DualTransform;
use crate::logsigned::LogSigned;
use crate::matrix::{det_lu, CirculantSymbol, SquareMatrix};
use crate::par;
use crate::quad;
use crate::sppm::sppm_exact;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// The translation-invariant order parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MFState {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl MFState {
    pub fn new(delta1: f64, delta2: f64, delta3: f64) -> Self {
        Self {
            delta1,
            delta2,
            delta3,
        }
    }

    pub const ZERO: MFState = MFState {
        delta1: 0.0,
        delta2: 0.0,
        delta3: 0.0,
    };

    /// `Delta4 = Delta1^2 - Delta2^2 - Delta3^2`, the sole order parameter
    /// for antisymmetric inputs.
    pub fn delta4(&self) -> f64 {
        self.delta1 * self.delta1 - self.delta2 * self.delta2 - self.delta3 * self.delta3
    }

    pub fn max_abs_diff(&self, other: &MFState) -> f64 {
        (self.delta1 - other.delta1)
            .abs()
            .max((self.delta2 - other.delta2).abs())
            .max((self.delta3 - other.delta3).abs())
    }

    pub fn is_trivial(&self, tol: f64) -> bool {
        self.delta1.abs() <= tol && self.delta2.abs() <= tol && self.delta3.abs() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct MFSolution {
    pub state: MFState,
    pub converged: bool,
    /// Max componentwise fixed-point defect `|RHS(Delta) - Delta|`.
    pub residual: f64,
    pub iterations: u64,
    pub log_sppm_mf: LogSigned,
    pub stability_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct MFParams {
    /// Damping factor in (0, 1]; the update is `(1-eta) old + eta rhs`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: u64,
    /// Keep Delta2 fixed at zero (the paper's applications never break it).
    pub pin_delta2: bool,
}

impl Default for MFParams {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-12,
            max_iter: 100_000,
            pin_delta2: true,
        }
    }
}

/// One mean-field problem: the right-hand side of the self-consistency and
/// the log-value functional, in whichever representation.
trait MFProblem {
    /// RHS of the fixed-point map at `s`; `None` when the linear solve
    /// breaks down (singular `x + 2 D2 A_a`).
    fn rhs(&self, s: &MFState) -> Option<MFState>;
    /// `log M` at a (converged) state.
    fn log_value(&self, s: &MFState) -> Result<LogSigned>;
    fn dual_u(&self) -> Option<f64> {
        None
    }
}

fn run_fixed_point<P: MFProblem>(p: &P, init: MFState, params: &MFParams) -> Result<MFSolution> {
    let mut restarts = 0u32;
    let mut state = init;
    loop {
        let mut current = state;
        let mut iterations = 0u64;
        let mut residual = f64::INFINITY;
        let mut broke = false;
        while iterations < params.max_iter {
            let Some(mut rhs) = p.rhs(&current) else {
                broke = true;
                break;
            };
            if params.pin_delta2 {
                rhs.delta2 = 0.0;
            }
            if !rhs.delta1.is_finite() || !rhs.delta2.is_finite() || !rhs.delta3.is_finite() {
                broke = true;
                break;
            }
            residual = rhs.max_abs_diff(&current);
            iterations += 1;
            if residual <= params.tol {
                current = rhs;
                break;
            }
            current = MFState::new(
                (1.0 - params.damping) * current.delta1 + params.damping * rhs.delta1,
                (1.0 - params.damping) * current.delta2 + params.damping * rhs.delta2,
                (1.0 - params.damping) * current.delta3 + params.damping * rhs.delta3,
            );
            // diverging iterates will never come back
            if current.delta1.abs() > 1e6 || current.delta3.abs() > 1e6 {
                broke = true;
                break;
            }
        }
        if broke {
            restarts += 1;
            if restarts > 3 {
                return Err(Error::Numeric(
                    "mean-field iteration kept hitting a singular x + 2 D2 A_a after 3 restarts"
                        .into(),
                ));
            }
            // deterministic nudge off the singular manifold
            state = MFState::new(
                init.delta1 + 0.05 * restarts as f64,
                init.delta2,
                init.delta3 + 0.05 * restarts as f64,
            );
            continue;
        }
        let converged = residual <= params.tol;
        let log_sppm_mf = if converged {
            p.log_value(&current)?
        } else {
            LogSigned::ZERO
        };
        return Ok(MFSolution {
            state: current,
            converged,
            residual,
            iterations,
            log_sppm_mf,
            stability_ratio: None,
        });
    }
}

// ---------------------------------------------------------------------------
// dense problem

struct DenseProblem {
    dim: usize,
    sym: SquareMatrix,  // A_s
    asym: SquareMatrix, // A_a
    aat: SquareMatrix,  // A A^T
    /// Extra factor multiplying the RHS (u for the dual problem).
    factor: f64,
    /// Divide D'^2 combinations by u in Delta4 (dual problem); 1 for direct.
    delta4_scale: f64,
    log_prefactor: LogSigned,
    dual_u: Option<f64>,
}

impl DenseProblem {
    fn direct(a: &SquareMatrix) -> Result<Self> {
        if !a.is_real(1e-12) {
            return Err(Error::Input(
                "mean field is defined for real matrices".into(),
            ));
        }
        Ok(Self {
            dim: a.dim(),
            sym: a.sym_part(),
            asym: a.asym_part(),
            aat: a.matmul(&a.transpose()),
            factor: 1.0,
            delta4_scale: 1.0,
            log_prefactor: LogSigned::ONE,
            dual_u: None,
        })
    }

    fn dual(t: &DualTransform) -> Result<Self> {
        let n = &t.n_matrix;
        if !n.is_real(1e-10) {
            return Err(Error::Input("dual matrix N must be real".into()));
        }
        Ok(Self {
            dim: n.dim(),
            sym: n.sym_part(),
            asym: n.asym_part(),
            aat: n.matmul(&n.transpose()),
            factor: t.u,
            delta4_scale: 1.0 / t.u,
            log_prefactor: t.log_c,
            dual_u: Some(t.u),
        })
    }

    /// `Y = A A^T + 2 D1 A_s + (D1^2 - D2^2 - D3^2) I + 2 D2 A_a`.
    fn y_matrix(&self, s: &MFState) -> SquareMatrix {
        let quad = s.delta1 * s.delta1 - s.delta2 * s.delta2 - s.delta3 * s.delta3;
        let mut y = self.aat.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = y.get(i, j)
                    + 2.0 * s.delta1 * self.sym.get(i, j)
                    + 2.0 * s.delta2 * self.asym.get(i, j);
                y.set(i, j, v);
            }
        }
        y.shift_diag(Complex64::new(quad, 0.0))
    }
}

impl MFProblem for DenseProblem {
    fn rhs(&self, s: &MFState) -> Option<MFState> {
        let y = self.y_matrix(s);
        let w = crate::matrix::inverse(&y).ok()?;
        let l = self.dim as f64;
        // traces of W, W A_s, W A_a
        let mut tr_w = 0.0;
        let mut tr_ws = 0.0;
        let mut tr_wa = 0.0;
        for i in 0..self.dim {
            tr_w += w.get(i, i).re;
            for k in 0..self.dim {
                tr_ws += (w.get(i, k) * self.sym.get(k, i)).re;
                tr_wa += (w.get(i, k) * self.asym.get(k, i)).re;
            }
        }
        Some(MFState::new(
            self.factor * (tr_ws + s.delta1 * tr_w) / l,
            self.factor * (-tr_wa + s.delta2 * tr_w) / l,
            self.factor * (s.delta3 * tr_w) / l,
        ))
    }

    fn log_value(&self, s: &MFState) -> Result<LogSigned> {
        let quad = s.delta1 * s.delta1 - s.delta2 * s.delta2 - s.delta3 * s.delta3;
        let delta4 = quad * self.delta4_scale;
        let y = self.y_matrix(s);
        Ok(self
            .log_prefactor
            .mul(&det_lu(&y))
            .scale_exp(-(self.dim as f64) * delta4))
    }

    fn dual_u(&self) -> Option<f64> {
        self.dual_u
    }
}

// ---------------------------------------------------------------------------
// circulant problem (momentum sums)

struct CirculantProblem {
    size: usize,
    values: Vec<Complex64>,
    neg_values: Vec<Complex64>,
    factor: f64,
    delta4_scale: f64,
    log_prefactor: LogSigned,
    dual_u: Option<f64>,
}

impl CirculantProblem {
    fn direct(sym: &CirculantSymbol) -> Result<Self> {
        if sym.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Input("symbol has non-finite values".into()));
        }
        let neg = (0..sym.size).map(|k| sym.value_at_neg(k)).collect();
        Ok(Self {
            size: sym.size,
            values: sym.values.clone(),
            neg_values: neg,
            factor: 1.0,
            delta4_scale: 1.0,
            log_prefactor: LogSigned::ONE,
            dual_u: None,
        })
    }

    /// Dual problem from the source symbol: `N(q) = m - 1/(A(q) + m/(u+m^2))`
    /// and `log c_l = -l ln(u+m^2) + 2 sum_k ln A'(q_k)`.
    fn dual(sym: &CirculantSymbol, u: f64, m: f64) -> Result<Self> {
        let upm2 = u + m * m;
        let shift = m / upm2;
        let l = sym.size;
        let mut n_vals = Vec::with_capacity(l);
        let mut log_det_shifted = LogSigned::ONE;
        for k in 0..l {
            let aq = sym.values[k] + shift;
            if aq.norm() == 0.0 {
                return Err(Error::Numeric(format!(
                    "A(q) + {shift:.6} vanishes at momentum index {k}"
                )));
            }
            log_det_shifted = log_det_shifted.mul(&LogSigned::from_complex(aq));
            n_vals.push(Complex64::new(m, 0.0) - 1.0 / aq);
        }
        let log_c = log_det_shifted
            .powi(2)
            .scale_exp(-(l as f64) * upm2.ln());
        let n_sym = CirculantSymbol {
            size: l,
            k0: sym.k0,
            values: n_vals,
        };
        let neg = (0..l).map(|k| n_sym.value_at_neg(k)).collect();
        Ok(Self {
            size: l,
            values: n_sym.values,
            neg_values: neg,
            factor: u,
            delta4_scale: 1.0 / u,
            log_prefactor: log_c,
            dual_u: Some(u),
        })
    }

    /// `x(q) + 2 D2 A_a(q)` at momentum index k.
    fn denom(&self, s: &MFState, k: usize) -> Complex64 {
        let d1 = Complex64::new(s.delta1, 0.0);
        let x = (self.neg_values[k] + d1) * (self.values[k] + d1)
            - Complex64::new(s.delta2 * s.delta2 + s.delta3 * s.delta3, 0.0);
        let aa = 0.5 * (self.values[k] - self.neg_values[k]);
        x + 2.0 * s.delta2 * aa
    }
}

impl MFProblem for CirculantProblem {
    fn rhs(&self, s: &MFState) -> Option<MFState> {
        let l = self.size as f64;
        let mut r1 = Complex64::new(0.0, 0.0);
        let mut r2 = Complex64::new(0.0, 0.0);
        let mut r3 = Complex64::new(0.0, 0.0);
        for k in 0..self.size {
            let den = self.denom(s, k);
            if den.norm() < 1e-300 {
                return None;
            }
            let inv = 1.0 / den;
            let sym = 0.5 * (self.values[k] + self.neg_values[k]);
            let asym = 0.5 * (self.values[k] - self.neg_values[k]);
            r1 += (sym + s.delta1) * inv;
            r2 += (-asym + s.delta2) * inv;
            r3 += s.delta3 * inv;
        }
        Some(MFState::new(
            self.factor * r1.re / l,
            self.factor * r2.re / l,
            self.factor * r3.re / l,
        ))
    }

    fn log_value(&self, s: &MFState) -> Result<LogSigned> {
        let quad = s.delta1 * s.delta1 - s.delta2 * s.delta2 - s.delta3 * s.delta3;
        let delta4 = quad * self.delta4_scale;
        let mut acc = LogSigned::ONE;
        for k in 0..self.size {
            acc = acc.mul(&LogSigned::from_complex(self.denom(s, k)));
        }
        Ok(self
            .log_prefactor
            .mul(&acc)
            .scale_exp(-(self.size as f64) * delta4))
    }

    fn dual_u(&self) -> Option<f64> {
        self.dual_u
    }
}

// ---------------------------------------------------------------------------
// public solver entry points

/// Damped fixed-point iteration on a dense real matrix.
pub fn mf_direct(
    a: &SquareMatrix,
    init: MFState,
    params: &MFParams,
) -> Result<MFSolution> {
    validate_params(params)?;
    let p = DenseProblem::direct(a)?;
    run_fixed_point(&p, init, params)
}

/// Same contract as `mf_direct`, with the right-hand side evaluated as
/// momentum sums over the circulant symbol.
pub fn mf_circulant(
    sym: &CirculantSymbol,
    init: MFState,
    params: &MFParams,
) -> Result<MFSolution> {
    validate_params(params)?;
    let p = CirculantProblem::direct(sym)?;
    run_fixed_point(&p, init, params)
}

/// Dual-space mean field on a dense `N`; state components are the primed
/// variables `D' = u D`, and the returned log value includes `c_l`.
pub fn mf_dual(t: &DualTransform, init: MFState, params: &MFParams) -> Result<MFSolution> {
    validate_params(params)?;
    let p = DenseProblem::dual(t)?;
    run_fixed_point(&p, init, params)
}

/// Dual-space mean field from the source symbol at coupling `u` and
/// branch parameter `m`.
pub fn mf_dual_circulant(
    sym: &CirculantSymbol,
    u: f64,
    m: f64,
    init: MFState,
    params: &MFParams,
) -> Result<MFSolution> {
    validate_params(params)?;
    let p = CirculantProblem::dual(sym, u, m)?;
    run_fixed_point(&p, init, params)
}

fn validate_params(params: &MFParams) -> Result<()> {
    if !(params.damping > 0.0 && params.damping <= 1.0) {
        return Err(Error::Input(format!(
            "damping {} outside (0, 1]",
            params.damping
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// thermodynamic limit (momentum quadrature)

/// Mean-field solve in the `l -> infinity` limit for a symbol given as a
/// function of momentum; returns the per-site log density
/// `f = int dq/2pi ln[x(q) + 2 D2 A_a(q)] - Delta4`.
pub struct MFThermo {
    pub state: MFState,
    pub converged: bool,
    pub residual: f64,
    pub iterations: u64,
    /// `(1/l) log M` in the thermodynamic limit.
    pub log_density: f64,
}

pub fn mf_thermo<F>(symbol: F, init: MFState, params: &MFParams) -> Result<MFThermo>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    validate_params(params)?;
    let quad_tol = 1e-10;
    let denom = |s: &MFState, q: f64| -> Complex64 {
        let d1 = Complex64::new(s.delta1, 0.0);
        let v = symbol(q);
        let vneg = symbol(-q);
        let x = (vneg + d1) * (v + d1)
            - Complex64::new(s.delta2 * s.delta2 + s.delta3 * s.delta3, 0.0);
        x + s.delta2 * (v - vneg)
    };
    let mut state = init;
    let mut iterations = 0u64;
    let mut residual = f64::INFINITY;
    while iterations < params.max_iter {
        let s = state;
        let r1 = quad::integrate(
            |q| {
                let d = denom(&s, q);
                let sym = 0.5 * (symbol(q) + symbol(-q));
                (((sym + Complex64::new(s.delta1, 0.0)) / d).re) / (2.0 * std::f64::consts::PI)
            },
            -std::f64::consts::PI,
            std::f64::consts::PI,
            quad_tol,
        );
        let r2 = if params.pin_delta2 {
            0.0
        } else {
            quad::integrate(
                |q| {
                    let d = denom(&s, q);
                    let asym = 0.5 * (symbol(q) - symbol(-q));
                    (((-asym + Complex64::new(s.delta2, 0.0)) / d).re)
                        / (2.0 * std::f64::consts::PI)
                },
                -std::f64::consts::PI,
                std::f64::consts::PI,
                quad_tol,
            )
        };
        let r3 = quad::integrate(
            |q| ((Complex64::new(s.delta3, 0.0) / denom(&s, q)).re) / (2.0 * std::f64::consts::PI),
            -std::f64::consts::PI,
            std::f64::consts::PI,
            quad_tol,
        );
        if !r1.is_finite() || !r2.is_finite() || !r3.is_finite() {
            return Err(Error::Numeric(
                "thermodynamic mean-field integrand blew up".into(),
            ));
        }
        let rhs = MFState::new(r1, r2, r3);
        residual = rhs.max_abs_diff(&state);
        iterations += 1;
        if residual <= params.tol.max(1e-11) {
            state = rhs;
            break;
        }
        state = MFState::new(
            (1.0 - params.damping) * state.delta1 + params.damping * rhs.delta1,
            (1.0 - params.damping) * state.delta2 + params.damping * rhs.delta2,
            (1.0 - params.damping) * state.delta3 + params.damping * rhs.delta3,
        );
    }
    let converged = residual <= params.tol.max(1e-11);
    let s = state;
    let log_density = quad::integrate(
        |q| denom(&s, q).norm().ln() / (2.0 * std::f64::consts::PI),
        -std::f64::consts::PI,
        std::f64::consts::PI,
        quad_tol,
    ) - s.delta4();
    Ok(MFThermo {
        state,
        converged,
        residual,
        iterations,
        log_density,
    })
}

/// Scalar consistency solve for antisymmetric symbols with Delta2 = 0:
/// find `Delta4 >= 0` with `(1/l) sum_k 1/(|A(q_k)|^2 + Delta4) = 1`,
/// returning 0 when no nontrivial root exists. This is the exact content
/// of the vector iteration on the antisymmetric slice.
pub fn antisym_delta4(values_abs2: &[f64]) -> f64 {
    let l = values_abs2.len() as f64;
    let g = |d4: f64| -> f64 {
        values_abs2.iter().map(|&a2| 1.0 / (a2 + d4)).sum::<f64>() / l
    };
    if g(0.0) <= 1.0 {
        return 0.0;
    }
    // g is strictly decreasing; bracket then bisect
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while g(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Thermodynamic-limit version of `antisym_delta4` with the momentum sum
/// replaced by quadrature over `|A(q)|^2`.
pub fn antisym_delta4_thermo<F>(abs2: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let pi = std::f64::consts::PI;
    let g = |d4: f64| -> f64 {
        quad::integrate(|q| 1.0 / (abs2(q) + d4) / (2.0 * pi), -pi, pi, 1e-10)
    };
    let mut lo = 1e-300f64;
    let mut hi = 1.0f64;
    if g(hi) > 1.0 {
        while g(hi) > 1.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return 0.0;
            }
        }
    } else {
        // find a lower bracket where g > 1 (the integral diverges as d4 -> 0
        // whenever the symbol has zeros)
        lo = hi;
        while g(lo) <= 1.0 {
            lo *= 0.5;
            if lo < 1e-280 {
                return 0.0;
            }
        }
        std::mem::swap(&mut lo, &mut hi);
        std::mem::swap(&mut lo, &mut hi);
        let tmp = lo;
        lo = hi.min(tmp);
        hi = hi.max(tmp);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1e-12) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// stability, multistart, variational gap

/// Saddle-point stability ratio `f_SP / f_MF`:
/// `1 + ln[1 - (D1^2 - D3^2)^2] / (2 f_mf)` in the direct space, with
/// `((D1'^2 - D3'^2)/u)^2` inside the bracket in the dual space.
///
/// `f_mf` is the caller's positive free-energy density `|log M|/l` (for the
/// Ising application, `R2/L`). A bracket argument <= 0 returns `-inf`, the
/// maximally-unstable sentinel. Values above 0.99 flag a stable solution.
pub fn stability_ratio(state: &MFState, f_mf: f64, dual_u: Option<f64>) -> Result<f64> {
    if state.delta2.abs() > 1e-9 {
        return Err(Error::Input(
            "stability ratio is defined for Delta2 = 0 solutions".into(),
        ));
    }
    let combo = state.delta1 * state.delta1 - state.delta3 * state.delta3;
    let scaled = match dual_u {
        Some(u) => combo / u,
        None => combo,
    };
    let bracket = 1.0 - scaled * scaled;
    if bracket <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(1.0 + bracket.ln() / (2.0 * f_mf))
}

/// Stability threshold used everywhere: ratio > 0.99.
pub const STABILITY_THRESHOLD: f64 = 0.99;

/// What a multistart run solves.
pub enum MFTarget<'a> {
    Dense(&'a SquareMatrix),
    Circulant(&'a CirculantSymbol),
    Dual(&'a DualTransform),
    DualCirculant {
        sym: &'a CirculantSymbol,
        u: f64,
        m: f64,
    },
}

#[derive(Debug, Clone)]
pub struct MultistartOutcome {
    /// Converged, deduplicated solutions in discovery order.
    pub solutions: Vec<MFSolution>,
    /// Index of the maximizer of `log M` (the variational pick).
    pub best: usize,
}

/// Default initialization grid: covers both Laplacian roots and the Ising
/// broken phase.
pub fn default_init_grid() -> Vec<MFState> {
    let d1s = [-5.0, -1.0, -0.5, 0.0, 0.5, 1.0];
    let d3s = [0.0, 0.5, 1.0];
    let mut grid = Vec::new();
    for &d1 in &d1s {
        for &d3 in &d3s {
            grid.push(MFState::new(d1, 0.0, d3));
        }
    }
    grid
}

fn solve_target(target: &MFTarget, init: MFState, params: &MFParams) -> Result<MFSolution> {
    match target {
        MFTarget::Dense(a) => mf_direct(a, init, params),
        MFTarget::Circulant(sym) => mf_circulant(sym, init, params),
        MFTarget::Dual(t) => mf_dual(t, init, params),
        MFTarget::DualCirculant { sym, u, m } => mf_dual_circulant(sym, *u, *m, init, params),
    }
}

/// Run the chosen solver from every init (re-trying stiff starts with a
/// shrinking damping ladder), dedup converged solutions at 1e-6 in Delta
/// space,
/// and mark the maximizer of `log M` best — the variational rule. Ties on
/// the log value are broken toward larger |Delta4|.
pub fn mf_multistart(
    target: &MFTarget,
    inits: &[MFState],
    params: &MFParams,
) -> Result<MultistartOutcome> {
    if inits.is_empty() {
        return Err(Error::Input("empty init grid".into()));
    }
    let runs = par::map_slice(inits, |&init| {
        // every ladder stage may settle on a different fixed point, so all
        // converged outcomes are kept
        let mut found: Vec<MFSolution> = Vec::new();
        let mut failure: Option<String> = None;
        for shrink in [1.0, 0.1, 0.01, 0.002] {
            let p = MFParams {
                damping: params.damping * shrink,
                // wandering non-convergent orbits should fail fast here;
                // convergent runs finish well under this cap
                max_iter: params.max_iter.min(25_000),
                ..*params
            };
            match solve_target(target, init, &p) {
                Ok(sol) if sol.converged => found.push(sol),
                Ok(sol) => failure = Some(format!("residual {:.3e}", sol.residual)),
                Err(e) => failure = Some(e.to_string()),
            }
        }
        (found, failure)
    });
    let mut solutions: Vec<MFSolution> = Vec::new();
    let mut residual_report = Vec::new();
    for (i, (found, failure)) in runs.into_iter().enumerate() {
        if found.is_empty() {
            residual_report.push(format!(
                "init {i}: {}",
                failure.unwrap_or_else(|| "no attempt finished".into())
            ));
        }
        for sol in found {
            let dup = solutions
                .iter()
                .any(|s| s.state.max_abs_diff(&sol.state) < 1e-6);
            if !dup {
                solutions.push(sol);
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::Solver(residual_report.join("; ")));
    }
    let mut best = 0usize;
    for i in 1..solutions.len() {
        let a = &solutions[i];
        let b = &solutions[best];
        let la = a.log_sppm_mf;
        let lb = b.log_sppm_mf;
        let better = if (la.log_mag - lb.log_mag).abs() <= 1e-9 * lb.log_mag.abs().max(1.0) {
            a.state.delta4().abs() > b.state.delta4().abs()
        } else {
            la.log_mag > lb.log_mag
        };
        if better {
            best = i;
        }
    }
    Ok(MultistartOutcome { solutions, best })
}

/// `log M_exact - log M_MF`; nonnegative up to roundoff by the variational
/// bound. Needs the exact enumerator, so dim <= 20.
pub fn variational_gap(a: &SquareMatrix, sol: &MFSolution) -> Result<f64> {
    if a.dim() > crate::sppm::HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "variational gap needs the exact oracle; dim {} > {}",
            a.dim(),
            crate::sppm::HS_DIM_MAX
        )));
    }
    let exact = sppm_exact(a, 2)?.value;
    Ok(exact.log_mag - sol.log_sppm_mf.log_mag)
}

/// Log value of the mean-field functional at an arbitrary state (not
/// necessarily a fixed point); used for landscape scans and the
/// equal-Delta4 invariance checks.
pub fn mf_log_value_dense(a: &SquareMatrix, s: &MFState) -> Result<LogSigned> {
    let p = DenseProblem::direct(a)?;
    p.log_value(s)
}

/// Pfaffian form of the mean-field value: `exp(-l Delta4) Pf(S_pf)` with the
/// 4l x 4l antisymmetric block matrix built from the quadratic action. Agrees
/// with the determinant form; kept as an independent algebraic route.
pub fn mf_log_value_pfaffian(a: &SquareMatrix, s: &MFState) -> Result<LogSigned> {
    if !a.is_real(1e-12) {
        return Err(Error::Input(
            "mean field is defined for real matrices".into(),
        ));
    }
    let l = a.dim();
    let zero = Complex64::new(0.0, 0.0);
    // O = [[A + D1 I, -D2 I], [-D2 I, A + D1 I]] (2l x 2l)
    let mut o = SquareMatrix::zeros(2 * l);
    for i in 0..l {
        for j in 0..l {
            let v = a.get(i, j);
            o.set(i, j, v);
            o.set(l + i, l + j, v);
        }
        o.set(i, i, o.get(i, i) + Complex64::new(s.delta1, 0.0));
        o.set(l + i, l + i, o.get(l + i, l + i) + Complex64::new(s.delta1, 0.0));
        o.set(i, l + i, Complex64::new(-s.delta2, 0.0));
        o.set(l + i, i, Complex64::new(-s.delta2, 0.0));
    }
    // I3 = [[0, D3 I], [-D3 I, 0]] (2l x 2l), same for the barred block
    let mut s_pf = SquareMatrix::zeros(4 * l);
    for i in 0..l {
        s_pf.set(i, l + i, Complex64::new(s.delta3, 0.0));
        s_pf.set(l + i, i, Complex64::new(-s.delta3, 0.0));
        s_pf.set(2 * l + i, 3 * l + i, Complex64::new(s.delta3, 0.0));
        s_pf.set(3 * l + i, 2 * l + i, Complex64::new(-s.delta3, 0.0));
    }
    for i in 0..2 * l {
        for j in 0..2 * l {
            let v = o.get(i, j);
            if v != zero {
                s_pf.set(i, 2 * l + j, -v);
                s_pf.set(2 * l + j, i, v);
            }
        }
    }
    let pf = crate::matrix::pfaffian(&s_pf, 1e-9)?;
    Ok(pf.scale_exp(-(l as f64) * s.delta4()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{build_dual, Branch};
    use crate::matrix::{circulant_symbol, K0};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn laplacian_symbol(l: usize) -> CirculantSymbol {
        let mut row = vec![Complex64::new(0.0, 0.0); l];
        row[0] = Complex64::new(2.0, 0.0);
        row[1] = Complex64::new(-1.0, 0.0);
        row[l - 1] = Complex64::new(-1.0, 0.0);
        circulant_symbol(&row, K0::Zero).unwrap()
    }

    fn laplacian_dense(l: usize) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(l);
        for i in 0..l {
            m.set(i, i, Complex64::new(2.0, 0.0));
            m.set(i, (i + 1) % l, Complex64::new(-1.0, 0.0));
            m.set((i + 1) % l, i, Complex64::new(-1.0, 0.0));
        }
        m
    }

    fn random_antisymmetric(rng: &mut StdRng, n: usize) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                m.set(i, j, v);
                m.set(j, i, -v);
            }
        }
        m
    }

    #[test]
    fn antisymmetric_zero_is_a_fixed_point() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_antisymmetric(&mut rng, 6);
        let sol = mf_direct(&a, MFState::ZERO, &MFParams::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.state.is_trivial(1e-12));
        // log M at the trivial point is log det(A A^T) = 2 log|det A|
        let aat = a.matmul(&a.transpose());
        let expect = det_lu(&aat);
        assert!(sol.log_sppm_mf.log_rel_diff(&expect) < 1e-9);
    }

    #[test]
    fn delta2_zero_is_preserved_for_antisymmetric_input() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_antisymmetric(&mut rng, 6);
        let params = MFParams {
            pin_delta2: false,
            ..MFParams::default()
        };
        let sol = mf_direct(&a, MFState::new(0.7, 0.0, 0.3), &params).unwrap();
        assert!(sol.state.delta2.abs() < 1e-10);
    }

    #[test]
    fn circulant_and_dense_paths_agree() {
        let l = 12;
        let sym = laplacian_symbol(l);
        let dense = laplacian_dense(l);
        let params = MFParams::default();
        let init = MFState::new(0.5, 0.0, 0.0);
        let a = mf_circulant(&sym, init, &params).unwrap();
        let b = mf_direct(&dense, init, &params).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.state.max_abs_diff(&b.state) < 1e-9);
        assert!(a.log_sppm_mf.log_rel_diff(&b.log_sppm_mf) < 1e-9);
    }

    #[test]
    fn laplacian_thermo_root_matches_quartic() {
        // Delta1^3 (Delta1 + 4) = 1 in the thermodynamic limit
        let thermo = mf_thermo(
            |q: f64| Complex64::new(4.0 * (q / 2.0).sin().powi(2), 0.0),
            MFState::new(0.5, 0.0, 0.0),
            &MFParams::default(),
        )
        .unwrap();
        assert!(thermo.converged);
        let d1 = thermo.state.delta1;
        assert!(
            (d1.powi(3) * (d1 + 4.0) - 1.0).abs() < 1e-8,
            "delta1 = {d1}"
        );
        assert!((d1 - 0.601232).abs() < 1e-5);
    }

    #[test]
    fn multistart_finds_both_laplacian_roots() {
        let thermo_solver = |init: MFState| {
            mf_thermo(
                |q: f64| Complex64::new(4.0 * (q / 2.0).sin().powi(2), 0.0),
                init,
                &MFParams {
                    damping: 0.005,
                    tol: 1e-12,
                    max_iter: 200_000,
                    pin_delta2: true,
                },
            )
        };
        // the second root -4.01545 repels the plain iteration; heavy damping
        // stabilizes it
        let sol = thermo_solver(MFState::new(-4.1, 0.0, 0.0)).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        assert!((sol.state.delta1 + 4.01545).abs() < 1e-4, "{}", sol.state.delta1);
    }

    #[test]
    fn multistart_on_finite_laplacian() {
        let sym = laplacian_symbol(64);
        let grid = default_init_grid();
        let out = mf_multistart(&MFTarget::Circulant(&sym), &grid, &MFParams::default()).unwrap();
        // both finite-size analogues of the two roots appear
        let best = &out.solutions[out.best];
        assert!((best.state.delta1 - 0.601232).abs() < 0.01);
        let has_negative_root = out
            .solutions
            .iter()
            .any(|s| (s.state.delta1 + 4.0155).abs() < 0.01);
        assert!(
            has_negative_root,
            "solutions: {:?}",
            out.solutions.iter().map(|s| s.state).collect::<Vec<_>>()
        );
        // variational rule: the positive root maximizes log M
        for s in &out.solutions {
            assert!(best.log_sppm_mf.log_mag >= s.log_sppm_mf.log_mag - 1e-9);
        }
    }

    #[test]
    fn lower_bound_on_symmetric_positive_definite() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let mut a = SquareMatrix::zeros(8);
            for i in 0..8 {
                for j in i..8 {
                    let v = Complex64::new(rng.gen_range(-0.5..0.5), 0.0);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
                a.set(i, i, a.get(i, i) + Complex64::new(4.0, 0.0));
            }
            let out =
                mf_multistart(&MFTarget::Dense(&a), &default_init_grid(), &MFParams::default())
                    .unwrap();
            let sol = &out.solutions[out.best];
            let gap = variational_gap(&a, sol).unwrap();
            assert!(gap >= -1e-9, "gap {gap}");
        }
    }

    #[test]
    fn converged_residual_reevaluates_small() {
        let sym = laplacian_symbol(32);
        let params = MFParams::default();
        let sol = mf_circulant(&sym, MFState::new(0.5, 0.0, 0.0), &params).unwrap();
        assert!(sol.converged);
        // re-evaluate the defect from scratch
        let p = CirculantProblem::direct(&sym).unwrap();
        let rhs = p.rhs(&sol.state).unwrap();
        assert!(rhs.max_abs_diff(&sol.state) <= 2.0 * params.tol);
    }

    #[test]
    fn determinant_and_pfaffian_forms_agree() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..3 {
            let mut a = SquareMatrix::zeros(6);
            for i in 0..6 {
                for j in 0..6 {
                    a.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
                }
            }
            let s = MFState::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.5..0.5),
            );
            let det_form = mf_log_value_dense(&a, &s).unwrap();
            let pf_form = mf_log_value_pfaffian(&a, &s).unwrap();
            assert!(
                det_form.log_rel_diff(&pf_form) < 1e-9,
                "det {det_form:?} vs pf {pf_form:?} at {s:?}"
            );
        }
    }

    #[test]
    fn log_value_depends_only_on_delta4_for_antisymmetric() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = random_antisymmetric(&mut rng, 6);
        // two (D1, D3) pairs with equal Delta4 = 0.09
        let s1 = MFState::new(0.5, 0.0, 0.4);
        let s2 = MFState::new(0.34641016151377546, 0.0, 0.17320508075688773);
        assert!((s1.delta4() - s2.delta4()).abs() < 1e-12);
        let v1 = mf_log_value_dense(&a, &s1).unwrap();
        let v2 = mf_log_value_dense(&a, &s2).unwrap();
        assert!(v1.log_rel_diff(&v2) < 1e-9);
    }

    #[test]
    fn symmetric_input_reduces_to_scalar_equation() {
        // with Delta3 = 0 init on a symmetric matrix, the converged state
        // solves Delta1 = avg diag (A + Delta1)^-1
        let sym = laplacian_symbol(24);
        let sol = mf_circulant(&sym, MFState::new(0.5, 0.0, 0.0), &MFParams::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.state.delta3, 0.0);
        let d1 = sol.state.delta1;
        let mut avg = 0.0;
        for v in &sym.values {
            avg += 1.0 / (v.re + d1);
        }
        avg /= 24.0;
        assert!((avg - d1).abs() < 1e-10);
    }

    #[test]
    fn dual_u1_matches_direct_on_inverse() {
        // u = 1, m = 0: dual MF on N = -A^-1 rescaled by (det A)^2 equals
        // direct MF on A^-1 rescaled by the same factor (sign invariance)
        let a = laplacian_dense(8).shift_diag(Complex64::new(1.0, 0.0));
        let t = build_dual(&a, 1.0, Branch::Negative).unwrap();
        let dual = mf_dual(&t, MFState::new(0.5, 0.0, 0.0), &MFParams::default()).unwrap();
        assert!(dual.converged);
        let inv = crate::matrix::inverse(&a).unwrap();
        let direct = mf_direct(&inv, MFState::new(0.5, 0.0, 0.0), &MFParams::default()).unwrap();
        let expected = direct.log_sppm_mf.mul(&det_lu(&a).powi(2));
        assert!(
            dual.log_sppm_mf.log_rel_diff(&expected) < 1e-8,
            "dual {:?} vs direct-rescaled {:?}",
            dual.log_sppm_mf,
            expected
        );
    }

    #[test]
    fn dual_circulant_matches_dual_dense() {
        let l = 10;
        let sym = laplacian_symbol(l);
        let dense = laplacian_dense(l);
        let u = 0.3;
        let t = build_dual(&dense, u, Branch::Negative).unwrap();
        let init = MFState::new(0.2, 0.0, 0.0);
        let a = mf_dual(&t, init, &MFParams::default()).unwrap();
        let b = mf_dual_circulant(&sym, u, t.m, init, &MFParams::default()).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.state.max_abs_diff(&b.state) < 1e-9);
        assert!(a.log_sppm_mf.log_rel_diff(&b.log_sppm_mf) < 1e-9);
    }

    #[test]
    fn stability_ratio_conventions() {
        let s = MFState::ZERO;
        assert_eq!(stability_ratio(&s, 0.7, None).unwrap(), 1.0);
        let s = MFState::new(0.5, 0.0, 0.2);
        let r = stability_ratio(&s, 0.7, None).unwrap();
        assert!(r < 1.0);
        // bracket argument <= 0 flags maximal instability
        let s = MFState::new(1.5, 0.0, 0.0);
        assert_eq!(
            stability_ratio(&s, 0.7, None).unwrap(),
            f64::NEG_INFINITY
        );
        // dual variant divides the combination by u before squaring
        let s = MFState::new(0.3, 0.0, 0.1);
        let direct = stability_ratio(&s, 0.7, None).unwrap();
        let dual = stability_ratio(&s, 0.7, Some(0.5)).unwrap();
        assert!(dual < direct);
    }

    #[test]
    fn variational_bound_laplacian() {
        let a = laplacian_dense(10);
        let out =
            mf_multistart(&MFTarget::Dense(&a), &default_init_grid(), &MFParams::default())
                .unwrap();
        let gap = variational_gap(&a, &out.solutions[out.best]).unwrap();
        assert!(gap >= -1e-9);
        // the paper-scale gap: about 8% of the free energy at L = 10
        let exact = sppm_exact(&a, 2).unwrap().value.log_mag;
        assert!(gap / exact < 0.25, "gap fraction {}", gap / exact);
    }
}
