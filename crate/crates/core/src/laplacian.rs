//! The exactly solvable benchmark: SPPM of the closed-chain Laplacian for
//! arbitrary power `n`, interpreted as the partition function of rooted
//! spanning forests on a ring.
//!
//! A principal submatrix factorizes over contiguous clusters of kept
//! indices, and a cluster of size `s < L` has determinant `s + 1`, so the
//! energy of a configuration is `E = -sum_s m_s ln(s+1)`. That turns the
//! SPPM into a cluster gas whose generating function has a closed form;
//! everything here is cross-checked against brute-force enumeration.

use crate::logsigned::LogSigned;
use crate::matrix::SquareMatrix;
use crate::meanfield;
use crate::par;
use crate::sppm::sppm_exact;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Closed-chain Laplacian: 2 on the diagonal, -1 on the neighbors, with the
/// periodic corner entries. Circulant with symbol `4 sin^2(q/2)`.
pub fn laplacian_matrix(l: usize) -> Result<SquareMatrix> {
    if l < 3 {
        return Err(Error::Input(format!("chain length {l} < 3")));
    }
    let mut m = SquareMatrix::zeros(l);
    for i in 0..l {
        m.set(i, i, Complex64::new(2.0, 0.0));
        m.set(i, (i + 1) % l, Complex64::new(-1.0, 0.0));
        m.set((i + 1) % l, i, Complex64::new(-1.0, 0.0));
    }
    Ok(m)
}

pub fn laplacian_symbol(l: usize) -> Result<crate::matrix::CirculantSymbol> {
    if l < 3 {
        return Err(Error::Input(format!("chain length {l} < 3")));
    }
    let mut row = vec![Complex64::new(0.0, 0.0); l];
    row[0] = Complex64::new(2.0, 0.0);
    row[1] = Complex64::new(-1.0, 0.0);
    row[l - 1] = Complex64::new(-1.0, 0.0);
    crate::matrix::circulant_symbol(&row, crate::matrix::K0::Zero)
}

/// `Z(n, L) = M^(n)(A_DL)` by brute-force subset enumeration.
pub fn z_exact_enumeration(l: usize, n: u32) -> Result<LogSigned> {
    if l > crate::sppm::HS_DIM_MAX {
        return Err(Error::Capacity(format!(
            "enumeration ceiling is L = {}",
            crate::sppm::HS_DIM_MAX
        )));
    }
    Ok(sppm_exact(&laplacian_matrix(l)?, n)?.value)
}

/// Up-cluster sizes of the kept-index set on a ring of length `l`; `None`
/// when the set wraps the whole ring (the full Laplacian is singular, so
/// that term carries zero weight).
fn ring_clusters(mask: u64, l: usize) -> Option<Vec<usize>> {
    if mask == (1u64 << l) - 1 {
        return None;
    }
    if mask == 0 {
        return Some(Vec::new());
    }
    // rotate so position 0 is absent, then split runs
    let mut start = 0usize;
    while mask >> start & 1 == 1 {
        start += 1;
    }
    let mut sizes = Vec::new();
    let mut run = 0usize;
    for k in 0..l {
        let bit = mask >> ((start + k) % l) & 1;
        if bit == 1 {
            run += 1;
        } else if run > 0 {
            sizes.push(run);
            run = 0;
        }
    }
    if run > 0 {
        sizes.push(run);
    }
    Some(sizes)
}

/// Energy `E_I = -sum ln(s+1)` over up-clusters; `None` for the full ring.
fn config_energy(mask: u64, l: usize) -> Option<f64> {
    ring_clusters(mask, l).map(|sizes| -sizes.iter().map(|&s| ((s + 1) as f64).ln()).sum::<f64>())
}

/// All integer partitions of `total`, each as a multiset `(part, count)`.
fn partitions(total: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(remaining: usize, max_part: usize, acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if remaining == 0 {
            out.push(acc.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            let max_count = remaining / part;
            for count in (1..=max_count).rev() {
                acc.push((part, count));
                rec(remaining - part * count, part - 1, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut acc = Vec::new();
    rec(total, total, &mut acc, &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Z(n, L)` via cluster combinatorics: configurations are counted by
/// `N_closed = (2L / (m+ + m-)) m+! m-! / (prod m_s+! prod m_s-!)`
/// and weighted by `exp(-n E)`. Works for any real power `n >= 0`.
pub fn z_cluster_formula(l: usize, n: f64) -> Result<LogSigned> {
    if l < 3 {
        return Err(Error::Input(format!("chain length {l} < 3")));
    }
    if l > 40 {
        return Err(Error::Capacity("cluster formula capped at L = 40".into()));
    }
    // all-absent: one up-free configuration of weight 1 (empty minor);
    // all-present wraps the ring and has determinant 0
    let mut total = LogSigned::ONE;
    let parts_by_total: Vec<Vec<Vec<(usize, usize)>>> =
        (0..=l).map(partitions).collect();
    for up_total in 1..l {
        let down_total = l - up_total;
        for up in &parts_by_total[up_total] {
            let m_plus: usize = up.iter().map(|&(_, c)| c).sum();
            let log_weight: f64 = up
                .iter()
                .map(|&(s, c)| n * c as f64 * ((s + 1) as f64).ln())
                .sum();
            let up_sym: f64 = up.iter().map(|&(_, c)| factorial(c)).product();
            for down in &parts_by_total[down_total] {
                let m_minus: usize = down.iter().map(|&(_, c)| c).sum();
                if m_minus != m_plus {
                    continue;
                }
                let down_sym: f64 = down.iter().map(|&(_, c)| factorial(c)).product();
                // (2L / 2m) m! m! / (sym+ sym-) = L (m-1)! m! / (sym+ sym-)
                let count = l as f64 * factorial(m_plus - 1) * factorial(m_plus)
                    / (up_sym * down_sym);
                total = total.add(&LogSigned::new(count.ln() + log_weight, 0.0));
            }
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// generating function and thermodynamics

/// Truncated series `sum_{s>=1} s^k e^{-mu s} (s+1)^n [ln(s+1)]^p`;
/// truncation when a term drops below 1e-16 of the partial sum.
struct Series {
    mu: f64,
    n: f64,
    /// largest retained cluster size
    l_max: usize,
}

impl Series {
    fn new(mu: f64, n: f64) -> Self {
        Self { mu, n, l_max: 0 }
    }

    fn eval(&mut self, k: u32, p: u32) -> f64 {
        let mut acc = 0.0f64;
        let mut s = 1usize;
        loop {
            let sf = s as f64;
            let term = sf.powi(k as i32)
                * (-self.mu * sf).exp()
                * ((sf + 1.0).ln() * self.n).exp()
                * (sf + 1.0).ln().powi(p as i32);
            acc += term;
            if term.abs() < 1e-16 * acc.abs().max(1e-300) && s > 4 {
                break;
            }
            s += 1;
            if s > 100_000 {
                break;
            }
        }
        self.l_max = self.l_max.max(s);
        acc
    }
}

/// Value and first derivatives of the generating function
/// `G(n, mu) = 1/(1 - e^-mu) + d/dmu ln(1 - W)` with
/// `W = sum_s e^{-mu s}(s+1)^n / (e^mu - 1)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenFnEval {
    pub g: f64,
    pub dg_dmu: f64,
    pub dg_dn: f64,
    /// `<L> = -d ln G / d mu`
    pub mean_size: f64,
    /// `<E> = -d ln G / d n`
    pub mean_energy: f64,
    pub l_max: usize,
}

pub fn generating_function(n: f64, mu: f64) -> Result<GenFnEval> {
    if n < 0.0 {
        return Err(Error::Input("power n must be >= 0".into()));
    }
    let mu_th = mu_threshold(n)?;
    if mu <= mu_th {
        return Err(Error::Domain { mu, mu_th });
    }
    let mut series = Series::new(mu, n);
    let s0 = series.eval(0, 0);
    let s1 = series.eval(1, 0);
    let s2 = series.eval(2, 0);
    let t0 = series.eval(0, 1);
    let t1 = series.eval(1, 1);
    let emu = mu.exp();
    let g_denom = emu - 1.0;
    let w = s0 / g_denom;
    let n1 = -s1 * g_denom - s0 * emu;
    let w_mu = n1 / (g_denom * g_denom);
    let n1_mu = s2 * g_denom - s0 * emu;
    let w_mumu = (n1_mu * g_denom - 2.0 * n1 * emu) / (g_denom * g_denom * g_denom);
    let w_n = t0 / g_denom;
    let w_n_mu = (-t1 * g_denom - t0 * emu) / (g_denom * g_denom);

    let p = 1.0 / (1.0 - (-mu).exp());
    let p_mu = -(-mu).exp() * p * p;
    let d = 1.0 - w;
    let g = p - w_mu / d;
    let dg_dmu = p_mu - (w_mumu * d + w_mu * w_mu) / (d * d);
    let dg_dn = -(w_n_mu * d + w_mu * w_n) / (d * d);
    Ok(GenFnEval {
        g,
        dg_dmu,
        dg_dn,
        mean_size: -dg_dmu / g,
        mean_energy: -dg_dn / g,
        l_max: series.l_max,
    })
}

/// Threshold chemical potential: the root of `W(mu) = 1`, found by
/// bisection to 1e-12. `G` is defined only above it.
pub fn mu_threshold(n: f64) -> Result<f64> {
    let w = |mu: f64| -> f64 {
        let mut s = Series::new(mu, n);
        s.eval(0, 0) / (mu.exp() - 1.0)
    };
    let mut hi = 1.0f64;
    while w(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric("no upper bracket for mu_th".into()));
        }
    }
    let mut lo = hi / 2.0;
    while w(lo) <= 1.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::Numeric("no lower bracket for mu_th".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One point of the forest thermodynamics at inverse temperature `n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThermoPoint {
    pub n: f64,
    pub mu: f64,
    /// grand free energy density `g = -ln G / (n <L>)`
    pub g: f64,
    /// free energy density `f = g - mu/n`
    pub f: f64,
    /// energy density `e = <E>/<L>`
    pub e: f64,
    /// entropy density `s = -n (f - e)`
    pub s: f64,
    pub mean_size: f64,
}

/// Offset used for "thermodynamic limit" evaluations: `mu = mu_th (1 + 1e-6)`.
pub const MU_OFFSET: f64 = 1e-6;

pub fn thermo_point(n: f64) -> Result<ThermoPoint> {
    let mu_th = mu_threshold(n)?;
    let mu = mu_th * (1.0 + MU_OFFSET);
    let ev = generating_function(n, mu)?;
    let g = -ev.g.ln() / (n * ev.mean_size);
    let f = g - mu / n;
    let e = ev.mean_energy / ev.mean_size;
    let s = -n * (f - e);
    Ok(ThermoPoint {
        n,
        mu,
        g,
        f,
        e,
        s,
        mean_size: ev.mean_size,
    })
}

pub fn thermo_curve(n_grid: &[f64]) -> Result<Vec<ThermoPoint>> {
    let points = par::map_slice(n_grid, |&n| thermo_point(n));
    points.into_iter().collect()
}

/// Average number of present clusters per chain site... scaled by `<L>`;
/// reported per size `s` up to the truncation index.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterStats {
    pub n: f64,
    pub mu: f64,
    /// `(cluster size, <m_s+>)` pairs
    pub mean_m_plus: Vec<(usize, f64)>,
    pub truncation: usize,
}

/// `<m_s+> = -(1/G) d/dmu [ e^{-mu(s+1)} (s+1)^n / B ]` with
/// `B = 1 - e^-mu - sum_s' e^{-mu(s'+1)} (s'+1)^n`.
pub fn cluster_distribution(n: f64, mu: f64, max_size: usize) -> Result<ClusterStats> {
    let ev = generating_function(n, mu)?;
    let mut series = Series::new(mu, n);
    let s0 = series.eval(0, 0);
    let s1 = series.eval(1, 0);
    let emu_neg = (-mu).exp();
    // B = 1 - e^-mu - e^-mu * S0; B' = e^-mu + e^-mu (S0 + S1)
    let b = 1.0 - emu_neg - emu_neg * s0;
    let b_mu = emu_neg + emu_neg * (s0 + s1);
    let mut out = Vec::with_capacity(max_size);
    for s in 1..=max_size {
        let sf = s as f64;
        let a = (-(sf + 1.0) * mu).exp() * ((sf + 1.0).ln() * n).exp();
        let a_mu = -(sf + 1.0) * a;
        let r_mu = (a_mu * b - a * b_mu) / (b * b);
        out.push((s, -r_mu / ev.g));
    }
    Ok(ClusterStats {
        n,
        mu,
        mean_m_plus: out,
        truncation: series.l_max,
    })
}

// ---------------------------------------------------------------------------
// ground states

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GroundStateCensus {
    pub l: usize,
    pub num_ground_states: u64,
    pub num_clusters: u64,
    /// entropy density `ln(N_states)/L`
    pub entropy: f64,
    /// complexity `ln(N_clusters)/L`
    pub complexity: f64,
    /// counts predicted by the mod-3 case formulas
    pub formula_states: u64,
    pub formula_clusters: u64,
}

/// The closed-form count of isolated dimer coverings in the `L = 1 mod 3`
/// case: `X = sum_{i=1}^{L/10} [ L 1(5i < L/2) + (L/2) 1(5i = L/2) ]`.
pub fn x_count(l: usize) -> u64 {
    let mut x = 0u64;
    for i in 1..=(l / 10) {
        if 10 * i < l {
            x += l as u64;
        } else if 10 * i == l {
            x += (l / 2) as u64;
        }
    }
    x
}

/// Predicted `(num_ground_states, num_clusters)` from the mod-3 cases.
pub fn census_formula(l: usize) -> (u64, u64) {
    match l % 3 {
        0 => (3, 3),
        2 => (l as u64, l as u64),
        _ => {
            let x = x_count(l);
            (2 * l as u64 + x, l as u64 + x)
        }
    }
}

/// Exhaustive search for maximal-determinant index configurations, grouped
/// into Hamming-distance-1 clusters.
pub fn ground_state_census(l: usize) -> Result<GroundStateCensus> {
    if !(3..=16).contains(&l) {
        return Err(Error::Capacity(format!(
            "census enumerates 2^L configurations; L = {l} outside 3..=16"
        )));
    }
    let total = 1u64 << l;
    // min energy = max determinant; energies are exact sums of ln(s+1)
    let mut best = f64::INFINITY;
    let mut energies: Vec<f64> = Vec::with_capacity(total as usize);
    for mask in 0..total {
        let e = config_energy(mask, l).unwrap_or(f64::INFINITY);
        if e < best {
            best = e;
        }
        energies.push(e);
    }
    let ground: Vec<u64> = (0..total)
        .filter(|&m| (energies[m as usize] - best).abs() <= 1e-9)
        .collect();
    // union-find over Hamming-1 pairs
    let mut parent: Vec<usize> = (0..ground.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = i;
        while parent[c] != c {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    let index_of: std::collections::HashMap<u64, usize> = ground
        .iter()
        .enumerate()
        .map(|(i, &m)| (m, i))
        .collect();
    for (i, &m) in ground.iter().enumerate() {
        for bit in 0..l {
            let neighbor = m ^ (1 << bit);
            if let Some(&j) = index_of.get(&neighbor) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut roots = std::collections::HashSet::new();
    for i in 0..ground.len() {
        let r = find(&mut parent, i);
        roots.insert(r);
    }
    let (formula_states, formula_clusters) = census_formula(l);
    Ok(GroundStateCensus {
        l,
        num_ground_states: ground.len() as u64,
        num_clusters: roots.len() as u64,
        entropy: (ground.len() as f64).ln() / l as f64,
        complexity: (roots.len() as f64).ln() / l as f64,
        formula_states,
        formula_clusters,
    })
}

// ---------------------------------------------------------------------------
// mean-field benchmark

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MfBenchmark {
    /// Real roots of `Delta1^3 (Delta1 + 4) = 1`, stable first.
    pub delta1_roots: [f64; 2],
    /// Free energy density at the stable root (the `e^{-2 f L}` convention).
    pub f_mf: f64,
    /// O(1) offset `beta = ln Delta1^2`.
    pub beta_mf: f64,
}

/// Root-find the thermodynamic self-consistency `Delta1^3 (Delta1 + 4) = 1`
/// and evaluate the closed-form free energy
/// `f = -ln[(Delta1 + 2 + sqrt(Delta1 (Delta1 + 4))) / 2] + Delta1^2 / 2`.
pub fn laplacian_mf_benchmark() -> MfBenchmark {
    let p = |d: f64| d * d * d * (d + 4.0) - 1.0;
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(lo) * p(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let stable = bisect(0.5, 0.7);
    let unstable = bisect(-4.1, -4.0);
    let f_mf = -((stable + 2.0 + (stable * (stable + 4.0)).sqrt()) / 2.0).ln()
        + 0.5 * stable * stable;
    let beta_mf = 2.0 * stable.ln();
    MfBenchmark {
        delta1_roots: [stable, unstable],
        f_mf,
        beta_mf,
    }
}

/// Thermodynamic-limit mean-field solve on the Laplacian symbol; the
/// quadrature route to the same roots.
pub fn laplacian_mf_thermo(init: f64) -> Result<meanfield::MFThermo> {
    meanfield::mf_thermo(
        |q: f64| Complex64::new(4.0 * (q / 2.0).sin().powi(2), 0.0),
        meanfield::MFState::new(init, 0.0, 0.0),
        &meanfield::MFParams {
            damping: if init > 0.0 { 0.5 } else { 0.002 },
            ..Default::default()
        },
    )
}
