//! Dense complex square matrices and the small set of linear-algebra
//! primitives the rest of the crate consumes: LU determinants in the log
//! domain, inverses, Pfaffians and circulant symbols.

use crate::logsigned::LogSigned;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Dense `l x l` complex matrix, row-major.
///
/// Indices are 1-based in documentation and error messages, 0-based in code.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("matrix dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Input(format!(
                "expected {} entries for dim {}, got {}",
                dim * dim,
                dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input("matrix entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    /// 0x0 matrix used for the empty principal minor (determinant 1).
    pub fn empty() -> Self {
        Self {
            dim: 0,
            entries: Vec::new(),
        }
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            dim,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Input("ragged rows in matrix literal".into()));
            }
            entries.extend_from_slice(r);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        };
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| c * z).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    /// `self + c * I`.
    pub fn shift_diag(&self, c: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.entries[i * self.dim + i] += c;
        }
        m
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|A + A^T|` entry; zero for an antisymmetric matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) + self.get(j, i)).norm());
            }
        }
        worst
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.entries.iter().all(|z| z.im.abs() <= tol)
    }

    /// Symmetric part `(A + A^T)/2`.
    pub fn sym_part(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        m
    }

    /// Antisymmetric part `(A - A^T)/2`.
    pub fn asym_part(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, 0.5 * (self.get(i, j) - self.get(j, i)));
            }
        }
        m
    }
}

/// Subset of `{1..l}` stored as a bitmask with a cached popcount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexSubset {
    mask: u64,
    card: u32,
}

impl IndexSubset {
    pub fn from_mask(mask: u64) -> Self {
        Self {
            mask,
            card: mask.count_ones(),
        }
    }

    pub fn empty() -> Self {
        Self::from_mask(0)
    }

    pub fn full(dim: usize) -> Self {
        debug_assert!(dim <= 63);
        Self::from_mask((1u64 << dim) - 1)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn card(&self) -> usize {
        self.card as usize
    }

    pub fn contains(&self, index0: usize) -> bool {
        self.mask >> index0 & 1 == 1
    }

    /// Kept 0-based indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.card());
        let mut m = self.mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            out.push(i);
            m &= m - 1;
        }
        out
    }

    pub fn in_range(&self, dim: usize) -> bool {
        dim >= 64 || self.mask >> dim == 0
    }
}

/// Rows and columns in `subset` retained in ascending order; the empty subset
/// yields the 0x0 matrix whose determinant is 1 by convention.
pub fn principal_submatrix(m: &SquareMatrix, subset: IndexSubset) -> Result<SquareMatrix> {
    if !subset.in_range(m.dim()) {
        return Err(Error::Input(format!(
            "subset mask {:#x} has bits outside 1..{}",
            subset.mask(),
            m.dim()
        )));
    }
    let idx = subset.indices();
    if idx.is_empty() {
        return Ok(SquareMatrix::empty());
    }
    let k = idx.len();
    let mut entries = Vec::with_capacity(k * k);
    for &i in &idx {
        for &j in &idx {
            entries.push(m.get(i, j));
        }
    }
    Ok(SquareMatrix {
        dim: k,
        entries,
    })
}

/// In-place LU determinant on a scratch buffer; returns the log-domain value.
/// `n = 0` returns 1 (empty minor convention).
pub fn det_lu_scratch(buf: &mut [Complex64], n: usize) -> LogSigned {
    if n == 0 {
        return LogSigned::ONE;
    }
    let mut log_mag = 0.0f64;
    let mut phase = LogSigned::ONE;
    for k in 0..n {
        // partial pivoting on |.|
        let mut piv = k;
        let mut best = buf[k * n + k].norm_sqr();
        for i in (k + 1)..n {
            let v = buf[i * n + k].norm_sqr();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return LogSigned::ZERO;
        }
        if piv != k {
            for j in 0..n {
                buf.swap(k * n + j, piv * n + j);
            }
            phase = phase.neg();
        }
        let pivot = buf[k * n + k];
        log_mag += pivot.norm().ln();
        phase = phase.mul(&LogSigned::from_complex(pivot / pivot.norm()));
        let inv = Complex64::new(1.0, 0.0) / pivot;
        for i in (k + 1)..n {
            let f = buf[i * n + k] * inv;
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            buf[i * n + k] = f;
            for j in (k + 1)..n {
                let v = buf[k * n + j];
                buf[i * n + j] -= f * v;
            }
        }
    }
    LogSigned::new(log_mag + phase.log_mag, phase.phase)
}

/// Determinant via LU with partial pivoting, accumulated in the log domain.
/// Exactly singular input returns the zero sentinel.
pub fn det_lu(m: &SquareMatrix) -> LogSigned {
    if m.dim == 0 {
        return LogSigned::ONE;
    }
    let mut buf = m.entries.clone();
    det_lu_scratch(&mut buf, m.dim)
}

/// Inverse via Gauss-Jordan with partial pivoting.
pub fn inverse(m: &SquareMatrix) -> Result<SquareMatrix> {
    let n = m.dim;
    let mut a = m.entries.clone();
    let mut inv = SquareMatrix::identity(n).entries;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].norm_sqr();
        for i in (k + 1)..n {
            let v = a[i * n + k].norm_sqr();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Err(Error::Numeric("singular matrix in inverse".into()));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
                inv.swap(k * n + j, piv * n + j);
            }
        }
        let d = Complex64::new(1.0, 0.0) / a[k * n + k];
        for j in 0..n {
            a[k * n + j] *= d;
            inv[k * n + j] *= d;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i * n + k];
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let ak = a[k * n + j];
                let ik = inv[k * n + j];
                a[i * n + j] -= f * ak;
                inv[i * n + j] -= f * ik;
            }
        }
    }
    SquareMatrix::new(n, inv)
}

/// Pfaffian of an antisymmetric matrix via skew-symmetric tridiagonalization
/// with partial pivoting (Parlett-Reid), sign tracked through row swaps.
///
/// Odd dimension returns the zero sentinel. Asymmetry beyond `tol` is an
/// input error.
pub fn pfaffian(m: &SquareMatrix, tol: f64) -> Result<LogSigned> {
    let n = m.dim;
    let asym = m.max_asymmetry();
    if asym > tol {
        return Err(Error::Input(format!(
            "matrix is not antisymmetric: max |A + A^T| entry {asym:.3e} exceeds {tol:.1e}"
        )));
    }
    if n % 2 == 1 {
        return Ok(LogSigned::ZERO);
    }
    let mut a = m.entries.clone();
    // exact skew-symmetrization so elimination preserves structure
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] - a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = -v;
        }
        a[i * n + i] = Complex64::new(0.0, 0.0);
    }
    let mut value = LogSigned::ONE;
    for k in (0..n - 1).step_by(2) {
        // pivot: largest |a[i][k]| for i > k
        let mut piv = k + 1;
        let mut best = a[(k + 1) * n + k].norm_sqr();
        for i in (k + 2)..n {
            let v = a[i * n + k].norm_sqr();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Ok(LogSigned::ZERO);
        }
        if piv != k + 1 {
            for j in 0..n {
                a.swap((k + 1) * n + j, piv * n + j);
            }
            for i in 0..n {
                a.swap(i * n + k + 1, i * n + piv);
            }
            value = value.neg();
        }
        let pivot = a[(k + 1) * n + k];
        value = value.mul(&LogSigned::from_complex(-pivot)); // Pf factor a[k][k+1]
        let inv = Complex64::new(1.0, 0.0) / pivot;
        for i in (k + 2)..n {
            let f = a[i * n + k] * inv;
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            // row/col update keeping skew symmetry: A -= f * (e_i r^T - r e_i^T)
            for j in 0..n {
                let r = a[(k + 1) * n + j];
                a[i * n + j] -= f * r;
            }
            for jr in 0..n {
                let r = a[jr * n + k + 1];
                a[jr * n + i] -= f * r;
            }
        }
    }
    Ok(value)
}

/// Momentum offset of a circulant family: plain circulants live at
/// `q_k = 2 pi k / l`, anticirculants at `q_k = 2 pi (k + 1/2) / l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K0 {
    Zero,
    Half,
}

impl K0 {
    pub fn offset(self) -> f64 {
        match self {
            K0::Zero => 0.0,
            K0::Half => 0.5,
        }
    }
}

/// Fourier symbol of a (anti)circulant matrix: the values `A(q_k)` at
/// `q_k = 2 pi (k + k0) / l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantSymbol {
    pub size: usize,
    pub k0: K0,
    pub values: Vec<Complex64>,
}

impl CirculantSymbol {
    pub fn momenta(&self) -> Vec<f64> {
        let l = self.size as f64;
        (0..self.size)
            .map(|k| 2.0 * PI * (k as f64 + self.k0.offset()) / l)
            .collect()
    }

    /// Index of the symbol value at `-q_k` within the momentum set.
    pub fn neg_index(&self, k: usize) -> usize {
        match self.k0 {
            K0::Zero => (self.size - k) % self.size,
            K0::Half => self.size - 1 - k,
        }
    }

    pub fn value_at_neg(&self, k: usize) -> Complex64 {
        self.values[self.neg_index(k)]
    }
}

/// Symbol from the first row: `A(q_k) = sum_j r_j exp(i q_k j)`.
pub fn circulant_symbol(first_row: &[Complex64], k0: K0) -> Result<CirculantSymbol> {
    let l = first_row.len();
    if l == 0 {
        return Err(Error::Input("empty first row".into()));
    }
    let mut values = Vec::with_capacity(l);
    for k in 0..l {
        let q = 2.0 * PI * (k as f64 + k0.offset()) / l as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &r) in first_row.iter().enumerate() {
            acc += r * Complex64::from_polar(1.0, q * j as f64);
        }
        values.push(acc);
    }
    Ok(CirculantSymbol {
        size: l,
        k0,
        values,
    })
}

/// Dense matrix from a symbol: `A_{mn} = (1/l) sum_k A(q_k) exp(-i q_k (n-m))`.
/// The anticirculant sign on wrap-around is automatic from the momenta.
pub fn circulant_dense(sym: &CirculantSymbol) -> SquareMatrix {
    let l = sym.size;
    let momenta = sym.momenta();
    // first "row profile" indexed by n - m in -(l-1)..l
    let mut profile = vec![Complex64::new(0.0, 0.0); 2 * l - 1];
    for (d, p) in profile.iter_mut().enumerate() {
        let delta = d as isize - (l as isize - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &v) in sym.values.iter().enumerate() {
            acc += v * Complex64::from_polar(1.0, -momenta[k] * delta as f64);
        }
        *p = acc / l as f64;
    }
    let mut m = SquareMatrix::zeros(l);
    for i in 0..l {
        for j in 0..l {
            let d = (j as isize - i as isize) + (l as isize - 1);
            m.set(i, j, profile[d as usize]);
        }
    }
    m
}
