//! Small dense complex Hermitian linear algebra.
//!
//! Everything here operates on orders of a few dozen at most, so plain dense
//! storage is used throughout. Eigendecompositions are delegated to
//! `nalgebra`'s Hermitian tridiagonal QR routine.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex column vector (channels `h_k`, beamformers `v_k`).
pub type ComplexVector = DVector<C64>;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// A complex Hermitian matrix. Construction enforces `A = A^H` exactly by
/// averaging with the conjugate transpose, so the diagonal is always real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    /// Wraps `m` after checking it is square, finite and Hermitian to a
    /// relative `1e-10`; the stored matrix is the exact Hermitian part.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        let scale = 1.0 + frobenius(&m);
        let asym = frobenius(&(&m - m.adjoint()));
        if asym > 1e-10 * scale {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian (‖A − Aᴴ‖_F = {asym:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Returns `(A + A^H) / 2` without checking how far `m` was from Hermitian.
    pub fn symmetrized(m: DMatrix<C64>) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self(h)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self(m)
    }

    /// `v v^H`.
    pub fn outer(v: &ComplexVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    /// Builds from a real symmetric matrix.
    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Real diagonal entry `A^{(i,i)}`.
    pub fn diag(&self, i: usize) -> f64 {
        self.0[(i, i)].re
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.diag(i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.0)
    }

    /// `x^H A x`, real for Hermitian `A`.
    pub fn quad_form(&self, x: &ComplexVector) -> f64 {
        (x.adjoint() * &self.0 * x)[(0, 0)].re
    }

    /// Real inner product `Re tr(A B)` (both Hermitian).
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Principal submatrix on indices `start..`.
    pub fn trailing_block(&self, start: usize) -> HermitianMatrix {
        let n = self.order() - start;
        Self(self.0.view((start, start), (n, n)).into_owned())
    }

    pub fn scale(&self, c: f64) -> HermitianMatrix {
        Self(&self.0 * C64::new(c, 0.0))
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        Self(&self.0 - &other.0)
    }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.order())
            .map(|i| {
                (0..self.order())
                    .map(|j| {
                        let z = self.0[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("Hermitian matrix must be square"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
        HermitianMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition `A = U diag(λ) U^H` with `λ` sorted descending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Unitary; column `i` pairs with `values[i]`.
    pub vectors: DMatrix<C64>,
}

impl Eigh {
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let mut col = scaled.column_mut(j);
            col *= C64::new(self.values[j], 0.0);
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eigh(a: &HermitianMatrix) -> Result<Eigh> {
    check_finite(&a.0)?;
    let n = a.order();
    if n == 0 {
        return Ok(Eigh {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = a.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

/// Result of a Schur complement evaluation; `regularized` is set when the
/// trailing block had to be jittered to be inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurComplement {
    pub value: f64,
    pub regularized: bool,
}

/// `Q^{(m:M,m:M)} / Q^{(m+1:M,m+1:M)}` for a 0-based index `m`: the
/// conditional variance of entry `m` given all later entries. For the last
/// index this is just `Q^{(M,M)}`.
///
/// A singular trailing block gets diagonal jitter `1e-12·tr(Q)/M` and the
/// result is flagged.
pub fn trailing_schur_complement(q: &HermitianMatrix, m: usize) -> Result<SchurComplement> {
    let n = q.order();
    if m >= n {
        return Err(Error::IndexOutOfRange {
            what: "Schur complement",
            index: m,
            len: n,
        });
    }
    check_finite(&q.0)?;
    let head = q.0[(m, m)].re;
    if m + 1 == n {
        return Ok(SchurComplement {
            value: head,
            regularized: false,
        });
    }
    let tail = q.0.view((m + 1, m + 1), (n - m - 1, n - m - 1)).into_owned();
    let col = q.0.view((m + 1, m), (n - m - 1, 1)).into_owned();

    let solve = |t: DMatrix<C64>| -> Option<f64> {
        let chol = t.cholesky()?;
        let x = chol.solve(&col);
        let corr = (col.adjoint() * x)[(0, 0)].re;
        Some(head - corr)
    };

    if let Some(value) = well_conditioned(&tail).then(|| solve(tail.clone())).flatten() {
        return Ok(SchurComplement {
            value,
            regularized: false,
        });
    }
    let jitter = 1e-12 * q.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut reg = tail;
    for i in 0..reg.nrows() {
        reg[(i, i)] += C64::new(jitter, 0.0);
    }
    let value = solve(reg).unwrap_or(0.0);
    Ok(SchurComplement {
        value,
        regularized: true,
    })
}

// Cholesky succeeds on numerically singular PSD blocks with garbage pivots;
// reject pivots below a relative floor so those go through the jitter path.
fn well_conditioned(t: &DMatrix<C64>) -> bool {
    let Some(chol) = t.clone().cholesky() else {
        return false;
    };
    let l = chol.l();
    let max_diag = (0..t.nrows()).map(|i| t[(i, i)].re).fold(0.0, f64::max);
    let floor = 1e-14 * max_diag.max(f64::MIN_POSITIVE);
    (0..l.nrows()).all(|i| {
        let p = l[(i, i)].re;
        p * p > floor
    })
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_project(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let mut e = eigh(a)?;
    for v in e.values.iter_mut() {
        *v = v.max(0.0);
    }
    Ok(HermitianMatrix::symmetrized(e.reconstruct()))
}

/// Isometric real parameterization of an order-`n` Hermitian matrix as `n²`
/// reals: row by row, the diagonal entry followed by `√2·Re` and `√2·Im` of
/// each strictly-upper entry.
pub fn hermitian_vec(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.order();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(a.0[(i, i)].re);
        for j in i + 1..n {
            let z = a.0[(i, j)];
            out.push(s2 * z.re);
            out.push(s2 * z.im);
        }
    }
    out
}

pub fn hermitian_unvec(x: &[f64], n: usize) -> Result<HermitianMatrix> {
    if x.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "hermitian_unvec",
            expected: n * n,
            got: x.len(),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut it = x.iter();
    for i in 0..n {
        m[(i, i)] = C64::new(*it.next().unwrap(), 0.0);
        for j in i + 1..n {
            let re = *it.next().unwrap() * FRAC_1_SQRT_2;
            let im = *it.next().unwrap() * FRAC_1_SQRT_2;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    Ok(HermitianMatrix(m))
}

/// Position of the diagonal entry `(i, i)` inside [`hermitian_vec`].
pub fn hvec_diag_index(n: usize, i: usize) -> usize {
    // rows 0..i contribute 1 + 2(n-1-r) entries each
    (0..i).map(|r| 1 + 2 * (n - 1 - r)).sum()
}

/// Positions of `(√2·Re, √2·Im)` of entry `(i, j)`, `i < j`, inside
/// [`hermitian_vec`].
pub fn hvec_offdiag_index(n: usize, i: usize, j: usize) -> (usize, usize) {
    debug_assert!(i < j && j < n);
    let base = hvec_diag_index(n, i) + 1 + 2 * (j - i - 1);
    (base, base + 1)
}

/// Real symmetric embedding `[[Re A, −Im A], [Im A, Re A]]` of order `2n`.
/// Every eigenvalue of `A` appears twice in the embedding.
pub fn real_embed(a: &HermitianMatrix) -> DMatrix<f64> {
    let n = a.order();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a.0[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`real_embed`], averaging the redundant copies so any real
/// symmetric matrix of even order maps to the nearest embedded one.
pub fn real_unembed(e: &DMatrix<f64>) -> Result<HermitianMatrix> {
    if e.nrows() != e.ncols() || !e.nrows().is_multiple_of(2) {
        return Err(Error::invalid("real embedding must be square of even order"));
    }
    let n = e.nrows() / 2;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (e[(i, j)] + e[(i + n, j + n)]);
        let im = 0.5 * (e[(i + n, j)] - e[(i, j + n)]);
        C64::new(re, im)
    });
    Ok(HermitianMatrix::symmetrized(m))
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_square(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "square matrix",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(())
}

fn check_finite(m: &DMatrix<C64>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("Hermitian matrix"))
    }
}
