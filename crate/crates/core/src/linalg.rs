//! Dense complex linear algebra helpers built on `faer`.
//!
//! States are plain `Vec<C64>` slices; operators are column-major
//! `faer::Mat<C64>`.

use faer::{Mat, MatRef, Side};

use crate::{Error, Result, C64};

pub fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut out = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

/// `s·A`.
pub fn scale(m: MatRef<'_, C64>, s: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * s)
}

/// Largest entry of `A - A†`.
pub fn hermiticity_residual(m: MatRef<'_, C64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    let mut out = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

/// Largest entry of `U†U - 1`.
pub fn unitarity_residual(m: MatRef<'_, C64>) -> f64 {
    let prod = m.adjoint() * m;
    let n = prod.nrows();
    let mut out = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            out = out.max((prod[(i, j)] - target).norm());
        }
    }
    out
}

pub fn is_real(m: MatRef<'_, C64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

pub fn commutator(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    a * b - b * a
}

pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<C64>,
}

/// Dense Hermitian eigensolve. Real symmetric input takes the real path,
/// which is about three times faster and yields real eigenvectors.
pub fn hermitian_eigen(m: MatRef<'_, C64>) -> Result<HermitianEigen> {
    assert_eq!(m.nrows(), m.ncols());
    let n = m.nrows();
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values = evd.S().column_vector().iter().copied().collect();
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| C64::new(u[(i, j)], 0.0));
        Ok(HermitianEigen { values, vectors })
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values = evd.S().column_vector().iter().map(|z| z.re).collect();
        Ok(HermitianEigen { values, vectors: evd.U().to_owned() })
    }
}

pub fn hermitian_eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))
    } else {
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))
    }
}

/// `exp(-i·angle·G)` for Hermitian `G`, via its spectral decomposition.
pub fn expm_hermitian(generator: MatRef<'_, C64>, angle: f64) -> Result<Mat<C64>> {
    let evd = hermitian_eigen(generator)?;
    Ok(spectral_function(&evd, |g| C64::from_polar(1.0, -angle * g)))
}

/// `Σ f(λ_i) |v_i⟩⟨v_i|`.
pub fn spectral_function(evd: &HermitianEigen, f: impl Fn(f64) -> C64) -> Mat<C64> {
    let n = evd.values.len();
    let scaled = Mat::from_fn(n, n, |i, k| evd.vectors[(i, k)] * f(evd.values[k]));
    &scaled * evd.vectors.adjoint()
}

pub fn mat_vec(m: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

/// `M† v`.
pub fn adjoint_mat_vec(m: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| {
            let col = m.col(j);
            let mut acc = C64::new(0.0, 0.0);
            for (i, &vi) in v.iter().enumerate() {
                acc += col[i].conj() * vi;
            }
            acc
        })
        .collect()
}

/// Matrix-free linear map on `C^n`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// Dense matrix, built column by column from `apply`.
    fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut out = Mat::<C64>::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for (i, v) in col.iter().enumerate() {
                out[(i, j)] = *v;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        out
    }
}

impl LinearOperator for Mat<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&mat_vec(self.as_ref(), x));
    }

    fn to_dense(&self) -> Mat<C64> {
        self.clone()
    }
}

/// `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales `v` to unit norm and returns the original norm.
pub fn normalize(v: &mut [C64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|z| *z *= inv);
    }
    n
}

/// `⟨v|A|v⟩`.
pub fn expectation(op: MatRef<'_, C64>, v: &[C64]) -> C64 {
    inner(v, &mat_vec(op, v))
}

/// `|⟨a|b⟩|²` for unit vectors.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm_sqr()
}
