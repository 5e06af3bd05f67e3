//! Dense linear-algebra kernels: matrix exponential, Lyapunov solvers,
//! spectral classification and block-exponential integrals.
//!
//! Everything here works on [`Matrix`] (`nalgebra::DMatrix<f64>`) and is a
//! pure function of its inputs.

use nalgebra::{linalg::Schur, Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for the stable / Sylvester classification.
pub const SPECTRUM_TOL: f64 = 1e-9;

// Diagonal [13/13] Pade coefficients and the matching 1-norm bound (Higham 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension(format!("{what} must be non-empty")));
    }
    Ok(())
}

pub(crate) fn ensure_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub(crate) fn ensure_finite_scalar(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `A + shift * I`.
pub fn shifted(a: &Matrix, shift: f64) -> Matrix {
    let mut out = a.clone();
    for i in 0..a.nrows().min(a.ncols()) {
        out[(i, i)] += shift;
    }
    out
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// Symmetry test relative to the matrix scale.
pub fn is_symmetric(m: &Matrix, rtol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rtol * scale
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A t}` by scaling and squaring with the diagonal [13/13] Pade approximant.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a, "exponent matrix")?;
    ensure_finite(a, "exponent matrix")?;
    ensure_finite_scalar(t, "exponent time")?;
    let n = a.nrows();
    if t == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let at = a * t;
    let norm = norm1(&at);
    if norm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = at * 0.5f64.powi(s);

    let b = &PADE13;
    let id = Matrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numerical("singular Pade denominator in matrix exponential".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::Accuracy(format!(
            "matrix exponential overflowed (||A t||_1 = {norm:.3e})"
        )));
    }
    Ok(r)
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>> {
    ensure_square(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numerical(format!(
            "Schur iteration did not converge for {}x{} matrix (max |a_ij| = {:.3e})",
            a.nrows(),
            a.ncols(),
            a.amax()
        ))
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    pub is_stable: bool,
    pub is_sylvester: bool,
    pub tolerance_used: f64,
}

impl SpectrumReport {
    /// First eigenvalue pair (possibly the same eigenvalue twice) with `lambda_i = -lambda_j`.
    pub fn sylvester_violation(&self) -> Option<(Complex<f64>, Complex<f64>)> {
        sylvester_violation(&self.eigenvalues, self.tolerance_used)
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sylvester_violation(eigs: &[Complex<f64>], tol: f64) -> Option<(Complex<f64>, Complex<f64>)> {
    for (i, li) in eigs.iter().enumerate() {
        for lj in &eigs[i..] {
            if (li + lj).norm() <= tol * (1.0 + li.norm() + lj.norm()) {
                return Some((*li, *lj));
            }
        }
    }
    None
}

pub fn classify_spectrum(a: &Matrix, tol: f64) -> Result<SpectrumReport> {
    let eigs = eigenvalues(a)?;
    let is_stable = eigs.iter().all(|l| l.re < -tol);
    let is_sylvester = sylvester_violation(&eigs, tol).is_none();
    Ok(SpectrumReport {
        eigenvalues: eigs,
        is_stable,
        is_sylvester,
        tolerance_used: tol,
    })
}

pub fn is_sylvester(a: &Matrix) -> Result<bool> {
    Ok(classify_spectrum(a, SPECTRUM_TOL)?.is_sylvester)
}

pub fn is_stable(a: &Matrix) -> Result<bool> {
    Ok(classify_spectrum(a, SPECTRUM_TOL)?.is_stable)
}

/// Solves `A X + X A^T + Q = 0`.
///
/// The equation is vectorized as `(I (x) A + A (x) I) vec(X) = -vec(Q)` and
/// solved by dense LU. A symmetric `Q` yields an exactly symmetric `X`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "Lyapunov drift")?;
    let n = a.nrows();
    ensure_shape(q, n, n, "Lyapunov right-hand side")?;
    ensure_finite(q, "Lyapunov right-hand side")?;

    let spectrum = classify_spectrum(a, SPECTRUM_TOL)?;
    if let Some((lambda_i, lambda_j)) = spectrum.sylvester_violation() {
        return Err(Error::NotSylvester { lambda_i, lambda_j });
    }

    // Column-major vec: vec(AX) = (I (x) A) vec(X), vec(XA^T) = (A (x) I) vec(X).
    let nn = n * n;
    let mut op = Matrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            for k in 0..n {
                op[(row, k + j * n)] += a[(i, k)];
                op[(row, i + k * n)] += a[(j, k)];
            }
        }
    }
    let rhs = Vector::from_iterator(nn, q.iter().map(|x| -x));
    let sol = op.lu().solve(&rhs).ok_or_else(|| {
        Error::Numerical("Kronecker Lyapunov operator is numerically singular".into())
    })?;
    let x = Matrix::from_column_slice(n, n, sol.as_slice());
    ensure_finite(&x, "Lyapunov solution")?;
    if is_symmetric(q, 0.0) {
        Ok(symmetrize(&x))
    } else {
        Ok(x)
    }
}

/// Solves `A^T X + X A + Q = 0`.
pub fn solve_lyapunov_transposed(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    solve_lyapunov(&a.transpose(), q)
}

/// `int_{t1}^{t2} e^{A t} Q e^{A^T t} dt` from the infinite-horizon solution
/// `X` as `e^{A t1} X e^{A^T t1} - e^{A t2} X e^{A^T t2}`.
pub fn lyap_finite(a: &Matrix, q: &Matrix, t1: f64, t2: f64) -> Result<Matrix> {
    let x = solve_lyapunov(a, q)?;
    lyap_finite_from_solution(a, &x, t1, t2)
}

/// Same as [`lyap_finite`] but reuses an already computed solution of `A X + X A^T + Q = 0`.
pub fn lyap_finite_from_solution(a: &Matrix, x: &Matrix, t1: f64, t2: f64) -> Result<Matrix> {
    if !(t1 >= 0.0 && t2 >= t1) {
        return Err(Error::Contract(format!(
            "finite-interval Lyapunov integral needs 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    let n = a.nrows();
    if t1 == t2 {
        return Ok(Matrix::zeros(n, n));
    }
    let term = |t: f64| -> Result<Matrix> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let e = mat_exp(a, t)?;
        Ok(&e * x * e.transpose())
    };
    let out = term(t1)? - term(t2)?;
    if is_symmetric(x, 0.0) {
        Ok(symmetrize(&out))
    } else {
        Ok(out)
    }
}

/// `int_0^T e^{A1 (T - t)} Q e^{A2 t} dt`, read off as the upper-right block of
/// `exp([[A1, Q], [0, A2]] T)`.
pub fn van_loan_integral(a1: &Matrix, q: &Matrix, a2: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a1, "first block drift")?;
    ensure_square(a2, "second block drift")?;
    let (n1, n2) = (a1.nrows(), a2.nrows());
    ensure_shape(q, n1, n2, "coupling block")?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::Contract(format!(
            "integration horizon must be >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(Matrix::zeros(n1, n2));
    }
    let mut block = Matrix::zeros(n1 + n2, n1 + n2);
    block.view_mut((0, 0), (n1, n1)).copy_from(a1);
    block.view_mut((0, n1), (n1, n2)).copy_from(q);
    block.view_mut((n1, n1), (n2, n2)).copy_from(a2);
    let e = mat_exp(&block, t)?;
    Ok(e.view((0, n1), (n1, n2)).into_owned())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Square root `L` with `L L^T = M` of a symmetric PSD matrix; eigenvalues
/// below `clamp_tol` (absolute) are set to zero.
pub fn psd_sqrt(m: &Matrix, clamp_tol: f64) -> Result<Matrix> {
    ensure_square(m, "PSD matrix")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.amax().max(1.0);
    if let Some(bad) = eig
        .eigenvalues
        .iter()
        .find(|&&l| l < -clamp_tol.max(1e-10 * scale))
    {
        return Err(Error::Contract(format!(
            "matrix is not positive semidefinite (eigenvalue {bad:.3e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| if l > clamp_tol { l.sqrt() } else { 0.0 });
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&roots))
}
