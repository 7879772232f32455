//! Dense linear algebra used throughout the crate.
//!
//! Desk-scale only: every routine works on dense `nalgebra` matrices and is
//! a pure function of its inputs, so it can be called from any thread.

mod poly;

pub use poly::{rational_eval, Polynomial};

use nalgebra::linalg::{Schur, SymmetricEigen, LU, SVD};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative threshold below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

/// Condition limit for reducing a pencil `(a, e)` to `e⁻¹a`.
pub const PENCIL_COND_LIMIT: f64 = 1e8;

const MAX_ITER: usize = 10_000;

pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has a non-finite entry".into()))
    }
}

pub fn ensure_finite_real(m: &RMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has a non-finite entry".into()))
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Internal("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Largest singular value.
///
/// Beyond a few rows it is read off the Gram matrix of the smaller side,
/// which is much cheaper than a full SVD and accurate to a few ulps for the
/// largest value.
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows().min(m.ncols()) <= 4 {
        return Ok(singular_values(m)?.first().copied().unwrap_or(0.0));
    }
    ensure_finite(m)?;
    let gram = if m.nrows() >= m.ncols() { m.adjoint() * m } else { m * m.adjoint() };
    let top = hermitian_eigenvalues(&gram)?.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

pub fn spectral_norm_real(m: &RMatrix) -> Result<f64> {
    spectral_norm(&to_complex(m))
}

/// Smallest singular value divided by the largest; 0 for a zero matrix.
pub fn rcond(m: &RMatrix) -> Result<f64> {
    let sv = singular_values(&to_complex(m))?;
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 && sv.len() == m.nrows().min(m.ncols()) => Ok(lo / hi),
        (None, None) => Ok(1.0),
        _ => Ok(0.0),
    }
}

/// Parlett-Reinsch diagonal balancing by powers of two. Eigenvalues are
/// unchanged; the spread of row and column norms is reduced, which keeps
/// the QR iteration accurate on badly scaled inputs such as Hamiltonians.
fn balance(m: &mut RMatrix) {
    let n = m.nrows();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            let g = r * 2.0;
            while c > g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// QR iteration occasionally stalls at machine-precision deflation; loosen
/// the deflation threshold a few times before giving up.
fn schur_with_retry<T>(m: &nalgebra::DMatrix<T>) -> Result<Schur<T, nalgebra::Dyn>>
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    for scale in [1.0, 4.0, 16.0, 64.0, 256.0] {
        if let Some(s) = Schur::try_new(m.clone(), scale * f64::EPSILON, MAX_ITER) {
            return Ok(s);
        }
    }
    Err(Error::Internal("Schur iteration did not converge".into()))
}

/// Eigenvalues of a real square matrix, with multiplicity, unsorted.
pub fn eigenvalues_real(m: &RMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite_real(m)?;
    match m.nrows() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![cplx(m[(0, 0)], 0.0)]),
        _ => {}
    }
    let mut work = m.clone();
    balance(&mut work);
    let schur = schur_with_retry(&work)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a complex square matrix, with multiplicity, unsorted.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m)?;
    if m.iter().all(|z| z.im == 0.0) {
        return eigenvalues_real(&m.map(|z| z.re));
    }
    match m.nrows() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![m[(0, 0)]]),
        _ => {}
    }
    let schur = schur_with_retry(m)?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Eigenvalues of the pencil `(a, e)`, i.e. the roots of `det(λe − a)`.
///
/// Only the reduction `e⁻¹a` is implemented; pencils whose `e` has a
/// condition number beyond [`PENCIL_COND_LIMIT`] are rejected.
pub fn generalized_eigenvalues(a: &CMatrix, e: &CMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() || !e.is_square() || a.nrows() != e.nrows() {
        return Err(Error::Dimension(format!(
            "pencil needs square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            e.nrows(),
            e.ncols()
        )));
    }
    ensure_finite(a)?;
    ensure_finite(e)?;
    let sv = singular_values(e)?;
    let rc = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        (None, None) => 1.0,
        _ => 0.0,
    };
    if rc < 1.0 / PENCIL_COND_LIMIT {
        return Err(Error::SingularPencil { rcond: rc });
    }
    let reduced = solve(e, a).ok_or(Error::SingularPencil { rcond: rc })?;
    eigenvalues(&reduced)
}

pub fn generalized_eigenvalues_real(a: &RMatrix, e: &RMatrix) -> Result<Vec<Complex64>> {
    generalized_eigenvalues(&to_complex(a), &to_complex(e))
}

/// Moore-Penrose pseudoinverse via the SVD; singular values below
/// `PINV_RTOL · σmax` are treated as zero.
pub fn pseudoinverse(m: &CMatrix) -> CMatrix {
    let (r, c) = m.shape();
    if m.is_empty() {
        return CMatrix::zeros(c, r);
    }
    let svd = match SVD::try_new(m.clone(), true, true, f64::EPSILON, MAX_ITER) {
        Some(svd) => svd,
        None => return CMatrix::zeros(c, r),
    };
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return CMatrix::zeros(c, r);
    }
    let cutoff = PINV_RTOL * smax;
    let inv = svd
        .singular_values
        .map(|s| if s > cutoff { Complex64::new(1.0 / s, 0.0) } else { Complex64::new(0.0, 0.0) });
    v_t.adjoint() * CMatrix::from_diagonal(&inv) * u.adjoint()
}

/// Solves `a x = b` by LU with partial pivoting; `None` when `a` is singular.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    if a.nrows() == 0 {
        return Some(CMatrix::zeros(0, b.ncols()));
    }
    let x = LU::new(a.clone()).solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

pub fn solve_real(a: &RMatrix, b: &RMatrix) -> Option<RMatrix> {
    if a.nrows() == 0 {
        return Some(RMatrix::zeros(0, b.ncols()));
    }
    let x = LU::new(a.clone()).solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    ensure_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Internal("Hermitian eigenvalue iteration did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &RMatrix) -> Result<Vec<f64>> {
    ensure_finite_real(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Internal("symmetric eigenvalue iteration did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Sorts complex values by real part, then imaginary part.
pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn max_abs(m: &RMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rmat(rows: usize, cols: usize, data: &[f64]) -> RMatrix {
        RMatrix::from_row_slice(rows, cols, data)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        sort_complex(&mut v);
        v
    }

    #[test]
    fn identity_norm_is_one() {
        let n = spectral_norm(&CMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(n, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_two_by_two_norm() {
        let n = spectral_norm_real(&rmat(2, 2, &[1.0, 1.0, 1.0, 3.0])).unwrap();
        assert_relative_eq!(n, 2.0 + 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn zero_norm() {
        assert_eq!(spectral_norm(&CMatrix::zeros(2, 3)).unwrap(), 0.0);
        assert_eq!(spectral_norm(&CMatrix::zeros(0, 3)).unwrap(), 0.0);
    }

    #[test]
    fn nan_is_rejected() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = cplx(f64::NAN, 0.0);
        assert!(matches!(spectral_norm(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn diagonal_eigenvalues() {
        let ev = sorted(eigenvalues_real(&RMatrix::from_diagonal(&nalgebra::dvector![-1.0, -3.0, -2.0])).unwrap());
        for (z, want) in ev.iter().zip([-3.0, -2.0, -1.0]) {
            assert_relative_eq!(z.re, want, epsilon = 1e-14);
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn triangular_eigenvalues() {
        let ev = sorted(eigenvalues_real(&rmat(2, 2, &[-2.0, 2.0, 0.0, -1.0])).unwrap());
        assert_relative_eq!(ev[0].re, -2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn companion_eigenvalues() {
        let ev = sorted(eigenvalues_real(&rmat(2, 2, &[0.0, -1.0, 1.0, -1.0])).unwrap());
        let h = 3f64.sqrt() / 2.0;
        assert_relative_eq!(ev[0].re, -0.5, epsilon = 1e-12);
        assert_relative_eq!(ev[0].im, -h, epsilon = 1e-12);
        assert_relative_eq!(ev[1].im, h, epsilon = 1e-12);
    }

    #[test]
    fn non_square_eigenvalues_fail() {
        assert!(matches!(eigenvalues(&CMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn complex_matrix_eigenvalues() {
        let m = CMatrix::from_row_slice(2, 2, &[cplx(1.0, 1.0), cplx(2.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.5)]);
        let ev = sorted(eigenvalues(&m).unwrap());
        assert_relative_eq!(ev[0].re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[0].im, 0.5, epsilon = 1e-12);
        assert_relative_eq!(ev[1].im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pencil_with_diagonal_e() {
        let a = to_complex(&rmat(2, 2, &[-2.0, 0.0, 0.0, -4.0]));
        let e = to_complex(&rmat(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        let ev = sorted(generalized_eigenvalues(&a, &e).unwrap());
        assert_relative_eq!(ev[0].re, -2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn pencil_of_asymmetric_closed_loop() {
        // A + B Bᵀ A⁻ᵀ for the 2x2 asymmetric example with a = 1.
        let a = to_complex(&rmat(2, 2, &[-2.0, 1.0, 0.0, -1.0]));
        let ev = sorted(generalized_eigenvalues(&a, &CMatrix::identity(2, 2)).unwrap());
        assert_relative_eq!(ev[0].re, -2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn pencil_with_identity_matches_eigenvalues() {
        let a = rmat(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 4.0, -2.0]);
        let g = sorted(generalized_eigenvalues_real(&a, &RMatrix::identity(3, 3)).unwrap());
        let s = sorted(eigenvalues_real(&a).unwrap());
        for (x, y) in g.iter().zip(&s) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_pencil_reports_rcond() {
        let e = rmat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        match generalized_eigenvalues_real(&RMatrix::identity(2, 2), &e) {
            Err(Error::SingularPencil { rcond }) => assert_eq!(rcond, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = to_complex(&rmat(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        let p = pseudoinverse(&m);
        let inv = m.clone().try_inverse().unwrap();
        assert!((p - inv).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_row() {
        let p = pseudoinverse(&to_complex(&rmat(1, 2, &[1.0, -1.0])));
        assert_eq!(p.shape(), (2, 1));
        assert_relative_eq!(p[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[(1, 0)].re, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn pinv_of_zero() {
        let p = pseudoinverse(&CMatrix::zeros(2, 3));
        assert_eq!(p.shape(), (3, 2));
        assert!(p.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn balancing_handles_graded_matrix() {
        let m = rmat(3, 3, &[1.0, 1e6, 0.0, 1e-6, 2.0, 1e6, 0.0, 1e-6, 3.0]);
        let ev: f64 = eigenvalues_real(&m).unwrap().iter().map(|z| z.re).sum();
        assert_relative_eq!(ev, 6.0, epsilon = 1e-9);
    }

    fn cmat_strategy(r: usize, c: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec(-1.0f64..1.0, 2 * r * c).prop_map(move |v| {
            CMatrix::from_fn(r, c, |i, j| cplx(v[2 * (i * c + j)], v[2 * (i * c + j) + 1]))
        })
    }

    fn unitary(seed: &CMatrix) -> CMatrix {
        seed.clone().qr().q()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn moore_penrose_identities(m in cmat_strategy(5, 8)) {
            let p = pseudoinverse(&m);
            prop_assert!((&m * &p * &m - &m).norm() < 1e-10);
            prop_assert!((&p * &m * &p - &p).norm() < 1e-10);
            let mp = &m * &p;
            prop_assert!((mp.adjoint() - &mp).norm() < 1e-10);
            let pm = &p * &m;
            prop_assert!((pm.adjoint() - &pm).norm() < 1e-10);
        }

        #[test]
        fn pinv_full_row_rank_closed_form(m in cmat_strategy(3, 6)) {
            let gram = &m * m.adjoint();
            let closed = m.adjoint() * gram.try_inverse().unwrap();
            prop_assert!((pseudoinverse(&m) - closed).norm() < 1e-10);
        }

        #[test]
        fn spectral_norm_unitary_invariance(
            m in cmat_strategy(4, 3),
            us in cmat_strategy(4, 4),
            vs in cmat_strategy(3, 3),
        ) {
            let u = unitary(&us);
            let v = unitary(&vs);
            let a = spectral_norm(&m).unwrap();
            let b = spectral_norm(&(u * &m * v)).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a));
        }

        #[test]
        fn eigenvalues_permutation_similarity(
            v in proptest::collection::vec(-2.0f64..2.0, 25),
            perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let m = RMatrix::from_row_slice(5, 5, &v);
            let p = RMatrix::from_fn(5, 5, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
            let pm = &p * &m * p.transpose();
            let a = sorted(eigenvalues_real(&m).unwrap());
            let b = sorted(eigenvalues_real(&pm).unwrap());
            // pairs of complex conjugates may swap under the sort when the
            // real parts tie, so match greedily instead of positionally
            let mut used = vec![false; 5];
            for x in &a {
                let k = (0..5).filter(|&k| !used[k]).min_by(|&i, &j| (b[i] - x).norm().total_cmp(&(b[j] - x).norm())).unwrap();
                used[k] = true;
                prop_assert!((b[k] - x).norm() < 1e-8);
            }
        }
    }
}
