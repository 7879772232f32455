use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{eigenvalues_real, RMatrix};
use crate::error::{Error, Result};

/// Real polynomial with coefficients in ascending degree order.
///
/// Trailing zero coefficients are trimmed on construction, so the last
/// stored coefficient is the leading one. The zero polynomial has no
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("polynomial coefficient is not finite".into()));
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c]).expect("finite constant")
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self { coeffs: vec![0.0, 1.0] }
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Self::constant(1.0), |acc, &r| {
            acc.mul(&Self { coeffs: vec![-r, 1.0] })
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Sum of |c_i| |s|^i, the scale against which a value of the
    /// polynomial at `s` is judged to be zero.
    pub(crate) fn magnitude_bound(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).copied().unwrap_or(0.0) + other.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Self::new(coeffs).expect("sum of finite polynomials")
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect()).expect("finite scale")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out).expect("product of finite polynomials")
    }

    /// Roots by eigenvalues of the companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::InvalidInput("roots of the zero polynomial".into()));
        }
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[n];
        let mut companion = RMatrix::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        eigenvalues_real(&companion)
    }
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

/// Evaluates `num(s) / den(s)` by Horner's rule.
pub fn rational_eval(num: &Polynomial, den: &Polynomial, s: Complex64) -> Result<Complex64> {
    let d = den.eval(s);
    if d.norm() <= f64::EPSILON * den.magnitude_bound(s) || d.norm() == 0.0 {
        return Err(Error::PoleAtEvaluation { re: s.re, im: s.im });
    }
    Ok(num.eval(s) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn trims_leading_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![0.0]).unwrap().is_zero());
    }

    #[test]
    fn rejects_nan() {
        assert!(Polynomial::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn squared_binomial_at_zero() {
        let p = Polynomial::new(vec![4.0, 4.0, 1.0]).unwrap();
        let v = rational_eval(&p, &Polynomial::constant(1.0), c(0.0, 0.0)).unwrap();
        assert_eq!(v, c(4.0, 0.0));
    }

    #[test]
    fn linear_at_j() {
        let p = Polynomial::new(vec![1.0, 1.0]).unwrap();
        let v = rational_eval(&p, &Polynomial::constant(1.0), c(0.0, 1.0)).unwrap();
        assert_eq!(v, c(1.0, 1.0));
    }

    #[test]
    fn reciprocal_of_s() {
        let v = rational_eval(&Polynomial::constant(1.0), &Polynomial::s(), c(0.0, 2.0)).unwrap();
        assert_relative_eq!(v.re, 0.0);
        assert_relative_eq!(v.im, -0.5);
    }

    #[test]
    fn pole_is_reported() {
        let err = rational_eval(&Polynomial::constant(1.0), &Polynomial::s(), c(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::PoleAtEvaluation { .. }));
    }

    #[test]
    fn roots_of_quadratic() {
        let p = Polynomial::new(vec![1.0, 1.0, 1.0]).unwrap();
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        let h = 3f64.sqrt() / 2.0;
        assert_relative_eq!(r[0].re, -0.5, epsilon = 1e-12);
        assert_relative_eq!(r[0].im, -h, epsilon = 1e-12);
        assert_relative_eq!(r[1].im, h, epsilon = 1e-12);
    }

    #[test]
    fn product_and_roots_agree() {
        let p = Polynomial::from_real_roots(&[-1.0, -2.0, 3.0]);
        let mut r: Vec<f64> = p.roots().unwrap().iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in r.iter().zip([-2.0, -1.0, 3.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-10);
        }
    }
}
