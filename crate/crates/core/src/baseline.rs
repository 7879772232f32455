//! Suboptimal state-feedback H∞ synthesis through the γ-parameterized
//! Riccati equation, used as a dense reference controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, singular_values, solve_real, to_complex, CMatrix, RMatrix};
use crate::sysmodel::DescriptorPlant;

/// Largest γ tried before declaring the problem infeasible.
pub const GAMMA_LIMIT: f64 = 1e6;

/// Hamiltonian eigenvalues closer than this (relative) to the imaginary
/// axis make a level γ count as infeasible.
pub const AXIS_MARGIN: f64 = 1e-9;

const SIGN_MAX_ITER: usize = 100;

/// `ẋ = A x + B1 w + B2 u`, `z = [C1 x; u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreProblem {
    pub a: RMatrix,
    pub b1: RMatrix,
    pub b2: RMatrix,
    pub c1: RMatrix,
}

impl AreProblem {
    pub fn new(a: RMatrix, b1: RMatrix, b2: RMatrix, c1: RMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b1.nrows() != n || b2.nrows() != n || c1.ncols() != n {
            return Err(Error::Dimension("ARE problem needs A n x n, B1/B2 with n rows, C1 with n columns".into()));
        }
        for m in [&a, &b1, &b2, &c1] {
            numkit::ensure_finite_real(m)?;
        }
        Ok(Self { a, b1, b2, c1 })
    }

    /// State-space form of a descriptor plant with `w` entering every state
    /// and `y = x` penalized: `A ← E⁻¹A`, `B1 ← E⁻¹`, `B2 ← E⁻¹B`, `C1 = I`.
    pub fn from_descriptor(p: &DescriptorPlant) -> Result<Self> {
        let e_inv = p.e_inverse()?;
        let n = p.states();
        Self::new(&e_inv * p.a(), e_inv.clone(), &e_inv * p.b(), RMatrix::identity(n, n))
    }

    /// PBH rank test on the modes with nonnegative real part.
    pub fn stabilizable(&self) -> Result<bool> {
        let n = self.a.nrows();
        let ac = to_complex(&self.a);
        let bc = to_complex(&self.b2);
        for lambda in numkit::eigenvalues_real(&self.a)? {
            if lambda.re < 0.0 {
                continue;
            }
            let mut pbh = CMatrix::zeros(n, n + self.b2.ncols());
            pbh.view_mut((0, 0), (n, n)).copy_from(&(&ac - CMatrix::identity(n, n) * lambda));
            pbh.view_mut((0, n), bc.shape()).copy_from(&bc);
            let sv = singular_values(&pbh)?;
            let top = sv.first().copied().unwrap_or(0.0);
            if sv.len() < n || sv[n - 1] <= 1e-10 * top.max(1.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Solution of the Riccati equation at one level γ.
#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution {
    pub p: RMatrix,
    pub k: RMatrix,
}

/// Matrix sign function by the scaled Newton iteration.
fn sign_function(h: &RMatrix) -> Option<RMatrix> {
    let n = h.nrows();
    let id = RMatrix::identity(n, n);
    let mut s = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = s.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return None;
        }
        let inv = lu.solve(&id)?;
        let c = det.abs().powf(-1.0 / n as f64);
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&s * c + inv / c) * 0.5;
        let delta = (&next - &s).norm();
        s = next;
        if delta <= 1e-12 * s.norm() {
            return Some(s);
        }
    }
    // Determinant scaling can stall close to convergence; finish unscaled.
    for _ in 0..20 {
        let inv = s.clone().lu().solve(&id)?;
        let next = (&s + inv) * 0.5;
        let delta = (&next - &s).norm();
        s = next;
        if delta <= 1e-12 * s.norm() {
            return Some(s);
        }
    }
    None
}

/// Solves `AᵀP + PA − P(B2B2ᵀ − γ⁻²B1B1ᵀ)P + C1ᵀC1 = 0` for the stabilizing
/// solution. Returns `None` when γ is infeasible: the Hamiltonian has
/// eigenvalues near the imaginary axis, `P` is not positive semidefinite,
/// or `A − B2B2ᵀP` is not Hurwitz.
pub fn are_feasible(prob: &AreProblem, gamma: f64) -> Result<Option<AreSolution>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let n = prob.a.nrows();
    let r = &prob.b2 * prob.b2.transpose() - &prob.b1 * prob.b1.transpose() / (gamma * gamma);
    let q = prob.c1.transpose() * &prob.c1;
    let mut h = RMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&r));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.a.transpose()));

    let hn = h.norm();
    if numkit::eigenvalues_real(&h)?.iter().any(|z| z.re.abs() <= AXIS_MARGIN * (1.0 + hn)) {
        return Ok(None);
    }
    let Some(s) = sign_function(&h) else {
        return Ok(None);
    };
    let id = RMatrix::identity(n, n);
    // (S + I) [I; P] = 0 on the stable invariant subspace.
    let mut lhs = RMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(s.view((n, n), (n, n)) + &id));
    let mut rhs = RMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(s.view((0, 0), (n, n)) + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s.view((n, 0), (n, n))));
    let normal = lhs.transpose() * &lhs;
    let Some(p) = solve_real(&normal, &(lhs.transpose() * rhs)) else {
        return Ok(None);
    };
    let p = (&p + p.transpose()) * 0.5;

    let pn = numkit::spectral_norm_real(&p)?;
    if numkit::symmetric_eigenvalues(&p)?.first().is_some_and(|&l| l < -1e-9 * pn.max(1.0)) {
        return Ok(None);
    }
    let residual = prob.a.transpose() * &p + &p * &prob.a - &p * &r * &p + &q;
    let scale = 1.0 + q.norm() + 2.0 * prob.a.norm() * pn + r.norm() * pn * pn;
    if residual.norm() > 1e-6 * scale {
        return Ok(None);
    }
    let k = -(prob.b2.transpose() * &p);
    let a_cl = &prob.a + &prob.b2 * &k;
    if numkit::eigenvalues_real(&a_cl)?.iter().any(|z| z.re >= 0.0) {
        return Ok(None);
    }
    Ok(Some(AreSolution { p, k }))
}

/// Result of the γ bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    /// Smallest feasible level found.
    pub gamma: f64,
    /// Largest infeasible level found.
    pub gamma_infeasible: f64,
    #[serde(with = "crate::rows")]
    pub k: RMatrix,
    pub iterations: usize,
}

/// Bisects on γ to relative accuracy `tol`, returning the gain of the last
/// feasible level.
pub fn gamma_bisect(prob: &AreProblem, tol: f64) -> Result<BaselineResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if !prob.stabilizable()? {
        return Err(Error::Unstabilizable { limit: GAMMA_LIMIT });
    }
    let mut iterations = 0;
    let mut hi = 1.0;
    let mut best = are_feasible(prob, hi)?;
    while best.is_none() {
        hi *= 2.0;
        iterations += 1;
        if hi > GAMMA_LIMIT {
            return Err(Error::Unstabilizable { limit: GAMMA_LIMIT });
        }
        best = are_feasible(prob, hi)?;
    }
    let mut lo = hi / 2.0;
    while let Some(sol) = are_feasible(prob, lo)? {
        iterations += 1;
        hi = lo;
        best = Some(sol);
        lo /= 2.0;
        if lo < 1e-12 {
            break;
        }
    }
    let mut sol = best.expect("feasible level found");
    while hi - lo > tol * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match are_feasible(prob, mid)? {
            Some(s) => {
                hi = mid;
                sol = s;
            }
            None => lo = mid,
        }
    }
    Ok(BaselineResult { gamma: hi, gamma_infeasible: lo, k: sol.k, iterations })
}

/// Baseline controller for a descriptor plant.
pub fn baseline_for(p: &DescriptorPlant, tol: f64) -> Result<BaselineResult> {
    gamma_bisect(&AreProblem::from_descriptor(p)?, tol)
}
