//! Closed-form gain constructions.
//!
//! Every gain here is explicit: a frequency-response evaluation followed by
//! one linear solve at most. Inverses are always taken by factor-and-solve.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::netgen::{NetworkModel, NetworkParams, SubsystemNetwork};
use crate::numkit::{self, cplx, singular_values, solve, solve_real, CMatrix, RMatrix};
use crate::sysmodel::{DescriptorPlant, FrequencyModel, Gain, GainFormula, ModeRecord, WeightedObjective};
use crate::verify::corollary2_hypotheses;

/// `‖Im K‖ ≤ REALNESS_RTOL · (1 + ‖Re K‖)` is required for a gain to count
/// as real-valued.
pub const REALNESS_RTOL: f64 = 1e-9;

const RANK_RTOL: f64 = 1e-12;

/// `K = −N* M (M* M)⁻¹` from the frequency response at one point. `M` may be
/// rectangular (rows ≥ columns) but must have full column rank.
pub fn gain_from_response(m: &CMatrix, n: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != n.nrows() {
        return Err(Error::Dimension(format!("M has {} rows, N has {}", m.nrows(), n.nrows())));
    }
    check_full_column_rank(m)?;
    let mtm = m.adjoint() * m;
    // K (M* M) = −N* M  ⇔  (M* M) K* = −M* N
    let rhs = -(m.adjoint() * n);
    let kt = solve(&mtm, &rhs).ok_or_else(|| Error::RankDeficient("M* M is singular".into()))?;
    Ok(kt.adjoint())
}

/// `K = −N* M⁻*` for square `M`, solved as `M K* = −N`.
pub fn gain_from_square_response(m: &CMatrix, n: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() || m.nrows() != n.nrows() {
        return Err(Error::Dimension("square form needs M k x k and N k x m".into()));
    }
    check_full_column_rank(m)?;
    let kt = solve(m, &(-n)).ok_or_else(|| Error::RankDeficient("M is singular".into()))?;
    Ok(kt.adjoint())
}

fn check_full_column_rank(m: &CMatrix) -> Result<()> {
    let sv = singular_values(m)?;
    let ok = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) => sv.len() == m.ncols() && hi > 0.0 && lo > RANK_RTOL * hi,
        _ => m.ncols() == 0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RankDeficient("M(jω₀) does not have full column rank".into()))
    }
}

/// Strips the imaginary part of a gain after checking it is negligible.
pub fn realify(k: &CMatrix) -> Result<RMatrix> {
    let re = k.map(|z| z.re);
    let im = k.map(|z| z.im);
    let (re_n, im_n) = (numkit::spectral_norm_real(&re)?, numkit::spectral_norm_real(&im)?);
    let tolerance = REALNESS_RTOL * (1.0 + re_n);
    if im_n > tolerance {
        return Err(Error::NotRealValued { imag_norm: im_n, tolerance });
    }
    Ok(re)
}

/// The explicit gain built from the frequency response at `omega0`.
pub fn closed_form_gain<P: FrequencyModel + ?Sized>(p: &P, omega0: f64) -> Result<Gain> {
    if !omega0.is_finite() {
        return Err(Error::InvalidParameter("omega0 must be finite".into()));
    }
    let s = cplx(0.0, omega0);
    let (m, n) = (p.m_at(s)?, p.n_at(s)?);
    let (k, formula) = if m.is_square() {
        (gain_from_square_response(&m, &n)?, GainFormula::Remark1)
    } else {
        (gain_from_response(&m, &n)?, GainFormula::Theorem1)
    };
    Ok(Gain::new(realify(&k)?, omega0, formula))
}

/// Gain for the objective `‖Q y‖² + ‖u‖²`: the unweighted gain times `QᵀQ`.
pub fn weighted_gain<P: FrequencyModel + ?Sized>(p: &P, w: &WeightedObjective, omega0: f64) -> Result<Gain> {
    if w.q().ncols() != p.outputs() {
        return Err(Error::Dimension(format!(
            "Q has {} columns, plant has {} outputs",
            w.q().ncols(),
            p.outputs()
        )));
    }
    let base = closed_form_gain(p, omega0)?;
    let k = base.k * (w.q().transpose() * w.q());
    Ok(Gain::new(k, omega0, GainFormula::Weighted))
}

/// `K = Bᵀ A⁻ᵀ`, the zero-frequency gain of a descriptor plant.
///
/// Tagged `corollary2` when the symmetric, commuting hypotheses hold and
/// `corollary1` otherwise.
pub fn descriptor_gain(p: &DescriptorPlant) -> Result<Gain> {
    let rc = numkit::rcond(p.a())?;
    if rc < crate::sysmodel::A_RCOND_MIN {
        return Err(Error::NearSingular { what: "A".into(), rcond: rc });
    }
    // Kᵀ = A⁻¹ B
    let kt = solve_real(p.a(), p.b()).ok_or(Error::NearSingular { what: "A".into(), rcond: rc })?;
    let formula = if corollary2_hypotheses(p).holds {
        GainFormula::Corollary2
    } else {
        GainFormula::Corollary1
    };
    Ok(Gain::new(kt.transpose(), 0.0, formula))
}

/// `u_ij = −x_i/a_i + x_j/a_j` for every directed control of a buffer network,
/// rows in the same order as the compiled input matrix columns.
pub fn buffer_law(net: &NetworkModel) -> Result<Gain> {
    let NetworkParams::Buffer { rates } = &net.params else {
        return Err(Error::InvalidParameter("buffer law needs a buffer network".into()));
    };
    net.validate()?;
    if let Some((i, a)) = rates.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
        return Err(Error::InvalidRate(format!("a_{i} = {a}; requires a_i > 0 for all i")));
    }
    let n = net.nodes;
    let mut k = RMatrix::zeros(2 * net.edges.len(), n);
    for (e, &(i, j)) in net.edges.iter().enumerate() {
        k[(2 * e, i)] = -1.0 / rates[i];
        k[(2 * e, j)] = 1.0 / rates[j];
        k[(2 * e + 1, j)] = -1.0 / rates[j];
        k[(2 * e + 1, i)] = 1.0 / rates[i];
    }
    Ok(Gain::new(k, 0.0, GainFormula::Buffer))
}

/// `u_ij = b_iᵀ A_i⁻¹ x_i + b_jᵀ A_j⁻¹ x_j` for coupled symmetric
/// negative-definite subsystems.
pub fn subsystem_law(net: &SubsystemNetwork) -> Result<Gain> {
    net.validate()?;
    let offsets = net.offsets();
    let n = net.states();
    let mut k = RMatrix::zeros(net.couplings.len(), n);
    for (row, c) in net.couplings.iter().enumerate() {
        for (node, b) in [(c.from, &c.b_from), (c.to, c.b_to())] {
            let a = &net.blocks[node];
            let x = solve_real(a, &RMatrix::from_column_slice(b.len(), 1, b))
                .ok_or_else(|| Error::HypothesisViolation(format!("A_{node} is singular")))?;
            for (r, v) in x.iter().enumerate() {
                k[(row, offsets[node] + r)] += v;
            }
        }
    }
    Ok(Gain::new(k, 0.0, GainFormula::Corollary2))
}

/// Droop gain `K = −ω₀ / (2ζ)` for the normalized synchronous machine.
pub fn droop_gain(omega0: f64, zeta: f64) -> Result<Gain> {
    if !(omega0 > 0.0 && omega0.is_finite()) || !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "droop needs omega0, zeta > 0; got omega0 = {omega0}, zeta = {zeta}"
        )));
    }
    Ok(Gain::new(RMatrix::from_element(1, 1, -omega0 / (2.0 * zeta)), omega0, GainFormula::Droop))
}

fn symmetric_error(m: &RMatrix) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

/// Frequency feedback `P_gen = −d⁻¹ θ̇` for a network of identical machines
/// `m θ̈ + d θ̇ + L θ = P_dist + P_gen`, with per-mode records.
pub fn machine_modal_gains(m: f64, d: f64, laplacian: &RMatrix) -> Result<Gain> {
    if !(m > 0.0 && m.is_finite() && d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("machine needs m, d > 0; got m = {m}, d = {d}")));
    }
    let n = laplacian.nrows();
    if !laplacian.is_square() {
        return Err(Error::Dimension("Laplacian must be square".into()));
    }
    numkit::ensure_finite_real(laplacian)?;
    if symmetric_error(laplacian) > 1e-12 {
        return Err(Error::HypothesisViolation("L must be symmetric".into()));
    }
    let ev = numkit::symmetric_eigenvalues(laplacian)?;
    let scale = numkit::spectral_norm_real(laplacian)?;
    if ev.first().is_some_and(|&l| l < -1e-9 * scale) {
        return Err(Error::HypothesisViolation("L must be positive semidefinite".into()));
    }
    let modes = ev
        .iter()
        .map(|&l| {
            let lambda = l.max(0.0);
            ModeRecord { lambda, omega0: (lambda / m).sqrt(), gain: -1.0 / d }
        })
        .collect();
    let mut g = Gain::new(RMatrix::identity(n, n) * (-1.0 / d), 0.0, GainFormula::Modal);
    g.modes = modes;
    Ok(g)
}

/// Matrix-coefficient machine network `M θ̈ + D θ̇ + L θ = P_dist + P_gen`.
///
/// Accepted only when `M`, `D`, `L` are symmetric and commute pairwise, so a
/// common orthogonal basis diagonalizes all three; the gain is then `−D⁻¹`.
pub fn machine_modal_gains_matrix(mass: &RMatrix, damping: &RMatrix, laplacian: &RMatrix) -> Result<Gain> {
    let n = laplacian.nrows();
    for (name, x) in [("M", mass), ("D", damping), ("L", laplacian)] {
        if x.shape() != (n, n) {
            return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
        }
        numkit::ensure_finite_real(x)?;
        if symmetric_error(x) > 1e-12 {
            return Err(Error::HypothesisViolation(format!("{name} must be symmetric")));
        }
    }
    let commutes = |x: &RMatrix, y: &RMatrix| (x * y - y * x).norm() <= 1e-10 * x.norm().max(1.0) * y.norm().max(1.0);
    if !(commutes(mass, damping) && commutes(mass, laplacian) && commutes(damping, laplacian)) {
        return Err(Error::HypothesisViolation(
            "M, D and L must commute pairwise to be diagonalized by one basis".into(),
        ));
    }
    // Eigenvectors of a generic combination diagonalize all three.
    let combo = mass + damping * std::f64::consts::E + laplacian * std::f64::consts::PI;
    let basis = SymmetricEigen::new((&combo + combo.transpose()) * 0.5).eigenvectors;
    let diag = |x: &RMatrix| -> Vec<f64> { (0..n).map(|i| (basis.column(i).transpose() * x * basis.column(i))[(0, 0)]).collect() };
    let (mi, di, li) = (diag(mass), diag(damping), diag(laplacian));
    if mi.iter().any(|&v| v <= 0.0) || di.iter().any(|&v| v <= 0.0) {
        return Err(Error::HypothesisViolation("M and D must be positive definite".into()));
    }
    let scale = numkit::spectral_norm_real(laplacian)?;
    if li.iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::HypothesisViolation("L must be positive semidefinite".into()));
    }
    let k = -solve_real(damping, &RMatrix::identity(n, n))
        .ok_or_else(|| Error::HypothesisViolation("D is singular".into()))?;
    let mut modes: Vec<ModeRecord> = (0..n)
        .map(|i| {
            let lambda = li[i].max(0.0);
            ModeRecord { lambda, omega0: (lambda / mi[i]).sqrt(), gain: -1.0 / di[i] }
        })
        .collect();
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut g = Gain::new(k, 0.0, GainFormula::Modal);
    g.modes = modes;
    Ok(g)
}
