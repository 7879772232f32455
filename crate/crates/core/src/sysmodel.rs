//! Plant representations and closed-loop construction.
//!
//! Two plant classes share the frequency-domain form `M(s) y = N(s) u + w`:
//! [`DescriptorPlant`] with `M(s) = sE − A`, `N(s) = B`, and the general
//! [`RationalPlant`] whose entries are ratios of real polynomials. Both
//! implement [`FrequencyModel`], which is all the norm and bound
//! computations need.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::numkit::{
    self, cplx, rational_eval, rcond, singular_values, solve, solve_real, to_complex, CMatrix,
    Polynomial, RMatrix,
};

/// Lower limit on the reciprocal condition number of `A`.
pub const A_RCOND_MIN: f64 = 1e-12;

/// Relative rank threshold used when checking standing assumptions.
const RANK_RTOL: f64 = 1e-12;

/// Anything that can report `M(s)` and `N(s)` at a complex point.
pub trait FrequencyModel: Sync {
    /// Number of outputs `k` (columns of `M`).
    fn outputs(&self) -> usize;
    /// Number of control inputs `m` (columns of `N`).
    fn inputs(&self) -> usize;
    fn m_at(&self, s: Complex64) -> Result<CMatrix>;
    fn n_at(&self, s: Complex64) -> Result<CMatrix>;
    /// The plant as `(E, A, B)` data, when it has that form. Lets frequency
    /// sweeps precompute real matrices once.
    fn as_descriptor(&self) -> Option<&DescriptorPlant> {
        None
    }
}

/// `M(s) = sE − A`, `N(s) = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorPlant {
    e: RMatrix,
    a: RMatrix,
    b: RMatrix,
}

impl DescriptorPlant {
    pub fn new(e: RMatrix, a: RMatrix, b: RMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || e.shape() != (n, n) || b.nrows() != n {
            return Err(Error::Dimension(format!(
                "descriptor plant needs E, A n x n and B n x m; got E {}x{}, A {}x{}, B {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        numkit::ensure_finite_real(&e)?;
        numkit::ensure_finite_real(&a)?;
        numkit::ensure_finite_real(&b)?;
        let rc = rcond(&a)?;
        if rc < A_RCOND_MIN {
            return Err(Error::NearSingular { what: "A".into(), rcond: rc });
        }
        Ok(Self { e, a, b })
    }

    /// Plant with `E = I`.
    pub fn standard(a: RMatrix, b: RMatrix) -> Result<Self> {
        let n = a.nrows();
        Self::new(RMatrix::identity(n, n), a, b)
    }

    pub fn e(&self) -> &RMatrix {
        &self.e
    }

    pub fn a(&self) -> &RMatrix {
        &self.a
    }

    pub fn b(&self) -> &RMatrix {
        &self.b
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// `F = E Aᵀ`.
    pub fn f_matrix(&self) -> RMatrix {
        &self.e * self.a.transpose()
    }

    /// `G = A Aᵀ + B Bᵀ`.
    pub fn g_matrix(&self) -> RMatrix {
        &self.a * self.a.transpose() + &self.b * self.b.transpose()
    }

    /// `‖G⁻¹‖^{1/2}`, the optimal value when the optimal gain is attained at ω = 0.
    pub fn zero_frequency_bound(&self) -> Result<f64> {
        let ev = numkit::symmetric_eigenvalues(&self.g_matrix())?;
        let lmin = ev.first().copied().unwrap_or(f64::INFINITY);
        if lmin <= 0.0 {
            return Err(Error::StandingAssumption {
                omega: 0.0,
                detail: "A Aᵀ + B Bᵀ is singular".into(),
            });
        }
        Ok(lmin.powf(-0.5))
    }

    pub fn e_inverse(&self) -> Result<RMatrix> {
        let rc = rcond(&self.e)?;
        if rc < 1.0 / numkit::PENCIL_COND_LIMIT {
            return Err(Error::DescriptorNotReducible { rcond: rc });
        }
        let n = self.states();
        solve_real(&self.e, &RMatrix::identity(n, n)).ok_or(Error::DescriptorNotReducible { rcond: rc })
    }

    /// Entrywise polynomial form of `sE − A` and `B`.
    pub fn to_rational(&self) -> RationalPlant {
        let n = self.states();
        let m = RationalMatrix::from_fn(n, n, |i, j| {
            RationalEntry::polynomial(Polynomial::new(vec![-self.a[(i, j)], self.e[(i, j)]]).expect("finite"))
        });
        let nm = RationalMatrix::from_fn(n, self.b.ncols(), |i, j| RationalEntry::constant(self.b[(i, j)]));
        RationalPlant { m, n: nm }
    }
}

impl FrequencyModel for DescriptorPlant {
    fn outputs(&self) -> usize {
        self.states()
    }

    fn inputs(&self) -> usize {
        self.b.ncols()
    }

    fn m_at(&self, s: Complex64) -> Result<CMatrix> {
        Ok(to_complex(&self.e).map(|x| x * s) - to_complex(&self.a))
    }

    fn n_at(&self, _s: Complex64) -> Result<CMatrix> {
        Ok(to_complex(&self.b))
    }

    fn as_descriptor(&self) -> Option<&DescriptorPlant> {
        Some(self)
    }
}

/// One scalar entry `num(s) / den(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalEntry {
    pub num: Polynomial,
    #[serde(default = "unit_polynomial")]
    pub den: Polynomial,
}

fn unit_polynomial() -> Polynomial {
    Polynomial::constant(1.0)
}

impl RationalEntry {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("rational entry has a zero denominator".into()));
        }
        Ok(Self { num, den })
    }

    pub fn polynomial(num: Polynomial) -> Self {
        Self { num, den: unit_polynomial() }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(Polynomial::constant(c))
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        rational_eval(&self.num, &self.den, s)
    }
}

/// Dense matrix of rational entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<RationalEntry>,
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<RationalEntry>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} rational matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|e| e.den.is_zero()) {
            return Err(Error::InvalidInput("rational entry has a zero denominator".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> RationalEntry) -> Self {
        let entries = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { rows, cols, entries }
    }

    pub fn scalar(entry: RationalEntry) -> Self {
        Self { rows: 1, cols: 1, entries: vec![entry] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entry(&self, i: usize, j: usize) -> &RationalEntry {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[RationalEntry] {
        &self.entries
    }

    pub fn eval(&self, s: Complex64) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.entry(i, j).eval(s)?;
            }
        }
        Ok(out)
    }
}

/// General plant `M(s) y = N(s) u + w` with rational `M` (k x k) and `N` (k x m).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalPlant {
    m: RationalMatrix,
    n: RationalMatrix,
}

impl RationalPlant {
    /// Validates dimensions and the standing assumptions on the default grid.
    pub fn new(m: RationalMatrix, n: RationalMatrix) -> Result<Self> {
        let plant = Self::new_unchecked(m, n)?;
        plant.check_standing_assumptions(&FrequencyGrid::default())?;
        Ok(plant)
    }

    /// Validates dimensions only.
    pub fn new_unchecked(m: RationalMatrix, n: RationalMatrix) -> Result<Self> {
        let (k, kc) = m.shape();
        if k != kc || n.shape().0 != k {
            return Err(Error::Dimension(format!(
                "rational plant needs M k x k and N k x m; got M {}x{}, N {}x{}",
                k,
                kc,
                n.shape().0,
                n.shape().1
            )));
        }
        Ok(Self { m, n })
    }

    /// Scalar plant `M(s) = m_num/m_den`, `N(s) = n_num/n_den`.
    pub fn scalar(m: RationalEntry, n: RationalEntry) -> Result<Self> {
        Self::new(RationalMatrix::scalar(m), RationalMatrix::scalar(n))
    }

    pub fn m(&self) -> &RationalMatrix {
        &self.m
    }

    pub fn n(&self) -> &RationalMatrix {
        &self.n
    }

    /// `M(jω)` full column rank and `M M* + N N*` invertible at every grid
    /// frequency where the plant has no pole.
    pub fn check_standing_assumptions(&self, grid: &FrequencyGrid) -> Result<()> {
        for omega in grid.points() {
            let s = cplx(0.0, omega);
            let (m, n) = match (self.m.eval(s), self.n.eval(s)) {
                (Ok(m), Ok(n)) => (m, n),
                (Err(Error::PoleAtEvaluation { .. }), _) | (_, Err(Error::PoleAtEvaluation { .. })) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let sv = singular_values(&m)?;
            let full_rank = match (sv.first(), sv.last()) {
                (Some(&hi), Some(&lo)) => hi > 0.0 && lo > RANK_RTOL * hi && sv.len() == m.ncols(),
                _ => m.ncols() == 0,
            };
            if !full_rank {
                return Err(Error::StandingAssumption {
                    omega,
                    detail: "M(jω) does not have full column rank".into(),
                });
            }
            let gram = &m * m.adjoint() + &n * n.adjoint();
            let ev = numkit::hermitian_eigenvalues(&gram)?;
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            if lo <= RANK_RTOL * hi {
                return Err(Error::StandingAssumption {
                    omega,
                    detail: "M M* + N N* is not invertible".into(),
                });
            }
        }
        Ok(())
    }

    /// State-space realization of the scalar closed loop `[1; K](M − N K)⁻¹`
    /// when `k = m = 1` and the loop transfer function is strictly proper.
    pub fn siso_closed_loop(&self, gain: &Gain) -> Result<StateSpace> {
        if self.m.shape() != (1, 1) || self.n.shape() != (1, 1) || gain.k.shape() != (1, 1) {
            return Err(Error::Dimension("scalar realization needs a 1x1 plant and gain".into()));
        }
        let k = gain.k[(0, 0)];
        let (mm, nn) = (self.m.entry(0, 0), self.n.entry(0, 0));
        // (M − N K)⁻¹ = Md Nd / (Mn Nd − K Nn Md)
        let num = mm.den.mul(&nn.den);
        let den = mm.num.mul(&nn.den).sub(&nn.num.mul(&mm.den).scale(k));
        if den.is_zero() || num.degree() >= den.degree() {
            return Err(Error::InvalidInput("closed loop is not strictly proper".into()));
        }
        let order = den.degree();
        let lead = den.coeffs()[order];
        let mut a = RMatrix::zeros(order, order);
        for i in 0..order - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..order {
            a[(order - 1, j)] = -den.coeffs()[j] / lead;
        }
        let mut b = RMatrix::zeros(order, 1);
        b[(order - 1, 0)] = 1.0;
        let mut c = RMatrix::zeros(2, order);
        for j in 0..order {
            let bj = num.coeffs().get(j).copied().unwrap_or(0.0) / lead;
            c[(0, j)] = bj;
            c[(1, j)] = k * bj;
        }
        StateSpace::new(a, b, c, RMatrix::zeros(2, 1))
    }
}

impl FrequencyModel for RationalPlant {
    fn outputs(&self) -> usize {
        self.m.rows
    }

    fn inputs(&self) -> usize {
        self.n.cols
    }

    fn m_at(&self, s: Complex64) -> Result<CMatrix> {
        self.m.eval(s)
    }

    fn n_at(&self, s: Complex64) -> Result<CMatrix> {
        self.n.eval(s)
    }
}

/// Output weight `Q` for the objective `‖Q y‖² + ‖u‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedObjective {
    q: RMatrix,
}

impl WeightedObjective {
    pub fn new(q: RMatrix) -> Result<Self> {
        numkit::ensure_finite_real(&q)?;
        if q.nrows() == 0 || q.nrows() > q.ncols() {
            return Err(Error::RankDeficient(format!(
                "Q is {}x{}; it must have full row rank",
                q.nrows(),
                q.ncols()
            )));
        }
        let rc = rcond(&q)?;
        if rc < RANK_RTOL {
            return Err(Error::RankDeficient(format!(
                "Q does not have full row rank (reciprocal condition {rc:.3e})"
            )));
        }
        Ok(Self { q })
    }

    pub fn identity(k: usize) -> Self {
        Self { q: RMatrix::identity(k, k) }
    }

    pub fn q(&self) -> &RMatrix {
        &self.q
    }

    /// `Q† = Qᵀ (Q Qᵀ)⁻¹`.
    pub fn q_pinv(&self) -> RMatrix {
        let qqt = &self.q * self.q.transpose();
        let inv = solve_real(&qqt, &RMatrix::identity(qqt.nrows(), qqt.nrows())).expect("full row rank");
        self.q.transpose() * inv
    }
}

/// `ẋ = A x + B w`, `z = C x + D w`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: RMatrix,
    pub b: RMatrix,
    pub c: RMatrix,
    pub d: RMatrix,
}

impl StateSpace {
    pub fn new(a: RMatrix, b: RMatrix, c: RMatrix, d: RMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::Dimension(format!(
                "inconsistent state space: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// `C (sI − A)⁻¹ B + D`.
    pub fn transfer_at(&self, s: Complex64) -> Result<CMatrix> {
        let n = self.a.nrows();
        let lhs = CMatrix::identity(n, n).map(|x| x * s) - to_complex(&self.a);
        let x = solve(&lhs, &to_complex(&self.b)).ok_or(Error::PoleAtEvaluation { re: s.re, im: s.im })?;
        Ok(to_complex(&self.c) * x + to_complex(&self.d))
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        numkit::eigenvalues_real(&self.a)
    }
}

/// Which closed-form construction produced a gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainFormula {
    Theorem1,
    Remark1,
    Corollary1,
    Corollary2,
    Weighted,
    Buffer,
    Droop,
    Modal,
}

/// Per-mode record kept by the machine-network construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub lambda: f64,
    pub omega0: f64,
    pub gain: f64,
}

/// Static feedback `u = K y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    #[serde(with = "crate::rows")]
    pub k: RMatrix,
    pub omega0: f64,
    pub formula: GainFormula,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeRecord>,
}

impl Gain {
    pub fn new(k: RMatrix, omega0: f64, formula: GainFormula) -> Self {
        Self { k, omega0, formula, modes: Vec::new() }
    }
}

/// Closed loop `ẋ = E⁻¹(A + B K) x + E⁻¹ w`, `z = [I; K] x`.
pub fn close_loop(p: &DescriptorPlant, g: &Gain) -> Result<StateSpace> {
    let n = p.states();
    if g.k.shape() != (p.b().ncols(), n) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, plant needs {}x{}",
            g.k.nrows(),
            g.k.ncols(),
            p.b().ncols(),
            n
        )));
    }
    let e_inv = p.e_inverse()?;
    let a_cl = &e_inv * (p.a() + p.b() * &g.k);
    let mut c = RMatrix::zeros(n + g.k.nrows(), n);
    c.view_mut((0, 0), (n, n)).copy_from(&RMatrix::identity(n, n));
    c.view_mut((n, 0), (g.k.nrows(), n)).copy_from(&g.k);
    let d = RMatrix::zeros(c.nrows(), n);
    StateSpace::new(a_cl, e_inv, c, d)
}

/// `[Q; K](M(s) − N(s) K)⁻¹` at an arbitrary complex point; `Q = I` when absent.
pub fn closed_loop_at<P: FrequencyModel + ?Sized>(
    p: &P,
    k: &RMatrix,
    q: Option<&RMatrix>,
    s: Complex64,
) -> Result<CMatrix> {
    let (kk, m) = (p.outputs(), p.inputs());
    if k.shape() != (m, kk) {
        return Err(Error::Dimension(format!("gain is {}x{}, plant needs {m}x{kk}", k.nrows(), k.ncols())));
    }
    let kc = to_complex(k);
    let lhs = p.m_at(s)? - p.n_at(s)? * &kc;
    let inv = solve(&lhs, &CMatrix::identity(kk, kk)).ok_or(Error::PoleAtEvaluation { re: s.re, im: s.im })?;
    let top = match q {
        Some(q) => to_complex(q) * &inv,
        None => inv.clone(),
    };
    let bottom = kc * inv;
    let mut out = CMatrix::zeros(top.nrows() + m, kk);
    out.view_mut((0, 0), top.shape()).copy_from(&top);
    out.view_mut((top.nrows(), 0), (m, kk)).copy_from(&bottom);
    Ok(out)
}

/// `[I; K](M(jω) − N(jω) K)⁻¹`.
pub fn eval_closed_rational<P: FrequencyModel + ?Sized>(p: &P, g: &Gain, omega: f64) -> Result<CMatrix> {
    closed_loop_at(p, &g.k, None, cplx(0.0, omega))
}
