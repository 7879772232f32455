//! Closed-loop stability, H∞ norms, the lower bound on the optimal value
//! and the optimality certificate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Extremum, FrequencyGrid};
use crate::numkit::{
    self, cplx, hermitian_eigenvalues, solve, solve_real, spectral_norm, spectral_norm_real, to_complex, CMatrix,
    Polynomial, RMatrix,
};
use crate::sysmodel::{
    closed_loop_at, DescriptorPlant, FrequencyModel, Gain, RationalPlant, StateSpace, WeightedObjective,
};

/// Numerical tolerances used by the certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Optimality gap: `|norm − bound| ≤ norm_rtol · (1 + bound)`.
    pub norm_rtol: f64,
    /// Relative accuracy of the Hamiltonian bisection.
    pub hinf_rtol: f64,
    /// Closed-loop eigenvalues must satisfy `Re λ < −stability_rtol · ‖A‖`.
    pub stability_rtol: f64,
    /// Grid maxima within this relative distance count as tied.
    pub tie_rtol: f64,
    /// Slack on the minimum eigenvalue in the frequency inequality.
    pub inequality_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { norm_rtol: 1e-6, hinf_rtol: 1e-8, stability_rtol: 1e-9, tie_rtol: grid::TIE_RTOL, inequality_tol: 1e-9 }
    }
}

/// A norm value and the frequency where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPeak {
    pub norm: f64,
    pub omega: f64,
}

impl From<Extremum> for NormPeak {
    fn from(e: Extremum) -> Self {
        Self { norm: e.value, omega: e.omega }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part among the closed-loop poles found.
    pub abscissa: Option<f64>,
    pub method: StabilityMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMethod {
    Pencil,
    PoleScan,
}

/// Stability of `(A + B K, E)` from the pencil eigenvalues.
pub fn pencil_stability(p: &DescriptorPlant, g: &Gain) -> Result<Stability> {
    pencil_stability_with(p, g, Tolerances::default().stability_rtol)
}

fn pencil_stability_with(p: &DescriptorPlant, g: &Gain, rtol: f64) -> Result<Stability> {
    if g.k.shape() != (p.b().ncols(), p.states()) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, plant needs {}x{}",
            g.k.nrows(),
            g.k.ncols(),
            p.b().ncols(),
            p.states()
        )));
    }
    let a_cl = p.a() + p.b() * &g.k;
    let ev = numkit::generalized_eigenvalues_real(&a_cl, p.e()).map_err(|e| match e {
        Error::SingularPencil { rcond } => Error::DescriptorNotReducible { rcond },
        other => other,
    })?;
    let abscissa = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let margin = rtol * spectral_norm_real(p.a())?;
    Ok(Stability {
        stable: ev.is_empty() || abscissa < -margin,
        abscissa: (!ev.is_empty()).then_some(abscissa),
        method: StabilityMethod::Pencil,
        detail: None,
    })
}

fn sigma_max(ss: &StateSpace, omega: f64) -> Result<f64> {
    spectral_norm(&ss.transfer_at(cplx(0.0, omega))?)
}

/// `σ_max(C (jωI − A)⁻¹ B)` from `λ_max(X* CᵀC X)`, `X = (jωI − A)⁻¹ B`.
struct GramSigma {
    a: CMatrix,
    b: CMatrix,
    ctc: CMatrix,
}

impl GramSigma {
    fn new(ss: &StateSpace, ctc: &RMatrix) -> Self {
        Self { a: to_complex(&ss.a), b: to_complex(&ss.b), ctc: to_complex(ctc) }
    }

    fn at(&self, omega: f64) -> Result<f64> {
        let n = self.a.nrows();
        let lhs = CMatrix::identity(n, n) * cplx(0.0, omega) - &self.a;
        let x = solve(&lhs, &self.b).ok_or(Error::PoleAtEvaluation { re: 0.0, im: omega })?;
        let g = x.adjoint() * (&self.ctc * &x);
        Ok(hermitian_eigenvalues(&g)?.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }
}

/// Imaginary parts (≥ 0) of the Hamiltonian eigenvalues on the imaginary
/// axis at level `gamma`.
fn imaginary_crossings(ss: &StateSpace, bbt: &RMatrix, ctc: &RMatrix, gamma: f64) -> Result<Vec<f64>> {
    let n = ss.a.nrows();
    let mut h = RMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    h.view_mut((0, n), (n, n)).copy_from(&(bbt / (gamma * gamma)));
    h.view_mut((n, 0), (n, n)).copy_from(&(-ctc));
    h.view_mut((n, n), (n, n)).copy_from(&(-ss.a.transpose()));
    let tol = 1e-8 * (1.0 + h.norm());
    let mut w: Vec<f64> = numkit::eigenvalues_real(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= tol)
        .map(|z| z.im.abs())
        .collect();
    w.sort_by(|a, b| a.total_cmp(b));
    w.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    Ok(w)
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, rtol: f64) -> Result<NormPeak> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    let mut best = NormPeak { norm: f1.max(f2), omega: if f1 >= f2 { x1 } else { x2 } };
    for (w, v) in [(lo, f(lo)?), (hi, f(hi)?)] {
        if v > best.norm {
            best = NormPeak { norm: v, omega: w };
        }
    }
    let mut iter = 0;
    while hi - lo > rtol * (1.0 + best.omega.abs()) && iter < 200 {
        iter += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
        for (w, v) in [(x1, f1), (x2, f2)] {
            if v > best.norm {
                best = NormPeak { norm: v, omega: w };
            }
        }
    }
    Ok(best)
}

/// H∞ norm of a stable, strictly proper state-space system by bisection on
/// the imaginary-axis eigenvalues of the Hamiltonian matrix.
pub fn hinf_norm_ss(ss: &StateSpace, tol: f64) -> Result<NormPeak> {
    if ss.d.amax() != 0.0 {
        return Err(Error::InvalidInput("norm computation needs D = 0".into()));
    }
    let poles = ss.poles()?;
    if let Some(p) = poles.iter().find(|z| z.re >= 0.0) {
        return Err(Error::NotStable(format!("state matrix has eigenvalue {p}")));
    }
    if ss.a.nrows() == 0 || ss.b.ncols() == 0 || ss.c.nrows() == 0 {
        return Ok(NormPeak { norm: 0.0, omega: 0.0 });
    }
    let bbt = &ss.b * ss.b.transpose();
    let ctc = ss.c.transpose() * &ss.c;
    let gram = GramSigma::new(ss, &ctc);
    let sigma = |w: f64| if ss.a.nrows() <= 4 { sigma_max(ss, w) } else { gram.at(w) };

    let mut probes: Vec<f64> = vec![0.0];
    probes.extend(poles.iter().map(|z| z.im.abs()).filter(|w| *w > 0.0));
    probes.extend(grid::log_space(1e-3, 1e3, 13));
    let mut best = NormPeak { norm: 0.0, omega: 0.0 };
    for w in probes {
        let v = sigma(w)?;
        if v > best.norm {
            best = NormPeak { norm: v, omega: w };
        }
    }
    if best.norm == 0.0 {
        return Ok(best);
    }

    let mut lo = best.norm;
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while !imaginary_crossings(ss, &bbt, &ctc, hi)?.is_empty() {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Internal(format!(
                "H-infinity bisection could not bracket the norm (lower {lo:e}, upper {hi:e})"
            )));
        }
    }
    let mut crossings: Vec<f64> = Vec::new();
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        let w = imaginary_crossings(ss, &bbt, &ctc, mid)?;
        if w.is_empty() {
            hi = mid;
            continue;
        }
        lo = mid;
        // Midpoints of the crossing intervals raise the lower bound.
        let mut cands = w.clone();
        cands.extend(w.windows(2).map(|p| 0.5 * (p[0] + p[1])));
        if w.len() == 1 {
            cands.push(0.0);
        }
        for c in cands {
            let v = sigma(c)?;
            if v > best.norm {
                best = NormPeak { norm: v, omega: c };
            }
        }
        lo = lo.max(best.norm);
        crossings = w;
        // The midpoint value is usually already within tolerance of the
        // norm; one probe just above it ends the bisection early.
        let probe = lo * (1.0 + 0.5 * tol);
        if probe < hi {
            let w = imaginary_crossings(ss, &bbt, &ctc, probe)?;
            if w.is_empty() {
                hi = probe;
            } else {
                lo = probe;
                crossings = w;
            }
        }
    }

    // Local refinement inside the bracket of crossings around the peak.
    let mut pts = vec![0.0];
    pts.extend(crossings.iter().copied());
    pts.push(best.omega);
    pts.sort_by(|a, b| a.total_cmp(b));
    let below = pts.iter().copied().filter(|&x| x < best.omega).fold(0.0f64, f64::max);
    let above = pts.iter().copied().find(|&x| x > best.omega).unwrap_or(2.0 * best.omega + 1.0);
    let refined = golden_max(sigma, below.max(0.0), above, 1e-9)?;
    if refined.norm > best.norm {
        best = refined;
    }
    Ok(NormPeak { norm: best.norm.max(lo), omega: best.omega })
}

/// `[Q; K](M − N K)⁻¹` at `jω`, or `None` where the plant data have a pole.
fn closed_response<P: FrequencyModel + ?Sized>(
    p: &P,
    k: &RMatrix,
    q: Option<&RMatrix>,
    omega: f64,
) -> Result<Option<CMatrix>> {
    let s = cplx(0.0, omega);
    match (p.m_at(s), p.n_at(s)) {
        (Err(Error::PoleAtEvaluation { .. }), _) | (_, Err(Error::PoleAtEvaluation { .. })) => return Ok(None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
        _ => {}
    }
    closed_loop_at(p, k, q, s).map(Some)
}

/// `σ_max([Q; K](M − N K)⁻¹)` per frequency. For descriptor plants
/// `A + B K` and `QᵀQ + KᵀK` are formed once and the norm is read from
/// `λ_max(T* W T)`, `T = (jωE − A − BK)⁻¹`.
enum ResponseNorm<'a, P: FrequencyModel + ?Sized> {
    Descriptor { e: CMatrix, acl: CMatrix, w: CMatrix },
    Generic { p: &'a P, k: &'a RMatrix, q: Option<&'a RMatrix> },
}

impl<'a, P: FrequencyModel + ?Sized> ResponseNorm<'a, P> {
    fn new(p: &'a P, k: &'a RMatrix, q: Option<&'a RMatrix>) -> Result<Self> {
        let (kk, m) = (p.outputs(), p.inputs());
        if k.shape() != (m, kk) {
            return Err(Error::Dimension(format!("gain is {}x{}, plant needs {m}x{kk}", k.nrows(), k.ncols())));
        }
        Ok(match p.as_descriptor() {
            Some(d) => {
                let top = match q {
                    Some(q) => q.transpose() * q,
                    None => RMatrix::identity(kk, kk),
                };
                Self::Descriptor {
                    e: to_complex(d.e()),
                    acl: to_complex(&(d.a() + d.b() * k)),
                    w: to_complex(&(top + k.transpose() * k)),
                }
            }
            None => Self::Generic { p, k, q },
        })
    }

    fn at(&self, omega: f64) -> Result<Option<f64>> {
        match self {
            Self::Generic { p, k, q } => closed_response(*p, k, *q, omega)?.map(|m| spectral_norm(&m)).transpose(),
            Self::Descriptor { e, acl, w } => {
                let n = e.nrows();
                let x = e * cplx(0.0, omega) - acl;
                let Some(t) = solve(&x, &CMatrix::identity(n, n)) else { return Ok(None) };
                let g = t.adjoint() * (w * &t);
                let top = hermitian_eigenvalues(&g)?.last().copied().unwrap_or(0.0);
                Ok(Some(top.max(0.0).sqrt()))
            }
        }
    }
}

/// `(ω, σ_max)` of `[Q; K](M − N K)⁻¹` at each frequency, skipping plant
/// poles and closed-loop singularities.
pub fn frequency_response<P: FrequencyModel + ?Sized>(
    p: &P,
    k: &RMatrix,
    q: Option<&RMatrix>,
    omegas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let eval = ResponseNorm::new(p, k, q)?;
    let mut out = Vec::with_capacity(omegas.len());
    for &w in omegas {
        match eval.at(w) {
            Ok(Some(v)) => out.push((w, v)),
            Ok(None) | Err(Error::PoleAtEvaluation { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Adaptive-grid H∞ norm of `[Q; K](M − N K)⁻¹`; `Q = I` when absent.
pub fn hinf_norm_grid<P: FrequencyModel + ?Sized>(
    p: &P,
    k: &RMatrix,
    q: Option<&RMatrix>,
    grid: &FrequencyGrid,
) -> Result<NormPeak> {
    let eval = ResponseNorm::new(p, k, q)?;
    let e = grid::maximize(grid, |w| eval.at(w))?;
    Ok(e.into())
}

/// `‖(M Q†Q†* M* + N N*)⁻¹‖^{1/2}` at `jω`; `None` at plant poles.
pub fn lower_bound_at<P: FrequencyModel + ?Sized>(
    p: &P,
    weight: Option<&WeightedObjective>,
    omega: f64,
) -> Result<Option<f64>> {
    let s = cplx(0.0, omega);
    let (m, n) = match (p.m_at(s), p.n_at(s)) {
        (Ok(m), Ok(n)) => (m, n),
        (Err(Error::PoleAtEvaluation { .. }), _) | (_, Err(Error::PoleAtEvaluation { .. })) => return Ok(None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let mq = match weight {
        Some(w) => &m * to_complex(&w.q_pinv()),
        None => m,
    };
    bound_from_gram(&(&mq * mq.adjoint() + &n * n.adjoint()), omega)
}

fn bound_from_gram(gram: &CMatrix, omega: f64) -> Result<Option<f64>> {
    let ev = hermitian_eigenvalues(gram)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 1e-14 * hi) {
        return Err(Error::StandingAssumption { omega, detail: "M M* + N N* is not invertible".into() });
    }
    Ok(Some(lo.sqrt().recip()))
}

/// [`lower_bound_at`] over many frequencies. For descriptor plants the Gram
/// matrix is `P₀ + ω² P₂ + jω P₁` with real parts formed once.
fn lower_bound_sweep<P: FrequencyModel + ?Sized>(
    p: &P,
    weight: Option<&WeightedObjective>,
    grid: &FrequencyGrid,
) -> Result<NormPeak> {
    let Some(d) = p.as_descriptor() else {
        return Ok(grid::maximize(grid, |w| lower_bound_at(p, weight, w))?.into());
    };
    let (e, a, b) = (d.e(), d.a(), d.b());
    let w2 = match weight {
        Some(w) => {
            let qp = w.q_pinv();
            &qp * qp.transpose()
        }
        None => RMatrix::identity(a.nrows(), a.nrows()),
    };
    let p0 = to_complex(&(a * &w2 * a.transpose() + b * b.transpose()));
    let p1 = to_complex(&(a * &w2 * e.transpose() - e * &w2 * a.transpose()));
    let p2 = to_complex(&(e * &w2 * e.transpose()));
    let gram = |w: f64| &p0 + &p2 * cplx(w * w, 0.0) + &p1 * cplx(0.0, w);
    Ok(grid::maximize(grid, |w| bound_from_gram(&gram(w), w))?.into())
}

/// `‖[M(jω) −N(jω)]†‖`, the same quantity through the pseudoinverse.
pub fn pseudoinverse_bound_at<P: FrequencyModel + ?Sized>(p: &P, omega: f64) -> Result<f64> {
    let s = cplx(0.0, omega);
    let (m, n) = (p.m_at(s)?, p.n_at(s)?);
    let mut mn = CMatrix::zeros(m.nrows(), m.ncols() + n.ncols());
    mn.view_mut((0, 0), m.shape()).copy_from(&m);
    mn.view_mut((0, m.ncols()), n.shape()).copy_from(&(-n));
    spectral_norm(&numkit::pseudoinverse(&mn))
}

/// Supremum over the grid of [`lower_bound_at`] with its argmax.
pub fn lower_bound<P: FrequencyModel + ?Sized>(p: &P, grid: &FrequencyGrid) -> Result<NormPeak> {
    lower_bound_sweep(p, None, grid)
}

pub fn weighted_lower_bound<P: FrequencyModel + ?Sized>(
    p: &P,
    w: &WeightedObjective,
    grid: &FrequencyGrid,
) -> Result<NormPeak> {
    lower_bound_sweep(p, Some(w), grid)
}

fn trim_noise(p: &Polynomial) -> Polynomial {
    let c = p.coeffs();
    let scale = c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut v = c.to_vec();
    while v.last().is_some_and(|x| x.abs() <= 1e-13 * scale) {
        v.pop();
    }
    Polynomial::new(v).expect("finite coefficients")
}

fn poly_det(m: &[Vec<Polynomial>]) -> Polynomial {
    match m.len() {
        0 => Polynomial::constant(1.0),
        1 => m[0][0].clone(),
        n => {
            let mut acc = Polynomial::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Polynomial>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, p)| p.clone()).collect())
                    .collect();
                let term = m[0][j].mul(&poly_det(&minor));
                acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }
    }
}

/// Largest `k` accepted by the polynomial determinant of the pole scan.
pub const POLE_SCAN_MAX_OUTPUTS: usize = 6;
/// Largest determinant degree accepted by the pole scan.
pub const POLE_SCAN_MAX_DEGREE: usize = 50;

/// Numerator of `det(M − N K)` after clearing the row denominators.
pub fn closed_loop_determinant(p: &RationalPlant, k: &RMatrix) -> Result<Polynomial> {
    let (kk, m) = (p.outputs(), p.inputs());
    if k.shape() != (m, kk) {
        return Err(Error::Dimension(format!("gain is {}x{}, plant needs {m}x{kk}", k.nrows(), k.ncols())));
    }
    if kk > POLE_SCAN_MAX_OUTPUTS {
        return Err(Error::InvalidInput(format!(
            "pole scan supports at most {POLE_SCAN_MAX_OUTPUTS} outputs, plant has {kk}"
        )));
    }
    let mut rows = Vec::with_capacity(kk);
    for i in 0..kk {
        let entries: Vec<_> =
            (0..kk).map(|j| p.m().entry(i, j)).chain((0..m).map(|l| p.n().entry(i, l))).collect();
        let mut distinct: Vec<&Polynomial> = Vec::new();
        for e in &entries {
            if !distinct.iter().any(|d| *d == &e.den) {
                distinct.push(&e.den);
            }
        }
        // Product of every distinct denominator except `den`.
        let cofactor = |den: &Polynomial| {
            distinct
                .iter()
                .filter(|d| **d != den)
                .fold(Polynomial::constant(1.0), |acc, d| acc.mul(d))
        };
        let row: Vec<Polynomial> = (0..kk)
            .map(|j| {
                let mij = p.m().entry(i, j);
                let mut acc = mij.num.mul(&cofactor(&mij.den));
                for l in 0..m {
                    let nil = p.n().entry(i, l);
                    if k[(l, j)] != 0.0 {
                        acc = acc.sub(&nil.num.mul(&cofactor(&nil.den)).scale(k[(l, j)]));
                    }
                }
                acc
            })
            .collect();
        rows.push(row);
    }
    let det = trim_noise(&poly_det(&rows));
    if det.degree() > POLE_SCAN_MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "closed-loop determinant has degree {} (limit {POLE_SCAN_MAX_DEGREE})",
            det.degree()
        )));
    }
    Ok(det)
}

fn inverse_norm_at<P: FrequencyModel + ?Sized>(p: &P, k: &RMatrix, s: Complex64) -> Option<f64> {
    let lhs = p.m_at(s).ok()? - p.n_at(s).ok()? * to_complex(k);
    match solve(&lhs, &CMatrix::identity(lhs.nrows(), lhs.nrows())) {
        Some(inv) => spectral_norm(&inv).ok(),
        None => Some(f64::INFINITY),
    }
}

/// Stability of `(M − N K)⁻¹` for a rational plant: roots of the cleared
/// determinant in the closed right half plane are confirmed by the growth
/// of `‖(M − N K)⁻¹‖` when approaching them, and properness is checked at
/// two high frequencies.
pub fn pole_scan_stability(p: &RationalPlant, k: &RMatrix, rtol: f64) -> Result<Stability> {
    let det = closed_loop_determinant(p, k)?;
    let unstable = |detail: String, abscissa: Option<f64>| Stability {
        stable: false,
        abscissa,
        method: StabilityMethod::PoleScan,
        detail: Some(detail),
    };
    if det.is_zero() {
        return Ok(unstable("M − N K is singular for every s".into(), None));
    }
    let roots = det.roots()?;
    let mut abscissa: Option<f64> = None;
    for r in &roots {
        let margin = rtol * (1.0 + r.norm());
        if r.re < -margin {
            continue;
        }
        let scale = 1.0 + r.norm();
        let near = inverse_norm_at(p, k, r + cplx(1e-5 * scale, 0.0));
        let far = inverse_norm_at(p, k, r + cplx(1e-3 * scale, 0.0));
        let confirmed = match (near, far) {
            (Some(a), Some(b)) => a.is_infinite() || a > 10.0 * b,
            _ => false,
        };
        if confirmed {
            abscissa = Some(abscissa.map_or(r.re, |a: f64| a.max(r.re)));
        }
    }
    let mut confirmed_abscissa = abscissa;
    let stable_roots: Vec<f64> = roots.iter().map(|r| r.re).filter(|re| *re < 0.0).collect();
    if confirmed_abscissa.is_none() {
        confirmed_abscissa = stable_roots.iter().copied().reduce(f64::max);
    }
    if let Some(a) = abscissa {
        return Ok(unstable(format!("closed-loop pole with real part {a:e}"), Some(a)));
    }
    let (lo, hi) = (inverse_norm_at(p, k, cplx(0.0, 1e6)), inverse_norm_at(p, k, cplx(0.0, 1e8)));
    if let (Some(lo), Some(hi)) = (lo, hi) {
        if hi > 10.0 * lo.max(f64::MIN_POSITIVE) {
            return Ok(unstable("(M − N K)⁻¹ is not proper".into(), confirmed_abscissa));
        }
    }
    Ok(Stability { stable: true, abscissa: confirmed_abscissa, method: StabilityMethod::PoleScan, detail: None })
}

/// Outcome of the symmetric, commuting hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub holds: bool,
    pub e_symmetric: bool,
    pub a_symmetric: bool,
    pub e_positive_definite: bool,
    pub a_negative_definite: bool,
    pub commuting: bool,
    pub commutator_norm: f64,
}

/// `E = Eᵀ ≻ 0`, `A = Aᵀ ≺ 0` and `E A = A E`.
pub fn corollary2_hypotheses(p: &DescriptorPlant) -> HypothesisReport {
    let (e, a) = (p.e(), p.a());
    let norm = |m: &RMatrix| spectral_norm_real(m).unwrap_or(f64::INFINITY);
    let (ne, na) = (norm(e), norm(a));
    let e_symmetric = norm(&(e - e.transpose())) <= 1e-12 * ne;
    let a_symmetric = norm(&(a - a.transpose())) <= 1e-12 * na;
    let e_positive_definite =
        e_symmetric && numkit::symmetric_eigenvalues(e).map(|v| v.first().is_none_or(|&l| l > 0.0)).unwrap_or(false);
    let a_negative_definite =
        a_symmetric && numkit::symmetric_eigenvalues(a).map(|v| v.last().is_none_or(|&l| l < 0.0)).unwrap_or(false);
    let commutator_norm = norm(&(e * a - a * e));
    let commuting = commutator_norm <= 1e-10 * ne * na;
    HypothesisReport {
        holds: e_symmetric && a_symmetric && e_positive_definite && a_negative_definite && commuting,
        e_symmetric,
        a_symmetric,
        e_positive_definite,
        a_negative_definite,
        commuting,
        commutator_norm,
    }
}

/// Result of the frequency-inequality test for descriptor plants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub holds: bool,
    /// Smallest eigenvalue of the tested matrix found on the grid.
    pub min_eigenvalue: f64,
    pub worst_omega: f64,
    /// Frequencies were sampled on `[0, checked_up_to]`.
    pub checked_up_to: f64,
    /// True when the quadratic term provably dominates beyond `checked_up_to`.
    pub tail_rule: bool,
}

/// Checks `ω² F G⁻¹ Fᵀ + jω (Fᵀ − F) + G − ‖G⁻¹‖⁻¹ I ⪰ 0` with `F = E Aᵀ`,
/// `G = A Aᵀ + B Bᵀ`.
pub fn corollary1_inequality(p: &DescriptorPlant, grid: &FrequencyGrid, tol: f64) -> Result<InequalityReport> {
    let n = p.states();
    let f = p.f_matrix();
    let g = p.g_matrix();
    let g_inv = solve_real(&g, &RMatrix::identity(n, n))
        .ok_or_else(|| Error::NearSingular { what: "A Aᵀ + B Bᵀ".into(), rcond: 0.0 })?;
    let c = numkit::symmetric_eigenvalues(&g)?.first().copied().unwrap_or(0.0);
    let quad = &f * &g_inv * f.transpose();
    let quad = (&quad + quad.transpose()) * 0.5;
    let skew = f.transpose() - &f;
    let lq = numkit::symmetric_eigenvalues(&quad)?.first().copied().unwrap_or(0.0);
    let s = spectral_norm_real(&skew)?;
    let qn = spectral_norm_real(&quad)?;

    let (upper, tail_rule) = if lq > 1e-12 * qn {
        ((s + (s * s + 4.0 * lq * c).sqrt()) / (2.0 * lq), true)
    } else {
        (grid.omega_max.max(1e6), false)
    };
    let sweep = FrequencyGrid {
        omega_min: grid.omega_min.min(upper * 1e-8),
        omega_max: upper.max(grid.omega_min * 10.0),
        ..grid.clone()
    };
    let (gc, quadc, skewc) = (to_complex(&g), to_complex(&quad), to_complex(&skew));
    let shift = CMatrix::identity(n, n) * cplx(c, 0.0);
    let worst = grid::minimize(&sweep, |w| {
        let h = &quadc * cplx(w * w, 0.0) + &skewc * cplx(0.0, w) + &gc - &shift;
        Ok(Some(hermitian_eigenvalues(&h)?.first().copied().unwrap_or(0.0)))
    })?;
    let slack = tol * spectral_norm_real(&g)?.max(1.0);
    Ok(InequalityReport {
        holds: worst.value >= -slack,
        min_eigenvalue: worst.value,
        worst_omega: worst.omega,
        checked_up_to: sweep.omega_max,
        tail_rule,
    })
}

/// Zero pattern of a gain: entries with `|K_ij| ≤ 1e-12 · max |K|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    /// `true` marks a zero entry; row-major.
    pub zero_mask: Vec<Vec<bool>>,
    pub zeros: usize,
    pub nonzeros: usize,
    pub threshold: f64,
}

pub fn sparsity_pattern(k: &RMatrix) -> Sparsity {
    sparsity_with_threshold(k, 1e-12 * numkit::max_abs(k))
}

/// Zero pattern with an absolute threshold.
pub fn sparsity_with_threshold(k: &RMatrix, threshold: f64) -> Sparsity {
    let zero_mask: Vec<Vec<bool>> =
        (0..k.nrows()).map(|i| (0..k.ncols()).map(|j| k[(i, j)].abs() <= threshold).collect()).collect();
    let zeros = zero_mask.iter().flatten().filter(|z| **z).count();
    Sparsity { zero_mask, zeros, nonzeros: k.len() - zeros, threshold }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Optimal,
    StableButSuboptimal,
    Unstable,
}

/// Evidence that a gain does (or does not) meet the sufficient optimality
/// criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub stable: bool,
    pub stability: Stability,
    /// Absent when the closed loop is unstable.
    pub hinf_norm: Option<f64>,
    pub peak_frequency: Option<f64>,
    pub lower_bound: f64,
    pub lower_bound_frequency: f64,
    pub gap: Option<f64>,
    pub omega0: f64,
    pub verdict: Verdict,
    /// Names of the criteria that failed.
    pub failed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequality: Option<InequalityReport>,
    pub tolerances: Tolerances,
}

/// Plant accepted by [`certify_optimality`].
#[derive(Debug, Clone, Copy)]
pub enum Plant<'a> {
    Descriptor(&'a DescriptorPlant),
    Rational(&'a RationalPlant),
}

impl Plant<'_> {
    fn model(&self) -> &dyn FrequencyModel {
        match self {
            Plant::Descriptor(p) => *p,
            Plant::Rational(p) => *p,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    pub grid: FrequencyGrid,
    pub tolerances: Tolerances,
    pub weight: Option<WeightedObjective>,
}

/// State-space closed loop with output `[Q; K] x`.
pub fn weighted_closed_loop(p: &DescriptorPlant, k: &RMatrix, q: Option<&RMatrix>) -> Result<StateSpace> {
    let n = p.states();
    let e_inv = p.e_inverse()?;
    let a_cl = &e_inv * (p.a() + p.b() * k);
    let top = q.cloned().unwrap_or_else(|| RMatrix::identity(n, n));
    if top.ncols() != n {
        return Err(Error::Dimension(format!("Q has {} columns, plant has {n} states", top.ncols())));
    }
    let mut c = RMatrix::zeros(top.nrows() + k.nrows(), n);
    c.view_mut((0, 0), top.shape()).copy_from(&top);
    c.view_mut((top.nrows(), 0), k.shape()).copy_from(k);
    let d = RMatrix::zeros(c.nrows(), n);
    StateSpace::new(a_cl, e_inv, c, d)
}

/// Runs stability, the closed-loop norm and the lower bound, and combines
/// them into a verdict. Numerical failures inside the checks are returned
/// as errors; failed criteria are reported in the certificate.
pub fn certify_optimality(plant: Plant<'_>, g: &Gain, opts: &CertifyOptions) -> Result<Certificate> {
    let tol = &opts.tolerances;
    let model = plant.model();
    let q = opts.weight.as_ref().map(|w| w.q());
    if g.k.shape() != (model.inputs(), model.outputs()) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, plant needs {}x{}",
            g.k.nrows(),
            g.k.ncols(),
            model.inputs(),
            model.outputs()
        )));
    }

    let (stability, hypotheses, inequality) = match plant {
        Plant::Descriptor(p) => {
            let h = corollary2_hypotheses(p);
            let ineq = if h.holds { None } else { Some(corollary1_inequality(p, &opts.grid, tol.inequality_tol)?) };
            (pencil_stability_with(p, g, tol.stability_rtol)?, Some(h), ineq)
        }
        Plant::Rational(p) => (pole_scan_stability(p, &g.k, tol.stability_rtol)?, None, None),
    };

    let bound = match &opts.weight {
        Some(w) => weighted_lower_bound(model, w, &opts.grid)?,
        None => lower_bound(model, &opts.grid)?,
    };

    let mut failed = Vec::new();
    let (norm, peak) = if stability.stable {
        let np = match plant {
            Plant::Descriptor(p) => hinf_norm_ss(&weighted_closed_loop(p, &g.k, q)?, tol.hinf_rtol)?,
            Plant::Rational(p) => hinf_norm_grid(p, &g.k, q, &opts.grid)?,
        };
        (Some(np.norm), Some(np.omega))
    } else {
        failed.push("stability".to_string());
        (None, None)
    };

    let mut peak_frequency = peak;
    if let (Some(norm), Some(peak)) = (norm, peak) {
        if (norm - bound.norm).abs() > tol.norm_rtol * (1.0 + bound.norm) {
            failed.push("optimal-value".to_string());
        }
        let within_window = (peak - g.omega0).abs() <= opts.grid.resolution_at(g.omega0);
        let at_omega0 = ResponseNorm::new(model, &g.k, q)?.at(g.omega0)?;
        let ties = at_omega0.is_some_and(|v| (norm - v).abs() <= tol.norm_rtol * (1.0 + norm));
        if ties && !within_window {
            peak_frequency = Some(g.omega0);
        }
        if !(within_window || ties) {
            failed.push("peak-frequency".to_string());
        }
    }

    let verdict = if !stability.stable {
        Verdict::Unstable
    } else if failed.is_empty() {
        Verdict::Optimal
    } else {
        Verdict::StableButSuboptimal
    };
    Ok(Certificate {
        stable: stability.stable,
        stability,
        hinf_norm: norm,
        peak_frequency,
        lower_bound: bound.norm,
        lower_bound_frequency: bound.omega,
        gap: norm.map(|n| n - bound.norm),
        omega0: g.omega0,
        verdict,
        failed,
        hypotheses,
        inequality,
        tolerances: tol.clone(),
    })
}

/// The rational plant of one mode of the machine network:
/// `M(s) = m s + d + λ/s`, `N = 1`.
pub fn machine_mode_plant(m: f64, d: f64, lambda: f64) -> Result<RationalPlant> {
    use crate::sysmodel::RationalEntry;
    let entry = if lambda > 0.0 {
        RationalEntry::new(Polynomial::new(vec![lambda, d, m])?, Polynomial::s())?
    } else {
        RationalEntry::polynomial(Polynomial::new(vec![d, m])?)
    };
    RationalPlant::scalar(entry, RationalEntry::constant(1.0))
}

/// Certificate for one machine-network mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCertificate {
    pub lambda: f64,
    pub certificate: Certificate,
}

/// Certifies each mode of a machine-network gain separately.
pub fn certify_machine_modes(m: f64, d: f64, g: &Gain, opts: &CertifyOptions) -> Result<Vec<ModeCertificate>> {
    g.modes
        .iter()
        .map(|mode| {
            let plant = machine_mode_plant(m, d, mode.lambda)?;
            let mode_gain = Gain::new(RMatrix::from_element(1, 1, mode.gain), mode.omega0, g.formula);
            Ok(ModeCertificate { lambda: mode.lambda, certificate: certify_optimality(Plant::Rational(&plant), &mode_gain, opts)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{close_loop, GainFormula, RationalEntry};
    use crate::synth::{closed_form_gain, descriptor_gain, droop_gain};
    use approx::assert_relative_eq;

    fn rmat(r: usize, c: usize, v: &[f64]) -> RMatrix {
        RMatrix::from_row_slice(r, c, v)
    }

    fn poly(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec()).unwrap()
    }

    fn example1() -> DescriptorPlant {
        DescriptorPlant::standard(rmat(1, 1, &[-1.0]), rmat(1, 1, &[1.0])).unwrap()
    }

    fn example1_rational() -> RationalPlant {
        RationalPlant::scalar(RationalEntry::polynomial(poly(&[1.0, 1.0])), RationalEntry::constant(1.0)).unwrap()
    }

    fn example2() -> RationalPlant {
        RationalPlant::scalar(
            RationalEntry::polynomial(poly(&[4.0, 4.0, 1.0])),
            RationalEntry::polynomial(poly(&[1.0, 1.0])),
        )
        .unwrap()
    }

    fn example3(a: f64) -> DescriptorPlant {
        DescriptorPlant::standard(rmat(2, 2, &[-a, a, 0.0, -1.0]), rmat(2, 1, &[1.0, 0.0])).unwrap()
    }

    fn droop(omega0: f64, zeta: f64) -> RationalPlant {
        let m = RationalEntry::new(poly(&[1.0, 2.0 * zeta / omega0, 1.0 / (omega0 * omega0)]), Polynomial::s()).unwrap();
        RationalPlant::scalar(m, RationalEntry::constant(1.0)).unwrap()
    }

    fn gain(k: f64, omega0: f64) -> Gain {
        Gain::new(rmat(1, 1, &[k]), omega0, GainFormula::Remark1)
    }

    #[test]
    fn pencil_example1() {
        let s = pencil_stability(&example1(), &gain(-1.0, 0.0)).unwrap();
        assert!(s.stable);
        assert_relative_eq!(s.abscissa.unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn pencil_example3() {
        let p = example3(1.0);
        let s = pencil_stability(&p, &descriptor_gain(&p).unwrap()).unwrap();
        assert!(s.stable);
        assert_relative_eq!(s.abscissa.unwrap(), -1.0, epsilon = 1e-12);
        for a in [1e-2, 0.3, 5.0, 100.0] {
            let p = example3(a);
            assert!(pencil_stability(&p, &descriptor_gain(&p).unwrap()).unwrap().stable, "a = {a}");
        }
    }

    #[test]
    fn ss_norm_example1() {
        let ss = close_loop(&example1(), &gain(-1.0, 0.0)).unwrap();
        let np = hinf_norm_ss(&ss, 1e-8).unwrap();
        assert_relative_eq!(np.norm, 0.5f64.sqrt(), max_relative = 1e-8);
        assert!(np.omega.abs() < 1e-6);
    }

    #[test]
    fn ss_norm_first_order_lag() {
        let ss = StateSpace::new(rmat(1, 1, &[-1.0]), rmat(1, 1, &[1.0]), rmat(1, 1, &[1.0]), rmat(1, 1, &[0.0])).unwrap();
        let np = hinf_norm_ss(&ss, 1e-8).unwrap();
        assert_relative_eq!(np.norm, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn ss_norm_example3() {
        let p = example3(1.0);
        let ss = close_loop(&p, &descriptor_gain(&p).unwrap()).unwrap();
        let np = hinf_norm_ss(&ss, 1e-8).unwrap();
        assert_relative_eq!(np.norm, (1.0 + 0.5f64.sqrt()).sqrt(), max_relative = 1e-8);
        let dense = (0..20001).map(|i| sigma_max(&ss, i as f64 * 1e-3)).map(Result::unwrap).fold(0.0, f64::max);
        assert!(np.norm >= dense * (1.0 - 1e-8));
    }

    #[test]
    fn ss_norm_resonant_peak() {
        // Lightly damped second-order lag; peak near ω = 1.
        let a = rmat(2, 2, &[0.0, 1.0, -1.0, -0.02]);
        let ss = StateSpace::new(a, rmat(2, 1, &[0.0, 1.0]), rmat(1, 2, &[1.0, 0.0]), rmat(1, 1, &[0.0])).unwrap();
        let np = hinf_norm_ss(&ss, 1e-10).unwrap();
        let zeta: f64 = 0.01;
        let exact = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        assert_relative_eq!(np.norm, exact, max_relative = 1e-8);
        assert_relative_eq!(np.omega, (1.0 - 2.0 * zeta * zeta).sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn ss_norm_rejects_unstable() {
        let ss = StateSpace::new(rmat(1, 1, &[1.0]), rmat(1, 1, &[1.0]), rmat(1, 1, &[1.0]), rmat(1, 1, &[0.0])).unwrap();
        assert!(matches!(hinf_norm_ss(&ss, 1e-8), Err(Error::NotStable(_))));
    }

    #[test]
    fn grid_norm_example2() {
        let np = hinf_norm_grid(&example2(), &rmat(1, 1, &[-0.25]), None, &FrequencyGrid::default()).unwrap();
        assert_relative_eq!(np.norm, 1.0 / 17f64.sqrt(), max_relative = 1e-9);
        assert_eq!(np.omega, 0.0);
    }

    #[test]
    fn grid_norm_droop_peak() {
        let np = hinf_norm_grid(&droop(2.0, 0.5), &rmat(1, 1, &[-2.0]), None, &FrequencyGrid::default()).unwrap();
        assert!((np.omega - 2.0).abs() < 1e-4, "{np:?}");
    }

    #[test]
    fn grid_and_ss_agree_example1() {
        let grid_np = hinf_norm_grid(&example1_rational(), &rmat(1, 1, &[-1.0]), None, &FrequencyGrid::default()).unwrap();
        let ss_np = hinf_norm_ss(&close_loop(&example1(), &gain(-1.0, 0.0)).unwrap(), 1e-8).unwrap();
        assert!((grid_np.norm - ss_np.norm).abs() < 1e-6);
    }

    #[test]
    fn lower_bounds() {
        let g = FrequencyGrid::default();
        let b1 = lower_bound(&example1_rational(), &g).unwrap();
        assert_relative_eq!(b1.norm, 0.5f64.sqrt(), max_relative = 1e-12);
        assert_eq!(b1.omega, 0.0);
        let b2 = lower_bound(&example2(), &g).unwrap();
        assert_relative_eq!(b2.norm, 1.0 / 17f64.sqrt(), max_relative = 1e-12);
        let b3 = lower_bound(&droop(2.0, 0.5), &g).unwrap();
        assert!((b3.omega - 2.0).abs() < 1e-4);
    }

    #[test]
    fn lower_bound_matches_brute_force_example2() {
        let bound = lower_bound(&example2(), &FrequencyGrid::default()).unwrap().norm;
        let brute = (0..100_000)
            .map(|i| {
                let w = i as f64 * 1e-3;
                let m = cplx(4.0 - w * w, 4.0 * w);
                let n = cplx(1.0, w);
                (m.norm_sqr() + n.norm_sqr()).sqrt().recip()
            })
            .fold(0.0, f64::max);
        assert!((bound - brute).abs() < 1e-9);
    }

    #[test]
    fn certify_example1() {
        let c = certify_optimality(Plant::Descriptor(&example1()), &gain(-1.0, 0.0), &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Optimal);
        assert_relative_eq!(c.hinf_norm.unwrap(), 0.5f64.sqrt(), max_relative = 1e-8);
        assert_relative_eq!(c.lower_bound, 0.5f64.sqrt(), max_relative = 1e-12);
        let r = certify_optimality(Plant::Rational(&example1_rational()), &gain(-1.0, 0.0), &CertifyOptions::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::Optimal);
    }

    #[test]
    fn certify_example1_open_loop_is_suboptimal() {
        let c = certify_optimality(Plant::Rational(&example1_rational()), &gain(0.0, 0.0), &CertifyOptions::default())
            .unwrap();
        assert_eq!(c.verdict, Verdict::StableButSuboptimal);
        assert_relative_eq!(c.hinf_norm.unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn certify_example2_unstable_gain() {
        let c = certify_optimality(Plant::Rational(&example2()), &gain(5.0, 0.0), &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Unstable);
        assert!(c.hinf_norm.is_none());
        let g = closed_form_gain(&example2(), 0.0).unwrap();
        let ok = certify_optimality(Plant::Rational(&example2()), &g, &CertifyOptions::default()).unwrap();
        assert_eq!(ok.verdict, Verdict::Optimal);
    }

    #[test]
    fn certify_droop() {
        let p = droop(2.0, 0.5);
        let c = certify_optimality(Plant::Rational(&p), &droop_gain(2.0, 0.5).unwrap(), &CertifyOptions::default())
            .unwrap();
        assert_eq!(c.verdict, Verdict::Optimal, "{c:?}");
        let optimum = (4.0 * 0.25 / 4.0 + 1.0f64).powf(-0.5);
        assert_relative_eq!(c.hinf_norm.unwrap(), optimum, max_relative = 1e-8);
    }

    #[test]
    fn certify_destabilizing_closed_form() {
        // M = 1, N = 1/(s − 1): the explicit gain K = 1 leaves a pole at s = 2.
        let p = RationalPlant::scalar(
            RationalEntry::constant(1.0),
            RationalEntry::new(Polynomial::constant(1.0), poly(&[-1.0, 1.0])).unwrap(),
        )
        .unwrap();
        let g = closed_form_gain(&p, 0.0).unwrap();
        assert_relative_eq!(g.k[(0, 0)], 1.0, epsilon = 1e-15);
        let c = certify_optimality(Plant::Rational(&p), &g, &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Unstable);
        assert_relative_eq!(c.stability.abscissa.unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn pole_scan_ignores_cancelled_roots() {
        // M = (s − 1)/(s − 1) has a removable factor; no closed-loop pole at 1.
        let m = RationalEntry::new(poly(&[-1.0, 1.0]), poly(&[-1.0, 1.0])).unwrap();
        let p = RationalPlant::new_unchecked(
            crate::sysmodel::RationalMatrix::scalar(m),
            crate::sysmodel::RationalMatrix::scalar(RationalEntry::constant(1.0)),
        )
        .unwrap();
        let s = pole_scan_stability(&p, &rmat(1, 1, &[-1.0]), 1e-9).unwrap();
        assert!(s.stable, "{s:?}");
    }

    #[test]
    fn pole_scan_flags_improper_inverse() {
        let p = RationalPlant::new_unchecked(
            crate::sysmodel::RationalMatrix::scalar(RationalEntry::new(Polynomial::constant(1.0), poly(&[1.0, 1.0])).unwrap()),
            crate::sysmodel::RationalMatrix::scalar(RationalEntry::constant(0.0)),
        )
        .unwrap();
        assert!(!pole_scan_stability(&p, &rmat(1, 1, &[0.0]), 1e-9).unwrap().stable);
    }

    #[test]
    fn corollary1_examples() {
        let g = FrequencyGrid::default();
        assert!(corollary1_inequality(&example3(1.0), &g, 1e-9).unwrap().holds);
        let sym = DescriptorPlant::standard(rmat(2, 2, &[-2.0, 1.0, 1.0, -3.0]), RMatrix::identity(2, 2)).unwrap();
        let r = corollary1_inequality(&sym, &g, 1e-9).unwrap();
        assert!(r.holds && r.tail_rule);
    }

    fn brute_force_min_eigenvalue(p: &DescriptorPlant) -> f64 {
        let (f, gm) = (p.f_matrix(), p.g_matrix());
        let n = p.states();
        let gi = gm.clone().try_inverse().unwrap();
        let c = numkit::symmetric_eigenvalues(&gm).unwrap()[0];
        (0..100_000)
            .map(|i| {
                let w = if i == 0 { 0.0 } else { 10f64.powf(-4.0 + 8.0 * i as f64 / 99_999.0) };
                let h = to_complex(&(&f * &gi * f.transpose() * (w * w) + &gm - RMatrix::identity(n, n) * c))
                    + to_complex(&(f.transpose() - &f)) * cplx(0.0, w);
                hermitian_eigenvalues(&h).unwrap()[0]
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn corollary1_agrees_with_dense_grid() {
        // Strongly asymmetric but triangular: the dense grid finds no violation.
        let tri = DescriptorPlant::standard(rmat(2, 2, &[-1.0, 10.0, 0.0, -1.0]), RMatrix::identity(2, 2) * 0.01).unwrap();
        let r = corollary1_inequality(&tri, &FrequencyGrid::default(), 1e-9).unwrap();
        assert!(brute_force_min_eigenvalue(&tri) > -1e-9);
        assert!(r.holds, "{r:?}");
        // A weakly actuated rotation violates it.
        let rot = DescriptorPlant::standard(rmat(2, 2, &[-1.0, 1.0, -1.0, -1.0]), RMatrix::identity(2, 2) * 0.01).unwrap();
        let r = corollary1_inequality(&rot, &FrequencyGrid::default(), 1e-9).unwrap();
        let brute = brute_force_min_eigenvalue(&rot);
        assert!(brute < -0.5);
        assert!(!r.holds);
        assert!(r.min_eigenvalue <= brute + 1e-9);
    }

    #[test]
    fn hypotheses() {
        let buffer = DescriptorPlant::standard(rmat(2, 2, &[-1.0, 0.0, 0.0, -2.0]), rmat(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap();
        assert!(corollary2_hypotheses(&buffer).holds);
        let thermal = DescriptorPlant::new(
            rmat(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            rmat(2, 2, &[-2.0, 1.0, 1.0, -2.0]),
            RMatrix::identity(2, 2),
        )
        .unwrap();
        let h = corollary2_hypotheses(&thermal);
        assert!(!h.holds && !h.commuting && h.a_negative_definite);
        assert!(!corollary2_hypotheses(&example3(1.0)).holds);
    }

    #[test]
    fn sparsity() {
        let k = rmat(3, 3, &[1.0, -1.0 / 3.0, 0.0, 0.0, -1.0 / 3.0, 0.0, 0.0, 1.0 / 3.0, -0.5]);
        assert_eq!(sparsity_pattern(&k).zeros, 4);
        let k_num = rmat(3, 3, &[0.93, -0.11, 0.00, -0.05, -0.17, -0.01, 0.04, 0.16, -0.26]);
        let s = sparsity_pattern(&k_num);
        assert_eq!((s.zeros, s.nonzeros), (1, 8));
        assert!(s.zero_mask[0][2]);
        let z = sparsity_pattern(&RMatrix::zeros(2, 3));
        assert_eq!(z.zeros, 6);
    }

    #[test]
    fn machine_modes_certify() {
        let l = rmat(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let g = crate::synth::machine_modal_gains(0.5, 0.8, &l).unwrap();
        let certs = certify_machine_modes(0.5, 0.8, &g, &CertifyOptions::default()).unwrap();
        assert_eq!(certs.len(), 3);
        for c in certs {
            assert_eq!(c.certificate.verdict, Verdict::Optimal, "{c:?}");
        }
    }

    #[test]
    fn weighted_scalar_bound() {
        let w = WeightedObjective::new(rmat(1, 1, &[2.0])).unwrap();
        let b = weighted_lower_bound(&example1_rational(), &w, &FrequencyGrid::default()).unwrap();
        assert_relative_eq!(b.norm, 0.8f64.sqrt(), max_relative = 1e-12);
        let g = crate::synth::weighted_gain(&example1_rational(), &w, 0.0).unwrap();
        let opts = CertifyOptions { weight: Some(w), ..Default::default() };
        let c = certify_optimality(Plant::Rational(&example1_rational()), &g, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Optimal, "{c:?}");
    }
}
