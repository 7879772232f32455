//! Network application models compiled to descriptor plants.
//!
//! Node indices are zero-based everywhere.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, RMatrix};
use crate::sysmodel::DescriptorPlant;

/// Per-kind parameters of a [`NetworkModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NetworkParams {
    /// Diffusive buffers `ẋ_i = −a_i x_i + Σ (u_ji − u_ij) + w_i`.
    Buffer { rates: Vec<f64> },
    /// Cascade of irrigation pools; edges are implied (pool i feeds i + 1).
    Irrigation { alpha: Vec<f64>, beta: Vec<f64>, tau: Vec<f64> },
    /// Rooms exchanging heat along the edges.
    Thermal {
        masses: Vec<f64>,
        heat_capacity: f64,
        losses: Vec<f64>,
        /// One conductance per edge.
        conductances: Vec<f64>,
        #[serde(default)]
        outdoor_temperature: f64,
    },
    /// Identical synchronous machines coupled through a weighted Laplacian.
    Machine {
        inertia: f64,
        damping: f64,
        /// Edge weights (default 1) used when `laplacian` is absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        laplacian: Option<Vec<Vec<f64>>>,
    },
    /// Spatially invariant ring with `A_ij = g[(j − i) mod n]`.
    Circulant { generator: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub nodes: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    #[serde(flatten)]
    pub params: NetworkParams,
}

/// Validated inputs for the machine-network gain.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineNetwork {
    pub inertia: f64,
    pub damping: f64,
    pub laplacian: RMatrix,
}

/// Compiled irrigation cascade with its disturbance map.
#[derive(Debug, Clone, PartialEq)]
pub struct IrrigationPlant {
    pub plant: DescriptorPlant,
    pub h: RMatrix,
}

/// Compiled circulant plant; `hurwitz` is false when `A` has an eigenvalue
/// with nonnegative real part.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantPlant {
    pub plant: DescriptorPlant,
    pub hurwitz: bool,
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().enumerate().find(|(_, x)| !(**x > 0.0 && x.is_finite())) {
        Some((i, x)) => Err(Error::InvalidParameter(format!("{name}[{i}] = {x}; must be positive"))),
        None => Ok(()),
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{name} has {} entries, expected {n}", v.len())));
    }
    Ok(())
}

impl NetworkModel {
    pub fn buffer(rates: Vec<f64>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let net = Self { nodes: rates.len(), edges, params: NetworkParams::Buffer { rates } };
        net.validate()?;
        Ok(net)
    }

    pub fn irrigation(alpha: Vec<f64>, beta: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let net = Self { nodes: alpha.len(), edges: vec![], params: NetworkParams::Irrigation { alpha, beta, tau } };
        net.validate()?;
        Ok(net)
    }

    pub fn circulant(generator: Vec<f64>) -> Result<Self> {
        let net = Self { nodes: generator.len(), edges: vec![], params: NetworkParams::Circulant { generator } };
        net.validate()?;
        Ok(net)
    }

    pub fn kind(&self) -> &'static str {
        match self.params {
            NetworkParams::Buffer { .. } => "buffer",
            NetworkParams::Irrigation { .. } => "irrigation",
            NetworkParams::Thermal { .. } => "thermal",
            NetworkParams::Machine { .. } => "machine",
            NetworkParams::Circulant { .. } => "circulant",
        }
    }

    /// Edge endpoints in range, no self loops, no repeated pairs, and
    /// per-kind parameter lengths and signs.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes;
        let mut seen = BTreeSet::new();
        for &(i, j) in &self.edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) has an endpoint outside 0..{n}")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) is a self loop")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i, j));
            }
        }
        match &self.params {
            NetworkParams::Buffer { rates } => {
                check_len("rates", rates, n)?;
                if let Some((i, a)) = rates.iter().enumerate().find(|(_, a)| !(**a > 0.0 && a.is_finite())) {
                    return Err(Error::InvalidRate(format!("a_{i} = {a}; requires a_i > 0 for all i")));
                }
            }
            NetworkParams::Irrigation { alpha, beta, tau } => {
                if n == 0 {
                    return Err(Error::InvalidParameter("irrigation needs at least one pool".into()));
                }
                for (name, v) in [("alpha", alpha), ("beta", beta), ("tau", tau)] {
                    check_len(name, v, n)?;
                    check_positive(name, v)?;
                }
            }
            NetworkParams::Thermal { masses, heat_capacity, losses, conductances, outdoor_temperature } => {
                check_len("masses", masses, n)?;
                check_len("losses", losses, n)?;
                check_len("conductances", conductances, self.edges.len())?;
                check_positive("masses", masses)?;
                check_positive("heat_capacity", &[*heat_capacity])?;
                check_positive("losses", losses)?;
                check_positive("conductances", conductances)?;
                if !outdoor_temperature.is_finite() {
                    return Err(Error::InvalidParameter("outdoor_temperature must be finite".into()));
                }
            }
            NetworkParams::Machine { inertia, damping, weights, laplacian } => {
                check_positive("inertia", &[*inertia])?;
                check_positive("damping", &[*damping])?;
                if let Some(w) = weights {
                    check_len("weights", w, self.edges.len())?;
                    check_positive("weights", w)?;
                }
                if let Some(l) = laplacian {
                    if l.len() != n || l.iter().any(|r| r.len() != n) {
                        return Err(Error::Dimension(format!("laplacian must be {n}x{n}")));
                    }
                }
            }
            NetworkParams::Circulant { generator } => {
                check_len("generator", generator, n)?;
                if n == 0 {
                    return Err(Error::InvalidParameter("circulant needs a nonempty generator".into()));
                }
                if generator.iter().any(|g| !g.is_finite()) {
                    return Err(Error::InvalidParameter("generator entries must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// `E = I`, `A = diag(−a)`, one input column per directed control:
/// edge `(i, j)` contributes `u_ij` (+1 at `i`, −1 at `j`) then `u_ji`.
pub fn compile_buffer(net: &NetworkModel) -> Result<DescriptorPlant> {
    let NetworkParams::Buffer { rates } = &net.params else {
        return Err(Error::InvalidInput(format!("expected a buffer network, got {}", net.kind())));
    };
    net.validate()?;
    let n = net.nodes;
    let a = RMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, rates.iter().map(|r| -r)));
    let mut b = RMatrix::zeros(n, 2 * net.edges.len());
    for (e, &(i, j)) in net.edges.iter().enumerate() {
        b[(i, 2 * e)] = 1.0;
        b[(j, 2 * e)] = -1.0;
        b[(j, 2 * e + 1)] = 1.0;
        b[(i, 2 * e + 1)] = -1.0;
    }
    DescriptorPlant::standard(a, b)
}

/// Pool cascade with states `[q_1, r_1, …, q_N, r_N]`.
///
/// `unit_h` selects the disturbance map with unit entries at the `q` rows;
/// otherwise `H` carries `−1/α_i`, consistent with the level dynamics.
pub fn compile_irrigation(net: &NetworkModel, unit_h: bool) -> Result<IrrigationPlant> {
    let NetworkParams::Irrigation { alpha, beta, tau } = &net.params else {
        return Err(Error::InvalidInput(format!("expected an irrigation network, got {}", net.kind())));
    };
    net.validate()?;
    let n = net.nodes;
    let mut a = RMatrix::zeros(2 * n, 2 * n);
    let mut b = RMatrix::zeros(2 * n, n);
    let mut h = RMatrix::zeros(2 * n, n);
    for i in 0..n {
        let (q, r) = (2 * i, 2 * i + 1);
        a[(q, q)] = -beta[i] / alpha[i];
        a[(q, r)] = 1.0 / alpha[i];
        a[(r, r)] = -1.0 / tau[i];
        b[(r, i)] = 1.0 / tau[i];
        if i + 1 < n {
            b[(2 * (i + 1), i)] = -1.0 / alpha[i + 1];
        }
        h[(q, i)] = if unit_h { 1.0 } else { -1.0 / alpha[i] };
    }
    Ok(IrrigationPlant { plant: DescriptorPlant::standard(a, b)?, h })
}

/// `E = diag(c m_i)`, `A_ii = −p_i − Σ_j p_ij`, `A_ij = p_ij`, `B = I`.
pub fn compile_thermal(net: &NetworkModel) -> Result<DescriptorPlant> {
    let NetworkParams::Thermal { masses, heat_capacity, losses, conductances, .. } = &net.params else {
        return Err(Error::InvalidInput(format!("expected a thermal network, got {}", net.kind())));
    };
    net.validate()?;
    let n = net.nodes;
    let e = RMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, masses.iter().map(|m| heat_capacity * m)));
    let mut a = RMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, losses.iter().map(|p| -p)));
    for (&(i, j), &p) in net.edges.iter().zip(conductances) {
        a[(i, j)] += p;
        a[(j, i)] += p;
        a[(i, i)] -= p;
        a[(j, j)] -= p;
    }
    let ev = numkit::symmetric_eigenvalues(&a)?;
    if ev.last().is_some_and(|&l| l >= 0.0) {
        return Err(Error::HypothesisViolation("thermal A is not negative definite".into()));
    }
    DescriptorPlant::new(e, a, RMatrix::identity(n, n))
}

/// Checks `L = Lᵀ`, nonpositive off-diagonal entries and zero row sums.
pub fn validate_laplacian(l: &RMatrix) -> Result<()> {
    if !l.is_square() {
        return Err(Error::InvalidLaplacian(format!("L is {}x{}", l.nrows(), l.ncols())));
    }
    numkit::ensure_finite_real(l)?;
    let scale = l.amax().max(1.0);
    if (l - l.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidLaplacian("L is not symmetric".into()));
    }
    let n = l.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && l[(i, j)] > 1e-12 * scale {
                return Err(Error::InvalidLaplacian(format!("off-diagonal entry ({i}, {j}) is positive")));
            }
        }
        if l.row(i).sum().abs() > 1e-9 * scale {
            return Err(Error::InvalidLaplacian(format!("row {i} does not sum to zero")));
        }
    }
    Ok(())
}

/// Weighted graph Laplacian of an undirected edge list.
pub fn laplacian(nodes: usize, edges: &[(usize, usize)], weights: &[f64]) -> RMatrix {
    let mut l = RMatrix::zeros(nodes, nodes);
    for (&(i, j), &w) in edges.iter().zip(weights) {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

pub fn compile_machine(net: &NetworkModel) -> Result<MachineNetwork> {
    let NetworkParams::Machine { inertia, damping, weights, laplacian: lap } = &net.params else {
        return Err(Error::InvalidInput(format!("expected a machine network, got {}", net.kind())));
    };
    net.validate()?;
    let l = match lap {
        Some(rows) => crate::rows::from_rows(rows, net.nodes).map_err(Error::InvalidInput)?,
        None => {
            let ones = vec![1.0; net.edges.len()];
            laplacian(net.nodes, &net.edges, weights.as_deref().unwrap_or(&ones))
        }
    };
    validate_laplacian(&l)?;
    Ok(MachineNetwork { inertia: *inertia, damping: *damping, laplacian: l })
}

/// Circulant `A` from its first row, with `E = B = I`.
pub fn compile_circulant(generator: &[f64]) -> Result<CirculantPlant> {
    let n = generator.len();
    if n == 0 || generator.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidParameter("generator must be nonempty and finite".into()));
    }
    let a = RMatrix::from_fn(n, n, |i, j| generator[(j + n - i) % n]);
    let hurwitz = numkit::eigenvalues_real(&a)?.iter().all(|z| z.re < 0.0);
    Ok(CirculantPlant { plant: DescriptorPlant::standard(a, RMatrix::identity(n, n))?, hurwitz })
}

/// Compiles any network kind that maps to a descriptor plant.
pub fn compile(net: &NetworkModel, unit_h: bool) -> Result<DescriptorPlant> {
    match &net.params {
        NetworkParams::Buffer { .. } => compile_buffer(net),
        NetworkParams::Irrigation { .. } => Ok(compile_irrigation(net, unit_h)?.plant),
        NetworkParams::Thermal { .. } => compile_thermal(net),
        NetworkParams::Circulant { generator } => {
            net.validate()?;
            Ok(compile_circulant(generator)?.plant)
        }
        NetworkParams::Machine { .. } => Err(Error::InvalidInput(
            "machine networks are certified per mode, not as a single descriptor plant".into(),
        )),
    }
}

/// One control input acting on two subsystems through `b_from` and `b_to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub from: usize,
    pub to: usize,
    pub b_from: Vec<f64>,
    /// Defaults to `b_from`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_to: Option<Vec<f64>>,
}

impl Coupling {
    pub fn b_to(&self) -> &Vec<f64> {
        self.b_to.as_ref().unwrap_or(&self.b_from)
    }
}

/// Symmetric negative-definite subsystems `ẋ_i = A_i x_i + Σ b u + w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemNetwork {
    pub blocks: Vec<RMatrix>,
    pub couplings: Vec<Coupling>,
}

impl SubsystemNetwork {
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.nrows();
                o
            })
            .collect()
    }

    pub fn states(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.blocks.iter().enumerate() {
            if !a.is_square() || a.nrows() == 0 {
                return Err(Error::Dimension(format!("block {i} must be square and nonempty")));
            }
            numkit::ensure_finite_real(a)?;
            if (a - a.transpose()).norm() > 1e-12 * a.norm() {
                return Err(Error::HypothesisViolation(format!("A_{i} is not symmetric")));
            }
            let ev = numkit::symmetric_eigenvalues(a)?;
            if ev.last().is_some_and(|&l| l >= 0.0) {
                return Err(Error::HypothesisViolation(format!("A_{i} is not negative definite")));
            }
        }
        let nb = self.blocks.len();
        for (c_idx, c) in self.couplings.iter().enumerate() {
            if c.from >= nb || c.to >= nb || c.from == c.to {
                return Err(Error::InvalidInput(format!(
                    "coupling {c_idx} joins ({}, {}); endpoints must be distinct blocks below {nb}",
                    c.from, c.to
                )));
            }
            if c.b_from.len() != self.blocks[c.from].nrows() || c.b_to().len() != self.blocks[c.to].nrows() {
                return Err(Error::Dimension(format!("coupling {c_idx} vectors do not match block sizes")));
            }
        }
        Ok(())
    }

    /// Block-diagonal `A` and one input column per coupling.
    pub fn compile(&self) -> Result<DescriptorPlant> {
        self.validate()?;
        let offsets = self.offsets();
        let n = self.states();
        let mut a = RMatrix::zeros(n, n);
        for (blk, &o) in self.blocks.iter().zip(&offsets) {
            a.view_mut((o, o), blk.shape()).copy_from(blk);
        }
        let mut b = RMatrix::zeros(n, self.couplings.len());
        for (col, c) in self.couplings.iter().enumerate() {
            for (node, v) in [(c.from, &c.b_from), (c.to, c.b_to())] {
                for (r, x) in v.iter().enumerate() {
                    b[(offsets[node] + r, col)] += x;
                }
            }
        }
        DescriptorPlant::standard(a, b)
    }
}
