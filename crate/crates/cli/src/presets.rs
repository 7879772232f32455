//! Model generators behind `hinf generate`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hinf_core::format::{Model, ModelDocument};
use hinf_core::netgen::{NetworkModel, NetworkParams};
use hinf_core::numkit::{Polynomial, RMatrix};
use hinf_core::{DescriptorPlant, RationalEntry, RationalPlant};

use crate::Failure;

pub const PRESETS: &[&str] = &[
    "example1",
    "example2",
    "example3",
    "va",
    "circulant",
    "droop",
    "buffer",
    "buffer-random",
    "irrigation",
    "thermal",
    "machine",
    "case3",
];

/// `--set key=value` pairs; values are comma-separated numbers.
#[derive(Debug, Default)]
pub struct Params(BTreeMap<String, Vec<f64>>);

impl Params {
    pub fn parse(items: &[String]) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for item in items {
            let (key, value) = item.split_once('=').ok_or_else(|| format!("--set {item}: expected key=value"))?;
            let values = value
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("--set {key}: `{v}` is not a number")))
                .collect::<Result<Vec<_>, _>>()?;
            if map.insert(key.trim().to_string(), values).is_some() {
                return Err(format!("--set {key} given twice"));
            }
        }
        Ok(Self(map))
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64, Failure> {
        match self.0.get(key).map(Vec::as_slice) {
            None => Ok(default),
            Some([v]) => Ok(*v),
            Some(_) => Err(schema(format!("{key} takes a single value"))),
        }
    }

    fn list(&self, key: &str) -> Option<&[f64]> {
        self.0.get(key).map(Vec::as_slice)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, Failure> {
        let v = self.scalar(key, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e6 {
            return Err(schema(format!("{key} must be a nonnegative integer")));
        }
        Ok(v as usize)
    }

    fn check_known(&self, known: &[&str]) -> Result<(), Failure> {
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(schema(format!("unknown parameter `{k}` (expected one of: {})", known.join(", ")))),
            None => Ok(()),
        }
    }
}

fn schema(message: String) -> Failure {
    Failure { code: crate::EXIT_SCHEMA, message }
}

fn rmat(r: usize, c: usize, v: &[f64]) -> RMatrix {
    RMatrix::from_row_slice(r, c, v)
}

fn poly(c: &[f64]) -> Polynomial {
    Polynomial::new(c.to_vec()).expect("finite coefficients")
}

fn doc(model: Model) -> ModelDocument {
    ModelDocument { model, omega0: None }
}

fn network(net: NetworkModel) -> Result<ModelDocument, Failure> {
    net.validate()?;
    Ok(doc(Model::Network(net)))
}

/// Random connected graph: a random spanning tree plus each remaining pair
/// with probability `extra`.
pub fn random_connected_edges(n: usize, extra: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i].min(order[j]), order[i].max(order[j]));
        edges.push((a, b));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.gen_bool(extra) {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Random buffer network with rates in `[0.5, 5]`.
pub fn random_buffer(n: usize, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = (0..n).map(|_| rng.gen_range(0.5..=5.0)).collect();
    let extra = if n > 1 { (2.0 / n as f64).min(1.0) } else { 0.0 };
    let edges = random_connected_edges(n, extra, &mut rng);
    NetworkModel::buffer(rates, edges).expect("generated buffer network is valid")
}

/// Random irrigation cascade with `α, β, τ ∈ [0.1, 10]`.
pub fn random_irrigation(n: usize, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(0.1..=10.0)).collect::<Vec<f64>>();
    let alpha = draw(&mut rng);
    let beta = draw(&mut rng);
    let tau = draw(&mut rng);
    NetworkModel::irrigation(alpha, beta, tau).expect("generated irrigation network is valid")
}

/// Builds the model document for a preset.
pub fn generate(preset: &str, p: &Params) -> Result<ModelDocument, Failure> {
    match preset {
        "example1" => {
            p.check_known(&[])?;
            Ok(doc(Model::Descriptor(DescriptorPlant::standard(rmat(1, 1, &[-1.0]), rmat(1, 1, &[1.0]))?)))
        }
        "example2" => {
            p.check_known(&[])?;
            let m = RationalEntry::polynomial(poly(&[4.0, 4.0, 1.0]));
            let n = RationalEntry::polynomial(poly(&[1.0, 1.0]));
            Ok(doc(Model::Rational(RationalPlant::scalar(m, n)?)))
        }
        "example3" => {
            p.check_known(&["a"])?;
            let a = p.scalar("a", 1.0)?;
            Ok(doc(Model::Descriptor(DescriptorPlant::standard(
                rmat(2, 2, &[-a, a, 0.0, -1.0]),
                rmat(2, 1, &[1.0, 0.0]),
            )?)))
        }
        "va" => {
            p.check_known(&[])?;
            let a = rmat(3, 3, &[-1.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, -2.0]);
            let b = rmat(3, 3, &[-1.0, 0.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, 1.0]);
            Ok(doc(Model::Descriptor(DescriptorPlant::standard(a, b)?)))
        }
        "case3" => {
            p.check_known(&[])?;
            let n = RationalEntry::new(poly(&[1.0]), poly(&[-1.0, 1.0]))?;
            Ok(doc(Model::Rational(RationalPlant::scalar(RationalEntry::constant(1.0), n)?)))
        }
        "droop" => {
            p.check_known(&["omega0", "zeta"])?;
            let omega0 = p.scalar("omega0", 1.0)?;
            let zeta = p.scalar("zeta", 0.5)?;
            if !(omega0 > 0.0 && zeta > 0.0 && omega0.is_finite() && zeta.is_finite()) {
                return Err(hinf_core::Error::InvalidParameter("droop needs omega0 > 0 and zeta > 0".into()).into());
            }
            let m = RationalEntry::new(poly(&[1.0, 2.0 * zeta / omega0, 1.0 / (omega0 * omega0)]), Polynomial::s())?;
            let plant = RationalPlant::scalar(m, RationalEntry::constant(1.0))?;
            Ok(ModelDocument { model: Model::Rational(plant), omega0: Some(omega0) })
        }
        "circulant" => {
            p.check_known(&["generator"])?;
            let generator = p.list("generator").map(<[f64]>::to_vec).unwrap_or_else(|| vec![-3.0, 1.0, 0.0, 1.0]);
            network(NetworkModel::circulant(generator)?)
        }
        "buffer" => {
            p.check_known(&["rates"])?;
            let rates = p.list("rates").map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0, 2.0, 3.0]);
            let edges = (1..rates.len()).map(|i| (i - 1, i)).collect();
            network(NetworkModel::buffer(rates, edges)?)
        }
        "buffer-random" => {
            p.check_known(&["n", "seed"])?;
            network(random_buffer(p.count("n", 5)?, p.count("seed", 0)? as u64))
        }
        "irrigation" => {
            p.check_known(&["n", "seed", "alpha", "beta", "tau"])?;
            match (p.list("alpha"), p.list("beta"), p.list("tau")) {
                (Some(a), Some(b), Some(t)) => network(NetworkModel::irrigation(a.to_vec(), b.to_vec(), t.to_vec())?),
                (None, None, None) => network(random_irrigation(p.count("n", 3)?, p.count("seed", 0)? as u64)),
                _ => Err(schema("irrigation needs all of alpha, beta, tau or none".into())),
            }
        }
        "thermal" => {
            p.check_known(&["masses", "heat_capacity", "loss", "conductance", "outdoor_temperature"])?;
            let masses = p.list("masses").map(<[f64]>::to_vec).unwrap_or_else(|| vec![2.0, 1.0]);
            let n = masses.len();
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            let conductances = vec![p.scalar("conductance", 1.0)?; edges.len()];
            network(NetworkModel {
                nodes: n,
                edges,
                params: NetworkParams::Thermal {
                    masses,
                    heat_capacity: p.scalar("heat_capacity", 1.0)?,
                    losses: vec![p.scalar("loss", 1.0)?; n],
                    conductances,
                    outdoor_temperature: p.scalar("outdoor_temperature", 0.0)?,
                },
            })
        }
        "machine" => {
            p.check_known(&["n", "inertia", "damping"])?;
            let n = p.count("n", 4)?;
            if n < 2 {
                return Err(schema("machine needs n >= 2".into()));
            }
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n > 2 {
                edges.push((0, n - 1));
            }
            network(NetworkModel {
                nodes: n,
                edges,
                params: NetworkParams::Machine {
                    inertia: p.scalar("inertia", 1.0)?,
                    damping: p.scalar("damping", 1.0)?,
                    weights: None,
                    laplacian: None,
                },
            })
        }
        other => Err(schema(format!("unknown preset `{other}` (expected one of: {})", PRESETS.join(", ")))),
    }
}
