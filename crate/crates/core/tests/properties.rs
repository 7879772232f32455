use hinf_core::baseline::baseline_for;
use hinf_core::netgen::{compile_buffer, compile_circulant, compile_thermal, NetworkModel, NetworkParams};
use hinf_core::numkit::{cplx, pseudoinverse, spectral_norm, CMatrix, Polynomial, RMatrix};
use hinf_core::synth::{buffer_law, closed_form_gain, descriptor_gain, weighted_gain};
use hinf_core::verify::{
    certify_optimality, corollary2_hypotheses, hinf_norm_grid, hinf_norm_ss, lower_bound, lower_bound_at,
    pencil_stability, sparsity_with_threshold, CertifyOptions, Plant, Verdict,
};
use hinf_core::{
    close_loop, eval_closed_rational, DescriptorPlant, FrequencyGrid, FrequencyModel, Gain, GainFormula,
    RationalEntry, RationalPlant, WeightedObjective,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rmat(r: usize, c: usize, v: &[f64]) -> RMatrix {
    RMatrix::from_row_slice(r, c, v)
}

fn poly(c: &[f64]) -> Polynomial {
    Polynomial::new(c.to_vec()).unwrap()
}

/// Symmetric negative definite `A` and arbitrary `B`, `E = I`, with commuting
/// `E` and `A` by construction.
fn random_symmetric_plant(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DescriptorPlant {
    let g = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let a = -(&g * g.transpose() + RMatrix::identity(n, n) * 0.5);
    let b = RMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    DescriptorPlant::standard(a, b).unwrap()
}

fn corollary2_plants() -> Vec<DescriptorPlant> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut v: Vec<_> = [(2, 1), (3, 2), (3, 3), (4, 2)].iter().map(|&(n, m)| random_symmetric_plant(&mut rng, n, m)).collect();
    v.push(compile_thermal(&thermal(vec![1.0, 1.0, 1.0])).unwrap());
    v
}

fn thermal(masses: Vec<f64>) -> NetworkModel {
    let n = masses.len();
    NetworkModel {
        nodes: n,
        edges: (1..n).map(|i| (i - 1, i)).collect(),
        params: NetworkParams::Thermal {
            masses,
            heat_capacity: 1.0,
            losses: vec![1.0; n],
            conductances: vec![1.0; n - 1],
            outdoor_temperature: 0.0,
        },
    }
}

fn regression_descriptors() -> Vec<(&'static str, DescriptorPlant)> {
    let mut v = vec![
        ("example1", DescriptorPlant::standard(rmat(1, 1, &[-1.0]), rmat(1, 1, &[1.0])).unwrap()),
        (
            "va",
            DescriptorPlant::standard(
                rmat(3, 3, &[-1.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, -2.0]),
                rmat(3, 3, &[-1.0, 0.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, 1.0]),
            )
            .unwrap(),
        ),
        ("circulant", compile_circulant(&[-3.0, 1.0, 0.0, 1.0]).unwrap().plant),
        ("thermal-equal", compile_thermal(&thermal(vec![1.0, 1.0])).unwrap()),
        ("thermal-unequal", compile_thermal(&thermal(vec![2.0, 1.0])).unwrap()),
        (
            "buffer",
            compile_buffer(&NetworkModel::buffer(vec![1.0, 2.0, 3.0], vec![(0, 1), (1, 2)]).unwrap()).unwrap(),
        ),
    ];
    for a in [0.1, 0.5, 1.0, 2.0, 10.0] {
        v.push((
            "example3",
            DescriptorPlant::standard(rmat(2, 2, &[-a, a, 0.0, -1.0]), rmat(2, 1, &[1.0, 0.0])).unwrap(),
        ));
    }
    v
}

fn droop(omega0: f64, zeta: f64) -> RationalPlant {
    let m = RationalEntry::new(poly(&[1.0, 2.0 * zeta / omega0, 1.0 / (omega0 * omega0)]), Polynomial::s()).unwrap();
    RationalPlant::scalar(m, RationalEntry::constant(1.0)).unwrap()
}

fn example2() -> RationalPlant {
    RationalPlant::scalar(RationalEntry::polynomial(poly(&[4.0, 4.0, 1.0])), RationalEntry::polynomial(poly(&[1.0, 1.0])))
        .unwrap()
}

#[test]
fn ss_and_grid_norms_agree_on_regression_plants() {
    let grid = FrequencyGrid::default();
    for (name, p) in regression_descriptors() {
        let g = descriptor_gain(&p).unwrap();
        let ss = hinf_norm_ss(&close_loop(&p, &g).unwrap(), 1e-10).unwrap().norm;
        let gr = hinf_norm_grid(&p, &g.k, None, &grid).unwrap().norm;
        assert!((ss - gr).abs() <= 1e-6 * (1.0 + ss), "{name}: ss {ss} grid {gr}");
    }
    let mut rational = vec![("example2", example2(), 0.0)];
    for (w, z) in [(1.0, 0.5), (2.0, 0.5), (3.0, 0.7)] {
        rational.push(("droop", droop(w, z), w));
    }
    for (name, p, w0) in rational {
        let g = closed_form_gain(&p, w0).unwrap();
        let ss = hinf_norm_ss(&p.siso_closed_loop(&g).unwrap(), 1e-10).unwrap().norm;
        let gr = hinf_norm_grid(&p, &g.k, None, &grid).unwrap().norm;
        assert!((ss - gr).abs() <= 1e-6 * (1.0 + ss), "{name}: ss {ss} grid {gr}");
    }
}

#[test]
fn lower_bound_below_random_stabilizing_perturbations() {
    let grid = FrequencyGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for p in corollary2_plants() {
        assert!(corollary2_hypotheses(&p).holds);
        let lb = lower_bound(&p, &grid).unwrap().norm;
        let k0 = descriptor_gain(&p).unwrap().k;
        let mut tested = 0;
        while tested < 100 {
            let scale = rng.gen_range(0.01..1.0);
            let dk = RMatrix::from_fn(k0.nrows(), k0.ncols(), |_, _| rng.gen_range(-scale..scale));
            let g = Gain::new(&k0 + dk, 0.0, GainFormula::Theorem1);
            if !pencil_stability(&p, &g).unwrap().stable {
                continue;
            }
            let norm = hinf_norm_ss(&close_loop(&p, &g).unwrap(), 1e-10).unwrap().norm;
            assert!(lb <= norm + 1e-9, "lower bound {lb} exceeds {norm}");
            tested += 1;
        }
    }
}

#[test]
fn corollary2_plants_certify_with_closed_form_value() {
    let opts = CertifyOptions::default();
    for p in corollary2_plants() {
        let g = descriptor_gain(&p).unwrap();
        let c = certify_optimality(Plant::Descriptor(&p), &g, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Optimal, "{c:?}");
        let a = p.a();
        let b = p.b();
        // E = I only for the random plants; the formula uses F and G in general.
        let expected = p.zero_frequency_bound().unwrap();
        let norm = c.hinf_norm.unwrap();
        assert!((norm - expected).abs() <= 1e-6 * (1.0 + expected), "{norm} vs {expected}");
        if p.e() == &RMatrix::identity(a.nrows(), a.nrows()) {
            let gm = a * a.transpose() + b * b.transpose();
            let inv = gm.try_inverse().unwrap();
            let direct = inv.symmetric_eigenvalues().max().sqrt();
            assert!((norm - direct).abs() <= 1e-6 * (1.0 + direct));
        }
    }
}

#[test]
fn baseline_never_beats_lower_bound_and_is_denser() {
    let grid = FrequencyGrid::default();
    for p in corollary2_plants().into_iter().take(3) {
        let r = baseline_for(&p, 1e-7).unwrap();
        let lb = lower_bound(&p, &grid).unwrap().norm;
        assert!(r.gamma >= lb - 1e-6);
        assert!((r.gamma - p.zero_frequency_bound().unwrap()).abs() <= 1e-4);
        let k = descriptor_gain(&p).unwrap().k;
        assert!(sparsity_with_threshold(&r.k, 1e-8).zeros <= sparsity_with_threshold(&k, 1e-8).zeros);
    }
}

#[test]
fn descriptor_and_rational_closed_loops_agree() {
    let grid = FrequencyGrid { points: 50, include_zero: false, ..Default::default() };
    for (name, p) in regression_descriptors() {
        let g = descriptor_gain(&p).unwrap();
        let ss = close_loop(&p, &g).unwrap();
        let r = p.to_rational();
        for w in grid.points() {
            let a = ss.transfer_at(cplx(0.0, w)).unwrap();
            let b = eval_closed_rational(&r, &g, w).unwrap();
            let d = (&a - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(d <= 1e-9 * (1.0 + spectral_norm(&a).unwrap()), "{name} at {w}: {d}");
        }
        let n1 = hinf_norm_grid(&p, &g.k, None, &FrequencyGrid::default()).unwrap().norm;
        let n2 = hinf_norm_grid(&r, &g.k, None, &FrequencyGrid::default()).unwrap().norm;
        assert!((n1 - n2).abs() <= 1e-9 * (1.0 + n1), "{name}");
    }
}

#[test]
fn pseudoinverse_route_matches_gram_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = regression_descriptors()[1].1.clone();
    for _ in 0..20 {
        let w = 10f64.powf(rng.gen_range(-3.0..3.0));
        let s = cplx(0.0, w);
        let (m, n) = (p.m_at(s).unwrap(), p.n_at(s).unwrap());
        let mut mn = CMatrix::zeros(m.nrows(), m.ncols() + n.ncols());
        mn.view_mut((0, 0), m.shape()).copy_from(&m);
        mn.view_mut((0, m.ncols()), n.shape()).copy_from(&(-&n));
        let route = spectral_norm(&pseudoinverse(&mn)).unwrap();
        let gram = lower_bound_at(&p, None, w).unwrap().unwrap();
        assert!((route - gram).abs() <= 1e-9 * (1.0 + gram), "{route} vs {gram} at {w}");
    }
}

#[test]
fn identity_weight_reproduces_closed_form_gain() {
    for (_, p) in regression_descriptors() {
        let k = p.outputs();
        for w0 in [0.0, 0.7] {
            let a = closed_form_gain(&p, w0);
            let b = weighted_gain(&p, &WeightedObjective::identity(k), w0);
            match (a, b) {
                (Ok(a), Ok(b)) => assert_eq!(a.k, b.k),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{a:?} vs {b:?}"),
            }
        }
    }
}

fn connected_buffer() -> impl Strategy<Value = NetworkModel> {
    (2usize..12).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.5f64..5.0, n),
            proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
            proptest::collection::btree_set((0..n, 0..n), 0..n),
        )
            .prop_map(move |(rates, parents, extra)| {
                let mut edges: Vec<(usize, usize)> =
                    parents.iter().enumerate().map(|(i, ix)| (ix.index(i + 1), i + 1)).collect();
                for (a, b) in extra {
                    let e = (a.min(b), a.max(b));
                    if a != b && !edges.contains(&e) {
                        edges.push(e);
                    }
                }
                NetworkModel::buffer(rates, edges).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

    #[test]
    fn buffer_closed_loop_is_metzler(net in connected_buffer()) {
        let p = compile_buffer(&net).unwrap();
        let k = buffer_law(&net).unwrap().k;
        let acl = p.a() + p.b() * &k;
        for i in 0..acl.nrows() {
            for j in 0..acl.ncols() {
                if i != j {
                    prop_assert!(acl[(i, j)] >= 0.0, "A+BK[{i},{j}] = {}", acl[(i, j)]);
                }
            }
        }
        for row in k.row_iter() {
            prop_assert_eq!(row.iter().filter(|x| **x != 0.0).count(), 2);
        }
    }

    #[test]
    fn any_stabilizing_gain_respects_lower_bound(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_symmetric_plant(&mut rng, 3, 2);
        let lb = lower_bound(&p, &FrequencyGrid::default()).unwrap().norm;
        let k = RMatrix::from_fn(2, 3, |_, _| rng.gen_range(-2.0..2.0));
        let g = Gain::new(k, 0.0, GainFormula::Theorem1);
        if pencil_stability(&p, &g).unwrap().stable {
            let norm = hinf_norm_ss(&close_loop(&p, &g).unwrap(), 1e-10).unwrap().norm;
            prop_assert!(lb <= norm + 1e-9);
        }
    }
}
