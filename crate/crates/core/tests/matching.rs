mod common;

use std::collections::BTreeMap;

use fshape::fem::{self, Element, Signal};
use fshape::matching::{
    bound_ratio_explodes, gamma_experiment, minimize, minimize_from, minimum_bound_check, oscillation_report,
    DescentConfig, EnergyModel, GammaSetup, MatchProblem, Penalty, Termination,
};
use fshape::surface::{builtin_surface, OracleOptions};
use fshape::varifold::{self, DiscreteVarifold, KernelParams};
use fshape::{Error, TriangleMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn kernel() -> KernelParams {
    KernelParams::new(0.6, 1.0, 0.8).unwrap()
}

fn model(p: Penalty) -> EnergyModel {
    EnergyModel::new(p, kernel()).unwrap()
}

const ALL: [Penalty; 3] = [
    Penalty::L2 { gamma_f: 0.7, gamma_w: 1.3 },
    Penalty::H1 { alpha: 0.4, beta: 0.9, gamma_w: 1.1 },
    Penalty::Bv { alpha: 0.5, beta: 0.3, gamma_w: 0.8, epsilon: 1e-3 },
];

fn instance(seed: u64, penalty: Penalty) -> (MatchProblem, Signal) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = random_mesh_sized(&mut rng, 12, 30);
    let target = random_mesh_sized(&mut rng, 6, 20).map_vertices(|p| p + Vec3::new(0.2, 0.1, -0.1)).unwrap();
    let g = random_signal(&mut rng, &target, Element::P0, 1.0);
    let m = model(penalty);
    let f = random_signal(&mut rng, &mesh, m.element(), 1.0);
    (MatchProblem::from_fshapes(mesh, &target, &g, m, None).unwrap(), f)
}

#[test]
fn zero_signal_without_attachment() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mesh = random_mesh(&mut rng, 3, 3);
    let zero_target = Signal::zeros(Element::P0, &mesh);
    for (penalty, expected) in [
        (Penalty::L2 { gamma_f: 1.0, gamma_w: 0.0 }, 0.0),
        (Penalty::H1 { alpha: 1.0, beta: 2.0, gamma_w: 0.0 }, 0.0),
        (Penalty::Bv { alpha: 2.0, beta: 0.0, gamma_w: 0.0, epsilon: 1e-3 }, 2.0 * 1e-3 * mesh.total_area()),
        // The smoothed TV of a constant contributes β ε |𝒯| as well.
        (Penalty::Bv { alpha: 2.0, beta: 3.0, gamma_w: 0.0, epsilon: 1e-3 }, 5.0 * 1e-3 * mesh.total_area()),
    ] {
        let p = MatchProblem::from_fshapes(mesh.clone(), &mesh, &zero_target, model(penalty), None).unwrap();
        let e = p.energy(p.initial()).unwrap();
        assert!((e.total - expected).abs() <= 1e-15, "{penalty:?}: {}", e.total);
    }
}

#[test]
fn matching_target_has_no_attachment() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mesh = random_mesh(&mut rng, 4, 3);
    let g = random_signal(&mut rng, &mesh, Element::P0, 1.0);
    let p = MatchProblem::from_fshapes(mesh.clone(), &mesh, &g, model(Penalty::L2 { gamma_f: 0.0, gamma_w: 1.0 }), Some(g.clone())).unwrap();
    let e = p.energy(&g).unwrap();
    assert!(e.attachment.abs() <= 1e-12 * p.target_self());
    let trace = minimize(&p, &DescentConfig::default()).unwrap();
    assert_eq!(trace.termination, Termination::GradientTolerance);
    assert_eq!(trace.records.len(), 1);
}

#[test]
fn breakdown_matches_direct_recomputation() {
    for (seed, penalty) in ALL.iter().enumerate() {
        let (p, f) = instance(seed as u64, *penalty);
        let e = p.energy(&f).unwrap();
        let mesh = p.mesh();
        let mu = DiscreteVarifold::from_fshape(mesh, &f).unwrap();
        let var = varifold::squared_distance(&mu, p.target(), &kernel());
        let (sp, gp) = match (*penalty, &f) {
            (Penalty::L2 { gamma_f, .. }, Signal::P0(s)) => (0.5 * gamma_f * fem::lp_norm_p0(mesh, s, 2.0).unwrap(), 0.0),
            (Penalty::H1 { alpha, beta, .. }, Signal::P1(s)) => {
                (alpha * fem::newton_cotes_lp(mesh, s, 2).unwrap(), beta * fem::h1_seminorm(mesh, s).unwrap())
            }
            (Penalty::Bv { alpha, beta, epsilon, .. }, Signal::P1(s)) => (
                alpha * fem::l1_smoothed(mesh, &f, epsilon).unwrap(),
                beta * fem::total_variation(mesh, s, epsilon).unwrap(),
            ),
            _ => unreachable!(),
        };
        let att = 0.5 * p.model().gamma_w() * var;
        for (a, b) in [(e.signal_penalty, sp), (e.gradient_penalty, gp), (e.attachment, att)] {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{penalty:?}: {a} vs {b}");
        }
        assert!((e.total - (sp + gp + att)).abs() <= 1e-12 * e.total);
    }
}

#[test]
fn l2_penalty_gradient_is_weighted_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = random_mesh(&mut rng, 3, 4);
    let f = random_signal(&mut rng, &mesh, Element::P0, 2.0);
    let p = MatchProblem::from_fshapes(mesh.clone(), &mesh, &f, model(Penalty::L2 { gamma_f: 0.6, gamma_w: 0.0 }), None).unwrap();
    let g = p.energy_gradient(&f).unwrap();
    for (k, gk) in g.iter().enumerate() {
        assert!((gk - 0.6 * mesh.area(k) * f.values()[k]).abs() <= 1e-15);
    }
}

#[test]
fn attachment_gradient_sees_only_signal_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mesh = random_mesh(&mut rng, 3, 3);
    let target = random_mesh(&mut rng, 2, 3);
    let g = random_signal(&mut rng, &target, Element::P0, 1.0);
    let f = random_signal(&mut rng, &mesh, Element::P0, 1.0);
    let c = 1.7;
    let shift = |s: &Signal, m: &TriangleMesh| Signal::new(Element::P0, m, s.values().iter().map(|v| v + c).collect()).unwrap();
    let attach = model(Penalty::L2 { gamma_f: 0.0, gamma_w: 1.0 });
    let a = MatchProblem::from_fshapes(mesh.clone(), &target, &g, attach, None).unwrap();
    let b = MatchProblem::from_fshapes(mesh.clone(), &target, &shift(&g, &target), attach, None).unwrap();
    let ga = a.energy_gradient(&f).unwrap();
    let gb = b.energy_gradient(&shift(&f, &mesh)).unwrap();
    for (x, y) in ga.iter().zip(&gb) {
        assert!((x - y).abs() <= 1e-13);
    }
}

#[test]
fn energy_is_invariant_under_relabeling() {
    for (seed, penalty) in ALL.iter().enumerate() {
        let (p, f) = instance(10 + seed as u64, *penalty);
        let mesh = p.mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let mut vperm: Vec<usize> = (0..mesh.num_vertices()).collect();
        let mut tperm: Vec<usize> = (0..mesh.num_triangles()).collect();
        for i in (1..vperm.len()).rev() {
            vperm.swap(i, rng.gen_range(0..=i));
        }
        for i in (1..tperm.len()).rev() {
            tperm.swap(i, rng.gen_range(0..=i));
        }
        // new index of old vertex i is vperm[i]
        let mut vertices = vec![Vec3::zeros(); mesh.num_vertices()];
        for (i, v) in mesh.vertices().iter().enumerate() {
            vertices[vperm[i]] = *v;
        }
        let triangles: Vec<[usize; 3]> = tperm.iter().map(|&k| mesh.triangles()[k].map(|i| vperm[i])).collect();
        let relabeled = TriangleMesh::new(vertices, triangles).unwrap();
        let values = match &f {
            Signal::P0(s) => tperm.iter().map(|&k| s.values()[k]).collect(),
            Signal::P1(s) => {
                let mut v = vec![0.0; s.values().len()];
                for (i, x) in s.values().iter().enumerate() {
                    v[vperm[i]] = *x;
                }
                v
            }
        };
        let f2 = Signal::new(f.element(), &relabeled, values).unwrap();
        let q = MatchProblem::new(relabeled, p.target().clone(), *p.model(), None).unwrap();
        let (e1, e2) = (p.energy(&f).unwrap().total, q.energy(&f2).unwrap().total);
        assert!((e1 - e2).abs() <= 1e-12 * e1, "{penalty:?}: {e1} vs {e2}");
    }
}

#[test]
fn descent_is_monotone_and_deterministic() {
    for (seed, penalty) in ALL.iter().enumerate() {
        let (p, f) = instance(20 + seed as u64, *penalty);
        let cfg = DescentConfig { max_iters: 200, ..Default::default() };
        let a = minimize_from(&p, f.clone(), &cfg).unwrap();
        let b = minimize_from(&p, f, &cfg).unwrap();
        let e = a.accepted_energies();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        assert!(e.last().unwrap() < &e[0]);
        assert_eq!(a, b);
    }
}

#[test]
fn model_validation() {
    let bad = [
        Penalty::L2 { gamma_f: -1.0, gamma_w: 1.0 },
        Penalty::H1 { alpha: 1.0, beta: f64::NAN, gamma_w: 1.0 },
        Penalty::Bv { alpha: 1.0, beta: 1.0, gamma_w: 1.0, epsilon: -1e-3 },
    ];
    for p in bad {
        assert!(matches!(EnergyModel::new(p, kernel()), Err(Error::BadParams(_))), "{p:?}");
    }
    let nonsmooth = EnergyModel::new(Penalty::Bv { alpha: 1.0, beta: 1.0, gamma_w: 1.0, epsilon: 0.0 }, kernel());
    assert!(matches!(nonsmooth, Err(Error::NonsmoothEnergy)));

    let (p, _) = instance(30, ALL[0]);
    let wrong = Signal::zeros(Element::P1, p.mesh());
    assert!(matches!(p.energy(&wrong), Err(Error::MeshMismatch(_))));
    assert!(DescentConfig { shrink: 1.5, ..Default::default() }.validate().is_err());
}

#[test]
fn bound_check_trend() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = random_mesh(&mut rng, 3, 3);
    let far = mesh.map_vertices(|p| p + Vec3::new(0.3, 0.0, 0.5)).unwrap();
    let zero = Signal::zeros(Element::P0, &far);
    for seed in 0..3u64 {
        let mut srng = ChaCha8Rng::seed_from_u64(seed);
        let f0 = random_signal(&mut srng, &mesh, Element::P0, 1.0);
        let mut reports = Vec::new();
        for gamma_f in [0.25, 0.5, 1.0] {
            let p = MatchProblem::from_fshapes(mesh.clone(), &far, &zero, model(Penalty::L2 { gamma_f, gamma_w: 1.0 }), Some(f0.clone())).unwrap();
            let trace = minimize(&p, &DescentConfig { grad_tol: 1e-12, max_iters: 5000, ..Default::default() }).unwrap();
            let r = minimum_bound_check(&trace, &p).unwrap();
            assert!(r.ratio.is_finite() && r.linf < 1.0);
            reports.push(r);
        }
        assert!(!bound_ratio_explodes(&reports, 1e-9));
        assert!(reports.windows(2).all(|w| w[1].ratio <= w[0].ratio * (1.0 + 1e-9) + 1e-15));
    }
    let p = MatchProblem::from_fshapes(mesh.clone(), &far, &zero, model(Penalty::L2 { gamma_f: 1.0, gamma_w: 0.0 }), None).unwrap();
    let trace = minimize(&p, &DescentConfig::default()).unwrap();
    assert_eq!(minimum_bound_check(&trace, &p).unwrap().ratio, 0.0);
    let h1 = MatchProblem::from_fshapes(mesh.clone(), &far, &zero, model(ALL[1]), None).unwrap();
    let trace = minimize(&h1, &DescentConfig { max_iters: 1, ..Default::default() }).unwrap();
    assert!(matches!(minimum_bound_check(&trace, &h1), Err(Error::WrongModel { .. })));
}

#[test]
fn oscillation_report_basics() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mesh = random_mesh(&mut rng, 4, 4);
    let all = vec![true; mesh.num_triangles()];
    for element in [Element::P0, Element::P1] {
        let r = oscillation_report(&mesh, &Signal::zeros(element, &mesh), &all).unwrap();
        assert_eq!((r.total_variation, r.linf), (0.0, 0.0));
    }
    let f = random_signal(&mut rng, &mesh, Element::P1, 1.0);
    let Signal::P1(s) = &f else { unreachable!() };
    let r = oscillation_report(&mesh, &f, &all).unwrap();
    let grad = fem::gradient(&mesh, s).unwrap();
    let tv: f64 = mesh.areas().zip(&grad.vectors).map(|(a, g)| a * g.norm()).sum();
    assert!((r.total_variation - tv).abs() <= 1e-12 * tv);
    assert_eq!(r.linf, s.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    assert!(matches!(oscillation_report(&mesh, &f, &all[1..]), Err(Error::LengthMismatch { .. })));
}

#[test]
fn gamma_with_trivial_target_vanishes() {
    let s = builtin_surface("monge_patch", &BTreeMap::new()).unwrap();
    let f = |_: [f64; 2], x: &Vec3| x.x - 0.5 * x.y;
    let table = gamma_experiment(&GammaSetup {
        source: &s,
        source_signal: &f,
        target: &s,
        target_signal: &f,
        model: model(Penalty::L2 { gamma_f: 0.0, gamma_w: 1.0 }),
        descent: DescentConfig::default(),
        levels: vec![0.4, 0.2, 0.1, 0.05],
        lift_cells: 8,
        lift_order: 3,
        oracle: OracleOptions::default(),
    })
    .unwrap();
    for r in &table.rows {
        assert!(r.min_energy.abs() <= 1e-12, "{r:?}");
        assert_eq!(r.lift_missed_measure, 0.0);
    }
    assert!(table.rows[0].l1_gap.is_nan());
    assert!(table.continuous_energy.abs() <= 1e-12);
    let bad = gamma_experiment(&GammaSetup {
        source: &s,
        source_signal: &f,
        target: &s,
        target_signal: &f,
        model: model(ALL[0]),
        descent: DescentConfig::default(),
        levels: vec![0.1, 0.2],
        lift_cells: 8,
        lift_order: 3,
        oracle: OracleOptions::default(),
    });
    assert!(matches!(bad, Err(Error::BadParams(_))));
}
