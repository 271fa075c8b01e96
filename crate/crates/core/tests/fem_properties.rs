mod common;

use fshape::fem::{self, Element, Signal, SignalP1};
use fshape::{TriangleMesh, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn p1(mesh: &TriangleMesh, values: Vec<f64>) -> SignalP1 {
    SignalP1::new(mesh, values).unwrap()
}

fn sample(seed: u64) -> (TriangleMesh, SignalP1, SignalP1) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = random_mesh_sized(&mut rng, 2, 40);
    let Signal::P1(f) = random_signal(&mut rng, &mesh, Element::P1, 2.0) else { unreachable!() };
    let Signal::P1(g) = random_signal(&mut rng, &mesh, Element::P1, 2.0) else { unreachable!() };
    (mesh, f, g)
}

fn integral(mesh: &TriangleMesh, f: &SignalP1) -> f64 {
    (0..mesh.num_triangles())
        .map(|k| mesh.area(k) * f.triangle_values(mesh, k).iter().sum::<f64>() / 3.0)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_is_a_norm(seed in any::<u64>(), c in -3.0f64..3.0) {
        let (mesh, f, g) = sample(seed);
        let l1f = fem::l1_exact(&mesh, &f).unwrap();
        let l1g = fem::l1_exact(&mesh, &g).unwrap();
        let scaled = p1(&mesh, f.values().iter().map(|v| c * v).collect());
        prop_assert!((fem::l1_exact(&mesh, &scaled).unwrap() - c.abs() * l1f).abs() <= 1e-12 * (1.0 + l1f));
        let sum = p1(&mesh, f.values().iter().zip(g.values()).map(|(a, b)| a + b).collect());
        prop_assert!(fem::l1_exact(&mesh, &sum).unwrap() <= l1f + l1g + 1e-12);
        prop_assert!(l1f + 1e-12 >= integral(&mesh, &f).abs());
    }

    #[test]
    fn l1_matches_newton_cotes_without_sign_change(seed in any::<u64>()) {
        let (mesh, f, _) = sample(seed);
        let positive = p1(&mesh, f.values().iter().map(|v| v.abs() + 0.1).collect());
        let exact = fem::l1_exact(&mesh, &positive).unwrap();
        let nc = fem::newton_cotes_lp(&mesh, &positive, 1).unwrap();
        prop_assert!((exact - nc).abs() <= 1e-13 * exact);
        prop_assert!((exact - integral(&mesh, &positive)).abs() <= 1e-13 * exact);
    }

    #[test]
    fn p0_projection_is_l2_contraction(seed in any::<u64>()) {
        let (mesh, f, _) = sample(seed);
        let f0 = fem::p0_project(&mesh, &f).unwrap();
        let l2_p0 = fem::lp_norm_p0(&mesh, &f0, 2.0).unwrap();
        let l2_p1 = fem::newton_cotes_lp(&mesh, &f, 2).unwrap();
        prop_assert!(l2_p0 <= l2_p1 * (1.0 + 1e-13));
    }

    #[test]
    fn seminorms_ignore_constants(seed in any::<u64>(), c in -5.0f64..5.0) {
        let (mesh, f, _) = sample(seed);
        let shifted = p1(&mesh, f.values().iter().map(|v| v + c).collect());
        let h1 = fem::h1_seminorm(&mesh, &f).unwrap();
        prop_assert!((fem::h1_seminorm(&mesh, &shifted).unwrap() - h1).abs() <= 1e-10 * (1.0 + h1));
        let tv = fem::total_variation(&mesh, &f, 1e-3).unwrap();
        prop_assert!((fem::total_variation(&mesh, &shifted, 1e-3).unwrap() - tv).abs() <= 1e-10 * (1.0 + tv));
    }

    #[test]
    fn smoothed_tv_brackets_exact_tv(seed in any::<u64>(), eps in 1e-6f64..1e-1) {
        let (mesh, f, _) = sample(seed);
        let grad = fem::gradient(&mesh, &f).unwrap();
        let exact: f64 = mesh.areas().zip(&grad.vectors).map(|(a, g)| a * g.norm()).sum();
        let smoothed = fem::total_variation(&mesh, &f, eps).unwrap();
        prop_assert!(smoothed >= exact * (1.0 - 1e-13));
        prop_assert!(smoothed <= exact + eps * mesh.total_area() + 1e-12);
    }

    #[test]
    fn gradient_of_affine_is_exact_on_planar_meshes(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let (mesh, _, _) = sample(seed);
        let flat = mesh.map_vertices(|p| Vec3::new(p.x, p.y, 0.0)).unwrap();
        let f = p1(&flat, flat.vertices().iter().map(|p| a * p.x + b * p.y + c).collect());
        for g in fem::gradient(&flat, &f).unwrap().vectors {
            prop_assert!((g - Vec3::new(a, b, 0.0)).norm() <= 1e-11);
        }
        let h1 = fem::h1_seminorm(&flat, &f).unwrap();
        prop_assert!((h1 - (a * a + b * b) * flat.total_area()).abs() <= 1e-11 * (1.0 + h1));
    }
}

#[test]
fn frozen_values_on_unit_triangle() {
    let tri = unit_right_triangle();
    // f = 1 - 2x - y: zero line through (0.5, 0) and (0, 1); exact value 1/6.
    let f = p1(&tri, vec![1.0, -1.0, 0.0]);
    assert!((fem::l1_exact(&tri, &f).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    // ∫ (1 - 2x - y)² over the triangle = 1/12.
    assert!((fem::newton_cotes_lp(&tri, &f, 2).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    assert!((fem::h1_seminorm(&tri, &f).unwrap() - 2.5).abs() < 1e-14);
}
