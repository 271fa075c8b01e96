#![allow(dead_code)]

use std::path::PathBuf;

use fshape::fem::{Element, Signal};
use fshape::{TriangleMesh, Vec3};
use rand::Rng;

/// Jittered `nx × ny` grid split into triangles, with a random height field.
pub fn random_mesh(rng: &mut impl Rng, nx: usize, ny: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = i as f64 + rng.gen_range(-0.25..0.25);
            let y = j as f64 + rng.gen_range(-0.25..0.25);
            vertices.push(Vec3::new(x, y, rng.gen_range(-0.5..0.5)) * 0.3);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if rng.gen_bool(0.5) {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles).unwrap()
}

/// Grid mesh with a triangle count between `lo` and `hi`.
pub fn random_mesh_sized(rng: &mut impl Rng, lo: usize, hi: usize) -> TriangleMesh {
    loop {
        let nx = rng.gen_range(1..=6);
        let ny = rng.gen_range(1..=6);
        let n = 2 * nx * ny;
        if (lo..=hi).contains(&n) {
            return random_mesh(rng, nx, ny);
        }
    }
}

pub fn random_signal(rng: &mut impl Rng, mesh: &TriangleMesh, element: Element, scale: f64) -> Signal {
    let values = (0..element.dofs(mesh)).map(|_| rng.gen_range(-scale..scale)).collect();
    Signal::new(element, mesh, values).unwrap()
}

pub fn unit_right_triangle() -> TriangleMesh {
    TriangleMesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap()
}

/// Workspace-level directory holding the bundled run configurations.
pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn loglog_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
