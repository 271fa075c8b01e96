mod common;

use std::path::Path;
use std::process::{Command, Output};

use fshape::fem::{Element, Signal};
use fshape::io::{format_csv, load_fshape, save_csv, save_fshape, FShapeFile};
use fshape::matching::{minimize, DescentConfig, EnergyModel, MatchProblem, Penalty};
use fshape::io::table::{trace_rows, TRACE_HEADER};
use fshape::varifold::KernelParams;
use fshape::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn fshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fshape")).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn sample(seed: u64, element: Element) -> FShapeFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = random_mesh(&mut rng, 3, 2);
    let signal = random_signal(&mut rng, &mesh, element, 1e3);
    FShapeFile { mesh, signal: Some(signal) }
}

const ZERO_CONFIG: &str = "\
kernel.sigma_e = 0.5
kernel.sigma_t = 1
kernel.sigma_f = 1
model.kind = l2
model.gamma_f = 0
model.gamma_w = 0
";

#[test]
fn minimal_off_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tri.off");
    std::fs::write(&path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n#SIGNAL vertex 3\n0 0 0\n").unwrap();
    let f = load_fshape(&path).unwrap();
    assert_eq!((f.mesh.num_vertices(), f.mesh.num_triangles()), (3, 1));
    let s = f.signal.unwrap();
    assert_eq!(s.element(), Element::P1);
    assert_eq!(s.values(), &[0.0, 0.0, 0.0]);
}

#[test]
fn round_trips_are_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (i, element) in [Element::P0, Element::P1].into_iter().enumerate() {
        for ext in ["off", "ply"] {
            let original = sample(i as u64, element);
            let path = dir.path().join(format!("m{i}.{ext}"));
            save_fshape(&original, &path).unwrap();
            let first = std::fs::read(&path).unwrap();
            let loaded = load_fshape(&path).unwrap();
            assert_eq!(loaded.mesh.vertices(), original.mesh.vertices());
            assert_eq!(loaded.mesh.triangles(), original.mesh.triangles());
            let (a, b) = (loaded.signal.unwrap(), original.signal.clone().unwrap());
            assert_eq!(a.element(), b.element());
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            save_fshape(&original, &path).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), first, "{ext}");
        }
    }
}

#[test]
fn truncated_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.off");
    std::fs::write(&path, "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n").unwrap();
    match load_fshape(&path) {
        Err(Error::Parse { line, .. }) => assert!(line >= 5, "line {line}"),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n#SIGNAL vertex 3\n0 0\n").unwrap();
    assert!(load_fshape(&path).is_err());
}

#[test]
fn csv_output_rules() {
    assert_eq!(format_csv(&["h", "minE"], &[]).unwrap(), "h,minE\n");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = random_mesh(&mut rng, 2, 2);
    let g = Signal::zeros(Element::P0, &mesh);
    let model = EnergyModel::new(Penalty::L2 { gamma_f: 1.0, gamma_w: 1.0 }, KernelParams::new(0.5, 1.0, 1.0).unwrap()).unwrap();
    let init = random_signal(&mut rng, &mesh, Element::P0, 1.0);
    let p = MatchProblem::from_fshapes(mesh.clone(), &mesh, &g, model, Some(init)).unwrap();
    let trace = minimize(&p, &DescentConfig { max_iters: 5, ..Default::default() }).unwrap();
    let rows = trace_rows(&trace);
    assert_eq!(rows.len(), trace.records.len());
    assert!(rows.iter().all(|r| r.len() == TRACE_HEADER.len()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    save_csv(&path, &TRACE_HEADER, &rows).unwrap();
    let first = std::fs::read(&path).unwrap();
    save_csv(&path, &TRACE_HEADER, &rows).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let missing = dir.path().join("no/such/dir/trace.csv");
    assert!(matches!(save_csv(&missing, &TRACE_HEADER, &rows), Err(Error::Io(_))));
    assert!(matches!(save_fshape(&sample(0, Element::P0), dir.path().join("no/x.off")), Err(Error::Io(_))));
}

#[test]
fn unknown_subcommand_prints_help() {
    let out = fshape(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("Usage"));
    assert_eq!(fshape(&[]).status.code(), Some(1));
    assert_eq!(fshape(&["--help"]).status.code(), Some(0));
}

#[test]
fn energy_of_identical_shapes_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("s.off");
    save_fshape(&sample(4, Element::P0), &mesh).unwrap();
    let conf = dir.path().join("zero.conf");
    std::fs::write(&conf, ZERO_CONFIG).unwrap();
    let m = mesh.to_str().unwrap();
    let out = fshape(&["energy", "--fshape", m, "--target", m, "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let total = stdout.lines().find(|l| l.starts_with("total")).unwrap();
    let value: f64 = total.split_whitespace().last().unwrap().parse().unwrap();
    assert_eq!(value, 0.0);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, ZERO_CONFIG.replace("kernel.sigma_e = 0.5", "kernel.sigma_e = fast")).unwrap();
    let out = fshape(&["gamma", "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("kernel.sigma_e"), "{}", text(&out));
    std::fs::write(&conf, format!("{ZERO_CONFIG}model.shape = round\n")).unwrap();
    let out = fshape(&["gamma", "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("model.shape"), "{}", text(&out));
}

#[test]
fn discretize_then_meshcheck() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cap.off");
    let o = out_path.to_str().unwrap();
    let out = fshape(&[
        "discretize", "--surface", "sphere_cap", "--param", "radius=2", "--signal", "sin(3*u)*cos(2*v)", "--h", "0.2",
        "--element", "p1", "--out", o,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let f = load_fshape(&out_path).unwrap();
    assert_eq!(f.signal.unwrap().element(), Element::P1);
    let out = fshape(&["meshcheck", "--mesh", o, "--surface", "sphere_cap", "--param", "radius=2", "--h", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("admissible") && !stdout.contains("not admissible"));
    let json = &stdout[stdout.find('{').unwrap()..];
    let report: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(report["passed"], true);

    let out = fshape(&["meshcheck", "--mesh", o, "--surface", "sphere_cap", "--h", "0.2"]);
    assert_eq!(out.status.code(), Some(1), "{}", text(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not admissible"));
    let out = fshape(&["discretize", "--surface", "sphere_cap", "--signal", "u +", "--h", "0.2", "--element", "p0", "--out", o]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn match_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.ply");
    let tgt = dir.path().join("tgt.off");
    let mut s = sample(5, Element::P0);
    s.signal = None;
    save_fshape(&s, &src).unwrap();
    save_fshape(&sample(5, Element::P0), &tgt).unwrap();
    let conf = dir.path().join("m.conf");
    std::fs::write(&conf, ZERO_CONFIG.replace("gamma_f = 0", "gamma_f = 0.5").replace("gamma_w = 0", "gamma_w = 1")).unwrap();
    let out_dir = dir.path().join("result");
    let out = fshape(&[
        "match", "--source", src.to_str().unwrap(), "--target", tgt.to_str().unwrap(), "--config",
        conf.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let optimal = load_fshape(out_dir.join("optimal.off")).unwrap();
    assert_eq!(optimal.mesh.vertices(), s.mesh.vertices());
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with(&TRACE_HEADER.join(",")));
    assert!(trace.lines().count() >= 2);
    assert!(Path::new(&out_dir).is_dir());
}
