use std::fs;
use std::sync::Arc;

use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use latquant::continuum::{continuum_norm, ClassicalGerm, QuantumGerm};
use latquant::cylinder::CylinderFunction;
use latquant::io::{function_to_json, load_function, load_operator, operator_to_json};
use latquant::lattice::Lattice;
use latquant::verify::families::self_adjoint;
use latquant::verify::{self, summarize, to_csv, SweepConfig, CSV_HEADER};
use latquant::weylq::{dequantize, quantize, HbarParam, Window};

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("latquant-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn files_round_trip_through_quantization() {
    let dir = temp_dir("files");
    let l = Arc::new(Lattice::chain(2, 2, 2));
    let f = self_adjoint(&mut ChaCha8Rng::seed_from_u64(3), &l);
    fs::write(dir.join("f.json"), function_to_json(&f)).unwrap();
    let loaded = load_function(&dir.join("f.json")).unwrap();
    assert_eq!(loaded, f);

    let op = quantize(&loaded, HbarParam::new(-0.5).unwrap()).unwrap();
    fs::write(dir.join("op.json"), operator_to_json(&op)).unwrap();
    let back = dequantize(&load_operator(&dir.join("op.json")).unwrap()).unwrap();
    for (q, v) in [([0.1, 0.2, 0.3, 0.4], [1.0, -2.0, 0.5, 3.0]), ([0.9, 0.0, 0.5, 0.7], [-4.0, 2.5, 0.0, 1.0])] {
        assert!((back.evaluate(&q, &v).unwrap() - f.evaluate(&q, &v).unwrap()).norm() < 1e-9);
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn refined_norms_grow_along_divisibility_chains() {
    let l = Arc::new(Lattice::chain(1, 1, 1));
    let f = self_adjoint(&mut ChaCha8Rng::seed_from_u64(5), &l);
    let q = QuantumGerm::new(quantize(&f, HbarParam::new(0.3).unwrap()).unwrap()).unwrap();
    let rows = continuum_norm(&q, 8, &Window::new(32), 1e-10).unwrap();
    for (a, b) in [(1, 2), (2, 4), (4, 8), (1, 3), (3, 6)] {
        let (na, nb) = (rows[a - 1].lower, rows[b - 1].lower);
        assert!(nb >= na * (1.0 - 1e-6), "R={a}: {na}, R={b}: {nb}");
    }
    assert!(rows.iter().all(|r| r.lower <= r.upper));
}

#[test]
fn report_files_have_the_fixed_layout() {
    let l = Arc::new(Lattice::chain(1, 1, 1));
    let one = Complex64::new(1.0, 0.0);
    let f = ClassicalGerm::new(CylinderFunction::monomial(l.clone(), vec![1], vec![0.3], one).unwrap()).unwrap();
    let g = ClassicalGerm::new(CylinderFunction::monomial(l, vec![1], vec![0.4], one).unwrap()).unwrap();
    let rows = verify::run_dirac(&f, &g, &SweepConfig::default()).unwrap();
    let csv = to_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 9);
    assert_eq!(first[0], "dirac");
    assert_eq!(first[1], "4.0000000000000002e-1");
    assert_eq!(first[8], "true");
    assert_eq!(summarize("dirac", &rows).verdict, "pass");

    let dyn_rows = verify::run_dynamics(&f, &[0.1, 1.0], HbarParam::new(0.5).unwrap());
    assert_eq!(dyn_rows.len(), 4);
    let dyn_csv = to_csv(&dyn_rows);
    // Rows without a bound leave `bound` and `passed` empty.
    assert!(dyn_csv.lines().any(|l| l.starts_with("dynamics-in-m0") && l.ends_with(",")));
}

#[test]
fn rieffel_zero_report_shape() {
    let l = Arc::new(Lattice::chain(1, 1, 1));
    let f = ClassicalGerm::new(self_adjoint(&mut ChaCha8Rng::seed_from_u64(9), &l)).unwrap();
    let cfg = SweepConfig {
        hbar_grid: vec![0.05, 0.01],
        rmax: 3,
        window: Window::new(48),
        tol: 1e-9,
        seed: 0,
    };
    let rows = verify::run_rieffel_zero(&f, &cfg).unwrap();
    // One sup row, then per hbar three level rows and a gap row.
    assert_eq!(rows.len(), 1 + 2 * 4);
    assert_eq!(rows[0].experiment, "rieffel0-sup");
    let gaps: Vec<_> = rows.iter().filter(|r| r.experiment == "rieffel0-gap").collect();
    assert!(gaps[0].bound.is_none());
    assert_eq!(gaps[1].passed, Some(true));
}
