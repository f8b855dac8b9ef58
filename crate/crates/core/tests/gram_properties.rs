use std::sync::Arc;

use gp_pde::gram::{assemble_dense, cross_vector, CollocationEntry, CollocationSet, GramSystem};
use gp_pde::kernels::{apply_op_both, KernelParams, OperatorSpec};
use gp_pde::{Domain, Point};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn disk_set(n_int: usize, n_bnd: usize, skip: u64) -> CollocationSet {
    let d = Domain::unit_disk();
    let lap = Arc::new(OperatorSpec::neg_laplacian(2));
    let id = Arc::new(OperatorSpec::identity(2));
    let interior = d
        .sample_interior(n_int, skip)
        .unwrap()
        .into_iter()
        .map(|p| CollocationEntry::interior(p, lap.clone(), 1.0))
        .collect();
    let boundary = d
        .sample_boundary(n_bnd, skip)
        .unwrap()
        .into_iter()
        .map(|(p, f)| CollocationEntry::boundary(p, f, id.clone(), 0.0))
        .collect();
    CollocationSet::new(interior, boundary).unwrap()
}

fn heat_set(n_int: usize, n_bnd: usize) -> CollocationSet {
    let d = Domain::space_time_rect();
    let heat = Arc::new(OperatorSpec::heat(0.01));
    let id = Arc::new(OperatorSpec::identity(2));
    let dt = Arc::new(OperatorSpec::partial(2, 1, 1).unwrap());
    let interior = d
        .sample_interior(n_int, 0)
        .unwrap()
        .into_iter()
        .map(|p| CollocationEntry::interior(p, heat.clone(), 0.0))
        .collect();
    let boundary = d
        .sample_boundary(n_bnd, 0)
        .unwrap()
        .into_iter()
        .map(|(p, f)| {
            let op = if f == 3 { dt.clone() } else { id.clone() };
            CollocationEntry::boundary(p, f, op, 0.0)
        })
        .collect();
    CollocationSet::new(interior, boundary).unwrap()
}

fn to_nalgebra(sys: &GramSystem) -> DMatrix<f64> {
    let k = sys.dense().unwrap();
    DMatrix::from_fn(k.size(), k.size(), |i, j| k.get(i, j))
}

#[test]
fn gram_is_symmetric_positive_semidefinite() {
    let sets = [
        (disk_set(40, 12, 0), KernelParams::new(1.0, vec![0.5, 0.5]).unwrap()),
        (heat_set(40, 16), KernelParams::new(1.0, vec![0.3, 0.6]).unwrap()),
    ];
    for (set, kernel) in sets {
        let sys = assemble_dense(set, kernel, 0.0).unwrap();
        let k = sys.dense().unwrap();
        assert!(k.asymmetry() <= 1e-10);
        let eig = to_nalgebra(&sys).symmetric_eigenvalues();
        let max = eig.max();
        assert!(eig.min() >= -1e-10 * max, "min eigenvalue {} of max {max}", eig.min());
    }
}

#[test]
fn dense_rows_match_matrix_free_rows() {
    let kernel = KernelParams::new(1.2, vec![0.3, 0.6]).unwrap();
    let dense = assemble_dense(heat_set(30, 12), kernel.clone(), 1e-6).unwrap();
    let free = GramSystem::matrix_free(heat_set(30, 12), kernel, 1e-6).unwrap();
    assert!(free.dense().is_none());
    for j in 0..dense.len() {
        let a = dense.gram_row(j).unwrap();
        let b = free.gram_row(j).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
    let x: Vec<f64> = (0..dense.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    for (u, v) in dense.matvec(&x).iter().zip(free.matvec(&x)) {
        assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0));
    }
}

#[test]
fn entries_are_operator_applied_kernels() {
    let kernel = KernelParams::new(1.0, vec![0.5, 0.5]).unwrap();
    let set = disk_set(6, 4, 3);
    let sys = assemble_dense(set.clone(), kernel.clone(), 0.0).unwrap();
    for i in 0..set.len() {
        for j in 0..set.len() {
            let (a, b) = (set.entry(i), set.entry(j));
            let expected = apply_op_both(&a.operator, &b.operator, &kernel, &a.point, &b.point).unwrap();
            assert_eq!(sys.entry(i, j), expected);
        }
    }
    // Cross vector with the identity query is the first column's pattern.
    let z = Point::from([0.1, -0.2]);
    let c = cross_vector(&set, &kernel, &z, &OperatorSpec::identity(2)).unwrap();
    for (i, e) in set.iter().enumerate() {
        let expected = apply_op_both(&OperatorSpec::identity(2), &e.operator, &kernel, &z, &e.point).unwrap();
        assert_eq!(c[i], expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sets_give_symmetric_psd_grams(
        skip in 0u64..5000,
        n_int in 2usize..25,
        n_bnd in 1usize..10,
        ell in 0.2f64..1.0,
    ) {
        let kernel = KernelParams::new(1.0, vec![ell, ell]).unwrap();
        let sys = assemble_dense(disk_set(n_int, n_bnd, skip), kernel, 0.0).unwrap();
        prop_assert!(sys.dense().unwrap().asymmetry() <= 1e-10);
        let eig = to_nalgebra(&sys).symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-10 * eig.max());
    }
}
