use nalgebra::{DMatrix, SymmetricEigen};
use qcgeom::qmatrix::{build_q, certify_pd, quadratic_roots, expected_quadratics};

#[test]
fn floating_eigenvalues_match_exact_roots() {
    let q = build_q().to_f64();
    let m = DMatrix::from_fn(7, 7, |i, j| q[i][j]);
    let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);

    let cert = certify_pd(&build_q()).unwrap();
    let mut exact: Vec<f64> = cert
        .spectrum()
        .iter()
        .flat_map(|(r, mult)| std::iter::repeat_n(r.value(), *mult))
        .collect();
    exact.sort_by(f64::total_cmp);
    assert_eq!(exact.len(), 7);
    for (a, b) in eig.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12, "{eig:?} vs {exact:?}");
    }
}

#[test]
fn listed_eigenvalues_in_closed_form() {
    let [a, b] = quadratic_roots(&expected_quadratics()[0]).unwrap();
    assert!((a.value() - (4.5 + 73f64.sqrt() / 2.0)).abs() < 1e-14);
    assert!((b.value() - (4.5 - 73f64.sqrt() / 2.0)).abs() < 1e-14);
    let [c, d] = quadratic_roots(&expected_quadratics()[1]).unwrap();
    assert!((c.value() - (5.5 + 89f64.sqrt() / 2.0)).abs() < 1e-14);
    assert!((d.value() - (5.5 - 89f64.sqrt() / 2.0)).abs() < 1e-14);
    assert_eq!(format!("{:.8}", a.value()), "8.77200187");
}
