use helmdd::impmap::{assemble_imp_map, canonical_space, composite_zeta, rho, Sign};
use helmdd::linalg::dense::weighted_operator_norm;
use helmdd::mesh::DEFAULT_MAX_VERTICES;

/// ζ_N from an explicit product of dense maps and an SVD norm.
fn zeta_by_svd(k: f64, n: usize, length: f64, delta: f64, h: f64) -> f64 {
    let near = canonical_space(length, 1.0, delta, h, DEFAULT_MAX_VERTICES).unwrap();
    let first = assemble_imp_map(&near, k, Sign::Minus, delta, Sign::Plus).unwrap();
    let far = canonical_space(length, 1.0, length - delta, h, DEFAULT_MAX_VERTICES).unwrap();
    let leg = assemble_imp_map(&far, k, Sign::Minus, length - delta, Sign::Minus).unwrap();
    let mut p = first.matrix.clone();
    for _ in 2..n {
        p = &leg.matrix * p;
    }
    let norm = weighted_operator_norm(&p, &first.source_trace.mass, &first.target_trace.mass).unwrap();
    2.0 * (n - 1) as f64 * norm
}

#[test]
fn composite_norm_matches_svd() {
    let (k, length, delta, h) = (6.0, 1.5, 0.5, 0.1);
    for n in [2, 3, 5] {
        let z = composite_zeta(k, n, length, delta, h).unwrap();
        let o = zeta_by_svd(k, n, length, delta, h);
        assert!((z - o).abs() <= 1e-6 * o, "N={n}: {z} vs {o}");
    }
}

#[test]
fn rho_decays_with_strip_length() {
    let h = 0.1;
    let short = rho(6.0, 1.0 / 3.0, 1.0, h).unwrap();
    let long = rho(6.0, 2.0 / 3.0, 2.0, h).unwrap();
    assert!(long < short, "{long} >= {short}");
}

#[test]
fn mirrored_geometry_gives_the_same_norm() {
    // data on x = 0 seen at x = L - δ is the mirror image of data on x = L seen at δ
    let (k, length, delta, h) = (5.0, 1.0, 0.25, 0.125);
    let space = canonical_space(length, 1.0, delta, h, DEFAULT_MAX_VERTICES).unwrap();
    let a = assemble_imp_map(&space, k, Sign::Minus, delta, Sign::Plus).unwrap();
    let space = canonical_space(length, 1.0, length - delta, h, DEFAULT_MAX_VERTICES).unwrap();
    let b = assemble_imp_map(&space, k, Sign::Plus, length - delta, Sign::Minus).unwrap();
    let na = weighted_operator_norm(&a.matrix, &a.source_trace.mass, &a.target_trace.mass).unwrap();
    let nb = weighted_operator_norm(&b.matrix, &b.source_trace.mass, &b.target_trace.mass).unwrap();
    assert!((na - nb).abs() <= 1e-8 * na, "{na} vs {nb}");
}
