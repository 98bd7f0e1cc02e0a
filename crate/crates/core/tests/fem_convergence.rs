use helmdd::fem::{plane_wave, FemSpace};
use helmdd::mesh::RectMesh;
use helmdd::{mesh_size_for, C64};

fn plane_wave_error(k: f64, h: f64) -> (f64, f64) {
    let space = FemSpace::new(RectMesh::uniform(1.0, 1.0, h, &[]).unwrap()).unwrap();
    let (u, g) = plane_wave(k, 0.0);
    let uh = space
        .solve_interior_impedance(k, |_| C64::new(0.0, 0.0), g)
        .unwrap();
    let err = space.l2_error(&uh, u);
    let defect = space
        .impedance_isometry_defect(k, &uh, space.outer_boundary())
        .unwrap();
    (err, defect)
}

#[test]
fn plane_wave_accuracy_and_rate() {
    let h = mesh_size_for(10.0);
    let (e1, _) = plane_wave_error(10.0, h);
    let (e2, _) = plane_wave_error(10.0, h / 2.0);
    assert!(e1 < 2e-2, "error {e1}");
    assert!(e1 / e2 >= 6.0, "ratio {}", e1 / e2);
}

#[test]
fn isometry_defect_decreases() {
    let d: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| plane_wave_error(10.0, h).1)
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn oblique_wave_converges() {
    let space = FemSpace::new(RectMesh::uniform(1.0, 1.0, 0.05, &[]).unwrap()).unwrap();
    let (u, g) = plane_wave(8.0, 0.7);
    let uh = space
        .solve_interior_impedance(8.0, |_| C64::new(0.0, 0.0), g)
        .unwrap();
    assert!(space.l2_error(&uh, u) < 1e-3);
    assert!(space.weighted_h1_norm(&uh, 8.0) > 0.0);
}
