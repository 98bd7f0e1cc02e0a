//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::Instant;

use helmdd::decomp::{checkerboard_decomposition, checkerboard_lines, strips_from_geometry, Decomposition, StripGeometry};
use helmdd::fem::{plane_wave, FemSpace};
use helmdd::impmap::{composite_zeta, gamma, rho, semiclassical_bound, strip_rho_gamma};
use helmdd::linalg::norm2;
use helmdd::mesh::{RectMesh, RectMeshBuilder};
use helmdd::oned::Interval1dDecomposition;
use helmdd::opalgebra::{binomial, bound_tn, enumerate_p, verify_expansion};
use helmdd::random::{seeded, unit_disc};
use helmdd::schwarz::{OrasSolver, StopNorm};
use helmdd::{mesh_size_for, Result, C64};

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn strips(k: f64, n: usize, length: f64, delta: f64) -> Result<(FemSpace, Decomposition)> {
    let geo = StripGeometry::from_length(n, length, delta)?;
    let mesh = RectMesh::uniform(geo.l_omega, 1.0, mesh_size_for(k), &geo.abscissae())?;
    let space = FemSpace::new(mesh)?;
    let d = strips_from_geometry(&space, geo)?;
    Ok((space, d))
}

fn checkerboard(k: f64, n: usize) -> Result<(FemSpace, Decomposition)> {
    let delta = 0.25 / n as f64;
    let lines = checkerboard_lines(1.0, n, delta);
    let mesh = RectMeshBuilder::new(1.0, 1.0, mesh_size_for(k))
        .abscissae(&lines)
        .ordinates(&lines)
        .build()?;
    let space = FemSpace::new(mesh)?;
    let d = checkerboard_decomposition(&space, n, delta)?;
    Ok((space, d))
}

fn rho_k(k: f64, delta: f64, length: f64) -> Result<f64> {
    rho(k, delta, length, mesh_size_for(k))
}

fn gamma_k(k: f64, delta: f64, length: f64) -> Result<f64> {
    gamma(k, delta, length, mesh_size_for(k))
}

fn c1_rho() -> Outcome {
    let a = rho_k(10.0, 1.0 / 3.0, 1.0)?;
    let b = rho_k(20.0, 1.0 / 3.0, 1.0)?;
    let c = rho_k(10.0, 2.0 / 3.0, 2.0)?;
    let ok = within(a, 0.155, 0.185) && within(b, 0.175, 0.205) && within(c, 0.075, 0.098);
    Ok((ok, format!("rho(10,1/3,1)={a:.4} rho(20,1/3,1)={b:.4} rho(10,2/3,2)={c:.4}")))
}

fn c2_gamma() -> Outcome {
    let a = gamma_k(10.0, 2.0 / 3.0, 1.0)?;
    let b = gamma_k(20.0, 2.0 / 3.0, 1.0)?;
    let ok = within(a, 0.94, 0.98) && within(b, 0.98, 1.005);
    Ok((ok, format!("gamma(10,2/3,1)={a:.4} gamma(20,2/3,1)={b:.4}")))
}

fn c3_lemma() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut at = String::new();
    for k in [10.0, 20.0] {
        for length in [1.0, 2.0] {
            for delta in [length / 3.0, length / 6.0] {
                let r = rho_k(k, delta, length)?;
                let g = gamma_k(k, delta, length)?;
                let slack = g - (1.0 + r * r).sqrt();
                if slack > worst {
                    worst = slack;
                    at = format!("k={k} L={length} delta={delta:.4} gamma={g:.4} rho={r:.4}");
                }
            }
        }
    }
    Ok((worst <= 0.02, format!("max gamma - sqrt(1+rho^2) = {worst:.4} at {at}")))
}

fn c4_zeta() -> Outcome {
    let (k, length, delta) = (10.0, 2.0, 2.0 / 3.0);
    let h = mesh_size_for(k);
    let r = rho(k, delta, length, h)?;
    let z2 = composite_zeta(k, 2, length, delta, h)?;
    let z4 = composite_zeta(k, 4, length, delta, h)?;
    let z8 = composite_zeta(k, 8, length, delta, h)?;
    let ok = (z2 - 2.0 * r).abs() <= 1e-10 && within(z2, 0.15, 0.20) && within(z4, 0.03, 0.055) && z4 <= z2 && z8 <= z2;
    Ok((ok, format!("zeta2={z2:.4e} (2rho={:.4e}) zeta4={z4:.4e} zeta8={z8:.4e}", 2.0 * r)))
}

fn c5_oned() -> Outcome {
    let mut rng = seeded(2024);
    let mut worst = 0.0f64;
    for k in [1.0, 10.0, 40.0] {
        for n in 2..=8 {
            let d = Interval1dDecomposition::uniform(k, n, 1.0, 0.3)?;
            worst = worst.max(d.verify_nilpotency(&mut rng, 100));
        }
    }
    Ok((worst <= 1e-12, format!("max |T^N e|/|e| = {worst:.2e}")))
}

fn c6_algebra() -> Outcome {
    let mut counts_ok = true;
    for n in 1..=12 {
        for j in 0..n {
            counts_ok &= enumerate_p(n, j)?.len() as f64 == 2.0 * binomial(n - 1, j);
        }
    }
    let mut rng = seeded(7);
    let mut worst = 0.0f64;
    for n in 1..=8 {
        worst = worst.max(verify_expansion(&mut rng, n, 3)?);
    }
    Ok((counts_ok && worst <= 1e-10, format!("cardinalities exact: {counts_ok}, expansion defect {worst:.2e}")))
}

fn mean_strip_count(k: f64, n: usize, starts: u64) -> Result<f64> {
    let (space, d) = strips(k, n, 2.0, 2.0 / 3.0)?;
    let s = OrasSolver::setup(&space, k, &d)?;
    let mut total = 0.0;
    for seed in 0..starts {
        let h = s.run_random_start(seed, 1e-6, 200, StopNorm::Error)?;
        total += h.iterations.map_or(f64::INFINITY, |i| i as f64);
    }
    Ok(total / starts as f64)
}

fn c7_strips() -> Outcome {
    let n4 = mean_strip_count(20.0, 4, 10)?;
    let n8 = mean_strip_count(20.0, 8, 10)?;
    let ok = within(n4, 4.0, 9.0) && within(n8, 9.0, 16.0);
    Ok((ok, format!("mean iterations N=4: {n4:.2} (range [4, 9]), N=8: {n8:.2} (range [9, 16])")))
}

fn checker_counts(n: usize) -> Result<(usize, usize)> {
    let (space, d) = checkerboard(40.0, n)?;
    let s = OrasSolver::setup(&space, 40.0, &d)?;
    let fp = s.run_random_start(0, 1e-6, 200, StopNorm::Residual)?;
    let gm = s.gmres_random_start(0, 1e-6, 200)?;
    Ok((fp.iterations.unwrap_or(usize::MAX), if gm.converged { gm.iterations } else { usize::MAX }))
}

fn c8_checkerboard() -> Outcome {
    let (f2, g2) = checker_counts(2)?;
    let (f4, g4) = checker_counts(4)?;
    let ok = (4..=7).contains(&f2) && (4..=7).contains(&g2) && (10..=18).contains(&f4) && (9..=17).contains(&g4);
    Ok((ok, format!("2x2: fixed point {f2}, GMRES {g2}; 4x4: fixed point {f4}, GMRES {g4}")))
}

fn c9_contraction() -> Outcome {
    let (k, length, delta) = (10.0, 8.0, 8.0 / 3.0);
    let geo = StripGeometry::from_length(3, length, delta)?;
    let (r, g) = strip_rho_gamma(k, &geo, mesh_size_for(k))?;
    let bound = bound_tn(r, g, 3)?;
    let (space, d) = strips(k, 3, length, delta)?;
    let s = OrasSolver::setup(&space, k, &d)?;
    let stats = s.estimate_tn_contraction(3, 10, 11)?;
    Ok((
        stats.max <= bound + 0.05,
        format!("max |T^3 v|/|v| = {:.4e}, bound(rho={r:.4}, gamma={g:.4}) = {bound:.4e}", stats.max),
    ))
}

fn identity_defect(space: &FemSpace, d: &Decomposition, k: f64) -> Result<f64> {
    let s = OrasSolver::setup(space, k, d)?;
    let mut rng = seeded(99);
    let u = unit_disc(&mut rng, s.num_dofs());
    let f = unit_disc(&mut rng, s.num_dofs());
    let sweep = s.oras_iterate(&u, &f);
    let au = s.matrix().mul_vec(&u);
    let r: Vec<C64> = f.iter().zip(&au).map(|(a, b)| a - b).collect();
    let rich: Vec<C64> = u.iter().zip(s.apply_oras_preconditioner(&r)).map(|(a, b)| a + b).collect();
    let diff: Vec<C64> = sweep.iter().zip(&rich).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / norm2(&sweep))
}

fn c10_identity() -> Outcome {
    let mut worst = 0.0f64;
    for n in [4, 8] {
        let (space, d) = strips(20.0, n, 2.0, 2.0 / 3.0)?;
        worst = worst.max(identity_defect(&space, &d, 20.0)?);
    }
    for n in [2, 4] {
        let (space, d) = checkerboard(40.0, n)?;
        worst = worst.max(identity_defect(&space, &d, 40.0)?);
    }
    Ok((worst <= 1e-12, format!("max relative defect {worst:.2e}")))
}

fn c11_fem() -> Outcome {
    let k = 10.0;
    let h0 = mesh_size_for(k);
    let mut errs = Vec::new();
    let mut defects = Vec::new();
    for h in [h0, h0 / 2.0, h0 / 4.0] {
        let space = FemSpace::new(RectMesh::uniform(1.0, 1.0, h, &[])?)?;
        let (u, g) = plane_wave(k, 0.0);
        let uh = space.solve_interior_impedance(k, |_| C64::new(0.0, 0.0), g)?;
        errs.push(space.l2_error(&uh, u));
        defects.push(space.impedance_isometry_defect(k, &uh, space.outer_boundary())?);
    }
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let ok = ratios.iter().all(|&q| q >= 6.0) && defects[0] > defects[1] && defects[1] > defects[2];
    Ok((
        ok,
        format!("error ratios {:.2}, {:.2}; isometry defects {:.2e}, {:.2e}, {:.2e}", ratios[0], ratios[1], defects[0], defects[1], defects[2]),
    ))
}

fn c12_semiclassical() -> Outcome {
    let bound = semiclassical_bound(1.0 / 3.0)?;
    let mut vals = Vec::new();
    for k in [10.0, 20.0, 40.0] {
        vals.push(rho_k(k, 1.0 / 3.0, 1.0)?);
    }
    let ok = vals.iter().all(|&r| r <= bound);
    Ok((ok, format!("rho(k,1/3,1) for k=10,20,40: {:.4}, {:.4}, {:.4} vs {bound:.4}", vals[0], vals[1], vals[2])))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("rho reproduction", c1_rho),
        ("gamma reproduction", c2_gamma),
        ("gamma <= sqrt(1+rho^2) on the grid", c3_lemma),
        ("composite map norms", c4_zeta),
        ("1-d nilpotency", c5_oned),
        ("monomial identities", c6_algebra),
        ("strip iteration counts", c7_strips),
        ("checkerboard iteration counts", c8_checkerboard),
        ("T^N contraction against bound", c9_contraction),
        ("sweep equals preconditioned Richardson step", c10_identity),
        ("FEM validation", c11_fem),
        ("semiclassical consistency", c12_semiclassical),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
