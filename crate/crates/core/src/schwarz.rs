//! Optimized restricted additive Schwarz (ORAS) with impedance transmission.
//!
//! One sweep maps a global iterate `u` to
//!
//! ```text
//! u_ℓ  = R_ℓ u + A_ℓ⁻¹ R_ℓ (F - A u)         (every subdomain)
//! u'   = Σ_ℓ R_ℓᵀ D_ℓ u_ℓ
//! ```
//!
//! where `A_ℓ` carries the impedance term on the whole of `∂Ω_ℓ` and `D_ℓ`
//! holds the partition-of-unity weights. The same local solves give the
//! preconditioner `M⁻¹ r = Σ_ℓ R_ℓᵀ D_ℓ A_ℓ⁻¹ R_ℓ r`, so a sweep is the
//! Richardson step `u + M⁻¹ (F - A u)`.
//!
//! Errors are measured in the discrete harmonic norm: for a local vector `v`
//! with `A_ℓ v` supported on boundary dofs, `‖v‖² = r_bᴴ M_b⁻¹ r_b` where
//! `r_b` is that boundary residual and `M_b` the boundary mass matrix.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::linalg::{factorize, gmres, norm2, ComplexSparseMatrix, GmresOutcome, SparseLu};
use crate::random::{seeded, unit_disc};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative size of the interior residual tolerated by [`OrasSolver::error_norm_v0`],
/// on top of a roundoff floor `1e-12 ‖A_ℓ‖_max ‖v‖`.
pub const HARMONIC_TOL: f64 = 1e-8;

/// Factorized local problem of one subdomain.
#[derive(Debug)]
pub struct LocalProblem {
    /// Global dofs, sorted.
    pub dofs: Vec<usize>,
    pub weights: Vec<f64>,
    pub matrix: ComplexSparseMatrix,
    lu: SparseLu,
    /// Local indices of dofs on `∂Ω_ℓ`.
    pub boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    boundary_mass: SparseLu,
}

impl LocalProblem {
    pub fn restrict(&self, v: &[C64]) -> Vec<C64> {
        self.dofs.iter().map(|&g| v[g]).collect()
    }

    pub fn solve(&self, r: &[C64]) -> Vec<C64> {
        self.lu.solve(r)
    }
}

/// Global operator, local factorizations and restriction maps.
#[derive(Debug)]
pub struct OrasSolver {
    k: f64,
    matrix: ComplexSparseMatrix,
    global_lu: OnceLock<std::result::Result<SparseLu, String>>,
    locals: Vec<LocalProblem>,
}

/// Convergence record of a fixed-point run. Row `i` describes iterate `i + 1`.
#[derive(Debug, Clone, Default)]
pub struct IterationHistory {
    /// `‖e^n‖ / ‖e^1‖` in the discrete harmonic norm.
    pub rel_error: Vec<f64>,
    /// `‖F - A u^n‖ / ‖F - A u^0‖`.
    pub rel_residual: Vec<f64>,
    /// First iterate meeting the tolerance, if any.
    pub iterations: Option<usize>,
    pub seconds: f64,
}

impl IterationHistory {
    pub fn converged(&self) -> bool {
        self.iterations.is_some()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,rel_error,rel_residual")?;
        for (i, (e, r)) in self.rel_error.iter().zip(&self.rel_residual).enumerate() {
            writeln!(out, "{},{:e},{:e}", i + 1, e, r)?;
        }
        Ok(())
    }
}

/// Which quantity stops a fixed-point run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopNorm {
    /// Discrete harmonic error relative to iterate 1.
    Error,
    /// Euclidean residual relative to the starting residual.
    Residual,
}

/// Ratios `‖T^N v‖ / ‖v‖` over random discrete-harmonic `v`.
#[derive(Debug, Clone)]
pub struct ContractionStats {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

impl OrasSolver {
    /// Assemble and factorize the global and all local problems.
    pub fn setup(space: &FemSpace, k: f64, decomposition: &Decomposition) -> Result<Self> {
        if decomposition.num_global_dofs() != space.num_dofs() {
            return Err(crate::error::invalid("decomposition was built on a different space"));
        }
        let matrix = space.assemble_helmholtz(k, space.outer_boundary())?;
        let n = space.num_dofs();
        let locals = decomposition
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(l, s)| {
                let wrap = |e: Error| Error::Subdomain {
                    subdomain: l,
                    source: Box::new(e),
                };
                let map = s.local_map(n);
                let a = space
                    .assemble_helmholtz_on(k, &s.elements, &s.boundary, &map, s.num_dofs())
                    .map_err(wrap)?;
                let lu = factorize(&a).map_err(wrap)?;
                let trace = space.assemble_boundary_mass(&s.boundary).map_err(wrap)?;
                let boundary: Vec<usize> = trace.dofs.iter().map(|&g| map[g]).collect();
                let mut is_boundary = vec![false; s.num_dofs()];
                for &b in &boundary {
                    is_boundary[b] = true;
                }
                let boundary_mass = factorize(&trace.mass).map_err(wrap)?;
                Ok(LocalProblem {
                    dofs: s.dofs.clone(),
                    weights: s.weights.clone(),
                    matrix: a,
                    lu,
                    boundary,
                    is_boundary,
                    boundary_mass,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            matrix,
            global_lu: OnceLock::new(),
            locals,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn matrix(&self) -> &ComplexSparseMatrix {
        &self.matrix
    }

    pub fn locals(&self) -> &[LocalProblem] {
        &self.locals
    }

    pub fn num_dofs(&self) -> usize {
        self.matrix.nrows()
    }

    /// Direct solve with the global matrix, factorized on first use.
    pub fn solve_global(&self, f: &[C64]) -> Result<Vec<C64>> {
        let lu = self
            .global_lu
            .get_or_init(|| factorize(&self.matrix).map_err(|e| e.to_string()));
        match lu {
            Ok(lu) => Ok(lu.solve(f)),
            Err(msg) => Err(crate::error::invalid(format!("global factorization failed: {msg}"))),
        }
    }

    fn residual(&self, u: &[C64], f: &[C64]) -> Vec<C64> {
        let au = self.matrix.mul_vec(u);
        f.iter().zip(au).map(|(a, b)| a - b).collect()
    }

    /// `Σ_ℓ R_ℓᵀ D_ℓ v_ℓ`, summed in subdomain order.
    pub fn prolong(&self, locals: &[Vec<C64>]) -> Vec<C64> {
        let mut out = vec![ZERO; self.num_dofs()];
        for (lp, v) in self.locals.iter().zip(locals) {
            for ((&g, &w), x) in lp.dofs.iter().zip(&lp.weights).zip(v) {
                out[g] += w * x;
            }
        }
        out
    }

    /// Local iterates `R_ℓ u + A_ℓ⁻¹ R_ℓ (F - A u)` of one sweep.
    pub fn local_updates(&self, u: &[C64], f: &[C64]) -> Vec<Vec<C64>> {
        let r = self.residual(u, f);
        self.locals
            .par_iter()
            .map(|lp| {
                let c = lp.solve(&lp.restrict(&r));
                lp.restrict(u).iter().zip(c).map(|(a, b)| a + b).collect()
            })
            .collect()
    }

    /// One ORAS sweep.
    pub fn oras_iterate(&self, u: &[C64], f: &[C64]) -> Vec<C64> {
        self.prolong(&self.local_updates(u, f))
    }

    /// `Σ_ℓ R_ℓᵀ D_ℓ A_ℓ⁻¹ R_ℓ r`
    pub fn apply_oras_preconditioner(&self, r: &[C64]) -> Vec<C64> {
        let locals: Vec<Vec<C64>> = self
            .locals
            .par_iter()
            .map(|lp| lp.solve(&lp.restrict(r)))
            .collect();
        self.prolong(&locals)
    }

    /// `max |Σ_ℓ R_ℓᵀ D_ℓ R_ℓ v - v|` for a random `v`.
    pub fn partition_identity_defect(&self, seed: u64) -> f64 {
        let v = unit_disc(&mut seeded(seed), self.num_dofs());
        let locals: Vec<Vec<C64>> = self.locals.iter().map(|lp| lp.restrict(&v)).collect();
        self.prolong(&locals)
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Discrete harmonic norm of one local vector.
    ///
    /// Fails if the interior residual of `A_ℓ v` exceeds [`HARMONIC_TOL`]
    /// times its boundary residual.
    pub fn local_norm_v0(&self, l: usize, v: &[C64]) -> Result<f64> {
        self.local_norm_impl(l, v, true)
    }

    fn local_norm_impl(&self, l: usize, v: &[C64], check: bool) -> Result<f64> {
        let lp = &self.locals[l];
        let r = lp.matrix.mul_vec(v);
        let rb: Vec<C64> = lp.boundary.iter().map(|&i| r[i]).collect();
        if check {
            let interior = r
                .iter()
                .zip(&lp.is_boundary)
                .filter(|(_, &b)| !b)
                .map(|(x, _)| x.norm_sqr())
                .sum::<f64>()
                .sqrt();
            let boundary = norm2(&rb);
            // roundoff floor so vectors that are already tiny are not rejected
            let floor = 1e-12 * lp.matrix.max_abs() * norm2(v);
            if interior > HARMONIC_TOL * boundary + floor {
                return Err(Error::NotHarmonic {
                    subdomain: l,
                    interior,
                    boundary,
                });
            }
        }
        let y = lp.boundary_mass.solve(&rb);
        let q: C64 = rb.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        Ok(q.re.max(0.0).sqrt())
    }

    /// `(Σ_ℓ ‖v_ℓ‖²)^{1/2}` over per-subdomain vectors, each checked to be
    /// discrete-harmonic.
    pub fn error_norm_v0(&self, locals: &[Vec<C64>]) -> Result<f64> {
        self.norm_v0(locals, true)
    }

    // Sweep outputs are harmonic by construction; near convergence they are
    // dominated by cancellation roundoff, which the check would misread.
    fn norm_v0(&self, locals: &[Vec<C64>], check: bool) -> Result<f64> {
        let sq = locals
            .par_iter()
            .enumerate()
            .map(|(l, v)| self.local_norm_impl(l, v, check).map(|x| x * x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(sq.iter().sum::<f64>().sqrt())
    }

    /// Fixed-point iteration from `u0` until the chosen relative norm drops
    /// to `tol`, for at most `max_iter` sweeps.
    pub fn run_fixed_point(
        &self,
        f: &[C64],
        u0: &[C64],
        tol: f64,
        max_iter: usize,
        stop: StopNorm,
    ) -> Result<IterationHistory> {
        let start = Instant::now();
        let mut hist = IterationHistory::default();
        let r0 = norm2(&self.residual(u0, f));
        // errors relative to the discrete solution
        let exact = if norm2(f) == 0.0 {
            None
        } else {
            Some(self.solve_global(f)?)
        };
        let mut u = u0.to_vec();
        let mut e1 = None;
        for n in 1..=max_iter {
            let locals = self.local_updates(&u, f);
            u = self.prolong(&locals);
            let err_locals: Vec<Vec<C64>> = match &exact {
                None => locals,
                Some(x) => locals
                    .into_iter()
                    .zip(&self.locals)
                    .map(|(v, lp)| v.iter().zip(&lp.dofs).map(|(a, &g)| a - x[g]).collect())
                    .collect(),
            };
            let e = self.norm_v0(&err_locals, false)?;
            let e1v = *e1.get_or_insert(e);
            let rel_e = if e1v == 0.0 { 0.0 } else { e / e1v };
            let rel_r = if r0 == 0.0 { 0.0 } else { norm2(&self.residual(&u, f)) / r0 };
            hist.rel_error.push(rel_e);
            hist.rel_residual.push(rel_r);
            let done = match stop {
                StopNorm::Error => rel_e <= tol,
                StopNorm::Residual => rel_r <= tol,
            };
            if done {
                hist.iterations = Some(n);
                break;
            }
        }
        hist.seconds = start.elapsed().as_secs_f64();
        Ok(hist)
    }

    /// Zero right-hand side, start uniform in the unit disc.
    pub fn run_random_start(&self, seed: u64, tol: f64, max_iter: usize, stop: StopNorm) -> Result<IterationHistory> {
        let u0 = unit_disc(&mut seeded(seed), self.num_dofs());
        let f = vec![ZERO; self.num_dofs()];
        self.run_fixed_point(&f, &u0, tol, max_iter, stop)
    }

    /// ORAS-preconditioned GMRES for `A u = 0` from a random start `u0`:
    /// solves `A x = -A u0` from zero.
    pub fn gmres_random_start(&self, seed: u64, tol: f64, max_iter: usize) -> Result<GmresOutcome> {
        let u0 = unit_disc(&mut seeded(seed), self.num_dofs());
        let b: Vec<C64> = self.matrix.mul_vec(&u0).iter().map(|v| -v).collect();
        gmres(
            |v| self.matrix.mul_vec(v),
            |v| self.apply_oras_preconditioner(v),
            &b,
            tol,
            max_iter,
        )
    }

    /// Apply the error recursion `power` times to random harmonic starts.
    ///
    /// Each start is iterate 1 of a zero-data run from a unit-disc random
    /// vector; the ratio is `‖e^{1+power}‖ / ‖e^1‖`.
    pub fn estimate_tn_contraction(&self, power: usize, trials: usize, seed: u64) -> Result<ContractionStats> {
        let f = vec![ZERO; self.num_dofs()];
        let mut ratios = Vec::with_capacity(trials);
        for t in 0..trials {
            let u0 = unit_disc(&mut seeded(seed.wrapping_add(t as u64)), self.num_dofs());
            let mut locals = self.local_updates(&u0, &f);
            let e1 = self.norm_v0(&locals, false)?;
            for _ in 0..power {
                let u = self.prolong(&locals);
                locals = self.local_updates(&u, &f);
            }
            let en = self.norm_v0(&locals, false)?;
            ratios.push(if e1 == 0.0 { 0.0 } else { en / e1 });
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let mean = if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
        Ok(ContractionStats { ratios, max, mean })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{strip_decomposition, StripGeometry};
    use crate::mesh::RectMesh;

    fn strips(n: usize, h: f64) -> (FemSpace, Decomposition) {
        let geo = StripGeometry::from_length(n, 2.0, 2.0 / 3.0).unwrap();
        let mesh = RectMesh::uniform(geo.l_omega, 1.0, h, &geo.abscissae()).unwrap();
        let space = FemSpace::new(mesh).unwrap();
        let d = crate::decomp::strips_from_geometry(&space, geo).unwrap();
        (space, d)
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn single_subdomain_is_direct_solve() {
        let space = FemSpace::new(RectMesh::uniform(1.0, 1.0, 0.1, &[]).unwrap()).unwrap();
        let d = strip_decomposition(&space, 1, 0.0).unwrap();
        let s = OrasSolver::setup(&space, 5.0, &d).unwrap();
        assert_eq!(&s.locals()[0].matrix, s.matrix());
        let f = unit_disc(&mut seeded(1), s.num_dofs());
        let u1 = s.oras_iterate(&vec![ZERO; s.num_dofs()], &f);
        let x = s.solve_global(&f).unwrap();
        assert!(dist(&u1, &x) <= 1e-10 * norm2(&x));
        let m = s.apply_oras_preconditioner(&f);
        assert!(dist(&m, &x) <= 1e-10 * norm2(&x));
        let h = s.run_random_start(3, 1e-6, 5, StopNorm::Residual).unwrap();
        assert_eq!(h.iterations, Some(1));
        let stats = s.estimate_tn_contraction(1, 2, 4).unwrap();
        assert!(stats.max <= 1e-10);
    }

    #[test]
    fn strip_sweep_properties() {
        let (space, d) = strips(3, 0.1);
        let s = OrasSolver::setup(&space, 6.0, &d).unwrap();
        assert!(s.partition_identity_defect(9) <= 1e-12);
        for lp in s.locals() {
            assert!(lp.matrix.symmetry_defect() <= 1e-12 * lp.matrix.max_abs());
        }
        let n = s.num_dofs();
        let zero = vec![ZERO; n];
        assert!(s.oras_iterate(&zero, &zero).iter().all(|v| *v == ZERO));

        let f = unit_disc(&mut seeded(2), n);
        let x = s.solve_global(&f).unwrap();
        assert!(dist(&s.oras_iterate(&x, &f), &x) <= 1e-10 * norm2(&x));

        // sweep = Richardson step with the preconditioner
        let u = unit_disc(&mut seeded(5), n);
        let sweep = s.oras_iterate(&u, &f);
        let r: Vec<C64> = f.iter().zip(s.matrix().mul_vec(&u)).map(|(a, b)| a - b).collect();
        let rich: Vec<C64> = u.iter().zip(s.apply_oras_preconditioner(&r)).map(|(a, b)| a + b).collect();
        assert!(dist(&sweep, &rich) <= 1e-12 * norm2(&sweep));
    }

    #[test]
    fn v0_norm_axioms() {
        let (space, d) = strips(2, 0.1);
        let s = OrasSolver::setup(&space, 6.0, &d).unwrap();
        let zero = vec![ZERO; s.locals()[0].dofs.len()];
        assert_eq!(s.local_norm_v0(0, &zero).unwrap(), 0.0);
        let u0 = unit_disc(&mut seeded(8), s.num_dofs());
        let locals = s.local_updates(&u0, &vec![ZERO; s.num_dofs()]);
        let a = s.error_norm_v0(&locals).unwrap();
        assert!(a > 0.0);
        let twice: Vec<Vec<C64>> = locals.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
        assert!((s.error_norm_v0(&twice).unwrap() - 2.0 * a).abs() <= 1e-12 * a);
        // a random vector is not harmonic
        let rnd = unit_disc(&mut seeded(9), s.locals()[0].dofs.len());
        assert!(matches!(s.local_norm_v0(0, &rnd), Err(Error::NotHarmonic { .. })));
    }

    #[test]
    fn error_history_is_normalized_and_fixed_point_is_stable() {
        let (space, d) = strips(3, 0.1);
        let s = OrasSolver::setup(&space, 6.0, &d).unwrap();
        let h = s.run_random_start(11, 1e-6, 60, StopNorm::Error).unwrap();
        assert_eq!(h.rel_error[0], 1.0);
        assert!(h.converged());
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iter,rel_error,rel_residual\n1,"));
        // exact solution stays put
        let f = unit_disc(&mut seeded(12), s.num_dofs());
        let x = s.solve_global(&f).unwrap();
        let mut u = x.clone();
        for _ in 0..3 {
            u = s.oras_iterate(&u, &f);
        }
        assert!(dist(&u, &x) <= 1e-10 * norm2(&x));
        // nonzero data: errors are measured against the discrete solution
        let u0 = unit_disc(&mut seeded(13), s.num_dofs());
        let h = s.run_fixed_point(&f, &u0, 1e-8, 80, StopNorm::Error).unwrap();
        assert!(h.converged());
        assert!(*h.rel_residual.last().unwrap() < 1e-6);
    }

    #[test]
    fn strip_error_touches_only_neighbours() {
        let (space, d) = strips(4, 0.1);
        let s = OrasSolver::setup(&space, 6.0, &d).unwrap();
        let n = s.num_dofs();
        let zero = vec![ZERO; n];
        // error supported in strip 0 only
        let mut locals: Vec<Vec<C64>> = s.locals().iter().map(|lp| vec![ZERO; lp.dofs.len()]).collect();
        locals[0] = s.local_updates(&unit_disc(&mut seeded(1), n), &zero)[0].clone();
        let next = s.local_updates(&s.prolong(&locals), &zero);
        assert!(norm2(&next[1]) > 0.0);
        // diagonal block vanishes
        assert!(norm2(&next[0]) <= 1e-10 * norm2(&next[1]));
        assert!(norm2(&next[2]) <= 1e-12 * norm2(&next[1]));
        assert!(norm2(&next[3]) == 0.0);
    }
}
