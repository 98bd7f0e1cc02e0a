//! Discrete impedance-to-impedance maps on the canonical rectangle.
//!
//! The canonical domain is `[0, L] × [0, 1]` with an interior vertical line
//! `Γ_δ` at `x = δ`. Impedance data `g` on one vertical side drives a
//! Helmholtz-harmonic solution `u`; the map returns an impedance trace of `u`
//! on `Γ_δ`. With `Ω₊ = {x < δ}` and `Ω₋ = {x > δ}`, the target trace is
//! computed weakly as
//!
//! ```text
//! ⟨I g, v⟩_{Γ_δ} = a_t(u, R̃ᵀv) − a(u, R̃ᵀv)
//! ```
//!
//! where `a_t` is the impedance form on `Ω_t`. Facing `+` gives
//! `∂ₓu − iku` (outward from `Ω₊`), facing `−` gives `−∂ₓu − iku`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::decomp::StripGeometry;
use crate::error::{invalid, Error, Result};
use crate::fem::{FemSpace, TraceEdge, EDGE_RULE};
use crate::linalg::dense::weighted_operator_norm;
use crate::linalg::{factorize, ComplexSparseMatrix};
use crate::mesh::{RectMeshBuilder, Side, DEFAULT_MAX_VERTICES};
use crate::C64;

/// Relative eigenvalue tolerance of the power iteration.
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_STEPS: usize = 10_000;

/// Orientation tag `−` (left) or `+` (right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

/// Dofs on a vertical segment ordered by height, with their mass matrix.
#[derive(Debug, Clone)]
pub struct VerticalTrace {
    pub dofs: Vec<usize>,
    pub heights: Vec<f64>,
    pub mass: DMatrix<f64>,
}

impl VerticalTrace {
    fn from_edges(space: &FemSpace, edges: &[TraceEdge]) -> Result<Self> {
        let ts = space.assemble_boundary_mass(edges)?;
        let coords = space.dof_coords();
        let mut order: Vec<usize> = (0..ts.dim()).collect();
        order.sort_by(|&a, &b| coords[ts.dofs[a]][1].total_cmp(&coords[ts.dofs[b]][1]));
        let full = ts.dense_mass();
        let mass = DMatrix::from_fn(order.len(), order.len(), |i, j| full[(order[i], order[j])]);
        let dofs: Vec<usize> = order.iter().map(|&i| ts.dofs[i]).collect();
        let heights = dofs.iter().map(|&d| coords[d][1]).collect();
        Ok(Self { dofs, heights, mass })
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }
}

/// Matrix of `g ↦ I_{s,t} g` in trace-dof coordinates.
#[derive(Debug, Clone)]
pub struct ImpMapOperator {
    pub k: f64,
    pub length: f64,
    pub delta: f64,
    pub source: Sign,
    pub facing: Sign,
    pub source_trace: VerticalTrace,
    pub target_trace: VerticalTrace,
    /// `target dim × source dim`.
    pub matrix: DMatrix<C64>,
}

impl ImpMapOperator {
    pub fn apply(&self, g: &[C64]) -> Vec<C64> {
        (&self.matrix * DVector::from_column_slice(g)).as_slice().to_vec()
    }
}

/// Mesh and space of `[0, length] × [0, height]` resolving `x = delta`.
pub fn canonical_space(length: f64, height: f64, delta: f64, h: f64, max_vertices: usize) -> Result<FemSpace> {
    if !(delta > 0.0 && delta < length) {
        return Err(invalid(format!("delta = {delta} must lie strictly inside (0, {length})")));
    }
    let mesh = RectMeshBuilder::new(length, height, h)
        .abscissae(&[delta])
        .max_vertices(max_vertices)
        .build()?;
    FemSpace::new(mesh)
}

fn side_edges(space: &FemSpace, side: Side) -> Vec<TraceEdge> {
    space
        .outer_boundary()
        .iter()
        .filter(|e| {
            let n = side.normal();
            e.normal[0] * n[0] + e.normal[1] * n[1] > 0.5
        })
        .cloned()
        .collect()
}

/// Assemble `I_{s,t}` on a mesh of a rectangle with a vertex column at `delta`.
///
/// One global solve per source trace basis function, all against a single
/// factorization.
pub fn assemble_imp_map(space: &FemSpace, k: f64, source: Sign, delta: f64, facing: Sign) -> Result<ImpMapOperator> {
    let mesh = space.mesh();
    let length = mesh.lx();
    if !(delta > 0.0 && delta < length) {
        return Err(invalid(format!("delta = {delta} must lie strictly inside (0, {length})")));
    }
    let target_edges = space.vertical_trace(delta, facing == Sign::Plus)?;
    let side = match source {
        Sign::Minus => Side::Left,
        Sign::Plus => Side::Right,
    };
    let source_trace = VerticalTrace::from_edges(space, &side_edges(space, side))?;
    let target_trace = VerticalTrace::from_edges(space, &target_edges)?;

    let a = space.assemble_helmholtz(k, space.outer_boundary())?;
    let sub: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| {
            let x = mesh.barycenter(t)[0];
            match facing {
                Sign::Plus => x < delta,
                Sign::Minus => x > delta,
            }
        })
        .collect();
    let ident: Vec<usize> = (0..space.num_dofs()).collect();
    let a_t = space.assemble_helmholtz_on(k, &sub, &space.boundary_of(&sub), &ident, space.num_dofs())?;
    let diff = difference_rows(&a_t, &a, &target_trace.dofs);
    let lu = factorize(&a)?;

    let n = space.num_dofs();
    let ns = source_trace.dim();
    let columns: Vec<Vec<C64>> = (0..ns)
        .into_par_iter()
        .map(|j| {
            let mut b = vec![C64::new(0.0, 0.0); n];
            for (i, &d) in source_trace.dofs.iter().enumerate() {
                b[d] = C64::new(source_trace.mass[(i, j)], 0.0);
            }
            lu.solve_in_place(&mut b);
            diff.iter()
                .map(|row| row.iter().map(|&(c, v)| v * b[c]).sum())
                .collect()
        })
        .collect();
    let rhs = DMatrix::from_fn(target_trace.dim(), ns, |i, j| columns[j][i]);
    let chol = Cholesky::new(target_trace.mass.clone()).ok_or_else(|| invalid("target trace mass is not SPD"))?;
    let matrix = chol.l().map(|v| C64::new(v, 0.0));
    let matrix = solve_spd(&matrix, rhs);
    Ok(ImpMapOperator {
        k,
        length,
        delta,
        source,
        facing,
        source_trace,
        target_trace,
        matrix,
    })
}

/// Rows `dofs` of `A_t − A` as sparse lists.
fn difference_rows(a_t: &ComplexSparseMatrix, a: &ComplexSparseMatrix, dofs: &[usize]) -> Vec<Vec<(usize, C64)>> {
    dofs.iter()
        .map(|&d| {
            let mut row: Vec<(usize, C64)> = Vec::new();
            let (c1, v1) = a_t.row(d);
            row.extend(c1.iter().copied().zip(v1.iter().copied()));
            let (c2, v2) = a.row(d);
            row.extend(c2.iter().copied().zip(v2.iter().map(|v| -v)));
            row
        })
        .collect()
}

/// `(L Lᴴ)⁻¹ B` from a lower-triangular Cholesky factor.
fn solve_spd(l: &DMatrix<C64>, mut b: DMatrix<C64>) -> DMatrix<C64> {
    l.solve_lower_triangular_mut(&mut b);
    l.adjoint().solve_upper_triangular_mut(&mut b);
    b
}

/// `sup ‖I g‖_{L²(Γ_δ)} / ‖g‖_{L²(Γ^s)}` by power iteration on `M_src⁻¹ Iᴴ M_dst I`.
pub fn l2_operator_norm(op: &ImpMapOperator) -> Result<f64> {
    weighted_power_norm(&op.matrix, &op.source_trace.mass, &op.target_trace.mass)
}

/// Power iteration for `max ‖T x‖_{M_dst} / ‖x‖_{M_src}`.
pub fn weighted_power_norm(t: &DMatrix<C64>, m_src: &DMatrix<f64>, m_dst: &DMatrix<f64>) -> Result<f64> {
    if t.ncols() != m_src.nrows() || t.nrows() != m_dst.nrows() {
        return Err(invalid("operator and Gram matrix dimensions differ"));
    }
    if t.ncols() == 0 {
        return Ok(0.0);
    }
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(m_src.clone()).ok_or_else(|| invalid("source Gram matrix is not positive definite"))?;
    let lsrc = chol.l().map(|v| C64::new(v, 0.0));
    let msrc = m_src.map(|v| C64::new(v, 0.0));
    let mdst = m_dst.map(|v| C64::new(v, 0.0));
    let n = t.ncols();
    // deterministic start with components along every mode
    let mut x = DVector::from_fn(n, |i, _| C64::new(1.0 + (i as f64 * 0.7).sin() * 0.5, (i as f64 * 1.3).cos() * 0.5));
    let mut lambda = 0.0f64;
    for _ in 0..POWER_MAX_STEPS {
        let xn = (x.adjoint() * &msrc * &x)[(0, 0)].re.sqrt();
        if xn == 0.0 {
            return Ok(0.0);
        }
        x /= C64::new(xn, 0.0);
        let tx = t * &x;
        let mtx = &mdst * &tx;
        let next = (tx.adjoint() * &mtx)[(0, 0)].re;
        let y = t.adjoint() * mtx;
        let y = solve_spd(&lsrc, DMatrix::from_column_slice(n, 1, y.as_slice()));
        x = DVector::from_column_slice(y.as_slice());
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        if next == 0.0 {
            return Ok(0.0);
        }
        lambda = next;
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_STEPS,
        last: lambda.max(0.0).sqrt(),
    })
}

/// Dense singular-value oracle for [`l2_operator_norm`].
pub fn dense_operator_norm(op: &ImpMapOperator) -> Result<f64> {
    weighted_operator_norm(&op.matrix, &op.source_trace.mass, &op.target_trace.mass)
}

/// Norm of the same map built by differentiating the finite-element solution
/// across `Γ_δ` and integrating the trace by quadrature.
pub fn brute_force_norm(space: &FemSpace, k: f64, source: Sign, delta: f64, facing: Sign) -> Result<f64> {
    let side = match source {
        Sign::Minus => Side::Left,
        Sign::Plus => Side::Right,
    };
    let src = VerticalTrace::from_edges(space, &side_edges(space, side))?;
    let left = space.vertical_trace(delta, true)?;
    let right = space.vertical_trace(delta, false)?;
    let a = space.assemble_helmholtz(k, space.outer_boundary())?;
    let lu = factorize(&a)?;
    let n = space.num_dofs();
    let coords = space.dof_coords();
    let sign = match facing {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let cols: Vec<Vec<C64>> = (0..src.dim())
        .into_par_iter()
        .map(|j| {
            let mut b = vec![C64::new(0.0, 0.0); n];
            for (i, &d) in src.dofs.iter().enumerate() {
                b[d] = C64::new(src.mass[(i, j)], 0.0);
            }
            lu.solve_in_place(&mut b);
            let mut out = Vec::with_capacity(3 * left.len());
            for (e, f) in left.iter().zip(&right) {
                let (p, q) = (coords[e.dofs[0]], coords[e.dofs[1]]);
                for &(s, w) in &EDGE_RULE {
                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                    // centred derivative: mean of the one-sided gradients
                    let (val, gl) = space.evaluate(&b, e.element, space.element_geometry(e.element).barycentric(x));
                    let (_, gr) = space.evaluate(&b, f.element, space.element_geometry(f.element).barycentric(x));
                    let imp = sign * 0.5 * (gl[0] + gr[0]) - C64::new(0.0, k) * val;
                    out.push(imp * (w * e.length).sqrt());
                }
            }
            out
        })
        .collect();
    let m = 3 * left.len();
    let q = DMatrix::from_fn(m, src.dim(), |i, j| cols[j][i]);
    weighted_operator_norm(&q, &src.mass, &DMatrix::identity(m, m))
}

/// `ρ(k, δ, L)`: norm of `I_{−+}` at `x = δ` on `[0, L] × [0, 1]`.
pub fn rho(k: f64, delta: f64, length: f64, h: f64) -> Result<f64> {
    rho_with_cap(k, delta, length, h, DEFAULT_MAX_VERTICES)
}

pub fn rho_with_cap(k: f64, delta: f64, length: f64, h: f64, max_vertices: usize) -> Result<f64> {
    let space = canonical_space(length, 1.0, delta, h, max_vertices)?;
    l2_operator_norm(&assemble_imp_map(&space, k, Sign::Minus, delta, Sign::Plus)?)
}

/// `γ(k, δ, L)`: norm of `I_{−−}` at `x = δ` on `[0, L] × [0, 1]`.
pub fn gamma(k: f64, delta: f64, length: f64, h: f64) -> Result<f64> {
    gamma_with_cap(k, delta, length, h, DEFAULT_MAX_VERTICES)
}

pub fn gamma_with_cap(k: f64, delta: f64, length: f64, h: f64, max_vertices: usize) -> Result<f64> {
    let space = canonical_space(length, 1.0, delta, h, max_vertices)?;
    l2_operator_norm(&assemble_imp_map(&space, k, Sign::Minus, delta, Sign::Minus)?)
}

/// Canonical parameters `(kH, δ/H, L/H)` of a strip of height `height`.
pub fn canonical_parameters(k: f64, height: f64, delta: f64, length: f64) -> Result<(f64, f64, f64)> {
    if !(height > 0.0) {
        return Err(invalid(format!("strip height must be positive, got {height}")));
    }
    Ok((k * height, delta / height, length / height))
}

/// `ζ_N = 2(N−1) ‖I_{−−}(L−δ)^{N−2} I_{−+}(δ)‖` with every leg on `[0, L] × [0, 1]`.
///
/// The first leg is the transmitted map across the first overlap, each
/// further leg carries data from one subdomain's left edge to the next one's.
pub fn composite_zeta(k: f64, n: usize, length: f64, delta: f64, h: f64) -> Result<f64> {
    composite_zeta_with_cap(k, n, length, delta, h, DEFAULT_MAX_VERTICES)
}

pub fn composite_zeta_with_cap(k: f64, n: usize, length: f64, delta: f64, h: f64, max_vertices: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("composite map needs N >= 2, got {n}")));
    }
    let first_space = canonical_space(length, 1.0, delta, h, max_vertices)?;
    let first = assemble_imp_map(&first_space, k, Sign::Minus, delta, Sign::Plus)?;
    let mut product = first.matrix.clone();
    if n > 2 {
        let leg_space = canonical_space(length, 1.0, length - delta, h, max_vertices)?;
        let leg = assemble_imp_map(&leg_space, k, Sign::Minus, length - delta, Sign::Minus)?;
        if leg.source_trace.heights != first.target_trace.heights {
            return Err(invalid("composite legs have mismatched vertical traces"));
        }
        for _ in 0..n - 2 {
            product = &leg.matrix * product;
        }
    }
    let norm = weighted_power_norm(&product, &first.source_trace.mass, &first.target_trace.mass)?;
    Ok(2.0 * (n - 1) as f64 * norm)
}

/// Large-`k` reference value `(1 − cos θ)/(1 + cos θ)` with `tan θ = 1/δ`.
pub fn semiclassical_bound(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let c = (1.0 / delta).atan().cos();
    Ok((1.0 - c) / (1.0 + c))
}

/// `ρ` and `γ` of a strip decomposition: maxima over every subdomain and
/// each of its interior interfaces (height 1).
pub fn strip_rho_gamma(k: f64, geo: &StripGeometry, h: f64) -> Result<(f64, f64)> {
    let mut rho_max = 0.0f64;
    let mut gamma_max = 0.0f64;
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let n = geo.len();
    for l in 0..n {
        let len = geo.right[l] - geo.left[l];
        // overlap widths with the left and right neighbours
        let mut overlaps = Vec::new();
        if l > 0 {
            overlaps.push(geo.right[l - 1] - geo.left[l]);
        }
        if l + 1 < n {
            overlaps.push(geo.right[l] - geo.left[l + 1]);
        }
        for d in overlaps {
            if seen.iter().any(|&(a, b)| (a - len).abs() < 1e-12 && (b - d).abs() < 1e-12) {
                continue;
            }
            seen.push((len, d));
            rho_max = rho_max.max(rho(k, d, len, h)?);
            gamma_max = gamma_max.max(gamma(k, len - d, len, h)?);
        }
    }
    Ok((rho_max, gamma_max))
}
