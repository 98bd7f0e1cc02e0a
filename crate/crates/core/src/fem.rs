//! Degree-2 Lagrange finite elements on a [`RectMesh`].
//!
//! Degrees of freedom are the mesh vertices followed by the edge midpoints.
//! Local numbering on a triangle `[v0, v1, v2]` is `v0, v1, v2, e01, e12, e20`.
//!
//! The Helmholtz form is
//! `a(u, v) = (∇u, ∇v) - k² (u, v) - i k <u, v>_Γ`
//! with `Γ` the chosen impedance edges, and the assembled matrix has
//! entries `A[i][j] = a(φ_j, φ_i)`.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::linalg::{factorize, norm2, ComplexSparseMatrix, TripletBuilder};
use crate::mesh::{RectMesh, Side};
use crate::C64;

/// Degree-4 six-point rule on the reference triangle, weights summing to 1.
pub const TRIANGLE_RULE: [([f64; 2], f64); 6] = {
    const A: f64 = 0.445948490915965;
    const WA: f64 = 0.223381589678011;
    const B: f64 = 0.091576213509771;
    const WB: f64 = 0.109951743655322;
    [
        ([A, A], WA),
        ([1.0 - 2.0 * A, A], WA),
        ([A, 1.0 - 2.0 * A], WA),
        ([B, B], WB),
        ([1.0 - 2.0 * B, B], WB),
        ([B, 1.0 - 2.0 * B], WB),
    ]
};

/// Three-point Gauss rule on `[0, 1]`.
pub const EDGE_RULE: [(f64, f64); 3] = [
    (0.112701665379258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887298334620741_7, 5.0 / 18.0),
];

const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Quadratic basis on an edge parametrized by `t ∈ [0, 1]`: start, end, midpoint.
pub fn edge_basis(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)]
}

fn triangle_basis(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// An edge of a subdomain boundary, oriented counterclockwise with respect to
/// the element `element` that owns it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEdge {
    pub vertices: [usize; 2],
    /// Global dofs: start vertex, end vertex, midpoint.
    pub dofs: [usize; 3],
    pub element: usize,
    /// Outward unit normal relative to the owning element.
    pub normal: [f64; 2],
    pub length: f64,
}

/// Affine element data.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
}

impl ElementGeometry {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let j = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // rows of J⁻¹ are ∇ξ and ∇η
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Self {
            origin: p[0],
            jacobian: j,
            grad_lambda: [g0, g1, g2],
            area: 0.5 * det,
        }
    }

    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let g = &self.grad_lambda;
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Physical gradients of the six basis functions at barycentric point `l`.
    pub fn basis_gradients(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            for c in 0..2 {
                out[i][c] = (4.0 * l[i] - 1.0) * g[i][c];
            }
        }
        for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            for c in 0..2 {
                out[3 + e][c] = 4.0 * (l[*a] * g[*b][c] + l[*b] * g[*a][c]);
            }
        }
        out
    }
}

/// Degree-2 Lagrange space.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: RectMesh,
    coords: Vec<[f64; 2]>,
    elem_dofs: Vec<[usize; 6]>,
    edge_index: HashMap<(usize, usize), usize>,
    side_dofs: [Vec<usize>; 4],
    outer: Vec<TraceEdge>,
}

fn side_slot(s: Side) -> usize {
    match s {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

impl FemSpace {
    pub fn new(mesh: RectMesh) -> Result<Self> {
        if mesh.num_triangles() == 0 {
            return Err(invalid("mesh has no triangles"));
        }
        let nv = mesh.num_vertices();
        let mut coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
        let mut edge_index = HashMap::with_capacity(3 * mesh.num_triangles() / 2 + nv);
        let mut elem_dofs = Vec::with_capacity(mesh.num_triangles());
        for tri in mesh.triangles() {
            let mut d = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (tri[*a], tri[*b]);
                let key = (p.min(q), p.max(q));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    let (x, y) = (mesh.vertices()[p], mesh.vertices()[q]);
                    coords.push([0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])]);
                    coords.len() - 1 - nv
                });
                d[3 + e] = nv + id;
            }
            elem_dofs.push(d);
        }
        let mut space = Self {
            mesh,
            coords,
            elem_dofs,
            edge_index,
            side_dofs: Default::default(),
            outer: Vec::new(),
        };
        let all: Vec<usize> = (0..space.mesh.num_triangles()).collect();
        space.outer = space.boundary_of(&all);
        let mut sides: [Vec<usize>; 4] = Default::default();
        for be in space.mesh.boundary_edges() {
            let [a, b] = be.vertices;
            let m = space.edge_dof(a, b).expect("boundary edge belongs to the mesh");
            sides[side_slot(be.side)].extend([a, b, m]);
        }
        for s in &mut sides {
            s.sort_unstable();
            s.dedup();
        }
        space.side_dofs = sides;
        Ok(space)
    }

    pub fn mesh(&self) -> &RectMesh {
        &self.mesh
    }

    pub fn num_dofs(&self) -> usize {
        self.coords.len()
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn element_dofs(&self) -> &[[usize; 6]] {
        &self.elem_dofs
    }

    pub fn element_geometry(&self, t: usize) -> ElementGeometry {
        let tri = self.mesh.triangles()[t];
        let v = self.mesh.vertices();
        ElementGeometry::new([v[tri[0]], v[tri[1]], v[tri[2]]])
    }

    /// Midpoint dof of the edge between two vertices, if that edge exists.
    pub fn edge_dof(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index
            .get(&(a.min(b), a.max(b)))
            .map(|&id| self.mesh.num_vertices() + id)
    }

    /// Sorted dofs on one side of the rectangle, corners included.
    pub fn side_dofs(&self, side: Side) -> &[usize] {
        &self.side_dofs[side_slot(side)]
    }

    /// Boundary edges of the whole rectangle.
    pub fn outer_boundary(&self) -> &[TraceEdge] {
        &self.outer
    }

    /// Edges used by exactly one element of `elements`, in element order.
    pub fn boundary_of(&self, elements: &[usize]) -> Vec<TraceEdge> {
        let mut count: HashMap<(usize, usize), (u8, usize, usize)> = HashMap::new();
        for &t in elements {
            let tri = self.mesh.triangles()[t];
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (tri[*a], tri[*b]);
                count.entry((p.min(q), p.max(q))).or_insert((0, t, e)).0 += 1;
            }
        }
        let mut out = Vec::new();
        for &t in elements {
            let tri = self.mesh.triangles()[t];
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (tri[*a], tri[*b]);
                if count[&(p.min(q), p.max(q))].0 == 1 {
                    out.push(self.trace_edge(t, e));
                }
            }
        }
        out
    }

    /// Trace edge for local edge `e` of triangle `t`.
    pub fn trace_edge(&self, t: usize, e: usize) -> TraceEdge {
        let tri = self.mesh.triangles()[t];
        let [a, b] = LOCAL_EDGES[e];
        let (p, q) = (tri[a], tri[b]);
        let (x, y) = (self.mesh.vertices()[p], self.mesh.vertices()[q]);
        let d = [y[0] - x[0], y[1] - x[1]];
        let length = d[0].hypot(d[1]);
        TraceEdge {
            vertices: [p, q],
            dofs: [p, q, self.elem_dofs[t][3 + e]],
            element: t,
            normal: [d[1] / length, -d[0] / length],
            length,
        }
    }

    /// Trace edges on the vertical line `x = x0`, taken from the elements to
    /// the left of it (normal `+x`) or to the right (normal `-x`).
    pub fn vertical_trace(&self, x0: f64, from_left: bool) -> Result<Vec<TraceEdge>> {
        let chain = self.mesh.vertical_interface_edges(x0)?;
        let mut out = Vec::with_capacity(chain.len());
        let want = if from_left { 1.0 } else { -1.0 };
        let lookup: HashMap<(usize, usize), ()> =
            chain.iter().map(|&[a, b]| ((a.min(b), a.max(b)), ())).collect();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (p, q) = (tri[*a], tri[*b]);
                if lookup.contains_key(&(p.min(q), p.max(q))) {
                    let te = self.trace_edge(t, e);
                    if te.normal[0] * want > 0.5 {
                        out.push(te);
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            let ya = self.coords[a.dofs[2]][1];
            let yb = self.coords[b.dofs[2]][1];
            ya.total_cmp(&yb)
        });
        Ok(out)
    }

    fn element_matrices(&self, t: usize) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
        let geo = self.element_geometry(t);
        let mut stiff = [[0.0; 6]; 6];
        let mut mass = [[0.0; 6]; 6];
        for &(xi, w) in &TRIANGLE_RULE {
            let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
            let phi = triangle_basis(l);
            let grad = geo.basis_gradients(l);
            let wa = w * geo.area;
            for i in 0..6 {
                for j in 0..6 {
                    stiff[i][j] += wa * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                    mass[i][j] += wa * phi[i] * phi[j];
                }
            }
        }
        (stiff, mass)
    }

    fn edge_mass(length: f64) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for &(t, w) in &EDGE_RULE {
            let phi = edge_basis(t);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += w * length * phi[i] * phi[j];
                }
            }
        }
        m
    }

    /// Helmholtz matrix on the whole mesh with impedance on `impedance_edges`.
    pub fn assemble_helmholtz(&self, k: f64, impedance_edges: &[TraceEdge]) -> Result<ComplexSparseMatrix> {
        let all: Vec<usize> = (0..self.mesh.num_triangles()).collect();
        let ident: Vec<usize> = (0..self.num_dofs()).collect();
        self.assemble_helmholtz_on(k, &all, impedance_edges, &ident, self.num_dofs())
    }

    /// Helmholtz matrix over a subset of elements, numbered through
    /// `local[global]` into `n_local` unknowns.
    pub fn assemble_helmholtz_on(
        &self,
        k: f64,
        elements: &[usize],
        impedance_edges: &[TraceEdge],
        local: &[usize],
        n_local: usize,
    ) -> Result<ComplexSparseMatrix> {
        if !(k > 0.0) {
            return Err(invalid(format!("wavenumber must be positive, got {k}")));
        }
        if elements.is_empty() {
            return Err(invalid("cannot assemble on an empty element set"));
        }
        let k2 = k * k;
        let mut b = TripletBuilder::with_capacity(n_local, n_local, 36 * elements.len() + 9 * impedance_edges.len());
        for &t in elements {
            let (s, m) = self.element_matrices(t);
            let d = self.elem_dofs[t];
            for i in 0..6 {
                for j in 0..6 {
                    b.push(local[d[i]], local[d[j]], C64::new(s[i][j] - k2 * m[i][j], 0.0));
                }
            }
        }
        for e in impedance_edges {
            let m = Self::edge_mass(e.length);
            for i in 0..3 {
                for j in 0..3 {
                    b.push(local[e.dofs[i]], local[e.dofs[j]], C64::new(0.0, -k * m[i][j]));
                }
            }
        }
        Ok(b.build())
    }

    /// Boundary mass matrix on the dofs carried by `edges`.
    pub fn assemble_boundary_mass(&self, edges: &[TraceEdge]) -> Result<TraceSpace> {
        if edges.is_empty() {
            return Err(invalid("boundary mass needs at least one edge"));
        }
        let mut dofs: Vec<usize> = edges.iter().flat_map(|e| e.dofs).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let mut pos = HashMap::with_capacity(dofs.len());
        for (i, &d) in dofs.iter().enumerate() {
            pos.insert(d, i);
        }
        let n = dofs.len();
        let mut b = TripletBuilder::new(n, n);
        for e in edges {
            let m = Self::edge_mass(e.length);
            for i in 0..3 {
                for j in 0..3 {
                    b.push(pos[&e.dofs[i]], pos[&e.dofs[j]], C64::new(m[i][j], 0.0));
                }
            }
        }
        Ok(TraceSpace {
            dofs,
            mass: b.build(),
        })
    }

    /// `F_i = ∫ g φ_i` over `edges`; `g` receives the point and outward normal.
    pub fn impedance_load<G>(&self, edges: &[TraceEdge], g: G) -> Vec<C64>
    where
        G: Fn([f64; 2], [f64; 2]) -> C64,
    {
        let mut f = vec![C64::new(0.0, 0.0); self.num_dofs()];
        for e in edges {
            let (x, y) = (self.coords[e.dofs[0]], self.coords[e.dofs[1]]);
            for &(t, w) in &EDGE_RULE {
                let p = [x[0] + t * (y[0] - x[0]), x[1] + t * (y[1] - x[1])];
                let gv = g(p, e.normal) * (w * e.length);
                for (i, phi) in edge_basis(t).iter().enumerate() {
                    f[e.dofs[i]] += gv * *phi;
                }
            }
        }
        f
    }

    /// `F_i = ∫ f φ_i` over the mesh.
    pub fn volume_load<F>(&self, f: F) -> Vec<C64>
    where
        F: Fn([f64; 2]) -> C64,
    {
        let mut out = vec![C64::new(0.0, 0.0); self.num_dofs()];
        for t in 0..self.mesh.num_triangles() {
            let geo = self.element_geometry(t);
            for &(xi, w) in &TRIANGLE_RULE {
                let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
                let fv = f(geo.map(xi)) * (w * geo.area);
                for (i, phi) in triangle_basis(l).iter().enumerate() {
                    out[self.elem_dofs[t][i]] += fv * *phi;
                }
            }
        }
        out
    }

    /// Solve `-Δu - k²u = f` with `∂u/∂n - iku = g` on the whole boundary.
    pub fn solve_interior_impedance<F, G>(&self, k: f64, f: F, g: G) -> Result<Vec<C64>>
    where
        F: Fn([f64; 2]) -> C64,
        G: Fn([f64; 2], [f64; 2]) -> C64,
    {
        let a = self.assemble_helmholtz(k, &self.outer)?;
        let mut rhs = self.volume_load(f);
        for (r, v) in rhs.iter_mut().zip(self.impedance_load(&self.outer, g)) {
            *r += v;
        }
        let lu = factorize(&a)?;
        let mut u = lu.solve(&rhs);
        let nf = norm2(&rhs);
        let residual = |u: &[C64]| -> Vec<C64> { a.mul_vec(u).iter().zip(&rhs).map(|(p, q)| q - p).collect() };
        let mut r = residual(&u);
        // one step of refinement if pivoting left the residual loose
        if norm2(&r) > 1e-10 * nf {
            let du = lu.solve(&r);
            for (ui, d) in u.iter_mut().zip(du) {
                *ui += d;
            }
            r = residual(&u);
        }
        if norm2(&r) > 1e-10 * nf {
            return Err(Error::NoConvergence {
                iterations: 1,
                last: norm2(&r) / nf,
            });
        }
        Ok(u)
    }

    /// Value and gradient of `u` at barycentric point `l` of element `t`.
    pub fn evaluate(&self, u: &[C64], t: usize, l: [f64; 3]) -> (C64, [C64; 2]) {
        let geo = self.element_geometry(t);
        let phi = triangle_basis(l);
        let grad = geo.basis_gradients(l);
        let mut v = C64::new(0.0, 0.0);
        let mut g = [C64::new(0.0, 0.0); 2];
        for i in 0..6 {
            let c = u[self.elem_dofs[t][i]];
            v += c * phi[i];
            g[0] += c * grad[i][0];
            g[1] += c * grad[i][1];
        }
        (v, g)
    }

    /// `‖u_h - u‖_{L²}` against an analytic function.
    pub fn l2_error<F>(&self, u: &[C64], exact: F) -> f64
    where
        F: Fn([f64; 2]) -> C64,
    {
        let mut acc = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let geo = self.element_geometry(t);
            for &(xi, w) in &TRIANGLE_RULE {
                let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
                let (v, _) = self.evaluate(u, t, l);
                acc += w * geo.area * (v - exact(geo.map(xi))).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `‖u‖²_{1,k} = ‖∇u‖² + k²‖u‖²`, returned as the square root.
    pub fn weighted_h1_norm(&self, u: &[C64], k: f64) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let geo = self.element_geometry(t);
            for &(xi, w) in &TRIANGLE_RULE {
                let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
                let (v, g) = self.evaluate(u, t, l);
                acc += w * geo.area * (g[0].norm_sqr() + g[1].norm_sqr() + k * k * v.norm_sqr());
            }
        }
        acc.sqrt()
    }

    /// Relative defect in the impedance isometry
    /// `‖∂u/∂n - iku‖² = ‖∂u/∂n + iku‖²` over `edges`, normalized by
    /// `‖∂u/∂n‖² + k²‖u‖²`. Normal derivatives come from the owning element.
    ///
    /// The identity holds for exact Helmholtz solutions; for discrete ones
    /// the defect only tends to zero under refinement.
    pub fn impedance_isometry_defect(&self, k: f64, u: &[C64], edges: &[TraceEdge]) -> Result<f64> {
        let mut minus = 0.0;
        let mut plus = 0.0;
        let mut denom = 0.0;
        for e in edges {
            let geo = self.element_geometry(e.element);
            let (x, y) = (self.coords[e.dofs[0]], self.coords[e.dofs[1]]);
            for &(t, w) in &EDGE_RULE {
                let p = [x[0] + t * (y[0] - x[0]), x[1] + t * (y[1] - x[1])];
                let (v, g) = self.evaluate(u, e.element, geo.barycentric(p));
                let dn = g[0] * e.normal[0] + g[1] * e.normal[1];
                let ikv = C64::new(0.0, k) * v;
                let wl = w * e.length;
                minus += wl * (dn - ikv).norm_sqr();
                plus += wl * (dn + ikv).norm_sqr();
                denom += wl * (dn.norm_sqr() + k * k * v.norm_sqr());
            }
        }
        if denom == 0.0 {
            return Err(Error::ZeroDenominator("impedance isometry defect"));
        }
        Ok((minus - plus).abs() / denom)
    }
}

/// Dofs of an edge set together with their boundary mass matrix.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    /// Sorted global dofs.
    pub dofs: Vec<usize>,
    pub mass: ComplexSparseMatrix,
}

impl TraceSpace {
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// Real dense copy of the mass matrix.
    pub fn dense_mass(&self) -> nalgebra::DMatrix<f64> {
        self.mass.to_dense().map(|z| z.re)
    }
}

/// Plane wave `e^{ik x·d}` and its impedance data `∂u/∂n - iku`.
#[allow(clippy::type_complexity)]
pub fn plane_wave(k: f64, angle: f64) -> (impl Fn([f64; 2]) -> C64 + Copy, impl Fn([f64; 2], [f64; 2]) -> C64 + Copy) {
    let d = [angle.cos(), angle.sin()];
    let u = move |p: [f64; 2]| C64::from_polar(1.0, k * (d[0] * p[0] + d[1] * p[1]));
    let g = move |p: [f64; 2], n: [f64; 2]| {
        let dn = d[0] * n[0] + d[1] * n[1];
        C64::new(0.0, k * (dn - 1.0)) * u(p)
    };
    (u, g)
}
