//! Uniform triangulations of axis-aligned rectangles.
//!
//! The grid is a tensor product of vertex columns and vertex rows. Between
//! consecutive required lines the spacing is uniform, so interface lines that
//! are not commensurate with the target mesh size are still resolved exactly.
//! Every cell is split along its bottom-left to top-right diagonal.

use std::io::Write;

use crate::error::{invalid, Error, Result};

/// Relative tolerance for matching coordinates against grid lines.
pub const COORD_TOL: f64 = 1e-12;

/// Default cap on the number of vertices a builder will produce.
pub const DEFAULT_MAX_VERTICES: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal of the rectangle on this side.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub side: Side,
}

/// A triangulated rectangle `[0, lx] x [0, ly]`.
#[derive(Debug, Clone)]
pub struct RectMesh {
    lx: f64,
    ly: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    h: f64,
}

/// Builder for [`RectMesh`] with required vertical and horizontal grid lines.
#[derive(Debug, Clone)]
pub struct RectMeshBuilder {
    lx: f64,
    ly: f64,
    h: f64,
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
    max_vertices: usize,
}

impl RectMeshBuilder {
    pub fn new(lx: f64, ly: f64, h_target: f64) -> Self {
        Self {
            lx,
            ly,
            h: h_target,
            abscissae: Vec::new(),
            ordinates: Vec::new(),
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }

    /// Vertical lines `x = a` the mesh must contain.
    pub fn abscissae(mut self, xs: &[f64]) -> Self {
        self.abscissae.extend_from_slice(xs);
        self
    }

    /// Horizontal lines `y = b` the mesh must contain.
    pub fn ordinates(mut self, ys: &[f64]) -> Self {
        self.ordinates.extend_from_slice(ys);
        self
    }

    pub fn max_vertices(mut self, cap: usize) -> Self {
        self.max_vertices = cap;
        self
    }

    pub fn build(self) -> Result<RectMesh> {
        let Self {
            lx,
            ly,
            h,
            abscissae,
            ordinates,
            max_vertices,
        } = self;
        if !(lx > 0.0 && ly > 0.0 && h > 0.0) || !(lx.is_finite() && ly.is_finite()) {
            return Err(invalid(format!(
                "mesh dimensions must be positive (lx={lx}, ly={ly}, h={h})"
            )));
        }
        // Rough count first so absurd h values fail before allocating.
        let estimate = ((lx / h).ceil() + 1.0) * ((ly / h).ceil() + 1.0);
        if estimate > max_vertices as f64 {
            return Err(Error::TooLarge {
                vertices: estimate.min(usize::MAX as f64) as usize,
                cap: max_vertices,
            });
        }
        let xs = grid_lines(lx, h, &abscissae, "abscissa")?;
        let ys = grid_lines(ly, h, &ordinates, "ordinate")?;
        let count = xs.len() * ys.len();
        if count > max_vertices {
            return Err(Error::TooLarge {
                vertices: count,
                cap: max_vertices,
            });
        }
        Ok(RectMesh::from_lines(lx, ly, xs, ys))
    }
}

/// Merge `[0, len]` with the required lines and refine each interval uniformly.
fn grid_lines(len: f64, h: f64, required: &[f64], what: &str) -> Result<Vec<f64>> {
    let tol = COORD_TOL * len;
    let mut breaks = vec![0.0, len];
    for &a in required {
        if !a.is_finite() || a < -tol || a > len + tol {
            return Err(invalid(format!("{what} {a} lies outside [0, {len}]")));
        }
        breaks.push(a.clamp(0.0, len));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // dedup keeps the first of a run; make sure the end point is exact
    *breaks.last_mut().unwrap() = len;

    let mut lines = vec![0.0];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        for i in 1..n {
            lines.push(a + step * i as f64);
        }
        lines.push(b);
    }
    Ok(lines)
}

impl RectMesh {
    /// Build a uniform mesh of `[0, lx] x [0, ly]` with cell size at most
    /// `h_target` whose vertex columns include every entry of `abscissae`.
    pub fn uniform(lx: f64, ly: f64, h_target: f64, abscissae: &[f64]) -> Result<Self> {
        RectMeshBuilder::new(lx, ly, h_target)
            .abscissae(abscissae)
            .build()
    }

    fn from_lines(lx: f64, ly: f64, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let mut vertices = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                vertices.push([x, y]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryEdge {
                vertices: [vid(i, 0), vid(i + 1, 0)],
                side: Side::Bottom,
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge {
                vertices: [vid(nx, j), vid(nx, j + 1)],
                side: Side::Right,
            });
        }
        for i in (0..nx).rev() {
            boundary.push(BoundaryEdge {
                vertices: [vid(i + 1, ny), vid(i, ny)],
                side: Side::Top,
            });
        }
        for j in (0..ny).rev() {
            boundary.push(BoundaryEdge {
                vertices: [vid(0, j + 1), vid(0, j)],
                side: Side::Left,
            });
        }
        let dx = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let dy = ys.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Self {
            lx,
            ly,
            xs,
            ys,
            vertices,
            triangles,
            boundary,
            h: dx.max(dy),
        }
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    /// Largest cell side.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Abscissae of the vertex columns, ascending.
    pub fn columns(&self) -> &[f64] {
        &self.xs
    }

    /// Ordinates of the vertex rows, ascending.
    pub fn rows(&self) -> &[f64] {
        &self.ys
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for counterclockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Index of the vertex column at `x`, if there is one.
    pub fn column_index(&self, x: f64) -> Option<usize> {
        find_line(&self.xs, x, COORD_TOL * self.lx)
    }

    /// Index of the vertex row at `y`, if there is one.
    pub fn row_index(&self, y: f64) -> Option<usize> {
        find_line(&self.ys, y, COORD_TOL * self.ly)
    }

    /// Edges lying on the vertical line `x = x0`, bottom to top.
    pub fn vertical_interface_edges(&self, x0: f64) -> Result<Vec<[usize; 2]>> {
        let i = self.column_index(x0).ok_or(Error::OffGrid(x0))?;
        let stride = self.xs.len();
        Ok((0..self.ys.len() - 1)
            .map(|j| [j * stride + i, (j + 1) * stride + i])
            .collect())
    }

    /// Plain-text dump: a header line, then vertices, then triangles.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "vertices {} triangles {}",
            self.vertices.len(),
            self.triangles.len()
        )?;
        for v in &self.vertices {
            writeln!(out, "{} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn find_line(lines: &[f64], x: f64, tol: f64) -> Option<usize> {
    let i = lines.partition_point(|&l| l < x - tol);
    (i < lines.len() && (lines[i] - x).abs() <= tol).then_some(i)
}
