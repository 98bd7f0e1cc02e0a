//! Overlapping covers of the mesh and nodal partitions of unity.
//!
//! Every cover is a list of element sets. Each subdomain carries its dofs,
//! its boundary edges split into the part interior to `Ω` (the interface)
//! and the part on `∂Ω`, and a weight per local dof.
//!
//! Weights are a clamped linear function of the distance to the interface,
//! `min(1, dist / scale)`, normalized to sum to one at each dof. `scale` is
//! the width of the overlap region: `δ` for strips, `2δ` for covers grown by
//! `δ` on every side.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{FemSpace, TraceEdge};
use crate::mesh::{RectMesh, COORD_TOL};

/// One member of an overlapping cover.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    /// Sorted element indices.
    pub elements: Vec<usize>,
    /// Sorted global dofs; position in this list is the local dof index.
    pub dofs: Vec<usize>,
    /// All of `∂Ω_ℓ`.
    pub boundary: Vec<TraceEdge>,
    /// `∂Ω_ℓ ∖ ∂Ω`.
    pub interface: Vec<TraceEdge>,
    /// Sorted global dofs lying on the interface.
    pub interface_dofs: Vec<usize>,
    /// Partition-of-unity weight per local dof.
    pub weights: Vec<f64>,
}

impl Subdomain {
    pub fn num_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.dofs.binary_search(&global).ok()
    }

    /// Map from global to local dof, `usize::MAX` outside the subdomain.
    pub fn local_map(&self, num_global: usize) -> Vec<usize> {
        let mut m = vec![usize::MAX; num_global];
        for (l, &g) in self.dofs.iter().enumerate() {
            m[g] = l;
        }
        m
    }
}

/// Interface positions of a strip cover of `[0, L_Ω] × [0, Ly]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripGeometry {
    pub l_omega: f64,
    pub delta: f64,
    /// `Γ_ℓ^-` for each strip.
    pub left: Vec<f64>,
    /// `Γ_ℓ^+` for each strip.
    pub right: Vec<f64>,
}

impl StripGeometry {
    /// Blocks `[(ℓ-1)H, ℓH]`, `H = L_Ω/N`, each grown by `rH` on both sides
    /// and clipped to the domain; the overlap is `δ = 2rH`.
    pub fn new(l_omega: f64, n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least one strip"));
        }
        if !(l_omega > 0.0) {
            return Err(invalid(format!("domain length must be positive, got {l_omega}")));
        }
        if !(r >= 0.0) {
            return Err(invalid(format!("overlap fraction must be nonnegative, got {r}")));
        }
        if n > 1 && r >= 0.5 {
            return Err(invalid(format!(
                "overlap fraction {r} makes strips touch non-neighbours (need r < 1/2)"
            )));
        }
        let hs = l_omega / n as f64;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for l in 0..n {
            left.push(if l == 0 { 0.0 } else { l as f64 * hs - r * hs });
            right.push(if l + 1 == n { l_omega } else { (l + 1) as f64 * hs + r * hs });
        }
        Ok(Self {
            l_omega,
            delta: if n > 1 { 2.0 * r * hs } else { 0.0 },
            left,
            right,
        })
    }

    /// Strips of interior length `L` and overlap `δ`: `L_Ω = N(L - δ)`.
    pub fn from_length(n: usize, length: f64, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta < length) {
            return Err(invalid(format!("need 0 <= delta < L, got delta={delta}, L={length}")));
        }
        let hs = length - delta;
        Self::new(n as f64 * hs, n, 0.5 * delta / hs)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Strip lengths `L_ℓ`.
    pub fn lengths(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(a, b)| b - a).collect()
    }

    /// Interior abscissae the mesh has to resolve.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .left
            .iter()
            .chain(&self.right)
            .copied()
            .filter(|&x| x > 0.0 && x < self.l_omega)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Strips(StripGeometry),
    Checkerboard { n: usize, delta: f64 },
    Partition { parts: usize, delta: f64 },
}

/// Overlapping cover with partition of unity.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub subdomains: Vec<Subdomain>,
    pub layout: Layout,
    num_dofs: usize,
}

fn on_outer_boundary(mesh: &RectMesh, e: &TraceEdge) -> bool {
    let v = mesh.vertices();
    let (p, q) = (v[e.vertices[0]], v[e.vertices[1]]);
    let tx = COORD_TOL * mesh.lx();
    let ty = COORD_TOL * mesh.ly();
    let both = |f: &dyn Fn([f64; 2]) -> bool| f(p) && f(q);
    both(&|a| a[0].abs() <= tx)
        || both(&|a| (a[0] - mesh.lx()).abs() <= tx)
        || both(&|a| a[1].abs() <= ty)
        || both(&|a| (a[1] - mesh.ly()).abs() <= ty)
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let c = [a[0] + t * d[0], a[1] + t * d[1]];
    (p[0] - c[0]).hypot(p[1] - c[1])
}

fn build_subdomain(space: &FemSpace, mut elements: Vec<usize>) -> Subdomain {
    elements.sort_unstable();
    elements.dedup();
    let mut dofs: Vec<usize> = elements
        .iter()
        .flat_map(|&t| space.element_dofs()[t])
        .collect();
    dofs.sort_unstable();
    dofs.dedup();
    let boundary = space.boundary_of(&elements);
    let interface: Vec<TraceEdge> = boundary
        .iter()
        .copied()
        .filter(|e| !on_outer_boundary(space.mesh(), e))
        .collect();
    let mut interface_dofs: Vec<usize> = interface.iter().flat_map(|e| e.dofs).collect();
    interface_dofs.sort_unstable();
    interface_dofs.dedup();
    Subdomain {
        weights: vec![0.0; dofs.len()],
        elements,
        dofs,
        boundary,
        interface,
        interface_dofs,
    }
}

fn check_resolved(mesh: &RectMesh, xs: &[f64], ys: &[f64]) -> Result<()> {
    for &x in xs {
        if mesh.column_index(x).is_none() {
            return Err(Error::OffGrid(x));
        }
    }
    for &y in ys {
        if mesh.row_index(y).is_none() {
            return Err(Error::OffGrid(y));
        }
    }
    Ok(())
}

/// Strip cover with `N` strips and overlap fraction `r` (see [`StripGeometry::new`]).
pub fn strip_decomposition(space: &FemSpace, n: usize, r: f64) -> Result<Decomposition> {
    let geo = StripGeometry::new(space.mesh().lx(), n, r)?;
    strips_from_geometry(space, geo)
}

/// Strip cover for an explicit geometry whose interfaces are mesh columns.
pub fn strips_from_geometry(space: &FemSpace, geo: StripGeometry) -> Result<Decomposition> {
    let mesh = space.mesh();
    if (geo.l_omega - mesh.lx()).abs() > COORD_TOL * mesh.lx() {
        return Err(invalid(format!(
            "strip geometry spans {} but the mesh has width {}",
            geo.l_omega,
            mesh.lx()
        )));
    }
    check_resolved(mesh, &geo.abscissae(), &[])?;
    let tol = COORD_TOL * mesh.lx();
    let subdomains: Vec<Subdomain> = (0..geo.len())
        .map(|l| {
            let elems = (0..mesh.num_triangles())
                .filter(|&t| {
                    let x = mesh.barycenter(t)[0];
                    x >= geo.left[l] - tol && x <= geo.right[l] + tol
                })
                .collect();
            build_subdomain(space, elems)
        })
        .collect();
    let scale = geo.delta;
    let mut d = Decomposition {
        subdomains,
        layout: Layout::Strips(geo),
        num_dofs: space.num_dofs(),
    };
    d.build_pou(space, scale)?;
    Ok(d)
}

/// Grid lines needed by a checkerboard with `n × n` squares grown by `delta`.
pub fn checkerboard_lines(side: f64, n: usize, delta: f64) -> Vec<f64> {
    let hs = side / n as f64;
    let mut out = Vec::new();
    for i in 1..n {
        let c = i as f64 * hs;
        out.extend([c - delta, c, c + delta]);
    }
    out.retain(|&x| x > 0.0 && x < side);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `n × n` equal rectangles, each grown by `delta` and clipped to the domain.
pub fn checkerboard_decomposition(space: &FemSpace, n: usize, delta: f64) -> Result<Decomposition> {
    if n == 0 {
        return Err(invalid("checkerboard needs n >= 1"));
    }
    let mesh = space.mesh();
    let (hx, hy) = (mesh.lx() / n as f64, mesh.ly() / n as f64);
    if !(delta >= 0.0) || (n > 1 && 2.0 * delta >= hx.min(hy)) {
        return Err(invalid(format!(
            "extension {delta} must be nonnegative and below half the square side"
        )));
    }
    check_resolved(
        mesh,
        &checkerboard_lines(mesh.lx(), n, delta),
        &checkerboard_lines(mesh.ly(), n, delta),
    )?;
    let mut subdomains = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x0 = i as f64 * hx - delta;
            let x1 = (i + 1) as f64 * hx + delta;
            let y0 = j as f64 * hy - delta;
            let y1 = (j + 1) as f64 * hy + delta;
            let elems = (0..mesh.num_triangles())
                .filter(|&t| {
                    let [x, y] = mesh.barycenter(t);
                    x > x0 && x < x1 && y > y0 && y < y1
                })
                .collect();
            subdomains.push(build_subdomain(space, elems));
        }
    }
    let mut d = Decomposition {
        subdomains,
        layout: Layout::Checkerboard { n, delta },
        num_dofs: space.num_dofs(),
    };
    d.build_pou(space, 2.0 * delta)?;
    Ok(d)
}

/// Grow each part of a nonoverlapping element partition by every element
/// whose barycenter lies within `delta` of the part.
pub fn overlapping_from_parts(space: &FemSpace, parts: &[usize], delta: f64) -> Result<Decomposition> {
    let mesh = space.mesh();
    if parts.len() != mesh.num_triangles() {
        return Err(Error::Partition(format!(
            "{} part ids for {} elements",
            parts.len(),
            mesh.num_triangles()
        )));
    }
    if !(delta >= 0.0) {
        return Err(invalid(format!("extension must be nonnegative, got {delta}")));
    }
    let nparts = parts.iter().copied().max().map_or(0, |m| m + 1);
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); nparts];
    for (t, &p) in parts.iter().enumerate() {
        blocks[p].push(t);
    }
    if let Some(p) = blocks.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("part {p} is empty")));
    }
    // elements sharing a vertex
    let mut vert_elems: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            vert_elems[v].push(t);
        }
    }
    let subdomains: Vec<Subdomain> = blocks
        .par_iter()
        .map(|block| {
            let edges = space.boundary_of(block);
            let v = mesh.vertices();
            let mut inside = vec![false; mesh.num_triangles()];
            for &t in block {
                inside[t] = true;
            }
            let mut frontier = block.clone();
            let mut members = block.clone();
            let mut seen = inside.clone();
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for &t in &frontier {
                    for &vx in &mesh.triangles()[t] {
                        for &s in &vert_elems[vx] {
                            if seen[s] {
                                continue;
                            }
                            seen[s] = true;
                            let b = mesh.barycenter(s);
                            let d = edges
                                .iter()
                                .map(|e| segment_distance(b, v[e.vertices[0]], v[e.vertices[1]]))
                                .fold(f64::INFINITY, f64::min);
                            if d <= delta * (1.0 + 1e-12) {
                                members.push(s);
                                next.push(s);
                            }
                        }
                    }
                }
                frontier = next;
            }
            build_subdomain(space, members)
        })
        .collect();
    let mut d = Decomposition {
        subdomains,
        layout: Layout::Partition {
            parts: nparts,
            delta,
        },
        num_dofs: space.num_dofs(),
    };
    d.build_pou(space, 2.0 * delta)?;
    Ok(d)
}

/// Read a partition file (`parts N elements M`, then one part id per line)
/// and grow it by `delta`.
pub fn partition_from_file(space: &FemSpace, path: &Path, delta: f64) -> Result<Decomposition> {
    let parts = read_partition(path, space.mesh().num_triangles())?;
    overlapping_from_parts(space, &parts, delta)
}

pub fn read_partition(path: &Path, num_elements: usize) -> Result<Vec<usize>> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Partition("empty file".into()))??;
    let tok: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match tok.as_slice() {
        ["parts", n, "elements", m] => (
            n.parse::<usize>().map_err(|e| Error::Partition(format!("bad part count: {e}")))?,
            m.parse::<usize>().map_err(|e| Error::Partition(format!("bad element count: {e}")))?,
        ),
        _ => return Err(Error::Partition(format!("bad header line {header:?}"))),
    };
    if m != num_elements {
        return Err(Error::Partition(format!(
            "file describes {m} elements, mesh has {num_elements}"
        )));
    }
    let mut parts = Vec::with_capacity(m);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let p: usize = s
            .parse()
            .map_err(|e| Error::Partition(format!("line {}: {e}", i + 2)))?;
        if p >= n {
            return Err(Error::Partition(format!("line {}: part {p} not below {n}", i + 2)));
        }
        parts.push(p);
    }
    if parts.len() != m {
        return Err(Error::Partition(format!("expected {m} part ids, found {}", parts.len())));
    }
    let mut used = vec![false; n];
    for &p in &parts {
        used[p] = true;
    }
    if let Some(p) = used.iter().position(|u| !u) {
        return Err(Error::Partition(format!("part {p} is empty")));
    }
    Ok(parts)
}

pub fn write_partition<W: Write>(mut out: W, parts: &[usize]) -> std::io::Result<()> {
    let n = parts.iter().copied().max().map_or(0, |m| m + 1);
    writeln!(out, "parts {n} elements {}", parts.len())?;
    for p in parts {
        writeln!(out, "{p}")?;
    }
    Ok(())
}

/// Recursive coordinate bisection of element barycenters into `n` parts.
pub fn rcb_parts(mesh: &RectMesh, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > mesh.num_triangles() {
        return Err(invalid(format!(
            "cannot split {} elements into {n} parts",
            mesh.num_triangles()
        )));
    }
    let centers: Vec<[f64; 2]> = (0..mesh.num_triangles()).map(|t| mesh.barycenter(t)).collect();
    let mut parts = vec![0usize; centers.len()];
    let mut idx: Vec<usize> = (0..centers.len()).collect();
    bisect(&centers, &mut idx, n, 0, &mut parts);
    Ok(parts)
}

fn bisect(c: &[[f64; 2]], idx: &mut [usize], n: usize, first: usize, parts: &mut [usize]) {
    if n == 1 {
        for &t in idx.iter() {
            parts[t] = first;
        }
        return;
    }
    let extent = |axis: usize| {
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(c[t][axis]), hi.max(c[t][axis])));
        hi - lo
    };
    let axis = if extent(0) >= extent(1) { 0 } else { 1 };
    idx.sort_by(|&a, &b| c[a][axis].total_cmp(&c[b][axis]).then(c[a][1 - axis].total_cmp(&c[b][1 - axis])).then(a.cmp(&b)));
    let nl = n / 2;
    let cut = idx.len() * nl / n;
    let (l, r) = idx.split_at_mut(cut);
    bisect(c, l, nl, first, parts);
    bisect(c, r, n - nl, first + nl, parts);
}

/// [`rcb_parts`] grown by `delta`.
pub fn rcb_partition(space: &FemSpace, n: usize, delta: f64) -> Result<Decomposition> {
    let parts = rcb_parts(space.mesh(), n)?;
    overlapping_from_parts(space, &parts, delta)
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn num_global_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn strips(&self) -> Option<&StripGeometry> {
        match &self.layout {
            Layout::Strips(g) => Some(g),
            _ => None,
        }
    }

    /// Recompute the partition of unity with ramp width `scale`.
    pub fn build_pou(&mut self, space: &FemSpace, scale: f64) -> Result<()> {
        let coords = space.dof_coords();
        let v = space.mesh().vertices();
        let raws: Vec<Vec<f64>> = self
            .subdomains
            .par_iter()
            .map(|s| {
                s.dofs
                    .iter()
                    .map(|&g| {
                        if s.interface.is_empty() {
                            return 1.0;
                        }
                        let d = s
                            .interface
                            .iter()
                            .map(|e| segment_distance(coords[g], v[e.vertices[0]], v[e.vertices[1]]))
                            .fold(f64::INFINITY, f64::min);
                        if scale <= 0.0 {
                            if d > 0.0 { 1.0 } else { 0.0 }
                        } else if d >= scale * (1.0 - 1e-12) {
                            1.0
                        } else {
                            d / scale
                        }
                    })
                    .collect()
            })
            .collect();
        let mut total = vec![0.0f64; self.num_dofs];
        let mut covered = vec![false; self.num_dofs];
        for (s, raw) in self.subdomains.iter().zip(&raws) {
            for (&g, &w) in s.dofs.iter().zip(raw) {
                total[g] += w;
                covered[g] = true;
            }
        }
        if let Some(g) = covered.iter().position(|c| !c) {
            return Err(Error::Uncovered(g));
        }
        if let Some(g) = total.iter().position(|&t| t == 0.0) {
            return Err(Error::Uncovered(g));
        }
        for (s, raw) in self.subdomains.iter_mut().zip(raws) {
            s.weights = s.dofs.iter().zip(raw).map(|(&g, w)| w / total[g]).collect();
        }
        Ok(())
    }

    /// Largest violation of the partition-of-unity invariants: sum to one,
    /// range `[0, 1]`, zero on interfaces.
    pub fn pou_defect(&self) -> f64 {
        let mut sum = vec![0.0f64; self.num_dofs];
        let mut worst = 0.0f64;
        for s in &self.subdomains {
            for (&g, &w) in s.dofs.iter().zip(&s.weights) {
                sum[g] += w;
                worst = worst.max((-w).max(w - 1.0));
            }
            for &g in &s.interface_dofs {
                worst = worst.max(s.weights[s.local_index(g).unwrap()].abs());
            }
        }
        sum.iter().map(|t| (t - 1.0).abs()).fold(worst, f64::max)
    }

    /// For strips: largest `|1 - χ_ℓ|` over dofs on the neighbouring interfaces
    /// `Γ_{ℓ-1}^+` and `Γ_{ℓ+1}^-`.
    pub fn strip_interface_defect(&self, space: &FemSpace) -> Option<f64> {
        let geo = self.strips()?;
        let tol = COORD_TOL * geo.l_omega;
        let mut worst = 0.0f64;
        for (l, s) in self.subdomains.iter().enumerate() {
            let mut lines = Vec::new();
            if l > 0 {
                lines.push(geo.right[l - 1]);
            }
            if l + 1 < self.len() {
                lines.push(geo.left[l + 1]);
            }
            for (&g, &w) in s.dofs.iter().zip(&s.weights) {
                let x = space.dof_coords()[g][0];
                if lines.iter().any(|&c| (x - c).abs() <= tol) {
                    worst = worst.max((1.0 - w).abs());
                }
            }
        }
        Some(worst)
    }
}
