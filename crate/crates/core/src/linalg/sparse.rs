use nalgebra::DMatrix;

use crate::C64;

/// Complex matrix in compressed sparse row layout.
///
/// Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

/// Coordinate-format accumulator; duplicate entries are summed on build.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> ComplexSparseMatrix {
        let Self {
            nrows,
            ncols,
            entries,
        } = self;
        // bucket by row, keeping insertion order so summation order is fixed
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in &entries {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![C64::new(0.0, 0.0); entries.len()];
        for &(r, c, v) in &entries {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    indices.push(cols[p]);
                    values.push(vals[p]);
                    last = cols[p];
                }
            }
            indptr.push(indices.len());
        }
        ComplexSparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl ComplexSparseMatrix {
    /// Assemble from raw CSR arrays; rows must already have sorted unique columns.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<C64>,
    ) -> Self {
        assert_eq!(indptr.len(), nrows + 1);
        assert_eq!(indices.len(), values.len());
        debug_assert!((0..nrows).all(|r| indices[indptr[r]..indptr[r + 1]]
            .windows(2)
            .all(|w| w[0] < w[1])));
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    b.push(i, j, m[(i, j)]);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for p in lo..hi {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᴴ x`
    pub fn mul_adjoint_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[p]] += self.values[p].conj() * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let c = self.indices[p];
                indices[next[c]] = i;
                values[next[c]] = self.values[p];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Principal submatrix on the given (ordered) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.ncols];
        for (l, &g) in idx.iter().enumerate() {
            local[g] = l;
        }
        let mut indptr = Vec::with_capacity(idx.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut row: Vec<(usize, C64)> = Vec::new();
        for &g in idx {
            row.clear();
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if local[c] != usize::MAX {
                    row.push((local[c], v));
                }
            }
            row.sort_by_key(|e| e.0);
            for &(c, v) in &row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: idx.len(),
            ncols: idx.len(),
            indptr,
            indices,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let d = match (ca.get(p), cb.get(q)) {
                    (Some(&a), Some(&b)) if a == b => {
                        let d = (va[p] - vb[q]).norm();
                        p += 1;
                        q += 1;
                        d
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        p += 1;
                        va[p - 1].norm()
                    }
                    (Some(_), None) => {
                        p += 1;
                        va[p - 1].norm()
                    }
                    _ => {
                        q += 1;
                        vb[q - 1].norm()
                    }
                };
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(0, 2, c(1.0, 0.0));
        b.push(0, 0, c(2.0, 0.0));
        b.push(0, 2, c(0.5, 1.0));
        b.push(1, 1, c(3.0, 0.0));
        let m = b.build();
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.get(0, 2), c(1.5, 1.0));
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]), vec![c(1.0, 1.5), c(3.0, 0.0)]);
    }

    #[test]
    fn transpose_and_symmetry() {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 1, c(1.0, 2.0));
        b.push(1, 0, c(1.0, 2.0));
        b.push(2, 2, c(0.0, -1.0));
        let m = b.build();
        assert_eq!(m.symmetry_defect(), 0.0);
        assert_eq!(m.transpose(), m);
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 1, c(1.0, 2.0));
        let m = b.build();
        assert!((m.symmetry_defect() - 5f64.sqrt()).abs() < 1e-15);
        let x = [c(1.0, 1.0), c(2.0, -1.0), c(0.0, 3.0)];
        let y = m.mul_adjoint_vec(&x);
        let dense = m.to_dense().adjoint() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - dense[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn principal_submatrix_keeps_order() {
        let mut b = TripletBuilder::new(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                b.push(i, j, c((3 * i + j) as f64, 0.0));
            }
        }
        let m = b.build();
        let s = m.principal_submatrix(&[2, 0]);
        assert_eq!(s.get(0, 0), c(8.0, 0.0));
        assert_eq!(s.get(0, 1), c(6.0, 0.0));
        assert_eq!(s.get(1, 0), c(2.0, 0.0));
    }
}
