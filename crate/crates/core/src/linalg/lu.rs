//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in nested-dissection order. Each column of `L \ A`
//! is obtained by a sparse triangular solve whose nonzero pattern is found by
//! depth-first search over the graph of `L` (Gilbert-Peierls). Among the
//! candidate rows the diagonal is kept as pivot whenever its magnitude is at
//! least [`PIVOT_THRESHOLD`] times the largest candidate, otherwise the
//! largest candidate is taken.

use super::ordering::{nested_dissection, Graph};
use super::sparse::ComplexSparseMatrix;
use crate::error::{invalid, Error, Result};
use crate::C64;

pub const PIVOT_THRESHOLD: f64 = 0.1;

/// Relative pivot magnitude below which the matrix is reported singular.
pub const SINGULAR_TOL: f64 = 1e-14;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone)]
struct Csc {
    colptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<C64>,
}

/// `P A(q, q) = L U` for a square sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// `q[k]`: original index of the k-th column (and row before pivoting).
    q: Vec<usize>,
    /// `pinv[i]`: pivot position of permuted row `i`.
    pinv: Vec<usize>,
    l: Csc,
    u: Csc,
}

/// Factorize a square matrix.
pub fn factorize(a: &ComplexSparseMatrix) -> Result<SparseLu> {
    SparseLu::new(a)
}

impl SparseLu {
    pub fn new(a: &ComplexSparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(invalid(format!(
                "cannot factorize a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let q = nested_dissection(&Graph::from_pattern(a));
        let mut qinv = vec![0usize; n];
        for (k, &i) in q.iter().enumerate() {
            qinv[i] = k;
        }
        // columns of A are rows of Aᵀ
        let at = a.transpose();
        let scale = a.max_abs();
        let tiny = SINGULAR_TOL * scale;

        let mut l = Csc {
            colptr: Vec::with_capacity(n + 1),
            rows: Vec::with_capacity(4 * a.nnz()),
            vals: Vec::with_capacity(4 * a.nnz()),
        };
        let mut u = Csc {
            colptr: Vec::with_capacity(n + 1),
            rows: Vec::with_capacity(4 * a.nnz()),
            vals: Vec::with_capacity(4 * a.nnz()),
        };
        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut x = vec![ZERO; n];
        let mut xi = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut bcol: Vec<(usize, C64)> = Vec::new();

        for k in 0..n {
            l.colptr.push(l.rows.len());
            u.colptr.push(u.rows.len());

            bcol.clear();
            let (cols, vals) = at.row(q[k]);
            bcol.extend(cols.iter().zip(vals).map(|(&i, &v)| (qinv[i], v)));

            // nonzero pattern of x = L \ b, in topological order xi[top..n]
            let mut top = n;
            for &(start, _) in &bcol {
                if marked[start] {
                    continue;
                }
                // stack grows in xi[..=head], finished nodes fill xi[top..]
                let mut head = 0usize;
                xi[0] = start;
                loop {
                    let j = xi[head];
                    let jnew = pinv[j];
                    if !marked[j] {
                        marked[j] = true;
                        pstack[head] = if jnew == UNSET { 0 } else { l.colptr[jnew] + 1 };
                    }
                    let end = if jnew == UNSET { 0 } else { l.colptr[jnew + 1] };
                    let mut descended = false;
                    let mut p = pstack[head];
                    while p < end {
                        let i = l.rows[p];
                        p += 1;
                        if !marked[i] {
                            pstack[head] = p;
                            head += 1;
                            xi[head] = i;
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }
            for &i in &xi[top..n] {
                marked[i] = false;
            }

            // numeric solve
            for &i in &xi[top..n] {
                x[i] = ZERO;
            }
            for &(i, v) in &bcol {
                x[i] += v;
            }
            for &j in &xi[top..n] {
                let jn = pinv[j];
                if jn == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in l.colptr[jn] + 1..l.colptr[jn + 1] {
                    x[l.rows[p]] -= l.vals[p] * xj;
                }
            }

            // pivot selection
            let mut ipiv = UNSET;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    let m = x[i].norm();
                    if m > best {
                        best = m;
                        ipiv = i;
                    }
                } else {
                    u.rows.push(pinv[i]);
                    u.vals.push(x[i]);
                }
            }
            if ipiv == UNSET || best <= tiny {
                return Err(Error::Singular {
                    column: q[k],
                    magnitude: best.max(0.0),
                });
            }
            // x is zero outside the pattern, so this only fires for a structural diagonal
            if pinv[k] == UNSET && x[k].norm() >= PIVOT_THRESHOLD * best {
                ipiv = k;
            }
            let pivot = x[ipiv];
            u.rows.push(k);
            u.vals.push(pivot);
            pinv[ipiv] = k;
            l.rows.push(ipiv);
            l.vals.push(C64::new(1.0, 0.0));
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    l.rows.push(i);
                    l.vals.push(x[i] / pivot);
                }
                x[i] = ZERO;
            }
        }
        l.colptr.push(l.rows.len());
        u.colptr.push(u.rows.len());
        for r in &mut l.rows {
            *r = pinv[*r];
        }
        Ok(Self { n, q, pinv, l, u })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l.rows.len() + self.u.rows.len()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![ZERO; n];
        for i in 0..n {
            y[self.pinv[i]] = b[self.q[i]];
        }
        for j in 0..n {
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for p in self.l.colptr[j] + 1..self.l.colptr[j + 1] {
                y[self.l.rows[p]] -= self.l.vals[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let last = self.u.colptr[j + 1] - 1;
            y[j] /= self.u.vals[last];
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for p in self.u.colptr[j]..last {
                y[self.u.rows[p]] -= self.u.vals[p] * yj;
            }
        }
        for j in 0..n {
            b[self.q[j]] = y[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &ComplexSparseMatrix, x: &[C64], b: &[C64]) -> f64 {
        let ax = a.mul_vec(x);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum();
        let nb: f64 = b.iter().map(|v| v.norm_sqr()).sum();
        (r / nb).sqrt()
    }

    fn random_sparse(n: usize, per_row: usize, dominant: bool, seed: u64) -> ComplexSparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            let mut rowsum = 0.0;
            for _ in 0..per_row {
                let j = rng.random_range(0..n);
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                rowsum += v.norm();
                b.push(i, j, v);
            }
            let d = if dominant { rowsum + 1.0 } else { 1e-3 };
            b.push(i, i, C64::new(d, 0.5 * d));
        }
        b.build()
    }

    #[test]
    fn identity_and_diagonal() {
        let a = ComplexSparseMatrix::identity(5);
        let lu = factorize(&a).unwrap();
        let b: Vec<C64> = (0..5).map(|i| C64::new(i as f64, 1.0)).collect();
        assert_eq!(lu.solve(&b), b);

        let a = ComplexSparseMatrix::from_diagonal(&[C64::new(2.0, 0.0), C64::new(0.0, 3.0)]);
        let x = factorize(&a).unwrap().solve(&[C64::new(2.0, 0.0), C64::new(0.0, 3.0)]);
        for v in x {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_diagonally_dominant() {
        for seed in 0..5 {
            let a = random_sparse(400, 4, true, seed);
            let lu = factorize(&a).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b: Vec<C64> = (0..400)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            assert!(residual(&a, &lu.solve(&b), &b) <= 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_tiny_diagonal() {
        // small diagonal forces off-diagonal pivots
        for seed in 0..5 {
            let a = random_sparse(150, 6, false, seed);
            match factorize(&a) {
                Ok(lu) => {
                    let b: Vec<C64> = (0..150).map(|i| C64::new(1.0, i as f64 * 0.01)).collect();
                    assert!(residual(&a, &lu.solve(&b), &b) <= 1e-8);
                }
                Err(Error::Singular { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        // permutation matrix: zero diagonal, needs row exchanges
        let mut t = TripletBuilder::new(3, 3);
        t.push(0, 1, C64::new(1.0, 0.0));
        t.push(1, 2, C64::new(2.0, 0.0));
        t.push(2, 0, C64::new(0.0, 1.0));
        let a = t.build();
        let b = [C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)];
        let x = factorize(&a).unwrap().solve(&b);
        assert!(residual(&a, &x, &b) < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let mut t = TripletBuilder::new(3, 3);
        t.push(0, 0, C64::new(1.0, 0.0));
        t.push(1, 0, C64::new(1.0, 0.0));
        t.push(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(factorize(&t.build()), Err(Error::Singular { .. })));
        let rect = TripletBuilder::new(2, 3).build();
        assert!(factorize(&rect).is_err());
    }
}
