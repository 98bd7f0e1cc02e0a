//! Right-preconditioned GMRES without restarts.

use crate::error::{invalid, Result};
use crate::C64;

/// Result of a GMRES solve. `history[n]` is the relative residual after `n` steps.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve `A x = b` as `A M⁻¹ y = b`, `x = M⁻¹ y`, starting from zero.
///
/// `apply_a` and `apply_prec` evaluate `A v` and `M⁻¹ v`. Stops once the
/// relative residual drops to `tol` or after `max_iter` steps; running out of
/// steps is reported through `converged = false`, not as an error.
pub fn gmres<A, P>(
    apply_a: A,
    apply_prec: P,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<GmresOutcome>
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid(format!("gmres tolerance must lie in (0, 1), got {tol}")));
    }
    if max_iter == 0 {
        return Err(invalid("gmres needs at least one iteration"));
    }
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let beta = norm(b);
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: vec![zero; n],
            history: vec![0.0],
            iterations: 0,
            converged: true,
        });
    }

    let mut basis: Vec<Vec<C64>> = vec![b.iter().map(|v| v / beta).collect()];
    // columns of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<C64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<C64> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut history = vec![1.0];
    let mut converged = false;

    for j in 0..max_iter {
        let mut w = apply_a(&apply_prec(&basis[j]));
        let mut col = vec![zero; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(v, &w);
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= hij * vk;
            }
            col[i] = hij;
        }
        let hnext = norm(&w);
        col[j + 1] = C64::new(hnext, 0.0);

        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i].conj() * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        // rotation zeroing col[j + 1]
        let (a, bb) = (col[j], col[j + 1]);
        let r = (a.norm_sqr() + bb.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (1.0, zero)
        } else if a.norm() == 0.0 {
            (0.0, bb.conj() / bb.norm())
        } else {
            let phase = a / a.norm();
            (a.norm() / r, phase * bb.conj() / r)
        };
        col[j] = c * a + s * bb;
        col[j + 1] = zero;
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g.push(-s.conj() * gj);
        g[j] = c * gj;
        h.push(col);

        let rel = g[j + 1].norm() / beta;
        history.push(rel);
        let breakdown = hnext <= 1e-14 * beta;
        if rel <= tol || breakdown {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }

    let m = h.len();
    let mut y = vec![zero; m];
    for i in (0..m).rev() {
        let mut acc = g[i];
        for k in i + 1..m {
            acc -= h[k][i] * y[k];
        }
        y[i] = acc / h[i][i];
    }
    let mut z = vec![zero; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (zk, vk) in z.iter_mut().zip(v) {
            *zk += yi * vk;
        }
    }
    Ok(GmresOutcome {
        x: apply_prec(&z),
        iterations: m,
        history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexSparseMatrix, TripletBuilder};
    use proptest::prelude::*;

    fn ident(v: &[C64]) -> Vec<C64> {
        v.to_vec()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)];
        let out = gmres(ident, ident, &b, 1e-6, 50).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        for (x, y) in out.x.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn three_eigenvalues_three_steps() {
        let d: Vec<C64> = (0..30)
            .map(|i| [C64::new(1.0, 0.0), C64::new(2.0, 1.0), C64::new(-3.0, 0.5)][i % 3])
            .collect();
        let a = ComplexSparseMatrix::from_diagonal(&d);
        let b: Vec<C64> = (0..30).map(|i| C64::new(1.0 + i as f64, 0.3)).collect();
        let out = gmres(|v| a.mul_vec(v), ident, &b, 1e-12, 50).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 3);
        let r: Vec<C64> = a.mul_vec(&out.x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) / norm(&b) < 1e-11);
    }

    #[test]
    fn preconditioner_is_applied_on_the_right() {
        let d: Vec<C64> = (0..20).map(|i| C64::new(1.0 + i as f64, 0.5)).collect();
        let a = ComplexSparseMatrix::from_diagonal(&d);
        let b = vec![C64::new(1.0, 0.0); 20];
        let out = gmres(|v| a.mul_vec(v), |v| v.iter().zip(&d).map(|(x, di)| x / di).collect(), &b, 1e-8, 5).unwrap();
        assert_eq!(out.iterations, 1);
        for (x, di) in out.x.iter().zip(&d) {
            assert!((x * di - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn reports_exhaustion_and_bad_input() {
        let d: Vec<C64> = (0..40).map(|i| C64::new((i as f64).cos() + 1.5, i as f64 * 0.1)).collect();
        let a = ComplexSparseMatrix::from_diagonal(&d);
        let b = vec![C64::new(1.0, 0.0); 40];
        let out = gmres(|v| a.mul_vec(v), ident, &b, 1e-12, 3).unwrap();
        assert!(!out.converged);
        assert_eq!(out.history.len(), 4);
        assert!(gmres(ident, ident, &b, 0.0, 3).is_err());
        assert!(gmres(ident, ident, &b, 1e-3, 0).is_err());
    }

    proptest! {
        #[test]
        fn residual_history_is_nonincreasing(seed in 0u64..1000, n in 5usize..40) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = TripletBuilder::new(n, n);
            for i in 0..n {
                t.push(i, i, C64::new(rng.random_range(0.5..3.0), rng.random_range(-1.0..1.0)));
                let j = rng.random_range(0..n);
                t.push(i, j, C64::new(rng.random_range(-1.0..1.0), 0.0));
            }
            let a = t.build();
            let b: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
            let out = gmres(|v| a.mul_vec(v), ident, &b, 1e-9, n + 5).unwrap();
            for w in out.history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            prop_assert!(out.converged);
        }
    }
}
