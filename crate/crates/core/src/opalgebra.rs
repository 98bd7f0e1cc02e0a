//! Noncommutative binomial expansions and the resulting contraction bounds.
//!
//! `P(n, j)` is the set of words of length `n` in two letters with exactly
//! `j` changes of letter. Each word is stored by its first letter and the
//! lengths of its runs, so `xxyxx` is `(x, [2, 1, 2])`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::C64;

/// Largest order accepted by [`verify_expansion`].
pub const MAX_EXPANSION_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    X,
    Y,
}

impl Letter {
    fn other(self) -> Self {
        match self {
            Letter::X => Letter::Y,
            Letter::Y => Letter::X,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub first: Letter,
    /// Run lengths, each at least one.
    pub runs: Vec<usize>,
}

impl Monomial {
    pub fn order(&self) -> usize {
        self.runs.iter().sum()
    }

    pub fn transitions(&self) -> usize {
        self.runs.len() - 1
    }

    /// Letters from left to right.
    pub fn word(&self) -> String {
        let mut s = String::with_capacity(self.order());
        let mut c = self.first;
        for &r in &self.runs {
            let ch = if c == Letter::X { 'x' } else { 'y' };
            s.extend(std::iter::repeat_n(ch, r));
            c = c.other();
        }
        s
    }

    /// `p(X, Y)`, multiplying left to right.
    pub fn evaluate(&self, x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::<C64>::identity(x.nrows(), x.ncols());
        let mut c = self.first;
        for &r in &self.runs {
            let m = if c == Letter::X { x } else { y };
            for _ in 0..r {
                out *= m;
            }
            c = c.other();
        }
        out
    }
}

/// Compositions of `n` into `parts` positive integers, lexicographic.
fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 1..=n - (parts - 1) {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All words of `P(n, j)`: `x`-first words, then `y`-first words.
pub fn enumerate_p(n: usize, j: usize) -> Result<Vec<Monomial>> {
    if n == 0 || j >= n {
        return Err(invalid(format!("need n >= 1 and 0 <= j <= n-1, got n={n}, j={j}")));
    }
    let comps = compositions(n, j + 1);
    let mut out = Vec::with_capacity(2 * comps.len());
    for first in [Letter::X, Letter::Y] {
        out.extend(comps.iter().map(|runs| Monomial {
            first,
            runs: runs.clone(),
        }));
    }
    Ok(out)
}

/// `C(n, j)` in floating point.
pub fn binomial(n: usize, j: usize) -> f64 {
    if j > n {
        return 0.0;
    }
    let j = j.min(n - j);
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative defect `‖(X+Y)ⁿ − Σ_j Σ_{p∈P(n,j)} p(X,Y)‖ / ‖(X+Y)ⁿ‖` for
/// random complex `dim × dim` matrices.
pub fn verify_expansion<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Result<f64> {
    if n == 0 || n > MAX_EXPANSION_ORDER {
        return Err(invalid(format!("order must lie in 1..={MAX_EXPANSION_ORDER}, got {n}")));
    }
    let mut draw = || {
        DMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    };
    let (x, y) = (draw(), draw());
    let s = &x + &y;
    let mut lhs = DMatrix::<C64>::identity(dim, dim);
    for _ in 0..n {
        lhs *= &s;
    }
    let mut rhs = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..n {
        for p in enumerate_p(n, j)? {
            rhs += p.evaluate(&x, &y);
        }
    }
    let scale = frobenius(&lhs);
    if scale == 0.0 {
        return Ok(frobenius(&rhs));
    }
    Ok(frobenius(&(lhs - rhs)) / scale)
}

fn check_nonneg(rho: f64, gamma: f64) -> Result<()> {
    if !(rho >= 0.0 && gamma >= 0.0) || !rho.is_finite() || !gamma.is_finite() {
        return Err(invalid(format!("rho and gamma must be finite and nonnegative, got {rho}, {gamma}")));
    }
    Ok(())
}

/// `2√(γ²+ρ²)[(γ+ρ)^{N−1} − γ^{N−1}]`, the bound on `‖Tᴺ‖`.
pub fn bound_tn(rho: f64, gamma: f64, n: usize) -> Result<f64> {
    check_nonneg(rho, gamma)?;
    if n < 2 {
        return Err(invalid(format!("the estimate needs N >= 2, got {n}")));
    }
    let e = (n - 1) as i32;
    Ok(2.0 * gamma.hypot(rho) * ((gamma + rho).powi(e) - gamma.powi(e)))
}

/// First-order-in-`ρ` form: `2√2 γ^{N−1}(N−1) ρ + C(N, γ) ρ²` with
/// `C = √2 (N−1)(N−2) γ (γ+ρ₀)^{N−3}`; requires `ρ ≤ ρ₀ ≤ γ`, `N ≥ 3`.
pub fn bound_tn_linearized(rho: f64, gamma: f64, n: usize, rho0: f64) -> Result<f64> {
    check_nonneg(rho, gamma)?;
    if n < 3 {
        return Err(invalid(format!("the linearized estimate needs N >= 3, got {n}")));
    }
    if !(rho <= rho0 && rho0 <= gamma) {
        return Err(invalid(format!("need rho <= rho0 <= gamma, got {rho}, {rho0}, {gamma}")));
    }
    let nm1 = (n - 1) as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let c = sqrt2 * nm1 * (n - 2) as f64 * gamma * (gamma + rho0).powi(n as i32 - 3);
    Ok(2.0 * sqrt2 * gamma.powi(n as i32 - 1) * nm1 * rho + c * rho * rho)
}

/// `2√(γ²+ρ²) Σ_{j=s}^{sN−1} C(sN−1, j) γ^{sN−1−j} ρ^j`, the bound on `‖T^{sN}‖`.
pub fn bound_tsn(rho: f64, gamma: f64, n: usize, s: usize) -> Result<f64> {
    check_nonneg(rho, gamma)?;
    if n < 2 || s < 1 {
        return Err(invalid(format!("need N >= 2 and s >= 1, got N={n}, s={s}")));
    }
    let m = s * n - 1;
    let sum: f64 = (s..=m)
        .map(|j| binomial(m, j) * gamma.powi((m - j) as i32) * rho.powi(j as i32))
        .sum();
    Ok(2.0 * gamma.hypot(rho) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn small_sets() {
        let p = enumerate_p(2, 1).unwrap();
        let words: Vec<String> = p.iter().map(Monomial::word).collect();
        assert_eq!(words, ["xy", "yx"]);
        assert_eq!(enumerate_p(4, 1).unwrap().len(), 6);
        let zero: Vec<String> = enumerate_p(3, 0).unwrap().iter().map(Monomial::word).collect();
        assert_eq!(zero, ["xxx", "yyy"]);
        assert!(enumerate_p(3, 3).is_err());
        assert!(enumerate_p(0, 0).is_err());
    }

    #[test]
    fn cardinalities() {
        for n in 1..=12 {
            let mut total = 0usize;
            for j in 0..n {
                let p = enumerate_p(n, j).unwrap();
                assert_eq!(p.len() as f64, 2.0 * binomial(n - 1, j));
                let distinct: HashSet<String> = p.iter().map(Monomial::word).collect();
                assert_eq!(distinct.len(), p.len());
                assert!(p.iter().all(|m| m.order() == n && m.transitions() == j));
                total += p.len();
            }
            if n <= 10 {
                assert_eq!(total, 1 << n);
            }
        }
    }

    #[test]
    fn expansion_identity() {
        let mut rng = seeded(5);
        assert_eq!(verify_expansion(&mut rng, 1, 3).unwrap(), 0.0);
        assert!(verify_expansion(&mut rng, 2, 3).unwrap() <= 1e-12);
        assert!(verify_expansion(&mut rng, 6, 3).unwrap() <= 1e-10);
        for n in 1..=8 {
            assert!(verify_expansion(&mut rng, n, 4).unwrap() <= 1e-10);
        }
        assert!(verify_expansion(&mut rng, 13, 3).is_err());
    }

    #[test]
    fn bound_values() {
        assert_eq!(bound_tn(0.0, 0.9, 5).unwrap(), 0.0);
        let (r, g) = (0.2, 0.7);
        let two = bound_tn(r, g, 2).unwrap();
        assert!((two - 2.0 * r * (g * g + r * r).sqrt()).abs() < 1e-15);
        for n in 2..9 {
            let a = bound_tn(r, g, n).unwrap();
            let b = bound_tsn(r, g, n, 1).unwrap();
            assert!((a - b).abs() <= 1e-13 * a);
        }
        assert!(bound_tn(-0.1, 1.0, 3).is_err());
        assert!(bound_tn_linearized(0.2, 0.1, 4, 0.15).is_err());
        assert!(bound_tn_linearized(0.1, 0.5, 2, 0.2).is_err());
    }

    #[test]
    fn linearized_dominates_exact_bound() {
        // Taylor remainder is bounded from above, so the two-term form is no smaller
        for n in 3..8 {
            for &(r, g) in &[(0.01, 0.4), (0.05, 0.9), (0.1, 1.0)] {
                let a = bound_tn(r, g, n).unwrap();
                let b = bound_tn_linearized(r, g, n, r).unwrap();
                assert!(b >= a * (1.0 - 1e-12), "{n} {r} {g}: {b} < {a}");
            }
        }
    }

    proptest! {
        #[test]
        fn higher_powers_shrink_for_small_rho(n in 2usize..7, g in 0.2f64..1.0, f in 0.05f64..0.95) {
            let r = f * g / (n as f64 * std::f64::consts::E);
            let mut prev = bound_tsn(r, g, n, 1).unwrap();
            for s in 2..5 {
                let next = bound_tsn(r, g, n, s).unwrap();
                prop_assert!(next <= prev * (1.0 + 1e-12));
                prev = next;
            }
        }
    }
}
