//! Exact error propagation for overlapping intervals in one dimension.
//!
//! Every Helmholtz-harmonic function on an interval is `a e^{ikx} + b e^{-ikx}`,
//! so the error operator acts on coefficient pairs and each local impedance
//! problem is a 2×2 linear solve. No mesh is involved.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::impmap::Sign;
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Intervals `Ω_ℓ = (Γ_ℓ^-, Γ_ℓ^+)` overlapping only their neighbours.
#[derive(Debug, Clone)]
pub struct Interval1dDecomposition {
    pub k: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Coefficients `(a_ℓ, b_ℓ)` of `e_ℓ(x) = a_ℓ e^{ikx} + b_ℓ e^{-ikx}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicError1d {
    pub coeffs: Vec<[C64; 2]>,
}

impl HarmonicError1d {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![[C64::new(0.0, 0.0); 2]; n],
        }
    }

    /// Coefficients drawn uniformly from the unit disc.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let v = crate::random::unit_disc(rng, 2 * n);
        Self {
            coeffs: v.chunks(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl std::ops::Add for &HarmonicError1d {
    type Output = HarmonicError1d;
    fn add(self, o: &HarmonicError1d) -> HarmonicError1d {
        HarmonicError1d {
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(p, q)| [p[0] + q[0], p[1] + q[1]])
                .collect(),
        }
    }
}

impl std::ops::Sub for &HarmonicError1d {
    type Output = HarmonicError1d;
    fn sub(self, o: &HarmonicError1d) -> HarmonicError1d {
        HarmonicError1d {
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(p, q)| [p[0] - q[0], p[1] - q[1]])
                .collect(),
        }
    }
}

impl Interval1dDecomposition {
    pub fn new(k: f64, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) {
            return Err(invalid(format!("wavenumber must be positive, got {k}")));
        }
        if left.len() != right.len() || left.is_empty() {
            return Err(invalid("need matching, nonempty endpoint lists"));
        }
        let n = left.len();
        for l in 0..n {
            if !(left[l] < right[l]) {
                return Err(invalid(format!("interval {l} is empty")));
            }
            if l + 1 < n && !(left[l] < left[l + 1] && left[l + 1] < right[l] && right[l] < right[l + 1]) {
                return Err(invalid(format!("intervals {l} and {} do not overlap in order", l + 1)));
            }
            if l + 2 < n && !(right[l] < left[l + 2]) {
                return Err(invalid(format!("interval {l} reaches interval {}", l + 2)));
            }
        }
        Ok(Self { k, left, right })
    }

    /// `N` intervals of length `length` with consecutive overlaps `overlap`.
    pub fn uniform(k: f64, n: usize, length: f64, overlap: f64) -> Result<Self> {
        if !(overlap > 0.0 && 2.0 * overlap < length) {
            return Err(invalid(format!("overlap {overlap} must lie in (0, length/2)")));
        }
        let step = length - overlap;
        let left = (0..n).map(|l| l as f64 * step).collect();
        let right = (0..n).map(|l| l as f64 * step + length).collect();
        Self::new(k, left, right)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    fn value(&self, c: [C64; 2], x: f64) -> (C64, C64) {
        let p = C64::from_polar(1.0, self.k * x);
        let m = p.conj();
        let ik = I * self.k;
        (c[0] * p + c[1] * m, ik * (c[0] * p - c[1] * m))
    }

    /// Impedance trace `±v' − ikv` at `x`; `Plus` faces `+x`.
    fn impedance(&self, c: [C64; 2], x: f64, facing: Sign) -> C64 {
        let (v, dv) = self.value(c, x);
        let s = match facing {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        s * dv - I * self.k * v
    }

    /// Harmonic function on `Ω_ℓ` with left-facing data `g_left` at `Γ_ℓ^-`
    /// and right-facing data `g_right` at `Γ_ℓ^+`.
    fn solve_local(&self, l: usize, g_left: C64, g_right: C64) -> [C64; 2] {
        let (xl, xr) = (self.left[l], self.right[l]);
        let unit = |i: usize| {
            let mut c = [C64::new(0.0, 0.0); 2];
            c[i] = C64::new(1.0, 0.0);
            c
        };
        let m = [
            [self.impedance(unit(0), xl, Sign::Minus), self.impedance(unit(1), xl, Sign::Minus)],
            [self.impedance(unit(0), xr, Sign::Plus), self.impedance(unit(1), xr, Sign::Plus)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (g_left * m[1][1] - m[0][1] * g_right) / det,
            (m[0][0] * g_right - m[1][0] * g_left) / det,
        ]
    }

    fn sweep(&self, e: &HarmonicError1d, from_left: bool, from_right: bool) -> HarmonicError1d {
        let n = self.len();
        assert_eq!(e.len(), n, "error vector has the wrong number of blocks");
        let zero = C64::new(0.0, 0.0);
        HarmonicError1d {
            coeffs: (0..n)
                .map(|j| {
                    // χ_{j∓1} = 1 at Γ_j^∓ and the other weights vanish there
                    let gl = if from_left && j > 0 {
                        self.impedance(e.coeffs[j - 1], self.left[j], Sign::Minus)
                    } else {
                        zero
                    };
                    let gr = if from_right && j + 1 < n {
                        self.impedance(e.coeffs[j + 1], self.right[j], Sign::Plus)
                    } else {
                        zero
                    };
                    self.solve_local(j, gl, gr)
                })
                .collect(),
        }
    }

    /// One step of the error recursion, `T = L + U`.
    pub fn apply_t(&self, e: &HarmonicError1d) -> HarmonicError1d {
        self.sweep(e, true, true)
    }

    /// Part of `T` fed by the left neighbours.
    pub fn apply_l(&self, e: &HarmonicError1d) -> HarmonicError1d {
        self.sweep(e, true, false)
    }

    /// Part of `T` fed by the right neighbours.
    pub fn apply_u(&self, e: &HarmonicError1d) -> HarmonicError1d {
        self.sweep(e, false, true)
    }

    /// `(Σ_ℓ Σ_{x∈∂Ω_ℓ} |v'|² + k²|v|²)^{1/2}`.
    pub fn norm(&self, e: &HarmonicError1d) -> f64 {
        let k2 = self.k * self.k;
        let mut s = 0.0;
        for (l, &c) in e.coeffs.iter().enumerate() {
            for x in [self.left[l], self.right[l]] {
                let (v, dv) = self.value(c, x);
                s += dv.norm_sqr() + k2 * v.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Same norm through impedance traces; equal to [`Self::norm`] for harmonic input.
    pub fn impedance_norm(&self, e: &HarmonicError1d) -> f64 {
        let mut s = 0.0;
        for (l, &c) in e.coeffs.iter().enumerate() {
            s += self.impedance(c, self.left[l], Sign::Minus).norm_sqr();
            s += self.impedance(c, self.right[l], Sign::Plus).norm_sqr();
        }
        s.sqrt()
    }

    /// Impedance-to-impedance multiplier on `Ω_ℓ` for unit data on side
    /// `source`. `reflected = false` evaluates the transmitted-facing trace at
    /// the neighbour boundary behind the source; `true` the trace facing back
    /// towards the source at the neighbour boundary ahead.
    pub fn imp_map(&self, l: usize, source: Sign, reflected: bool) -> Result<C64> {
        let n = self.len();
        if l >= n {
            return Err(invalid(format!("subdomain {l} out of range 0..{n}")));
        }
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let (c, x, facing) = match (source, reflected) {
            // Γ_{ℓ-1}^+ facing +x, or Γ_{ℓ+1}^- facing -x
            (Sign::Minus, false) if l > 0 => (self.solve_local(l, one, zero), self.right[l - 1], Sign::Plus),
            (Sign::Minus, true) if l + 1 < n => (self.solve_local(l, one, zero), self.left[l + 1], Sign::Minus),
            (Sign::Plus, false) if l + 1 < n => (self.solve_local(l, zero, one), self.left[l + 1], Sign::Minus),
            (Sign::Plus, true) if l > 0 => (self.solve_local(l, zero, one), self.right[l - 1], Sign::Plus),
            _ => return Err(invalid(format!("subdomain {l} has no neighbour on that side"))),
        };
        Ok(self.impedance(c, x, facing))
    }

    /// `max ‖Tᴺ e‖ / ‖e‖` over random starts.
    pub fn verify_nilpotency<R: Rng>(&self, rng: &mut R, trials: usize) -> f64 {
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let e = HarmonicError1d::random(rng, self.len());
            let mut t = e.clone();
            for _ in 0..self.len() {
                t = self.apply_t(&t);
            }
            worst = worst.max(self.norm(&t) / self.norm(&e));
        }
        worst
    }
}
