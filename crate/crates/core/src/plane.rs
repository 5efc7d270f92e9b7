//! The spectral parameter `λ`, the quasi-momentum `k = √(λ² − m²)` and the
//! free (`V = 0`) solutions and resolvent.
//!
//! `k` is analytic on `Λ = ℂ \ [−m, m]` with `k > 0` for `λ > m`, `k < 0` for
//! `λ < −m` and `Im k > 0` on `ℂ₊`. On the gap `(−m, m)` the two rims carry
//! `k(λ ± i0) = ±i √(m² − λ²)`. Continuation of `k` from `ℂ₊` across the
//! continuous spectrum into `ℂ₋` gives `Im k < 0` there; that is the sheet on
//! which resonances live.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Below this value of `|k x|` the even-in-`k` functions switch to Taylor series.
pub const TAYLOR_SWITCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sheet {
    /// `ℂ₊` together with the upper rim of the gap.
    Physical,
    /// `ℂ₋` together with the lower rim of the gap.
    NonPhysical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: C64,
    pub sheet: Sheet,
    pub k: C64,
    pub m: f64,
}

impl SpectralPoint {
    /// Non-real `λ` must carry the sheet of its half-plane. On the real axis the
    /// sheet selects the rim; for `|λ| > m` both rims give the same `k`.
    pub fn new(lambda: C64, sheet: Sheet, m: f64) -> Result<Self> {
        let k = quasimomentum(lambda, sheet, m)?;
        Ok(Self { lambda, sheet, k, m })
    }

    /// Infers the sheet from `Im λ`; real `λ` is taken on the upper rim.
    pub fn at(lambda: C64, m: f64) -> Result<Self> {
        let sheet = if lambda.im < 0.0 {
            Sheet::NonPhysical
        } else {
            Sheet::Physical
        };
        Self::new(lambda, sheet, m)
    }

    pub fn real(lambda: f64, m: f64) -> Result<Self> {
        Self::at(C64::new(lambda, 0.0), m)
    }

    /// The chart `λ = ±m + z²` around a threshold, on which `k` is analytic in `z`.
    /// Real `z > 0` maps into the continuum at the upper edge and onto the upper
    /// rim of the gap at the lower edge.
    pub fn threshold_chart(edge: Edge, z: C64, m: f64) -> Self {
        let (lambda, k) = match edge {
            Edge::Upper => (m + z * z, z * (2.0 * m + z * z).sqrt()),
            Edge::Lower => (-m + z * z, z * (z * z - 2.0 * m).sqrt()),
        };
        let sheet = if k.im < 0.0 {
            Sheet::NonPhysical
        } else {
            Sheet::Physical
        };
        Self { lambda, sheet, k, m }
    }

    /// `k₀ = (λ + m)/(i k)`.
    pub fn k0(&self) -> C64 {
        (self.lambda + self.m) / (I * self.k)
    }

    /// `m₀ = 1/k₀ = i k/(λ + m)`.
    pub fn m0(&self) -> C64 {
        I * self.k / (self.lambda + self.m)
    }

    /// The same `λ` viewed from the opposite half-plane (`λ̄`) on its own sheet.
    pub fn conjugate(&self) -> Self {
        let sheet = match self.sheet {
            Sheet::Physical => Sheet::NonPhysical,
            Sheet::NonPhysical => Sheet::Physical,
        };
        Self {
            lambda: self.lambda.conj(),
            sheet,
            k: self.k.conj(),
            m: self.m,
        }
    }
}

/// `k(λ)` on the given sheet. Fails at the branch points `λ = ±m`.
pub fn quasimomentum(lambda: C64, sheet: Sheet, m: f64) -> Result<C64> {
    if lambda.im == 0.0 {
        let x = lambda.re;
        if x.abs() == m {
            return Err(Error::BranchPoint(lambda));
        }
        if x.abs() > m {
            return Ok(C64::new(x.signum() * ((x - m) * (x + m)).sqrt(), 0.0));
        }
        let s = ((m - x) * (m + x)).sqrt();
        return Ok(match sheet {
            Sheet::Physical => C64::new(0.0, s),
            Sheet::NonPhysical => C64::new(0.0, -s),
        });
    }
    let expected = if lambda.im > 0.0 {
        Sheet::Physical
    } else {
        Sheet::NonPhysical
    };
    if sheet != expected {
        return Err(Error::SheetMismatch(lambda));
    }
    Ok((lambda - m).sqrt() * (lambda + m).sqrt())
}

/// `cos(k x)` as an entire function of `z = k²`.
pub fn cos_even(k: C64, x: f64) -> C64 {
    let kx = k * x;
    if kx.norm() < TAYLOR_SWITCH {
        let t = kx * kx;
        C64::new(1.0, 0.0) - t / 2.0 + t * t / 24.0 - t * t * t / 720.0
    } else {
        kx.cos()
    }
}

/// `sin(k x)/k` as an entire function of `z = k²`.
pub fn sinc_even(k: C64, x: f64) -> C64 {
    let kx = k * x;
    if kx.norm() < TAYLOR_SWITCH {
        let t = kx * kx;
        (C64::new(1.0, 0.0) - t / 6.0 + t * t / 120.0 - t * t * t / 5040.0) * x
    } else {
        kx.sin() / k
    }
}

/// `d/dz [sin(k x)/k] = (x cos(kx) − sin(kx)/k) / (2 z)`, `z = k²`.
///
/// The closed form cancels for small `|k x|`, so the series is used up to `|k x| < 1`.
pub fn sinc_even_dz(k: C64, x: f64) -> C64 {
    let kx = k * x;
    if kx.norm() < 1.0 {
        // Σ_{n≥1} n (−1)^n z^{n−1} x^{2n+1} / (2n+1)!
        let t = -(kx * kx);
        let mut term = C64::new(-x * x * x / 6.0, 0.0);
        let mut sum = term;
        let mut n = 1.0;
        while term.norm() > 1e-18 * sum.norm() && n < 40.0 {
            term = term * t * ((n + 1.0) / n) / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
            sum += term;
            n += 1.0;
        }
        sum
    } else {
        (x * kx.cos() - kx.sin() / k) / (2.0 * k * k)
    }
}

/// Free fundamental matrix with columns `ϑ₀`, `φ₀`, normalized to the identity at `x = 0`.
///
/// `M₀ = [[cos kx, (λ+m) sin(kx)/k], [(m−λ) sin(kx)/k, cos kx]]`, entire in `λ`.
pub fn free_fundamental(x: f64, lambda: C64, m: f64) -> [[C64; 2]; 2] {
    let k = (lambda * lambda - m * m).sqrt();
    let c = cos_even(k, x);
    let s = sinc_even(k, x);
    [[c, (lambda + m) * s], [(m - lambda) * s, c]]
}

/// `∂_λ M₀(x, λ)`.
pub fn free_fundamental_dlambda(x: f64, lambda: C64, m: f64) -> [[C64; 2]; 2] {
    let k = (lambda * lambda - m * m).sqrt();
    let dz = 2.0 * lambda;
    let s = sinc_even(k, x);
    let dc = -0.5 * x * s * dz;
    let ds = sinc_even_dz(k, x) * dz;
    [[dc, s + (lambda + m) * ds], [-s + (m - lambda) * ds, dc]]
}

/// `ψ^±(x) = e^{±ikx} (±k₀, 1)`.
pub fn free_jost(x: f64, point: &SpectralPoint, sign: i32) -> [C64; 2] {
    let s = if sign >= 0 { 1.0 } else { -1.0 };
    let e = (I * point.k * x * s).exp();
    [e * point.k0() * s, e]
}

/// Kernel of `(H₀ − λ)^{-1}` on the half-line with Dirichlet condition `f₁(0) = 0`.
///
/// On the diagonal the off-diagonal entries jump; their mean is returned.
pub fn free_resolvent_kernel(x: f64, y: f64, point: &SpectralPoint) -> [[C64; 2]; 2] {
    let k = point.k;
    let k0 = point.k0();
    let below = |x: f64, y: f64| {
        let e = (I * k * x).exp();
        let (sy, cy) = ((k * y).sin(), (k * y).cos());
        [[e * I * k0 * sy, e * cy], [e * I * sy, e * cy / k0]]
    };
    let above = |x: f64, y: f64| {
        let e = (I * k * y).exp();
        let (sx, cx) = ((k * x).sin(), (k * x).cos());
        [[e * I * k0 * sx, e * I * sx], [e * cx, e * cx / k0]]
    };
    if y < x {
        below(x, y)
    } else if x < y {
        above(x, y)
    } else {
        let a = below(x, y);
        let b = above(x, y);
        [
            [0.5 * (a[0][0] + b[0][0]), 0.5 * (a[0][1] + b[0][1])],
            [0.5 * (a[1][0] + b[1][0]), 0.5 * (a[1][1] + b[1][1])],
        ]
    }
}

/// Density `ρ'(s) = k(s)/(π (s + m))` of the free spectral measure, `|s| > m`.
pub fn spectral_weight(s: f64, m: f64) -> Result<f64> {
    if s.abs() <= m || !s.is_finite() {
        return Err(Error::OutsideContinuum(s));
    }
    let k = s.signum() * ((s - m) * (s + m)).sqrt();
    Ok(k / (std::f64::consts::PI * (s + m)))
}

/// Closed axis-parallel rectangle in the `λ`-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) || ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Precondition(format!(
                "malformed rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    /// Counter-clockwise corners starting at the lower left.
    pub fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: f64 = 1.0;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn branch_values_on_axis() {
        assert_eq!(quasimomentum(c(2.0, 0.0), Sheet::Physical, M).unwrap(), c(3f64.sqrt(), 0.0));
        assert_eq!(quasimomentum(c(-2.0, 0.0), Sheet::Physical, M).unwrap(), c(-3f64.sqrt(), 0.0));
        let g = quasimomentum(c(0.6, 0.0), Sheet::Physical, M).unwrap();
        assert!((g - c(0.0, 0.8)).norm() < 1e-15);
        let g = quasimomentum(c(0.6, 0.0), Sheet::NonPhysical, M).unwrap();
        assert!((g - c(0.0, -0.8)).norm() < 1e-15);
        assert!(quasimomentum(c(1.0, 0.0), Sheet::Physical, M).is_err());
        assert!(quasimomentum(c(0.0, 1.0), Sheet::NonPhysical, M).is_err());
    }

    #[test]
    fn upper_half_plane_has_positive_imaginary_k() {
        let k = quasimomentum(c(0.0, 1.0), Sheet::Physical, M).unwrap();
        assert!((k - c(0.0, 2f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn rims_are_limits_of_the_half_planes() {
        let up = quasimomentum(c(0.3, 1e-12), Sheet::Physical, M).unwrap();
        let down = quasimomentum(c(0.3, -1e-12), Sheet::NonPhysical, M).unwrap();
        assert!((up - quasimomentum(c(0.3, 0.0), Sheet::Physical, M).unwrap()).norm() < 1e-10);
        assert!((down - quasimomentum(c(0.3, 0.0), Sheet::NonPhysical, M).unwrap()).norm() < 1e-10);
        // Across the continuum k is continuous.
        let a = quasimomentum(c(3.0, 1e-12), Sheet::Physical, M).unwrap();
        let b = quasimomentum(c(3.0, -1e-12), Sheet::NonPhysical, M).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn k0_tends_to_minus_i_at_large_energy() {
        let p = SpectralPoint::at(c(0.0, 1e4), M).unwrap();
        assert!((p.k0() - c(0.0, -1.0)).norm() < 2e-4);
    }

    #[test]
    fn free_fundamental_solves_the_free_system() {
        let lam = c(1.7, 0.4);
        let h = 1e-5;
        for &x in &[0.3, 1.2] {
            let mp = free_fundamental(x + h, lam, M);
            let mm = free_fundamental(x - h, lam, M);
            let m0 = free_fundamental(x, lam, M);
            for col in 0..2 {
                let d1 = (mp[0][col] - mm[0][col]) / (2.0 * h);
                let d2 = (mp[1][col] - mm[1][col]) / (2.0 * h);
                assert!((d1 - (lam + M) * m0[1][col]).norm() < 1e-8);
                assert!((d2 - (M - lam) * m0[0][col]).norm() < 1e-8);
            }
        }
        let id = free_fundamental(0.0, lam, M);
        assert_eq!(id[0][0], c(1.0, 0.0));
        assert_eq!(id[0][1], c(0.0, 0.0));
    }

    #[test]
    fn taylor_switch_is_continuous() {
        let x = 1.0;
        for k in [c(TAYLOR_SWITCH * (1.0 - 1e-9), 0.0), c(0.0, TAYLOR_SWITCH * (1.0 - 1e-9))] {
            let k2 = k * (1.0 + 2e-9);
            assert!((cos_even(k, x) - cos_even(k2, x)).norm() < 1e-12);
            assert!((sinc_even(k, x) - sinc_even(k2, x)).norm() < 1e-12);
        }
        let a = sinc_even_dz(c(1.0 - 1e-12, 0.0), 1.0);
        let b = sinc_even_dz(c(1.0 + 1e-12, 0.0), 1.0);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn dlambda_matches_difference_quotient() {
        for &lam in &[c(0.3, 0.2), c(1.0, 0.0), c(5.0, -1.0)] {
            let h = 1e-6;
            let a = free_fundamental(0.8, lam + h, M);
            let b = free_fundamental(0.8, lam - h, M);
            let d = free_fundamental_dlambda(0.8, lam, M);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(((a[i][j] - b[i][j]) / (2.0 * h) - d[i][j]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn free_jost_solves_the_free_system() {
        let p = SpectralPoint::at(c(-2.5, 0.7), M).unwrap();
        let h = 1e-5;
        let x = 0.4;
        let a = free_jost(x + h, &p, 1);
        let b = free_jost(x - h, &p, 1);
        let f = free_jost(x, &p, 1);
        assert!(((a[0] - b[0]) / (2.0 * h) - (p.lambda + M) * f[1]).norm() < 1e-8);
        assert!(((a[1] - b[1]) / (2.0 * h) - (M - p.lambda) * f[0]).norm() < 1e-8);
    }

    #[test]
    fn resolvent_kernel_is_symmetric() {
        // For the self-adjoint free operator, R₀(x, y)ᵀ = R₀(y, x).
        let p = SpectralPoint::at(c(0.4, 1.3), M).unwrap();
        let a = free_resolvent_kernel(0.2, 0.9, &p);
        let b = free_resolvent_kernel(0.9, 0.2, &p);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[j][i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn spectral_weight_rejects_the_gap() {
        assert!(spectral_weight(0.5, M).is_err());
        assert!(spectral_weight(1.0, M).is_err());
        assert!(spectral_weight(2.0, M).unwrap() > 0.0);
        assert!(spectral_weight(-2.0, M).unwrap() > 0.0);
    }
}
