//! Reference values that share no integration code with [`crate::jost`]:
//! closed-form transfer matrices for piecewise-constant potentials and
//! brute-force grid scans for zeros.

use crate::error::{Error, Result};
use crate::plane::{Rect, SpectralPoint, C64, I};
use crate::potential::Potential;

type Mat = [[C64; 2]; 2];

/// Constant `(p1, p2, q)` on consecutive cells partitioning `[0, γ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantPotential {
    pub m: f64,
    pub gamma: f64,
    pub cells: Vec<(f64, f64, [f64; 3])>,
}

impl PiecewiseConstantPotential {
    pub fn new(m: f64, cells: Vec<(f64, f64, [f64; 3])>) -> Result<Self> {
        if !(m > 0.0) || cells.is_empty() {
            return Err(Error::InvalidPotential("need m > 0 and at least one cell".into()));
        }
        let mut x = 0.0;
        for &(lo, hi, v) in &cells {
            if lo != x || !(hi > lo) || !v.iter().all(|a| a.is_finite()) {
                return Err(Error::InvalidPotential(format!(
                    "cells must partition [0, γ] in order; bad cell [{lo}, {hi}]"
                )));
            }
            x = hi;
        }
        Ok(Self { m, gamma: x, cells })
    }

    /// The piecewise-constant case of a general potential, gaps included.
    pub fn from_potential(pot: &Potential) -> Option<Self> {
        let mut cells = Vec::new();
        for (lo, hi, idx) in pot.cells() {
            let v = match idx {
                None => [0.0; 3],
                Some(i) => {
                    let s = &pot.segments[i];
                    if [&s.p1, &s.p2, &s.q].iter().any(|c| c.iter().skip(1).any(|&a| a != 0.0)) {
                        return None;
                    }
                    let c = |c: &Vec<f64>| c.first().copied().unwrap_or(0.0);
                    [c(&s.p1), c(&s.p2), c(&s.q)]
                }
            };
            cells.push((lo, hi, v));
        }
        Self::new(pot.m, cells).ok()
    }

    pub fn to_potential(&self) -> Result<Potential> {
        Potential::piecewise_constant(self.m, &self.cells)
    }

    /// Splits every cell into `parts` equal cells.
    pub fn refined(&self, parts: usize) -> Self {
        let parts = parts.max(1);
        let mut cells = Vec::new();
        for &(lo, hi, v) in &self.cells {
            let h = (hi - lo) / parts as f64;
            for j in 0..parts {
                let a = lo + j as f64 * h;
                let b = if j + 1 == parts { hi } else { a + h };
                cells.push((a, b, v));
            }
        }
        Self {
            m: self.m,
            gamma: self.gamma,
            cells,
        }
    }
}

/// `cosh(s)` and `sinh(s)/s` as functions of `s²`, with series near zero.
fn even_pair(s2: C64) -> (C64, C64) {
    if s2.norm() < 1e-6 {
        let one = C64::new(1.0, 0.0);
        (one + s2 / 2.0 + s2 * s2 / 24.0, one + s2 / 6.0 + s2 * s2 / 120.0)
    } else {
        let s = s2.sqrt();
        (s.cosh(), s.sinh() / s)
    }
}

/// `exp(h A)` for the trace-free constant matrix `A = [[−q, λ+m−p2], [m+p1−λ, q]]`:
/// `cosh(μh) I + h sinh(μh)/(μh) A` with `μ² = −det A`.
pub fn cell_exponential(v: [f64; 3], lambda: C64, m: f64, h: f64) -> Mat {
    let [p1, p2, q] = v;
    let a = [
        [C64::new(-q, 0.0), lambda + m - p2],
        [m + p1 - lambda, C64::new(q, 0.0)],
    ];
    let mu2 = a[0][0] * a[0][0] + a[0][1] * a[1][0];
    let (c, s) = even_pair(mu2 * h * h);
    [
        [c + h * s * a[0][0], h * s * a[0][1]],
        [h * s * a[1][0], c + h * s * a[1][1]],
    ]
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn apply(a: &Mat, y: [C64; 2]) -> [C64; 2] {
    [a[0][0] * y[0] + a[0][1] * y[1], a[1][0] * y[0] + a[1][1] * y[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferResult {
    /// Maps the solution at `x = γ` to its value at `x = 0`.
    pub matrix: Mat,
    pub theta: [C64; 2],
    pub phi: [C64; 2],
    /// `f⁺(0, λ)`.
    pub f: [C64; 2],
}

impl TransferResult {
    pub fn f1(&self) -> C64 {
        self.f[0]
    }
}

/// Cell-by-cell product of closed-form exponentials from `γ` down to `0`.
pub fn transfer_matrix_closed_form(pot: &PiecewiseConstantPotential, point: &SpectralPoint) -> TransferResult {
    let (lambda, m, g) = (point.lambda, pot.m, pot.gamma);
    let mut t = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    for &(lo, hi, v) in &pot.cells {
        t = mul(&t, &cell_exponential(v, lambda, m, lo - hi));
    }
    let free = cell_exponential([0.0; 3], lambda, m, g);
    let e = (I * point.k * g).exp();
    let psi = [e * point.k0(), e];
    TransferResult {
        matrix: t,
        theta: apply(&t, [free[0][0], free[1][0]]),
        phi: apply(&t, [free[0][1], free[1][1]]),
        f: apply(&t, psi),
    }
}

/// Grid points of `region` (spacing `step`) where `|f|` is a strict local
/// minimum among its eight neighbours and below `threshold`.
pub fn brute_force_zero_scan<F>(f: F, region: &Rect, step: f64, threshold: f64) -> Vec<C64>
where
    F: Fn(C64) -> f64,
{
    let nx = (region.width() / step).round().max(1.0) as usize + 1;
    let ny = (region.height() / step).round().max(1.0) as usize + 1;
    let hx = region.width() / (nx - 1) as f64;
    let hy = region.height() / (ny - 1) as f64;
    let at = |i: usize, j: usize| C64::new(region.re_min + i as f64 * hx, region.im_min + j as f64 * hy);
    let vals: Vec<Vec<f64>> = (0..nx).map(|i| (0..ny).map(|j| f(at(i, j))).collect()).collect();
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let v = vals[i][j];
            if !(v < threshold) {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    if vals[a as usize][b as usize] <= v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push(at(i, j));
            }
        }
    }
    out
}

/// Midpoints of grid cells of `[a, b]` (spacing `step`) across which the real
/// function `f` changes sign, including exact grid zeros.
pub fn real_sign_changes<F>(f: F, a: f64, b: f64, step: f64) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        if vs[i] == 0.0 {
            out.push(xs[i]);
        } else if vs[i] * vs[i + 1] < 0.0 {
            out.push(0.5 * (xs[i] + xs[i + 1]));
        }
    }
    if vs[n] == 0.0 {
        out.push(xs[n]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Sheet;

    #[test]
    fn free_cell_gives_free_jost() {
        let p = PiecewiseConstantPotential::new(1.0, vec![(0.0, 1.0, [0.0; 3])]).unwrap();
        let pt = SpectralPoint::new(C64::new(2.0, 1.0), Sheet::Physical, 1.0).unwrap();
        let r = transfer_matrix_closed_form(&p, &pt);
        assert!((r.f1() - pt.k0()).norm() < 1e-13);
        assert!((r.theta[0] - 1.0).norm() < 1e-13 && r.phi[0].norm() < 1e-13);
    }

    #[test]
    fn merging_identical_cells_changes_nothing() {
        let one = PiecewiseConstantPotential::new(1.0, vec![(0.0, 1.0, [0.3, -0.2, 1.0])]).unwrap();
        let two = one.refined(2);
        let pt = SpectralPoint::new(C64::new(3.0, -2.0), Sheet::NonPhysical, 1.0).unwrap();
        let a = transfer_matrix_closed_form(&one, &pt).f1();
        let b = transfer_matrix_closed_form(&two, &pt).f1();
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn cell_exponential_has_unit_determinant() {
        let e = cell_exponential([1.0, -2.0, 0.5], C64::new(0.3, 4.0), 1.0, 0.7);
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        assert!((det - 1.0).norm() < 1e-12);
    }

    #[test]
    fn scan_finds_the_free_zero() {
        let region = Rect::new(-3.0, 3.0, -1.0, 1.0).unwrap();
        let hits = brute_force_zero_scan(|z| (z + 1.0).norm(), &region, 0.05, 0.1);
        assert_eq!(hits.len(), 1);
        assert!((hits[0] + 1.0).norm() < 0.05);
        let roots = real_sign_changes(|x| x * x - 0.25, -1.0, 1.0, 0.013);
        assert_eq!(roots.len(), 2);
    }
}
