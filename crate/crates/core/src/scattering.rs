//! Scattering matrix `S(λ) = −conj f₁(0, λ+i0) / f₁(0, λ+i0)`, the scattering
//! phase `φ_sc` with `S = e^{−2iφ_sc}`, and the jump function `Ω(λ)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jost::{self, JostOptions};
use crate::plane::{quasimomentum, Sheet, SpectralPoint, C64, I};
use crate::poly;
use crate::potential::{derived_scalars, Potential};
use crate::quad::GaussRule;

/// Below this `|k| γ` the `sin²` and `cos²` weights are integrated pointwise,
/// since `(∫c − ∫c cos 2kt)/2` cancels.
const SMALL_PHASE: f64 = 0.5;

/// `Ω(λ) = ∫₀^γ [p₁ (λ+m)/k sin²kt + p₂ k/(λ+m) cos²kt + q sin 2kt] dt` on the
/// continuous spectrum and `0` in the gap.
pub fn omega(lambda: f64, pot: &Potential) -> Result<f64> {
    let m = pot.m;
    if lambda.abs() == m {
        return Err(Error::BranchPoint(C64::new(lambda, 0.0)));
    }
    if lambda.abs() < m || pot.segments.is_empty() {
        return Ok(0.0);
    }
    let k = quasimomentum(C64::new(lambda, 0.0), Sheet::Physical, m)?.re;
    let (a, b) = ((lambda + m) / k, k / (lambda + m));
    let small = k.abs() * pot.gamma <= SMALL_PHASE;
    let rule = GaussRule::legendre(24);
    let mut total = 0.0;
    for seg in &pot.segments {
        let h = seg.len();
        let (i1, i2, i3) = if small {
            let mut acc = [0.0; 3];
            for (t, w) in rule.on(seg.lo, seg.hi) {
                let [p1, p2, q] = seg.at(t);
                let (s, c) = (k * t).sin_cos();
                acc[0] += w * p1 * s * s;
                acc[1] += w * p2 * c * c;
                acc[2] += w * q * 2.0 * s * c;
            }
            (acc[0], acc[1], acc[2])
        } else {
            // ∫ c(t − lo) e^{2ikt} dt over the segment
            let base = (2.0 * I * k * seg.lo).exp();
            let e = |c: &[f64]| base * poly::exp_moment(c, h, 2.0 * I * k);
            (
                0.5 * (poly::integral(&seg.p1, h) - e(&seg.p1).re),
                0.5 * (poly::integral(&seg.p2, h) + e(&seg.p2).re),
                e(&seg.q).im,
            )
        };
        total += a * i1 + b * i2 + i3;
    }
    Ok(total)
}

/// `S(λ)` for `|λ| > m`; unimodular for real potentials.
pub fn scattering_matrix(lambda: f64, pot: &Potential, opts: &JostOptions) -> Result<C64> {
    if lambda.abs() <= pot.m {
        return Err(Error::Precondition(format!("λ = {lambda} is not in the continuous spectrum")));
    }
    let f1 = jost::jost_value(&SpectralPoint::real(lambda, pot.m)?, pot, opts)?[0];
    if f1 == C64::new(0.0, 0.0) {
        return Err(Error::Numerical(format!(
            "Jost function vanishes on the continuous spectrum at {lambda}"
        )));
    }
    Ok(-f1.conj() / f1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTrace {
    pub lambda: Vec<f64>,
    pub s: Vec<C64>,
    /// Continuous on each ray; fixed mod 2π by `φ_sc → Ω₀` at the outermost point.
    pub phi_sc: Vec<f64>,
    pub omega: Vec<f64>,
}

/// `S`, `φ_sc = arg f₁(0, λ+i0) + π/2` and `Ω` on a grid in `σ_ac(H₀)`.
///
/// The grid is sorted first. Each ray is unwrapped from its outermost point
/// inward, so consecutive points must be close enough that `φ_sc` moves by
/// less than `π` between them.
pub fn scattering_phase(grid: &[f64], pot: &Potential, opts: &JostOptions) -> Result<PhaseTrace> {
    let m = pot.m;
    let mut lambda = grid.to_vec();
    lambda.sort_by(f64::total_cmp);
    if let Some(x) = lambda.iter().find(|x| x.abs() <= m) {
        return Err(Error::Precondition(format!("grid point {x} is not in the continuous spectrum")));
    }
    let omega0 = derived_scalars(pot).omega0;
    let rows = lambda
        .par_iter()
        .map(|&x| {
            let f1 = jost::jost_value(&SpectralPoint::real(x, m)?, pot, opts)?[0];
            if f1 == C64::new(0.0, 0.0) {
                return Err(Error::Numerical(format!("Jost function vanishes at {x}")));
            }
            Ok((f1, omega(x, pot)?))
        })
        .collect::<Result<Vec<(C64, f64)>>>()?;
    let raw: Vec<f64> = rows.iter().map(|(f, _)| f.arg() + std::f64::consts::FRAC_PI_2).collect();
    let mut phi = vec![0.0; raw.len()];
    let split = lambda.partition_point(|&x| x < 0.0);
    // λ < −m runs outward toward −∞ at index 0; λ > m toward +∞ at the end.
    let negative: Vec<usize> = (0..split).collect();
    let positive: Vec<usize> = (split..lambda.len()).rev().collect();
    for ray in [negative, positive] {
        let Some(&first) = ray.first() else { continue };
        let turns = ((omega0 - raw[first]) / std::f64::consts::TAU).round();
        phi[first] = raw[first] + turns * std::f64::consts::TAU;
        for w in ray.windows(2) {
            let d = raw[w[1]] - raw[w[0]];
            let d = d - (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            phi[w[1]] = phi[w[0]] + d;
        }
    }
    Ok(PhaseTrace {
        s: rows.iter().map(|(f, _)| -f.conj() / f).collect(),
        omega: rows.iter().map(|(_, o)| *o).collect(),
        lambda,
        phi_sc: phi,
    })
}

/// Residuals of the large-λ expansions at a real `λ > m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionResidual {
    pub lambda: f64,
    /// `|f₁/(k₀e^{iΩ₀}) − 1 + B/(2iλ)|`.
    pub jost: f64,
    /// `|φ_sc − Ω₀ − Re B/(2λ)|`, with `φ_sc − Ω₀` taken on the principal branch.
    pub phase: f64,
}

pub fn expansion_residual(lambda: f64, pot: &Potential, opts: &JostOptions) -> Result<ExpansionResidual> {
    let point = SpectralPoint::real(lambda, pot.m)?;
    let f1 = jost::jost_value(&point, pot, opts)?[0];
    let omega0 = derived_scalars(pot).omega0;
    let b = jost::asymptotic_b(&point, pot);
    let ratio = f1 / (point.k0() * (I * omega0).exp());
    Ok(ExpansionResidual {
        lambda,
        jost: (ratio - 1.0 + b / (2.0 * I * lambda)).norm(),
        phase: (ratio.arg() - b.re / (2.0 * lambda)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::quad;

    fn omega_by_quadrature(lambda: f64, pot: &Potential) -> f64 {
        let m = pot.m;
        let k = quasimomentum(C64::new(lambda, 0.0), Sheet::Physical, m).unwrap().re;
        let mut total = 0.0;
        for seg in &pot.segments {
            let f = |t: f64| {
                let [p1, p2, q] = seg.at(t);
                let (s, c) = (k * t).sin_cos();
                p1 * (lambda + m) / k * s * s + p2 * k / (lambda + m) * c * c + q * (2.0 * k * t).sin()
            };
            total += quad::adaptive(&f, seg.lo, seg.hi, 1e-13).0;
        }
        total
    }

    #[test]
    fn omega_matches_adaptive_quadrature() {
        let pots = [fixtures::smooth_bump(), fixtures::step_q(), fixtures::gauge_fixture()];
        for pot in &pots {
            for lambda in [-40.0, -3.0, -1.2, -1.0001, 1.0001, 1.00000001, 1.3, 2.0, 7.5, 60.0] {
                let a = omega(lambda, pot).unwrap();
                let b = omega_by_quadrature(lambda, pot);
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{lambda}: {a} vs {b}");
            }
        }
        for pot in fixtures::piecewise_constant_family() {
            let a = omega(2.7, &pot).unwrap();
            assert!((a - omega_by_quadrature(2.7, &pot)).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn omega_vanishes_in_the_gap_and_for_the_free_operator() {
        let pot = fixtures::smooth_bump();
        assert_eq!(omega(0.3, &pot).unwrap(), 0.0);
        assert_eq!(omega(5.0, &fixtures::free()).unwrap(), 0.0);
        assert!(matches!(omega(1.0, &pot), Err(Error::BranchPoint(_))));
    }

    #[test]
    fn omega_tends_to_omega0() {
        let pot = fixtures::smooth_bump();
        let o0 = derived_scalars(&pot).omega0;
        let e1 = (omega(200.0, &pot).unwrap() - o0).abs();
        let e2 = (omega(800.0, &pot).unwrap() - o0).abs();
        assert!(e2 < 0.5 * e1 && e2 < 1e-2, "{e1} {e2}");
    }

    #[test]
    fn free_scattering_is_trivial() {
        let pot = fixtures::free();
        let tr = scattering_phase(&[-30.0, -2.0, 1.5, 3.0, 50.0], &pot, &JostOptions::default()).unwrap();
        for (s, phi) in tr.s.iter().zip(&tr.phi_sc) {
            assert!((s - 1.0).norm() < 1e-14);
            assert!(phi.abs() < 1e-14);
        }
    }

    #[test]
    fn s_is_unimodular_and_phase_consistent() {
        let pot = fixtures::step_q();
        let opts = JostOptions::with_tol(1e-12);
        let grid: Vec<f64> = (0..400).map(|i| 1.05 + 0.25 * i as f64).collect();
        let tr = scattering_phase(&grid, &pot, &opts).unwrap();
        for ((s, phi), x) in tr.s.iter().zip(&tr.phi_sc).zip(&tr.lambda) {
            assert!((s.norm() - 1.0).abs() < 1e-12);
            assert!((s - (-2.0 * I * phi).exp()).norm() < 1e-10);
            assert!((scattering_matrix(*x, &pot, &opts).unwrap() - s).norm() < 1e-13);
        }
        for w in tr.phi_sc.windows(2) {
            assert!((w[1] - w[0]).abs() < 1.0);
        }
    }

    #[test]
    fn phase_expansion_residual_decays_quadratically() {
        let pot = fixtures::smooth_bump();
        let opts = JostOptions::with_tol(1e-13);
        let a = expansion_residual(100.0, &pot, &opts).unwrap();
        let b = expansion_residual(400.0, &pot, &opts).unwrap();
        // 16× at second order; allow for the oscillating O(λ⁻²) coefficient.
        assert!(b.jost < a.jost / 6.0, "{a:?} {b:?}");
        assert!(b.phase < a.phase / 6.0, "{a:?} {b:?}");
    }
}
