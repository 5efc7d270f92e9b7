use std::f64::consts::PI;

use diracres::fredholm::{det2, DetOptions};
use diracres::jost::{jost_value, JostOptions};
use diracres::oracle::{transfer_matrix_closed_form, PiecewiseConstantPotential};
use diracres::plane::{free_fundamental, SpectralPoint, C64};
use diracres::poly;
use diracres::potential::{derived_scalars, gauge_transform, make_potential, Potential, PotentialSpec, SegmentSpec};
use diracres::scattering::scattering_matrix;
use proptest::prelude::*;

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 0..=3)
}

/// Piecewise-quadratic potentials on one to three segments.
fn potential() -> impl Strategy<Value = Potential> {
    (0.5..2.0f64, 0.5..2.0f64, prop::collection::vec((0.2..1.0f64, coeffs(), coeffs(), coeffs()), 1..=3)).prop_map(
        |(m, gamma, parts)| {
            let total: f64 = parts.iter().map(|p| p.0).sum();
            let mut lo = 0.0;
            let mut segments = Vec::new();
            for (w, p1, p2, mut q) in parts {
                let hi = lo + w / total * gamma;
                // never identically zero
                q.insert(0, 0.5);
                segments.push(SegmentSpec { lo, hi, p1, p2, q });
                lo = hi;
            }
            segments.last_mut().unwrap().hi = gamma;
            make_potential(&PotentialSpec {
                m,
                gamma,
                segments,
                free: false,
            })
            .unwrap()
        },
    )
}

/// A point off the real axis with `|λ| ≤ 10`.
fn lambda() -> impl Strategy<Value = C64> {
    (-10.0..10.0f64, 0.05..2.0f64, any::<bool>()).prop_map(|(x, y, up)| C64::new(x, if up { y } else { -y }))
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gauge_transform_removes_v(pot in potential()) {
        let g = gauge_transform(&pot).unwrap();
        for s in &g.segments {
            prop_assert!(s.v().iter().all(|c| c.abs() < 1e-12));
        }
        prop_assert!(derived_scalars(&g).omega0.abs() < 1e-12);
    }

    #[test]
    fn scalars_do_not_see_the_partition(pot in potential(), which in 0usize..3, at in 0.1..0.9f64) {
        let mut spec = pot.spec();
        let i = which % spec.segments.len();
        let s = spec.segments[i].clone();
        let cut = s.lo + at * (s.hi - s.lo);
        let right = SegmentSpec {
            lo: cut,
            hi: s.hi,
            p1: poly::shift(&s.p1, cut - s.lo),
            p2: poly::shift(&s.p2, cut - s.lo),
            q: poly::shift(&s.q, cut - s.lo),
        };
        spec.segments[i].hi = cut;
        spec.segments.insert(i + 1, right);
        let (a, b) = (derived_scalars(&pot), derived_scalars(&make_potential(&spec).unwrap()));
        prop_assert!((a.omega0 - b.omega0).abs() < 1e-12 * (1.0 + a.omega0.abs()));
        prop_assert!(close(b.b0, a.b0, 1e-12));
    }

    #[test]
    fn free_fundamental_is_unimodular(z in lambda(), m in 0.5..2.0f64, x in 0.0..8.0f64) {
        let f = free_fundamental(x, z, m);
        let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        prop_assert!((det - 1.0).norm() < 1e-10 * (1.0 + f[0][0].norm() * f[1][1].norm()));
    }

    #[test]
    fn quasimomentum_squares_to_lambda_squared_minus_m_squared(z in lambda(), m in 0.5..2.0f64) {
        let p = SpectralPoint::at(z, m).unwrap();
        prop_assert!(close(p.k * p.k, z * z - m * m, 1e-13));
        let c = p.conjugate();
        prop_assert!(close(c.k, p.k.conj(), 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn jost_function_reflects_across_the_real_axis(pot in potential(), z in lambda()) {
        // real data: conj e^{ikx} = e^{−i k̄ x}, so (λ, k) ↦ (λ̄, −k̄) keeps the sign of Im k
        let o = JostOptions::with_tol(1e-12);
        let p = SpectralPoint::at(z, pot.m).unwrap();
        let mirror = SpectralPoint {
            lambda: z.conj(),
            k: -p.k.conj(),
            ..p
        };
        let a = jost_value(&p, &pot, &o).unwrap()[0];
        let b = jost_value(&mirror, &pot, &o).unwrap()[0];
        prop_assert!(close(b, a.conj(), 1e-9));
    }

    #[test]
    fn gauge_keeps_the_jost_function_when_the_winding_is_whole(pot in potential(), z in lambda()) {
        // shift v by a constant so that ∫v = 2π
        let mut spec = pot.spec();
        let c = (2.0 * PI - derived_scalars(&pot).omega0) / pot.gamma;
        for s in &mut spec.segments {
            s.p1 = poly::add(&s.p1, &[c]);
            s.p2 = poly::add(&s.p2, &[c]);
        }
        let pot = make_potential(&spec).unwrap();
        let g = gauge_transform(&pot).unwrap();
        let o = JostOptions::with_tol(1e-12);
        let p = SpectralPoint::at(z, pot.m).unwrap();
        let a = jost_value(&p, &pot, &o).unwrap()[0];
        let b = jost_value(&p, &g, &o).unwrap()[0];
        prop_assert!(close(b, a, 1e-8));
    }

    #[test]
    fn tighter_tolerance_moves_f1_by_less_than_the_looser_one(pot in potential(), z in lambda()) {
        let p = SpectralPoint::at(z, pot.m).unwrap();
        let a = jost_value(&p, &pot, &JostOptions::with_tol(1e-8)).unwrap()[0];
        let b = jost_value(&p, &pot, &JostOptions::with_tol(5e-9)).unwrap()[0];
        prop_assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()));
    }

    #[test]
    fn s_matrix_is_unimodular(pot in potential(), x in 1.05..30.0f64, neg in any::<bool>()) {
        let lambda = if neg { -x * pot.m } else { x * pot.m };
        let s = scattering_matrix(lambda, &pot, &JostOptions::with_tol(1e-12)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_commutes_with_conjugation(pot in potential(), z in lambda()) {
        let o = DetOptions::with_nodes(64);
        let a = det2(z, &pot, &o).unwrap().value;
        let b = det2(z.conj(), &pot, &o).unwrap().value;
        prop_assert!(close(b, a.conj(), 1e-10));
    }

    #[test]
    fn oracle_is_unchanged_by_refinement(
        cells in prop::collection::vec((0.1..0.6f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 1..=4),
        z in lambda(),
        parts in 2usize..5,
    ) {
        let mut lo = 0.0;
        let cells: Vec<(f64, f64, [f64; 3])> = cells
            .into_iter()
            .map(|(w, a, b, c)| {
                let cell = (lo, lo + w, [a, b, c]);
                lo += w;
                cell
            })
            .collect();
        let oracle = PiecewiseConstantPotential::new(1.0, cells).unwrap();
        let p = SpectralPoint::at(z, 1.0).unwrap();
        let a = transfer_matrix_closed_form(&oracle, &p).f1();
        let b = transfer_matrix_closed_form(&oracle.refined(parts), &p).f1();
        prop_assert!(close(b, a, 1e-12));
    }
}
