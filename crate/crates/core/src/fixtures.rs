//! Named potentials used by the test suites and the command-line tool.

use crate::error::Result;
use crate::potential::{make_potential, Potential, PotentialSpec, SegmentSpec};

fn one_segment(m: f64, gamma: f64, p1: &[f64], p2: &[f64], q: &[f64]) -> Result<Potential> {
    make_potential(&PotentialSpec {
        m,
        gamma,
        segments: vec![SegmentSpec {
            lo: 0.0,
            hi: gamma,
            p1: p1.to_vec(),
            p2: p2.to_vec(),
            q: q.to_vec(),
        }],
        free: false,
    })
}

/// `V ≡ 0` padded to `[0, 1]`, `m = 1`.
pub fn free() -> Potential {
    Potential::free(1.0, 1.0).expect("valid")
}

/// `q ≡ 1` on `[0, 1]`, `p1 = p2 = 0`, `m = 1`.
pub fn step_q() -> Potential {
    one_segment(1.0, 1.0, &[], &[], &[1.0]).expect("valid")
}

/// Polynomial potential on `[0, 1]` vanishing to second order at `x = 1`:
/// `p1 = 0.7(1−x)² + 0.3(1−x)³`, `p2 = −0.4(1−x)²`, `q = 0.5(1−x)²(1+x)`, `m = 1`.
pub fn smooth_bump() -> Potential {
    one_segment(
        1.0,
        1.0,
        &[1.0, -2.3, 1.6, -0.3],
        &[-0.4, 0.8, -0.4],
        &[0.5, -0.5, -0.5, 0.5],
    )
    .expect("valid")
}

/// Off-diagonal bump `q = 0.8(1 − x)²(1 + 2x)`, `p1 = p2 = 0`, `m = 1`; it has
/// `q'(0) = 0` and vanishes to second order at `γ = 1`.
pub fn smooth_q() -> Potential {
    // (1 − x)²(1 + 2x) = 1 − 3x² + 2x³
    one_segment(1.0, 1.0, &[], &[], &[0.8, 0.0, -2.4, 1.6]).expect("valid")
}

/// Electrostatic well `p1 = p2 = −depth` on `[0, width]`, `m = 1`.
pub fn square_well(depth: f64, width: f64) -> Potential {
    one_segment(1.0, width, &[-depth], &[-depth], &[]).expect("valid")
}

/// Well of depth 4 on `[0, 3]` with three eigenvalues in the gap
/// (about −0.782, 0.080 and 0.905) and an antibound state between each pair.
pub fn deep_well() -> Potential {
    square_well(4.0, 3.0)
}

/// Piecewise-constant potentials of varied shape for closed-form comparisons.
pub fn piecewise_constant_family() -> Vec<Potential> {
    let cells: Vec<(f64, Vec<(f64, f64, [f64; 3])>)> = vec![
        (1.0, vec![(0.0, 1.0, [0.0, 0.0, 1.0])]),
        (1.0, vec![(0.0, 0.5, [1.0, 0.0, 0.0]), (0.5, 1.0, [0.0, -1.0, 0.0])]),
        (
            0.5,
            vec![
                (0.0, 0.4, [0.3, -0.7, 0.2]),
                (0.4, 1.1, [-1.2, -1.2, 0.0]),
                (1.1, 1.5, [0.0, 0.5, -0.8]),
            ],
        ),
        (
            2.0,
            vec![(0.0, 0.3, [2.0, 2.0, 0.0]), (0.3, 0.9, [0.0; 3]), (0.9, 1.2, [0.0, 0.0, 1.5])],
        ),
        (
            1.0,
            vec![
                (0.0, 0.25, [-0.5, 0.5, 1.0]),
                (0.25, 0.5, [0.5, -0.5, -1.0]),
                (0.5, 0.75, [1.0, 1.0, 0.5]),
                (0.75, 2.0, [-0.3, 0.2, 0.1]),
            ],
        ),
    ];
    cells
        .into_iter()
        .map(|(m, c)| Potential::piecewise_constant(m, &c).expect("valid"))
        .collect()
}

/// Smooth potential on `[0, 1]` with `∫ v = 2π`, so the gauge rotation is the
/// identity at `x = 0`: `v = 12πx(1−x)`, `p = 1.25x(1−x)`, `q = 0.6x(1−x)`, `m = 1`.
pub fn gauge_fixture() -> Potential {
    // ∫₀¹ 6x(1−x) = 1
    let tau = 2.0 * std::f64::consts::PI;
    let v = [0.0, 6.0 * tau, -6.0 * tau];
    let p = [0.0, 1.25, -1.25];
    one_segment(
        1.0,
        1.0,
        &[v[0] + p[0], v[1] + p[1], v[2] + p[2]],
        &[v[0] - p[0], v[1] - p[1], v[2] - p[2]],
        &[0.0, 0.6, -0.6],
    )
    .expect("valid")
}
