//! Adaptive Dormand–Prince 8(5,3) integrator for complex linear systems.
//!
//! The state is a flat slice of 2-vectors. Each 2-vector belongs to a scale
//! group and local errors are measured relative to the largest Euclidean norm in
//! its group. Independent solutions that grow or decay by many orders of
//! magnitude along the path thus get independent relative control, while
//! iterates that start from zero are measured against their group.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn relative(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-30,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates, in units of the tolerance.
    pub error_sum: f64,
}

impl Stats {
    pub fn merge(&mut self, other: Stats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.error_sum += other.error_sum;
    }
}

const MAX_STEPS: usize = 2_000_000;

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

/// Nonzero entries of the lower-triangular Butcher matrix, row by row.
const A: [&[(usize, f64)]; 12] = [
    &[],
    &[(0, 5.260_015_195_876_773E-2)],
    &[(0, 1.972_505_698_453_79E-2), (1, 5.917_517_095_361_37E-2)],
    &[(0, 2.958_758_547_680_685E-2), (2, 8.876_275_643_042_054E-2)],
    &[
        (0, 2.413_651_341_592_667E-1),
        (2, -8.845_494_793_282_861E-1),
        (3, 9.248_340_032_617_92E-1),
    ],
    &[
        (0, 3.703_703_703_703_703_5E-2),
        (3, 1.708_286_087_294_738_6E-1),
        (4, 1.254_676_875_668_224_2E-1),
    ],
    &[
        (0, 3.7109375E-2),
        (3, 1.702_522_110_195_440_5E-1),
        (4, 6.021_653_898_045_596E-2),
        (5, -1.7578125E-2),
    ],
    &[
        (0, 3.709_200_011_850_479E-2),
        (3, 1.703_839_257_122_399_8E-1),
        (4, 1.072_620_304_463_732_8E-1),
        (5, -1.531_943_774_862_440_2E-2),
        (6, 8.273_789_163_814_023E-3),
    ],
    &[
        (0, 6.241_109_587_160_757E-1),
        (3, -3.360_892_629_446_941_4),
        (4, -8.682_193_468_417_26E-1),
        (5, 2.759_209_969_944_671E1),
        (6, 2.015_406_755_047_789_4E1),
        (7, -4.348_988_418_106_996E1),
    ],
    &[
        (0, 4.776_625_364_382_643_4E-1),
        (3, -2.488_114_619_971_667_7),
        (4, -5.902_908_268_368_43E-1),
        (5, 2.123_005_144_818_119_3E1),
        (6, 1.527_923_363_288_242_3E1),
        (7, -3.328_821_096_898_486E1),
        (8, -2.033_120_170_850_862_7E-2),
    ],
    &[
        (0, -9.371_424_300_859_873E-1),
        (3, 5.186_372_428_844_064),
        (4, 1.091_437_348_996_729_5),
        (5, -8.149_787_010_746_927),
        (6, -1.852_006_565_999_696E1),
        (7, 2.273_948_709_935_050_5E1),
        (8, 2.493_605_552_679_652_3),
        (9, -3.046_764_471_898_219_6),
    ],
    &[
        (0, 2.273_310_147_516_538),
        (3, -1.053_449_546_673_725E1),
        (4, -2.000_872_058_224_862_5),
        (5, -1.795_893_186_311_88E1),
        (6, 2.794_888_452_941_996E1),
        (7, -2.858_998_277_135_023_5),
        (8, -8.872_856_933_530_63),
        (9, 1.236_056_717_579_430_3E1),
        (10, 6.433_927_460_157_636E-1),
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

/// Fifth-order error weights.
const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

/// Third-order error weights on stages 1, 9 and 12.
const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction) in place.
///
/// `groups[j]` is the scale group of the 2-vector `y[2j..2j+2]`; an empty slice
/// puts every 2-vector in its own group. `h_max` caps the step length; the first
/// step is `h_max` itself, which is already small for every caller.
pub fn integrate<F>(
    mut f: F,
    x0: f64,
    x1: f64,
    y: &mut [C64],
    groups: &[usize],
    tol: Tolerance,
    h_max: f64,
) -> Result<Stats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    let pairs = n.div_ceil(2);
    let group_of: Vec<usize> = if groups.is_empty() {
        (0..pairs).collect()
    } else {
        assert_eq!(groups.len(), pairs, "one scale group per 2-vector");
        groups.to_vec()
    };
    let n_groups = group_of.iter().max().map_or(0, |g| g + 1);
    let mut scale = vec![0.0f64; n_groups];
    let mut stats = Stats::default();
    if x0 == x1 || n == 0 {
        return Ok(stats);
    }
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let h_max = h_max.min(span);
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 12];
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut ynew = vec![C64::new(0.0, 0.0); n];
    let mut x = x0;
    let mut h = h_max;
    let mut fresh = true;
    let mut last_rejected = false;

    while (x1 - x) * dir > 0.0 {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Integration {
                x,
                reason: "step budget exhausted".into(),
            });
        }
        let remaining = (x1 - x).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        let hs = if last { remaining } else { h } * dir;

        if fresh {
            f(x, y, &mut k[0]);
            fresh = false;
        }
        for s in 1..12 {
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for &(j, a) in A[s] {
                    acc += k[j][i] * a;
                }
                stage[i] = y[i] + acc * hs;
            }
            f(x + C[s] * hs, &stage, &mut k[s]);
        }
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..12 {
                if B[s] != 0.0 {
                    acc += k[s][i] * B[s];
                }
            }
            ynew[i] = y[i] + acc * hs;
        }

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        scale.iter_mut().for_each(|s| *s = 0.0);
        for (j, &g) in group_of.iter().enumerate() {
            let end = (2 * j + 2).min(n);
            // max-abs: squares of states near e^{-600} underflow
            let norm_old = y[2 * j..end].iter().map(|z| z.norm()).fold(0.0, f64::max);
            let norm_new = ynew[2 * j..end].iter().map(|z| z.norm()).fold(0.0, f64::max);
            scale[g] = scale[g].max(norm_old).max(norm_new);
        }
        for (j, &g) in group_of.iter().enumerate() {
            let end = (2 * j + 2).min(n);
            let sk = match tol.atol + tol.rtol * scale[g] {
                s if s > 0.0 => s,
                _ => 1.0,
            };
            for i in 2 * j..end {
                let mut e5 = C64::new(0.0, 0.0);
                for s in 0..12 {
                    if ER[s] != 0.0 {
                        e5 += k[s][i] * ER[s];
                    }
                }
                let mut bsum = C64::new(0.0, 0.0);
                for s in 0..12 {
                    if B[s] != 0.0 {
                        bsum += k[s][i] * B[s];
                    }
                }
                let e3 = bsum - k[0][i] * BHH[0] - k[8][i] * BHH[1] - k[11][i] * BHH[2];
                err5 += (e5 / sk).norm_sqr();
                err3 += (e3 / sk).norm_sqr();
            }
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        // an infinite estimate only rejects the step
        let err = if err5.is_finite() && deno.is_finite() {
            hs.abs() * (err5 / deno.sqrt()) / (n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if err.is_nan() || ynew.iter().any(|z| !z.is_finite()) {
            return Err(Error::Integration {
                x,
                reason: "non-finite state".into(),
            });
        }

        let fac = (0.9 * err.powf(-1.0 / 8.0)).clamp(0.333, 6.0);
        if err <= 1.0 {
            stats.accepted += 1;
            stats.error_sum += err;
            x = if last { x1 } else { x + hs };
            y.copy_from_slice(&ynew);
            fresh = true;
            let grow = if last_rejected { fac.min(1.0) } else { fac };
            h = (hs.abs() * grow).min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h = hs.abs() * fac.min(1.0);
            last_rejected = true;
            if h < 1e-14 * span {
                return Err(Error::Integration {
                    x,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_backward() {
        // y1' = y2, y2' = -y1 with y(π) = (0, -1)  ⇒  y(0) = (0, 1).
        let mut y = vec![C64::new(0.0, 0.0), C64::new(-1.0, 0.0)];
        let stats = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            std::f64::consts::PI,
            0.0,
            &mut y,
            &[],
            Tolerance::relative(1e-12),
            0.1,
        )
        .unwrap();
        assert!(y[0].norm() < 1e-11);
        assert!((y[1] - 1.0).norm() < 1e-11);
        assert!(stats.accepted >= 31);
    }

    #[test]
    fn complex_exponential_growth() {
        let a = C64::new(-3.0, 40.0);
        let mut y = vec![C64::new(1.0, 0.0)];
        integrate(
            |_, y, dy| dy[0] = a * y[0],
            0.0,
            2.0,
            &mut y,
            &[],
            Tolerance::relative(1e-12),
            0.01,
        )
        .unwrap();
        let exact = (a * 2.0).exp();
        assert!((y[0] / exact - 1.0).norm() < 1e-10);
    }
}
