//! Compactly supported matrix potentials `V = [[p1, q], [q, p2]]` on `[0, γ]`.
//!
//! Each component is piecewise polynomial. Coefficients are monomial in the
//! local variable `u = x - lo` of their segment. Outside every segment the
//! potential vanishes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly;
use crate::quad;

/// Serialized form of a potential, as read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub m: f64,
    pub gamma: f64,
    pub segments: Vec<SegmentSpec>,
    /// Admits an identically vanishing potential; `gamma` is then padding only.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub p1: Vec<f64>,
    #[serde(default)]
    pub p2: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub q: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.p1) && poly::is_zero(&self.p2) && poly::is_zero(&self.q)
    }

    /// `(p1, p2, q)` at global position `x`.
    pub fn at(&self, x: f64) -> [f64; 3] {
        let u = x - self.lo;
        [
            poly::eval(&self.p1, u),
            poly::eval(&self.p2, u),
            poly::eval(&self.q, u),
        ]
    }

    /// `v = (p1 + p2)/2` in local coefficients.
    pub fn v(&self) -> Vec<f64> {
        poly::scale(&poly::add(&self.p1, &self.p2), 0.5)
    }

    /// `p = (p1 - p2)/2` in local coefficients.
    pub fn p(&self) -> Vec<f64> {
        poly::scale(&poly::add(&self.p1, &poly::scale(&self.p2, -1.0)), 0.5)
    }
}

/// A validated potential together with its mass `m > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub m: f64,
    /// Right end of the support; for the free potential, an arbitrary padding length.
    pub gamma: f64,
    /// Non-overlapping, sorted by `lo`, contained in `[0, γ]`.
    pub segments: Vec<Segment>,
    /// Every component is continuous on `(0, ∞)`, so `V'` is integrable.
    pub smooth: bool,
    pub free: bool,
}

/// Scalars determined by the potential alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScalars {
    /// `Ω₀ = ∫ v`.
    pub omega0: f64,
    /// `p(0⁺)`.
    pub p0: f64,
    /// `w(0⁺) = q(0) + i p(0)`.
    pub w0: Complex64,
    /// Energy-independent part of the high-energy coefficient:
    /// `conj w(0) + ∫ (2 m p + |w|²)`.
    pub b0: Complex64,
    /// `∫ max(|p1|, |p2|, |q|)`.
    pub l1_sup: f64,
    /// `∫ ‖V(x)‖²` with the spectral norm.
    pub l2_op_sq: f64,
    pub sup_abs: f64,
}

const REL_EPS: f64 = 1e-12;

pub fn make_potential(spec: &PotentialSpec) -> Result<Potential> {
    let bad = |msg: String| Err(Error::InvalidPotential(msg));
    if !(spec.m.is_finite() && spec.m > 0.0) {
        return bad(format!("mass must be positive, got {}", spec.m));
    }
    if !(spec.gamma.is_finite() && spec.gamma > 0.0) {
        return bad(format!("support length must be positive, got {}", spec.gamma));
    }
    let mut segments: Vec<Segment> = spec
        .segments
        .iter()
        .map(|s| Segment {
            lo: s.lo,
            hi: s.hi,
            p1: trim(&s.p1),
            p2: trim(&s.p2),
            q: trim(&s.q),
        })
        .collect();
    for s in &segments {
        if !(s.lo.is_finite() && s.hi.is_finite()) || s.lo < 0.0 || s.hi <= s.lo {
            return bad(format!("segment [{}, {}] is empty or outside [0, ∞)", s.lo, s.hi));
        }
        if s.hi > spec.gamma * (1.0 + REL_EPS) {
            return bad(format!("segment [{}, {}] extends past γ = {}", s.lo, s.hi, spec.gamma));
        }
        let finite = |c: &[f64]| c.iter().all(|a| a.is_finite());
        if !(finite(&s.p1) && finite(&s.p2) && finite(&s.q)) {
            return bad("non-finite coefficient".into());
        }
    }
    segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for w in segments.windows(2) {
        if w[1].lo < w[0].hi - REL_EPS * spec.gamma {
            return bad(format!(
                "segments [{}, {}] and [{}, {}] overlap",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            ));
        }
    }
    segments.retain(|s| !s.is_zero());
    if segments.is_empty() {
        if spec.free {
            return Ok(Potential {
                m: spec.m,
                gamma: spec.gamma,
                segments,
                smooth: true,
                free: true,
            });
        }
        return bad("potential vanishes identically (its support is empty)".into());
    }
    let last = segments.last().map(|s| s.hi).unwrap_or(0.0);
    if (last - spec.gamma).abs() > REL_EPS * spec.gamma {
        return bad(format!(
            "γ = {} must be the right end of the support, which is {}",
            spec.gamma, last
        ));
    }
    if let Some(s) = segments.last_mut() {
        s.hi = spec.gamma;
    }
    let mut pot = Potential {
        m: spec.m,
        gamma: spec.gamma,
        segments,
        smooth: false,
        free: false,
    };
    pot.smooth = pot.continuity_defect() <= 1e-12 * (1.0 + pot.sup_abs_bound());
    Ok(pot)
}

fn trim(c: &[f64]) -> Vec<f64> {
    let mut v = c.to_vec();
    while v.last() == Some(&0.0) {
        v.pop();
    }
    v
}

impl Potential {
    /// `V ≡ 0` with padding length `gamma`.
    pub fn free(m: f64, gamma: f64) -> Result<Self> {
        make_potential(&PotentialSpec {
            m,
            gamma,
            segments: vec![],
            free: true,
        })
    }

    /// Constant `(p1, p2, q)` on consecutive cells `[x_j, x_{j+1}]`.
    pub fn piecewise_constant(m: f64, cells: &[(f64, f64, [f64; 3])]) -> Result<Self> {
        let gamma = cells
            .iter()
            .filter(|(_, _, c)| c.iter().any(|&a| a != 0.0))
            .map(|c| c.1)
            .fold(0.0, f64::max);
        make_potential(&PotentialSpec {
            m,
            gamma,
            segments: cells
                .iter()
                .filter(|(_, _, c)| c.iter().any(|&a| a != 0.0))
                .map(|&(lo, hi, [p1, p2, q])| SegmentSpec {
                    lo,
                    hi,
                    p1: vec![p1],
                    p2: vec![p2],
                    q: vec![q],
                })
                .collect(),
            free: false,
        })
    }

    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            m: self.m,
            gamma: self.gamma,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentSpec {
                    lo: s.lo,
                    hi: s.hi,
                    p1: s.p1.clone(),
                    p2: s.p2.clone(),
                    q: s.q.clone(),
                })
                .collect(),
            free: self.free,
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(&self.spec()).expect("potential serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// `(p1, p2, q)` at `x`, using the right limit at breakpoints.
    pub fn at(&self, x: f64) -> [f64; 3] {
        let idx = self.segments.partition_point(|s| s.lo <= x);
        if idx > 0 {
            let s = &self.segments[idx - 1];
            if x < s.hi {
                return s.at(x);
            }
        }
        [0.0; 3]
    }

    /// `(p1, p2, q)` at `x`, using the left limit at breakpoints.
    pub fn at_left(&self, x: f64) -> [f64; 3] {
        let idx = self.segments.partition_point(|s| s.lo < x);
        if idx > 0 {
            let s = &self.segments[idx - 1];
            if x <= s.hi {
                return s.at(x);
            }
        }
        [0.0; 3]
    }

    /// Partition of `[0, γ]` into the segments and the zero gaps between them,
    /// as `(lo, hi, Some(index))` or `(lo, hi, None)`.
    pub fn cells(&self) -> Vec<(f64, f64, Option<usize>)> {
        let mut out = Vec::new();
        let mut x = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.lo > x {
                out.push((x, s.lo, None));
            }
            out.push((s.lo, s.hi, Some(i)));
            x = s.hi;
        }
        if x < self.gamma {
            out.push((x, self.gamma, None));
        }
        out
    }

    /// Breakpoints other than 0 where some component jumps, with the jump
    /// `right - left` of `(p1, p2, q)`. The right end of the support is included.
    pub fn jumps(&self) -> Vec<(f64, [f64; 3])> {
        let mut pts: Vec<f64> = Vec::new();
        for s in &self.segments {
            pts.push(s.lo);
            pts.push(s.hi);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.into_iter()
            .filter(|&x| x > 0.0)
            .filter_map(|x| {
                let l = self.at_left(x);
                let r = self.at(x);
                let d = [r[0] - l[0], r[1] - l[1], r[2] - l[2]];
                (d.iter().any(|&a| a != 0.0)).then_some((x, d))
            })
            .collect()
    }

    fn continuity_defect(&self) -> f64 {
        self.jumps()
            .iter()
            .map(|(_, d)| d.iter().fold(0.0f64, |a, &b| a.max(b.abs())))
            .fold(0.0, f64::max)
    }

    fn sup_abs_bound(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                [&s.p1, &s.p2, &s.q]
                    .iter()
                    .map(|c| poly::abs_bound(c, s.len()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `∫_0^x v`, exact.
    pub fn v_integral_to(&self, x: f64) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.lo < x)
            .map(|s| poly::integral(&s.v(), x.min(s.hi) - s.lo))
            .sum()
    }

    /// Returns a copy with every component multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut spec = self.spec();
        for s in &mut spec.segments {
            for coeffs in [&mut s.p1, &mut s.p2, &mut s.q] {
                coeffs.iter_mut().for_each(|a| *a *= c);
            }
        }
        spec.free = spec.free || c == 0.0;
        make_potential(&spec)
    }
}

/// Scalars that depend only on the potential; polynomial integrals are exact.
pub fn derived_scalars(pot: &Potential) -> DerivedScalars {
    let m = pot.m;
    let mut omega0 = 0.0;
    let mut quad_part = 0.0;
    for s in &pot.segments {
        let h = s.len();
        let p = s.p();
        omega0 += poly::integral(&s.v(), h);
        let integrand = poly::add(
            &poly::scale(&p, 2.0 * m),
            &poly::add(&poly::mul(&s.q, &s.q), &poly::mul(&p, &p)),
        );
        quad_part += poly::integral(&integrand, h);
    }
    let [p1, p2, q] = pot.at(0.0);
    let p0 = 0.5 * (p1 - p2);
    let w0 = Complex64::new(q, p0);
    let b0 = w0.conj() + quad_part;

    // Norms of |V| are not polynomial; a dense Gauss rule per segment is ample.
    let rule = quad::GaussRule::legendre(24);
    let mut l1_sup = 0.0;
    let mut l2_op_sq = 0.0;
    let mut sup_abs: f64 = 0.0;
    for s in &pot.segments {
        let pieces = 16;
        for (x, w) in rule.composite(s.lo, s.hi, pieces) {
            let [a, b, c] = s.at(x);
            let sup = a.abs().max(b.abs()).max(c.abs());
            let op = spectral_norm(a, b, c);
            l1_sup += w * sup;
            l2_op_sq += w * op * op;
            sup_abs = sup_abs.max(sup);
        }
    }
    DerivedScalars {
        omega0,
        p0,
        w0,
        b0,
        l1_sup,
        l2_op_sq,
        sup_abs,
    }
}

/// Spectral norm of the real symmetric matrix `[[a, c], [c, b]]`.
pub fn spectral_norm(a: f64, b: f64, c: f64) -> f64 {
    let v = 0.5 * (a + b);
    let p = 0.5 * (a - b);
    v.abs() + p.hypot(c)
}

/// Degree of the Taylor pieces produced by [`gauge_transform`].
const GAUGE_DEGREE: usize = 28;
/// Bound on the phase swing `|2ΔW|` across one piece.
const GAUGE_SWING: f64 = 0.25;

/// Rotates the spinor by `U(x) = [[cos W, sin W], [-sin W, cos W]]`,
/// `W(x) = ∫_x^γ v`, which removes the scalar part `v` of the potential.
///
/// The new potential has `p̃1 = -p̃2 = p̃` and `q̃` with
/// `m + p̃ = (m + p) cos 2W - q sin 2W` and `q̃ = q cos 2W + (m + p) sin 2W`.
/// Both are entire functions of `x`; they are represented by Taylor pieces of
/// degree 28 on subintervals where `2W` moves by at most 0.25, which is exact
/// to rounding. Gaps where `V = 0` but `W ≢ 0 mod π` become nonzero pieces.
pub fn gauge_transform(pot: &Potential) -> Result<Potential> {
    if pot.segments.is_empty() {
        return Ok(pot.clone());
    }
    let m = pot.m;
    let total = pot.v_integral_to(pot.gamma);
    let mut out = Vec::new();
    for (lo, hi, idx) in pot.cells() {
        let seg = match idx {
            Some(i) => pot.segments[i].clone(),
            None => Segment {
                lo,
                hi,
                p1: vec![],
                p2: vec![],
                q: vec![],
            },
        };
        let v = seg.v();
        let vmax = poly::abs_bound(&v, seg.len());
        let pieces = ((2.0 * vmax * seg.len()) / GAUGE_SWING).ceil().max(1.0) as usize;
        let width = seg.len() / pieces as f64;
        for j in 0..pieces {
            let a = seg.lo + j as f64 * width;
            let b = if j + 1 == pieces { seg.hi } else { a + width };
            let shift = a - seg.lo;
            let p = poly::shift(&seg.p(), shift);
            let q = poly::shift(&seg.q, shift);
            let vloc = poly::shift(&v, shift);
            // W(a + u) = W(a) - ∫_0^u v(a + s) ds
            let w_a = total - pot.v_integral_to(a);
            let two_delta = poly::scale(&poly::antiderivative(&vloc), -2.0);
            let (c, s) = cos_sin_series(&two_delta, GAUGE_DEGREE);
            let (c0, s0) = ((2.0 * w_a).cos(), (2.0 * w_a).sin());
            let cos2w = poly::add(&poly::scale(&c, c0), &poly::scale(&s, -s0));
            let sin2w = poly::add(&poly::scale(&c, s0), &poly::scale(&s, c0));
            let mp = poly::add(&[m], &p);
            let ptilde = poly::add(
                &poly::add(&poly::mul(&mp, &cos2w), &poly::scale(&poly::mul(&q, &sin2w), -1.0)),
                &[-m],
            );
            let qtilde = poly::add(&poly::mul(&q, &cos2w), &poly::mul(&mp, &sin2w));
            out.push(SegmentSpec {
                lo: a,
                hi: b,
                p1: ptilde.clone(),
                p2: poly::scale(&ptilde, -1.0),
                q: qtilde,
            });
        }
    }
    // Rounding can leave ~1e-16 residues on pieces that should vanish; keep them,
    // since only the last piece fixes γ and it is never identically zero unless V is.
    make_potential(&PotentialSpec {
        m,
        gamma: pot.gamma,
        segments: out,
        free: pot.free,
    })
}

/// Truncated Taylor series of `cos d(u)` and `sin d(u)` for a polynomial with `d(0) = 0`.
fn cos_sin_series(d: &[f64], deg: usize) -> (Vec<f64>, Vec<f64>) {
    let mut cos = vec![1.0];
    let mut sin = vec![];
    let mut power = vec![1.0];
    let mut fact = 1.0;
    for n in 1..=deg {
        power = poly::mul_trunc(&power, d, deg);
        if poly::is_zero(&power) {
            break;
        }
        fact *= n as f64;
        let term = poly::scale(&power, 1.0 / fact);
        match n % 4 {
            1 => sin = poly::add(&sin, &term),
            2 => cos = poly::add(&cos, &poly::scale(&term, -1.0)),
            3 => sin = poly::add(&sin, &poly::scale(&term, -1.0)),
            _ => cos = poly::add(&cos, &term),
        }
    }
    (cos, sin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(segments: Vec<SegmentSpec>) -> PotentialSpec {
        PotentialSpec {
            m: 1.0,
            gamma: 1.0,
            segments,
            free: false,
        }
    }

    fn seg(lo: f64, hi: f64, p1: &[f64], p2: &[f64], q: &[f64]) -> SegmentSpec {
        SegmentSpec {
            lo,
            hi,
            p1: p1.to_vec(),
            p2: p2.to_vec(),
            q: q.to_vec(),
        }
    }

    #[test]
    fn rejects_empty_support_and_bad_parameters() {
        assert!(make_potential(&spec(vec![seg(0.0, 1.0, &[0.0], &[], &[])])).is_err());
        let mut s = spec(vec![seg(0.0, 1.0, &[], &[], &[1.0])]);
        s.gamma = 0.0;
        assert!(make_potential(&s).is_err());
        let mut s = spec(vec![seg(0.0, 1.0, &[], &[], &[1.0])]);
        s.m = 0.0;
        assert!(make_potential(&s).is_err());
        let s = spec(vec![
            seg(0.0, 0.6, &[], &[], &[1.0]),
            seg(0.5, 1.0, &[], &[], &[1.0]),
        ]);
        assert!(make_potential(&s).is_err());
        // γ beyond the support.
        let mut s = spec(vec![seg(0.0, 0.5, &[], &[], &[1.0])]);
        s.gamma = 1.0;
        assert!(make_potential(&s).is_err());
    }

    #[test]
    fn free_flag_admits_zero_potential() {
        let p = Potential::free(1.0, 1.0).unwrap();
        let d = derived_scalars(&p);
        assert_eq!(d.omega0, 0.0);
        assert_eq!(d.b0, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_coupling_scalars() {
        let p = make_potential(&spec(vec![seg(0.0, 1.0, &[], &[], &[1.0])])).unwrap();
        let d = derived_scalars(&p);
        assert_eq!(d.omega0, 0.0);
        assert!((d.b0 - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(!p.smooth);
    }

    #[test]
    fn smooth_flag_detects_continuity() {
        // q = (1 - x)^2 vanishes at γ; a jump at 0 is allowed.
        let p = make_potential(&spec(vec![seg(0.0, 1.0, &[], &[], &[1.0, -2.0, 1.0])])).unwrap();
        assert!(p.smooth);
    }

    #[test]
    fn polynomial_scalars_are_exact() {
        // p1 = 1 + x, p2 = x^2, q = 2 on [0, 1], m = 1.
        let p = make_potential(&spec(vec![seg(0.0, 1.0, &[1.0, 1.0], &[0.0, 0.0, 1.0], &[2.0])]))
            .unwrap();
        let d = derived_scalars(&p);
        // Ω0 = ½ ∫ (1 + x + x²) = ½ (1 + ½ + ⅓)
        assert!((d.omega0 - 0.5 * (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-15);
        // p = (1 + x - x²)/2; ∫ 2p = 1 + ½ - ⅓; ∫ p² = ¼ ∫ (1 + x - x²)²; ∫ q² = 4
        let int_p2 = 0.25 * (1.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 - 2.0 / 3.0 - 0.5);
        let expect = Complex64::new(2.0, -0.5) + (1.0 + 0.5 - 1.0 / 3.0) + int_p2 + 4.0;
        assert!((d.b0 - expect).norm() < 1e-14);
    }

    #[test]
    fn gauge_of_pure_p_is_identity() {
        let p = make_potential(&spec(vec![seg(0.0, 1.0, &[0.7, -0.7], &[-0.7, 0.7], &[0.3])])).unwrap();
        let g = gauge_transform(&p).unwrap();
        for &x in &[0.0, 0.25, 0.5, 0.99] {
            let a = p.at(x);
            let b = g.at(x);
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gauge_of_constant_scalar_matches_closed_form() {
        // p1 = p2 = c, q = 0: W = c (γ - x), p̃ = m (cos 2W - 1), q̃ = m sin 2W.
        let c = 2.0 * std::f64::consts::PI;
        let p = make_potential(&spec(vec![seg(0.0, 1.0, &[c], &[c], &[])])).unwrap();
        let g = gauge_transform(&p).unwrap();
        for i in 0..=40 {
            let x = i as f64 / 40.0 * 0.999;
            let w = c * (1.0 - x);
            let [a, b, q] = g.at(x);
            assert!((a - ((2.0 * w).cos() - 1.0)).abs() < 1e-13, "x = {x}");
            assert!((a + b).abs() < 1e-15);
            assert!((q - (2.0 * w).sin()).abs() < 1e-13, "x = {x}");
        }
        assert!(derived_scalars(&g).omega0.abs() < 1e-15);
    }
}
