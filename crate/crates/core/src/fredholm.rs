//! The modified Fredholm determinant `D(λ) = det[(I + VR₀(λ)) e^{−VR₀(λ)}]`.
//!
//! `D` is computed by Nyström discretization of the symmetrized operator
//! `|V|^{1/2} R₀(λ) sgn(V)|V|^{1/2}` on composite Gauss–Legendre panels laid
//! out per potential segment. The free kernel jumps across `x = y` by a
//! `λ`-independent matrix, which leaves a clean first-order Nyström error; it is
//! removed by Richardson extrapolation against the grid with half the panels.
//! Boundary values `D(λ ± i0)` are extrapolated in the distance to the axis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jost::{self, JostOptions};
use crate::plane::{free_resolvent_kernel, quasimomentum, Sheet, SpectralPoint, C64, I};
use crate::potential::{derived_scalars, Potential};
use crate::quad::{self, GaussRule};
use crate::scattering;

type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct DetOptions {
    /// Quadrature nodes on the support; the matrix is `2N × 2N`.
    pub nodes: usize,
    /// Gauss–Legendre order of each panel.
    pub panel_order: usize,
    /// Distances to the real axis for boundary values, largest first.
    pub eps: Vec<f64>,
    /// Extrapolate against the half-panel grid.
    pub richardson: bool,
}

impl Default for DetOptions {
    fn default() -> Self {
        Self {
            nodes: 200,
            panel_order: 10,
            eps: vec![1e-2, 1e-3, 1e-4, 1e-5],
            richardson: true,
        }
    }
}

impl DetOptions {
    pub fn with_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            ..Self::default()
        }
    }
}

/// The point carrying the physical resolvent kernel at `λ ∉ σ(H₀)`:
/// `Im k > 0` in both half-planes.
fn resolvent_point(lambda: C64, m: f64) -> Result<SpectralPoint> {
    if lambda.im == 0.0 && lambda.re.abs() >= m {
        return Err(Error::Precondition(format!(
            "λ = {lambda} lies on σ(H₀); use a boundary value"
        )));
    }
    if lambda.im >= 0.0 {
        return SpectralPoint::new(lambda, Sheet::Physical, m);
    }
    let k = -quasimomentum(lambda, Sheet::NonPhysical, m)?;
    Ok(SpectralPoint {
        lambda,
        sheet: Sheet::NonPhysical,
        k,
        m,
    })
}

/// Composite Gauss–Legendre nodes on the segments, `N` split by length. Every
/// segment gets an even number of panels so that `coarse` halves each count.
fn nodes(pot: &Potential, opts: &DetOptions, coarse: bool) -> Vec<(f64, f64)> {
    let total: f64 = pot.segments.iter().map(|s| s.len()).sum();
    let rule = GaussRule::legendre(opts.panel_order);
    let mut out = Vec::new();
    for seg in &pot.segments {
        let share = opts.nodes as f64 * seg.len() / total;
        let pairs = ((share / (2 * opts.panel_order) as f64).round() as usize).max(1);
        let panels = if coarse { pairs } else { 2 * pairs };
        out.extend(rule.composite(seg.lo, seg.hi, panels));
    }
    out
}

fn matrix_at(pot: &Potential, x: f64) -> [[f64; 2]; 2] {
    let [p1, p2, q] = pot.at(x);
    [[p1, q], [q, p2]]
}

/// `(|V|^{1/2}, sgn(V)|V|^{1/2})` for a real symmetric `V`.
fn split_root(v: [[f64; 2]; 2]) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (v[0][0], v[0][1], v[1][1]);
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (mu1, mu2) = (mean + r, mean - r);
    // unit eigenvector for mu1
    let (c, s) = if r == 0.0 {
        (1.0, 0.0)
    } else {
        let theta = 0.5 * (2.0 * b).atan2(a - d);
        (theta.cos(), theta.sin())
    };
    let build = |f1: f64, f2: f64| {
        [
            [f1 * c * c + f2 * s * s, (f1 - f2) * c * s],
            [(f1 - f2) * c * s, f1 * s * s + f2 * c * c],
        ]
    };
    let root = |mu: f64| mu.abs().sqrt();
    let signed = |mu: f64| mu.signum() * mu.abs().sqrt();
    (build(root(mu1), root(mu2)), build(signed(mu1), signed(mu2)))
}

fn rmul(a: &[[f64; 2]; 2], b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mulr(a: &Mat2, b: &[[f64; 2]; 2]) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// How `V` is split between the two sides of `R₀` in the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Factorization {
    /// `|V|^{1/2} R₀ sgn(V)|V|^{1/2}` with weights `√w_i √w_j`.
    Symmetric,
    /// `V(x_i) R₀(x_i, x_j) w_j`.
    OneSided,
}

/// The discretized operator as a `2N × 2N` matrix.
pub fn nystrom_matrix(lambda: C64, pot: &Potential, opts: &DetOptions, fact: Factorization) -> Result<DMatrix<C64>> {
    matrix_on(lambda, pot, &nodes(pot, opts, false), fact)
}

fn matrix_on(lambda: C64, pot: &Potential, nodes: &[(f64, f64)], fact: Factorization) -> Result<DMatrix<C64>> {
    let point = resolvent_point(lambda, pot.m)?;
    let n = nodes.len();
    let sides: Vec<([[f64; 2]; 2], [[f64; 2]; 2])> = nodes
        .iter()
        .map(|&(x, w)| {
            let v = matrix_at(pot, x);
            match fact {
                Factorization::Symmetric => {
                    let (r, s) = split_root(v);
                    let sw = w.sqrt();
                    let scale = |m: [[f64; 2]; 2]| m.map(|row| row.map(|e| e * sw));
                    (scale(r), scale(s))
                }
                Factorization::OneSided => (v, [[w, 0.0], [0.0, w]]),
            }
        })
        .collect();
    let blocks: Vec<Vec<Mat2>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let r0 = free_resolvent_kernel(nodes[i].0, nodes[j].0, &point);
                    mulr(&rmul(&sides[i].0, &r0), &sides[j].1)
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, c| blocks[r / 2][c / 2][r % 2][c % 2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetEvaluation {
    pub lambda: C64,
    pub nodes: usize,
    /// Richardson-extrapolated when requested, else equal to `raw`.
    pub value: C64,
    /// `det₂` of the `2N × 2N` matrix itself.
    pub raw: C64,
    /// `|raw − coarse|`, the size of the first-order correction.
    pub richardson_delta: f64,
    /// `Tr A` of the discretized operator.
    pub trace: C64,
    /// Frobenius norm of the discretized operator.
    pub hs_norm: f64,
    /// `e^{hs_norm²/2} − |raw|`, nonnegative for every matrix.
    pub bound_margin: f64,
    /// Smallest over largest pivot of the LU factorization of `I + A`.
    pub pivot_ratio: f64,
}

fn det2_of(a: &DMatrix<C64>) -> (C64, C64, f64, f64) {
    let n = a.nrows();
    let trace = a.trace();
    let hs = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let lu = (DMatrix::<C64>::identity(n, n) + a).lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
    (lu.determinant() * (-trace).exp(), trace, hs, if hi > 0.0 { lo / hi } else { 0.0 })
}

/// `D(λ)` for `λ ∉ σ(H₀)`.
pub fn det2(lambda: C64, pot: &Potential, opts: &DetOptions) -> Result<DetEvaluation> {
    det2_with(lambda, pot, opts, Factorization::Symmetric)
}

pub fn det2_with(lambda: C64, pot: &Potential, opts: &DetOptions, fact: Factorization) -> Result<DetEvaluation> {
    if pot.segments.is_empty() {
        resolvent_point(lambda, pot.m)?;
        let one = C64::new(1.0, 0.0);
        return Ok(DetEvaluation {
            lambda,
            nodes: 0,
            value: one,
            raw: one,
            richardson_delta: 0.0,
            trace: C64::new(0.0, 0.0),
            hs_norm: 0.0,
            bound_margin: 0.0,
            pivot_ratio: 1.0,
        });
    }
    let a = nystrom_matrix(lambda, pot, opts, fact)?;
    let (raw, trace, hs, pivot_ratio) = det2_of(&a);
    let (value, delta) = if opts.richardson {
        let coarse = det2_of(&matrix_on(lambda, pot, &nodes(pot, opts, true), fact)?).0;
        (2.0 * raw - coarse, (raw - coarse).norm())
    } else {
        (raw, 0.0)
    };
    Ok(DetEvaluation {
        lambda,
        nodes: a.nrows() / 2,
        value,
        raw,
        richardson_delta: delta,
        trace,
        hs_norm: hs,
        bound_margin: (0.5 * hs * hs).exp() - raw.norm(),
        pivot_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryValue {
    pub lambda: f64,
    /// `+1` for `λ + i0`, `−1` for `λ − i0`.
    pub side: i8,
    pub value: C64,
    /// Difference between extrapolations through all and through all but the
    /// farthest point.
    pub spread: f64,
}

/// Neville extrapolation of `(ε_i, y_i)` to `ε = 0`.
fn extrapolate(eps: &[f64], ys: &[C64]) -> C64 {
    let mut p = ys.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (a, b) = (eps[i], eps[i + level]);
            p[i] = (p[i + 1] * a - p[i] * b) / (a - b);
        }
    }
    p[0]
}

/// `D(λ + i0 side)` for real `λ` by extrapolation in `ε`.
pub fn det2_boundary(lambda: f64, side: i8, pot: &Potential, opts: &DetOptions) -> Result<BoundaryValue> {
    if opts.eps.len() < 2 {
        return Err(Error::Precondition("need at least two distances for extrapolation".into()));
    }
    let s = if side >= 0 { 1.0 } else { -1.0 };
    let ys = opts
        .eps
        .iter()
        .map(|&e| Ok(det2(C64::new(lambda, s * e), pot, opts)?.value))
        .collect::<Result<Vec<C64>>>()?;
    let all = extrapolate(&opts.eps, &ys);
    let fewer = extrapolate(&opts.eps[1..], &ys[1..]);
    Ok(BoundaryValue {
        lambda,
        side: s as i8,
        value: all,
        spread: (all - fewer).norm(),
    })
}

/// Leading term `4π/|Im λ| · |Re(λ/√(λ² − m²))|` of the Hilbert–Schmidt bound.
pub fn hs_leading_constant(lambda: C64, m: f64) -> Result<f64> {
    if lambda.im == 0.0 {
        return Err(Error::Precondition("needs Im λ ≠ 0".into()));
    }
    let k = resolvent_point(lambda, m)?.k;
    Ok(4.0 * std::f64::consts::PI / lambda.im.abs() * (lambda / k).re.abs())
}

/// `Tr VR₀(λ) = ∫ tr V(x)R₀(x, x, λ) dx` with the averaged diagonal of the kernel.
pub fn diagonal_trace(lambda: C64, pot: &Potential) -> Result<C64> {
    let point = resolvent_point(lambda, pot.m)?;
    let rule = GaussRule::legendre(16);
    let mut total = C64::new(0.0, 0.0);
    for seg in &pot.segments {
        let panels = ((point.k.norm() * seg.len()).ceil() as usize).max(4);
        for (x, w) in rule.composite(seg.lo, seg.hi, panels) {
            let r = free_resolvent_kernel(x, x, &point);
            let [p1, p2, q] = seg.at(x);
            total += w * (p1 * r[0][0] + q * (r[0][1] + r[1][0]) + p2 * r[1][1]);
        }
    }
    Ok(total)
}

/// `D(λ) = f₁⁺(0, λ)/k₀(λ) · e^{−Tr VR₀(λ)}`, the determinant through the Jost
/// function instead of a discretization of the operator.
pub fn det2_jost_route(lambda: C64, pot: &Potential, opts: &JostOptions) -> Result<C64> {
    if lambda.im < 0.0 {
        return Ok(det2_jost_route(lambda.conj(), pot, opts)?.conj());
    }
    resolvent_point(lambda, pot.m)?;
    let point = SpectralPoint::new(lambda, Sheet::Physical, pot.m)?;
    let f1 = jost::jost_value(&point, pot, opts)?[0];
    Ok(f1 / point.k0() * (-diagonal_trace(lambda, pot)?).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSeries {
    pub lambda: C64,
    /// `Tr(−A)ⁿ/n` for `n = 2, …, n_max`.
    pub terms: Vec<C64>,
    /// `−Σ terms`, the truncated `log D`.
    pub log_d: C64,
    /// `exp(log_d)`.
    pub value: C64,
    /// `C_λ^{1/2} ‖V‖₂` from the leading Hilbert–Schmidt constant.
    pub eps_operator: f64,
    /// Frobenius norm of the matrix itself; bounds the matrix series exactly.
    pub eps_matrix: f64,
    /// `ε^{n+1}/((n+1)(1−ε))` with `ε = eps_operator`, when it is below 1.
    pub remainder: Option<f64>,
    /// The same with `ε = eps_matrix`.
    pub remainder_matrix: Option<f64>,
}

fn tail_bound(eps: f64, n: usize) -> Option<f64> {
    (eps < 1.0).then(|| eps.powi(n as i32 + 1) / ((n as f64 + 1.0) * (1.0 - eps)))
}

/// `log D = −Σ_{n=2}^{n_max} Tr(−A)ⁿ/n` on the matrix behind [`DetEvaluation::raw`].
pub fn det2_trace_series(lambda: C64, pot: &Potential, opts: &DetOptions, n_max: usize) -> Result<TraceSeries> {
    let eps_operator = (hs_leading_constant(lambda, pot.m)? * derived_scalars(pot).l2_op_sq).sqrt();
    if pot.segments.is_empty() {
        return Ok(TraceSeries {
            lambda,
            terms: vec![],
            log_d: C64::new(0.0, 0.0),
            value: C64::new(1.0, 0.0),
            eps_operator,
            eps_matrix: 0.0,
            remainder: tail_bound(eps_operator, n_max),
            remainder_matrix: Some(0.0),
        });
    }
    let a = -nystrom_matrix(lambda, pot, opts, Factorization::Symmetric)?;
    let eps_matrix = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if eps_operator >= 1.0 && eps_matrix >= 1.0 {
        return Err(Error::Precondition(format!(
            "trace series does not converge at λ = {lambda}: ε = {eps_operator}"
        )));
    }
    let mut power = &a * &a;
    let mut terms = Vec::new();
    for n in 2..=n_max {
        if n > 2 {
            power = &power * &a;
        }
        terms.push(power.trace() / n as f64);
    }
    let log_d = -terms.iter().sum::<C64>();
    Ok(TraceSeries {
        lambda,
        terms,
        value: log_d.exp(),
        log_d,
        eps_operator,
        eps_matrix,
        remainder: tail_bound(eps_operator, n_max),
        remainder_matrix: tail_bound(eps_matrix, n_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsCertificate {
    pub lambda: C64,
    /// `‖VR₀(λ)‖²` over `L²(ℝ₊)`, by quadrature in `x` and exact tails in `y`.
    pub hs_norm_sq: f64,
    /// Leading constant times `∫ ‖V(x)‖²_op dx`.
    pub bound: f64,
    /// `1.1 bound − hs_norm_sq`.
    pub margin: f64,
}

/// `∫₀^γ ∫₀^∞ ‖V(x) R₀(x, y, λ)‖²_F dy dx`.
pub fn hs_norm_sq(lambda: C64, pot: &Potential, opts: &DetOptions) -> Result<f64> {
    let point = resolvent_point(lambda, pot.m)?;
    let (k, k0) = (point.k, point.k0());
    let kappa = k.im;
    let outer = nodes(pot, opts, false);
    let rule = GaussRule::legendre(20);
    let sum = outer
        .par_iter()
        .map(|&(x, w)| {
            let v = matrix_at(pot, x);
            // y > x: R₀ = e^{iky} C(x), and ∫ₓ^∞ |e^{iky}|² = e^{−2κx}/(2κ).
            let (sx, cx) = ((k * x).sin(), (k * x).cos());
            let c = [[I * k0 * sx, I * sx], [cx, cx / k0]];
            let above = frob_sq(&rmul(&v, &c)) * (-2.0 * kappa * x).exp() / (2.0 * kappa);
            // y < x: R₀ = e^{ikx} M(y) with entries in sin ky, cos ky.
            let ex = (-2.0 * kappa * x).exp();
            let panels = ((k.norm() * x / 2.0).ceil() as usize).max(1);
            let below: f64 = rule
                .composite(0.0, x, panels)
                .into_iter()
                .map(|(y, wy)| {
                    let (sy, cy) = ((k * y).sin(), (k * y).cos());
                    let m = [[I * k0 * sy, cy], [I * sy, cy / k0]];
                    wy * frob_sq(&rmul(&v, &m))
                })
                .sum::<f64>()
                * ex;
            w * (above + below)
        })
        .sum();
    Ok(sum)
}

fn frob_sq(a: &Mat2) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum()
}

pub fn hs_norm_certificate(lambda: C64, pot: &Potential, opts: &DetOptions) -> Result<HsCertificate> {
    let hs = if pot.segments.is_empty() {
        0.0
    } else {
        hs_norm_sq(lambda, pot, opts)?
    };
    let bound = hs_leading_constant(lambda, pot.m)? * derived_scalars(pot).l2_op_sq;
    Ok(HsCertificate {
        lambda,
        hs_norm_sq: hs,
        bound,
        margin: 1.1 * bound - hs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SIdentity {
    pub lambda: f64,
    /// `S(λ)` from the Jost function.
    pub lhs: C64,
    /// `D(λ − i0)/D(λ + i0) e^{−2iΩ(λ)}`.
    pub rhs: C64,
    pub diff: f64,
    pub d_plus: BoundaryValue,
    pub d_minus: BoundaryValue,
    pub omega: f64,
    /// Distance of `φ_sc − Ω − arg D(λ + i0)` from `πℤ`.
    pub phase_gap: f64,
}

/// Both sides of `S(λ) = D(λ − i0)/D(λ + i0) · e^{−2iΩ(λ)}`.
pub fn identity_s_from_d(lambda: f64, pot: &Potential, opts: &DetOptions) -> Result<SIdentity> {
    let m = pot.m;
    if lambda.abs() < 1.1 * m {
        return Err(Error::Precondition(format!(
            "λ = {lambda} must satisfy |λ| ≥ 1.1 m"
        )));
    }
    let jopts = JostOptions::with_tol(1e-12);
    let lhs = scattering::scattering_matrix(lambda, pot, &jopts)?;
    let omega = scattering::omega(lambda, pot)?;
    let d_plus = det2_boundary(lambda, 1, pot, opts)?;
    let d_minus = det2_boundary(lambda, -1, pot, opts)?;
    let rhs = d_minus.value / d_plus.value * (-2.0 * I * omega).exp();
    let f1 = jost::jost_value(&SpectralPoint::real(lambda, m)?, pot, &jopts)?[0];
    let phi_sc = f1.arg() + std::f64::consts::FRAC_PI_2;
    let gap = phi_sc - omega - d_plus.value.arg();
    let pi = std::f64::consts::PI;
    Ok(SIdentity {
        lambda,
        lhs,
        rhs,
        diff: (lhs - rhs).norm(),
        d_plus,
        d_minus,
        omega,
        phase_gap: (gap - (gap / pi).round() * pi).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AIdentity {
    pub lambda: C64,
    /// `f₁⁺(0, λ)`.
    pub lhs: C64,
    /// `k₀ D exp(iΩ₀ + (1/π)∫(Ω(t) − Ω₀)/(t − λ) dt)`.
    pub rhs: C64,
    pub rel_diff: f64,
    pub cauchy: C64,
    /// Contribution of `|t| > T` from the `1/t` asymptote of `Ω − Ω₀`.
    pub tail: C64,
}

/// `(1/π) ∫_ℝ (Ω(t) − Ω₀)/(t − λ) dt` for `Im λ > 0`, truncated at `|t| = T`
/// plus the tail of the `1/t` asymptote.
pub fn cauchy_integral(lambda: C64, pot: &Potential, t_max: f64) -> Result<(C64, C64)> {
    let m = pot.m;
    if !(lambda.im > 0.0) {
        return Err(Error::Precondition("needs Im λ > 0".into()));
    }
    if !(t_max > 2.0 * m) {
        return Err(Error::Precondition("cut-off must exceed 2m".into()));
    }
    let s = derived_scalars(pot);
    let omega0 = s.omega0;
    // gap: Ω = 0
    let mut total = -omega0 * ((m - lambda).ln() - (-m - lambda).ln());
    // t = ±√(k² + m²), dt = k/|t| dk; this absorbs the 1/√ edge at t = −m.
    let k_max = ((t_max - m) * (t_max + m)).sqrt();
    let panels = ((k_max * pot.gamma * 2.0).ceil() as usize).max(8);
    let rule = GaussRule::legendre(16);
    let nodes = rule.composite(0.0, k_max, panels);
    let pieces = nodes
        .par_iter()
        .map(|&(k, w)| {
            let r = (k * k + m * m).sqrt();
            let mut acc = C64::new(0.0, 0.0);
            for t in [r, -r] {
                acc += (scattering::omega(t, pot)? - omega0) / (t - lambda) * (w * k / r);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<C64>>>()?;
    total += pieces.iter().sum::<C64>();
    // Ω(t) − Ω₀ = (m∫p + q(0)/2)/t + oscillating + O(t⁻²)
    let p_integral: f64 = pot.segments.iter().map(|seg| crate::poly::integral(&seg.p(), seg.len())).sum();
    let c = m * p_integral + 0.5 * pot.at(0.0)[2];
    let tail = c / lambda * ((1.0 + lambda / t_max).ln() - (1.0 - lambda / t_max).ln());
    total += tail;
    Ok((total / std::f64::consts::PI, tail / std::f64::consts::PI))
}

/// Both sides of `f₁⁺(0, λ) = k₀ D(λ) exp(iΩ₀ + (1/π)∫(Ω − Ω₀)/(t − λ) dt)`.
pub fn identity_a_eq_d(lambda: C64, pot: &Potential, opts: &DetOptions, t_max: f64) -> Result<AIdentity> {
    if !pot.smooth {
        return Err(Error::Precondition("needs a continuous potential".into()));
    }
    let point = SpectralPoint::new(lambda, Sheet::Physical, pot.m)?;
    let lhs = jost::jost_value(&point, pot, &JostOptions::with_tol(1e-12))?[0];
    let d = det2(lambda, pot, opts)?.value;
    let (cauchy, tail) = cauchy_integral(lambda, pot, t_max)?;
    let omega0 = derived_scalars(pot).omega0;
    let rhs = point.k0() * d * (I * omega0 + cauchy).exp();
    Ok(AIdentity {
        lambda,
        lhs,
        rhs,
        rel_diff: (lhs - rhs).norm() / lhs.norm(),
        cauchy,
        tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativisticIntegral {
    pub lambda: C64,
    /// `∫_ℝ dk/|λ(k) − λ|²` with `λ(k) = sgn(k)√(k² + m²)`, the branch of
    /// `√(k² + m²)` analytic off `[−im, im]`.
    pub numeric: f64,
    /// `2π/|Im λ| · |Re(λ/√(λ² − m²))|`.
    pub closed_form: f64,
    /// `π/|Im λ| · |Re(λ/√(λ² − m²))|`, from the single pole `λ(k) = λ` enclosed
    /// by the upper half-plane contour.
    pub one_pole: f64,
    pub diff: f64,
    pub quad_error: f64,
}

pub fn relativistic_integral(lambda: C64, m: f64, tol: f64) -> Result<RelativisticIntegral> {
    if lambda.im == 0.0 {
        return Err(Error::Precondition("needs Im λ ≠ 0".into()));
    }
    // k = u/(1 − u²) maps (−1, 1) onto ℝ.
    let f = |u: f64| {
        let d = 1.0 - u * u;
        let k = u / d;
        let s = k.signum() * (k * k + m * m).sqrt();
        (1.0 + u * u) / (d * d) / (s - lambda).norm_sqr()
    };
    let (a, ea) = quad::adaptive(&f, -1.0 + 1e-12, 0.0, tol);
    let (b, eb) = quad::adaptive(&f, 0.0, 1.0 - 1e-12, tol);
    let numeric = a + b;
    let half = hs_leading_constant(lambda, m)? / 4.0;
    let closed_form = 2.0 * half;
    Ok(RelativisticIntegral {
        lambda,
        numeric,
        closed_form,
        one_pole: half,
        diff: (numeric - closed_form).abs(),
        quad_error: ea + eb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn free_determinant_is_one() {
        let pot = fixtures::free();
        let d = det2(C64::new(0.5, 2.0), &pot, &DetOptions::default()).unwrap();
        assert_eq!(d.value, C64::new(1.0, 0.0));
    }

    #[test]
    fn split_root_factors_v() {
        for v in [[[1.0, 0.3], [0.3, -2.0]], [[0.0, 1.0], [1.0, 0.0]], [[2.0, 0.0], [0.0, 0.5]], [[0.0; 2]; 2]] {
            let (r, s) = split_root(v);
            for i in 0..2 {
                for j in 0..2 {
                    let prod = s[i][0] * r[0][j] + s[i][1] * r[1][j];
                    assert!((prod - v[i][j]).abs() < 1e-14);
                    assert!((r[i][j] - r[j][i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn factorizations_agree() {
        let pot = fixtures::smooth_bump();
        let opts = DetOptions::default();
        let z = C64::new(1.5, 0.8);
        let a = det2_with(z, &pot, &opts, Factorization::Symmetric).unwrap().value;
        let b = det2_with(z, &pot, &opts, Factorization::OneSided).unwrap().value;
        assert!((a - b).norm() < 1e-10, "{a} {b}");
    }

    #[test]
    fn conjugation_and_carleman_bound() {
        let pot = fixtures::step_q();
        let opts = DetOptions::default();
        let z = C64::new(1.0, 2.0);
        let up = det2(z, &pot, &opts).unwrap();
        let down = det2(z.conj(), &pot, &opts).unwrap();
        assert!((up.value - down.value.conj()).norm() < 1e-12);
        assert!(up.bound_margin > 0.0);
    }

    #[test]
    fn raw_error_is_first_order_and_extrapolation_removes_it() {
        let pot = fixtures::smooth_bump();
        let z = C64::new(2.0, 0.5);
        let d = |n| det2(z, &pot, &DetOptions::with_nodes(n)).unwrap();
        let (a, b, c) = (d(100), d(200), d(400));
        let ratio = (a.raw - b.raw).norm() / (b.raw - c.raw).norm();
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
        assert!((b.value - c.value).norm() < 0.05 * (b.raw - c.raw).norm());
    }

    #[test]
    fn nystrom_converges_to_the_jost_route() {
        let opts = JostOptions::with_tol(1e-13);
        for pot in [fixtures::step_q(), fixtures::smooth_bump()] {
            for z in [C64::new(1.0, 1.0), C64::new(-3.0, 0.2), C64::new(0.4, 0.0), C64::new(2.0, -1.5)] {
                let j = det2_jost_route(z, &pot, &opts).unwrap();
                let d = det2(z, &pot, &DetOptions::with_nodes(400)).unwrap().value;
                assert!((d - j).norm() < 2e-5 * j.norm(), "{z}: {d} vs {j}");
            }
        }
    }

    #[test]
    fn trace_series_matches_det2_high_in_the_upper_half_plane() {
        let pot = fixtures::step_q();
        let opts = DetOptions::default();
        let z = C64::new(0.0, 30.0);
        let ts = det2_trace_series(z, &pot, &opts, 8).unwrap();
        let d = det2(z, &pot, &opts).unwrap();
        let bound = ts.remainder.unwrap();
        assert!((d.value.ln() - ts.log_d).norm() <= bound);
        assert!((d.raw.ln() - ts.log_d).norm() <= ts.remainder_matrix.unwrap());
        let ts12 = det2_trace_series(z, &pot, &opts, 12).unwrap();
        assert!(ts12.remainder.unwrap() < bound);
    }

    #[test]
    fn relativistic_integral_has_one_pole() {
        for z in [C64::new(0.0, 10.0), C64::new(3.0, 2.0), C64::new(-5.0, 1.0), C64::new(2.0, -0.5)] {
            let r = relativistic_integral(z, 1.0, 1e-13).unwrap();
            assert!((r.numeric - r.one_pole).abs() < 1e-9 * r.numeric, "{r:?}");
            let c = relativistic_integral(z.conj(), 1.0, 1e-13).unwrap();
            assert!((c.numeric - r.numeric).abs() < 1e-10 * r.numeric);
        }
    }

    #[test]
    fn cauchy_integral_vanishes_for_the_free_operator() {
        let (c, t) = cauchy_integral(C64::new(1.0, 1.0), &fixtures::free(), 400.0).unwrap();
        assert_eq!(c, C64::new(0.0, 0.0));
        assert_eq!(t, C64::new(0.0, 0.0));
    }
}
