//! The Jost solution `f⁺`, the entire solutions `ϑ̃`, `φ̃` normalized at `x = γ`,
//! and two independent routes to `f⁺(0, λ)`: the Volterra series around the
//! free solution and the high-energy interaction picture.
//!
//! The system is `f' = A(x, λ) f` with
//! `A = [[−q, λ + m − p2], [m + p1 − λ, q]]`, so `∂_λ A = [[0, 1], [−1, 0]]`.
//! Everything is integrated backward from `x = γ`, where the solutions are
//! known in closed form. Zero gaps inside the support use the free transfer
//! matrix instead of the integrator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, Stats, Tolerance};
use crate::plane::{self, Sheet, SpectralPoint, C64, I};
use crate::poly;
use crate::potential::{Potential, Segment};
use crate::quad::GaussRule;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest `|2kx|` imaginary part kept inside an exponential.
const MAX_EXPONENT: f64 = 600.0;

/// Largest `γ|Im k|` routed through the interaction picture.
const HIGH_ENERGY_DEPTH: f64 = 10.0;

/// Which computation produced a [`JostEvaluation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Route {
    /// Backward integration of the Dirac system.
    Direct,
    /// Backward integration in the interaction picture of the high-energy
    /// diagonalization; no `ϑ̃`, `φ̃` are produced.
    HighEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostOptions {
    /// Relative local error tolerance of the integrator.
    pub tol: f64,
    /// `|λ|` above which the high-energy route is used. `None` selects
    /// `max(50, 20/γ)(1 + m)`; `Some(f64::INFINITY)` disables the switch.
    pub lambda_switch: Option<f64>,
}

impl Default for JostOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            lambda_switch: None,
        }
    }
}

impl JostOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn direct_only(tol: f64) -> Self {
        Self {
            tol,
            lambda_switch: Some(f64::INFINITY),
        }
    }

    pub fn switch_for(&self, pot: &Potential) -> f64 {
        self.lambda_switch
            .unwrap_or_else(|| 50f64.max(20.0 / pot.gamma) * (1.0 + pot.m))
    }

    /// Whether `point` goes through the interaction picture. Away from the real
    /// axis the solutions are exponentially dominated, the picture stops paying
    /// off and `e^{±2ikx}` eventually leaves the double range, so the direct
    /// route is used there.
    pub fn high_energy(&self, point: &SpectralPoint, pot: &Potential) -> bool {
        point.lambda.norm() > self.switch_for(pot) && point.k.im.abs() * pot.gamma <= HIGH_ENERGY_DEPTH
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JostEvaluation {
    #[serde(skip)]
    pub point: SpectralPoint,
    /// `f⁺(0, λ)`.
    pub f1: C64,
    pub f2: C64,
    /// `f⁻(0, λ)`, the solution equal to `e^{−ikx}(−k₀, 1)` beyond `γ`.
    pub f_minus: Option<[C64; 2]>,
    /// `ϑ̃₁(0, λ)`.
    pub theta1: Option<C64>,
    /// `φ̃₁(0, λ)`.
    pub phi1: Option<C64>,
    /// `|det(f⁺, f⁻) − 2k₀|` at `x = 0`.
    pub wronskian_residual: Option<f64>,
    pub ode_tolerance: f64,
    pub route: Route,
    #[serde(skip)]
    pub stats: Stats,
}

impl JostEvaluation {
    /// `k₀ ϑ̃₁ + φ̃₁`, which equals `f1` up to cancellation in the sum.
    pub fn f1_from_tilde(&self) -> Option<C64> {
        Some(self.point.k0() * self.theta1? + self.phi1?)
    }
}

type Mat = [[C64; 2]; 2];

#[inline]
fn system(v: [f64; 3], lambda: C64, m: f64) -> Mat {
    let [p1, p2, q] = v;
    [
        [C64::new(-q, 0.0), lambda + (m - p2)],
        [(m + p1) - lambda, C64::new(q, 0.0)],
    ]
}

#[inline]
fn apply(a: &Mat, y: [C64; 2]) -> [C64; 2] {
    [a[0][0] * y[0] + a[0][1] * y[1], a[1][0] * y[0] + a[1][1] * y[1]]
}

/// Step ceiling resolving `e^{±ikx}`.
pub(crate) fn step_cap(lambda: C64, pot: &Potential) -> f64 {
    let k = (lambda * lambda - pot.m * pot.m).sqrt().norm();
    (0.1 / (1.0 + k)).min(pot.gamma / 50.0)
}

/// Values at `x = 0` of solutions given at `x = γ`, optionally with their
/// `λ`-derivatives.
pub(crate) struct Propagated {
    pub y: Vec<[C64; 2]>,
    pub dy: Option<Vec<[C64; 2]>>,
    pub stats: Stats,
}

/// Integrates the vectors `data` (and derivatives `ddata`) from `γ` down to `0`.
///
/// Each vector is its own scale group; a derivative shares the group of its base.
pub(crate) fn propagate(
    pot: &Potential,
    lambda: C64,
    data: &[[C64; 2]],
    ddata: Option<&[[C64; 2]]>,
    tol: f64,
) -> Result<Propagated> {
    let m = pot.m;
    let nv = data.len();
    let with_d = ddata.is_some();
    let mut state: Vec<C64> = data.iter().flatten().copied().collect();
    if let Some(d) = ddata {
        assert_eq!(d.len(), nv);
        state.extend(d.iter().flatten().copied());
    }
    let groups: Vec<usize> = (0..nv).chain(if with_d { 0..nv } else { 0..0 }).collect();
    let cap = step_cap(lambda, pot);
    let mut stats = Stats::default();
    for (lo, hi, idx) in pot.cells().into_iter().rev() {
        match idx {
            None => {
                let t = plane::free_fundamental(lo - hi, lambda, m);
                let dt = plane::free_fundamental_dlambda(lo - hi, lambda, m);
                for j in 0..nv {
                    let y = [state[2 * j], state[2 * j + 1]];
                    let ny = apply(&t, y);
                    if with_d {
                        let o = 2 * (nv + j);
                        let d = [state[o], state[o + 1]];
                        let a = apply(&dt, y);
                        let b = apply(&t, d);
                        state[o] = a[0] + b[0];
                        state[o + 1] = a[1] + b[1];
                    }
                    state[2 * j] = ny[0];
                    state[2 * j + 1] = ny[1];
                }
            }
            Some(i) => {
                let seg = &pot.segments[i];
                let rhs = |x: f64, y: &[C64], dy: &mut [C64]| {
                    let a = system(seg.at(x), lambda, m);
                    for j in 0..nv {
                        let (u0, u1) = (y[2 * j], y[2 * j + 1]);
                        dy[2 * j] = a[0][0] * u0 + a[0][1] * u1;
                        dy[2 * j + 1] = a[1][0] * u0 + a[1][1] * u1;
                        if with_d {
                            let o = 2 * (nv + j);
                            let (d0, d1) = (y[o], y[o + 1]);
                            dy[o] = a[0][0] * d0 + a[0][1] * d1 + u1;
                            dy[o + 1] = a[1][0] * d0 + a[1][1] * d1 - u0;
                        }
                    }
                };
                stats.merge(ode::integrate(
                    rhs,
                    hi,
                    lo,
                    &mut state,
                    &groups,
                    Tolerance::relative(tol),
                    cap,
                )?);
            }
        }
    }
    let unpack = |s: &[C64]| s.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
    Ok(Propagated {
        y: unpack(&state[..2 * nv]),
        dy: with_d.then(|| unpack(&state[2 * nv..])),
        stats,
    })
}

fn columns(mat: &Mat) -> [[C64; 2]; 2] {
    [[mat[0][0], mat[1][0]], [mat[0][1], mat[1][1]]]
}

/// `(ϑ̃(0, λ), φ̃(0, λ))`: the solutions equal to the free `ϑ`, `φ` on `x ≥ γ`.
/// Both are entire in `λ` and `det(ϑ̃, φ̃) = 1`.
pub fn fundamental_tilde(lambda: C64, pot: &Potential, tol: f64) -> Result<([C64; 2], [C64; 2])> {
    if pot.segments.is_empty() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        return Ok(([one, zero], [zero, one]));
    }
    let data = columns(&plane::free_fundamental(pot.gamma, lambda, pot.m));
    let out = propagate(pot, lambda, &data, None, tol)?;
    Ok((out.y[0], out.y[1]))
}

/// `ϑ̃(0)`, `φ̃(0)` together with their `λ`-derivatives, in the order
/// `[ϑ̃, φ̃, ∂ϑ̃, ∂φ̃]`.
pub fn fundamental_tilde_with_derivative(
    lambda: C64,
    pot: &Potential,
    tol: f64,
) -> Result<[[C64; 2]; 4]> {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    if pot.segments.is_empty() {
        return Ok([[one, zero], [zero, one], [zero; 2], [zero; 2]]);
    }
    let data = columns(&plane::free_fundamental(pot.gamma, lambda, pot.m));
    let ddata = columns(&plane::free_fundamental_dlambda(pot.gamma, lambda, pot.m));
    let out = propagate(pot, lambda, &data, Some(&ddata), tol)?;
    let dy = out.dy.expect("derivatives requested");
    Ok([out.y[0], out.y[1], dy[0], dy[1]])
}

/// `ψ^±(γ)` and `∂_λ ψ^±(γ)` for the branch of `point`.
pub(crate) fn free_jost_with_derivative(point: &SpectralPoint, x: f64, sign: f64) -> ([C64; 2], [C64; 2]) {
    let k = point.k;
    let k0 = point.k0();
    let lambda = point.lambda;
    let e = (I * k * x * sign).exp();
    let dk = lambda / k;
    let dk0 = -point.m * k0 / (k * k);
    let de = I * x * sign * dk * e;
    (
        [e * k0 * sign, e],
        [de * k0 * sign + e * dk0 * sign, de],
    )
}

/// `f⁺(0, λ)` and, on the direct route, `f⁻(0, λ)`, `ϑ̃₁(0, λ)` and `φ̃₁(0, λ)`.
///
/// `f⁺` is integrated from its own data `e^{ikγ}(k₀, 1)` rather than assembled
/// as `k₀ϑ̃ + φ̃`, which cancels catastrophically far from the real axis.
pub fn jost_function(point: &SpectralPoint, pot: &Potential, opts: &JostOptions) -> Result<JostEvaluation> {
    let k0 = point.k0();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    if pot.segments.is_empty() {
        return Ok(JostEvaluation {
            point: *point,
            f1: k0,
            f2: one,
            f_minus: Some([-k0, one]),
            theta1: Some(one),
            phi1: Some(zero),
            wronskian_residual: Some(0.0),
            ode_tolerance: opts.tol,
            route: Route::Direct,
            stats: Stats::default(),
        });
    }
    if opts.high_energy(point, pot) {
        let (f, stats) = interaction_picture(point, pot, opts.tol)?;
        return Ok(JostEvaluation {
            point: *point,
            f1: f[0],
            f2: f[1],
            f_minus: None,
            theta1: None,
            phi1: None,
            wronskian_residual: None,
            ode_tolerance: opts.tol,
            route: Route::HighEnergy,
            stats,
        });
    }
    let g = pot.gamma;
    let [theta, phi] = columns(&plane::free_fundamental(g, point.lambda, pot.m));
    let data = [
        plane::free_jost(g, point, 1),
        plane::free_jost(g, point, -1),
        theta,
        phi,
    ];
    let out = propagate(pot, point.lambda, &data, None, opts.tol)?;
    let (fp, fm) = (out.y[0], out.y[1]);
    let det = fp[0] * fm[1] - fp[1] * fm[0];
    Ok(JostEvaluation {
        point: *point,
        f1: fp[0],
        f2: fp[1],
        f_minus: Some(fm),
        theta1: Some(out.y[2][0]),
        phi1: Some(out.y[3][0]),
        wronskian_residual: Some((det - 2.0 * k0).norm()),
        ode_tolerance: opts.tol,
        route: Route::Direct,
        stats: out.stats,
    })
}

/// `f⁺(0, λ)` only; the cheap path used by scans and contour integrals.
pub fn jost_value(point: &SpectralPoint, pot: &Potential, opts: &JostOptions) -> Result<[C64; 2]> {
    if pot.segments.is_empty() {
        return Ok([point.k0(), C64::new(1.0, 0.0)]);
    }
    if opts.high_energy(point, pot) {
        return Ok(interaction_picture(point, pot, opts.tol)?.0);
    }
    let data = [plane::free_jost(pot.gamma, point, 1)];
    Ok(propagate(pot, point.lambda, &data, None, opts.tol)?.y[0])
}

/// `f⁺(0, λ)` and `∂_λ f⁺(0, λ)` on the direct route.
pub fn jost_with_derivative(point: &SpectralPoint, pot: &Potential, tol: f64) -> Result<([C64; 2], [C64; 2])> {
    let (d, dd) = free_jost_with_derivative(point, pot.gamma, 1.0);
    if pot.segments.is_empty() {
        let (d0, dd0) = free_jost_with_derivative(point, 0.0, 1.0);
        return Ok((d0, dd0));
    }
    let out = propagate(pot, point.lambda, &[d], Some(&[dd]), tol)?;
    Ok((out.y[0], out.dy.expect("derivatives requested")[0]))
}

// ---------------------------------------------------------------------------
// High-energy route

/// Coefficients of the diagonalized system at one point of a segment.
struct Coupling {
    /// `N`; the lower diagonal entry is `−N`.
    n: C64,
    /// `M = e^{−2iΦ}(w̄ + c)`.
    m_lo: C64,
    /// `M̄ = e^{2iΦ}(w − c)`.
    m_up: C64,
}

/// Segment-local evaluator of `N`, `M`, `M̄` and their `x`-derivatives.
struct SegmentCoupling<'a> {
    seg: &'a Segment,
    phi_lo: f64,
    v_anti: Vec<f64>,
    a: C64,
    b: C64,
    dp1: Vec<f64>,
    dp2: Vec<f64>,
    dq: Vec<f64>,
}

impl<'a> SegmentCoupling<'a> {
    fn new(pot: &Potential, seg: &'a Segment, point: &SpectralPoint) -> Self {
        let lm = point.lambda + pot.m;
        Self {
            seg,
            phi_lo: pot.v_integral_to(seg.lo),
            v_anti: poly::antiderivative(&seg.v()),
            a: point.k / lm - 1.0,
            b: lm / point.k - 1.0,
            dp1: poly::derivative(&seg.p1),
            dp2: poly::derivative(&seg.p2),
            dq: poly::derivative(&seg.q),
        }
    }

    fn phase(&self, x: f64) -> f64 {
        self.phi_lo + poly::eval(&self.v_anti, x - self.seg.lo)
    }

    fn at(&self, x: f64) -> Coupling {
        let [p1, p2, q] = self.seg.at(x);
        let p = 0.5 * (p1 - p2);
        let n = 0.5 * I * (p2 * self.a + p1 * self.b);
        let c = 0.5 * I * (p2 * self.a - p1 * self.b);
        let e = (-2.0 * I * self.phase(x)).exp();
        Coupling {
            n,
            m_lo: e * (C64::new(q, -p) + c),
            m_up: (C64::new(q, p) - c) * e.conj(),
        }
    }

    /// `(M', M̄')`.
    fn derivative(&self, x: f64) -> (C64, C64) {
        let [p1, p2, q] = self.seg.at(x);
        let u = x - self.seg.lo;
        let (d1, d2, dq) = (
            poly::eval(&self.dp1, u),
            poly::eval(&self.dp2, u),
            poly::eval(&self.dq, u),
        );
        let v = 0.5 * (p1 + p2);
        let p = 0.5 * (p1 - p2);
        let dp = 0.5 * (d1 - d2);
        let c = 0.5 * I * (p2 * self.a - p1 * self.b);
        let dc = 0.5 * I * (d2 * self.a - d1 * self.b);
        let e = (-2.0 * I * self.phase(x)).exp();
        let lo = C64::new(q, -p) + c;
        let up = C64::new(q, p) - c;
        let dlo = C64::new(dq, -dp) + dc;
        let dup = C64::new(dq, dp) - dc;
        (
            e * (-2.0 * I * v * lo + dlo),
            (2.0 * I * v * up + dup) * e.conj(),
        )
    }
}

/// `f⁺(0, λ)` from `X̃' = −W̃ X̃`, `X̃(γ) = e₁`, with
/// `W̃ = [[N, e^{−2ikx} M̄], [e^{2ikx} M, −N]]` and
/// `f⁺(0) = e^{iΩ₀}(k₀(X̃₁ + X̃₂), X̃₁ − X̃₂)(0)`.
///
/// Only `V` itself enters, so this holds for piecewise potentials as well.
pub fn interaction_picture(point: &SpectralPoint, pot: &Potential, tol: f64) -> Result<([C64; 2], Stats)> {
    if 2.0 * point.k.im.abs() * pot.gamma > MAX_EXPONENT {
        return Err(Error::Precondition(format!(
            "λ = {} is too far from the real axis for the interaction picture",
            point.lambda
        )));
    }
    let mut x = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let k = point.k;
    let cap = step_cap(point.lambda, pot);
    let mut stats = Stats::default();
    for seg in pot.segments.iter().rev() {
        let cp = SegmentCoupling::new(pot, seg, point);
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let c = cp.at(t);
            // e^{∓2ikt} separately: dividing would form |e^{2ikt}|², which underflows
            let (e2, e2_inv) = ((2.0 * I * k * t).exp(), (-2.0 * I * k * t).exp());
            dy[0] = -(c.n * y[0] + c.m_up * e2_inv * y[1]);
            dy[1] = -(e2 * c.m_lo * y[0] - c.n * y[1]);
        };
        stats.merge(ode::integrate(
            rhs,
            seg.hi,
            seg.lo,
            &mut x,
            &[],
            Tolerance::relative(tol),
            cap,
        )?);
    }
    let omega0 = pot.v_integral_to(pot.gamma);
    let ph = (I * omega0).exp();
    Ok((
        [ph * point.k0() * (x[0] + x[1]), ph * (x[0] - x[1])],
        stats,
    ))
}

/// Order-by-order high-energy expansion at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighEnergyExpansion {
    pub x: f64,
    /// `Y(x)` from the interaction-picture integration.
    pub y: [C64; 2],
    /// `Y⁰(x), Y¹(x), …`; their sum approximates `y`.
    pub terms: Vec<[C64; 2]>,
    /// Bounds on `|Yⁿ(x)|`.
    pub bounds: Vec<f64>,
    /// `∫_x^γ ‖𝔚‖` with `𝔚 = 2ik𝔑 + σ₃(𝔐' − 𝔐𝔑 − 𝔐²)`.
    pub w_norm: f64,
    /// `∫_x^γ ‖R‖` for the remainder `R` driving the iteration.
    pub r_norm: f64,
    /// `sup |M|`; the expansion needs `|k|` above it.
    pub coupling_sup: f64,
}

/// Expansion of `Y` in powers of `1/k`.
///
/// With `𝔐 = [[0, M̄], [M, 0]]` and `P = σ₃𝔐/(2ik)`, the substitution
/// `Y = (I + P)Z` turns `Y' = (ikσ₃ − 𝔑 − 𝔐)Y` into `Z' = (ikσ₃ − R)Z` where
/// `R = (I + P)^{-1}(𝔑(I + P) + 𝔐P + P')` is `O(1/k)`. The terms are
/// `Yⁿ = (I + P)Zⁿ` for the Dyson iterates `Zⁿ' = ikσ₃Zⁿ − RZⁿ⁻¹`,
/// `Z⁰ = e^{ikx}e₁`, and satisfy
/// `|Yⁿ(x)| ≤ (1 + ‖P(x)‖) e^{|Im k|(2γ − x)} (∫_x^γ ‖R‖)ⁿ / n!`.
///
/// Requires a potential that vanishes continuously at every breakpoint.
pub fn high_energy_y(
    x: f64,
    point: &SpectralPoint,
    pot: &Potential,
    order: usize,
    tol: f64,
) -> Result<HighEnergyExpansion> {
    if !pot.smooth {
        return Err(Error::Precondition(
            "high-energy expansion needs a continuous potential".into(),
        ));
    }
    let k = point.k;
    let sup = coupling_sup(pot, point);
    if k.norm() < sup {
        return Err(Error::Precondition(format!(
            "|k| = {} below the coupling bound {sup}",
            k.norm()
        )));
    }
    let x = x.clamp(0.0, pot.gamma);
    let cap = step_cap(point.lambda, pot);
    let zero = C64::new(0.0, 0.0);

    // Z¹..Z^order, integrated jointly; Z⁰ is closed form.
    let mut z = vec![zero; 2 * order];
    let groups = vec![0usize; order];
    let rule = GaussRule::legendre(20);
    let (mut w_norm, mut r_norm) = (0.0, 0.0);
    let mut p_at_x = [[zero; 2]; 2];
    let mut x_state = vec![C64::new(1.0, 0.0), zero];
    let ik = I * k;
    for (cell_lo, hi, idx) in pot.cells().into_iter().rev() {
        if hi <= x {
            continue;
        }
        let lo = cell_lo.max(x);
        let Some(i) = idx else {
            // R = 0: Zⁿ rotates by e^{ikσ₃(lo − hi)} and X̃ is constant.
            let (up, down) = ((ik * (lo - hi)).exp(), (-ik * (lo - hi)).exp());
            for n in 0..order {
                z[2 * n] *= up;
                z[2 * n + 1] *= down;
            }
            continue;
        };
        let seg = &pot.segments[i];
        let cp = SegmentCoupling::new(pot, seg, point);
        let remainder = |t: f64| -> (Mat, Mat, Mat) {
            let c = cp.at(t);
            let (dm, dmb) = cp.derivative(t);
            // P = [[0, M̄/(2ik)], [−M/(2ik), 0]]
            let p = [[zero, c.m_up / (2.0 * ik)], [-c.m_lo / (2.0 * ik), zero]];
            let dp = [[zero, dmb / (2.0 * ik)], [-dm / (2.0 * ik), zero]];
            let nn = [[c.n, zero], [zero, -c.n]];
            let mm = [[zero, c.m_up], [c.m_lo, zero]];
            let ip = add(&identity(), &p);
            let s = add(&add(&mul(&nn, &ip), &mul(&mm, &p)), &dp);
            let r = mul(&inv(&ip), &s);
            // 𝔚 = 2ik𝔑 + σ₃(𝔐' − 𝔐𝔑 − 𝔐²)
            let dmm = [[zero, dmb], [dm, zero]];
            let inner = add(&dmm, &scale(&add(&mul(&mm, &nn), &mul(&mm, &mm)), C64::new(-1.0, 0.0)));
            let sig = [[inner[0][0], inner[0][1]], [-inner[1][0], -inner[1][1]]];
            let w = add(&scale(&nn, 2.0 * ik), &sig);
            (r, w, p)
        };
        let pieces = 8 * (1 + (hi - lo).ceil() as usize);
        for (t, wt) in rule.composite(lo, hi, pieces) {
            let (r, w, _) = remainder(t);
            r_norm += wt * frob(&r);
            w_norm += wt * frob(&w);
        }
        if order > 0 {
            let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
                let (r, _, _) = remainder(t);
                let z0 = [(ik * t).exp(), zero];
                for n in 0..order {
                    let prev = if n == 0 { z0 } else { [y[2 * n - 2], y[2 * n - 1]] };
                    let rz = apply(&r, prev);
                    dy[2 * n] = ik * y[2 * n] - rz[0];
                    dy[2 * n + 1] = -ik * y[2 * n + 1] - rz[1];
                }
            };
            ode::integrate(rhs, hi, lo, &mut z, &groups, Tolerance::relative(tol), cap)?;
        }
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let c = cp.at(t);
            // e^{∓2ikt} separately: dividing would form |e^{2ikt}|², which underflows
            let (e2, e2_inv) = ((2.0 * I * k * t).exp(), (-2.0 * I * k * t).exp());
            dy[0] = -(c.n * y[0] + c.m_up * e2_inv * y[1]);
            dy[1] = -(e2 * c.m_lo * y[0] - c.n * y[1]);
        };
        ode::integrate(rhs, hi, lo, &mut x_state, &[], Tolerance::relative(tol), cap)?;
        if cell_lo <= x {
            p_at_x = remainder(x).2;
        }
    }
    let ex = [(ik * x).exp(), (-ik * x).exp()];
    let ipx = add(&identity(), &p_at_x);
    let mut terms = vec![apply(&ipx, [ex[0], zero])];
    for n in 0..order {
        terms.push(apply(&ipx, [z[2 * n], z[2 * n + 1]]));
    }
    let y = [ex[0] * x_state[0], ex[1] * x_state[1]];
    let pnorm = frob(&p_at_x);
    let growth = (k.im.abs() * (2.0 * pot.gamma - x)).exp();
    let mut bounds = Vec::with_capacity(order + 1);
    let mut b = (1.0 + pnorm) * growth;
    for n in 0..=order {
        if n > 0 {
            b *= r_norm / n as f64;
        }
        bounds.push(b);
    }
    Ok(HighEnergyExpansion {
        x,
        y,
        terms,
        bounds,
        w_norm,
        r_norm,
        coupling_sup: sup,
    })
}

fn identity() -> Mat {
    let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    [[o, z], [z, o]]
}

fn add(a: &Mat, b: &Mat) -> Mat {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn scale(a: &Mat, s: C64) -> Mat {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn inv(a: &Mat) -> Mat {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn frob(a: &Mat) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `sup |M|` over the support, sampled densely; `|M| = |w̄ + c|`.
fn coupling_sup(pot: &Potential, point: &SpectralPoint) -> f64 {
    let rule = GaussRule::legendre(12);
    let mut sup: f64 = 0.0;
    for seg in &pot.segments {
        let cp = SegmentCoupling::new(pot, seg, point);
        for (t, _) in rule.composite(seg.lo, seg.hi, 16) {
            let c = cp.at(t);
            sup = sup.max(c.m_lo.norm()).max(c.m_up.norm());
        }
        for t in [seg.lo, seg.hi] {
            let c = cp.at(t);
            sup = sup.max(c.m_lo.norm()).max(c.m_up.norm());
        }
    }
    sup
}

// ---------------------------------------------------------------------------
// Volterra series

/// Iterates of the Volterra equation for `f⁺` around the free solution.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSeries {
    pub x: f64,
    /// `χⁿ(x) = e^{−ikx} gⁿ(x)` for `n = 0..=n_max`, where `g⁰ = ψ⁺` and
    /// `gⁿ' = A₀gⁿ + (A − A₀)gⁿ⁻¹`, `gⁿ(γ) = 0`.
    pub terms: Vec<[C64; 2]>,
    /// Bounds on `max(|χⁿ₁|, |χⁿ₂|)`:
    /// `e^{(γ−x)(|η|−η)} (K₂/n!) (K₁ ∫_x^γ ‖V‖)ⁿ` with `η = Im k`,
    /// `K₁ = max(|k₀|, 1/|k₀|)`, `K₂ = max(|k₀|, 1)`.
    pub term_bounds: Vec<f64>,
    /// Sum of the term bounds beyond `n_max`.
    pub tail_bound: f64,
}

impl VolterraSeries {
    pub fn sum(&self) -> [C64; 2] {
        self.terms.iter().fold([C64::new(0.0, 0.0); 2], |acc, t| {
            [acc[0] + t[0], acc[1] + t[1]]
        })
    }
}

/// `∫_x^γ ‖V‖` with the spectral norm.
pub fn v_norm_integral(pot: &Potential, x: f64) -> f64 {
    let rule = GaussRule::legendre(16);
    pot.segments
        .iter()
        .filter(|s| s.hi > x)
        .map(|s| {
            rule.composite(s.lo.max(x), s.hi, 16)
                .into_iter()
                .map(|(t, w)| {
                    let [a, b, c] = s.at(t);
                    w * crate::potential::spectral_norm(a, b, c)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Per-term bounds for `n = 0..=n_max` and the tail beyond `n_max`.
fn volterra_bounds(point: &SpectralPoint, pot: &Potential, x: f64, n_max: usize) -> (Vec<f64>, f64) {
    let k0 = point.k0().norm();
    let eta = point.k.im;
    let k1 = k0.max(1.0 / k0);
    let k2 = k0.max(1.0);
    let s = k1 * v_norm_integral(pot, x);
    let pre = ((pot.gamma - x) * (eta.abs() - eta)).exp() * k2;
    let mut bounds = Vec::with_capacity(n_max + 1);
    let mut term = pre;
    for n in 0..=n_max {
        if n > 0 {
            term *= s / n as f64;
        }
        bounds.push(term);
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        term *= s / n as f64;
        tail += term;
        if term <= 1e-18 * tail || term == 0.0 || n > n_max + 400 {
            break;
        }
        n += 1;
    }
    (bounds, tail)
}

/// Smallest order whose tail bound is below `tol`, capped at 30.
pub fn volterra_order(point: &SpectralPoint, pot: &Potential, x: f64, tol: f64) -> usize {
    (1..=30)
        .find(|&n| volterra_bounds(point, pot, x, n).1 < tol)
        .unwrap_or(30)
}

/// The first `n_max + 1` Volterra iterates at `x`, with their certified bounds.
pub fn volterra_series(
    x: f64,
    point: &SpectralPoint,
    pot: &Potential,
    n_max: usize,
    tol: f64,
) -> Result<VolterraSeries> {
    let n_max = n_max.max(1);
    let x = x.clamp(0.0, pot.gamma);
    let k = point.k;
    let k0 = point.k0();
    let m = pot.m;
    let lambda = point.lambda;
    let zero = C64::new(0.0, 0.0);
    let psi = |t: f64| {
        let e = (I * k * t).exp();
        [e * k0, e]
    };
    let free = system([0.0; 3], lambda, m);
    let mut g = vec![zero; 2 * n_max];
    let groups = vec![0usize; n_max];
    let cap = step_cap(lambda, pot);
    for (cell_lo, hi, idx) in pot.cells().into_iter().rev() {
        if hi <= x {
            continue;
        }
        let lo = cell_lo.max(x);
        match idx {
            None => {
                let t = plane::free_fundamental(lo - hi, lambda, m);
                for n in 0..n_max {
                    let ny = apply(&t, [g[2 * n], g[2 * n + 1]]);
                    g[2 * n] = ny[0];
                    g[2 * n + 1] = ny[1];
                }
            }
            Some(i) => {
                let seg = &pot.segments[i];
                let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
                    let [p1, p2, q] = seg.at(t);
                    // A − A₀ = [[−q, −p2], [p1, q]]
                    let g0 = psi(t);
                    for n in 0..n_max {
                        let prev = if n == 0 { g0 } else { [y[2 * n - 2], y[2 * n - 1]] };
                        let (u0, u1) = (y[2 * n], y[2 * n + 1]);
                        dy[2 * n] = free[0][1] * u1 - q * prev[0] - p2 * prev[1];
                        dy[2 * n + 1] = free[1][0] * u0 + p1 * prev[0] + q * prev[1];
                    }
                };
                ode::integrate(rhs, hi, lo, &mut g, &groups, Tolerance::relative(tol), cap)?;
            }
        }
    }
    let unwrap = (-I * k * x).exp();
    let mut terms = vec![[k0, C64::new(1.0, 0.0)]];
    for n in 0..n_max {
        terms.push([g[2 * n] * unwrap, g[2 * n + 1] * unwrap]);
    }
    let (term_bounds, tail_bound) = volterra_bounds(point, pot, x, n_max);
    Ok(VolterraSeries {
        x,
        terms,
        term_bounds,
        tail_bound,
    })
}

// ---------------------------------------------------------------------------
// High-energy coefficient

/// `B(λ) = B₀ + B₁(λ)` in `f⁺(0, λ) = k₀ e^{iΩ₀}(1 − B/(2iλ) + O(λ⁻²))`.
///
/// `B₁ = ∫₀^γ e^{2i(kx − Φ(x))}(w̄' − 2ivw̄) dx` with `Φ = ∫₀ˣ v`, `w̄ = q − ip`;
/// a jump `Δw̄` at `x_j` contributes `e^{2i(kx_j − Φ(x_j))} Δw̄`, including the
/// drop to zero at `γ`. Segments with `v ≡ 0` are integrated exactly; the others
/// use Gauss–Legendre panels resolving `e^{2ikx}`.
pub fn asymptotic_b(point: &SpectralPoint, pot: &Potential) -> C64 {
    let scalars = crate::potential::derived_scalars(pot);
    scalars.b0 + asymptotic_b1(point, pot)
}

/// The oscillatory part `B₁(λ)` of [`asymptotic_b`].
pub fn asymptotic_b1(point: &SpectralPoint, pot: &Potential) -> C64 {
    let k = point.k;
    let two_ik = 2.0 * I * k;
    let rule = GaussRule::legendre(20);
    let mut total = C64::new(0.0, 0.0);
    for seg in &pot.segments {
        let h = seg.len();
        let v = seg.v();
        let p = seg.p();
        let dq = poly::derivative(&seg.q);
        let dp = poly::derivative(&p);
        let phi_lo = pot.v_integral_to(seg.lo);
        if poly::is_zero(&v) {
            // integrand e^{2ik(lo+u) − 2iΦ(lo)} (q' − i p')(u)
            let base = (two_ik * seg.lo - 2.0 * I * phi_lo).exp();
            let re = poly::exp_moment(&dq, h, two_ik);
            let im = poly::exp_moment(&dp, h, two_ik);
            total += base * (re - I * im);
        } else {
            let v_anti = poly::antiderivative(&v);
            let pieces = 2 + ((k.norm() + poly::abs_bound(&v, h)) * h) as usize;
            for (x, w) in rule.composite(seg.lo, seg.hi, pieces) {
                let u = x - seg.lo;
                let phase = two_ik * x - 2.0 * I * (phi_lo + poly::eval(&v_anti, u));
                let wb = C64::new(poly::eval(&seg.q, u), -poly::eval(&p, u));
                let dwb = C64::new(poly::eval(&dq, u), -poly::eval(&dp, u));
                let vv = poly::eval(&v, u);
                total += w * phase.exp() * (dwb - 2.0 * I * vv * wb);
            }
        }
    }
    for (x, d) in pot.jumps() {
        let dwb = C64::new(d[2], -0.5 * (d[0] - d[1]));
        let phase = two_ik * x - 2.0 * I * pot.v_integral_to(x);
        total += phase.exp() * dwb;
    }
    total
}

// ---------------------------------------------------------------------------
// Growth along the imaginary axis

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// `λ = ir`, physical sheet.
    Upper,
    /// `λ = −ir`, continued into `ℂ₋`.
    Lower,
}

/// Least-squares slope of `log|f⁺₁(0, ±ir)|` against `r` over `radii`.
pub fn exponential_type_estimate(
    pot: &Potential,
    direction: Direction,
    radii: &[f64],
    opts: &JostOptions,
) -> Result<f64> {
    if radii.len() < 2 {
        return Err(Error::Precondition("need at least two radii".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    if direction == Direction::Lower && 2.0 * pot.gamma * r_max > MAX_EXPONENT {
        return Err(Error::Precondition(format!(
            "|f₁| ~ e^(2γr) overflows at r = {r_max}"
        )));
    }
    let logs = radii
        .iter()
        .map(|&r| {
            let (lambda, sheet) = match direction {
                Direction::Upper => (C64::new(0.0, r), Sheet::Physical),
                Direction::Lower => (C64::new(0.0, -r), Sheet::NonPhysical),
            };
            let point = SpectralPoint::new(lambda, sheet, pot.m)?;
            Ok(jost_value(&point, pot, opts)?[0].norm().ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = radii.len() as f64;
    let mx = radii.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxy: f64 = radii.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = radii.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::{transfer_matrix_closed_form, PiecewiseConstantPotential};

    fn pt(re: f64, im: f64) -> SpectralPoint {
        SpectralPoint::at(C64::new(re, im), 1.0).unwrap()
    }

    #[test]
    fn free_potential_is_exact() {
        let p = fixtures::free();
        let point = pt(0.4, 2.0);
        let j = jost_function(&point, &p, &JostOptions::default()).unwrap();
        assert_eq!(j.f1, point.k0());
        let (t, f) = fundamental_tilde(C64::new(3.0, -1.0), &p, 1e-10).unwrap();
        assert_eq!((t[0], f[1]), (C64::new(1.0, 0.0), C64::new(1.0, 0.0)));
    }

    #[test]
    fn matches_closed_form_transfer_matrices() {
        for pot in fixtures::piecewise_constant_family() {
            let oracle = PiecewiseConstantPotential::from_potential(&pot).unwrap();
            for &(re, im) in &[(2.0, 1.0), (3.0, -2.0), (-4.0, 0.5), (0.3, 0.0), (-0.5, -3.0)] {
                let point = SpectralPoint::at(C64::new(re, im), pot.m).unwrap();
                let j = jost_function(&point, &pot, &JostOptions::default()).unwrap();
                let o = transfer_matrix_closed_form(&oracle, &point);
                assert!((j.f1 - o.f1()).norm() <= 1e-9 * o.f1().norm(), "λ = {re}+{im}i");
                let th = j.theta1.unwrap();
                assert!((th - o.theta[0]).norm() <= 1e-9 * o.theta.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
    }

    #[test]
    fn wronskians_are_conserved() {
        let p = fixtures::smooth_bump();
        let (t, f) = fundamental_tilde(C64::new(0.0, 0.0), &p, 1e-10).unwrap();
        assert!((t[0] * f[1] - t[1] * f[0] - 1.0).norm() < 1e-10);
        for &l in &[1.5, 3.0, -2.0, -7.5] {
            let j = jost_function(&pt(l, 0.0), &p, &JostOptions::default()).unwrap();
            assert!(j.wronskian_residual.unwrap() < 1e-8);
            let fm = j.f_minus.unwrap();
            assert!((fm[0] - j.f1.conj()).norm() < 1e-9 * j.f1.norm());
        }
    }

    #[test]
    fn tilde_solutions_are_real_for_real_lambda() {
        let p = fixtures::smooth_bump();
        let (t, f) = fundamental_tilde(C64::new(0.37, 0.0), &p, 1e-10).unwrap();
        assert!(t[0].im.abs() < 1e-14 && f[0].im.abs() < 1e-14);
    }

    #[test]
    fn schwarz_reflection() {
        let p = fixtures::smooth_bump();
        let a = pt(2.0, 0.7);
        let fa = jost_value(&a, &p, &JostOptions::default()).unwrap()[0];
        // f(λ̄) on the continued branch is the conjugate of the solution with −k̄.
        let b = a.conjugate();
        let fb = jost_value(&b, &p, &JostOptions::default()).unwrap()[0];
        let fminus = jost_function(&a, &p, &JostOptions::default()).unwrap().f_minus.unwrap()[0];
        assert!((fb.conj() - fminus).norm() < 1e-9 * fminus.norm());
        assert!(fa.norm() > 0.0);
    }

    #[test]
    fn high_energy_route_agrees_with_direct_route() {
        for pot in [fixtures::smooth_bump(), fixtures::step_q()] {
            for &(re, im) in &[(60.0, 0.0), (-80.0, 0.0), (70.0, 5.0), (90.0, -4.0), (3.0, -60.0), (0.0, 120.0)] {
                let point = pt(re, im);
                let d = jost_value(&point, &pot, &JostOptions::direct_only(1e-12)).unwrap()[0];
                let (h, _) = interaction_picture(&point, &pot, 1e-12).unwrap();
                assert!((d - h[0]).norm() < 1e-9 * d.norm(), "λ = {re}+{im}i: {d} vs {}", h[0]);
            }
        }
    }

    #[test]
    fn volterra_series_within_certified_tail() {
        let p = fixtures::step_q();
        let point = pt(2.0, 1.0);
        let s = volterra_series(0.0, &point, &p, 12, 1e-12).unwrap();
        let f = jost_value(&point, &p, &JostOptions::with_tol(1e-12)).unwrap();
        let sum = s.sum();
        assert!((sum[0] - f[0]).norm() <= s.tail_bound + 1e-9);
        for (t, b) in s.terms.iter().zip(&s.term_bounds) {
            assert!(t[0].norm().max(t[1].norm()) <= *b * (1.0 + 1e-12));
        }
        let small = p.scaled(1e-3).unwrap();
        let n = volterra_order(&point, &small, 0.0, 1e-12);
        assert!(n <= 3);
    }

    #[test]
    fn high_energy_terms_decay_and_reconstruct() {
        let p = fixtures::smooth_bump();
        let point = pt(50.0, 0.0);
        let e = high_energy_y(0.0, &point, &p, 4, 1e-12).unwrap();
        let sum = e.terms.iter().fold([C64::new(0.0, 0.0); 2], |a, t| [a[0] + t[0], a[1] + t[1]]);
        let omega0 = p.v_integral_to(1.0);
        let f1 = (I * omega0).exp() * point.k0() * (sum[0] + sum[1]);
        let direct = jost_value(&point, &p, &JostOptions::direct_only(1e-12)).unwrap()[0];
        assert!((f1 - direct).norm() < 1e-8 * direct.norm());
        for n in 0..e.terms.len() {
            let t = &e.terms[n];
            assert!(t[0].norm().hypot(t[1].norm()) <= e.bounds[n] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn variational_derivative_matches_difference_quotient() {
        let p = fixtures::smooth_bump();
        let lambda = C64::new(0.4, 0.3);
        let [_, _, dt, dp] = fundamental_tilde_with_derivative(lambda, &p, 1e-12).unwrap();
        let h = 1e-5;
        let (tp, pp) = fundamental_tilde(lambda + h, &p, 1e-12).unwrap();
        let (tm, pm) = fundamental_tilde(lambda - h, &p, 1e-12).unwrap();
        assert!(((tp[0] - tm[0]) / (2.0 * h) - dt[0]).norm() < 1e-6);
        assert!(((pp[0] - pm[0]) / (2.0 * h) - dp[0]).norm() < 1e-6);
        let point = pt(1.7, 0.4);
        let (_, df) = jost_with_derivative(&point, &p, 1e-12).unwrap();
        let fp = jost_value(&pt(1.7 + h, 0.4), &p, &JostOptions::with_tol(1e-12)).unwrap()[0];
        let fm = jost_value(&pt(1.7 - h, 0.4), &p, &JostOptions::with_tol(1e-12)).unwrap()[0];
        assert!(((fp - fm) / (2.0 * h) - df[0]).norm() < 1e-6);
    }

    #[test]
    fn step_potential_coefficient_has_jump_term() {
        // q ≡ 1 on [0, 1]: B₁ = −e^{2ik}.
        let p = fixtures::step_q();
        let point = pt(7.0, 0.0);
        let b1 = asymptotic_b1(&point, &p);
        assert!((b1 + (2.0 * I * point.k).exp()).norm() < 1e-14);
        assert!((asymptotic_b(&point, &p) - (C64::new(2.0, 0.0) + b1)).norm() < 1e-14);
    }
}
