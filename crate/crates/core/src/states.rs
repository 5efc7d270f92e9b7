//! The entire function `F(λ) = (λ − m) f₁⁺(0, λ) f₁⁻(0, λ)`, its zeros
//! (eigenvalues, antibound states, virtual states and resonances), and zero
//! counting for the Jost function in the lower half-plane.
//!
//! `F` is evaluated as `(λ + m)ϑ̃₁² + (λ − m)φ̃₁²` near the real axis. Far from
//! it both squares grow like `e^{2γ|Im λ|}` and cancel, so there `F` is the
//! product of `f₁⁺` and `f₁⁻`, each integrated from its own data at `γ`.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jost::{self, JostOptions};
use crate::ode::{self, Tolerance};
use crate::plane::{Rect, Sheet, SpectralPoint, C64};
use crate::potential::{derived_scalars, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum StateClass {
    Eigenvalue,
    Resonance,
    Antibound,
    Virtual,
}

impl StateClass {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eigenvalue => "eigenvalue",
            Self::Resonance => "resonance",
            Self::Antibound => "antibound",
            Self::Virtual => "virtual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateRecord {
    pub lambda: C64,
    pub k: C64,
    pub class: StateClass,
    pub multiplicity: u32,
    /// `|F|` at the refined root.
    pub residual: f64,
    pub newton_iters: u32,
    /// Set when the finder stopped at the separation floor with winding > 1,
    /// so the record may be a close pair rather than a multiple root.
    pub unresolved_cluster: bool,
}

/// A zero of `F` anywhere in the plane, before classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    pub lambda: C64,
    pub multiplicity: u32,
    pub residual: f64,
    pub newton_iters: u32,
    pub unresolved_cluster: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinderOptions {
    pub jost: JostOptions,
    /// Newton stops when the step is below `newton_tol (1 + |λ|)`.
    pub newton_tol: f64,
    /// Largest phase increment of `F` accepted between neighbouring samples.
    pub phase_step: f64,
    /// Rectangles are not split below `separation_floor (1 + |λ|)`.
    pub separation_floor: f64,
    pub max_depth: usize,
    /// Multiplies the boundary sampling density; 2 re-verifies a count.
    pub density: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            jost: JostOptions::with_tol(1e-12),
            newton_tol: 1e-13,
            phase_step: std::f64::consts::FRAC_PI_4,
            separation_floor: 1e-6,
            max_depth: 60,
            density: 1.0,
        }
    }
}

/// `γ |Im λ|` above which `F` is taken as a product of Jost functions.
const PRODUCT_ROUTE: f64 = 2.0;

/// `F(λ)`; entire, real on the real axis, `F = λ + m` for `V = 0`.
pub fn f_eval(lambda: C64, pot: &Potential, opts: &JostOptions) -> Result<C64> {
    if pot.segments.is_empty() {
        return Ok(lambda + pot.m);
    }
    if pot.gamma * lambda.im.abs() <= PRODUCT_ROUTE {
        let (t, p) = jost::fundamental_tilde(lambda, pot, opts.tol)?;
        return Ok((lambda + pot.m) * t[0] * t[0] + (lambda - pot.m) * p[0] * p[0]);
    }
    f_product(lambda, pot, opts)
}

/// `F(λ) = (λ − m) f₁⁺(0, λ) f₁⁻(0, λ)` from the two Jost functions, whatever
/// the distance to the real axis.
pub fn f_product(lambda: C64, pot: &Potential, opts: &JostOptions) -> Result<C64> {
    let point = SpectralPoint::at(lambda, pot.m)?;
    let fp = jost::jost_value(&point, pot, opts)?[0];
    let fm = jost::jost_value(&point.conjugate(), pot, opts)?[0].conj();
    Ok((lambda - pot.m) * fp * fm)
}

/// `F(λ)` and `F'(λ)` from the variational equations.
pub fn f_eval_with_derivative(lambda: C64, pot: &Potential, tol: f64) -> Result<(C64, C64)> {
    let m = pot.m;
    if pot.segments.is_empty() {
        return Ok((lambda + m, C64::new(1.0, 0.0)));
    }
    if pot.gamma * lambda.im.abs() <= PRODUCT_ROUTE {
        let [t, p, dt, dp] = jost::fundamental_tilde_with_derivative(lambda, pot, tol)?;
        let f = (lambda + m) * t[0] * t[0] + (lambda - m) * p[0] * p[0];
        let df = t[0] * t[0] + p[0] * p[0] + 2.0 * (lambda + m) * t[0] * dt[0] + 2.0 * (lambda - m) * p[0] * dp[0];
        return Ok((f, df));
    }
    let point = SpectralPoint::at(lambda, m)?;
    let (a, da) = jost::free_jost_with_derivative(&point, pot.gamma, 1.0);
    let (b, db) = jost::free_jost_with_derivative(&point, pot.gamma, -1.0);
    let out = jost::propagate(pot, lambda, &[a, b], Some(&[da, db]), tol)?;
    let dy = out.dy.expect("derivatives requested");
    let (fp, fm, dfp, dfm) = (out.y[0][0], out.y[1][0], dy[0][0], dy[1][0]);
    Ok(((lambda - m) * fp * fm, fp * fm + (lambda - m) * (dfp * fm + fp * dfm)))
}

// ---------------------------------------------------------------------------
// Phase tracking

/// Accumulates `arg f` along the polyline `path`, bisecting any piece whose
/// phase increment exceeds `step`. Returns the total change in radians.
pub(crate) fn phase_change<F>(f: &F, path: &[C64], step: f64, max_depth: usize) -> Result<f64>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let values = path.par_iter().map(|&z| checked(f, z)).collect::<Result<Vec<C64>>>()?;
    let pieces = (0..path.len().saturating_sub(1))
        .into_par_iter()
        .map(|i| refine(f, path[i], path[i + 1], values[i], values[i + 1], step, max_depth))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pieces.iter().sum())
}

fn checked<F>(f: &F, z: C64) -> Result<C64>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let v = f(z)?;
    if v == C64::new(0.0, 0.0) {
        return Err(Error::ZeroOnContour(z));
    }
    if !v.is_finite() {
        return Err(Error::Numerical(format!("non-finite value at {z}")));
    }
    Ok(v)
}

/// `arg(b/a)` in `(−π, π]` without forming `|a|²`, which overflows near `1e154`.
fn arg_step(a: C64, b: C64) -> f64 {
    let d = b.arg() - a.arg();
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else if d <= -std::f64::consts::PI {
        d + std::f64::consts::TAU
    } else {
        d
    }
}

fn refine<F>(f: &F, a: C64, b: C64, fa: C64, fb: C64, step: f64, depth: usize) -> Result<f64>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let d = arg_step(fa, fb);
    if d.abs() <= step {
        return Ok(d);
    }
    if depth == 0 || (b - a).norm() <= 1e-13 * (1.0 + a.norm()) {
        return Err(Error::ZeroOnContour(0.5 * (a + b)));
    }
    let mid = 0.5 * (a + b);
    let fm = checked(f, mid)?;
    Ok(refine(f, a, mid, fa, fm, step, depth - 1)? + refine(f, mid, b, fm, fb, step, depth - 1)?)
}

fn winding(total_phase: f64) -> Result<i64> {
    let w = total_phase / std::f64::consts::TAU;
    let r = w.round();
    if (w - r).abs() > 1e-6 {
        return Err(Error::Numerical(format!("non-integer winding {w}")));
    }
    Ok(r as i64)
}

// ---------------------------------------------------------------------------
// Zero finding for F

struct Finder<'a> {
    pot: &'a Potential,
    opts: FinderOptions,
    cache: Mutex<HashMap<(u64, u64), C64>>,
    /// Lattice spacing of the boundary samples.
    h: f64,
}

impl<'a> Finder<'a> {
    fn new(pot: &'a Potential, opts: FinderOptions) -> Self {
        let h = 0.25 / (1.0 + 2.0 * pot.gamma) / opts.density.max(0.1);
        Self {
            pot,
            opts,
            cache: Mutex::new(HashMap::new()),
            h,
        }
    }

    fn f(&self, z: C64) -> Result<C64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = f_eval(z, self.pot, &self.opts.jost)?;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    /// Edge samples: the end points and the lattice `j h` strictly between them,
    /// so that edges shared by neighbouring rectangles reuse evaluations.
    fn edge(&self, a: C64, b: C64) -> Vec<C64> {
        let horizontal = a.im == b.im;
        let (s, t) = if horizontal { (a.re, b.re) } else { (a.im, b.im) };
        let (lo, hi) = (s.min(t), s.max(t));
        let mut inner: Vec<f64> = ((lo / self.h).floor() as i64 + 1..=(hi / self.h).ceil() as i64 - 1)
            .map(|j| j as f64 * self.h)
            .filter(|&u| u > lo && u < hi)
            .collect();
        if s > t {
            inner.reverse();
        }
        let mut out = vec![a];
        out.extend(inner.into_iter().map(|u| {
            if horizontal {
                C64::new(u, a.im)
            } else {
                C64::new(a.re, u)
            }
        }));
        out
    }

    fn rect_winding(&self, r: &Rect) -> Result<i64> {
        let c = r.corners();
        let mut path = Vec::new();
        for i in 0..4 {
            path.extend(self.edge(c[i], c[(i + 1) % 4]));
        }
        path.push(c[0]);
        let f = |z: C64| self.f(z);
        winding(phase_change(&f, &path, self.opts.phase_step, self.opts.max_depth)?)
    }

    fn newton(&self, start: C64, within: &Rect) -> Option<(C64, u32, f64)> {
        let mut z = start;
        let grow = Rect {
            re_min: within.re_min - within.width(),
            re_max: within.re_max + within.width(),
            im_min: within.im_min - within.height(),
            im_max: within.im_max + within.height(),
        };
        for it in 1..=60u32 {
            let (f, df) = f_eval_with_derivative(z, self.pot, self.opts.jost.tol).ok()?;
            if df == C64::new(0.0, 0.0) {
                return None;
            }
            let dz = f / df;
            z -= dz;
            if !grow.contains(z) || !z.is_finite() {
                return None;
            }
            if dz.norm() <= self.opts.newton_tol * (1.0 + z.norm()) {
                let res = f_eval(z, self.pot, &self.opts.jost).ok()?.norm();
                return within.contains(z).then_some((z, it, res));
            }
        }
        None
    }

    fn solve(&self, r: Rect, w: i64, depth: usize) -> Result<Vec<Zero>> {
        if w <= 0 {
            if w < 0 {
                return Err(Error::Numerical(format!("negative winding {w} in {r:?}")));
            }
            return Ok(vec![]);
        }
        if w == 1 {
            if let Some((z, it, res)) = self.newton(r.center(), &r) {
                return Ok(vec![Zero {
                    lambda: z,
                    multiplicity: 1,
                    residual: res,
                    newton_iters: it,
                    unresolved_cluster: false,
                }]);
            }
        }
        let size = r.width().max(r.height());
        if size <= self.opts.separation_floor * (1.0 + r.center().norm()) || depth >= self.opts.max_depth {
            let (z, it, res) = self
                .newton(r.center(), &r)
                .unwrap_or((r.center(), 0, self.f(r.center())?.norm()));
            return Ok(vec![Zero {
                lambda: z,
                multiplicity: w as u32,
                residual: res,
                newton_iters: it,
                unresolved_cluster: w > 1,
            }]);
        }
        let (a, b) = self.split(&r)?;
        let (wa, wb) = (self.rect_winding(&a)?, self.rect_winding(&b)?);
        if wa + wb != w {
            return Err(Error::Numerical(format!(
                "winding {w} of {r:?} splits as {wa} + {wb}"
            )));
        }
        let (za, zb) = rayon::join(|| self.solve(a, wa, depth + 1), || self.solve(b, wb, depth + 1));
        let mut out = za?;
        out.extend(zb?);
        Ok(out)
    }

    /// Splits across the longer side slightly off-centre; the split line is
    /// moved if it runs through a zero.
    fn split(&self, r: &Rect) -> Result<(Rect, Rect)> {
        let mut last = None;
        for frac in [0.4871, 0.5312, 0.4417, 0.5739] {
            let (a, b) = if r.width() >= r.height() {
                let x = r.re_min + frac * r.width();
                (Rect { re_max: x, ..*r }, Rect { re_min: x, ..*r })
            } else {
                let y = r.im_min + frac * r.height();
                (Rect { im_max: y, ..*r }, Rect { im_min: y, ..*r })
            };
            match (self.rect_winding(&a), self.rect_winding(&b)) {
                (Ok(_), Ok(_)) => return Ok((a, b)),
                (Err(e @ Error::ZeroOnContour(_)), _) | (_, Err(e @ Error::ZeroOnContour(_))) => last = Some(e),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Zeros of `F` in `region` with multiplicity, sorted by real then imaginary part.
///
/// The region boundary is moved outward by up to `1e−6` if it passes through a zero.
pub fn find_zeros(pot: &Potential, region: &Rect, opts: &FinderOptions) -> Result<Vec<Zero>> {
    let finder = Finder::new(pot, *opts);
    let mut rect = *region;
    let mut attempt = 0;
    let w = loop {
        match finder.rect_winding(&rect) {
            Ok(w) => break w,
            Err(Error::ZeroOnContour(z)) if attempt < 4 => {
                attempt += 1;
                let d = 2.5e-7 * attempt as f64 * (1.0 + z.norm());
                rect = Rect {
                    re_min: rect.re_min - d,
                    re_max: rect.re_max + d,
                    im_min: rect.im_min - d,
                    im_max: rect.im_max + d,
                };
            }
            Err(e) => return Err(e),
        }
    };
    let mut zeros = finder.solve(rect, w, 0)?;
    zeros.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
    Ok(zeros)
}

/// Winding number of `F` around `region` at the given sampling density.
pub fn winding_of_f(pot: &Potential, region: &Rect, opts: &FinderOptions) -> Result<i64> {
    Finder::new(pot, *opts).rect_winding(region)
}

/// Tolerance for treating a zero as real or as sitting on a threshold.
const REAL_SNAP: f64 = 1e-8;

/// Classifies a zero of `F` in the closed lower half-plane or on the real axis.
/// Zeros in `ℂ₊` mirror resonances and are classified as `None`.
pub fn classify(z: &Zero, pot: &Potential, opts: &JostOptions) -> Result<Option<StateRecord>> {
    let m = pot.m;
    let mut lambda = z.lambda;
    let snap = REAL_SNAP * (1.0 + lambda.norm());
    let record = |lambda: C64, k: C64, class| StateRecord {
        lambda,
        k,
        class,
        multiplicity: z.multiplicity,
        residual: z.residual,
        newton_iters: z.newton_iters,
        unresolved_cluster: z.unresolved_cluster,
    };
    for edge in [m, -m] {
        if (lambda - edge).norm() <= snap {
            // At +m the virtual state is θ̃₁(0, m) = 0, at −m it is φ̃₁(0, −m) = 0.
            let (t, p) = jost::fundamental_tilde(C64::new(edge, 0.0), pot, opts.tol)?;
            let probe = if edge > 0.0 { t[0] } else { p[0] };
            if probe.norm() <= 1e-6 * (1.0 + t[0].norm().max(p[0].norm())) {
                return Ok(Some(record(C64::new(edge, 0.0), C64::new(0.0, 0.0), StateClass::Virtual)));
            }
        }
    }
    if lambda.im.abs() <= snap {
        lambda.im = 0.0;
        if lambda.re.abs() < m {
            let up = SpectralPoint::new(lambda, Sheet::Physical, m)?;
            let down = SpectralPoint::new(lambda, Sheet::NonPhysical, m)?;
            let fu = jost::jost_value(&up, pot, opts)?[0].norm();
            let fd = jost::jost_value(&down, pot, opts)?[0].norm();
            return Ok(Some(if fu <= fd {
                record(lambda, up.k, StateClass::Eigenvalue)
            } else {
                record(lambda, down.k, StateClass::Antibound)
            }));
        }
        return Err(Error::Numerical(format!(
            "zero of F on the continuous spectrum at {lambda}"
        )));
    }
    if lambda.im > 0.0 {
        return Ok(None);
    }
    let point = SpectralPoint::new(lambda, Sheet::NonPhysical, m)?;
    Ok(Some(record(lambda, point.k, StateClass::Resonance)))
}

/// States of `H` among the zeros of `F` in `region`.
pub fn find_states(pot: &Potential, region: &Rect, opts: &FinderOptions) -> Result<Vec<StateRecord>> {
    let zeros = find_zeros(pot, region, opts)?;
    let mut out = Vec::new();
    for z in &zeros {
        if let Some(r) = classify(z, pot, &opts.jost)? {
            out.push(r);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Derivative at an eigenvalue

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub lambda: f64,
    /// Central differences with one Richardson step.
    pub finite_difference: f64,
    /// From the variational equations.
    pub variational: f64,
    /// `‖f⁺‖²` over `[0, ∞)`; the part beyond `γ` is in closed form.
    pub norm_sq: f64,
    pub f2: f64,
    /// `2|k| ‖f⁺‖² / f₂⁺(0)²`, the value implied by `(det(ḟ, f))' = f₁² + f₂²`
    /// and `det(f⁺, f⁻) = 2k₀`.
    pub norming: f64,
}

impl DerivativeCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.finite_difference - self.norming).abs() / self.norming.abs()
    }
}

/// `F'(λ)` at an eigenvalue `λ ∈ (−m, m)`, cross-checked three ways.
pub fn f_derivative_at(lambda: f64, pot: &Potential, tol: f64) -> Result<DerivativeCheck> {
    let m = pot.m;
    if !(lambda.abs() < m) {
        return Err(Error::Precondition(format!("{lambda} is not in the gap")));
    }
    if pot.segments.is_empty() {
        return Err(Error::Precondition("the free operator has no eigenvalues".into()));
    }
    let opts = JostOptions::direct_only(tol);
    let fr = |x: f64| -> Result<f64> { Ok(f_eval(C64::new(x, 0.0), pot, &opts)?.re) };
    let h = 1e-5 * (1.0 + lambda.abs());
    let d = |h: f64| -> Result<f64> { Ok((fr(lambda + h)? - fr(lambda - h)?) / (2.0 * h)) };
    let (d1, d2) = (d(h)?, d(0.5 * h)?);
    let finite_difference = (4.0 * d2 - d1) / 3.0;
    let variational = f_eval_with_derivative(C64::new(lambda, 0.0), pot, tol)?.1.re;

    let point = SpectralPoint::new(C64::new(lambda, 0.0), Sheet::Physical, m)?;
    let kappa = point.k.im;
    let k0 = point.k0().re;
    // f⁺ is real on the upper rim; integrate it with s' = −(f₁² + f₂²).
    let g = pot.gamma;
    let e = (-kappa * g).exp();
    let mut state = vec![C64::new(k0 * e, 0.0), C64::new(e, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let cap = jost::step_cap(point.lambda, pot);
    for (lo, hi, idx) in pot.cells().into_iter().rev() {
        let rhs = |x: f64, y: &[C64], dy: &mut [C64]| {
            let [p1, p2, q] = match idx {
                Some(i) => pot.segments[i].at(x),
                None => [0.0; 3],
            };
            dy[0] = -q * y[0] + (lambda + m - p2) * y[1];
            dy[1] = (m + p1 - lambda) * y[0] + q * y[1];
            dy[2] = -(y[0] * y[0] + y[1] * y[1]);
            dy[3] = C64::new(0.0, 0.0);
        };
        ode::integrate(rhs, hi, lo, &mut state, &[0, 1], Tolerance::relative(tol), cap)?;
    }
    let inner = state[2].re;
    let tail = e * e * (k0 * k0 + 1.0) / (2.0 * kappa);
    let norm_sq = inner + tail;
    let f2 = state[1].re;
    Ok(DerivativeCheck {
        lambda,
        finite_difference,
        variational,
        norm_sq,
        f2,
        norming: 2.0 * kappa * norm_sq / (f2 * f2),
    })
}

// ---------------------------------------------------------------------------
// Antibound states between eigenvalues

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub eig1: f64,
    pub eig2: f64,
    /// Antibound states strictly between the eigenvalues.
    pub roots: Vec<f64>,
    /// Smallest distance between neighbouring sign changes, or the interval
    /// length when there is at most one.
    pub min_gap: f64,
}

impl ParityReport {
    pub fn count(&self) -> usize {
        self.roots.len()
    }
}

/// Antibound states in `(eig1, eig2)`: sign changes of the real function
/// `f₁(0, λ − i0)` on a fine grid, each refined by bisection.
pub fn antibound_parity(pot: &Potential, eig1: f64, eig2: f64, opts: &JostOptions) -> Result<ParityReport> {
    let m = pot.m;
    if !(-m < eig1 && eig1 < eig2 && eig2 < m) {
        return Err(Error::Precondition(format!("need −m < {eig1} < {eig2} < m")));
    }
    let f = |x: f64| -> Result<f64> {
        let p = SpectralPoint::new(C64::new(x, 0.0), Sheet::NonPhysical, m)?;
        Ok(jost::jost_value(&p, pot, opts)?[0].re)
    };
    let n = 2000;
    let margin = 1e-9 * (eig2 - eig1);
    let (a, b) = (eig1 + margin, eig2 - margin);
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vs = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    let mut roots = Vec::new();
    for i in 0..n {
        if vs[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if vs[i] * vs[i + 1] < 0.0 {
            let (mut lo, mut hi, mut flo) = (xs[i], xs[i + 1], vs[i]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    let min_gap = roots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(eig2 - eig1, f64::min);
    Ok(ParityReport {
        eig1,
        eig2,
        roots,
        min_gap,
    })
}

// ---------------------------------------------------------------------------
// Counting resonances

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub radii: Vec<f64>,
    /// Zeros of `f₁⁺(0, ·)` in the lower half-disk of each radius.
    pub counts: Vec<i64>,
    /// `2rγ/π`.
    pub predicted: Vec<f64>,
    /// Zeros in the same half-disk outside the sectors `|arg λ| < δ`, `|arg λ ± π| < δ`.
    pub sector_outliers: Vec<i64>,
    pub delta: f64,
}

impl CountingReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.predicted)
            .map(|(&c, &p)| c as f64 / p)
            .collect()
    }

    pub fn outlier_fractions(&self) -> Vec<f64> {
        self.sector_outliers
            .iter()
            .zip(&self.counts)
            .map(|(&o, &c)| if c > 0 { o as f64 / c as f64 } else { 0.0 })
            .collect()
    }
}

/// Offset of the horizontal side below the real axis.
const AXIS_OFFSET: f64 = 1e-3;

fn f1_lower(pot: &Potential, opts: &JostOptions, z: C64) -> Result<C64> {
    let p = SpectralPoint::new(z, Sheet::NonPhysical, pot.m)?;
    Ok(jost::jost_value(&p, pot, opts)?[0])
}

/// Polygonal arc `r e^{iθ}` from `θ0` to `θ1`, spaced for the phase of `f₁`.
fn arc(r: f64, theta0: f64, theta1: f64, gamma: f64, density: f64) -> Vec<C64> {
    let len = r * (theta1 - theta0).abs();
    let n = ((len * (8.0 * gamma + 2.0) * density).ceil() as usize).max(16);
    (0..=n)
        .map(|i| {
            let t = theta0 + (theta1 - theta0) * i as f64 / n as f64;
            C64::from_polar(r, t)
        })
        .collect()
}

fn segment(a: C64, b: C64, spacing: f64) -> Vec<C64> {
    let n = (((b - a).norm() / spacing).ceil() as usize).max(2);
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

/// Zeros of `f₁⁺(0, ·)` in `{|λ| < r, Im λ < −η}` by the argument principle.
pub fn count_lower_half_disk(pot: &Potential, r: f64, opts: &FinderOptions) -> Result<i64> {
    let eta = AXIS_OFFSET;
    let th = (eta / r).asin();
    let g = pot.gamma;
    let mut path = arc(r, -std::f64::consts::PI + th, -th, g, opts.density);
    let right = *path.last().expect("nonempty");
    let left = path[0];
    let spacing = 0.1 / (1.0 + 2.0 * g) / opts.density;
    path.extend(segment(right, left, spacing).into_iter().skip(1));
    let f = |z: C64| f1_lower(pot, &opts.jost, z);
    winding(phase_change(&f, &path, opts.phase_step, opts.max_depth)?)
}

/// Zeros of `f₁⁺(0, ·)` in the sector `{|λ| < r, −π + δ < arg λ < −δ}` below `−iη`.
pub fn count_sector(pot: &Potential, r: f64, delta: f64, opts: &FinderOptions) -> Result<i64> {
    let apex = C64::new(0.0, -AXIS_OFFSET);
    let g = pot.gamma;
    let spacing = 0.1 / (1.0 + 2.0 * g) / opts.density;
    let a = C64::from_polar(r, -std::f64::consts::PI + delta);
    let b = C64::from_polar(r, -delta);
    let mut path = segment(apex, a, spacing);
    path.extend(arc(r, -std::f64::consts::PI + delta, -delta, g, opts.density).into_iter().skip(1));
    path.extend(segment(b, apex, spacing).into_iter().skip(1));
    let f = |z: C64| f1_lower(pot, &opts.jost, z);
    winding(phase_change(&f, &path, opts.phase_step, opts.max_depth)?)
}

/// Resonance counts against the law `2rγ/π`.
pub fn counting_report(pot: &Potential, radii: &[f64], delta: f64, opts: &FinderOptions) -> Result<CountingReport> {
    let mut counts = Vec::new();
    let mut outliers = Vec::new();
    for &r in radii {
        if 2.0 * pot.gamma * r > 650.0 {
            return Err(Error::Precondition(format!(
                "radius {r} overflows e^(2γr) in double precision"
            )));
        }
        counts.push(count_lower_half_disk(pot, r, opts)?);
        outliers.push(count_sector(pot, r, delta, opts)?);
    }
    Ok(CountingReport {
        radii: radii.to_vec(),
        predicted: radii.iter().map(|r| 2.0 * r * pot.gamma / std::f64::consts::PI).collect(),
        counts,
        sector_outliers: outliers,
        delta,
    })
}

// ---------------------------------------------------------------------------
// Forbidden domain

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForbiddenDomainReport {
    /// `m + p(0)`.
    pub d0: f64,
    /// `lim λ (F(λ) − λ − d0)`, fitted over the outer half of the grid.
    pub d1: f64,
    /// `sup |λ²(F(λ) − λ − d0 − d1/λ)|` over the grid.
    pub c1: f64,
    /// Supremum over the outer tenth of the grid; a value close to `c1` means
    /// the true supremum may lie beyond the grid.
    pub c1_outer: f64,
    pub grid_radius: f64,
    pub resonances: Vec<ForbiddenDomainEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForbiddenDomainEntry {
    pub lambda: C64,
    /// `|λ²(λ + d0 + d1/λ)|`.
    pub lhs: f64,
    /// `c1 e^{−2γ Im λ}`.
    pub rhs: f64,
    /// `rhs/lhs`; at least 1 when the bound holds.
    pub margin: f64,
    /// `−Im λ − log|Re λ|/γ`: the resonance lies in the strip
    /// `0 > Im λ ≥ −A − log|Re λ|/γ` exactly when `A` is at least this.
    pub strip_depth: f64,
}

impl ForbiddenDomainReport {
    pub fn violations(&self) -> usize {
        self.resonances.iter().filter(|e| e.margin < 1.0).count()
    }
}

/// Checks `|λ²(λ + d0 + d1/λ)| ≤ C₁ e^{−2γ Im λ}` for each resonance.
pub fn forbidden_domain_check(
    pot: &Potential,
    states: &[StateRecord],
    grid_radius: f64,
    opts: &JostOptions,
) -> Result<ForbiddenDomainReport> {
    if !pot.smooth {
        return Err(Error::Precondition("forbidden-domain bound needs a continuous potential".into()));
    }
    let d0 = pot.m + derived_scalars(pot).p0;
    let fr = |x: f64| -> Result<f64> { Ok(f_eval(C64::new(x, 0.0), pot, opts)?.re) };

    let step_inner = 0.02;
    let step_outer = 0.1 / pot.gamma;
    let mut xs = Vec::new();
    let mut x = -grid_radius;
    while x <= grid_radius {
        xs.push(x);
        x += if x.abs() < 20.0 { step_inner } else { step_outer };
    }
    let fs = xs.par_iter().map(|&x| fr(x)).collect::<Result<Vec<f64>>>()?;

    // λ(F − λ − d0) = d1 + c/λ + oscillating terms of order 1/λ; a least-squares
    // fit over the outer half of the grid averages the oscillation out.
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &f) in xs.iter().zip(&fs) {
        if x.abs() >= 0.5 * grid_radius {
            let (u, t) = (1.0 / x, x * (f - x - d0));
            s00 += 1.0;
            s01 += u;
            s11 += u * u;
            t0 += t;
            t1 += u * t;
        }
    }
    let d1 = (s11 * t0 - s01 * t1) / (s00 * s11 - s01 * s01);

    let vals: Vec<f64> = xs
        .iter()
        .zip(&fs)
        .map(|(&x, &f)| (x * x * (f - x - d0) - d1 * x).abs())
        .collect();
    let c1 = vals.iter().copied().fold(0.0, f64::max);
    let c1_outer = xs
        .iter()
        .zip(&vals)
        .filter(|(x, _)| x.abs() >= 0.9 * grid_radius)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let resonances = states
        .iter()
        .filter(|s| s.class == StateClass::Resonance)
        .map(|s| {
            let l = s.lambda;
            let lhs = (l * l * (l + d0 + d1 / l)).norm();
            let rhs = c1 * (-2.0 * pot.gamma * l.im).exp();
            ForbiddenDomainEntry {
                lambda: l,
                lhs,
                rhs,
                margin: rhs / lhs,
                strip_depth: -l.im - l.re.abs().ln() / pot.gamma,
            }
        })
        .collect();
    Ok(ForbiddenDomainReport {
        d0,
        d1,
        c1,
        c1_outer,
        grid_radius,
        resonances,
    })
}
