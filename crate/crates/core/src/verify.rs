//! The acceptance suite: fourteen numbered criteria, each reduced to a list of
//! named checks with a value, a limit and a margin.
//!
//! A criterion passes when every one of its checks does. Checks are never
//! relaxed to make a criterion pass; where a stated expectation is contradicted
//! by the numerics the failing check is kept and a note explains what was
//! observed instead.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::fredholm::{self, DetOptions};
use crate::jost::{self, Direction, JostOptions};
use crate::oracle::{transfer_matrix_closed_form, PiecewiseConstantPotential};
use crate::plane::{Rect, SpectralPoint, C64};
use crate::potential::{gauge_transform, Potential};
use crate::scattering;
use crate::states::{self, FinderOptions, StateClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            relation: Relation::AtMost,
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            relation: Relation::AtLeast,
            passed: value >= limit,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
            relation: Relation::Holds,
            passed: ok,
        }
    }

    /// Signed distance to the limit relative to the limit; negative on failure.
    pub fn margin(&self) -> f64 {
        let scale = if self.limit != 0.0 { self.limit.abs() } else { 1.0 };
        match self.relation {
            Relation::AtMost => (self.limit - self.value) / scale,
            Relation::AtLeast => (self.value - self.limit) / scale,
            Relation::Holds => {
                if self.passed {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// Smallest check margin.
    pub margin: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl Verdict {
    /// One line for terminal output.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!(
            "[{status}] criterion {:>2}: {:<38} margin {:>+10.3e}  ({:.1} s)",
            self.id, self.title, self.margin, self.seconds
        );
        if let Some(e) = &self.error {
            s.push_str(&format!("  error: {e}"));
        } else if !self.passed {
            let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            s.push_str(&format!("  failed: {}", failed.join("; ")));
        }
        s
    }
}

pub const CRITERIA: [(u8, &str); 14] = [
    (1, "free-operator exactness"),
    (2, "oracle equivalence"),
    (3, "Wronskian conservation"),
    (4, "continuity of F across the cut"),
    (5, "resonance counting law"),
    (6, "antibound parity and F' at eigenvalues"),
    (7, "forbidden domain"),
    (8, "high-energy expansion"),
    (9, "exponential type"),
    (10, "determinant identities"),
    (11, "determinant bounds"),
    (12, "Hilbert-Schmidt certificate"),
    (13, "relativistic integral"),
    (14, "gauge invariance"),
];

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Potential for the criteria that are not tied to a named fixture.
    pub potential: Potential,
    /// Criteria to run; all when `None`.
    pub only: Option<Vec<u8>>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            potential: fixtures::step_q(),
            only: None,
        }
    }
}

struct Outcome {
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

pub fn run_criterion(id: u8, opts: &SuiteOptions) -> Verdict {
    let title = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, t)| *t)
        .unwrap_or("unknown criterion");
    let start = Instant::now();
    let result = match id {
        1 => free_exactness(),
        2 => oracle_equivalence(),
        3 => wronskian(&opts.potential),
        4 => continuity_across_cut(&opts.potential),
        5 => counting(&opts.potential),
        6 => antibound_parity(),
        7 => forbidden_domain(),
        8 => high_energy(),
        9 => exponential_type(&opts.potential),
        10 => determinant_identities(&opts.potential),
        11 => determinant_bounds(&opts.potential),
        12 => hs_certificate(&opts.potential),
        13 => relativistic_integral(),
        14 => gauge_invariance(),
        _ => Err(Error::Precondition(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut out, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (Outcome::new(), Some(e.to_string())),
    };
    if let Some(limit) = runtime_limit(id) {
        out.check(Check::at_most("runtime [s]", seconds, limit));
    }
    let passed = error.is_none() && !out.checks.is_empty() && out.checks.iter().all(|c| c.passed);
    let margin = if error.is_some() {
        -1.0
    } else {
        out.checks.iter().map(Check::margin).fold(f64::INFINITY, f64::min)
    };
    Verdict {
        id,
        title,
        passed,
        margin,
        checks: out.checks,
        notes: out.notes,
        error,
        seconds,
    }
}

fn runtime_limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(1.0),
        2 => Some(30.0),
        5 => Some(600.0),
        10 => Some(300.0),
        _ => None,
    }
}

/// Runs the selected criteria in order.
pub fn run_suite(opts: &SuiteOptions) -> Vec<Verdict> {
    CRITERIA
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| opts.only.as_ref().is_none_or(|o| o.contains(id)))
        .map(|id| run_criterion(id, opts))
        .collect()
}

fn tight() -> JostOptions {
    JostOptions::with_tol(1e-12)
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------

fn free_exactness() -> Result<Outcome> {
    let pot = fixtures::free();
    let m = pot.m;
    let mut out = Outcome::new();
    let jopts = tight();
    let points = [C64::new(2.0, 1.0), C64::new(-3.0, 0.5), C64::new(0.3, 2.0), C64::new(1.5, -1.0), C64::new(-0.2, -2.0)];
    let mut jost_err = 0.0f64;
    let mut f_err = 0.0f64;
    let mut d_err = 0.0f64;
    for &z in &points {
        let p = SpectralPoint::at(z, m)?;
        jost_err = jost_err.max((jost::jost_value(&p, &pot, &jopts)?[0] - p.k0()).norm());
        f_err = f_err.max((states::f_eval(z, &pot, &jopts)? - (z + m)).norm());
        d_err = d_err.max((fredholm::det2(z, &pot, &DetOptions::default())?.value - 1.0).norm());
    }
    out.check(Check::at_most("|f₁ − k₀|", jost_err, 1e-10));
    out.check(Check::at_most("|F − (λ + m)|", f_err, 1e-10));
    out.check(Check::at_most("|D − 1|", d_err, 1e-10));
    let mut omega_err = 0.0f64;
    let mut s_err = 0.0f64;
    for x in [-20.0, -2.0, 1.2, 3.0, 50.0] {
        omega_err = omega_err.max(scattering::omega(x, &pot)?.abs());
        s_err = s_err.max((scattering::scattering_matrix(x, &pot, &jopts)? - 1.0).norm());
    }
    out.check(Check::at_most("|Ω|", omega_err, 1e-10));
    out.check(Check::at_most("|S − 1|", s_err, 1e-10));
    let found = states::find_states(&pot, &Rect::new(-3.0, 3.0, -2.0, 1.0)?, &FinderOptions::default())?;
    let single = found.len() == 1
        && found[0].class == StateClass::Virtual
        && found[0].multiplicity == 1
        && (found[0].lambda + m).norm() <= 1e-10;
    out.check(Check::holds("single simple virtual state at −m", single));
    Ok(out)
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut out = Outcome::new();
    let jopts = tight();
    for (i, pot) in fixtures::piecewise_constant_family().iter().enumerate() {
        let oracle = PiecewiseConstantPotential::from_potential(pot)
            .ok_or_else(|| Error::Precondition("fixture is not piecewise constant".into()))?;
        let grid: Vec<C64> = (0..100)
            .map(|j| {
                let r = 0.5 + 19.5 * ((j / 2) % 10) as f64 / 9.0;
                let t = 0.07 + (PI - 0.14) * ((j / 20) as f64 + 0.5 * (j % 2) as f64) / 5.0;
                let z = C64::from_polar(r, t);
                if j % 2 == 0 { z } else { z.conj() }
            })
            .collect();
        let errs = grid
            .par_iter()
            .map(|&z| {
                let p = SpectralPoint::at(z, pot.m)?;
                let a = jost::jost_value(&p, pot, &jopts)?[0];
                let b = transfer_matrix_closed_form(&oracle, &p).f1();
                Ok((a - b).norm() / b.norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        out.check(Check::at_most(format!("fixture {}: sup relative |Δf₁|", i + 1), max_of(errs), 1e-8));
    }
    Ok(out)
}

fn wronskian(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let m = pot.m;
    for (name, p) in [("suite potential", pot.clone()), ("smooth bump", fixtures::smooth_bump())] {
        let grid: Vec<f64> = (0..50)
            .map(|i| {
                let t = (i / 2) as f64 / 24.0;
                let x = m + 0.01 + (40.0 - m) * t * t;
                if i % 2 == 0 { x } else { -x }
            })
            .collect();
        let res = grid
            .par_iter()
            .map(|&x| {
                let j = jost::jost_function(&SpectralPoint::real(x, m)?, &p, &JostOptions::direct_only(1e-12))?;
                j.wronskian_residual.ok_or_else(|| Error::Numerical("no f⁻ on this route".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.check(Check::at_most(format!("{name}: max |det(f⁺, f⁻) − 2k₀|"), max_of(res), 1e-8));
    }
    Ok(out)
}

fn continuity_across_cut(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let m = pot.m;
    let eps = 1e-6;
    let jopts = tight();
    let mut grid: Vec<f64> = (0..20).map(|i| -m + 0.02 + (2.0 * m - 0.04) * i as f64 / 19.0).collect();
    grid.extend((0..20).map(|i| {
        let x = m + 0.05 + 20.0 * (i / 2) as f64 / 9.0;
        if i % 2 == 0 { x } else { -x }
    }));
    let rows = grid
        .par_iter()
        .map(|&x| {
            let (f0, df) = states::f_eval_with_derivative(C64::new(x, 0.0), pot, 1e-12)?;
            let up = states::f_product(C64::new(x, eps), pot, &jopts)?;
            let down = states::f_product(C64::new(x, -eps), pot, &jopts)?;
            let shift = C64::new(0.0, eps) * df;
            let jump = (up - f0 - shift).norm().max((down - f0 + shift).norm());
            Ok((jump, (up - down).norm(), (x.abs() < m) as usize))
        })
        .collect::<Result<Vec<(f64, f64, usize)>>>()?;
    let gap = max_of(rows.iter().filter(|r| r.2 == 1).map(|r| r.0));
    let ac = max_of(rows.iter().filter(|r| r.2 == 0).map(|r| r.0));
    out.check(Check::at_most("gap: |F(λ ± iε) − F(λ) ∓ iεF'(λ)|", gap, 1e-8));
    out.check(Check::at_most("continuous spectrum: |F(λ ± iε) − F(λ) ∓ iεF'(λ)|", ac, 1e-8));
    out.note(format!(
        "F(λ ± iε) from the product of Jost functions on each side, F and F' on the axis from the regular solutions; \
         the raw difference |F(λ+iε) − F(λ−iε)| = 2ε|F'| + O(ε³) reaches {:.3e}",
        max_of(rows.iter().map(|r| r.1))
    ));
    Ok(out)
}

fn counting(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let rep = states::counting_report(pot, &[100.0, 200.0], 0.2, &FinderOptions::default())?;
    let ratios = rep.ratios();
    let frac = rep.outlier_fractions();
    out.check(Check::at_least("N(200)/(2·200γ/π) lower", ratios[1], 0.9));
    out.check(Check::at_most("N(200)/(2·200γ/π) upper", ratios[1], 1.1));
    out.check(Check::at_most("outlier fraction r=200 minus r=100", frac[1] - frac[0], -f64::MIN_POSITIVE));
    out.note(format!(
        "counts {:?} against {:.2?}; sector outliers {:?} (δ = 0.2)",
        rep.counts, rep.predicted, rep.sector_outliers
    ));
    Ok(out)
}

fn antibound_parity() -> Result<Outcome> {
    let mut out = Outcome::new();
    let pot = fixtures::deep_well();
    let m = pot.m;
    let opts = FinderOptions::default();
    let found = states::find_states(&pot, &Rect::new(-m - 0.05, m + 0.05, -0.03, 0.03)?, &opts)?;
    let eig: Vec<f64> = found
        .iter()
        .filter(|s| s.class == StateClass::Eigenvalue)
        .map(|s| s.lambda.re)
        .collect();
    out.check(Check::at_least("eigenvalues in the gap", eig.len() as f64, 2.0));
    for w in eig.windows(2) {
        let r = states::antibound_parity(&pot, w[0], w[1], &opts.jost)?;
        let n = r.count();
        out.check(Check::holds(
            format!("antibound count in ({:.6}, {:.6}) is odd and ≥ 1 (found {n})", w[0], w[1]),
            n % 2 == 1,
        ));
    }
    for &e in &eig {
        let d = states::f_derivative_at(e, &pot, 1e-12)?;
        let printed = -d.norming;
        out.check(Check::at_most(format!("F'({e:.6}) < 0"), d.finite_difference, 0.0));
        out.check(Check::at_most(
            format!("F'({e:.6}) against −2|k|‖f⁺‖²/f₂⁺(0)², relative"),
            (d.finite_difference - printed).abs() / printed.abs(),
            1e-3,
        ));
        out.check(Check::at_most(
            format!("|F'({e:.6})| against 2|k|‖f⁺‖²/f₂⁺(0)², relative"),
            (d.finite_difference.abs() - d.norming).abs() / d.norming,
            1e-3,
        ));
    }
    out.note(
        "F' is positive at every eigenvalue and equals +2|k|‖f⁺‖²/f₂⁺(0)²: difference quotient, variational \
         derivative and norming constant agree, so the expected negative sign does not hold",
    );
    Ok(out)
}

fn forbidden_domain() -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = FinderOptions::default();
    for (name, pot) in [("smooth bump", fixtures::smooth_bump()), ("smooth q", fixtures::smooth_q())] {
        let found = states::find_states(&pot, &Rect::new(-40.0, 40.0, -10.0, 0.5)?, &opts)?;
        let res: Vec<_> = found.into_iter().filter(|s| s.class == StateClass::Resonance).collect();
        let rep = states::forbidden_domain_check(&pot, &res, 200.0, &opts.jost)?;
        out.check(Check::at_least(format!("{name}: resonances found"), res.len() as f64, 1.0));
        let worst = rep.resonances.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
        out.check(Check::at_least(format!("{name}: smallest rhs/lhs of the domain inequality"), worst, 1.0));
        out.note(format!(
            "{name}: {} resonances, {} violations, d0 = {:.6}, d1 = {:.6}, C1 = {:.4} (outer tenth {:.4}), smallest rhs/lhs {:.3}",
            res.len(),
            rep.violations(),
            rep.d0,
            rep.d1,
            rep.c1,
            rep.c1_outer,
            worst
        ));
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn high_energy() -> Result<Outcome> {
    let mut out = Outcome::new();
    let jopts = JostOptions::with_tol(1e-13);
    for (name, pot) in [("smooth bump", fixtures::smooth_bump()), ("smooth q", fixtures::smooth_q())] {
        // sup of λ²·residual over each octave of [50, 800]
        let mut centers = Vec::new();
        let mut env_jost = Vec::new();
        let mut env_phase = Vec::new();
        for j in 0..4 {
            let lo = 50.0 * 2f64.powi(j);
            let rows = (0..100)
                .into_par_iter()
                .map(|i| {
                    let l = lo * (1.0 + i as f64 / 100.0);
                    let r = scattering::expansion_residual(l, &pot, &jopts)?;
                    Ok((l * l * r.jost, l * l * r.phase))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            centers.push(lo * 2f64.sqrt());
            env_jost.push(max_of(rows.iter().map(|r| r.0)));
            env_phase.push(max_of(rows.iter().map(|r| r.1)));
        }
        let sj = loglog_slope(&centers, &env_jost) - 2.0;
        let sp = loglog_slope(&centers, &env_phase) - 2.0;
        out.check(Check::at_most(format!("{name}: slope of Jost residual"), sj, -1.8));
        out.check(Check::at_most(format!("{name}: slope of phase residual"), sp, -1.8));
        out.note(format!(
            "{name}: octave sup of λ²·residual, Jost {env_jost:.4?}, phase {env_phase:.4?}"
        ));
    }
    Ok(out)
}

fn exponential_type(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = pot.gamma;
    let radii: Vec<f64> = (0..11).map(|i| (50.0 + 25.0 * i as f64) / g).collect();
    let jopts = tight();
    let lower = jost::exponential_type_estimate(pot, Direction::Lower, &radii, &jopts)?;
    let upper = jost::exponential_type_estimate(pot, Direction::Upper, &radii, &jopts)?;
    out.check(Check::at_most("|type along −ir − 2γ|/2γ", (lower - 2.0 * g).abs() / (2.0 * g), 0.05));
    out.check(Check::at_most("|type along +ir|", upper.abs(), 0.05));
    Ok(out)
}

fn determinant_identities(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = DetOptions::default();
    let lams = [-12.0, -7.0, -4.0, -2.5, -1.5, 1.5, 2.5, 4.0, 7.0, 12.0];
    let rows = lams
        .par_iter()
        .map(|&l| fredholm::identity_s_from_d(l, pot, &opts))
        .collect::<Result<Vec<_>>>()?;
    out.check(Check::at_most(
        "max |S − D(λ−i0)/D(λ+i0)·e^{−2iΩ}|",
        max_of(rows.iter().map(|r| r.diff)),
        5e-3,
    ));
    out.check(Check::at_most(
        "max dist(φ_sc − Ω − arg D(λ+i0), πℤ)",
        max_of(rows.iter().map(|r| r.phase_gap)),
        5e-3,
    ));
    let smooth = fixtures::smooth_bump();
    let points = [C64::new(1.0, 1.0), C64::new(-2.0, 0.5), C64::new(0.0, 3.0), C64::new(5.0, 0.3), C64::new(-0.5, 2.0)];
    let rows = points
        .par_iter()
        .map(|&z| fredholm::identity_a_eq_d(z, &smooth, &opts, 400.0))
        .collect::<Result<Vec<_>>>()?;
    out.check(Check::at_most(
        "smooth bump: max |f₁ − k₀D e^{iΩ₀ + Cauchy}|/|f₁|",
        max_of(rows.iter().map(|r| r.rel_diff)),
        1e-2,
    ));
    Ok(out)
}

fn determinant_bounds(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = DetOptions::default();
    let grid: Vec<C64> = [-6.0, -2.0, -0.5, 0.5, 2.0, 6.0]
        .iter()
        .flat_map(|&x| [0.3, 1.0, 4.0, -1.0].map(|y| C64::new(x, y)))
        .collect();
    let mut margin = f64::INFINITY;
    for p in [pot.clone(), fixtures::smooth_bump(), fixtures::deep_well()] {
        let evals = grid
            .par_iter()
            .map(|&z| fredholm::det2(z, &p, &opts))
            .collect::<Result<Vec<_>>>()?;
        margin = margin.min(evals.iter().map(|e| e.bound_margin).fold(f64::INFINITY, f64::min));
    }
    out.check(Check::at_least("min e^{‖A‖²/2} − |det₂(A)| over the grid", margin, 0.0));

    let z = C64::new(0.0, 200.0);
    let d = fredholm::det2(z, pot, &DetOptions::with_nodes(400))?;
    let j = fredholm::det2_jost_route(z, pot, &JostOptions::with_tol(1e-13))?;
    out.check(Check::at_most("|D(200i) − 1|, Nyström N = 400", (d.value - 1.0).norm(), 1e-3));
    out.check(Check::at_most("|D(200i) − 1|, Jost route", (j - 1.0).norm(), 1e-3));
    let near = fredholm::det2_jost_route(C64::new(0.0, 20.0), pot, &JostOptions::with_tol(1e-13))?;
    out.note(format!(
        "D(200i) = {:.6} by Nyström, {:.6} by the Jost route; (D(20i) − 1)/(D(200i) − 1) = {:.3}, so D(it) − 1 decays like 1/t",
        d.value,
        j,
        (near - 1.0).norm() / (j - 1.0).norm()
    ));

    // The series is summed from the traces of the same N-node matrix whose
    // determinant is `raw`; the extrapolated value differs from both by the
    // discretization error, which exceeds the certificate high in ℂ₊.
    for z in [C64::new(0.0, 30.0), C64::new(0.0, 50.0), C64::new(20.0, 30.0)] {
        let ts = fredholm::det2_trace_series(z, pot, &opts, 8)?;
        let d = fredholm::det2(z, pot, &opts)?;
        let gap = (d.raw.ln() - ts.log_d).norm();
        let cert = ts
            .remainder
            .ok_or_else(|| Error::Precondition(format!("ε ≥ 1 at {z}")))?;
        let cert_matrix = ts
            .remainder_matrix
            .ok_or_else(|| Error::Precondition(format!("matrix ε ≥ 1 at {z}")))?;
        out.check(Check::at_most(format!("|log det₂ − series| / ε^9/(9(1−ε)) at {z}"), gap / cert, 1.0));
        out.check(Check::at_most(
            format!("|log det₂ − series| / matrix remainder at {z}"),
            gap / cert_matrix,
            1.0,
        ));
    }
    Ok(out)
}

fn hs_certificate(pot: &Potential) -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = DetOptions::with_nodes(400);
    let set = [
        C64::new(0.0, 2.0),
        C64::new(3.0, 1.0),
        C64::new(-4.0, 0.7),
        C64::new(0.5, 5.0),
        C64::new(10.0, 3.0),
        C64::new(-1.5, 0.5),
        C64::new(1.5, 0.5),
        C64::new(-8.0, 2.0),
        C64::new(20.0, 1.0),
        C64::new(0.3, -1.0),
    ];
    for (name, p) in [("suite potential", pot.clone()), ("smooth bump", fixtures::smooth_bump()), ("deep well", fixtures::deep_well())] {
        let ratios = set
            .par_iter()
            .map(|&z| {
                let c = fredholm::hs_norm_certificate(z, &p, &opts)?;
                Ok(c.hs_norm_sq / c.bound)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.check(Check::at_most(format!("{name}: max ‖VR₀‖² / leading bound"), max_of(ratios), 1.1));
    }
    let ts: Vec<f64> = (1..=8).map(|j| 2f64.powi(j)).collect();
    let hs = ts
        .par_iter()
        .map(|&t| fredholm::hs_norm_sq(C64::new(0.0, t), pot, &opts))
        .collect::<Result<Vec<f64>>>()?;
    out.check(Check::holds("‖VR₀(it)‖² decreasing in t", hs.windows(2).all(|w| w[1] < w[0])));
    out.check(Check::at_most("‖VR₀(256i)‖² / ‖VR₀(2i)‖²", hs[hs.len() - 1] / hs[0], 0.05));
    Ok(out)
}

fn relativistic_integral() -> Result<Outcome> {
    let mut out = Outcome::new();
    let m = 1.0;
    let mut set = Vec::new();
    for r in [5.0, 10.0, 20.0, 40.0, 80.0] {
        for t in [0.1, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            set.push(C64::from_polar(r, t));
        }
    }
    let rows = set
        .par_iter()
        .map(|&z| fredholm::relativistic_integral(z, m, 1e-12))
        .collect::<Result<Vec<_>>>()?;
    let scale = |z: C64| {
        let a = 1.0 / z.norm_sqr();
        a.max(1.0 / (z - m).norm_sqr()).max(1.0 / (z + m).norm_sqr())
    };
    let c_fit = max_of(set.iter().zip(&rows).map(|(&z, r)| r.diff / scale(z)));
    out.check(Check::at_most("fitted C against 2π/|Im λ|·|Re(λ/√(λ²−m²))|", c_fit, 10.0 * m));
    let c_one = max_of(set.iter().zip(&rows).map(|(&z, r)| (r.numeric - r.one_pole).abs() / scale(z)));
    out.note(format!(
        "the quadrature equals π/|Im λ|·|Re(λ/√(λ²−m²))| with fitted C = {c_one:.2e}; the term with 2π is twice the integral"
    ));
    let conj = set
        .iter()
        .zip(&rows)
        .map(|(&z, r)| Ok((fredholm::relativistic_integral(z.conj(), m, 1e-12)?.numeric - r.numeric).abs() / r.numeric))
        .collect::<Result<Vec<f64>>>()?;
    out.check(Check::at_most("conjugation symmetry, relative", max_of(conj), 1e-9));
    Ok(out)
}

fn gauge_invariance() -> Result<Outcome> {
    let mut out = Outcome::new();
    let pot = fixtures::gauge_fixture();
    let g = gauge_transform(&pot)?;
    let jopts = tight();
    let points: Vec<C64> = (0..20)
        .map(|i| {
            let x = -8.0 + 16.0 * (i / 2) as f64 / 9.0 + 0.13;
            C64::new(x, if i % 2 == 0 { 1.5 } else { -1.0 })
        })
        .collect();
    let diffs = points
        .par_iter()
        .map(|&z| {
            let p = SpectralPoint::at(z, pot.m)?;
            Ok((jost::jost_value(&p, &pot, &jopts)?[0] - jost::jost_value(&p, &g, &jopts)?[0]).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    out.check(Check::at_most("max |f₁(V) − f₁(gauge V)|", max_of(diffs), 1e-8));
    Ok(out)
}
