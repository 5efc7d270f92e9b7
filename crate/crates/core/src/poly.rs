//! Dense monomial polynomials `c[0] + c[1] u + ...` and exact integrals against
//! exponentials.

use num_complex::Complex64;

pub fn eval(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

pub fn eval_complex(c: &[f64], u: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * u + a)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(j, &a)| a * j as f64)
        .collect()
}

/// Antiderivative vanishing at `u = 0`.
pub fn antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    out.extend(c.iter().enumerate().map(|(j, &a)| a / (j + 1) as f64));
    out
}

/// `∫_0^h P(u) du`.
pub fn integral(c: &[f64], h: f64) -> f64 {
    eval(&antiderivative(c), h)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|j| a.get(j).copied().unwrap_or(0.0) + b.get(j).copied().unwrap_or(0.0))
        .collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|&x| x * s).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Product truncated to degree `deg`.
pub fn mul_trunc(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    let mut out = mul(a, b);
    out.truncate(deg + 1);
    out
}

/// Re-expands `P(u)` about `u = s`, i.e. returns `Q` with `Q(t) = P(s + t)`.
pub fn shift(c: &[f64], s: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    let n = out.len();
    // Repeated synthetic division.
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            out[j] += s * out[j + 1];
        }
    }
    out
}

pub fn is_zero(c: &[f64]) -> bool {
    c.iter().all(|&a| a == 0.0)
}

/// Upper bound of `|P(u)|` on `[0, h]`.
pub fn abs_bound(c: &[f64], h: f64) -> f64 {
    c.iter()
        .rev()
        .fold(0.0, |acc: f64, &a| acc * h.abs() + a.abs())
}

/// `∫_0^h P(u) e^{a u} du` for real coefficients and complex `a`, exact up to rounding.
///
/// Small `|a| h` uses the power series of the exponential; otherwise repeated
/// integration by parts, which terminates after `deg P + 1` terms.
pub fn exp_moment(c: &[f64], h: f64, a: Complex64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if c.is_empty() {
        return zero;
    }
    // Integration by parts cancels badly when |a h| is small next to the degree.
    let switch = 1.0f64.max(0.5 * (c.len() as f64 - 1.0));
    if (a * h).norm() <= switch {
        let mut total = zero;
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            // Σ_n a^n h^{n+j+1} / (n! (n+j+1))
            let mut term = Complex64::new(h.powi(j as i32 + 1), 0.0);
            let mut sum = zero;
            for n in 0..60 {
                let piece = term / (n + j + 1) as f64;
                sum += piece;
                if piece.norm() <= 1e-18 * sum.norm() {
                    break;
                }
                term = term * a * h / (n + 1) as f64;
            }
            total += sum * cj;
        }
        total
    } else {
        // ∫ P e^{au} = e^{au} Σ_i (-1)^i P^{(i)}(u) / a^{i+1}
        let boundary = |u: f64| -> Complex64 {
            let mut d = c.to_vec();
            let mut sum = zero;
            let mut sign = 1.0;
            let mut apow = a;
            while !d.is_empty() {
                sum += Complex64::new(eval(&d, u), 0.0) * sign / apow;
                d = derivative(&d);
                sign = -sign;
                apow *= a;
            }
            sum
        };
        (a * h).exp() * boundary(h) - boundary(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_matches_direct_evaluation() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let s = shift(&c, 0.7);
        for &t in &[0.0, 0.3, -1.2] {
            assert!((eval(&s, t) - eval(&c, 0.7 + t)).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_moment_both_regimes_agree_with_quadrature() {
        let c = [0.3, -1.0, 2.0];
        for &a in &[
            Complex64::new(0.0, 0.4),
            Complex64::new(0.0, 7.0),
            Complex64::new(-1.5, 3.0),
        ] {
            let h = 0.8;
            let n = 20000;
            let mut q = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let u = (i as f64 + 0.5) * h / n as f64;
                q += (a * u).exp() * eval(&c, u) * (h / n as f64);
            }
            assert!((exp_moment(&c, h, a) - q).norm() < 1e-7, "a = {a}");
        }
    }

    #[test]
    fn exp_moment_is_continuous_at_switch() {
        let c = [1.0, 0.5, -0.25, 0.125];
        let h = 1.0;
        let below = exp_moment(&c, h, Complex64::new(0.0, 1.5 - 1e-15));
        let above = exp_moment(&c, h, Complex64::new(0.0, 1.5 + 1e-15));
        assert!((below - above).norm() < 1e-13);
    }
}
