//! Heat kernels of hyperbolic space built from the one-dimensional
//! Gaussian by the dimension-raising recursion
//! `p_{d+2}(σ, t) = -(4π)^{-1} ∂_σ p_d(σ, t)` (odd `d`) and the
//! dimension-lowering transform
//! `p_d(σ, t) = 2 ∫_σ^∞ p_{d+1}(λ, t) (λ - σ)^{-1/2} dλ` (even `d`),
//! with `σ = cosh²(ρ/2)`. The recursion constants are used as they stand,
//! so `p_3` is `e^t` times the standard (mass-one) kernel.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Largest dimension served by default.
pub const D_MAX: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelEval {
    pub d: usize,
    pub t: f64,
    pub rho: f64,
    pub sigma: f64,
    pub value: f64,
}

impl HeatKernelEval {
    pub fn new(d: usize, rho: f64, t: f64) -> Result<Self> {
        Ok(HeatKernelEval {
            d,
            t,
            rho,
            sigma: sigma_of_rho(rho),
            value: heat_kernel(d, rho, t)?,
        })
    }
}

/// `cosh²(ρ/2)`.
pub fn sigma_of_rho(rho: f64) -> f64 {
    let c = (0.5 * rho).cosh();
    c * c
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(())
}

/// `(4πt)^{-1/2} e^{-ρ²/4t}`.
pub fn p1(rho: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((4.0 * std::f64::consts::PI * t).powf(-0.5) * (-rho * rho / (4.0 * t)).exp())
}

/// `p_d(ρ, t)` for `1 <= d <= D_MAX`.
pub fn heat_kernel(d: usize, rho: f64, t: f64) -> Result<f64> {
    heat_kernel_with_max(d, rho, t, D_MAX)
}

pub fn heat_kernel_with_max(d: usize, rho: f64, t: f64, d_max: usize) -> Result<f64> {
    check_time(t)?;
    if d < 1 || d > d_max {
        return Err(Error::Domain(format!("dimension must lie in 1..={d_max}, got {d}")));
    }
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("distance must be nonnegative, got {rho}")));
    }
    if d % 2 == 1 {
        Ok(odd_kernel((d - 1) / 2, rho, t))
    } else {
        Ok(even_from_odd(rho, t, |r| odd_kernel(d / 2, r, t)))
    }
}

/// Taylor coefficients of `a(c) = arccosh(c) / sqrt(c² - 1)` at `c0`,
/// orders `0..=n`.
fn a_coefficients(c0: f64, n: usize) -> Vec<f64> {
    if c0 <= 1.5 {
        // Series about c = 1: a = Σ b_j (c-1)^j, b_j = -j b_{j-1}/(2j+1),
        // convergent for |c - 1| < 2; re-expanded about c0.
        let y0 = c0 - 1.0;
        let terms = 80;
        let mut b = vec![1.0; terms];
        for j in 1..terms {
            b[j] = -(j as f64) * b[j - 1] / (2.0 * j as f64 + 1.0);
        }
        (0..=n)
            .map(|k| {
                let mut sum = 0.0;
                let mut binom = 1.0; // C(j, k) for j = k
                let mut pow = 1.0; // y0^{j-k}
                for j in k..terms {
                    if j > k {
                        binom *= j as f64 / (j - k) as f64;
                        pow *= y0;
                    }
                    sum += b[j] * binom * pow;
                }
                sum
            })
            .collect()
    } else {
        // (c² - 1) a' + c a = 1 in Taylor form.
        let s2 = c0 * c0 - 1.0;
        let mut a = Vec::with_capacity(n + 1);
        a.push(c0.acosh() / s2.sqrt());
        for k in 0..n {
            let prev = if k > 0 { a[k - 1] } else { 0.0 };
            let rhs = if k == 0 { 1.0 } else { 0.0 } - (2.0 * k as f64 + 1.0) * c0 * a[k] - k as f64 * prev;
            a.push(rhs / (s2 * (k as f64 + 1.0)));
        }
        a
    }
}

/// `p_{2m+1}(ρ, t) = (-1/2π)^m (4πt)^{-1/2} ∂_c^m e^{-arccosh(c)²/4t}` at
/// `c = cosh ρ`, by Taylor-mode differentiation.
fn odd_kernel(m: usize, rho: f64, t: f64) -> f64 {
    let c0 = rho.cosh();
    let a = a_coefficients(c0, m);
    // q = -g/(4t), g = arccosh(c)², g' = 2a.
    let mut q = vec![0.0; m + 1];
    q[0] = -rho * rho / (4.0 * t);
    for k in 0..m {
        q[k + 1] = -2.0 * a[k] / ((k as f64 + 1.0) * 4.0 * t);
    }
    let mut e = vec![0.0; m + 1];
    e[0] = q[0].exp();
    for k in 1..=m {
        let s: f64 = (1..=k).map(|j| j as f64 * q[j] * e[k - j]).sum();
        e[k] = s / k as f64;
    }
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    (-0.5 / std::f64::consts::PI).powi(m as i32) * (4.0 * std::f64::consts::PI * t).powf(-0.5) * factorial * e[m]
}

/// `2 ∫_σ^∞ p_{d+1}(λ) (λ - σ)^{-1/2} dλ` for a kernel given as a function
/// of distance. With `ρ' = ρ + v²` the endpoint singularity disappears:
/// `λ - σ = sinh(ρ + v²/2) sinh(v²/2)` and `dλ = sinh(ρ')/2 · 2v dv`.
fn even_from_odd(rho: f64, t: f64, kernel: impl Fn(f64) -> f64) -> f64 {
    // Beyond this distance the Gaussian factor is below e^{-100} of its
    // value at ρ, whatever the growth of the Jacobian.
    let rho_max = (rho * rho + 400.0 * t).sqrt() + 10.0;
    let v_max = (rho_max - rho).sqrt();
    let integrand = |v: f64| -> f64 {
        let v2 = v * v;
        let rp = rho + v2;
        let half = 0.5 * v2;
        // sinh(v²/2)/v² → 1/2 as v → 0.
        let shv = if half < 1e-8 {
            0.5 * (1.0 + half * half / 6.0)
        } else {
            half.sinh() / v2
        };
        let denom = ((rho + half).sinh() * shv).sqrt();
        if denom == 0.0 {
            // ρ = 0 and v = 0: sinh(v²/2)/v ~ v/2 on both factors.
            return kernel(rp) * 2.0;
        }
        // v / sqrt(sinh(ρ+v²/2) sinh(v²/2)) = 1 / sqrt(sinh(ρ+v²/2) · sinh(v²/2)/v²)
        kernel(rp) * rp.sinh() / denom
    };
    let (val, _) = integrate(integrand, 0.0, v_max, 0.0, 1e-11);
    2.0 * val
}

/// Applies the dimension-lowering transform to an arbitrary kernel `p_{d+1}`.
pub fn lower_dimension(rho: f64, t: f64, upper: impl Fn(f64) -> f64) -> Result<f64> {
    check_time(t)?;
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("distance must be nonnegative, got {rho}")));
    }
    Ok(even_from_odd(rho, t, upper))
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub d: usize,
    pub t: f64,
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    /// Strictly decreasing along the grid.
    pub decreasing: bool,
    pub nonnegative: bool,
}

pub fn monotonicity_check(d: usize, t: f64, rho_grid: &[f64]) -> Result<MonotonicityReport> {
    check_time(t)?;
    if rho_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("distance grid must be strictly increasing".into()));
    }
    let values = rho_grid
        .iter()
        .map(|&r| heat_kernel(d, r, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonotonicityReport {
        d,
        t,
        rho: rho_grid.to_vec(),
        decreasing: values.windows(2).all(|w| w[1] < w[0]),
        nonnegative: values.iter().all(|&v| v >= 0.0),
        values,
    })
}

/// Relative gap between the directly built odd kernel `p_d` and the one
/// obtained by lowering twice from `p_{d+2}` through `p_{d+1}`.
pub fn recursion_consistency(d: usize, rho: f64, t: f64) -> Result<f64> {
    if d % 2 == 0 || d + 2 > D_MAX {
        return Err(Error::Domain(format!(
            "consistency check needs odd d with d + 2 <= {D_MAX}, got {d}"
        )));
    }
    let direct = heat_kernel(d, rho, t)?;
    let upper = |r: f64| heat_kernel(d + 1, r, t).unwrap_or(f64::NAN);
    let lowered = lower_dimension(rho, t, upper)?;
    Ok((lowered - direct).abs() / direct.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn p1_reference_values() {
        assert!((p1(0.0, 1.0 / (4.0 * PI)).unwrap() - 1.0).abs() < 1e-15);
        let v = p1(2.0, 1.0).unwrap();
        assert!((v - (4.0 * PI).powf(-0.5) * (-1.0f64).exp()).abs() < 1e-16);
        assert!(p1(1.0, 0.0).is_err());
        for t in [0.1, 1.0] {
            let (mass, _) = integrate(|x| p1(x.abs(), t).unwrap(), -40.0, 40.0, 1e-14, 1e-14);
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn d1_is_p1() {
        for rho in [0.0, 0.5, 3.0] {
            assert_eq!(heat_kernel(1, rho, 0.7).unwrap(), p1(rho, 0.7).unwrap());
        }
        assert!(heat_kernel(0, 1.0, 1.0).is_err());
        assert!(heat_kernel(8, 1.0, 1.0).is_err());
        assert!(heat_kernel(3, 1.0, -1.0).is_err());
    }

    #[test]
    fn d3_closed_form() {
        // e^t × (4πt)^{-3/2} (ρ/sinh ρ) e^{-t - ρ²/4t}.
        for t in [0.1, 1.0, 10.0] {
            for rho in [0.0, 0.3, 1.0, 1.2, 5.0] {
                let ratio = if rho == 0.0 { 1.0 } else { rho / f64::sinh(rho) };
                let exact = (4.0 * PI * t).powf(-1.5) * ratio * (-rho * rho / (4.0 * t)).exp();
                let v = heat_kernel(3, rho, t).unwrap();
                assert!((v / exact - 1.0).abs() < 1e-13, "t={t} rho={rho}");
            }
        }
    }

    #[test]
    fn d3_matches_numeric_sigma_derivative() {
        // p_3 = -(4π)^{-1} (dσ/dρ)^{-1} ∂_ρ p_1 with dσ/dρ = sinh ρ / 2.
        for t in [0.1, 1.0, 10.0] {
            for rho in [0.2, 1.0, 1.4, 4.0] {
                let e = 1e-5;
                let dp = (p1(rho + e, t).unwrap() - p1(rho - e, t).unwrap()) / (2.0 * e);
                let numeric = -dp / (4.0 * PI * 0.5 * f64::sinh(rho));
                let v = heat_kernel(3, rho, t).unwrap();
                assert!((numeric / v - 1.0).abs() < 1e-8, "t={t} rho={rho}");
            }
        }
    }

    #[test]
    fn odd_branches_agree_at_switch() {
        let rho = 1.5f64.acosh();
        for m in 1..=3 {
            let a = odd_kernel(m, rho * (1.0 - 1e-12), 0.5);
            let b = odd_kernel(m, rho * (1.0 + 1e-12), 0.5);
            assert!((a / b - 1.0).abs() < 1e-10, "m={m}");
        }
    }

    #[test]
    fn d2_matches_independent_quadrature() {
        // λ = σ + tan²θ turns the transform into 2∫_0^{π/2} 2 p3(σ+tan²θ) sec²θ dθ,
        // integrated here with composite Simpson.
        for t in [0.1, 1.0] {
            for rho in [0.0, 0.7, 2.5] {
                let sigma = sigma_of_rho(rho);
                let p3_sigma = |s: f64| heat_kernel(3, 2.0 * s.sqrt().acosh(), t).unwrap();
                let f = |th: f64| {
                    if th >= 0.5 * PI {
                        return 0.0;
                    }
                    let tn = th.tan();
                    2.0 * p3_sigma(sigma + tn * tn) / (th.cos() * th.cos())
                };
                let n = 20_000;
                let hh = 0.5 * PI / n as f64;
                let mut s = f(0.0) + f(0.5 * PI);
                for k in 1..n {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * hh);
                }
                let oracle = 2.0 * s * hh / 3.0;
                let v = heat_kernel(2, rho, t).unwrap();
                assert!((v / oracle - 1.0).abs() < 1e-6, "t={t} rho={rho}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn monotone_and_nonnegative() {
        let grid: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
        for d in 1..=5 {
            for t in [0.1, 1.0, 10.0] {
                let rep = monotonicity_check(d, t, &grid).unwrap();
                assert!(rep.decreasing && rep.nonnegative, "d={d} t={t}");
            }
        }
        assert!(monotonicity_check(2, 1.0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn recursion_cross_consistency() {
        for d in [1, 3] {
            for t in [0.1, 1.0] {
                for rho in [0.0, 1.0, 3.0] {
                    let gap = recursion_consistency(d, rho, t).unwrap();
                    assert!(gap < 1e-6, "d={d} t={t} rho={rho}: {gap}");
                }
            }
        }
    }

    #[test]
    fn eval_record() {
        let e = HeatKernelEval::new(3, 2.0, 1.0).unwrap();
        assert_eq!(e.sigma, f64::cosh(1.0).powi(2));
        assert!(e.value > 0.0);
    }
}
