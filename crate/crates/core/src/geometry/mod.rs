//! Closed-form functions of the conjugation that maps the radial
//! hyperbolic Laplacian to a Euclidean radial operator with a potential.
//!
//! With `phi(r) = (r / sinh r)^((d-1)/2)` and `T u = phi u`,
//! `phi^-1 (-Δ_H) phi = -Δ_R^d + V_d(r) + ((d-1)/2)^2` on radial functions,
//! where `V_d = -((d-1)(d-3)/4) Ṽ` and `Ṽ = 1/r² - 1/sinh² r`.

mod grid;
mod params;
mod tables;

pub use grid::{conjugate, norms, Direction, FieldNorms, RadialField, RadialGrid, SpaceTag};
pub use params::{spectral_shift, ModelParams};
pub use tables::GeometryTables;

use std::f64::consts::PI;

/// Below this radius the `r / sinh r` family switches to Taylor series.
pub const SMALL_RADIUS: f64 = 1e-4;

/// `ln(r / sinh r)`, accurate for all `r >= 0`.
pub fn ln_r_over_sinh(r: f64) -> f64 {
    if r < SMALL_RADIUS {
        r_over_sinh_series(r).ln()
    } else if r < 20.0 {
        (r / r.sinh()).ln()
    } else {
        // sinh r = e^r (1 - e^{-2r}) / 2
        r.ln() - r + std::f64::consts::LN_2 - (-(-2.0 * r).exp()).ln_1p()
    }
}

fn r_over_sinh_series(r: f64) -> f64 {
    let x = r * r;
    1.0 - x / 6.0 + 7.0 * x * x / 360.0 - 31.0 * x.powi(3) / 15120.0 + 127.0 * x.powi(4) / 604_800.0
}

/// `phi(r) = (r / sinh r)^((d-1)/2)`; equals 1 at the origin.
pub fn eval_phi(r: f64, d: usize) -> f64 {
    debug_assert!(r >= 0.0);
    if d == 1 {
        return 1.0;
    }
    (0.5 * (d as f64 - 1.0) * ln_r_over_sinh(r)).exp()
}

/// `Ṽ(r) = (sinh² r - r²) / (r² sinh² r)`, with `Ṽ(0) = 1/3`.
pub fn eval_v_tilde(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r < SMALL_RADIUS {
        let x = r * r;
        1.0 / 3.0 - x / 15.0 + 2.0 * x * x / 189.0 - x.powi(3) / 675.0 + 2.0 * x.powi(4) / 10395.0
    } else if r < 1.0 {
        // sinh r - r by its series avoids the cancellation.
        let x = r * r;
        let mut term = r * x / 6.0;
        let mut excess = term;
        let mut k = 3.0;
        while term > 1e-18 * excess {
            term *= x / ((k + 1.0) * (k + 2.0));
            excess += term;
            k += 2.0;
        }
        let s = r.sinh();
        excess * (s + r) / (x * s * s)
    } else {
        let e = (-r).exp();
        let csch = 2.0 * e / (1.0 - e * e);
        1.0 / (r * r) - csch * csch
    }
}

/// `V_d(r) = (d-1)(d-3)/4 · (r² - sinh² r)/(r² sinh² r)`.
pub fn eval_potential(r: f64, params: &ModelParams) -> f64 {
    potential_for_dim(r, params.d)
}

pub(crate) fn potential_for_dim(r: f64, d: usize) -> f64 {
    let df = d as f64;
    -(df - 1.0) * (df - 3.0) / 4.0 * eval_v_tilde(r)
}

/// `mu_d + V_d(r)`, the effective potential of the conjugated problem.
pub fn effective_potential(r: f64, params: &ModelParams) -> f64 {
    params.mu + eval_potential(r, params)
}

/// `K̃(r) = phi(r)^p = (r / sinh r)^(p(d-1)/2)`.
pub fn eval_k_tilde(r: f64, params: &ModelParams) -> f64 {
    (0.5 * params.p * (params.d as f64 - 1.0) * ln_r_over_sinh(r)).exp()
}

/// The "offset" coefficient `a(r) = (r² - sinh² r)/(r² sinh² r) = -Ṽ(r)` of
/// the angular Laplacian. Recorded for completeness; radial problems never
/// apply it.
pub fn eval_offset(r: f64) -> f64 {
    -eval_v_tilde(r)
}

/// Surface measure `|S^{d-1}| = 2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1);
    // Γ(d/2) for integer d.
    let gamma_half = if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half
}

#[cfg(test)]
mod tests {
    use super::*;

    // High-precision reference values (40-digit arithmetic).
    const PHI_1_D2: f64 = 0.922_452_236_291_571_654_366_301_917_477_965;
    const PHI_5_D2: f64 = 0.259_581_449_939_985_952_912_482_229_708_376;
    const PHI_3_D4: f64 = 0.163_877_177_060_044_009_178_432_421_501_361;
    const VT: [(f64, f64); 7] = [
        (1e-5, 0.333_333_333_326_666_666_666_772_486_772),
        (1e-4, 0.333_333_332_666_666_667_724_867_723_386),
        (1e-3, 0.333_333_266_666_677_248_675_767_195_959),
        (0.5, 0.317_305_623_168_830_724_218_345_909_134),
        (1.0, 0.275_938_339_033_689_533_592_011_210_869),
        (2.0, 0.173_978_170_161_928_900_746_626_987_477),
        (20.0, 0.002_499_999_999_999_983_006_582_978_833),
    ];

    #[test]
    fn phi_reference_values() {
        assert_eq!(eval_phi(0.0, 3), 1.0);
        assert!((eval_phi(1.0, 2) - PHI_1_D2).abs() < 1e-15);
        assert!((eval_phi(5.0, 2) - PHI_5_D2).abs() < 1e-15);
        assert!((eval_phi(3.0, 4) - PHI_3_D4).abs() < 1e-15);
        assert!(eval_phi(800.0, 3) < 1e-300);
    }

    #[test]
    fn v_tilde_reference_values() {
        assert_eq!(eval_v_tilde(0.0), 1.0 / 3.0);
        for (r, v) in VT {
            let rel = (eval_v_tilde(r) - v).abs() / v;
            assert!(rel < 1e-13, "r = {r}: rel err {rel}");
        }
        assert!((eval_v_tilde(20.0) * 400.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn branches_agree_at_threshold() {
        let below = eval_v_tilde(SMALL_RADIUS * (1.0 - 1e-12));
        let above = eval_v_tilde(SMALL_RADIUS);
        assert!((below - above).abs() < 1e-12);
        let lo = (0.5 * ln_r_over_sinh(SMALL_RADIUS * (1.0 - 1e-12))).exp();
        let hi = (0.5 * ln_r_over_sinh(SMALL_RADIUS)).exp();
        assert!((lo - hi).abs() < 1e-12);
        assert!((eval_v_tilde(1.0 - 1e-12) - eval_v_tilde(1.0)).abs() < 1e-12);
    }

    #[test]
    fn potentials() {
        let p3 = ModelParams::new(3, 2.0, 1.0).unwrap();
        for r in [0.0, 0.3, 2.0, 15.0] {
            assert_eq!(eval_potential(r, &p3), 0.0);
            assert_eq!(effective_potential(r, &p3), 2.0);
        }
        let p2 = ModelParams::new(2, 1.0, 0.0).unwrap();
        assert!((eval_potential(0.0, &p2) - 1.0 / 12.0).abs() < 1e-15);
        assert!((effective_potential(0.0, &p2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((effective_potential(60.0, &p2) - 0.25).abs() < 1e-3);
        let p4 = ModelParams::new(4, 1.0, 0.0).unwrap();
        assert!((eval_potential(0.0, &p4) + 0.25).abs() < 1e-15);
        assert!((effective_potential(0.0, &p4) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn k_tilde() {
        let p = ModelParams::new(3, 2.0, 1.0).unwrap();
        assert_eq!(eval_k_tilde(0.0, &p), 1.0);
        for r in [0.5, 1.0, 4.0] {
            let expect = (r / f64::sinh(r)).powi(2);
            assert!((eval_k_tilde(r, &p) - expect).abs() < 1e-15);
        }
        let q = ModelParams::new(2, 1.0, 1.0).unwrap();
        assert!((eval_k_tilde(5.0, &q) - PHI_5_D2).abs() < 1e-15);
    }

    #[test]
    fn offset_is_negative_v_tilde() {
        for r in [0.0, 1e-3, 0.7, 3.0] {
            assert_eq!(eval_offset(r), -eval_v_tilde(r));
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }
}
