//! Symmetric decreasing rearrangement of radial samples on hyperbolic
//! space. A sample `f_i` stands for a constant on the cell
//! `[i h, (i+1) h]`, whose hyperbolic volume is computed exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sphere_area, RadialField, RadialGrid, SpaceTag};
use crate::quadrature::integrate;

/// `|S^{d-1}| ∫_0^r sinh^{d-1} s ds`, closed form for `d = 2, 3`.
pub fn ball_volume(r: f64, d: usize) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    if d < 1 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let s = sphere_area(d);
    Ok(match d {
        // 2π(cosh r - 1) = 4π sinh²(r/2)
        2 => s * 2.0 * (0.5 * r).sinh().powi(2),
        3 => {
            if r < 0.1 {
                // sinh(2r)/4 - r/2 = Σ_{k≥1} (2r)^{2k+1} / (4 (2k+1)!)
                let x = 2.0 * r;
                let x2 = x * x;
                let mut term = x * x2 / 6.0;
                let mut sum = 0.0;
                for k in 1..12 {
                    sum += term;
                    term *= x2 / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
                }
                s * sum / 4.0
            } else {
                s * ((2.0 * r).sinh() / 4.0 - 0.5 * r)
            }
        }
        _ => ball_volume_quadrature(r, d),
    })
}

/// `|S^{d-1}| ∫_0^r sinh^{d-1} s ds` by adaptive quadrature.
pub fn ball_volume_quadrature(r: f64, d: usize) -> f64 {
    let e = d as i32 - 1;
    let (v, _) = integrate(|s: f64| s.sinh().powi(e), 0.0, r, 0.0, 1e-14);
    sphere_area(d) * v
}

/// Hyperbolic volumes of the grid cells `[i h, (i+1) h]`.
pub fn cell_volumes(grid: &RadialGrid, d: usize) -> Vec<f64> {
    let h = grid.h();
    let e = d as i32 - 1;
    let s = sphere_area(d);
    (0..grid.n)
        .map(|i| {
            let (v, _) = integrate(|x: f64| x.sinh().powi(e), i as f64 * h, (i + 1) as f64 * h, 0.0, 1e-14);
            s * v
        })
        .collect()
}

/// Distribution function `t ↦ μ{|f| > t}` of a step function, stored as
/// the values sorted in decreasing order with their cumulative measure.
#[derive(Debug, Clone, Serialize)]
pub struct LevelFunction {
    pub sorted_values: Vec<f64>,
    /// `cumulative[k]` is the measure of the `k + 1` largest cells.
    pub cumulative: Vec<f64>,
}

impl LevelFunction {
    fn new(values: &[f64], volumes: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut acc = 0.0;
        let cumulative = order
            .iter()
            .map(|&i| {
                acc += volumes[i];
                acc
            })
            .collect();
        LevelFunction {
            sorted_values: order.iter().map(|&i| values[i]).collect(),
            cumulative,
        }
    }

    /// `μ{|f| > t}`.
    pub fn measure_above(&self, t: f64) -> f64 {
        let k = self.sorted_values.partition_point(|&v| v > t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RearrangementResult {
    pub d: usize,
    pub input: RadialField,
    pub f_star: RadialField,
    pub level_function: LevelFunction,
    pub cell_volumes: Vec<f64>,
}

impl RearrangementResult {
    /// Largest gap between `μ{|f| > t}` and `μ{f* > t}` over `levels`,
    /// in units of the larger of the cells where `f` and `f*` cross `t`.
    pub fn equimeasurability_defect(&self, levels: &[f64]) -> f64 {
        let star = LevelFunction::new(&self.f_star.values, &self.cell_volumes);
        levels
            .iter()
            .map(|&t| {
                let gap = (self.level_function.measure_above(t) - star.measure_above(t)).abs();
                let j = self
                    .f_star
                    .values
                    .partition_point(|&v| v > t)
                    .min(self.f_star.grid.n - 1);
                let lo = j.saturating_sub(1);
                let k = self.level_function.sorted_values.partition_point(|&v| v > t);
                let sorted_cell = if k == 0 {
                    0.0
                } else {
                    vols_sorted(&self.level_function, k - 1)
                };
                let cell = self.cell_volumes[lo].max(self.cell_volumes[j]).max(sorted_cell);
                gap / cell
            })
            .fold(0.0, f64::max)
    }
}

fn check_hyperbolic(f: &RadialField) -> Result<()> {
    if f.tag != SpaceTag::Hyperbolic {
        return Err(Error::Misuse("rearrangement acts on hyperbolic-tagged fields".into()));
    }
    Ok(())
}

/// Symmetric decreasing rearrangement of `|f|`.
///
/// The decreasing step function with the same distribution as `|f|` is
/// averaged over each shell of the grid, so `∫ f*` is exact and the other
/// norms are preserved to second order. A profile that is already
/// nonincreasing is returned unchanged.
pub fn symmetrize(f: &RadialField, d: usize) -> Result<RearrangementResult> {
    check_hyperbolic(f)?;
    let abs: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    let vols = cell_volumes(&f.grid, d);
    let level = LevelFunction::new(&abs, &vols);
    let n = abs.len();
    if abs.windows(2).all(|w| w[1] <= w[0]) {
        return Ok(RearrangementResult {
            d,
            input: f.clone(),
            f_star: RadialField {
                grid: f.grid,
                values: abs,
                tag: SpaceTag::Hyperbolic,
            },
            level_function: level,
            cell_volumes: vols,
        });
    }

    // Average of the sorted step function over each ball shell.
    let s = &level.sorted_values;
    let mut out = Vec::with_capacity(n);
    let mut lo = 0.0;
    let mut k = 0;
    for &v in &vols {
        let hi = lo + v;
        let mut acc = 0.0;
        let mut left = lo;
        let top = s[k.min(n - 1)];
        while k < n && left < hi {
            let right = level.cumulative[k].min(hi);
            acc += s[k] * (right - left).max(0.0);
            left = right;
            if level.cumulative[k] <= hi {
                k += 1;
            } else {
                break;
            }
        }
        // Clamping to the values met keeps round-off from breaking monotonicity.
        let bottom = s[k.min(n - 1)].min(top);
        out.push((acc / v).clamp(bottom, top));
        lo = hi;
    }
    Ok(RearrangementResult {
        d,
        input: f.clone(),
        f_star: RadialField {
            grid: f.grid,
            values: out,
            tag: SpaceTag::Hyperbolic,
        },
        level_function: level,
        cell_volumes: vols,
    })
}

fn vols_sorted(level: &LevelFunction, k: usize) -> f64 {
    if k == 0 {
        level.cumulative[0]
    } else {
        level.cumulative[k] - level.cumulative[k - 1]
    }
}

/// `(Σ |f_i|^p vol_i)^{1/p}`.
pub fn lp_norm(f: &RadialField, d: usize, p: f64) -> Result<f64> {
    check_hyperbolic(f)?;
    let vols = cell_volumes(&f.grid, d);
    Ok(f.values
        .iter()
        .zip(&vols)
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum::<f64>()
        .powf(1.0 / p))
}

/// `(Σ_j |S^{d-1}| sinh^{d-1}(j h) (f_j - f_{j-1})² / h)^{1/2}` over the
/// interior faces.
pub fn kinetic_seminorm(f: &RadialField, d: usize) -> Result<f64> {
    check_hyperbolic(f)?;
    let h = f.grid.h();
    let s = sphere_area(d);
    let e = d as i32 - 1;
    Ok((1..f.grid.n)
        .map(|j| {
            let diff = f.values[j].abs() - f.values[j - 1].abs();
            s * f.grid.face(j).sinh().powi(e) * diff * diff / h
        })
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KineticComparison {
    pub before: f64,
    pub after: f64,
}

impl KineticComparison {
    /// `after <= before` up to `1e-10 + 1e-8 before`.
    pub fn decreased(&self) -> bool {
        self.after <= self.before + 1e-10 + 1e-8 * self.before
    }
}

/// Kinetic seminorms of `|f|` and of its rearrangement.
pub fn kinetic_compare(f: &RadialField, d: usize) -> Result<KineticComparison> {
    let star = symmetrize(f, d)?;
    Ok(KineticComparison {
        before: kinetic_seminorm(f, d)?,
        after: kinetic_seminorm(&star.f_star, d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn field(grid: RadialGrid, f: impl Fn(f64) -> f64) -> RadialField {
        RadialField::from_fn(grid, SpaceTag::Hyperbolic, f)
    }

    fn two_bump(r: f64) -> f64 {
        (-(r - 1.0) * (r - 1.0) / 0.1).exp() + 0.6 * (-(r - 3.0) * (r - 3.0) / 0.3).exp()
    }

    #[test]
    fn ball_volume_closed_forms() {
        assert_eq!(ball_volume(0.0, 3).unwrap(), 0.0);
        for r in [0.01, 0.09, 0.1, 0.5, 1.0, 3.0, 7.0] {
            let q3 = ball_volume_quadrature(r, 3);
            let c3 = 4.0 * PI * ((2.0 * r).sinh() / 4.0 - r / 2.0);
            assert!((ball_volume(r, 3).unwrap() / q3 - 1.0).abs() < 1e-10, "r={r}");
            if r >= 0.1 {
                assert!((c3 / q3 - 1.0).abs() < 1e-10);
            }
            let c2 = 2.0 * PI * (r.cosh() - 1.0);
            assert!((ball_volume(r, 2).unwrap() / ball_volume_quadrature(r, 2) - 1.0).abs() < 1e-10);
            assert!((c2 / ball_volume_quadrature(r, 2) - 1.0).abs() < 1e-9);
        }
        assert!(ball_volume(-1.0, 2).is_err());
    }

    #[test]
    fn cells_tile_the_ball() {
        let grid = RadialGrid::new(5.0, 500).unwrap();
        for d in 2..=5 {
            let total: f64 = cell_volumes(&grid, d).iter().sum();
            assert!((total / ball_volume(5.0, d).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decreasing_profile_is_fixed() {
        let grid = RadialGrid::new(8.0, 800).unwrap();
        let f = field(grid, |r| (-r * r).exp());
        let res = symmetrize(&f, 3).unwrap();
        for (a, b) in res.f_star.values.iter().zip(&f.values) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn band_indicator_becomes_ball_of_equal_volume() {
        let grid = RadialGrid::new(4.0, 4000).unwrap();
        let f = field(grid, |r| if (1.0..2.0).contains(&r) { 1.0 } else { 0.0 });
        let res = symmetrize(&f, 2).unwrap();
        let r_star = ((2.0f64).cosh() - 1.0f64.cosh() + 1.0).acosh();
        let edge = res.f_star.values.iter().rposition(|&v| v >= 0.5).unwrap();
        let h = grid.h();
        assert!((grid.node(edge) - r_star).abs() <= h, "{} vs {r_star}", grid.node(edge));
        assert!(res.f_star.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn norms_preserved() {
        let grid = RadialGrid::new(8.0, 8000).unwrap();
        let f = field(grid, two_bump);
        let res = symmetrize(&f, 3).unwrap();
        for p in [1.0, 2.0, 4.0] {
            let a = lp_norm(&f, 3, p).unwrap();
            let b = lp_norm(&res.f_star, 3, p).unwrap();
            assert!((a / b - 1.0).abs() < 1e-6, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn equimeasurable_and_monotone() {
        let grid = RadialGrid::new(8.0, 2000).unwrap();
        let f = field(grid, |r| two_bump(r) - 0.3 * (-(r - 5.0).powi(2)).exp());
        let res = symmetrize(&f, 2).unwrap();
        assert!(res.f_star.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.f_star.values.iter().all(|&v| v >= 0.0));
        let levels: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
        let defect = res.equimeasurability_defect(&levels);
        assert!(defect <= 2.0, "{defect}");
    }

    #[test]
    fn idempotent() {
        let grid = RadialGrid::new(8.0, 2000).unwrap();
        let f = field(grid, two_bump);
        let once = symmetrize(&f, 3).unwrap().f_star;
        let twice = symmetrize(&once, 3).unwrap().f_star;
        assert_eq!(once.values, twice.values);
    }

    #[test]
    fn zero_input() {
        let grid = RadialGrid::new(4.0, 100).unwrap();
        let f = field(grid, |_| 0.0);
        let res = symmetrize(&f, 2).unwrap();
        assert!(res.f_star.values.iter().all(|&v| v == 0.0));
        let mut wrong = f.clone();
        wrong.tag = SpaceTag::Euclidean;
        assert!(symmetrize(&wrong, 2).is_err());
    }

    #[test]
    fn shifted_bump_loses_kinetic_energy() {
        let grid = RadialGrid::new(8.0, 2000).unwrap();
        let f = field(grid, |r| (-(r - 2.0) * (r - 2.0)).exp());
        let k = kinetic_compare(&f, 3).unwrap();
        assert!(k.after < k.before, "{k:?}");
        let g = field(grid, |r| (-r * r).exp());
        let k = kinetic_compare(&g, 3).unwrap();
        assert_eq!(k.after, k.before);
    }

    #[test]
    fn random_mixtures_never_gain_kinetic_energy() {
        let grid = RadialGrid::new(8.0, 1600).unwrap();
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bumps: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.random_range(0.1..1.0),
                        rng.random_range(0.0..5.0),
                        rng.random_range(0.1..1.0),
                    )
                })
                .collect();
            let f = field(grid, |r| {
                bumps
                    .iter()
                    .map(|(a, c, w)| a * (-(r - c) * (r - c) / (w * w)).exp())
                    .sum()
            });
            let d = 2 + (seed % 3) as usize;
            let k = kinetic_compare(&f, d).unwrap();
            assert!(k.decreased(), "seed {seed}: {k:?}");
        }
    }
}
