use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ln_r_over_sinh, potential_for_dim, ModelParams, RadialField, RadialGrid, SpaceTag};
use crate::nonlinearity::{NonlinearityKind, NonlinearitySpec};

/// The separatrix profile found by shooting on `u(0)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShootingSolution {
    #[serde(skip)]
    pub field: RadialField,
    pub amplitude: f64,
    /// Beyond this radius the two bracketing trajectories disagree and the
    /// profile is set to zero.
    pub reliable_radius: f64,
    pub bisections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// `u` reached zero: amplitude too large.
    Crossed,
    /// `u'` turned positive: amplitude too small.
    TurnedUp,
}

struct RadialOde {
    d: usize,
    mu: f64,
    coupling: f64,
    p: f64,
    /// Exponent of `r / sinh r` in the nonlinear weight.
    weight_exp: f64,
}

impl RadialOde {
    fn weight(&self, r: f64) -> f64 {
        (self.weight_exp * ln_r_over_sinh(r)).exp()
    }

    /// `u'' = -((d-1)/r) u' + c2(r) u - f̃(r, u)`.
    fn accel(&self, r: f64, u: f64, v: f64) -> f64 {
        let c2 = self.mu + potential_for_dim(r, self.d);
        let f = self.coupling * self.weight(r) * u.abs().powf(self.p) * u;
        -(self.d as f64 - 1.0) / r * v + c2 * u - f
    }

    /// Taylor start `u = a + b r² + c r⁴` at small `r`.
    fn start(&self, a: f64, r: f64) -> (f64, f64) {
        let df = self.d as f64;
        let c0 = self.mu + potential_for_dim(0.0, self.d);
        // c2(r) ≈ c0 + gamma r², weight ≈ 1 - e r²/6.
        let gamma = (df - 1.0) * (df - 3.0) / 60.0;
        let e = self.weight_exp;
        let ap = a.abs().powf(self.p);
        let g0 = c0 * a - self.coupling * ap * a;
        let b = g0 / (2.0 * df);
        let g2 = gamma * a + c0 * b - self.coupling * ((self.p + 1.0) * ap * b - e * ap * a / 6.0);
        let c = g2 / (4.0 * (df + 2.0));
        (a + b * r * r + c * r.powi(4), 2.0 * b * r + 4.0 * c * r.powi(3))
    }

    /// Integrates from the first node, recording node values until the
    /// trajectory's fate is sealed.
    fn shoot(&self, a: f64, grid: &RadialGrid, record: bool) -> (Fate, Vec<f64>) {
        let h = grid.h();
        let mut r = grid.node(0);
        let (mut u, mut v) = self.start(a, r);
        let mut values = Vec::new();
        if record {
            values.push(u);
        }
        for i in 1..grid.n {
            // Finer steps where (d-1)/r is stiff on the scale of h.
            let substeps = ((64.0 * h / r).ceil() as usize).max(8);
            let dt = h / substeps as f64;
            for _ in 0..substeps {
                let k1u = v;
                let k1v = self.accel(r, u, v);
                let k2u = v + 0.5 * dt * k1v;
                let k2v = self.accel(r + 0.5 * dt, u + 0.5 * dt * k1u, k2u);
                let k3u = v + 0.5 * dt * k2v;
                let k3v = self.accel(r + 0.5 * dt, u + 0.5 * dt * k2u, k3u);
                let k4u = v + dt * k3v;
                let k4v = self.accel(r + dt, u + dt * k3u, k4u);
                u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                r += dt;
            }
            r = grid.node(i);
            if u <= 0.0 {
                return (Fate::Crossed, values);
            }
            if v > 0.0 {
                return (Fate::TurnedUp, values);
            }
            if record {
                values.push(u);
            }
        }
        // Still positive and decreasing at the wall: treat as too small.
        (Fate::TurnedUp, values)
    }
}

/// Shooting on `u(0) = a` for the conjugated radial equation
/// `-u'' - ((d-1)/r) u' + (mu + V_d) u = f̃(r, u)`, RK4 with at least eight
/// substeps per grid spacing, bisecting between trajectories that cross zero and
/// trajectories that turn upward.
pub fn shooting_solve(params: &ModelParams, spec: &NonlinearitySpec, grid: &RadialGrid) -> Result<ShootingSolution> {
    shooting_solve_bracket(params, spec, grid, 1e-6, 1e6)
}

/// As [`shooting_solve`], searching for the bracket inside `[a_lo, a_hi]`.
pub fn shooting_solve_bracket(
    params: &ModelParams,
    spec: &NonlinearitySpec,
    grid: &RadialGrid,
    a_lo: f64,
    a_hi: f64,
) -> Result<ShootingSolution> {
    spec.validate(params.d)?;
    let half = 0.5 * (params.d as f64 - 1.0);
    let (p, weight_exp) = match spec.kind {
        NonlinearityKind::Power { p } => (p, half * p),
        NonlinearityKind::WeightedPower { p, gamma } => (p, half * (p - gamma)),
        NonlinearityKind::Saturated { .. } => {
            return Err(Error::invalid(
                "kind",
                "the shooting oracle covers power nonlinearities only",
            ));
        }
    };
    if !(spec.coupling > 0.0) {
        return Err(Error::invalid("coupling", "shooting needs a focusing nonlinearity"));
    }
    let ode = RadialOde {
        d: params.d,
        mu: params.mu,
        coupling: spec.coupling,
        p,
        weight_exp,
    };

    // Geometric scan for a sign change of the fate inside [a_lo, a_hi].
    let mut lo = None;
    let mut hi = None;
    let mut a = 1.0f64.clamp(a_lo, a_hi);
    match ode.shoot(a, grid, false).0 {
        Fate::Crossed => {
            hi = Some(a);
            while a > a_lo {
                a = (a * 0.5).max(a_lo);
                if ode.shoot(a, grid, false).0 == Fate::TurnedUp {
                    lo = Some(a);
                    break;
                }
                hi = Some(a);
            }
        }
        Fate::TurnedUp => {
            lo = Some(a);
            while a < a_hi {
                a = (a * 2.0).min(a_hi);
                if ode.shoot(a, grid, false).0 == Fate::Crossed {
                    hi = Some(a);
                    break;
                }
                lo = Some(a);
            }
        }
    }
    let (Some(mut lo), Some(mut hi)) = (lo, hi) else {
        return Err(Error::BracketNotFound { lo: a_lo, hi: a_hi });
    };

    let mut bisections = 0;
    while hi - lo > 2.0 * f64::EPSILON * hi && bisections < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match ode.shoot(mid, grid, false).0 {
            Fate::Crossed => hi = mid,
            Fate::TurnedUp => lo = mid,
        }
        bisections += 1;
    }

    let (_, below) = ode.shoot(lo, grid, true);
    let (_, above) = ode.shoot(hi, grid, true);
    let amplitude = 0.5 * (lo + hi);
    let mut values = vec![0.0; grid.n];
    let mut reliable = below.len().min(above.len());
    for i in 0..reliable {
        if (below[i] - above[i]).abs() > 1e-9 * amplitude {
            reliable = i;
            break;
        }
        values[i] = 0.5 * (below[i] + above[i]);
    }
    Ok(ShootingSolution {
        field: RadialField {
            grid: *grid,
            values,
            tag: SpaceTag::Euclidean,
        },
        amplitude,
        reliable_radius: if reliable == 0 { 0.0 } else { grid.node(reliable - 1) },
        bisections,
    })
}

/// Largest pointwise defect of the radial equation on the reliable part of
/// a shooting profile, using sixth-order central differences (even
/// reflection across the origin).
pub fn shooting_self_residual(params: &ModelParams, spec: &NonlinearitySpec, sol: &ShootingSolution) -> f64 {
    let grid = sol.field.grid;
    let h = grid.h();
    let u = &sol.field.values;
    let m = (0..grid.n).take_while(|&i| grid.node(i) <= sol.reliable_radius).count();
    let at = |j: isize| -> f64 {
        if j < 0 {
            u[(-j - 1) as usize]
        } else {
            u[j as usize]
        }
    };
    let half = 0.5 * (params.d as f64 - 1.0);
    let (p, weight_exp) = match spec.kind {
        NonlinearityKind::Power { p } => (p, half * p),
        NonlinearityKind::WeightedPower { p, gamma } => (p, half * (p - gamma)),
        NonlinearityKind::Saturated { .. } => return f64::NAN,
    };
    let mut worst: f64 = 0.0;
    for i in 0..m.saturating_sub(3) {
        let j = i as isize;
        let s: [f64; 7] = std::array::from_fn(|k| at(j + k as isize - 3));
        let d2 = (2.0 * (s[0] + s[6]) - 27.0 * (s[1] + s[5]) + 270.0 * (s[2] + s[4]) - 490.0 * s[3]) / (180.0 * h * h);
        let d1 = (-s[0] + 9.0 * s[1] - 45.0 * s[2] + 45.0 * s[4] - 9.0 * s[5] + s[6]) / (60.0 * h);
        let u0 = s[3];
        let r = grid.node(i);
        let c2 = params.mu + potential_for_dim(r, params.d);
        let f = spec.coupling * (weight_exp * ln_r_over_sinh(r)).exp() * u0.powf(p + 1.0);
        let defect = -d2 - (params.d as f64 - 1.0) / r * d1 + c2 * u0 - f;
        worst = worst.max(defect.abs());
    }
    worst
}
