//! Conserved quantities along a family of ground states, the convexity
//! test on `δ(λ) = E_λ + λ Q_λ`, and the linearised operators about a
//! ground state.

mod spectral;

pub use spectral::{admissibility_report, linearize, AdmissibilityReport, Condition, SpectralOptions, SpectralReport};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, RadialGrid};
use crate::ground_state::{default_r_max, solve_fixed_lambda, GroundStateSolution, SolverOptions};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    /// Grid spacing shared by every point of the sweep.
    pub h: f64,
    /// Box radius; the default box of the smallest `lambda` when absent.
    pub r_max: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            h: 0.01,
            r_max: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// One point of a sweep. `mass` is `Q = ∫ R²` and `energy` is
/// `E = ∫ |∇R|² - 2 ∫ F(R)`, both over hyperbolic space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub lambda: f64,
    pub mass: f64,
    pub energy: f64,
    pub delta: f64,
    /// False marks a gap: the solve failed and the point is skipped by the
    /// derivatives.
    pub converged: bool,
    pub residual: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    /// Finite-difference noise level of `delta2`.
    pub delta2_noise: Option<f64>,
    /// `|E' + λ Q'| / (|E'| + |λ Q'|)`.
    pub vk_defect: Option<f64>,
    pub message: Option<String>,
}

impl StabilityPoint {
    pub fn new(lambda: f64, mass: f64, energy: f64, residual: f64) -> Self {
        StabilityPoint {
            lambda,
            mass,
            energy,
            delta: energy + lambda * mass,
            converged: true,
            residual,
            delta1: None,
            delta2: None,
            delta2_noise: None,
            vk_defect: None,
            message: None,
        }
    }

    pub fn gap(lambda: f64, message: String) -> Self {
        StabilityPoint {
            lambda,
            mass: f64::NAN,
            energy: f64::NAN,
            delta: f64::NAN,
            converged: false,
            residual: f64::NAN,
            delta1: None,
            delta2: None,
            delta2_noise: None,
            vk_defect: None,
            message: Some(message),
        }
    }

    /// Rounding plus the first-order effect of the solver residual.
    fn uncertainty(&self) -> f64 {
        64.0 * f64::EPSILON * (self.energy.abs() + (self.lambda * self.mass).abs())
            + self.residual.abs() * self.mass.abs().sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
}

/// Finite-difference weights for derivatives `0..=m` at `x0` on the nodes
/// `xs` (Fornberg's recursion).
fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// The `width` indices of `run` nearest to position `pos`, centred when
/// possible.
fn stencil(run: &[usize], pos: usize, width: usize) -> &[usize] {
    let start = pos.saturating_sub(width / 2).min(run.len() - width);
    &run[start..start + width]
}

impl StabilityCurve {
    /// Builds a curve from sampled points and attaches the derivatives.
    /// `lambda` must be strictly increasing.
    pub fn from_points(points: Vec<StabilityPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].lambda > w[0].lambda)) {
            return Err(Error::invalid("lambda", "sweep values must be strictly increasing"));
        }
        let mut curve = StabilityCurve { points };
        curve.differentiate();
        Ok(curve)
    }

    /// A curve with prescribed `δ` and `Q = δ'`; `E = δ - λ Q`.
    pub fn synthetic(lambdas: &[f64], delta: impl Fn(f64) -> f64, mass: impl Fn(f64) -> f64) -> Result<Self> {
        let points = lambdas
            .iter()
            .map(|&l| {
                let q = mass(l);
                StabilityPoint::new(l, q, delta(l) - l * q, 0.0)
            })
            .collect();
        Self::from_points(points)
    }

    fn differentiate(&mut self) {
        let n = self.points.len();
        let mut i = 0;
        while i < n {
            if !self.points[i].converged {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < n && self.points[j].converged {
                j += 1;
            }
            let run: Vec<usize> = (i..j).collect();
            if run.len() >= 3 {
                for pos in 0..run.len() {
                    self.differentiate_at(&run, pos);
                }
            }
            i = j;
        }
    }

    fn differentiate_at(&mut self, run: &[usize], pos: usize) {
        // Five-point stencils (centred where possible) when the run allows,
        // otherwise three points, four for δ'' at an endpoint.
        let interior = pos > 0 && pos + 1 < run.len();
        let (s1, s2) = if run.len() >= 5 {
            (stencil(run, pos, 5), stencil(run, pos, 5))
        } else {
            let s1 = stencil(run, pos, 3);
            (
                s1,
                if interior || run.len() < 4 {
                    s1
                } else {
                    stencil(run, pos, 4)
                },
            )
        };
        let p = &self.points;
        let x0 = p[run[pos]].lambda;
        let apply = |s: &[usize], k: usize, f: &dyn Fn(&StabilityPoint) -> f64| -> (f64, f64) {
            let xs: Vec<f64> = s.iter().map(|&q| p[q].lambda).collect();
            let w = fd_weights(x0, &xs, 2);
            let value = s.iter().zip(&w[k]).map(|(&q, c)| c * f(&p[q])).sum();
            let noise = s.iter().zip(&w[k]).map(|(&q, c)| c.abs() * p[q].uncertainty()).sum();
            (value, noise)
        };
        let (d1, _) = apply(s1, 1, &|q| q.delta);
        let (d2, noise) = apply(s2, 2, &|q| q.delta);
        let (de, _) = apply(s1, 1, &|q| q.energy);
        let (dq, _) = apply(s1, 1, &|q| q.mass);
        let scale = de.abs() + (x0 * dq).abs();
        let vk = if scale > 0.0 { (de + x0 * dq).abs() / scale } else { 0.0 };
        let point = &mut self.points[run[pos]];
        point.delta1 = Some(d1);
        point.delta2 = Some(d2);
        point.delta2_noise = Some(noise);
        point.vk_defect = Some(vk);
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// VK defects at the points that are not sweep endpoints.
    pub fn interior_vk_defects(&self) -> Vec<f64> {
        let n = self.points.len();
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i > 0 && *i + 1 < n)
            .filter_map(|(_, p)| p.vk_defect)
            .collect()
    }

    /// CSV with a header row: lambda, Q, E, delta, delta2, vk_defect, verdict.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let verdicts = classify_stability(self);
        writeln!(out, "# columns: lambda, Q, E, delta, delta2, vk_defect, verdict")?;
        writeln!(out, "lambda,Q,E,delta,delta2,vk_defect,verdict")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for (p, v) in self.points.iter().zip(verdicts) {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
                p.lambda,
                p.mass,
                p.energy,
                p.delta,
                opt(p.delta2),
                opt(p.vk_defect),
                if p.converged { v.as_str() } else { "gap" }
            )?;
        }
        Ok(())
    }
}

/// `Q` and `E` of a converged ground state, measured on hyperbolic space.
pub fn conserved_pair(sol: &GroundStateSolution) -> (f64, f64) {
    // The conjugation is an isometry and the solution energy is
    // `½⟨Hu, u⟩ - Σ w F̃`, half of `E`.
    (sol.mass, 2.0 * sol.energy)
}

/// `start, start + step, …` up to `stop` inclusive.
pub fn lambda_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::invalid("lambda", "range needs start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// Solves the fixed-λ problem at every `lambda` (in parallel) on one shared
/// grid and records `Q`, `E` and `δ` with their λ-derivatives.
pub fn sweep(
    params_template: &ModelParams,
    spec: &NonlinearitySpec,
    lambda_values: &[f64],
    opts: &SweepOptions,
) -> Result<StabilityCurve> {
    if lambda_values.is_empty() {
        return Err(Error::invalid("lambda", "sweep needs at least one value"));
    }
    if lambda_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("lambda", "sweep values must be strictly increasing"));
    }
    let all_params = lambda_values
        .iter()
        .map(|&l| params_template.with_lambda(l))
        .collect::<Result<Vec<_>>>()?;
    let r_max = opts.r_max.unwrap_or_else(|| default_r_max(&all_params[0]));
    let grid = RadialGrid::with_spacing(r_max, opts.h)?;
    let points = all_params
        .par_iter()
        .map(
            |params| match solve_fixed_lambda(params, spec, &grid, None, &opts.solver) {
                Ok(sol) => {
                    let (q, e) = conserved_pair(&sol);
                    StabilityPoint::new(params.lambda, q, e, sol.residual)
                }
                Err(err) => StabilityPoint::gap(params.lambda, err.to_string()),
            },
        )
        .collect();
    StabilityCurve::from_points(points)
}

/// Sign test on `δ''` against three times its noise level.
pub fn classify_stability(curve: &StabilityCurve) -> Vec<Verdict> {
    curve
        .points
        .iter()
        .map(|p| match (p.delta2, p.delta2_noise) {
            (Some(d2), Some(noise)) => {
                let tau = 3.0 * noise;
                if d2 > tau {
                    Verdict::Stable
                } else if d2 < -tau {
                    Verdict::Unstable
                } else {
                    Verdict::Inconclusive
                }
            }
            _ => Verdict::Inconclusive,
        })
        .collect()
}
