//! Property suite run by `hnls verify`: small, fast instances of every
//! invariant the solvers promise. The report depends only on the config,
//! so repeated runs produce identical files.

use hnls_core::evolution::{blowup_probe, evolve, orbital_distance, BlowupOptions, EvolutionState, EvolveOptions};
use hnls_core::ground_state::{
    decay_diagnostics, gradient_flow_minimize, is_positive_nonincreasing, solve_fixed_lambda, SolverOptions,
};
use hnls_core::heat_kernel::{monotonicity_check, recursion_consistency};
use hnls_core::stability::{
    admissibility_report, lambda_grid, linearize, sweep, SpectralOptions, SpectralReport, SweepOptions, Verdict,
};
use hnls_core::{
    conjugate, eval_phi, Direction, GeometryTables, ModelParams, NonlinearitySpec, RadialField, RadialGrid, SpaceTag,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::rearrangement_trials;
use crate::config::RunConfig;
use crate::output::{Output, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Largest allowed `value`; `None` for yes/no checks.
    pub limit: Option<f64>,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit: Some(limit),
            passed: value <= limit,
        }
    }

    fn holds(name: &str, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: None,
            passed: ok,
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Check {
            name: format!("{name}: {err}"),
            value: f64::NAN,
            limit: None,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

fn soliton_params(d: usize, p: f64, lambda: f64) -> hnls_core::Result<ModelParams> {
    ModelParams::new(d, p, lambda)
}

fn heat_kernel_checks(out: &mut Vec<Check>) {
    let rho: Vec<f64> = (0..=80).map(|k| 0.1 * k as f64).collect();
    for d in 2..=5 {
        for t in [0.5, 2.0] {
            let name = format!("heat_kernel_decreasing_d{d}_t{t}");
            out.push(match monotonicity_check(d, t, &rho) {
                Ok(rep) => Check::holds(&name, rep.decreasing && rep.nonnegative),
                Err(e) => Check::failed(&name, e),
            });
        }
    }
    for d in [3, 5] {
        let name = format!("heat_kernel_recursion_d{d}");
        let gaps: hnls_core::Result<Vec<f64>> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&r| recursion_consistency(d, r, 1.0))
            .collect();
        out.push(match gaps {
            Ok(g) => Check::at_most(&name, g.into_iter().fold(0.0, f64::max), 1e-6),
            Err(e) => Check::failed(&name, e),
        });
    }
}

fn conjugation_check(seed: u64, out: &mut Vec<Check>) {
    let run = || -> hnls_core::Result<f64> {
        let params = soliton_params(3, 2.0, 1.0)?;
        let grid = RadialGrid::new(10.0, 500)?;
        let tables = GeometryTables::new(grid, params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = RadialField::new(grid, values, SpaceTag::Hyperbolic)?;
        let u = conjugate(&f, Direction::ToEuclidean, &tables)?;
        let back = conjugate(&u, Direction::ToHyperbolic, &tables)?;
        Ok(f.values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
            .fold(0.0, f64::max))
    };
    out.push(match run() {
        Ok(v) => Check::at_most("conjugation_round_trip", v, 1e-14),
        Err(e) => Check::failed("conjugation_round_trip", e),
    });
}

fn ground_state_checks(solver: &SolverOptions, out: &mut Vec<Check>) {
    let run = || -> hnls_core::Result<Vec<Check>> {
        let params = soliton_params(3, 2.0, 1.0)?;
        let grid = RadialGrid::with_spacing(20.0, 0.02)?;
        let sol = solve_fixed_lambda(&params, &NonlinearitySpec::power(2.0), &grid, None, solver)?;
        let fit = decay_diagnostics(&sol)?;
        Ok(vec![
            Check::at_most("ground_state_residual", sol.residual, 1e-8),
            Check::holds(
                "ground_state_positive_decreasing",
                is_positive_nonincreasing(&sol.u.values),
            ),
            Check::at_most("ground_state_decay_rate", fit.relative_error, 0.02),
        ])
    };
    match run() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed("ground_state", e)),
    }
    let run = || -> hnls_core::Result<Vec<Check>> {
        let params = soliton_params(2, 1.0, 1.0)?;
        let grid = RadialGrid::with_spacing(20.0, 0.02)?;
        let sol = gradient_flow_minimize(&params, &NonlinearitySpec::power(1.0), &grid, 10.0, None, solver)?;
        let monotone = sol.history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
        Ok(vec![
            Check::at_most("fixed_mass_constraint", (sol.mass - 10.0).abs() / 10.0, 1e-12),
            Check::holds("fixed_mass_energy_monotone", monotone),
            Check::at_most("fixed_mass_residual", sol.residual, 1e-8),
        ])
    };
    match run() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed("fixed_mass", e)),
    }
}

fn rearrangement_check(seed: u64, out: &mut Vec<Check>) {
    let grid = match RadialGrid::new(8.0, 1600) {
        Ok(g) => g,
        Err(e) => return out.push(Check::failed("rearrangement", e)),
    };
    for d in [2, 3] {
        let name = format!("rearrangement_trials_d{d}");
        out.push(match rearrangement_trials(grid, d, 5, 4, seed) {
            Ok(trials) => {
                let failed = trials.iter().filter(|t| !t.passed()).count();
                Check::at_most(&name, failed as f64, 0.0)
            }
            Err(e) => Check::failed(&name, e),
        });
    }
}

fn sweep_checks(solver: &SolverOptions, out: &mut Vec<Check>) {
    let run = || -> hnls_core::Result<Vec<Check>> {
        let params = soliton_params(3, 2.0, 0.8)?;
        let lambdas = lambda_grid(0.8, 1.2, 0.1)?;
        let opts = SweepOptions {
            h: 0.02,
            r_max: Some(20.0),
            solver: *solver,
        };
        let curve = sweep(&params, &NonlinearitySpec::power(2.0), &lambdas, &opts)?;
        let vk = curve.interior_vk_defects().into_iter().fold(0.0, f64::max);
        let verdicts = hnls_core::stability::classify_stability(&curve);
        Ok(vec![
            Check::at_most("vk_identity", vk, 1e-3),
            Check::holds(
                "supercritical_delta_concave",
                verdicts.iter().all(|v| *v == Verdict::Unstable),
            ),
        ])
    };
    match run() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed("sweep", e)),
    }
}

/// Eigenvalues of the block operator with positive real part beyond the
/// tolerance and imaginary part within it.
fn growing_modes(rep: &SpectralReport) -> usize {
    let tol = rep.eigen_tolerance;
    rep.hamiltonian_eigs
        .iter()
        .filter(|z| z.re > tol && z.im.abs() < tol)
        .count()
}

fn spectral_checks(solver: &SolverOptions, out: &mut Vec<Check>) {
    let run = || -> hnls_core::Result<Vec<Check>> {
        let params = soliton_params(3, 2.0, 1.0)?;
        let grid = RadialGrid::with_spacing(20.0, 0.05)?;
        let sol = solve_fixed_lambda(&params, &NonlinearitySpec::power(2.0), &grid, None, solver)?;
        let rep = linearize(
            &sol,
            &SpectralOptions {
                k: 3,
                hamiltonian_n: 200,
            },
        )?;
        let stable = {
            let params = soliton_params(2, 1.0, 1.0)?;
            let sol = solve_fixed_lambda(&params, &NonlinearitySpec::power(1.0), &grid, None, solver)?;
            linearize(
                &sol,
                &SpectralOptions {
                    k: 3,
                    hamiltonian_n: 200,
                },
            )?
        };
        let adm = admissibility_report(&stable);
        Ok(vec![
            Check::at_most("l_minus_zero_mode", rep.zero_mode_defect, 10.0 * sol.residual + 1e-12),
            Check::holds(
                "l_plus_negative_direction",
                rep.l_plus_eigs[0] < 0.0 && rep.l_plus_eigs[1] > 0.0,
            ),
            Check::at_most("hamiltonian_reflection_symmetry", rep.reflection_defect, 1e-8),
            Check::holds("supercritical_real_pair", growing_modes(&rep) > 0),
            Check::at_most("subcritical_growing_modes", growing_modes(&stable) as f64, 0.0),
            Check::holds("subcritical_only_zero_in_gap", adm.only_zero_in_gap.holds),
        ])
    };
    match run() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed("spectrum", e)),
    }
}

fn evolution_checks(solver: &SolverOptions, out: &mut Vec<Check>) {
    let run = || -> hnls_core::Result<Vec<Check>> {
        let params = soliton_params(2, 1.0, 1.0)?;
        let spec = NonlinearitySpec::power(1.0);
        let grid = RadialGrid::with_spacing(20.0, 0.05)?;
        let sol = solve_fixed_lambda(&params, &spec, &grid, None, solver)?;
        let state = EvolutionState::new(sol.u.to_complex(), &params, &spec)?;
        let opts = EvolveOptions {
            dt: 1e-3,
            t_end: 0.5,
            sample_every: 0.05,
            ..EvolveOptions::default()
        };
        let end = evolve(state, &params, &spec, &opts, None)?;
        let first = end.history[0];
        let q = end.history.iter().map(|r| (r.q - first.q).abs()).fold(0.0, f64::max) / first.q;
        let e = end.history.iter().map(|r| (r.e - first.e).abs()).fold(0.0, f64::max) / first.e.abs();
        let (dist, _) = orbital_distance(&sol, &end.u.values)?;
        Ok(vec![
            Check::at_most("evolution_mass_drift", q, 1e-12),
            Check::at_most("evolution_energy_drift", e, 1e-9),
            Check::at_most("soliton_stays_on_orbit", dist, 1e-4),
        ])
    };
    match run() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed("evolution", e)),
    }
}

fn blowup_checks(out: &mut Vec<Check>) {
    let run = |amplitude: f64| -> hnls_core::Result<bool> {
        let params = soliton_params(2, 2.0, 0.0)?;
        let grid = RadialGrid::new(6.0, 600)?;
        let u0 = RadialField::from_fn(grid, SpaceTag::Euclidean, |r| {
            Complex64::new(amplitude * (-r * r).exp() / eval_phi(r, 2), 0.0)
        });
        let rep = blowup_probe(
            &u0,
            &params,
            &NonlinearitySpec::power(2.0),
            1e-3,
            &BlowupOptions::default(),
        )?;
        Ok(rep.criterion.triggered_prediction)
    };
    out.push(match (run(4.0), run(0.5)) {
        (Ok(hi), Ok(lo)) => Check::holds("blowup_prediction_separates", hi && !lo),
        (Err(e), _) | (_, Err(e)) => Check::failed("blowup_prediction", e),
    });
}

/// Runs every check and writes `verify.json`. Any failed check is a
/// violation.
pub fn run(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let mut checks = Vec::new();
    heat_kernel_checks(&mut checks);
    conjugation_check(cfg.seed, &mut checks);
    ground_state_checks(&cfg.solver, &mut checks);
    rearrangement_check(cfg.seed, &mut checks);
    sweep_checks(&cfg.solver, &mut checks);
    spectral_checks(&cfg.solver, &mut checks);
    evolution_checks(&cfg.solver, &mut checks);
    blowup_checks(&mut checks);
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        passed: checks.len() - failed,
        failed,
        checks,
    };
    out.write_json("verify.json", &report)?;
    if failed > 0 {
        let names: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::Violation(format!(
            "{failed} of {} checks failed: {}",
            report.checks.len(),
            names.join(", ")
        )));
    }
    Ok(format!("verify {} checks passed", report.checks.len()))
}
