use std::path::Path;

use hnls_core::evolution::{
    blowup_refinement, evolve, orbital_distance, orbital_experiment, perturbation_bump, BlowupOptions, BlowupOutcome,
    BlowupReport, EvolutionState, EvolveOptions, HistoryRow, OrbitalOptions,
};
use hnls_core::ground_state::{gradient_flow_minimize, hyperbolic_profile, solve_fixed_lambda, GroundStateSolution};
use hnls_core::heat_kernel::{monotonicity_check, recursion_consistency, sigma_of_rho, D_MAX};
use hnls_core::rearrangement::{kinetic_compare, lp_norm, symmetrize};
use hnls_core::stability::{
    admissibility_report, classify_stability, conserved_pair, lambda_grid, linearize, sweep, SweepOptions,
};
use hnls_core::{eval_phi, RadialField, RadialGrid, SpaceTag};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Command, Format, InitialKind, RunConfig};
use crate::output::{Output, Table};
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn core<T>(r: hnls_core::Result<T>) -> Res<T> {
    r.map_err(CliError::from_core)
}

/// Runs a validated configuration and returns the one-line summary.
pub fn execute(cfg: &RunConfig, root: Option<&Path>) -> Res<String> {
    let out = Output::create(cfg, root)?;
    let line = match cfg.command {
        Command::Groundstate => groundstate(cfg, &out)?,
        Command::Sweep => run_sweep(cfg, &out)?,
        Command::Spectrum => spectrum(cfg, &out)?,
        Command::Evolve => run_evolve(cfg, &out)?,
        Command::Orbital => orbital(cfg, &out)?,
        Command::Blowup => blowup(cfg, &out)?,
        Command::Heatkernel => heatkernel(cfg, &out)?,
        Command::Rearrange => rearrange(cfg, &out)?,
        Command::Verify => crate::verify::run(cfg, &out)?,
    };
    Ok(format!("{line} -> {}", out.dir.display()))
}

/// Ground state from the model section: fixed mass when `model.mass` is
/// set, fixed λ otherwise.
pub fn solve(cfg: &RunConfig, grid: Option<RadialGrid>) -> Res<GroundStateSolution> {
    let spec = cfg.spec();
    match cfg.model.mass {
        Some(q) => {
            let params = cfg.params_at(1.0)?;
            let grid = grid.map_or_else(|| cfg.solve_grid(&params), Ok)?;
            core(gradient_flow_minimize(&params, &spec, &grid, q, None, &cfg.solver))
        }
        None => {
            let params = cfg.params()?;
            let grid = grid.map_or_else(|| cfg.solve_grid(&params), Ok)?;
            core(solve_fixed_lambda(&params, &spec, &grid, None, &cfg.solver))
        }
    }
}

#[derive(Serialize)]
struct GroundStateSummary<'a> {
    solution: &'a GroundStateSolution,
    grid: RadialGrid,
    /// `Q` and `E` over hyperbolic space.
    hyperbolic_mass: f64,
    hyperbolic_energy: f64,
    delta: f64,
}

fn groundstate(cfg: &RunConfig, out: &Output) -> Res<String> {
    let sol = solve(cfg, None)?;
    let big_r = core(hyperbolic_profile(&sol))?;
    let mut table = Table::new(&["r", "u", "R"])
        .meta(format!(
            "d = {}, p = {}, lambda = {}",
            sol.params.d, sol.params.p, sol.lambda_out
        ))
        .meta("u: conjugated profile, R: hyperbolic profile");
    for (i, r) in sol.u.grid.nodes().into_iter().enumerate() {
        table.push(vec![r, sol.u.values[i], big_r.values[i]]);
    }
    out.write_table("profile", &table)?;
    let (q, e) = conserved_pair(&sol);
    out.write_summary(
        cfg,
        &GroundStateSummary {
            solution: &sol,
            grid: sol.u.grid,
            hyperbolic_mass: q,
            hyperbolic_energy: e,
            delta: e + sol.lambda_out * q,
        },
    )?;
    Ok(format!(
        "groundstate d={} p={} lambda={} residual={:.3e} mass={:.9e} iterations={}",
        sol.params.d, sol.params.p, sol.lambda_out, sol.residual, q, sol.iterations
    ))
}

fn run_sweep(cfg: &RunConfig, out: &Output) -> Res<String> {
    let r = &cfg.sweep.lambda;
    let lambdas = core(lambda_grid(r.start, r.stop, r.step))?;
    let template = cfg.params_at(r.start)?;
    let opts = SweepOptions {
        h: cfg.grid.h.unwrap_or(0.01),
        r_max: cfg.grid.r_max,
        solver: cfg.solver,
    };
    let curve = core(sweep(&template, &cfg.spec(), &lambdas, &opts))?;
    let verdicts = classify_stability(&curve);
    match out.format {
        Format::Csv => {
            let mut buf = Vec::new();
            core(curve.write_csv(&mut buf))?;
            out.write_text("sweep.csv", &String::from_utf8_lossy(&buf))?;
        }
        Format::Json => {
            out.write_json("sweep.json", &curve)?;
        }
    }
    let gaps = curve.points.iter().filter(|p| !p.converged).count();
    let max_vk = curve.interior_vk_defects().into_iter().fold(0.0, f64::max);
    #[derive(Serialize)]
    struct S<'a> {
        points: usize,
        gaps: usize,
        max_interior_vk_defect: f64,
        verdicts: &'a [hnls_core::stability::Verdict],
    }
    out.write_summary(
        cfg,
        &S {
            points: curve.points.len(),
            gaps,
            max_interior_vk_defect: max_vk,
            verdicts: &verdicts,
        },
    )?;
    let count = |v| verdicts.iter().filter(|&&x| x == v).count();
    use hnls_core::stability::Verdict;
    Ok(format!(
        "sweep d={} p={} lambda={}..{} points={} gaps={gaps} stable={} unstable={} inconclusive={} max_vk_defect={max_vk:.3e}",
        template.d,
        template.p,
        r.start,
        lambdas[lambdas.len() - 1],
        curve.points.len(),
        count(Verdict::Stable),
        count(Verdict::Unstable),
        count(Verdict::Inconclusive),
    ))
}

fn spectrum(cfg: &RunConfig, out: &Output) -> Res<String> {
    let sol = solve(cfg, None)?;
    let rep = core(linearize(&sol, &cfg.spectrum))?;
    let adm = admissibility_report(&rep);
    let mut ops = Table::new(&["index", "l_minus", "l_plus"]);
    for k in 0..rep.l_minus_eigs.len().max(rep.l_plus_eigs.len()) {
        let get = |v: &[f64]| v.get(k).copied().unwrap_or(f64::NAN);
        ops.push(vec![k as f64, get(&rep.l_minus_eigs), get(&rep.l_plus_eigs)]);
    }
    out.write_table("operators", &ops)?;
    let mut ham = Table::new(&["re", "im"]).meta(format!("block operator on {} nodes", rep.hamiltonian_grid.n));
    for z in &rep.hamiltonian_eigs {
        ham.push(vec![z.re, z.im]);
    }
    out.write_table("hamiltonian", &ham)?;
    let tol = rep.eigen_tolerance;
    let real_pairs = rep
        .hamiltonian_eigs
        .iter()
        .filter(|z| z.im.abs() < tol && z.re > tol)
        .count();
    #[derive(Serialize)]
    struct S<'a> {
        report: &'a hnls_core::stability::SpectralReport,
        admissibility: &'a hnls_core::stability::AdmissibilityReport,
        positive_real_eigenvalues: usize,
    }
    out.write_summary(
        cfg,
        &S {
            report: &rep,
            admissibility: &adm,
            positive_real_eigenvalues: real_pairs,
        },
    )?;
    Ok(format!(
        "spectrum d={} p={} lambda={} l_minus0={:.3e} l_plus0={:.6e} positive_real_eigenvalues={real_pairs} zero_in_gap_only={}",
        sol.params.d, sol.params.p, rep.lambda, rep.l_minus_eigs[0], rep.l_plus_eigs[0], adm.only_zero_in_gap.holds
    ))
}

/// Hyperbolic Gaussian `a exp(-r²/w²)` in the conjugated variable.
fn gaussian(grid: RadialGrid, d: usize, amplitude: f64, width: f64) -> RadialField<Complex64> {
    RadialField::from_fn(grid, SpaceTag::Euclidean, |r| {
        Complex64::new(amplitude * (-(r / width).powi(2)).exp() / eval_phi(r, d), 0.0)
    })
}

fn trace_table(rows: &[HistoryRow], meta: String) -> Table {
    let mut t = Table::new(&["t", "Q", "E", "grad_norm", "orbital_distance"]).meta(meta);
    for row in rows {
        t.push(vec![
            row.t,
            row.q,
            row.e,
            row.grad_norm,
            row.orbital_distance.unwrap_or(f64::NAN),
        ]);
    }
    t
}

fn relative_drift(rows: &[HistoryRow], f: impl Fn(&HistoryRow) -> f64) -> f64 {
    let v0 = f(&rows[0]);
    rows.iter().map(|r| (f(r) - v0).abs()).fold(0.0, f64::max) / v0.abs().max(f64::MIN_POSITIVE)
}

fn run_evolve(cfg: &RunConfig, out: &Output) -> Res<String> {
    let e = &cfg.evolve;
    let spec = cfg.spec();
    let params = cfg.params()?;
    let opts = EvolveOptions {
        dt: e.dt,
        t_end: e.t_end,
        sample_every: e.sample_every,
        boundary_tol: e.boundary_tol,
        max_phase_step: e.max_phase_step,
        ..EvolveOptions::default()
    };
    let (state, sol) = match e.initial {
        InitialKind::Soliton => {
            let sol = solve(cfg, None)?;
            let bump = core(perturbation_bump(&sol.u.grid, &params, e.bump_width))?;
            let values = sol
                .u
                .values
                .iter()
                .zip(&bump.values)
                .map(|(r, b)| Complex64::new(r + e.epsilon * b, 0.0))
                .collect();
            let u0 = core(RadialField::new(sol.u.grid, values, SpaceTag::Euclidean))?;
            (core(EvolutionState::new(u0, &params, &spec))?, Some(sol))
        }
        InitialKind::Gaussian => {
            let grid = cfg.solve_grid(&params)?;
            let u0 = gaussian(grid, params.d, e.amplitude, e.width);
            (core(EvolutionState::new(u0, &params, &spec))?, None)
        }
    };
    let mut distance = |_: f64, u: &[Complex64]| {
        sol.as_ref()
            .and_then(|s| orbital_distance(s, u).ok())
            .map_or(f64::NAN, |(d, _)| d)
    };
    let observer: Option<&mut dyn FnMut(f64, &[Complex64]) -> f64> =
        if sol.is_some() { Some(&mut distance) } else { None };
    let end = core(evolve(state, &params, &spec, &opts, observer))?;
    let rows: Vec<HistoryRow> = end.history.iter().copied().collect();
    out.write_table(
        "trace",
        &trace_table(
            &rows,
            format!(
                "d = {}, p = {}, lambda = {}, dt = {}",
                params.d, params.p, params.lambda, e.dt
            ),
        ),
    )?;
    let grid = end.u.grid;
    let mut fin = Table::new(&["r", "re_u", "im_u", "abs_R"]);
    for (i, r) in grid.nodes().into_iter().enumerate() {
        let z = end.u.values[i];
        fin.push(vec![r, z.re, z.im, z.norm() * eval_phi(r, params.d)]);
    }
    out.write_table("final", &fin)?;
    let mass_drift = relative_drift(&rows, |r| r.q);
    let energy_drift = relative_drift(&rows, |r| r.e);
    #[derive(Serialize)]
    struct S {
        grid: RadialGrid,
        t_end: f64,
        q0: f64,
        e0: f64,
        q_end: f64,
        e_end: f64,
        mass_drift: f64,
        energy_drift: f64,
        samples: usize,
    }
    out.write_summary(
        cfg,
        &S {
            grid,
            t_end: end.t,
            q0: rows[0].q,
            e0: rows[0].e,
            q_end: end.q_now,
            e_end: end.e_now,
            mass_drift,
            energy_drift,
            samples: rows.len(),
        },
    )?;
    Ok(format!(
        "evolve d={} p={} t={} mass_drift={mass_drift:.3e} energy_drift={energy_drift:.3e}",
        params.d, params.p, end.t
    ))
}

fn orbital(cfg: &RunConfig, out: &Output) -> Res<String> {
    let o = &cfg.orbital;
    let params = cfg.params()?;
    let grid = cfg.grid_or(80.0, 0.02)?;
    let sol = solve(cfg, Some(grid))?;
    let opts = OrbitalOptions {
        evolve: EvolveOptions {
            dt: o.dt,
            t_end: o.t_end,
            sample_every: o.sample_every,
            boundary_tol: o.boundary_tol,
            ..EvolveOptions::default()
        },
        bump_width: o.bump_width,
    };
    let mut table = Table::new(&["epsilon", "t", "distance", "gamma"]).meta(format!(
        "d = {}, p = {}, lambda = {}",
        params.d, params.p, params.lambda
    ));
    #[derive(Serialize)]
    struct Entry {
        epsilon: f64,
        delta_in: f64,
        sup_distance: f64,
        mass_drift: f64,
        energy_drift: f64,
    }
    let mut entries = Vec::new();
    for &eps in &o.epsilon {
        let m = core(orbital_experiment(&sol, eps, o.t_end, &opts))?;
        for k in 0..m.times.len() {
            table.push(vec![eps, m.times[k], m.distances[k], m.gamma_opt[k]]);
        }
        entries.push(Entry {
            epsilon: eps,
            delta_in: m.delta_in,
            sup_distance: m.sup_distance,
            mass_drift: m.mass_drift,
            energy_drift: m.energy_drift,
        });
    }
    out.write_table("orbital", &table)?;
    out.write_summary(cfg, &entries)?;
    let sups: Vec<String> = entries
        .iter()
        .map(|e| format!("{}:{:.3e}", e.epsilon, e.sup_distance))
        .collect();
    Ok(format!(
        "orbital d={} p={} lambda={} t_end={} sup_distance=[{}]",
        params.d,
        params.p,
        params.lambda,
        o.t_end,
        sups.join(", ")
    ))
}

fn outcome_text(o: &BlowupOutcome) -> String {
    match o {
        BlowupOutcome::NumericalBlowup { t } => format!("blowup@{t:.6}"),
        BlowupOutcome::Completed => "completed".into(),
        BlowupOutcome::BoundaryReached { t } => format!("boundary@{t:.6}"),
        BlowupOutcome::StepUnderflow { t } => format!("underflow@{t:.6}"),
        BlowupOutcome::StepLimit { t } => format!("step_limit@{t:.6}"),
    }
}

fn blowup(cfg: &RunConfig, out: &Output) -> Res<String> {
    let b = &cfg.blowup;
    let params = cfg.params_at(cfg.model.lambda.unwrap_or(0.0))?;
    let base = cfg.grid_or(6.0, 5e-4)?;
    let opts = BlowupOptions {
        c_d: b.c_d,
        dt0: b.dt0,
        growth_threshold: b.growth_threshold,
        min_dt: b.min_dt,
        boundary_tol: b.boundary_tol,
        max_phase_step: b.max_phase_step,
        record_every: b.record_every,
        max_steps: b.max_steps,
    };
    let d = params.d;
    let (amp, width) = (b.amplitude, b.width);
    let initial = move |r: f64| Complex64::new(amp * (-(r / width).powi(2)).exp() / eval_phi(r, d), 0.0);
    let reports: Vec<BlowupReport> = core(blowup_refinement(
        &initial,
        &params,
        &cfg.spec(),
        &base,
        b.levels,
        b.t_max,
        &opts,
    ))?;
    for (k, rep) in reports.iter().enumerate() {
        let meta = format!(
            "grid n = {}, r_max = {}, outcome = {}",
            rep.grid.n,
            rep.grid.r_max,
            outcome_text(&rep.outcome)
        );
        out.write_table(&format!("trace_level{k}"), &trace_table(&rep.trace, meta))?;
    }
    out.write_summary(cfg, &reports)?;
    let outcomes: Vec<String> = reports
        .iter()
        .map(|r| format!("n={}:{}", r.grid.n, outcome_text(&r.outcome)))
        .collect();
    let c = &reports[0].criterion;
    Ok(format!(
        "blowup d={} p={} E0={:.6e} c_d*Q0={:.6e} predicted={} outcomes=[{}]",
        d,
        params.p,
        c.energy0,
        c.c_d * c.mass0,
        c.triggered_prediction,
        outcomes.join(", ")
    ))
}

fn heatkernel(cfg: &RunConfig, out: &Output) -> Res<String> {
    let h = &cfg.heatkernel;
    let d = cfg.model.d;
    let rho: Vec<f64> = (0..h.rho_count)
        .map(|k| h.rho_max * k as f64 / (h.rho_count - 1) as f64)
        .collect();
    let rep = core(monotonicity_check(d, h.t, &rho))?;
    let mut table = Table::new(&["rho", "sigma", "p"]).meta(format!("d = {d}, t = {}", h.t));
    for (r, v) in rep.rho.iter().zip(&rep.values) {
        table.push(vec![*r, sigma_of_rho(*r), *v]);
    }
    out.write_table("heatkernel", &table)?;
    let consistency = if d % 2 == 1 && d + 2 <= D_MAX {
        let gaps = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&r| recursion_consistency(d, r, h.t))
            .collect::<hnls_core::Result<Vec<f64>>>();
        Some(core(gaps)?.into_iter().fold(0.0, f64::max))
    } else {
        None
    };
    #[derive(Serialize)]
    struct S {
        d: usize,
        t: f64,
        decreasing: bool,
        nonnegative: bool,
        recursion_consistency: Option<f64>,
    }
    out.write_summary(
        cfg,
        &S {
            d,
            t: h.t,
            decreasing: rep.decreasing,
            nonnegative: rep.nonnegative,
            recursion_consistency: consistency,
        },
    )?;
    if !(rep.decreasing && rep.nonnegative) {
        return Err(CliError::Violation(format!(
            "heat kernel d={d} t={} is not nonnegative and decreasing on the distance grid",
            h.t
        )));
    }
    Ok(format!(
        "heatkernel d={d} t={} decreasing={} nonnegative={} p(0)={:.9e}",
        h.t, rep.decreasing, rep.nonnegative, rep.values[0]
    ))
}

/// One random rearrangement trial.
#[derive(Debug, Clone, Serialize)]
pub struct RearrangeTrial {
    pub d: usize,
    /// Largest relative change of the L^1, L^2, L^4 norms.
    pub norm_error: f64,
    pub equimeasurability: f64,
    pub monotone: bool,
    pub idempotent: bool,
    pub kinetic_before: f64,
    pub kinetic_after: f64,
    pub kinetic_decreased: bool,
}

impl RearrangeTrial {
    pub fn passed(&self) -> bool {
        self.norm_error < 1e-4
            && self.equimeasurability <= 2.0
            && self.monotone
            && self.idempotent
            && self.kinetic_decreased
    }
}

/// Random sums of Gaussian bumps, seeded by `seed`.
pub fn rearrangement_trials(
    grid: RadialGrid,
    d: usize,
    trials: usize,
    bumps: usize,
    seed: u64,
) -> Res<Vec<RearrangeTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials {
        let shape: Vec<(f64, f64, f64)> = (0..bumps)
            .map(|_| {
                let a = rng.random_range(-1.0..1.0);
                let c = rng.random_range(0.0..0.6 * grid.r_max);
                let w = rng.random_range(0.1..1.0);
                (a, c, w)
            })
            .collect();
        let f = RadialField::from_fn(grid, SpaceTag::Hyperbolic, |r| {
            shape
                .iter()
                .map(|(a, c, w)| a * (-(r - c) * (r - c) / (w * w)).exp())
                .sum()
        });
        let res = core(symmetrize(&f, d))?;
        let mut norm_error: f64 = 0.0;
        for p in [1.0, 2.0, 4.0] {
            let a = core(lp_norm(&f, d, p))?;
            let b = core(lp_norm(&res.f_star, d, p))?;
            norm_error = norm_error.max((a / b - 1.0).abs());
        }
        let top = res.f_star.values[0];
        let levels: Vec<f64> = (1..20).map(|k| top * k as f64 / 20.0).collect();
        let again = core(symmetrize(&res.f_star, d))?;
        let k = core(kinetic_compare(&f, d))?;
        results.push(RearrangeTrial {
            d,
            norm_error,
            equimeasurability: res.equimeasurability_defect(&levels),
            monotone: res.f_star.values.windows(2).all(|w| w[1] <= w[0]),
            idempotent: again.f_star.values == res.f_star.values,
            kinetic_before: k.before,
            kinetic_after: k.after,
            kinetic_decreased: k.decreased(),
        });
    }
    Ok(results)
}

fn rearrange(cfg: &RunConfig, out: &Output) -> Res<String> {
    let grid = cfg.grid_or(8.0, 0.005)?;
    let d = cfg.model.d;
    let trials = rearrangement_trials(grid, d, cfg.rearrange.trials, cfg.rearrange.bumps, cfg.seed)?;
    let mut table = Table::new(&[
        "trial",
        "norm_error",
        "equimeasurability",
        "monotone",
        "idempotent",
        "kinetic_before",
        "kinetic_after",
    ])
    .meta(format!(
        "d = {d}, seed = {}, n = {}, r_max = {}",
        cfg.seed, grid.n, grid.r_max
    ));
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    for (k, t) in trials.iter().enumerate() {
        table.push(vec![
            k as f64,
            t.norm_error,
            t.equimeasurability,
            flag(t.monotone),
            flag(t.idempotent),
            t.kinetic_before,
            t.kinetic_after,
        ]);
    }
    out.write_table("rearrange", &table)?;
    out.write_summary(cfg, &trials)?;
    let failed = trials.iter().filter(|t| !t.passed()).count();
    if failed > 0 {
        return Err(CliError::Violation(format!(
            "{failed} of {} rearrangement trials failed",
            trials.len()
        )));
    }
    Ok(format!(
        "rearrange d={d} seed={} trials={} all passed",
        cfg.seed,
        trials.len()
    ))
}
