use std::path::Path;
use std::process::{Command, Output};

use hnls_cli::config::{Command as Cmd, RunConfig, MANIFEST_NAME};
use hnls_cli::EXIT_CONFIG;

fn hnls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnls"))
        .args(args)
        .current_dir(dir)
        .env_remove("HNLS_OUTPUT_ROOT")
        .output()
        .expect("spawn hnls")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn reference_ground_state() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(tmp.path(), &["groundstate", "--d", "3", "--p", "2", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = String::from_utf8_lossy(&o.stdout);
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("groundstate d=3 p=2 lambda=1 residual="));
    let dir = tmp.path().join("groundstate");
    let s = json(&dir.join("summary.json"));
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["command"], "groundstate");
    let residual = s["result"]["solution"]["residual"].as_f64().unwrap();
    assert!(residual < 1e-8, "{residual}");
    assert!(s["result"]["solution"]["converged"].as_bool().unwrap());
    let profile = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert!(profile.lines().any(|l| l == "r,u,R"));
    let rows = data_rows(&profile);
    assert_eq!(rows.len(), 2000);
    let u: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(u.windows(2).all(|w| w[1] <= w[0]) && u[u.len() - 1] >= 0.0);
    assert!(dir.join(MANIFEST_NAME).exists());
}

#[test]
fn fixed_mass_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(
        tmp.path(),
        &["groundstate", "--d", "2", "--p", "1", "--mass", "10", "--h", "0.02"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&tmp.path().join("groundstate/summary.json"));
    let mass = s["result"]["hyperbolic_mass"].as_f64().unwrap();
    assert!((mass - 10.0).abs() < 1e-11);
    assert_eq!(s["result"]["solution"]["mode"]["mode"], "fixed_mass");
}

#[test]
fn verify_passes_on_a_fresh_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(tmp.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&tmp.path().join("verify/verify.json"));
    assert_eq!(r["failed"], 0);
    assert!(r["passed"].as_u64().unwrap() >= 25);
}

#[test]
fn sweep_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(tmp.path(), &["sweep", "--d", "3", "--p", "2", "--lambda", "0.5:2:0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 16);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[1] > w[0]));
    assert!((lambdas[0] - 0.5).abs() < 1e-12 && (lambdas[15] - 2.0).abs() < 1e-12);
    for r in &rows {
        let d2: f64 = r[4].parse().expect("delta2 populated");
        assert!(d2 < 0.0);
        assert_eq!(r[6], "unstable");
    }
}

#[test]
fn invalid_fields_exit_two_with_the_field_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["groundstate", "--d", "1"], "model.d"),
        (&["groundstate", "--p", "5"], "p"),
        (&["groundstate", "--lambda", "-3"], "lambda"),
        (&["groundstate", "--h", "0.01", "--n", "100"], "grid.n"),
        (&["groundstate", "--set", "model.q=1"], "q"),
        (&["groundstate", "--lambda", "1", "--mass", "2"], "model.mass"),
        (&["sweep", "--lambda", "2:1:0.1"], "sweep.lambda"),
        (&["sweep", "--lambda", "1:2"], "sweep.lambda"),
        (&["sweep", "--n", "100"], "grid.n"),
        (&["rearrange", "--h", "0.5", "--r-max", "0.1"], "grid.h"),
        (&["orbital", "--d", "3", "--p", "2"], "model.p"),
        (&["evolve", "--set", "evolve.dt=0"], "evolve.dt"),
        (
            &["blowup", "--set", "blowup.growth_threshold=0.5"],
            "blowup.growth_threshold",
        ),
        (&["heatkernel", "--d", "9"], "model.d"),
        (&["groundstate", "--set", "solver.tol=-1"], "solver.tol"),
    ];
    for (args, field) in cases {
        let o = hnls(tmp.path(), args);
        assert_eq!(o.status.code(), Some(EXIT_CONFIG), "{args:?}");
        let err = stderr(&o);
        assert!(err.contains(&format!("{field}`")), "{args:?}: {err}");
    }
    let o = hnls(tmp.path(), &["groundstate", "--bogus"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let o = hnls(tmp.path(), &["explode"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(tmp.path(), &["groundstate", "--set", "solver.max_iters=3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no convergence after 3 iterations"));
    let o = hnls(tmp.path(), &["evolve", "--h", "0.05", "--set", "evolve.t_end=5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("step rejected at t ="), "{}", stderr(&o));
}

#[test]
fn help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnls(tmp.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "groundstate",
        "sweep",
        "spectrum",
        "evolve",
        "orbital",
        "blowup",
        "heatkernel",
        "rearrange",
        "verify",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
}

#[test]
fn manifest_reparses_to_the_same_config() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.toml");
    std::fs::write(
        &conf,
        r#"
seed = 7
[model]
d = 2
lambda = 0.5
[nonlinearity]
kind = "weighted_power"
p = 1.0
gamma = 0.5
coupling = 1.0
[grid]
r_max = 20.0
h = 0.02
[output]
dir = "weighted"
format = "json"
"#,
    )
    .unwrap();
    let o = hnls(
        tmp.path(),
        &[
            "groundstate",
            "--config",
            conf.to_str().unwrap(),
            "--set",
            "solver.tol=1e-10",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("weighted");
    assert!(dir.join("profile.json").exists());
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap();
    let parsed = RunConfig::from_toml(&text).unwrap();
    let expected = RunConfig::load(Some(&conf), &[("solver.tol".into(), "1e-10".into())], Cmd::Groundstate).unwrap();
    assert_eq!(parsed, expected);
    assert_eq!(parsed.seed, 7);
    assert_eq!(parsed.solver.tol, 1e-10);

    // Running from the manifest reproduces the outputs byte for byte.
    let first = std::fs::read(dir.join("profile.json")).unwrap();
    let summary = std::fs::read(dir.join("summary.json")).unwrap();
    let copy = tmp.path().join("copy.toml");
    std::fs::write(&copy, &text).unwrap();
    let o = hnls(
        tmp.path(),
        &["groundstate", "--config", copy.to_str().unwrap(), "--out", "again"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(tmp.path().join("again/profile.json")).unwrap(), first);
    assert_eq!(std::fs::read(tmp.path().join("again/summary.json")).unwrap(), summary);
}

#[test]
fn defaults_round_trip_for_every_command() {
    for cmd in [
        Cmd::Groundstate,
        Cmd::Sweep,
        Cmd::Spectrum,
        Cmd::Evolve,
        Cmd::Orbital,
        Cmd::Blowup,
        Cmd::Heatkernel,
        Cmd::Rearrange,
        Cmd::Verify,
    ] {
        let cfg = RunConfig::load(None, &[], cmd).unwrap();
        assert_eq!(cfg.command, cmd);
        assert_eq!(cfg.seed, 0);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("c.toml");
    std::fs::write(&conf, "[model]\nd = 2\np = 1.0\nlambda = 2.0\n").unwrap();
    let cfg = RunConfig::load(Some(&conf), &[("model.lambda".into(), "0.25".into())], Cmd::Groundstate).unwrap();
    assert_eq!(cfg.model.lambda, Some(0.25));
    assert_eq!(cfg.model.d, 2);
    let o = hnls(
        tmp.path(),
        &["groundstate", "--config", "c.toml", "--lambda", "0.25", "--h", "0.05"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("lambda=0.25"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_hnls"))
        .args(["heatkernel", "--d", "3", "--out", "hk"])
        .current_dir(tmp.path())
        .env("HNLS_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(root.join("hk/heatkernel.csv").exists());
    assert!(root.join("hk").join(MANIFEST_NAME).exists());
    assert!(!tmp.path().join("hk").exists());
}

#[test]
fn repeated_runs_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        for args in [
            vec!["verify", "--out"],
            vec!["rearrange", "--seed", "3", "--set", "rearrange.trials=5", "--out"],
        ] {
            let mut args = args.clone();
            let dir = format!("{}-{out}", args[0]);
            args.push(&dir);
            let o = hnls(tmp.path(), &args);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
    }
    for (dir, file) in [
        ("verify", "verify.json"),
        ("rearrange", "rearrange.csv"),
        ("rearrange", "summary.json"),
    ] {
        let a = std::fs::read(tmp.path().join(format!("{dir}-a/{file}"))).unwrap();
        let b = std::fs::read(tmp.path().join(format!("{dir}-b/{file}"))).unwrap();
        assert_eq!(a, b, "{dir}/{file}");
    }
}

#[test]
fn seeds_change_random_suites() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in ["0", "1"] {
        let dir = format!("s{seed}");
        let o = hnls(
            tmp.path(),
            &[
                "rearrange",
                "--seed",
                seed,
                "--set",
                "rearrange.trials=3",
                "--out",
                &dir,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(tmp.path().join("s0/rearrange.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("s1/rearrange.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn other_commands_produce_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[(&[&str], &[&str])] = &[
        (
            &[
                "spectrum",
                "--d",
                "3",
                "--p",
                "2",
                "--h",
                "0.05",
                "--set",
                "spectrum.hamiltonian_n=100",
            ],
            &["operators.csv", "hamiltonian.csv", "summary.json"],
        ),
        (
            &[
                "evolve",
                "--d",
                "2",
                "--p",
                "1",
                "--h",
                "0.05",
                "--set",
                "evolve.t_end=0.2",
                "--set",
                "evolve.epsilon=0.01",
            ],
            &["trace.csv", "final.csv", "summary.json"],
        ),
        (
            &[
                "orbital",
                "--d",
                "2",
                "--p",
                "1",
                "--r-max",
                "40",
                "--h",
                "0.05",
                "--set",
                "orbital.t_end=0.5",
            ],
            &["orbital.csv", "summary.json"],
        ),
        (
            &[
                "blowup",
                "--d",
                "2",
                "--p",
                "2",
                "--n",
                "1200",
                "--set",
                "blowup.levels=1",
                "--set",
                "blowup.t_max=0.05",
            ],
            &["trace_level0.csv", "summary.json"],
        ),
        (&["heatkernel", "--d", "4"], &["heatkernel.csv", "summary.json"]),
        (
            &["rearrange", "--set", "rearrange.trials=2"],
            &["rearrange.csv", "summary.json"],
        ),
    ];
    for (args, files) in runs {
        let o = hnls(tmp.path(), args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let dir = tmp.path().join(args[0]);
        for f in *files {
            assert!(dir.join(f).exists(), "{args:?}: {f}");
        }
        assert!(dir.join(MANIFEST_NAME).exists());
    }
    let s = json(&tmp.path().join("spectrum/summary.json"));
    assert!(s["result"]["positive_real_eigenvalues"].as_u64().unwrap() >= 1);
    let s = json(&tmp.path().join("orbital/summary.json"));
    let entries = s["result"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let sup = |k: usize| entries[k]["sup_distance"].as_f64().unwrap();
    assert!(sup(0) < sup(1) && sup(1) < sup(2));
    let s = json(&tmp.path().join("blowup/summary.json"));
    assert_eq!(s["result"][0]["criterion"]["triggered_prediction"], true);
}
