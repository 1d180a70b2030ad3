use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mrbv_cli::commands::{read_summary, PLOT_FILES};
use mrbv_cli::config::{EnergySpec, ExperimentConfig, PotentialSpec, ToleranceSpec, ViscousSpec};
use proptest::prelude::*;

fn mrbv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrbv"))
}

fn builtin_config(name: &str, eps: &[f64], extra: &str) -> String {
    let eps: Vec<String> = eps.iter().map(|e| format!("{e:e}")).collect();
    format!("eps = [{}]\nout_dir = \"out\"\n{extra}\n[energy]\nbuiltin = \"{name}\"\n", eps.join(", "))
}

/// Writes `text` as `config.toml` in a fresh directory and runs `solve`.
fn solve(text: &str) -> (tempfile::TempDir, PathBuf, i32) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, text).unwrap();
    let out = mrbv().arg("solve").arg(&cfg).output().unwrap();
    let root = dir.path().join("out");
    (dir, root, out.status.code().unwrap())
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn empty_eps_list_is_a_config_error() {
    let (_d, root, code) = solve(&builtin_config("Prototype2dof", &[], "alpha = 1.0"));
    assert_eq!(code, 1);
    assert!(!root.join("summary.csv").exists());
}

#[test]
fn schema_violation_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, builtin_config("Prototype2dof", &[0.1], "alpha = \"one\"")).unwrap();
    let out = mrbv().arg("solve").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn solver_failure_keeps_the_finished_runs() {
    // eps above 1 is rejected by the solver, the other run still completes
    let (_d, root, code) = solve(&builtin_config("Elastoplastic1d", &[2.0, 0.1], "alpha = 1.0\ntau = 1e-2\nn_nodes = 101"));
    assert_eq!(code, 2);
    let rows = read_summary(&root.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].eps, 0.1);
    assert!(root.join("eps_1/trajectory.csv").is_file());
    assert!(!root.join("eps_0").exists());
}

#[test]
fn plotdata_lists_missing_inputs() {
    let (_d, root, code) = solve(&builtin_config("Elastoplastic1d", &[0.1], "alpha = 1.0\ntau = 1e-2\nn_nodes = 101"));
    assert_eq!(code, 0);
    fs::remove_file(root.join("eps_0/curve.csv")).unwrap();
    let out = mrbv().arg("plotdata").arg(&root).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("curve.csv"));
}

#[test]
fn identical_configs_give_byte_identical_artifacts() {
    let text = builtin_config("DoubleWellJump", &[0.1, 0.05], "alpha = 2.0\ntau = 1e-3\nn_nodes = 400\nfinsler_nodes = 16");
    let (_a, ra, ca) = solve(&text);
    let (_b, rb, cb) = solve(&text);
    assert_eq!((ca, cb), (0, 0));
    let (fa, fb) = (files(&ra), files(&rb));
    assert_eq!(fa, fb);
    assert!(fa.len() > 10);
    for f in &fa {
        assert!(fs::read(ra.join(f)).unwrap() == fs::read(rb.join(f)).unwrap(), "{} differs", f.display());
    }
}

#[test]
fn analyze_reproduces_the_summary() {
    let (_d, root, code) = solve(&builtin_config("Prototype2dof", &[0.1, 0.05], "alpha = 0.5\nn_nodes = 500"));
    assert_eq!(code, 0);
    let before = fs::read(root.join("summary.csv")).unwrap();
    let out = mrbv().arg("analyze").arg(&root).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(root.join("summary.csv")).unwrap(), before);
}

#[test]
fn ode_example_matches_the_periodic_orbit() {
    let eps = [1.0, 0.5, 0.25];
    let (_d, root, code) = solve(&builtin_config("Ode45Example", &eps, "alpha = 1.0\ntau = 1e-3\nn_nodes = 200"));
    assert_eq!(code, 0);
    let rows = read_summary(&root.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        // |a w / (lambda + i w r)| T with lambda = w = a = 1, r = eps, T = 2 pi
        let exact = 2.0 * std::f64::consts::PI / (1.0 + r.eps * r.eps).sqrt();
        assert!((r.u_l1 - exact).abs() <= 0.01 * exact, "eps {}: {} vs {exact}", r.eps, r.u_l1);
    }
}

#[test]
fn prototype_residuals_decrease_along_the_sweep() {
    let (_d, root, code) = solve(&builtin_config("Prototype2dof", &[1e-1, 1e-2, 1e-3], "alpha = 1.0"));
    assert_eq!(code, 0);
    assert_eq!(files(&root).iter().filter(|f| f.ends_with("trajectory.csv")).count(), 3);
    let rows = read_summary(&root.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].balance_residual.abs() < w[0].balance_residual.abs(), "{rows:?}");
        assert!(w[1].bv_balance_residual.abs() < w[0].bv_balance_residual.abs(), "{rows:?}");
        assert!(w[1].stationarity_max < w[0].stationarity_max, "{rows:?}");
    }
}

/// Set `MRBV_BLESS=1` to rewrite the golden files.
fn golden(name: &str, alpha: f64) {
    let text = builtin_config(name, &[0.1, 0.05], &format!("alpha = {alpha:?}\ntau = 1e-2\nn_nodes = 101\nfinsler_nodes = 16"));
    let (_d, root, code) = solve(&text);
    assert_eq!(code, 0);
    let out = mrbv().arg("plotdata").arg(&root).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let gold = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    for f in PLOT_FILES {
        let got = fs::read_to_string(root.join("plotdata").join(f)).unwrap();
        if std::env::var_os("MRBV_BLESS").is_some() {
            fs::create_dir_all(&gold).unwrap();
            fs::write(gold.join(f), &got).unwrap();
        }
        let want = fs::read_to_string(gold.join(f)).unwrap_or_else(|e| panic!("{}: {e}", gold.join(f).display()));
        assert!(got == want, "{name}/{f} differs from the golden file");
    }
}

#[test]
fn golden_plotdata_prototype() {
    golden("Prototype2dof", 1.0);
}

#[test]
fn golden_plotdata_elastoplastic() {
    golden("Elastoplastic1d", 2.0);
}

#[test]
fn golden_plotdata_ode() {
    golden("Ode45Example", 0.5);
}

fn finite() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

fn matrix(r: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(finite(), c), r)
}

fn viscous() -> impl Strategy<Value = ViscousSpec> {
    prop_oneof![
        Just(ViscousSpec::Quadratic),
        matrix(2, 2).prop_map(|weight| ViscousSpec::WeightedQuadratic { weight }),
        (1.1..5.0f64, matrix(1, 1)).prop_map(|(p, weight)| ViscousSpec::PHomogeneous { p, weight }),
        (1.1..5.0f64).prop_map(|p| ViscousSpec::NormPower { p }),
        (0.0..2.0f64, 0.1..3.0f64).prop_map(|(a, b)| ViscousSpec::NormLinearQuadratic { a, b }),
        Just(ViscousSpec::CustomC),
        Just(ViscousSpec::CustomD),
    ]
}

fn energy() -> impl Strategy<Value = EnergySpec> {
    prop_oneof![
        prop_oneof![Just("Prototype2dof"), Just("Elastoplastic1d"), Just("Ode45Example"), Just("DoubleWellJump")]
            .prop_map(|n| EnergySpec::Builtin(n.to_string())),
        (matrix(2, 2), matrix(1, 2), matrix(1, 1), matrix(3, 3), prop::collection::vec(finite(), 2), finite(), 0.1..10.0f64).prop_map(
            |(a, b, g, f_load, u0, z0, horizon)| EnergySpec::Quadratic { a, b, g, f_load, g_load: vec![], horizon, u0, z0: vec![z0] }
        ),
    ]
}

fn tolerances() -> impl Strategy<Value = ToleranceSpec> {
    let o = || prop::option::of(1e-9..1e3f64);
    (o(), o(), o(), o(), o(), o()).prop_map(|(tol_t, tol_s, tol_v, lambda_zero, lambda_inf, tol_class)| ToleranceSpec {
        tol_t,
        tol_s,
        tol_v,
        lambda_zero,
        lambda_inf,
        tol_class,
    })
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        0.1..3.0f64,
        prop::collection::vec(1e-6..1.0f64, 1..5),
        prop::option::of(1e-6..1e-1f64),
        0.01..1.0f64,
        prop::option::of(0.1..10.0f64),
        any::<u32>(),
        (3usize..5000, 2usize..200),
        energy(),
        prop::option::of((viscous(), viscous(), prop::collection::vec(0.1..3.0f64, 1), prop::collection::vec(0.1..3.0f64, 1))),
        tolerances(),
    )
        .prop_map(|(alpha, mut eps, tau, tau_ratio, horizon, seed, (n_nodes, finsler_nodes), energy, pot, tolerances)| {
            eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            eps.dedup();
            ExperimentConfig {
                alpha,
                eps,
                tau,
                tau_ratio,
                horizon,
                out_dir: format!("runs/{seed}"),
                seed,
                n_nodes,
                finsler_nodes,
                energy,
                potentials: pot.map(|(vu, vz, kappa_plus, kappa_minus)| PotentialSpec { vu, vz, kappa_plus, kappa_minus }),
                tolerances,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn config_round_trips_through_toml(cfg in config()) {
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}
