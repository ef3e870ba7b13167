use std::path::Path;
use std::process::{Command, Output};

use biwave::snapshot;
use biwave::SimConfig;

fn biwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biwave")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("sim.cfg");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn great_circle_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let diag = dir.path().join("d.csv");
    let snap = dir.path().join("s.biwv");
    let cfg = write_config(
        dir.path(),
        &format!(
            "grid.points = 32\ntarget.l = 1\ninitial.generator = great_circle\ninitial.k = 2\n\
             penalty.epsilon = 0.01\nintegrator.dt = 0.001\nrun.t_final = 0.1\nrun.sample_every = 20\n\
             output.diagnostics = {}\noutput.snapshot = {}\n",
            diag.display(),
            snap.display()
        ),
    );
    let out = biwave(&["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&diag).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "t,E_eps,E_geom,penalty_mass,constraint_l2,constraint_linf,Q_12,tangential_residual_l2,identity_gap_l2"
    );
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    assert!((rows.last().unwrap()[0] - 0.1).abs() < 1e-12);
    // the travelling wave keeps its energy ½(ω² + k⁴)·2π and charge −ω·2π
    for r in &rows {
        assert!((r[1] - 16.0 * 2.0 * std::f64::consts::PI).abs() < 1e-8);
        assert!((r[6] + 4.0 * 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    // the embedded configuration reproduces the run
    let embedded = SimConfig::from_embedded(&text).unwrap();
    assert_eq!(embedded, SimConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap());

    let (state, eps) = snapshot::load(&snap).unwrap();
    assert_eq!(eps, 0.01);
    assert!((state.t - 0.1).abs() < 1e-12);
}

#[test]
fn malformed_config_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.points = 32\ngrid.sise = 3\n");
    let out = biwave(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("grid.sise"), "{err}");

    let missing = biwave(&["run", "/nonexistent/sim.cfg"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn large_splitting_step_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.points = 16\ninitial.max_mode = 2\npenalty.epsilon = 0.01\nintegrator.dt = 0.05\nrun.t_final = 0.1\n",
    );
    let out = biwave(&["run", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    // without an output path the series goes to stdout
    assert!(String::from_utf8_lossy(&out.stdout).contains("t,E_eps"));
}

#[test]
fn blow_up_exits_2_and_flushes_last_good_state() {
    let dir = tempfile::tempdir().unwrap();
    let diag = dir.path().join("d.csv");
    let snap = dir.path().join("s.biwv");
    // a constant map moving at 1e300 overflows in the second drift
    let cfg = write_config(
        dir.path(),
        &format!(
            "grid.points = 16\ninitial.generator = great_circle\ninitial.k = 0\ninitial.omega = 1e300\n\
             integrator.dt = 1e-3\nrun.t_final = 1\nrun.sample_every = 1000\n\
             output.diagnostics = {}\noutput.snapshot = {}\n",
            diag.display(),
            snap.display()
        ),
    );
    let out = biwave(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let (state, _) = snapshot::load(&snap).unwrap();
    assert!(state.is_finite());
    assert!(state.t < 0.01);
    assert!(std::fs::read_to_string(&diag).unwrap().contains("t,E_eps"));
}

#[test]
fn verlet_stability_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.points = 64\nintegrator.scheme = verlet\nintegrator.dt = 0.01\nrun.t_final = 0.1\n");
    let out = biwave(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stab"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_reports_each_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.points = 16\ninitial.max_mode = 2\ninitial.amplitude = 0.2\nrun.t_final = 0.1\n");
    let out = biwave(&["sweep", &cfg, "--eps", "1e-1,1e-2", "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.ends_with(",ok")).count(), 2);
    assert!(text.contains("slope"));

    let bad = biwave(&["sweep", &cfg, "--eps", "1e-2,1e-1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn converge_reports_orders_and_rejects_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.points = 16\ninitial.max_mode = 2\ninitial.amplitude = 0.2\npenalty.epsilon = 0.01\n\
         integrator.dt = 0.004\nrun.t_final = 0.1\nconverge.levels = 3\n",
    );
    let out = biwave(&["converge", &cfg, "--mode", "dt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("observed orders"));

    let one = write_config(dir.path(), "grid.points = 16\nconverge.levels = 1\n");
    let out = biwave(&["converge", &one, "--mode", "grid"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("need ≥ 2 levels"));
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.points = 32\ninitial.max_mode = 3\ninitial.seed = 11\nrun.t_final = 0.05\n");
    let a = biwave(&["run", &cfg]);
    let b = biwave(&["run", &cfg]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
