//! Drivers behind the command-line tool: single runs, ε-sweeps and
//! convergence studies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{InitialData, SimConfig};
use crate::diagnostics::{all_generators, DiagnosticsRecord};
use crate::dynamics::{self, step_count, RunFailure, State, Trajectory};
use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};
use crate::initial::{great_circle_wave, prepare, random_tangent_data};
use crate::snapshot;
use crate::spectral::SpectralWorkspace;

/// Initial state described by the config on the config's grid.
pub fn initial_state(cfg: &SimConfig, ws: &mut SpectralWorkspace) -> Result<State> {
    let ambient = cfg.l + 1;
    match &cfg.initial {
        InitialData::GreatCircle { k, omega, phase } => {
            let mut p1 = vec![0.0; ambient];
            let mut p2 = vec![0.0; ambient];
            p1[0] = 1.0;
            p2[1] = 1.0;
            great_circle_wave(&cfg.grid, k, *omega, (&p1, &p2), *phase)
        }
        InitialData::Random { max_mode, amplitude, velocity_amplitude, seed, smooth_modes } => {
            let s = random_tangent_data(&cfg.grid, cfg.l, *max_mode, *amplitude, *velocity_amplitude, *seed)?;
            match smooth_modes {
                Some(m) => prepare(&s.u, &s.v, Some(*m), Some(ws)),
                None => Ok(s),
            }
        }
    }
}

/// Column header of the diagnostics time series.
pub fn diagnostics_header(ambient: usize) -> String {
    let mut cols: Vec<String> = ["t", "E_eps", "E_geom", "penalty_mass", "constraint_l2", "constraint_linf"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(all_generators(ambient).iter().map(|g| g.label()));
    cols.push("tangential_residual_l2".into());
    cols.push("identity_gap_l2".into());
    cols.join(",")
}

pub fn format_record(r: &DiagnosticsRecord) -> String {
    let mut vals = vec![
        r.t,
        r.energy_penalized,
        r.energy_geometric,
        r.penalty_mass,
        r.constraint_l2,
        r.constraint_linf,
    ];
    vals.extend(&r.charges);
    vals.push(r.tangential_residual_l2);
    vals.push(r.identity_gap_l2);
    vals.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

/// Diagnostics file contents: resolved config as `# ` lines, header, rows.
pub fn diagnostics_text(cfg: &SimConfig, records: &[DiagnosticsRecord]) -> String {
    let mut s = String::new();
    for line in cfg.to_text().lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{}", diagnostics_header(cfg.l + 1));
    for r in records {
        let _ = writeln!(s, "{}", format_record(r));
    }
    s
}

/// Runs the configured simulation.
pub fn simulate(cfg: &SimConfig) -> Result<std::result::Result<Trajectory, Box<RunFailure>>> {
    let mut ws = SpectralWorkspace::new(&cfg.grid);
    let initial = initial_state(cfg, &mut ws)?;
    let integ = cfg.integrator()?;
    Ok(dynamics::run(&initial, &integ, cfg.t_final, cfg.sample_every, &mut ws))
}

fn last_good_path(cfg: &SimConfig) -> Option<PathBuf> {
    cfg.snapshot_path.clone().or_else(|| {
        cfg.diagnostics_path.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".lastgood.biwv");
            PathBuf::from(s)
        })
    })
}

/// `run`: exit 0 on success, 1 on config, stability or I/O errors, 2 on blow-up.
pub fn cmd_run(config_path: &Path) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match cfg.integrator() {
        Ok(integ) => integ.warnings().iter().for_each(|w| eprintln!("warning: {w}")),
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    }
    let outcome = match simulate(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let (records, final_state, failure) = match outcome {
        Ok(traj) => {
            let last = traj.snapshots.last().cloned();
            (traj.records, last, None)
        }
        Err(f) if matches!(f.error, Error::NonFinite { .. }) => {
            let f = *f;
            (f.partial.records, Some(f.last_good), Some((f.t, f.error)))
        }
        // stability and domain violations come from the configuration
        Err(f) => {
            eprintln!("error: {f}");
            return 1;
        }
    };
    let write = || -> Result<()> {
        if let Some(p) = &cfg.diagnostics_path {
            fs::write(p, diagnostics_text(&cfg, &records))?;
        }
        let snap_path = if failure.is_some() { last_good_path(&cfg) } else { cfg.snapshot_path.clone() };
        if let (Some(p), Some(s)) = (snap_path, &final_state) {
            snapshot::save(&p, s, cfg.epsilon)?;
        }
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: {e}");
        return 1;
    }
    if cfg.diagnostics_path.is_none() {
        print!("{}", diagnostics_text(&cfg, &records));
    }
    match failure {
        None => 0,
        Some((t, e)) => {
            eprintln!("error: simulation failed at t = {t}: {e}");
            2
        }
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    SimConfig::parse(&fs::read_to_string(path)?)
}

/// Matched comparison times per sweep member.
pub const SWEEP_CHECKPOINTS: usize = 10;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial_energy: f64,
    pub max_penalty_mass: f64,
    /// `max_t ∫F / (ε E₀)`.
    pub max_penalty_ratio: f64,
    pub max_constraint_l2: f64,
    pub max_charge_drift: f64,
    pub max_energy_drift: f64,
    pub error: Option<String>,
    /// `u` at the matched checkpoint times.
    pub checkpoints: Vec<Field>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log max_t ‖|u|²−1‖_{L²}` against `log ε`.
    pub constraint_slope: Option<f64>,
    /// `(ε_k, ε_{k+1}, max over checkpoints of ‖u_{ε_k} − u_{ε_{k+1}}‖_{L²})`.
    pub distances: Vec<(f64, f64, f64)>,
}

/// Step size and count for a sweep member: `dt ≈ 0.1 √ε`, adjusted so the
/// checkpoints fall on exact multiples of `T / SWEEP_CHECKPOINTS`.
pub fn sweep_steps(t_final: f64, epsilon: f64) -> (f64, usize) {
    let dt0 = 0.1 * epsilon.sqrt();
    let per = step_count(t_final / SWEEP_CHECKPOINTS as f64, dt0);
    let steps = per * SWEEP_CHECKPOINTS;
    (t_final / steps as f64, steps)
}

fn sweep_member(cfg: &SimConfig, epsilon: f64) -> SweepRow {
    let (dt, steps) = sweep_steps(cfg.t_final, epsilon);
    let mut row = SweepRow {
        epsilon,
        dt,
        steps,
        initial_energy: f64::NAN,
        max_penalty_mass: f64::NAN,
        max_penalty_ratio: f64::NAN,
        max_constraint_l2: f64::NAN,
        max_charge_drift: f64::NAN,
        max_energy_drift: f64::NAN,
        error: None,
        checkpoints: Vec::new(),
    };
    let member = SimConfig { epsilon, dt, sample_every: steps / SWEEP_CHECKPOINTS, ..cfg.clone() };
    let traj = match simulate(&member) {
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
        Ok(Err(f)) => {
            row.error = Some(f.to_string());
            return row;
        }
        Ok(Ok(t)) => t,
    };
    let first = &traj.records[0];
    let e0 = first.energy_penalized;
    row.initial_energy = e0;
    row.max_penalty_mass = traj.records.iter().map(|r| r.penalty_mass).fold(0.0, f64::max);
    row.max_penalty_ratio = row.max_penalty_mass / (epsilon * e0);
    row.max_constraint_l2 = traj.records.iter().map(|r| r.constraint_l2).fold(0.0, f64::max);
    row.max_charge_drift = traj
        .records
        .iter()
        .flat_map(|r| r.charges.iter().zip(&first.charges).map(|(q, q0)| (q - q0).abs()))
        .fold(0.0, f64::max);
    row.max_energy_drift = traj
        .records
        .iter()
        .map(|r| (r.energy_penalized - e0).abs() / e0)
        .fold(0.0, f64::max);
    row.checkpoints = traj.snapshots.into_iter().map(|s| s.u).collect();
    row
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Runs every `ε` (strictly decreasing, positive) with up to `jobs` members in parallel.
pub fn sweep(cfg: &SimConfig, epsilons: &[f64], jobs: usize) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(Error::Domain("sweep needs at least one epsilon".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(format!("epsilons must be positive and strictly decreasing: {epsilons:?}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| epsilons.par_iter().map(|&e| sweep_member(cfg, e)).collect());

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let constraint_slope = fit_slope(
        &ok.iter().map(|r| r.epsilon.ln()).collect::<Vec<_>>(),
        &ok.iter().map(|r| r.max_constraint_l2.ln()).collect::<Vec<_>>(),
    );
    let distances = rows
        .windows(2)
        .filter(|w| w[0].error.is_none() && w[1].error.is_none())
        .map(|w| {
            let d = w[0]
                .checkpoints
                .iter()
                .zip(&w[1].checkpoints)
                .map(|(a, b)| a.lin_comb(1.0, b, -1.0).map(|f| f.l2_norm()).unwrap_or(f64::NAN))
                .fold(0.0, f64::max);
            (w[0].epsilon, w[1].epsilon, d)
        })
        .collect();
    Ok(SweepReport { rows, constraint_slope, distances })
}

pub fn format_sweep(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "epsilon,dt,steps,E0,max_penalty_mass,max_penalty_ratio,max_constraint_l2,max_charge_drift,max_energy_drift,status"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.epsilon,
            r.dt,
            r.steps,
            r.initial_energy,
            r.max_penalty_mass,
            r.max_penalty_ratio,
            r.max_constraint_l2,
            r.max_charge_drift,
            r.max_energy_drift,
            r.error.as_deref().unwrap_or("ok")
        );
    }
    match report.constraint_slope {
        Some(k) => {
            let _ = writeln!(s, "# constraint_l2 slope vs epsilon (log-log): {k:.4}");
        }
        None => {
            let _ = writeln!(s, "# constraint_l2 slope: n/a (fewer than two successful runs)");
        }
    }
    for (a, b, d) in &report.distances {
        let _ = writeln!(s, "# max_t ||u_{a:e} - u_{b:e}||_L2 = {d:e}");
    }
    s
}

pub fn cmd_sweep(config_path: &Path, epsilons: &[f64], jobs: usize) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match sweep(&cfg, epsilons, jobs) {
        Ok(report) => {
            for r in &report.rows {
                if let Some(e) = &r.error {
                    eprintln!("warning: epsilon = {:e} failed: {e}", r.epsilon);
                }
            }
            print!("{}", format_sweep(&report));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeMode {
    Dt,
    Grid,
}

#[derive(Debug, Clone)]
pub struct ConvergeReport {
    pub mode: ConvergeMode,
    /// Refined parameter per level: `dt` or the first-axis size.
    pub parameters: Vec<f64>,
    /// Sup-norm distance of each level's final `u` to the finest level.
    pub errors: Vec<f64>,
    /// Sup-norm distance between consecutive levels.
    pub differences: Vec<f64>,
    /// Observed orders from consecutive differences (dt mode).
    pub orders: Vec<f64>,
    pub passed: bool,
}

/// Differences below this are treated as roundoff.
pub const CONVERGE_FLOOR: f64 = 1e-12;
pub const MIN_ORDER: f64 = 1.8;
/// Absolute floor for the grid-mode decay check.
pub const GRID_FLOOR: f64 = 1e-10;

fn final_state(cfg: &SimConfig) -> Result<State> {
    let mut ws = SpectralWorkspace::new(&cfg.grid);
    let mut state = initial_state(cfg, &mut ws)?;
    let integ = cfg.integrator()?;
    for _ in 0..step_count(cfg.t_final, cfg.dt) {
        state = dynamics::step(&state, &integ, &mut ws)?;
    }
    Ok(state)
}

/// Restriction of a fine-grid field to the points of a grid coarser by `factor` per axis.
fn restrict(fine: &Field, coarse: &GridSpec, factor: usize) -> Result<Field> {
    let c = fine.components();
    let fine_pts = fine.grid().points().to_vec();
    let mut out = Field::zeros(coarse.clone(), c);
    for k in 0..coarse.num_points() {
        let idx = coarse.multi_index(k);
        let mut flat = 0;
        for (a, i) in idx.iter().enumerate() {
            flat = flat * fine_pts[a] + i * factor;
        }
        out.point_mut(k).copy_from_slice(fine.point(flat));
    }
    Ok(out)
}

pub fn converge(cfg: &SimConfig, mode: ConvergeMode) -> Result<ConvergeReport> {
    let levels = cfg.converge_levels;
    if levels < 2 {
        return Err(Error::Domain("need ≥ 2 levels".into()));
    }
    let mut finals = Vec::with_capacity(levels);
    let mut parameters = Vec::with_capacity(levels);
    let base_steps = step_count(cfg.t_final, cfg.dt);
    for k in 0..levels {
        let level = match mode {
            ConvergeMode::Dt => {
                let steps = base_steps << k;
                SimConfig { dt: cfg.t_final / steps as f64, ..cfg.clone() }
            }
            ConvergeMode::Grid => {
                let points = cfg.grid.points().iter().map(|n| n << k).collect();
                let grid = GridSpec::new(points, cfg.grid.lengths().to_vec())?;
                SimConfig { grid, ..cfg.clone() }
            }
        };
        parameters.push(match mode {
            ConvergeMode::Dt => level.dt,
            ConvergeMode::Grid => level.grid.points()[0] as f64,
        });
        finals.push(final_state(&level)?);
    }
    // bring every level onto the coarsest grid for comparison
    let coarse = cfg.grid.clone();
    let on_coarse: Vec<Field> = finals
        .iter()
        .enumerate()
        .map(|(k, s)| match mode {
            ConvergeMode::Dt => Ok(s.u.clone()),
            ConvergeMode::Grid => restrict(&s.u, &coarse, 1 << k),
        })
        .collect::<Result<_>>()?;
    let finest = on_coarse.last().expect("levels >= 2");
    let errors = on_coarse[..levels - 1].iter().map(|u| u.max_distance(finest)).collect::<Result<Vec<_>>>()?;
    let differences = on_coarse.windows(2).map(|w| w[0].max_distance(&w[1])).collect::<Result<Vec<_>>>()?;

    let (orders, passed) = match mode {
        ConvergeMode::Dt => {
            let orders: Vec<f64> = differences
                .windows(2)
                .filter(|w| w[1] > CONVERGE_FLOOR)
                .map(|w| (w[0] / w[1]).log2())
                .collect();
            let passed = orders.iter().all(|&p| p >= MIN_ORDER);
            (orders, passed)
        }
        ConvergeMode::Grid => {
            let passed = errors.windows(2).all(|w| w[1] <= (w[0] / 10.0).max(GRID_FLOOR));
            (Vec::new(), passed)
        }
    };
    Ok(ConvergeReport { mode, parameters, errors, differences, orders, passed })
}

pub fn format_converge(r: &ConvergeReport) -> String {
    let mut s = String::new();
    let name = match r.mode {
        ConvergeMode::Dt => "dt",
        ConvergeMode::Grid => "N",
    };
    let _ = writeln!(s, "level,{name},error_vs_finest,difference_to_next");
    for (k, p) in r.parameters.iter().enumerate() {
        let e = r.errors.get(k).map(|x| format!("{x:e}")).unwrap_or_else(|| "reference".into());
        let d = r.differences.get(k).map(|x| format!("{x:e}")).unwrap_or_default();
        let _ = writeln!(s, "{k},{p:e},{e},{d}");
    }
    if !r.orders.is_empty() {
        let o: Vec<String> = r.orders.iter().map(|x| format!("{x:.3}")).collect();
        let _ = writeln!(s, "# observed orders: {}", o.join(","));
    }
    let _ = writeln!(s, "# {}", if r.passed { "PASS" } else { "FAIL" });
    s
}

/// `converge`: exit 0 on pass, 1 on config errors, 3 on failed order check.
pub fn cmd_converge(config_path: &Path, mode: ConvergeMode) -> i32 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match converge(&cfg, mode) {
        Ok(r) => {
            print!("{}", format_converge(&r));
            if r.passed {
                0
            } else {
                eprintln!("error: convergence check failed");
                3
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
