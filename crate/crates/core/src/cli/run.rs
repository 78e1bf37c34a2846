use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Command, InitialData, RunConfig};
use crate::compat::{
    check_conserved, gen_initial_from_displacement, write_diagnostics_csv, DiagnosticsRecord, DisplacementSpec, Mode, Monitor,
    MonitorSet,
};
use crate::dynamics::{simulate, stable_dt, DynamicsError, FlowRates, FlowState, Simulation, StepControl, TimeStepperConfig};
use crate::fields::{io, lq_norm, Field, FieldKind, Grid};
use crate::mms::{convergence_study, forcing_fields, MmsError, StudyConfig};
use crate::operators::{lame_apply, lame_solve, EllipticSolveOptions, OperatorError, Realization};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;

/// Exit code, one-line reason for a non-zero code, and files written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub code: i32,
    pub reason: Option<String>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    fn fail(code: i32, kind: &str, detail: impl std::fmt::Display, files: Vec<PathBuf>) -> Self {
        let detail = detail.to_string().replace('\n', " ");
        Self { code, reason: Some(format!("{kind}: {detail}")), files }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(&mut self, name: &str) -> std::io::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }
}

/// Execute `cfg` and write its CSV files under `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        return RunOutcome::fail(EXIT_CONFIG, "io", format!("{}: {e}", cfg.output_dir.display()), Vec::new());
    }
    let mut out = Output { dir: cfg.output_dir.clone(), files: Vec::new() };
    let result = match cfg.command {
        Command::Simulate => run_simulate(cfg, &mut out),
        Command::CheckInvariants => run_check(cfg, &mut out),
        Command::MmsConvergence => run_mms(cfg, &mut out),
        Command::LameTest => run_lame(cfg, &mut out),
        Command::StabilityProbe => run_probe(cfg, &mut out),
    };
    match result {
        Ok(()) => RunOutcome { code: EXIT_OK, reason: None, files: out.files },
        Err(Failure { code, kind, detail }) => RunOutcome::fail(code, kind, detail, out.files),
    }
}

struct Failure {
    code: i32,
    kind: &'static str,
    detail: String,
}

impl Failure {
    fn config(detail: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, kind: "config", detail: detail.to_string() }
    }

    fn numerical(detail: impl std::fmt::Display) -> Self {
        Self { code: EXIT_NUMERICAL, kind: "numerical", detail: detail.to_string() }
    }

    fn threshold(detail: impl std::fmt::Display) -> Self {
        Self { code: EXIT_THRESHOLD, kind: "threshold", detail: detail.to_string() }
    }

    fn dynamics(e: DynamicsError) -> Self {
        if e.is_numerical() {
            Self::numerical(e)
        } else {
            Self::config(e)
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_CONFIG, kind: "io", detail: e.to_string() }
    }
}

/// Random displacement and velocity modes of size `epsilon`.
pub fn random_spec(grid: &Grid, epsilon: f64, count: usize, seed: u64) -> DisplacementSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut wave = [0i32; 3];
        loop {
            for w in wave.iter_mut().take(d) {
                *w = if grid.is_periodic() { rng.gen_range(-2..=2) } else { rng.gen_range(1..=2) };
            }
            if wave.iter().any(|&w| w != 0) {
                break;
            }
        }
        let mut coeffs = [0.0; 3];
        for c in coeffs.iter_mut().take(d) {
            *c = rng.gen_range(-1.0..1.0) / count as f64;
        }
        let phase = if grid.is_periodic() { rng.gen_range(0.0..2.0 * PI) } else { 0.0 };
        Mode::new(wave, coeffs, phase)
    };
    let modes = (0..count).map(|_| draw(&mut rng)).collect();
    let velocity_modes = (0..count).map(|_| draw(&mut rng)).collect();
    DisplacementSpec { amplitude: epsilon, modes, velocity_amplitude: epsilon, velocity_modes }
}

/// Initial flow state of a run.
pub fn initial_state(cfg: &RunConfig) -> Result<FlowState, String> {
    let grid = cfg.grid;
    let spec = match &cfg.initial {
        InitialData::Equilibrium => return Ok(FlowState::equilibrium(grid)),
        InitialData::Manufactured(case) => return Ok(case.exact_state(&grid, 0.0)),
        InitialData::Canonical { epsilon } => DisplacementSpec::canonical(&grid, *epsilon),
        InitialData::Modes(spec) => spec.clone(),
        InitialData::Random { epsilon, count } => random_spec(&grid, *epsilon, *count, cfg.seed),
    };
    gen_initial_from_displacement(&spec, &grid).map(|(flow, _)| flow).map_err(|e| e.to_string())
}

fn stepper_config(cfg: &RunConfig, control: StepControl) -> Result<TimeStepperConfig, Failure> {
    TimeStepperConfig::new(cfg.stepper.scheme, control, cfg.stepper.t_end, cfg.stepper.sample_every).map_err(Failure::config)
}

fn run_series(cfg: &RunConfig, init: &FlowState, control: StepControl, monitors: &MonitorSet) -> Result<Simulation, Failure> {
    let stepper = stepper_config(cfg, control)?;
    let sim = match &cfg.initial {
        InitialData::Manufactured(case) => {
            let (params, grid) = (cfg.params, cfg.grid);
            let forcing = move |t: f64| -> FlowRates { forcing_fields(case, &params, &grid, t) };
            simulate(init, &stepper, &cfg.params, monitors, Some(&forcing))
        }
        _ => simulate(init, &stepper, &cfg.params, monitors, None),
    };
    sim.map_err(Failure::dynamics)
}

fn write_series(out: &mut Output, name: &str, sim: &Simulation, monitors: &MonitorSet, dim: usize) -> Result<(), Failure> {
    let reason = sim.error.as_ref().map(ToString::to_string);
    let mut w = out.create(name)?;
    write_diagnostics_csv(&sim.records, monitors, dim, reason.as_deref(), &mut w)?;
    w.flush()?;
    Ok(())
}

/// Numerical failure of a finished series: an abort or any non-finite value.
fn series_failure(sim: &Simulation) -> Option<Failure> {
    if let Some(e) = &sim.error {
        return Some(Failure::numerical(e));
    }
    sim.records.iter().position(|r| !r.is_finite()).map(|i| Failure::numerical(format!("non-finite diagnostics at t = {}", sim.records[i].t)))
}

fn run_simulate(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let init = initial_state(cfg).map_err(Failure::config)?;
    let sim = run_series(cfg, &init, cfg.stepper.control, &cfg.monitors)?;
    write_series(out, "diagnostics.csv", &sim, &cfg.monitors, cfg.grid.dim())?;
    if cfg.write_fields {
        let flow = &sim.final_state.flow;
        for (name, field) in [("rho.bin", &flow.rho), ("u.bin", &flow.u), ("F.bin", &flow.f)] {
            let mut w = out.create(name)?;
            io::write_binary(field, &mut w).map_err(|e| Failure::config(e))?;
            w.flush()?;
        }
    }
    series_failure(&sim).map_or(Ok(()), Err)
}

/// One row of `checks.csv`.
struct Check {
    name: String,
    value: f64,
    threshold: Option<f64>,
}

impl Check {
    fn passed(&self) -> bool {
        self.threshold.is_none_or(|t| self.value <= t)
    }
}

fn run_check(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let init = initial_state(cfg).map_err(Failure::config)?;
    let mut wanted = cfg.monitors.monitors().to_vec();
    wanted.extend([Monitor::Intrinsic, Monitor::Mass, Monitor::RhoF]);
    let monitors = MonitorSet::new(&wanted).with_q(cfg.monitors.q);
    let sim = run_series(cfg, &init, cfg.stepper.control, &monitors)?;
    write_series(out, "diagnostics.csv", &sim, &monitors, cfg.grid.dim())?;
    if let Some(f) = series_failure(&sim) {
        return Err(f);
    }

    let mut checks = Vec::new();
    type Getter = fn(&DiagnosticsRecord) -> Option<f64>;
    let residuals: [(&str, Getter); 4] = [
        ("det", |r| r.det_residual),
        ("piola", |r| r.piola_residual),
        ("curl", |r| r.curl_residual),
        ("trace", |r| r.trace_residual),
    ];
    for (name, get) in residuals {
        let Some(first) = sim.records.first().and_then(get) else { continue };
        let max = sim.records.iter().filter_map(get).fold(0.0, f64::max);
        checks.push(Check { name: format!("{name}_max"), value: max, threshold: Some(cfg.check.growth * first.max(cfg.check.floor)) });
    }
    if let Some(q1) = sim.records.iter().filter_map(|r| r.q1_residual).reduce(f64::max) {
        checks.push(Check { name: "q1_max".into(), value: q1, threshold: None });
    }
    let bound = cfg.check.mass_drift.unwrap_or((1e-6 * cfg.initial.epsilon()).max(cfg.check.floor));
    let report = check_conserved(&sim.records, bound);
    if let Some(m) = report.mass_drift {
        checks.push(Check { name: "mass_drift".into(), value: m, threshold: Some(bound) });
    }
    if !report.rho_f_drift.is_empty() {
        checks.push(Check { name: "rhoF_drift".into(), value: report.max_rho_f_drift(), threshold: None });
    }

    let mut w = out.create("checks.csv")?;
    writeln!(w, "check,value,threshold,pass")?;
    for c in &checks {
        let t = c.threshold.map(|t| format!("{t:.16e}")).unwrap_or_default();
        writeln!(w, "{},{:.16e},{},{}", c.name, c.value, t, c.passed())?;
    }
    w.flush()?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| format!("{} = {:.3e} > {:.3e}", c.name, c.value, c.threshold.unwrap())).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::threshold(failed.join(", ")))
    }
}

fn run_mms(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let InitialData::Manufactured(case) = &cfg.initial else {
        return Err(Failure::config("mms-convergence needs initial.case"));
    };
    let study = StudyConfig {
        params: cfg.params,
        scheme: cfg.stepper.scheme,
        t_end: cfg.stepper.t_end,
        dt: cfg.mms.dt,
        q: cfg.monitors.q,
        expected_order: cfg.mms.expected_order,
        order_tolerance: cfg.mms.tolerance,
    };
    let report = match convergence_study(case, &cfg.mms.grids, &study) {
        Ok(r) => r,
        Err(MmsError::Dynamics(e)) => return Err(Failure::dynamics(e)),
        Err(e) => return Err(Failure::config(e)),
    };
    let mut w = out.create("convergence.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    if report.entries.iter().any(|e| !e.error.is_finite()) {
        return Err(Failure::numerical("non-finite error norm"));
    }
    if report.passed {
        Ok(())
    } else {
        let worst = report
            .l2_orders()
            .into_iter()
            .max_by(|a, b| (a.2 - study.expected_order).abs().total_cmp(&(b.2 - study.expected_order).abs()));
        let detail = match worst {
            Some((field, n, o)) if !report.monotone => format!("errors not monotone; worst order {field} n={n} {o:.3}"),
            Some((field, n, o)) => format!("order {field} n={n} {o:.3} outside {} ± {}", study.expected_order, study.order_tolerance),
            None => "no orders measured".into(),
        };
        Err(Failure::threshold(detail))
    }
}

/// Single-mode right-hand sides on a torus with their exact Lamé solutions.
fn lame_modes(grid: &Grid, mu: f64, lambda: f64) -> Vec<(String, Field, Field)> {
    let d = grid.dim();
    let waves: Vec<[i32; 3]> = if d == 2 {
        vec![[1, 0, 0], [0, 1, 0], [1, 1, 0], [2, -1, 0]]
    } else {
        vec![[1, 0, 0], [0, 1, 1], [1, 1, 1], [2, 0, -1]]
    };
    let mut cases = Vec::new();
    for m in waves {
        let k: Vec<f64> = (0..d).map(|a| 2.0 * PI * m[a] as f64 / grid.length(a)).collect();
        let k2: f64 = k.iter().map(|v| v * v).sum();
        let kn = k2.sqrt();
        let longitudinal: Vec<f64> = k.iter().map(|v| v / kn).collect();
        let mut transverse = vec![0.0; d];
        let (a, b) = if k[0].abs() > 0.0 || k[1].abs() > 0.0 { (0, 1) } else { (1, 2) };
        transverse[a] = -k[b] / kn;
        transverse[b] = k[a] / kn;
        let tn: f64 = transverse.iter().map(|v| v * v).sum::<f64>().sqrt();
        transverse.iter_mut().for_each(|v| *v /= tn);
        for (label, dir, coef) in [("longitudinal", longitudinal, 1.0 / ((2.0 * mu + lambda) * k2)), ("transverse", transverse, 1.0 / (mu * k2))] {
            let kk = k.clone();
            let f = Field::from_fn(*grid, FieldKind::Vector, |x, o| {
                let s = (0..d).map(|a| kk[a] * x[a]).sum::<f64>().sin();
                for (i, v) in o.iter_mut().enumerate() {
                    *v = dir[i] * s;
                }
            });
            let exact = f.scaled(coef);
            cases.push((format!("{label}_{}_{}_{}", m[0], m[1], m[2]), f, exact));
        }
    }
    cases
}

/// Smooth random right-hand side vanishing on box walls.
fn random_box_rhs(grid: &Grid, seed: u64) -> Field {
    let spec = random_spec(grid, 1.0, 3, seed);
    let lengths: Vec<f64> = (0..grid.dim()).map(|a| grid.length(a)).collect();
    let mut f = Field::from_fn(*grid, FieldKind::Vector, |x, o| {
        o.fill(0.0);
        for m in &spec.modes {
            let s: f64 = (0..grid.dim()).map(|a| (PI * m.wave[a] as f64 * x[a] / lengths[a]).sin()).product();
            for (i, v) in o.iter_mut().enumerate() {
                *v += m.coeffs[i] * s + 0.2 * m.coeffs[(i + 1) % 3];
            }
        }
    });
    f.zero_on_boundary();
    f
}

fn run_lame(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let grid = cfg.grid;
    let p = &cfg.params;
    let mut rows: Vec<(String, &str, Option<f64>, f64, usize, bool)> = Vec::new();
    let solve = |f: &Field, opts: &EllipticSolveOptions| match lame_solve(f, p, opts) {
        Ok(s) => Ok(s),
        Err(e @ OperatorError::NotConverged { .. }) => Err(Failure::numerical(e)),
        Err(e) => Err(Failure::config(e)),
    };
    let residual = |w: &Field, f: &Field| -> Result<f64, Failure> {
        let back = lame_apply(w, p, Realization::Iterative).map_err(Failure::config)?;
        let r = lq_norm(&back.minus(f).map_err(Failure::config)?, 2.0).map_err(Failure::config)?;
        Ok(r / lq_norm(f, 2.0).map_err(Failure::config)?.max(f64::MIN_POSITIVE))
    };
    let iterative = EllipticSolveOptions::iterative();
    if grid.is_periodic() {
        for (name, f, exact) in lame_modes(&grid, p.mu, p.lambda) {
            let s = solve(&f, &EllipticSolveOptions::default_for(&grid))?;
            let err = s.field.max_diff(&exact);
            rows.push((name.clone(), "spectral", Some(err), s.relative_residual, s.iterations, err <= cfg.lame.spectral_tolerance));
            let s = solve(&f, &iterative)?;
            let res = residual(&s.field, &f)?;
            rows.push((name, "iterative", Some(s.field.max_diff(&exact)), res, s.iterations, res <= cfg.lame.iterative_tolerance));
        }
    } else {
        for k in 0..3u64 {
            let f = random_box_rhs(&grid, cfg.seed.wrapping_add(k));
            let s = solve(&f, &iterative)?;
            let res = residual(&s.field, &f)?;
            rows.push((format!("random_{k}"), "iterative", None, res, s.iterations, res <= cfg.lame.iterative_tolerance));
        }
    }
    let mut w = out.create("lame.csv")?;
    writeln!(w, "case,realization,error,residual,iterations,pass")?;
    for (name, real, err, res, it, pass) in &rows {
        let err = err.map(|e| format!("{e:.16e}")).unwrap_or_default();
        writeln!(w, "{name},{real},{err},{res:.16e},{it},{pass}")?;
    }
    w.flush()?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.5).map(|r| r.0.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::threshold(format!("lame cases outside tolerance: {}", failed.join(" "))))
    }
}

fn run_probe(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let init = initial_state(cfg).map_err(Failure::config)?;
    let (adv, visc) = match cfg.stepper.control {
        StepControl::Cfl { advective, viscous } => (advective, viscous),
        StepControl::Fixed(_) => match StepControl::DEFAULT_CFL {
            StepControl::Cfl { advective, viscous } => (advective, viscous),
            StepControl::Fixed(_) => unreachable!(),
        },
    };
    let bound = stable_dt(&init, &cfg.params, cfg.stepper.scheme, adv, visc);
    let dt = cfg.probe_factor * bound;
    let sim = run_series(cfg, &init, StepControl::Fixed(dt), &cfg.monitors)?;
    write_series(out, "probe.csv", &sim, &cfg.monitors, cfg.grid.dim())?;
    let mut w = out.create("probe_summary.csv")?;
    writeln!(w, "scheme,cfl_dt,dt,factor,steps,completed")?;
    writeln!(w, "{},{bound:.16e},{dt:.16e},{},{},{}", cfg.stepper.scheme.name(), cfg.probe_factor, sim.steps, sim.completed())?;
    w.flush()?;
    series_failure(&sim).map_or(Ok(()), Err)
}

/// Resolve `--out` and `--seed` overrides onto a parsed config.
pub fn with_overrides(mut cfg: RunConfig, out: Option<&Path>, seed: Option<u64>) -> RunConfig {
    if let Some(dir) = out {
        cfg.output_dir = dir.to_path_buf();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}
