use std::fmt::Write as _;
use std::io::Write;

use super::cases::{forcing_fields, ManufacturedCase};
use super::MmsError;
use crate::compat::MonitorSet;
use crate::dynamics::{simulate, stable_dt, FlowRates, FlowState, MaterialParams, Scheme, StepControl, TimeStepperConfig};
use crate::fields::{lq_norm, Field};
use crate::par;

/// How the time step follows the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    /// Default CFL numbers evaluated on each grid's initial state.
    Cfl,
    /// `dt = c·h`.
    Linear(f64),
    /// `dt = c·h²`.
    Quadratic(f64),
    /// Same `dt` on every grid.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyConfig {
    pub params: MaterialParams,
    pub scheme: Scheme,
    pub t_end: f64,
    pub dt: DtPolicy,
    /// Exponent of the second error norm (the first is `L²`).
    pub q: f64,
    pub expected_order: f64,
    pub order_tolerance: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            params: MaterialParams::default(),
            scheme: Scheme::Rk4Explicit,
            t_end: 0.25,
            dt: DtPolicy::Cfl,
            q: 4.0,
            expected_order: 2.0,
            order_tolerance: 0.3,
        }
    }
}

/// Errors below this are treated as exact and need no order.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorEntry {
    pub cells: usize,
    pub field: &'static str,
    pub norm: String,
    pub error: f64,
    /// `log₂(e_coarser / e_this)`; `None` on the coarsest grid.
    pub order: Option<f64>,
}

/// Per-grid errors at `t_end` and observed orders.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub case: &'static str,
    pub grids: Vec<usize>,
    pub dts: Vec<f64>,
    pub entries: Vec<ErrorEntry>,
    pub expected_order: f64,
    pub order_tolerance: f64,
    pub monotone: bool,
    pub passed: bool,
}

pub const FIELDS: [&str; 3] = ["rho", "u", "F"];

impl ConvergenceReport {
    pub fn error(&self, cells: usize, field: &str, norm: &str) -> Option<f64> {
        self.find(cells, field, norm).map(|e| e.error)
    }

    pub fn order(&self, cells: usize, field: &str, norm: &str) -> Option<f64> {
        self.find(cells, field, norm).and_then(|e| e.order)
    }

    fn find(&self, cells: usize, field: &str, norm: &str) -> Option<&ErrorEntry> {
        self.entries.iter().find(|e| e.cells == cells && e.field == field && e.norm == norm)
    }

    /// Observed `L²` orders of every field on every refinement.
    pub fn l2_orders(&self) -> Vec<(&'static str, usize, f64)> {
        self.entries
            .iter()
            .filter(|e| e.norm == "L2")
            .filter_map(|e| e.order.map(|o| (e.field, e.cells, o)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "grid,field,norm,error,order")?;
        for e in &self.entries {
            let order = e.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            writeln!(w, "{},{},{},{:.16e},{}", e.cells, e.field, e.norm, e.error, order)?;
        }
        Ok(())
    }

    /// Human-readable pass/fail summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "case {}: {} (expected order {} ± {})",
            self.case,
            if self.passed { "PASS" } else { "FAIL" },
            self.expected_order,
            self.order_tolerance
        );
        for e in &self.entries {
            let order = e.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "  n={:<4} {:<3} {:<3} error {:.3e} order {}", e.cells, e.field, e.norm, e.error, order);
        }
        if !self.monotone {
            let _ = writeln!(s, "  errors are not monotonically decreasing");
        }
        s
    }
}

fn step_for(policy: DtPolicy, s: &FlowState, cfg: &StudyConfig) -> f64 {
    let h = s.grid().min_spacing();
    match policy {
        DtPolicy::Cfl => match StepControl::DEFAULT_CFL {
            StepControl::Cfl { advective, viscous } => stable_dt(s, &cfg.params, cfg.scheme, advective, viscous),
            StepControl::Fixed(dt) => dt,
        },
        DtPolicy::Linear(c) => c * h,
        DtPolicy::Quadratic(c) => c * h * h,
        DtPolicy::Fixed(dt) => dt,
    }
}

/// Final-time errors of one grid run: for each field, `(L², L^q)`.
fn run_grid(case: &ManufacturedCase, cells: usize, cfg: &StudyConfig) -> Result<(f64, [[f64; 2]; 3]), MmsError> {
    let grid = case.grid(cells)?;
    let init = case.exact_state(&grid, 0.0);
    let dt = step_for(cfg.dt, &init, cfg);
    let stepper = TimeStepperConfig::new(cfg.scheme, StepControl::Fixed(dt), cfg.t_end, usize::MAX)?;
    let params = cfg.params;
    let forcing = move |t: f64| -> FlowRates { forcing_fields(case, &params, &grid, t) };
    let sim = simulate(&init, &stepper, &cfg.params, &MonitorSet::new(&[]), Some(&forcing))?;
    if let Some(e) = sim.error {
        return Err(e.into());
    }
    let exact = case.exact_state(&grid, cfg.t_end);
    let got = &sim.final_state.flow;
    let pairs: [(&Field, &Field); 3] = [(&got.rho, &exact.rho), (&got.u, &exact.u), (&got.f, &exact.f)];
    let mut errs = [[0.0; 2]; 3];
    for (k, (a, b)) in pairs.iter().enumerate() {
        let diff = a.minus(b)?;
        errs[k] = [lq_norm(&diff, 2.0)?, lq_norm(&diff, cfg.q)?];
    }
    Ok((dt, errs))
}

/// Run the case on every grid (concurrently) and compare with the exact
/// solution at `t_end`.
pub fn convergence_study(case: &ManufacturedCase, grids: &[usize], cfg: &StudyConfig) -> Result<ConvergenceReport, MmsError> {
    if grids.len() < 3 {
        return Err(MmsError::InvalidStudy(format!("need at least 3 grids, got {}", grids.len())));
    }
    if grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(MmsError::InvalidStudy(format!("each grid must refine the previous by 2: {grids:?}")));
    }
    cfg.params.validate(case.dim).map_err(MmsError::InvalidStudy)?;
    let runs = par::map_items(grids, |&n| run_grid(case, n, cfg));
    let runs: Vec<(f64, [[f64; 2]; 3])> = runs.into_iter().collect::<Result<_, _>>()?;

    let q_name = format!("L{}", cfg.q);
    let mut entries = Vec::new();
    let mut monotone = true;
    let mut orders_ok = true;
    for (g, (_, errs)) in runs.iter().enumerate() {
        for (k, field) in FIELDS.iter().enumerate() {
            for (m, norm) in ["L2".to_string(), q_name.clone()].into_iter().enumerate() {
                let error = errs[k][m];
                let order = (g > 0).then(|| {
                    let coarse = runs[g - 1].1[k][m];
                    if coarse <= EXACT_FLOOR && error <= EXACT_FLOOR {
                        None
                    } else {
                        if error > coarse {
                            monotone = false;
                        }
                        Some((coarse / error).log2())
                    }
                });
                let order = order.flatten();
                if m == 0 {
                    if let Some(o) = order {
                        if (o - cfg.expected_order).abs() > cfg.order_tolerance {
                            orders_ok = false;
                        }
                    }
                }
                entries.push(ErrorEntry { cells: grids[g], field, norm, error, order });
            }
        }
    }
    Ok(ConvergenceReport {
        case: case.name,
        grids: grids.to_vec(),
        dts: runs.iter().map(|r| r.0).collect(),
        entries,
        expected_order: cfg.expected_order,
        order_tolerance: cfg.order_tolerance,
        monotone,
        passed: monotone && orders_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_study_is_exact() {
        let case = ManufacturedCase::by_name("equilibrium2d").unwrap();
        let cfg = StudyConfig { t_end: 0.05, ..Default::default() };
        let r = convergence_study(&case, &[8, 16, 32], &cfg).unwrap();
        assert!(r.passed);
        assert!(r.entries.iter().all(|e| e.error <= 1e-13 && e.order.is_none()));
    }

    #[test]
    fn grid_sequence_validated() {
        let case = ManufacturedCase::by_name("smooth2d").unwrap();
        let cfg = StudyConfig::default();
        assert!(convergence_study(&case, &[8, 16], &cfg).is_err());
        assert!(convergence_study(&case, &[8, 16, 24], &cfg).is_err());
    }

    #[test]
    fn report_csv_has_header_and_rows() {
        let case = ManufacturedCase::by_name("equilibrium2d").unwrap();
        let cfg = StudyConfig { t_end: 0.01, ..Default::default() };
        let r = convergence_study(&case, &[8, 16, 32], &cfg).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("grid,field,norm,error,order\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 3 * 2);
        assert!(r.summary().contains("PASS"));
    }
}
