use std::io::Write;

use super::checks::{check_intrinsic, check_q1_identity, check_trace_constraint, conserved_integrals, sigma_mismatch, z_monitor};
use super::CompatError;
use crate::dynamics::{MaterialParams, SimState};
use crate::fields::{lq_norm, w1q_norm, w2q_norm, Grid};
use crate::operators::EllipticSolveOptions;

/// Diagnostic families recorded by the simulation loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Monitor {
    Intrinsic,
    Trace,
    Q1,
    Sigma,
    Mass,
    RhoF,
    Norms,
    Z,
}

impl Monitor {
    pub const ALL: [Monitor; 8] =
        [Monitor::Intrinsic, Monitor::Trace, Monitor::Q1, Monitor::Sigma, Monitor::Mass, Monitor::RhoF, Monitor::Norms, Monitor::Z];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::Intrinsic => "intrinsic",
            Monitor::Trace => "trace",
            Monitor::Q1 => "q1",
            Monitor::Sigma => "sigma",
            Monitor::Mass => "mass",
            Monitor::RhoF => "rhoF",
            Monitor::Norms => "norms",
            Monitor::Z => "z",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn periodic_only(self) -> bool {
        self == Monitor::Q1
    }
}

/// Selected monitors (kept sorted and deduplicated) and the residual exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSet {
    monitors: Vec<Monitor>,
    pub q: f64,
}

impl MonitorSet {
    pub fn new(monitors: &[Monitor]) -> Self {
        let mut m = monitors.to_vec();
        m.sort();
        m.dedup();
        Self { monitors: m, q: super::DEFAULT_RESIDUAL_Q }
    }

    pub fn all() -> Self {
        Self::new(&Monitor::ALL)
    }

    /// Everything that is defined on `grid`.
    pub fn all_for(grid: &Grid) -> Self {
        let m: Vec<Monitor> = Monitor::ALL.into_iter().filter(|m| grid.is_periodic() || !m.periodic_only()).collect();
        Self::new(&m)
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn contains(&self, m: Monitor) -> bool {
        self.monitors.contains(&m)
    }

    pub fn monitors(&self) -> &[Monitor] {
        &self.monitors
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), CompatError> {
        if !(self.q >= 1.0) {
            return Err(CompatError::InvalidSpec(format!("residual exponent {} must be at least 1", self.q)));
        }
        if let Some(m) = self.monitors.iter().find(|m| m.periodic_only() && !grid.is_periodic()) {
            return Err(CompatError::PeriodicOnly(m.name()));
        }
        Ok(())
    }

    /// CSV column names: `t`, residuals, integrals, then norms.
    pub fn columns(&self, dim: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        let has = |m| self.contains(m);
        if has(Monitor::Intrinsic) {
            cols.extend(["det_residual", "piola_residual", "curl_residual"].map(String::from));
        }
        if has(Monitor::Trace) {
            cols.push("trace_residual".into());
        }
        if has(Monitor::Q1) {
            cols.push("q1_residual".into());
        }
        if has(Monitor::Sigma) {
            cols.push("sigma_mismatch".into());
        }
        if has(Monitor::Mass) {
            cols.push("mass_integral".into());
        }
        if has(Monitor::RhoF) {
            for i in 1..=dim {
                for j in 1..=dim {
                    cols.push(format!("rhoF{i}{j}"));
                }
            }
        }
        if has(Monitor::Norms) {
            cols.extend(NORM_KEYS.map(String::from));
        }
        if has(Monitor::Z) {
            cols.extend(["z_lq", "z_w1q", "z1_lq", "z1_w1q", "z_consistency"].map(String::from));
        }
        cols
    }
}

/// Keys of [`DiagnosticsRecord::norms`], in column order.
pub const NORM_KEYS: [&str; 5] = ["rho_w1q", "u_lq", "u_w1q", "u_w2q", "E_w1q"];

/// One time sample of every selected diagnostic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub det_residual: Option<f64>,
    pub piola_residual: Option<f64>,
    pub curl_residual: Option<f64>,
    pub trace_residual: Option<f64>,
    pub q1_residual: Option<f64>,
    pub sigma_mismatch: Option<f64>,
    pub mass_integral: Option<f64>,
    pub rho_f_integrals: Option<Vec<f64>>,
    pub norms: Vec<(&'static str, f64)>,
    /// `(‖Z‖_q, ‖Z‖_{1,q}, ‖Z₁‖_q, ‖Z₁‖_{1,q}, consistency)`.
    pub z_norms: Option<[f64; 5]>,
}

impl DiagnosticsRecord {
    /// Values in the order of [`MonitorSet::columns`].
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        for x in [self.det_residual, self.piola_residual, self.curl_residual, self.trace_residual, self.q1_residual, self.sigma_mismatch, self.mass_integral]
            .into_iter()
            .flatten()
        {
            v.push(x);
        }
        if let Some(r) = &self.rho_f_integrals {
            v.extend(r);
        }
        v.extend(self.norms.iter().map(|(_, x)| *x));
        if let Some(z) = self.z_norms {
            v.extend(z);
        }
        v
    }

    pub fn norm(&self, key: &str) -> Option<f64> {
        self.norms.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    /// Largest of the three intrinsic residuals.
    pub fn max_intrinsic(&self) -> Option<f64> {
        Some(self.det_residual?.max(self.piola_residual?).max(self.curl_residual?))
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Evaluate the selected monitors on one state.
pub fn diagnose(s: &SimState, params: &MaterialParams, set: &MonitorSet) -> Result<DiagnosticsRecord, CompatError> {
    let flow = &s.flow;
    let q = set.q;
    let mut rec = DiagnosticsRecord { t: flow.t, ..Default::default() };
    let needs_perturb = [Monitor::Trace, Monitor::Q1, Monitor::Norms, Monitor::Z].iter().any(|m| set.contains(*m));
    let pert = needs_perturb.then(|| flow.to_perturb());
    if set.contains(Monitor::Intrinsic) {
        let r = check_intrinsic(flow, q)?;
        rec.det_residual = Some(r.det);
        rec.piola_residual = Some(r.piola);
        rec.curl_residual = Some(r.curl);
    }
    if set.contains(Monitor::Trace) {
        rec.trace_residual = Some(check_trace_constraint(pert.as_ref().expect("perturbation state")));
    }
    if set.contains(Monitor::Q1) {
        rec.q1_residual = Some(check_q1_identity(pert.as_ref().expect("perturbation state"), q)?);
    }
    if set.contains(Monitor::Sigma) {
        let sigma = s.sigma.as_ref().ok_or_else(|| CompatError::InvalidState("σ is not being transported".into()))?;
        rec.sigma_mismatch = Some(sigma_mismatch(&flow.rho, sigma, q)?);
    }
    if set.contains(Monitor::Mass) || set.contains(Monitor::RhoF) {
        let (mass, rho_f) = conserved_integrals(flow)?;
        if set.contains(Monitor::Mass) {
            rec.mass_integral = Some(mass);
        }
        if set.contains(Monitor::RhoF) {
            rec.rho_f_integrals = Some(rho_f);
        }
    }
    if set.contains(Monitor::Norms) {
        let p = pert.as_ref().expect("perturbation state");
        rec.norms = vec![
            (NORM_KEYS[0], w1q_norm(&p.rho_tilde, q)?),
            (NORM_KEYS[1], lq_norm(&p.u, q)?),
            (NORM_KEYS[2], w1q_norm(&p.u, q)?),
            (NORM_KEYS[3], w2q_norm(&p.u, q)?),
            (NORM_KEYS[4], w1q_norm(&p.e, q)?),
        ];
    }
    if set.contains(Monitor::Z) {
        let opts = EllipticSolveOptions::default_for(flow.grid());
        let z = z_monitor(pert.as_ref().expect("perturbation state"), params, &opts, q)?;
        rec.z_norms = Some([z.z_norms.0, z.z_norms.1, z.z1_norms.0, z.z1_norms.1, z.consistency]);
    }
    Ok(rec)
}

/// Write a diagnostics series as CSV with 17 significant digits. A trailing
/// `# aborted: ...` line marks a partial series.
pub fn write_diagnostics_csv<W: Write>(
    records: &[DiagnosticsRecord],
    set: &MonitorSet,
    dim: usize,
    abort_reason: Option<&str>,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{}", set.columns(dim).join(","))?;
    for r in records {
        let row: Vec<String> = r.values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    if let Some(reason) = abort_reason {
        writeln!(w, "# aborted: {}", reason.replace('\n', " "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FlowState;

    #[test]
    fn columns_match_record_values() {
        for dim in [2, 3] {
            let g = Grid::periodic_cube(dim, 8, 1.0).unwrap();
            let flow = FlowState::equilibrium(g);
            let sigma = Some(crate::fields::Field::zeros(g, crate::fields::FieldKind::Vector));
            for set in [MonitorSet::all(), MonitorSet::new(&[Monitor::Mass]), MonitorSet::new(&[Monitor::Z, Monitor::Trace])] {
                let rec = diagnose(&SimState { flow: flow.clone(), sigma: sigma.clone() }, &MaterialParams::default(), &set).unwrap();
                assert_eq!(rec.values().len(), set.columns(dim).len());
            }
        }
    }

    #[test]
    fn q1_monitor_rejected_on_box() {
        let g = Grid::box_cube(2, 8, 1.0).unwrap();
        assert!(MonitorSet::all().validate(&g).is_err());
        assert!(MonitorSet::all_for(&g).validate(&g).is_ok());
    }

    #[test]
    fn monitor_names_round_trip() {
        for m in Monitor::ALL {
            assert_eq!(Monitor::parse(m.name()), Some(m));
        }
        assert_eq!(Monitor::parse("bogus"), None);
    }
}
