use super::stepper::{Forcing, Integrator, SimState};
use super::{DynamicsError, FlowState, MaterialParams, TimeStepperConfig};
use crate::compat::{diagnose, CompatError, DiagnosticsRecord, Monitor, MonitorSet};
use crate::operators::stencil::gradient_raw;

/// Outcome of [`simulate`]: the sampled series, the last state reached and,
/// for an aborted run, the error that stopped it.
#[derive(Debug)]
pub struct Simulation {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
    pub steps: usize,
    pub error: Option<DynamicsError>,
}

impl Simulation {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

impl From<CompatError> for DynamicsError {
    fn from(e: CompatError) -> Self {
        match e {
            CompatError::Operator(op) => DynamicsError::Operator(op),
            CompatError::Field(f) => DynamicsError::Field(f),
            other => DynamicsError::InvalidState(other.to_string()),
        }
    }
}

/// Integrate from `init` to `cfg.t_end`, recording the selected monitors at
/// step 0, every `cfg.sample_every` steps and at the final time.
///
/// Invalid input is an `Err`; a numerical failure during the run returns the
/// partial series with [`Simulation::error`] set.
pub fn simulate(
    init: &FlowState,
    cfg: &TimeStepperConfig,
    params: &MaterialParams,
    monitors: &MonitorSet,
    forcing: Option<Forcing<'_>>,
) -> Result<Simulation, DynamicsError> {
    cfg.validate()?;
    let grid = *init.grid();
    params.validate(grid.dim()).map_err(DynamicsError::InvalidParams)?;
    init.validate()?;
    monitors.validate(&grid)?;

    let sigma = monitors.contains(Monitor::Sigma).then(|| gradient_raw(&init.rho.map(f64::ln)));
    let start = SimState { flow: init.clone(), sigma };
    let integrator = Integrator::new(&grid, *params, cfg.scheme, forcing);

    let mut records = vec![diagnose(&start, params, monitors)?];
    let mut steps = 0;
    let outcome = integrator.run_until(start, cfg.control, cfg.t_end, |step, s| {
        steps = step;
        if step % cfg.sample_every == 0 {
            records.push(diagnose(s, params, monitors)?);
        }
        Ok(())
    });
    let (final_state, error) = match outcome {
        Ok(s) => (s, None),
        Err((s, e)) => (s, Some(e)),
    };
    if error.is_none() && records.last().map(|r| r.t) != Some(final_state.flow.t) {
        records.push(diagnose(&final_state, params, monitors)?);
    }
    Ok(Simulation { records, final_state, steps, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Scheme, StepControl};
    use crate::fields::Grid;

    #[test]
    fn equilibrium_series_is_flat() {
        let g = Grid::periodic_cube(2, 8, 1.0).unwrap();
        let cfg = TimeStepperConfig::new(Scheme::Rk4Explicit, StepControl::DEFAULT_CFL, 0.01, 3).unwrap();
        let sim = simulate(&FlowState::equilibrium(g), &cfg, &MaterialParams::default(), &MonitorSet::all(), None).unwrap();
        assert!(sim.completed());
        assert_eq!(sim.records.last().unwrap().t, 0.01);
        for r in &sim.records {
            assert!(r.max_intrinsic().unwrap() <= 1e-13);
            assert!(r.sigma_mismatch.unwrap() == 0.0);
            assert!(r.norms.iter().all(|(_, v)| *v <= 1e-14));
        }
    }
}
