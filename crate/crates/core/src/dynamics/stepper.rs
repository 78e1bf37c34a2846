use std::sync::Mutex;

use super::rhs::{assemble_full, rhs_sigma, FlowRates, Viscous};
use super::{DynamicsError, FlowState, MaterialParams};
use crate::fields::Field;
use crate::operators::ViscousImplicit;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4Explicit,
    /// ARS(2,2,2): viscous operator implicit, everything else explicit.
    Imex,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4Explicit => "rk4",
            Scheme::Imex => "imex",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepControl {
    Fixed(f64),
    Cfl { advective: f64, viscous: f64 },
}

impl StepControl {
    pub const DEFAULT_CFL: StepControl = StepControl::Cfl { advective: 0.5, viscous: 0.25 };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStepperConfig {
    pub scheme: Scheme,
    pub control: StepControl,
    pub t_end: f64,
    pub sample_every: usize,
}

impl TimeStepperConfig {
    pub fn new(scheme: Scheme, control: StepControl, t_end: f64, sample_every: usize) -> Result<Self, DynamicsError> {
        let cfg = Self { scheme, control, t_end, sample_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: String| Err(DynamicsError::InvalidConfig(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be positive".into());
        }
        match self.control {
            StepControl::Fixed(dt) if !(dt > 0.0) => bad(format!("dt = {dt} must be positive")),
            StepControl::Cfl { advective, viscous } if !(advective > 0.0 && viscous > 0.0) => {
                bad(format!("CFL numbers ({advective}, {viscous}) must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Explicit stability limit
/// `min(adv·h/(max|u| + c_s), visc·h²/(2μ+λ))`, `c_s = √P'(max ϱ)`.
/// The viscous bound is dropped for [`Scheme::Imex`].
pub fn stable_dt(s: &FlowState, params: &MaterialParams, scheme: Scheme, advective: f64, viscous: f64) -> f64 {
    let h = s.grid().min_spacing();
    let rho_max = s.rho.values().iter().fold(0.0f64, |m, v| m.max(*v));
    let speed = s.u.max_abs() + params.sound_speed(rho_max);
    let adv = advective * h / speed;
    match scheme {
        Scheme::Imex => adv,
        Scheme::Rk4Explicit => adv.min(viscous * h * h / (2.0 * params.mu + params.lambda).abs()),
    }
}

/// Flow state plus the optional transported `σ = ∇ln ϱ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub flow: FlowState,
    pub sigma: Option<Field>,
}

#[derive(Clone, Debug)]
struct Rates {
    flow: FlowRates,
    sigma: Option<Field>,
}

/// Space-time forcing `(g_ϱ, g_u, g_F)` evaluated on the grid at time `t`.
pub type Forcing<'a> = &'a (dyn Fn(f64) -> FlowRates + Sync);

/// Time integrator bound to one grid, parameter set and optional forcing.
pub struct Integrator<'a> {
    params: MaterialParams,
    scheme: Scheme,
    forcing: Option<Forcing<'a>>,
    implicit: Option<ViscousImplicit>,
    cache: Mutex<Vec<(u64, FlowRates)>>,
}

const IMEX_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

impl<'a> Integrator<'a> {
    pub fn new(grid: &crate::fields::Grid, params: MaterialParams, scheme: Scheme, forcing: Option<Forcing<'a>>) -> Self {
        let implicit = (scheme == Scheme::Imex).then(|| ViscousImplicit::new(grid, &params));
        Self { params, scheme, forcing, implicit, cache: Mutex::new(Vec::new()) }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    /// Forcing at `t`, memoized over the last few stage times.
    fn forcing_at(&self, t: f64) -> Option<FlowRates> {
        let forcing = self.forcing?;
        let key = t.to_bits();
        let mut cache = self.cache.lock().expect("forcing cache");
        if let Some((_, g)) = cache.iter().find(|(k, _)| *k == key) {
            return Some(g.clone());
        }
        let g = forcing(t);
        if cache.len() >= 4 {
            cache.remove(0);
        }
        cache.push((key, g.clone()));
        Some(g)
    }

    fn rates(&self, s: &SimState, t: f64, viscous: Viscous) -> Result<Rates, DynamicsError> {
        let g = self.forcing_at(t);
        let flow = assemble_full(&s.flow, &self.params, g.as_ref(), viscous)?;
        let sigma = s.sigma.as_ref().map(|sig| rhs_sigma(&s.flow.u, sig));
        Ok(Rates { flow, sigma })
    }

    /// One step of size `dt` from `s`.
    pub fn step(&self, s: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        match self.scheme {
            Scheme::Rk4Explicit => self.rk4(s, dt),
            Scheme::Imex => self.imex(s, dt),
        }
    }

    fn rk4(&self, s: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        let t = s.flow.t;
        let k1 = self.rates(s, t, Viscous::Full)?;
        let y2 = stage(s, &[(0.5 * dt, &k1)], t + 0.5 * dt, 1)?;
        let k2 = self.rates(&y2, t + 0.5 * dt, Viscous::Full)?;
        let y3 = stage(s, &[(0.5 * dt, &k2)], t + 0.5 * dt, 2)?;
        let k3 = self.rates(&y3, t + 0.5 * dt, Viscous::Full)?;
        let y4 = stage(s, &[(dt, &k3)], t + dt, 3)?;
        let k4 = self.rates(&y4, t + dt, Viscous::Full)?;
        let sixth = dt / 6.0;
        stage(s, &[(sixth, &k1), (2.0 * sixth, &k2), (2.0 * sixth, &k3), (sixth, &k4)], t + dt, 4)
    }

    fn imex(&self, s: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        let implicit = self.implicit.as_ref().expect("implicit solver for IMEX");
        let t = s.flow.t;
        let g = IMEX_GAMMA;
        let delta = 1.0 - 1.0 / (2.0 * g);
        let tau = g * dt;

        let k1 = self.rates(s, t, Viscous::Remainder)?;
        let mut y2 = stage(s, &[(g * dt, &k1)], t + g * dt, 1)?;
        let predicted = y2.flow.u.clone();
        y2.flow.u = implicit.solve(&predicted, tau)?;
        check_finite(&y2, 1)?;
        // Implicit rate at stage 2, recovered from the solve.
        let mut ki2 = y2.flow.u.minus(&predicted)?.scaled(1.0 / tau);
        ki2.zero_on_boundary();

        let k2 = self.rates(&y2, t + g * dt, Viscous::Remainder)?;
        let mut y3 = stage(s, &[(delta * dt, &k1), ((1.0 - delta) * dt, &k2)], t + dt, 2)?;
        y3.flow.u.axpy((1.0 - g) * dt, &ki2)?;
        let predicted = y3.flow.u.clone();
        y3.flow.u = implicit.solve(&predicted, tau)?;
        y3.flow.u.zero_on_boundary();
        check_finite(&y3, 2)?;
        Ok(y3)
    }

    /// Advance to `t_end` with the given control, invoking `on_step(step, state)`
    /// after every step.
    pub fn run_until(
        &self,
        init: SimState,
        control: StepControl,
        t_end: f64,
        mut on_step: impl FnMut(usize, &SimState) -> Result<(), DynamicsError>,
    ) -> Result<SimState, (SimState, DynamicsError)> {
        let mut s = init;
        let mut step = 0;
        let eps = 1e-12 * t_end.abs().max(1.0);
        while s.flow.t < t_end - eps {
            let dt = match control {
                StepControl::Fixed(dt) => dt,
                StepControl::Cfl { advective, viscous } => stable_dt(&s.flow, &self.params, self.scheme, advective, viscous),
            };
            let dt = dt.min(t_end - s.flow.t);
            let mut next = match self.step(&s, dt) {
                Ok(n) => n,
                Err(e) => return Err((s, e)),
            };
            // Land exactly on t_end rather than accumulating round-off.
            if t_end - next.flow.t <= eps {
                next.flow.t = t_end;
            }
            s = next;
            step += 1;
            if let Err(e) = on_step(step, &s) {
                return Err((s, e));
            }
        }
        Ok(s)
    }
}

fn check_finite(s: &SimState, stage: usize) -> Result<(), DynamicsError> {
    let blocks = [&s.flow.rho, &s.flow.u, &s.flow.f];
    let bad = blocks
        .iter()
        .copied()
        .chain(s.sigma.as_ref())
        .find_map(|f| f.first_non_finite().map(|(node, _)| node));
    match bad {
        Some(node) => Err(DynamicsError::NonFinite { stage, t: s.flow.t, node }),
        None => Ok(()),
    }
}

/// `base + Σ c_k K_k` at time `t`, with the no-slip condition re-imposed.
fn stage(base: &SimState, terms: &[(f64, &Rates)], t: f64, index: usize) -> Result<SimState, DynamicsError> {
    let mut out = base.clone();
    for (c, k) in terms {
        out.flow.rho.axpy(*c, &k.flow.rho)?;
        out.flow.u.axpy(*c, &k.flow.u)?;
        out.flow.f.axpy(*c, &k.flow.f)?;
        if let (Some(sig), Some(ks)) = (out.sigma.as_mut(), k.sigma.as_ref()) {
            sig.axpy(*c, ks)?;
        }
    }
    out.flow.u.zero_on_boundary();
    out.flow.t = t;
    check_finite(&out, index)?;
    Ok(out)
}

/// Advance a flow state by one step chosen from `cfg.control`.
pub fn advance(s: &FlowState, cfg: &TimeStepperConfig, params: &MaterialParams) -> Result<FlowState, DynamicsError> {
    let dt = match cfg.control {
        StepControl::Fixed(dt) => dt,
        StepControl::Cfl { advective, viscous } => stable_dt(s, params, cfg.scheme, advective, viscous),
    };
    let integrator = Integrator::new(s.grid(), *params, cfg.scheme, None);
    Ok(integrator.step(&SimState { flow: s.clone(), sigma: None }, dt)?.flow)
}
