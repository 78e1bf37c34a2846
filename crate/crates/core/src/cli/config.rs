use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use crate::compat::{DisplacementSpec, Mode, Monitor, MonitorSet};
use crate::dynamics::{MaterialParams, Scheme, StepControl};
use crate::fields::{Boundary, Grid};
use crate::mms::{DtPolicy, ManufacturedCase};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    CheckInvariants,
    MmsConvergence,
    LameTest,
    StabilityProbe,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Simulate, Command::CheckInvariants, Command::MmsConvergence, Command::LameTest, Command::StabilityProbe];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CheckInvariants => "check-invariants",
            Command::MmsConvergence => "mms-convergence",
            Command::LameTest => "lame-test",
            Command::StabilityProbe => "stability-probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Initial data for time-dependent commands.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Equilibrium,
    /// The reference three-mode compatible data of size `epsilon`.
    Canonical { epsilon: f64 },
    /// Explicit modes.
    Modes(DisplacementSpec),
    /// `count` displacement and velocity modes drawn from the run seed.
    Random { epsilon: f64, count: usize },
    /// Exact state of a manufactured case at `t = 0`.
    Manufactured(ManufacturedCase),
}

impl InitialData {
    /// Size of the perturbation, used to scale the default drift bound.
    pub fn epsilon(&self) -> f64 {
        match self {
            InitialData::Equilibrium => 0.0,
            InitialData::Canonical { epsilon } | InitialData::Random { epsilon, .. } => *epsilon,
            InitialData::Modes(spec) => spec.amplitude.abs().max(spec.velocity_amplitude.abs()),
            InitialData::Manufactured(_) => crate::mms::CASE_EPSILON,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperSpec {
    pub scheme: Scheme,
    pub control: StepControl,
    pub t_end: f64,
    pub sample_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsSpec {
    pub grids: Vec<usize>,
    pub dt: DtPolicy,
    pub expected_order: f64,
    pub tolerance: f64,
}

/// Thresholds of `check-invariants`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckSpec {
    /// Residuals may grow to this multiple of their initial value.
    pub growth: f64,
    /// Absolute slack for residuals that start at round-off.
    pub floor: f64,
    /// Allowed drift per unit time of `∫ϱ`; `None` means `1e-6·ε`.
    pub mass_drift: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LameSpec {
    pub spectral_tolerance: f64,
    pub iterative_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub grid: Grid,
    pub params: MaterialParams,
    pub stepper: StepperSpec,
    pub initial: InitialData,
    pub monitors: MonitorSet,
    pub mms: MmsSpec,
    pub check: CheckSpec,
    pub lame: LameSpec,
    /// `stability-probe` runs at this multiple of the CFL step.
    pub probe_factor: f64,
    pub output_dir: PathBuf,
    pub write_fields: bool,
    pub seed: u64,
}

/// One problem in a config file. `line` is 1-based; `None` for problems not
/// tied to a line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn messages(&self) -> Vec<&str> {
        self.0.iter().map(|e| e.message.as_str()).collect()
    }
}

const KEYS: &[&str] = &[
    "command",
    "seed",
    "grid.dim",
    "grid.cells",
    "grid.length",
    "grid.boundary",
    "material.mu",
    "material.lambda",
    "material.pressure_a",
    "material.pressure_gamma",
    "stepper.scheme",
    "stepper.dt",
    "stepper.cfl",
    "stepper.t_end",
    "stepper.sample_every",
    "initial.source",
    "initial.epsilon",
    "initial.case",
    "initial.modes",
    "initial.amplitude",
    "initial.mode",
    "initial.velocity_amplitude",
    "initial.velocity_mode",
    "diagnostics.monitors",
    "diagnostics.q",
    "mms.grids",
    "mms.dt",
    "mms.expected_order",
    "mms.tolerance",
    "check.growth",
    "check.floor",
    "check.mass_drift",
    "lame.spectral_tolerance",
    "lame.iterative_tolerance",
    "probe.factor",
    "output.dir",
    "output.fields",
];

/// Keys that may appear more than once.
const REPEATABLE: &[&str] = &["initial.mode", "initial.velocity_mode"];

struct Entries {
    map: BTreeMap<&'static str, Vec<(usize, String)>>,
    errors: Vec<ConfigError>,
}

impl Entries {
    fn err(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError { line, message: message.into() });
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).and_then(|v| v.last()).map(|(l, _)| *l)
    }

    fn raw(&self, key: &str) -> Option<(usize, String)> {
        self.map.get(key).and_then(|v| v.last()).cloned()
    }

    fn all(&self, key: &str) -> Vec<(usize, String)> {
        self.map.get(key).cloned().unwrap_or_default()
    }

    fn parsed<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let (line, text) = self.raw(key)?;
        let v = parse(&text);
        if v.is_none() {
            self.err(Some(line), format!("{key}: expected {what}, got {text:?}"));
        }
        v
    }

    fn real(&mut self, key: &str, default: f64) -> f64 {
        self.parsed(key, "a number", |s| s.parse::<f64>().ok().filter(|v| v.is_finite())).unwrap_or(default)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.real(key, default);
        if !(v > 0.0) {
            let line = self.line(key);
            self.err(line, format!("{key} must be positive, got {v}"));
            return default;
        }
        v
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        self.parsed(key, "a positive integer", |s| s.parse::<usize>().ok().filter(|&n| n > 0)).unwrap_or(default)
    }

    fn list<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
        self.parsed(key, what, |s| split_list(s).iter().map(|p| parse(p)).collect::<Option<Vec<T>>>().filter(|v| !v.is_empty()))
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// `m1 m2 m3 c1 c2 c3 [phase]`.
fn parse_mode(s: &str) -> Option<Mode> {
    let parts = split_list(s);
    if parts.len() != 6 && parts.len() != 7 {
        return None;
    }
    let mut wave = [0i32; 3];
    for (w, p) in wave.iter_mut().zip(&parts[..3]) {
        *w = p.parse().ok()?;
    }
    let mut coeffs = [0.0; 3];
    for (c, p) in coeffs.iter_mut().zip(&parts[3..6]) {
        *c = p.parse().ok().filter(|v: &f64| v.is_finite())?;
    }
    let phase = match parts.get(6) {
        Some(p) => p.parse().ok().filter(|v: &f64| v.is_finite())?,
        None => 0.0,
    };
    Some(Mode::new(wave, coeffs, phase))
}

/// `cfl`, `linear:c`, `quadratic:c` or `fixed:dt`.
fn parse_dt_policy(s: &str) -> Option<DtPolicy> {
    if s == "cfl" {
        return Some(DtPolicy::Cfl);
    }
    let (kind, value) = s.split_once(':')?;
    let v: f64 = value.trim().parse().ok().filter(|v: &f64| *v > 0.0 && v.is_finite())?;
    match kind.trim() {
        "linear" => Some(DtPolicy::Linear(v)),
        "quadratic" => Some(DtPolicy::Quadratic(v)),
        "fixed" => Some(DtPolicy::Fixed(v)),
        _ => None,
    }
}

fn tokenize(text: &str) -> Entries {
    let mut entries = Entries { map: BTreeMap::new(), errors: Vec::new() };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            entries.err(Some(line), format!("syntax error: expected `key = value`, got {content:?}"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            entries.err(Some(line), format!("unknown key {key:?}"));
            continue;
        };
        if value.is_empty() {
            entries.err(Some(line), format!("{key}: missing value"));
            continue;
        }
        let slot = entries.map.entry(known).or_default();
        if !slot.is_empty() && !REPEATABLE.contains(&known) {
            let first = slot[0].0;
            entries.err(Some(line), format!("duplicate key {key:?} (first set on line {first})"));
            continue;
        }
        slot.push((line, value.to_string()));
    }
    entries
}

fn parse_grid(e: &mut Entries, case: Option<&ManufacturedCase>) -> Option<Grid> {
    let boundary = match e.raw("grid.boundary") {
        None => case.map_or(Boundary::Periodic, |c| c.boundary()),
        Some((line, s)) => match s.as_str() {
            "periodic" => Boundary::Periodic,
            "box" | "no-slip" | "noslip" => Boundary::NoSlipBox,
            other => {
                e.err(Some(line), format!("grid.boundary: expected periodic or box, got {other:?}"));
                Boundary::Periodic
            }
        },
    };
    let dim = e.parsed("grid.dim", "2 or 3", |s| s.parse::<usize>().ok().filter(|d| *d == 2 || *d == 3));
    let dim = match (dim, case) {
        (Some(d), Some(c)) if d != c.dim => {
            let line = e.line("grid.dim");
            e.err(line, format!("grid.dim = {d} conflicts with case {} ({}D)", c.name, c.dim));
            c.dim
        }
        (Some(d), _) => d,
        (None, Some(c)) => c.dim,
        (None, None) => 2,
    };
    if let (Some(c), Some(line)) = (case, e.line("grid.boundary")) {
        if boundary != c.boundary() {
            e.err(Some(line), format!("grid.boundary conflicts with case {}", c.name));
        }
    }
    let cells = e.list("grid.cells", "cell counts", |s| s.parse::<usize>().ok()).unwrap_or_else(|| vec![32]);
    let default_length = case.map_or(if boundary == Boundary::Periodic { 2.0 * PI } else { 1.0 }, |c| c.length());
    let lengths = e
        .list("grid.length", "positive lengths", |s| s.parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite()))
        .unwrap_or_else(|| vec![default_length]);
    let expand = |v: &[usize]| if v.len() == 1 { Some(vec![v[0]; dim]) } else { (v.len() == dim).then(|| v.to_vec()) };
    let Some(cells) = expand(&cells) else {
        let line = e.line("grid.cells");
        e.err(line, format!("grid.cells: need 1 or {dim} values"));
        return None;
    };
    let lengths = if lengths.len() == 1 { vec![lengths[0]; dim] } else { lengths };
    if lengths.len() != dim {
        let line = e.line("grid.length");
        e.err(line, format!("grid.length: need 1 or {dim} values"));
        return None;
    }
    match Grid::new(&cells, &lengths, boundary) {
        Ok(g) => Some(g),
        Err(err) => {
            let line = e.line("grid.cells").or(e.line("grid.dim"));
            e.err(line, err.to_string());
            None
        }
    }
}

fn parse_params(e: &mut Entries, dim: usize) -> MaterialParams {
    let d = MaterialParams::default();
    let params = MaterialParams {
        mu: e.real("material.mu", d.mu),
        lambda: e.real("material.lambda", d.lambda),
        pressure_a: e.real("material.pressure_a", d.pressure_a),
        pressure_gamma: e.real("material.pressure_gamma", d.pressure_gamma),
    };
    if let Err(msg) = params.validate(dim) {
        let line = ["material.lambda", "material.mu", "material.pressure_a", "material.pressure_gamma"]
            .iter()
            .filter_map(|k| e.line(k))
            .max();
        e.err(line, msg);
    }
    params
}

fn parse_stepper(e: &mut Entries, command: Option<Command>) -> StepperSpec {
    let scheme = match e.raw("stepper.scheme") {
        None => Scheme::Rk4Explicit,
        Some((line, s)) => match s.as_str() {
            "rk4" => Scheme::Rk4Explicit,
            "imex" => Scheme::Imex,
            other => {
                e.err(Some(line), format!("stepper.scheme: expected rk4 or imex, got {other:?}"));
                Scheme::Rk4Explicit
            }
        },
    };
    let control = match (e.line("stepper.dt"), e.line("stepper.cfl")) {
        (Some(a), Some(b)) => {
            e.err(Some(a.max(b)), "stepper.dt and stepper.cfl are mutually exclusive");
            StepControl::DEFAULT_CFL
        }
        (Some(_), None) => StepControl::Fixed(e.positive("stepper.dt", 1e-3)),
        (None, Some(line)) => match e.list("stepper.cfl", "two positive numbers", |s| s.parse::<f64>().ok().filter(|v| *v > 0.0)) {
            Some(v) if v.len() == 2 => StepControl::Cfl { advective: v[0], viscous: v[1] },
            Some(_) => {
                e.err(Some(line), "stepper.cfl: expected `advective, viscous`");
                StepControl::DEFAULT_CFL
            }
            None => StepControl::DEFAULT_CFL,
        },
        (None, None) => StepControl::DEFAULT_CFL,
    };
    let default_t = if command == Some(Command::MmsConvergence) { 0.25 } else { 1.0 };
    StepperSpec {
        scheme,
        control,
        t_end: e.positive("stepper.t_end", default_t),
        sample_every: e.count("stepper.sample_every", 10),
    }
}

fn parse_initial(e: &mut Entries, case: Option<ManufacturedCase>) -> InitialData {
    let source = e.raw("initial.source");
    let source_line = source.as_ref().map(|s| s.0);
    let source = source.map(|s| s.1).unwrap_or_else(|| if case.is_some() { "mms".into() } else { "canonical".into() });
    let epsilon = e.real("initial.epsilon", 1e-2);
    let data = match source.as_str() {
        "equilibrium" => InitialData::Equilibrium,
        "canonical" => InitialData::Canonical { epsilon },
        "random" => InitialData::Random { epsilon, count: e.count("initial.modes", 3) },
        "modes" => {
            let mut modes = Vec::new();
            let mut velocity_modes = Vec::new();
            for (key, out) in [("initial.mode", &mut modes), ("initial.velocity_mode", &mut velocity_modes)] {
                for (line, text) in e.all(key) {
                    match parse_mode(&text) {
                        Some(m) => out.push(m),
                        None => e.err(Some(line), format!("{key}: expected `m1 m2 m3 c1 c2 c3 [phase]`, got {text:?}")),
                    }
                }
            }
            InitialData::Modes(DisplacementSpec {
                amplitude: e.real("initial.amplitude", epsilon),
                modes,
                velocity_amplitude: e.real("initial.velocity_amplitude", epsilon),
                velocity_modes,
            })
        }
        "mms" => match case {
            Some(c) => InitialData::Manufactured(c),
            None => {
                e.err(source_line, "initial.source = mms needs initial.case");
                InitialData::Equilibrium
            }
        },
        other => {
            e.err(source_line, format!("initial.source: expected equilibrium, canonical, random, modes or mms, got {other:?}"));
            InitialData::Equilibrium
        }
    };
    if case.is_some() && !matches!(data, InitialData::Manufactured(_)) {
        let line = e.line("initial.case");
        e.err(line, "initial.case requires initial.source = mms");
    }
    data
}

fn parse_monitors(e: &mut Entries, grid: Option<&Grid>) -> MonitorSet {
    let q = e.parsed("diagnostics.q", "an exponent ≥ 1", |s| s.parse::<f64>().ok().filter(|v| *v >= 1.0 && v.is_finite()));
    let set = match e.raw("diagnostics.monitors") {
        None => grid.map_or_else(MonitorSet::all, MonitorSet::all_for),
        Some((line, text)) if text == "all" => match grid {
            Some(g) if !g.is_periodic() => {
                e.err(Some(line), "monitor q1 needs a periodic grid");
                MonitorSet::all_for(g)
            }
            Some(g) => MonitorSet::all_for(g),
            None => MonitorSet::all(),
        },
        Some((line, text)) => {
            let mut chosen = Vec::new();
            for name in split_list(&text) {
                match Monitor::parse(name) {
                    Some(m) => {
                        if m.periodic_only() && grid.is_some_and(|g| !g.is_periodic()) {
                            e.err(Some(line), format!("monitor {name} needs a periodic grid"));
                        }
                        chosen.push(m);
                    }
                    None => e.err(Some(line), format!("unknown monitor {name:?}")),
                }
            }
            MonitorSet::new(&chosen)
        }
    };
    match q {
        Some(q) => set.with_q(q),
        None => set,
    }
}

/// Parse a flat `section.key = value` config.
///
/// `#` starts a comment. Every problem is reported with its line number;
/// unknown and duplicate keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_with(text, None)
}

/// Like [`parse_config`]; `command` supplies the command when the file has
/// none, and must agree with it otherwise.
pub fn parse_config_with(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigErrors> {
    let mut e = tokenize(text);

    let command = match (e.raw("command"), command) {
        (None, None) => {
            e.err(None, "missing command");
            None
        }
        (None, Some(c)) => Some(c),
        (Some((line, s)), given) => match Command::parse(&s) {
            None => {
                e.err(Some(line), format!("unknown command {s:?}"));
                given
            }
            Some(c) if given.is_some_and(|g| g != c) => {
                e.err(Some(line), format!("config command {s:?} differs from {:?}", given.unwrap().name()));
                given
            }
            Some(c) => Some(c),
        },
    };
    let seed = e.parsed("seed", "an unsigned integer", |s| s.parse::<u64>().ok()).unwrap_or(0);

    let case = match e.raw("initial.case") {
        None => None,
        Some((line, name)) => {
            let c = ManufacturedCase::by_name(&name);
            if c.is_none() {
                let known: Vec<&str> = ManufacturedCase::all().iter().map(|c| c.name).collect();
                e.err(Some(line), format!("unknown MMS case {name:?} (known: {})", known.join(", ")));
            }
            c
        }
    };
    if command == Some(Command::MmsConvergence) && case.is_none() && e.line("initial.case").is_none() {
        e.err(None, "mms-convergence needs initial.case");
    }

    let grid = parse_grid(&mut e, case.as_ref());
    let dim = grid.map_or(2, |g| g.dim());
    let params = parse_params(&mut e, dim);
    let stepper = parse_stepper(&mut e, command);
    let initial = parse_initial(&mut e, case);
    let monitors = parse_monitors(&mut e, grid.as_ref());

    let mms_grids = e.list("mms.grids", "grid sizes", |s| s.parse::<usize>().ok()).unwrap_or_else(|| vec![16, 32, 64]);
    if mms_grids.len() < 3 || mms_grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        let line = e.line("mms.grids");
        e.err(line, format!("mms.grids: need at least 3 sizes, each twice the previous, got {mms_grids:?}"));
    }
    let mms = MmsSpec {
        grids: mms_grids,
        dt: e.parsed("mms.dt", "cfl, linear:c, quadratic:c or fixed:dt", parse_dt_policy).unwrap_or(DtPolicy::Cfl),
        expected_order: e.positive("mms.expected_order", 2.0),
        tolerance: e.positive("mms.tolerance", 0.3),
    };
    let check = CheckSpec {
        growth: e.positive("check.growth", 10.0),
        floor: e.positive("check.floor", 1e-12),
        mass_drift: e.line("check.mass_drift").map(|_| e.positive("check.mass_drift", 1.0)),
    };
    let lame = LameSpec {
        spectral_tolerance: e.positive("lame.spectral_tolerance", 1e-10),
        iterative_tolerance: e.positive("lame.iterative_tolerance", 1e-8),
    };
    let probe_factor = e.positive("probe.factor", 10.0);
    let output_dir = PathBuf::from(e.raw("output.dir").map_or_else(|| "out".to_string(), |(_, s)| s));
    let write_fields = e.parsed("output.fields", "true or false", parse_bool).unwrap_or(false);

    if command == Some(Command::StabilityProbe) {
        if let Some(line) = e.line("stepper.dt") {
            e.err(Some(line), "stability-probe derives its step from the CFL bound; use stepper.cfl and probe.factor");
        }
    }
    if matches!(initial, InitialData::Manufactured(_)) && !matches!(command, None | Some(Command::MmsConvergence | Command::Simulate)) {
        let line = e.line("initial.case");
        e.err(line, format!("manufactured data is not supported by {}", command.map_or("", |c| c.name())));
    }

    if !e.errors.is_empty() {
        e.errors.sort_by_key(|err| err.line.unwrap_or(0));
        return Err(ConfigErrors(e.errors));
    }
    Ok(RunConfig {
        command: command.expect("reported above"),
        grid: grid.expect("reported above"),
        params,
        stepper,
        initial,
        monitors,
        mms,
        check,
        lame,
        probe_factor,
        output_dir,
        write_fields,
        seed,
    })
}
