use std::f64::consts::PI;

use proptest::prelude::*;

use vfl_core::compat::{
    check_conserved, check_intrinsic, check_trace_constraint, gen_initial_from_displacement, invert_map,
    DisplacementSpec, Mode, Monitor, MonitorSet,
};
use vfl_core::dynamics::{simulate, FlowState, MaterialParams, Scheme, StepControl, TimeStepperConfig};
use vfl_core::fields::Grid;

fn torus(dim: usize, n: usize) -> Grid {
    Grid::periodic_cube(dim, n, 2.0 * PI).unwrap()
}

fn modes() -> impl Strategy<Value = Vec<Mode>> {
    prop::collection::vec(
        ([-2i32..=2, -2i32..=2, -2i32..=2], prop::array::uniform3(-1.0f64..1.0), 0.0..2.0 * PI)
            .prop_map(|(w, c, p)| Mode::new(w, c, p)),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverted_map_lands_on_target(
        a in prop::array::uniform2(-0.4f64..0.4),
        k in prop::array::uniform2(1.0f64..2.0),
        x in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let psi = |p: &[f64], o: &mut [f64]| {
            o[0] = a[0] * (k[0] * p[1]).sin();
            o[1] = a[1] * (k[1] * p[0]).cos();
        };
        let lip = (a[0].abs() * k[0]).max(a[1].abs() * k[1]);
        prop_assume!(lip < 0.9);
        let r = invert_map(psi, lip, &x, 1e-13).unwrap();
        let mut p = [0.0; 2];
        psi(&r.point, &mut p);
        for i in 0..2 {
            prop_assert!((r.point[i] + p[i] - x[i]).abs() <= 1e-13);
        }
    }

    #[test]
    fn generated_data_has_positive_density(dim in 2usize..=3, m in modes(), v in modes(), amp in 0.0f64..0.1) {
        let g = torus(dim, 8);
        let spec = DisplacementSpec { amplitude: amp, modes: m, velocity_amplitude: amp, velocity_modes: v };
        prop_assume!(spec.validate(&g).is_ok());
        let (flow, pert) = gen_initial_from_displacement(&spec, &g).unwrap();
        prop_assert!(flow.rho.values().iter().all(|r| *r > 0.0));
        prop_assert!(flow.u.is_finite() && flow.f.is_finite());
        prop_assert!(pert.to_full().rho.max_diff(&flow.rho) <= 1e-15);
    }

    #[test]
    fn residuals_are_translation_invariant(m in modes(), s in prop::array::uniform2(0usize..16)) {
        let g = torus(2, 16);
        let spec = DisplacementSpec { amplitude: 0.05, modes: m, velocity_amplitude: 0.0, velocity_modes: Vec::new() };
        prop_assume!(spec.validate(&g).is_ok());
        let (flow, _) = gen_initial_from_displacement(&spec, &g).unwrap();
        let shift = [s[0], s[1], 0];
        let moved = FlowState { rho: flow.rho.translated(shift), u: flow.u.translated(shift), f: flow.f.translated(shift), t: 0.0 };
        let (a, b) = (check_intrinsic(&flow, 4.0).unwrap(), check_intrinsic(&moved, 4.0).unwrap());
        prop_assert!((a.det - b.det).abs() <= 1e-15);
        prop_assert!((a.piola - b.piola).abs() <= 1e-12 * (1e-12 + a.piola));
        prop_assert!((a.curl - b.curl).abs() <= 1e-12 * (1e-12 + a.curl));
    }
}

#[test]
fn generated_residuals_shrink_under_refinement() {
    let residuals = |n: usize| {
        let g = torus(2, n);
        let (flow, pert) = gen_initial_from_displacement(&DisplacementSpec::canonical(&g, 0.05), &g).unwrap();
        let r = check_intrinsic(&flow, 4.0).unwrap();
        [r.det, r.piola, r.curl, check_trace_constraint(&pert)]
    };
    let (coarse, fine) = (residuals(32), residuals(64));
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(c / f >= 3.5, "{coarse:?} → {fine:?}");
    }
}

#[test]
fn shear_displacement_is_exactly_compatible() {
    let g = torus(2, 16);
    let spec = DisplacementSpec {
        amplitude: 0.1,
        modes: vec![Mode::new([0, 1, 0], [1.0, 0.0, 0.0], 0.0)],
        velocity_amplitude: 0.0,
        velocity_modes: Vec::new(),
    };
    let (flow, pert) = gen_initial_from_displacement(&spec, &g).unwrap();
    let r = check_intrinsic(&flow, 4.0).unwrap();
    assert!(r.det <= 1e-15 && r.piola <= 1e-14 && r.curl <= 1e-14, "{r:?}");
    assert!(check_trace_constraint(&pert) <= 1e-15);
}

#[test]
fn mass_is_conserved_along_a_run() {
    let g = torus(2, 32);
    let (init, _) = gen_initial_from_displacement(&DisplacementSpec::canonical(&g, 1e-2), &g).unwrap();
    let cfg = TimeStepperConfig::new(Scheme::Imex, StepControl::DEFAULT_CFL, 0.5, 1).unwrap();
    let sim = simulate(&init, &cfg, &MaterialParams::default(), &MonitorSet::new(&[Monitor::Mass, Monitor::RhoF]), None).unwrap();
    assert!(sim.completed());
    let report = check_conserved(&sim.records, 1e-8);
    assert!(report.mass_drift.unwrap() <= 1e-13, "{report:?}");
    assert!(!report.rho_f_drift.is_empty());
}
