use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vfl_core::dynamics::{
    rhs_full, rhs_perturb, FlowRates, FlowState, Integrator, MaterialParams, PerturbState, Scheme, SimState,
};
use vfl_core::fields::{integrate, Field, FieldKind, Grid};
use vfl_core::mms::{forcing_fields, ManufacturedCase};
use vfl_core::par::run_sequential;

fn torus(dim: usize, n: usize) -> Grid {
    Grid::periodic_cube(dim, n, 2.0 * PI).unwrap()
}

fn smooth(g: Grid, kind: FieldKind, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let d = g.dim();
    let nc = kind.components(d);
    let waves: Vec<([f64; 3], Vec<f64>, f64)> = (0..3)
        .map(|_| {
            let k = [0, 1, 2].map(|_| rng.gen_range(-2..=2) as f64);
            (k, (0..nc).map(|_| rng.gen_range(-amp..amp)).collect(), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    Field::from_fn(g, kind, |x, o| {
        o.fill(0.0);
        for (k, c, p) in &waves {
            let s = (0..d).map(|a| k[a] * x[a]).sum::<f64>() + p;
            for (v, c) in o.iter_mut().zip(c) {
                *v += c * s.sin();
            }
        }
    })
}

fn random_perturbation(g: Grid, seed: u64) -> PerturbState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = rng.gen_range(0.01..0.2);
    PerturbState {
        rho_tilde: smooth(g, FieldKind::Scalar, amp, &mut rng),
        u: smooth(g, FieldKind::Vector, amp, &mut rng),
        e: smooth(g, FieldKind::Tensor, amp, &mut rng),
        t: 0.0,
    }
}

fn rates_diff(a: &FlowRates, b: &FlowRates) -> f64 {
    a.rho.max_diff(&b.rho).max(a.u.max_diff(&b.u)).max(a.f.max_diff(&b.f))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn perturbation_form_matches_full_form(dim in 2usize..=3, seed in any::<u64>()) {
        let g = torus(dim, 8);
        let params = MaterialParams::default();
        let p = random_perturbation(g, seed);
        let full = rhs_full(&p.to_full(), &params, None).unwrap();
        let pert = rhs_perturb(&p, &params).unwrap();
        prop_assert!(full.relative_difference(&pert) <= 1e-12);
    }

    #[test]
    fn mass_rate_integrates_to_zero(dim in 2usize..=3, seed in any::<u64>()) {
        let g = torus(dim, 8);
        let r = rhs_full(&random_perturbation(g, seed).to_full(), &MaterialParams::default(), None).unwrap();
        prop_assert!(integrate(&r.rho).unwrap().abs() <= 1e-12 * (1.0 + r.rho.max_abs()) * g.volume());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_states_are_stationary(
        dim in 2usize..=3,
        rho in 0.5f64..2.0,
        u in prop::array::uniform3(-1.0f64..1.0),
        f in prop::array::uniform9(-0.3f64..0.3),
    ) {
        let g = torus(dim, 8);
        let mut fm: Vec<f64> = (0..dim * dim).map(|k| f[k]).collect();
        for i in 0..dim {
            fm[i * dim + i] += 1.0;
        }
        let s = FlowState {
            rho: Field::constant(g, FieldKind::Scalar, &[rho]).unwrap(),
            u: Field::constant(g, FieldKind::Vector, &u[..dim]).unwrap(),
            f: Field::constant(g, FieldKind::Tensor, &fm).unwrap(),
            t: 0.0,
        };
        let r = rhs_full(&s, &MaterialParams::default(), None).unwrap();
        prop_assert_eq!(r.rho.max_abs(), 0.0);
        prop_assert_eq!(r.u.max_abs(), 0.0);
        prop_assert_eq!(r.f.max_abs(), 0.0);
    }
}

#[test]
fn sequential_and_parallel_rates_are_bit_identical() {
    let g = torus(2, 96);
    let s = random_perturbation(g, 11).to_full();
    let params = MaterialParams::default();
    let par = rhs_full(&s, &params, None).unwrap();
    let seq = run_sequential(|| rhs_full(&s, &params, None)).unwrap();
    assert_eq!(par.rho.values(), seq.rho.values());
    assert_eq!(par.u.values(), seq.u.values());
    assert_eq!(par.f.values(), seq.f.values());
}

#[test]
fn equilibrium_is_fixed_under_both_schemes() {
    let g = torus(2, 16);
    let params = MaterialParams::default();
    let init = FlowState::equilibrium(g);
    for scheme in [Scheme::Rk4Explicit, Scheme::Imex] {
        let stepper = Integrator::new(&g, params, scheme, None);
        let mut s = SimState { flow: init.clone(), sigma: None };
        for _ in 0..1000 {
            s = stepper.step(&s, 0.01).unwrap();
        }
        let dev = s.flow.rho.max_diff(&init.rho).max(s.flow.u.max_diff(&init.u)).max(s.flow.f.max_diff(&init.f));
        assert!(dev <= 1e-14, "{} drifted by {dev:e}", scheme.name());
    }
}

fn state_diff(a: &FlowState, b: &FlowState) -> f64 {
    a.rho.max_diff(&b.rho).max(a.u.max_diff(&b.u)).max(a.f.max_diff(&b.f))
}

/// Observed order of the one-step error on the forced semi-discrete problem,
/// measured against many small steps of the same scheme.
fn local_orders(scheme: Scheme) -> Vec<f64> {
    let case = ManufacturedCase::by_name("smooth2d").unwrap();
    let g = case.grid(16).unwrap();
    let params = MaterialParams::default();
    let forcing = move |t: f64| forcing_fields(&case, &params, &g, t);
    let stepper = Integrator::new(&g, params, scheme, Some(&forcing));
    let t0 = 0.3;
    let start = SimState { flow: case.exact_state(&g, t0), sigma: None };
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let one = stepper.step(&start, dt).unwrap();
            let mut fine = start.clone();
            for _ in 0..64 {
                fine = stepper.step(&fine, dt / 64.0).unwrap();
            }
            state_diff(&one.flow, &fine.flow)
        })
        .collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn rk4_local_error_is_fifth_order() {
    let orders = local_orders(Scheme::Rk4Explicit);
    assert!(orders.iter().all(|o| *o >= 4.7), "orders {orders:?}");
}

#[test]
fn imex_local_error_is_third_order() {
    let orders = local_orders(Scheme::Imex);
    assert!(orders.iter().all(|o| *o >= 2.7), "orders {orders:?}");
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let case = ManufacturedCase::by_name("time_dependent").unwrap();
    let g = case.grid(16).unwrap();
    let params = MaterialParams::default();
    let forcing = move |t: f64| forcing_fields(&case, &params, &g, t);
    let stepper = Integrator::new(&g, params, Scheme::Rk4Explicit, Some(&forcing));
    let start = SimState { flow: case.exact_state(&g, 0.0), sigma: None };
    let reference = {
        let mut s = start.clone();
        for _ in 0..512 {
            s = stepper.step(&s, 0.5 / 512.0).unwrap();
        }
        s
    };
    let errors: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mut s = start.clone();
            for _ in 0..n {
                s = stepper.step(&s, 0.5 / n as f64).unwrap();
            }
            state_diff(&s.flow, &reference.flow)
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(orders.iter().all(|o| *o >= 3.7), "orders {orders:?}");
}

#[test]
fn rhs_matches_manufactured_time_derivative() {
    let case = ManufacturedCase::by_name("smooth2d").unwrap();
    let params = MaterialParams::default();
    let t = 0.4;
    let err = |n: usize| {
        let g = case.grid(n).unwrap();
        let g_t = forcing_fields(&case, &params, &g, t);
        let r = rhs_full(&case.exact_state(&g, t), &params, Some(&g_t)).unwrap();
        let dt = 1e-4;
        let (ahead, behind) = (case.exact_state(&g, t + dt), case.exact_state(&g, t - dt));
        let d = |a: &Field, b: &Field| a.minus(b).unwrap().scaled(0.5 / dt);
        let exact = FlowRates { rho: d(&ahead.rho, &behind.rho), u: d(&ahead.u, &behind.u), f: d(&ahead.f, &behind.f) };
        rates_diff(&r, &exact)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < 1e-2, "error {fine:e}");
    assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
}
