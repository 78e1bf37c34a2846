use proptest::prelude::*;

use vfl_core::dynamics::{MaterialParams, Scheme};
use vfl_core::mms::{convergence_study, mms_forcing, ManufacturedCase, StudyConfig, EXACT_FLOOR};

/// `(ϱ, u, F)` of a case at a space-time point, evaluated in plain `f64`.
fn sample(case: &ManufacturedCase, x: [f64; 4]) -> (f64, [f64; 3], [f64; 9]) {
    let d = case.dim;
    let mut u = [0.0; 3];
    let mut f = [0.0; 9];
    case.velocity(&x, &mut u[..d]);
    case.deformation(&x, &mut f[..d * d]);
    (case.rho(&x), u, f)
}

fn shifted(x: [f64; 4], axis: usize, h: f64) -> [f64; 4] {
    let mut y = x;
    y[axis] += h;
    y
}

/// Central difference of `g` along `axis`.
fn d1<const N: usize>(g: &dyn Fn([f64; 4]) -> [f64; N], x: [f64; 4], axis: usize, h: f64) -> [f64; N] {
    let (a, b) = (g(shifted(x, axis, h)), g(shifted(x, axis, -h)));
    std::array::from_fn(|k| (a[k] - b[k]) / (2.0 * h))
}

/// Forcing recomputed from finite differences of the closed-form fields.
fn forcing_by_differences(case: &ManufacturedCase, params: &MaterialParams, x: [f64; 4]) -> (f64, [f64; 3], [f64; 9]) {
    let d = case.dim;
    let h = 1e-4;
    let rho = |p: [f64; 4]| [sample(case, p).0];
    let vel = |p: [f64; 4]| sample(case, p).1;
    let def = |p: [f64; 4]| sample(case, p).2;
    let stress = |p: [f64; 4]| {
        let (r, _, f) = sample(case, p);
        std::array::from_fn::<f64, 9, _>(|ij| {
            let (i, j) = (ij / 3, ij % 3);
            if i >= d || j >= d {
                return 0.0;
            }
            r * (0..d).map(|k| f[i * d + k] * f[j * d + k]).sum::<f64>()
        })
    };
    let (r, u, f) = sample(case, x);
    let du: Vec<[f64; 3]> = (0..d).map(|a| d1(&vel, x, a, h)).collect();
    let div_u: f64 = (0..d).map(|a| du[a][a]).sum();

    let g_rho = d1(&rho, x, 3, h)[0] + (0..d).map(|a| u[a] * d1(&rho, x, a, h)[0]).sum::<f64>() + r * div_u;

    let hh = 1e-4;
    let second = |a: usize, b: usize| -> [f64; 3] {
        let pp = vel(shifted(shifted(x, a, hh), b, hh));
        let pm = vel(shifted(shifted(x, a, hh), b, -hh));
        let mp = vel(shifted(shifted(x, a, -hh), b, hh));
        let mm = vel(shifted(shifted(x, a, -hh), b, -hh));
        std::array::from_fn(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * hh * hh))
    };
    let ut = d1(&vel, x, 3, h);
    let dstress: Vec<[f64; 9]> = (0..d).map(|a| d1(&stress, x, a, h)).collect();
    let mut g_u = [0.0; 3];
    for i in 0..d {
        let lap: f64 = (0..d).map(|a| second(a, a)[i]).sum();
        let grad_div: f64 = (0..d).map(|a| second(i, a)[a]).sum();
        let grad_p = params.pressure_derivative(r) * d1(&rho, x, i, h)[0];
        let div_s: f64 = (0..d).map(|j| dstress[j][i * 3 + j]).sum();
        let adv: f64 = (0..d).map(|a| u[a] * du[a][i]).sum();
        g_u[i] = ut[i] + adv - (params.mu * lap + (params.mu + params.lambda) * grad_div - grad_p + div_s) / r;
    }

    let ft = d1(&def, x, 3, h);
    let df: Vec<[f64; 9]> = (0..d).map(|a| d1(&def, x, a, h)).collect();
    let mut g_f = [0.0; 9];
    for i in 0..d {
        for j in 0..d {
            let adv: f64 = (0..d).map(|a| u[a] * df[a][i * d + j]).sum();
            let stretch: f64 = (0..d).map(|k| du[k][i] * f[k * d + j]).sum();
            g_f[i * d + j] = ft[i * d + j] + adv - stretch;
        }
    }
    (g_rho, g_u, g_f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forcing_matches_finite_difference_oracle(
        which in 0usize..7,
        p in prop::array::uniform3(0.0f64..1.0),
        t in 0.0f64..1.0,
    ) {
        let case = ManufacturedCase::all()[which];
        let params = MaterialParams::default();
        let x = [p[0] * case.length(), p[1] * case.length(), if case.dim == 3 { p[2] * case.length() } else { 0.0 }];
        let (gr, gu, gf) = mms_forcing(&case, &params, &x, t);
        let (or, ou, of) = forcing_by_differences(&case, &params, [x[0], x[1], x[2], t]);
        prop_assert!((gr - or).abs() <= 1e-6 * (1.0 + or.abs()), "{} rho {gr} vs {or}", case.name);
        for (a, b) in gu.iter().zip(&ou).chain(gf.iter().zip(&of)) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{} {a} vs {b}", case.name);
        }
    }
}

#[test]
fn equilibrium_cases_are_reproduced_exactly() {
    for name in ["equilibrium2d", "equilibrium3d"] {
        let case = ManufacturedCase::by_name(name).unwrap();
        let r = convergence_study(&case, &[8, 16, 32], &StudyConfig::default()).unwrap();
        assert!(r.entries.iter().all(|e| e.error <= EXACT_FLOOR), "{}", r.summary());
        assert!(r.passed);
    }
}

#[test]
fn box_case_converges_at_second_order() {
    let case = ManufacturedCase::by_name("box2d").unwrap();
    let cfg = StudyConfig { scheme: Scheme::Imex, ..StudyConfig::default() };
    let r = convergence_study(&case, &[16, 32, 64], &cfg).unwrap();
    assert!(r.passed && r.monotone, "{}", r.summary());
}

#[test]
fn study_csv_is_reproducible() {
    let case = ManufacturedCase::by_name("time_dependent").unwrap();
    let csv = || {
        let r = convergence_study(&case, &[8, 16, 32], &StudyConfig::default()).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        out
    };
    let first = csv();
    assert!(String::from_utf8_lossy(&first).lines().count() > 1);
    assert_eq!(first, csv());
}
