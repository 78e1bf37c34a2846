//! Jacobi-preconditioned conjugate gradients on flat node vectors.

pub(crate) struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for symmetric positive (semi-)definite `A`.
///
/// `project` maps a vector onto the solution subspace (mean removal on a
/// torus, wall clearing on a box) and is applied to the residual and search
/// directions. Convergence is `‖r‖₂ ≤ tol ‖b‖₂`.
pub(crate) fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    diag: &[f64],
    project: impl Fn(&mut [f64]),
    tol: f64,
    max_iterations: usize,
) -> CgResult {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    project(&mut r);
    let b_norm = dot(&r, &r).sqrt();
    let mut history = Vec::new();
    if b_norm == 0.0 {
        return CgResult { x, iterations: 0, history: vec![0.0], converged: true };
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    history.push(1.0);
    for it in 1..=max_iterations {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgResult { x, iterations: it, history, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        let rel = dot(&r, &r).sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            project(&mut x);
            return CgResult { x, iterations: it, history, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    project(&mut x);
    CgResult { x, iterations: max_iterations, history, converged: false }
}
