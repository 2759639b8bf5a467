//! Preconditioned MINRES for symmetric (possibly indefinite) systems.
//!
//! The operator and preconditioner are closures over flat slices; the
//! preconditioner must be symmetric positive definite. Inner products use
//! the deterministic reductions of [`crate::par`], so iterates do not depend
//! on the thread count.

use crate::par;

const STAGNATION_WINDOW: usize = 150;

/// Outcome of one MINRES run.
#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub iterations: usize,
    /// Preconditioned residual norm estimate after each iteration.
    pub history: Vec<f64>,
    /// Preconditioned norm of the initial residual.
    pub initial: f64,
    pub converged: bool,
}

/// Solves `A x = b` starting from the value already in `x`.
///
/// Stops when the preconditioned residual norm drops below `target`
/// (absolute) or reaches the rounding floor `10ε(‖A‖‖x‖ + ‖b‖)`, after `max_iter` iterations, or when the estimate has
/// stagnated (less than a 0.1% drop over 150 iterations).
pub fn minres<A, M>(apply: A, precond: M, b: &[f64], x: &mut [f64], target: f64, max_iter: usize) -> MinresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r1 = vec![0.0; n];
    apply(x, &mut r1);
    for i in 0..n {
        r1[i] = b[i] - r1[i];
    }
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1_sq = par::dot(&r1, &y);
    if !(beta1_sq > 0.0) {
        return MinresOutcome { iterations: 0, history: vec![], initial: 0.0, converged: true };
    }
    let beta1 = beta1_sq.sqrt();
    if beta1 <= target {
        return MinresOutcome { iterations: 0, history: vec![], initial: beta1, converged: true };
    }

    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
    let mut history = Vec::new();
    let mut tnorm2 = 0.0;

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut y);
        if itn >= 2 {
            par::axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = par::dot(&v, &y);
        par::axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y);
        oldb = beta;
        let bsq = par::dot(&r2, &y);
        beta = bsq.max(0.0).sqrt();

        tnorm2 += alfa * alfa + oldb * oldb + beta * beta;
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        history.push(phibar);
        let xnorm = par::dot(x, x).sqrt();
        let floor = 10.0 * f64::EPSILON * (tnorm2.sqrt() * xnorm + beta1);
        if phibar <= target || phibar <= floor || beta == 0.0 {
            return MinresOutcome { iterations: itn, history, initial: beta1, converged: true };
        }
        if !phibar.is_finite() {
            break;
        }
        if itn > STAGNATION_WINDOW && phibar > 0.999 * history[itn - 1 - STAGNATION_WINDOW] {
            break;
        }
    }
    MinresOutcome { iterations: history.len(), history, initial: beta1, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(diag: &[f64], off: f64) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x: &[f64], y: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    #[test]
    fn solves_an_indefinite_system() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| if i % 7 == 0 { -3.0 } else { 4.0 + (i as f64) * 0.01 }).collect();
        let a = tridiag(&diag, -1.0);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut b = vec![0.0; n];
        a(&xs, &mut b);
        let mut x = vec![0.0; n];
        let out = minres(&a, |r: &[f64], z: &mut [f64]| z.copy_from_slice(r), &b, &mut x, 1e-12, 1000);
        assert!(out.converged);
        for (p, q) in x.iter().zip(&xs) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_preconditioner_and_warm_start() {
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let a = tridiag(&diag, 0.1);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let pre = |r: &[f64], z: &mut [f64]| {
            for i in 0..r.len() {
                z[i] = r[i] / (1.0 + i as f64);
            }
        };
        let first = minres(&a, pre, &b, &mut x, 1e-13, 500);
        assert!(first.converged);
        let again = minres(&a, pre, &b, &mut x, 1e-10, 500);
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let diag = vec![2.0; 10];
        let a = tridiag(&diag, 1.0);
        let mut x = vec![0.0; 10];
        let out = minres(&a, |r: &[f64], z: &mut [f64]| z.copy_from_slice(r), &[0.0; 10], &mut x, 1e-12, 10);
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
