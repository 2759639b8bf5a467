use std::f64::consts::PI;

use ringbump::model::ModelParams;
use ringbump::reduction::{critical_point_check, maximize_over_interval};

/// Model reduced energy `k(A1 + A2/R) − B e^{−2πR/k}(k/R)^{1/2}`.
fn surrogate(k: f64, r: f64) -> f64 {
    let (a1, a2, b) = (5.85, 5.85, 40.0 * k);
    k * (a1 + a2 / r) - b * (-2.0 * PI * r / k).exp() * (k / r).sqrt()
}

fn surrogate_slope(k: f64, r: f64) -> f64 {
    let (a2, b) = (5.85, 40.0 * k);
    let e = (-2.0 * PI * r / k).exp() * (k / r).sqrt();
    -k * a2 / (r * r) + b * e * (2.0 * PI / k + 0.5 / r)
}

/// Local maximum of the model: first `+ → −` sign change of the analytic
/// slope on a fine scan, refined by bisection.
fn oracle(k: f64) -> f64 {
    let mut r = 0.5;
    while !(surrogate_slope(k, r) > 0.0 && surrogate_slope(k, r + 0.01) <= 0.0) {
        r += 0.01;
        assert!(r < 200.0, "no maximum");
    }
    let (mut lo, mut hi) = (r, r + 0.01);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if surrogate_slope(k, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn surrogate_maximum_matches_independent_optimizer() {
    let tol_r = 1e-3;
    for k in [12usize, 16, 24] {
        let kf = k as f64;
        let s = ModelParams { k, ..Default::default() }.radius_interval().unwrap();
        let want = oracle(kf);
        // Window around the true maximum with the relative width of S_k.
        let half = 0.5 * (s.hi - s.lo);
        let (lo, hi) = (want - 0.8 * half, want + 1.2 * half);
        let m = maximize_over_interval(|r| Ok(surrogate(kf, r)), lo, hi, 9, tol_r).unwrap();
        assert!(m.interior, "k={k}");
        assert!((m.r0 - want).abs() < tol_r, "k={k}: {} vs {want}", m.r0);
        let cp = critical_point_check(|r| Ok(surrogate(kf, r)), m.r0, &m.coarse, tol_r).unwrap();
        assert!(cp.pass, "k={k}: {cp:?}");
    }
}

#[test]
fn boundary_maximum_is_not_interior() {
    let m = maximize_over_interval(|r| Ok(-r), 1.0, 2.0, 9, 1e-4).unwrap();
    assert!(!m.interior);
    assert!((m.r0 - 1.0).abs() < 1e-3);
}
