//! Radial ground states of `-w'' - ((N-1)/r) w' + c w = α w³` by shooting.
//!
//! The amplitude `w(0)` is bisected on the dichotomy "crosses zero" (too
//! large) versus "turns back up" (too small). Each trial is integrated by an
//! embedded Dormand–Prince 5(4) pair that lands on every node of a uniform
//! output grid. Once the shot falls below `1e-5·peak` the remainder is
//! replaced by the decaying solution of the linearized equation, integrated
//! inward from `r_max` and matched in value, so the exponentially growing
//! shooting mode never reaches the stored tail.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default output step, below the `1e-3·r_max` ceiling.
pub const DEFAULT_STEP: f64 = 0.005;

const MATCH_LEVEL: f64 = 1e-5;
const RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub mass_coeff: f64,
    pub alpha: f64,
    pub dim: usize,
    pub step: f64,
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub peak: f64,
    pub decay_constant: f64,
    pub moment2: f64,
    pub moment4: f64,
    /// Largest ODE residual over interior nodes.
    pub residual: f64,
}

#[derive(Clone, Copy)]
struct Ode {
    c: f64,
    alpha: f64,
    dim: usize,
}

impl Ode {
    /// `(w, w')' ` at radius `r`, with the regular limit at `r = 0`.
    #[inline]
    fn rhs(&self, r: f64, w: f64, dw: f64) -> (f64, f64) {
        let src = self.c * w - self.alpha * w * w * w;
        let ddw = if r == 0.0 { src / self.dim as f64 } else { src - (self.dim as f64 - 1.0) / r * dw };
        (dw, ddw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    TooLarge,
    TooSmall,
    Undecided,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One DP45 step of size `h`; returns the new state and the error estimate.
fn dp_step<F: Fn(f64, f64, f64) -> (f64, f64)>(f: &F, r: f64, y: (f64, f64), h: f64) -> ((f64, f64), f64) {
    let mut k = [(0.0, 0.0); 7];
    for s in 0..7 {
        let (mut a, mut b) = y;
        for j in 0..s {
            a += h * A[s][j] * k[j].0;
            b += h * A[s][j] * k[j].1;
        }
        k[s] = f(r + C[s] * h, a, b);
    }
    let (mut y5, mut e) = (y, (0.0, 0.0));
    for s in 0..7 {
        y5.0 += h * B5[s] * k[s].0;
        y5.1 += h * B5[s] * k[s].1;
        e.0 += h * (B5[s] - B4[s]) * k[s].0;
        e.1 += h * (B5[s] - B4[s]) * k[s].1;
    }
    let scale = |x: f64, z: f64| RTOL * x.abs().max(z.abs()).max(1e-3);
    let err = (e.0 / scale(y.0, y5.0)).abs().max((e.1 / scale(y.1, y5.1)).abs());
    (y5, err)
}

/// Advances `y` from `r` to `r + dr` with adaptive substeps.
fn advance<F: Fn(f64, f64, f64) -> (f64, f64)>(f: &F, r: f64, y: (f64, f64), dr: f64) -> (f64, f64) {
    let mut t = r;
    let mut y = y;
    let mut h = dr;
    let end = r + dr;
    let dir = dr.signum();
    while (end - t) * dir > 1e-15 * end.abs().max(1.0) {
        h = if dir > 0.0 { h.min(end - t) } else { h.max(end - t) };
        let (yn, err) = dp_step(f, t, y, h);
        if err <= 1.0 || h.abs() < 1e-10 {
            t += h;
            y = yn;
            let grow = if err == 0.0 { 2.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 2.0) };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    y
}

/// Integrates one shot; stops at the first event and returns the stored trajectory.
fn shoot(ode: Ode, w0: f64, step: f64, r_max: f64) -> (Outcome, Vec<(f64, f64)>) {
    let f = |r: f64, w: f64, dw: f64| ode.rhs(r, w, dw);
    let n = (r_max / step).round() as usize;
    let mut traj = Vec::with_capacity(n + 1);
    let mut y = (w0, 0.0);
    traj.push(y);
    for j in 0..n {
        y = advance(&f, j as f64 * step, y, step);
        traj.push(y);
        if y.0 < 0.0 {
            return (Outcome::TooLarge, traj);
        }
        if y.1 > 0.0 {
            return (Outcome::TooSmall, traj);
        }
    }
    (Outcome::Undecided, traj)
}

/// Decaying solution of the linearized tail equation, normalized to 1 at `r_max`,
/// sampled at nodes `from..=n` (index `j` ↔ radius `j·step`).
fn linear_tail(ode: Ode, step: f64, from: usize, n: usize) -> Vec<(f64, f64)> {
    let sc = ode.c.sqrt();
    let nm1 = ode.dim as f64 - 1.0;
    let f = |r: f64, w: f64, dw: f64| (dw, ode.c * w - nm1 / r * dw);
    let r_end = n as f64 * step;
    let mut y = (1.0, -(sc + nm1 / (2.0 * r_end)));
    let mut out = vec![(0.0, 0.0); n - from + 1];
    out[n - from] = y;
    for j in (from..n).rev() {
        y = advance(&f, (j + 1) as f64 * step, y, -step);
        out[j - from] = y;
    }
    out
}

/// `r_max = max(30, 30/√c)`.
pub fn default_r_max(c: f64) -> f64 {
    30.0_f64.max(30.0 / c.sqrt())
}

/// Positive radial ground state with the default output step.
pub fn solve_ground_state(c: f64, alpha: f64, dim: usize) -> Result<RadialProfile> {
    solve_ground_state_with_step(c, alpha, dim, DEFAULT_STEP)
}

pub fn solve_ground_state_with_step(c: f64, alpha: f64, dim: usize, step: f64) -> Result<RadialProfile> {
    if !(c > 0.0 && alpha > 0.0) || !c.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("need c > 0 and alpha > 0, got c={c}, alpha={alpha}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!("radial dimension {dim} not in 1..=3")));
    }
    let r_max0 = default_r_max(c);
    let n = (r_max0 / step).ceil() as usize;
    let r_max = n as f64 * step;
    if !(step > 0.0) || step > 1e-3 * r_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("radial step {step} exceeds 1e-3·r_max")));
    }
    let ode = Ode { c, alpha, dim };
    let base = (c / alpha).sqrt();

    let mut history = Vec::new();
    let mut lo = 1.001 * base;
    let (o, _) = shoot(ode, lo, step, r_max);
    if o != Outcome::TooSmall {
        return Err(Error::Shooting { reason: format!("lower amplitude {lo} is not an undershoot ({o:?})"), history });
    }
    let mut hi = 2.0 * base;
    loop {
        history.push((lo, hi));
        match shoot(ode, hi, step, r_max).0 {
            Outcome::TooLarge => break,
            _ => {
                lo = hi;
                hi *= 2.0;
            }
        }
        if hi > 1e3 * base {
            return Err(Error::Shooting { reason: "no overshooting amplitude found".into(), history });
        }
    }
    let mut best = None;
    for _ in 0..200 {
        history.push((lo, hi));
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (o, traj) = shoot(ode, mid, step, r_max);
        match o {
            Outcome::TooLarge => hi = mid,
            Outcome::TooSmall => lo = mid,
            Outcome::Undecided => {
                best = Some(traj);
                break;
            }
        }
    }
    let traj = match best {
        Some(t) => t,
        None => shoot(ode, lo, step, r_max).1,
    };
    let peak = traj[0].0;
    let j_match = traj.iter().position(|&(w, _)| w < MATCH_LEVEL * peak).ok_or_else(|| Error::Shooting {
        reason: format!("shot with amplitude {peak} never decays below {MATCH_LEVEL}·peak"),
        history: history.clone(),
    })?;

    let tail = linear_tail(ode, step, j_match, n);
    let scale = traj[j_match].0 / tail[0].0;
    let mut values = Vec::with_capacity(n + 1);
    let mut derivative = Vec::with_capacity(n + 1);
    for &(w, dw) in &traj[..j_match] {
        values.push(w);
        derivative.push(dw);
    }
    for &(w, dw) in &tail {
        values.push(scale * w);
        derivative.push(scale * dw);
    }
    let r_grid: Vec<f64> = (0..=n).map(|j| j as f64 * step).collect();

    let mut p = RadialProfile {
        mass_coeff: c,
        alpha,
        dim,
        step,
        r_grid,
        values,
        derivative,
        peak,
        decay_constant: 0.0,
        moment2: 0.0,
        moment4: 0.0,
        residual: 0.0,
    };
    p.decay_constant = compute_decay_constant(&p);
    let (m2, m4) = compute_moments(&p, 1);
    p.moment2 = m2;
    p.moment4 = m4;
    p.residual = ode_residual(&p);
    if !(p.values[n] < 1e-10 * peak) {
        return Err(Error::Shooting {
            reason: format!("tail value {} at r_max is not below 1e-10·peak", p.values[n]),
            history,
        });
    }
    Ok(p)
}

fn surface_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Composite Simpson over every `stride`-th node (falls back to a trapezoid
/// panel when the node count is even).
fn simpson<F: Fn(usize) -> f64>(nodes: usize, stride: usize, h: f64, f: F) -> f64 {
    let m = (nodes - 1) / stride;
    let hh = h * stride as f64;
    let pairs = m / 2;
    let mut s = 0.0;
    for p in 0..pairs {
        let j = 2 * p * stride;
        s += f(j) + 4.0 * f(j + stride) + f(j + 2 * stride);
    }
    s *= hh / 3.0;
    if m % 2 == 1 {
        let j = (m - 1) * stride;
        s += 0.5 * hh * (f(j) + f(j + stride));
    }
    s
}

/// `(∫ w², ∫ w⁴)` over `R^N`, using every `stride`-th radial node.
pub fn compute_moments(p: &RadialProfile, stride: usize) -> (f64, f64) {
    let area = surface_area(p.dim);
    let weight = |j: usize| p.r_grid[j].powi(p.dim as i32 - 1);
    let n = p.values.len();
    let m2 = simpson(n, stride, p.step, |j| weight(j) * p.values[j].powi(2));
    let m4 = simpson(n, stride, p.step, |j| weight(j) * p.values[j].powi(4));
    (area * m2, area * m4)
}

/// Smallest `M` with `w(r) ≤ M e^{-√c r} min{1, r^{-(N-1)/2}}` at every node.
pub fn compute_decay_constant(p: &RadialProfile) -> f64 {
    let sc = p.mass_coeff.sqrt();
    let half = (p.dim as f64 - 1.0) / 2.0;
    p.r_grid
        .iter()
        .zip(&p.values)
        .map(|(&r, &w)| {
            let env = (-sc * r).exp() * if r > 1.0 { r.powf(-half) } else { 1.0 };
            if env > 0.0 {
                w / env
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Largest ODE residual over interior nodes: `w''` from 6th-order central
/// differences of the stored values, `w'` as stored.
pub fn ode_residual(p: &RadialProfile) -> f64 {
    let h = p.step;
    let v = &p.values;
    let n = v.len();
    let nm1 = p.dim as f64 - 1.0;
    let at = |j: isize| -> f64 { v[j.unsigned_abs()] };
    let mut worst: f64 = 0.0;
    for j in 0..n.saturating_sub(3) {
        let i = j as isize;
        let d2 = (2.0 * (at(i - 3) + at(i + 3)) - 27.0 * (at(i - 2) + at(i + 2)) + 270.0 * (at(i - 1) + at(i + 1))
            - 490.0 * at(i))
            / (180.0 * h * h);
        let r = p.r_grid[j];
        let drift = if j == 0 { nm1 * d2 } else { nm1 / r * p.derivative[j] };
        let res = -d2 - drift + p.mass_coeff * v[j] - p.alpha * v[j].powi(3);
        worst = worst.max(res.abs());
    }
    worst
}

impl RadialProfile {
    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    fn locate(&self, r: f64) -> (usize, f64) {
        let n = self.values.len();
        let x = r / self.step;
        let j = (x.floor() as usize).min(n - 2);
        (j, x - j as f64)
    }

    /// Cubic Hermite interpolation; exponential extrapolation beyond `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.values.len();
        if r >= self.r_max() {
            return self.values[n - 1] * (-self.mass_coeff.sqrt() * (r - self.r_max())).exp();
        }
        let (j, t) = self.locate(r);
        let h = self.step;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.derivative[j] * h, self.derivative[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// Derivative of the Hermite interpolant.
    pub fn eval_deriv(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.values.len();
        if r >= self.r_max() {
            let sc = self.mass_coeff.sqrt();
            return -sc * self.values[n - 1] * (-sc * (r - self.r_max())).exp();
        }
        let (j, t) = self.locate(r);
        let h = self.step;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.derivative[j] * h, self.derivative[j + 1] * h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h
    }

    pub fn moments(&self) -> (f64, f64) {
        (self.moment2, self.moment4)
    }

    /// CSV: one header comment carrying the constants, then `r,value,derivative`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# c={:?} alpha={:?} N={} M={:?} moment2={:?} moment4={:?}",
            self.mass_coeff, self.alpha, self.dim, self.decay_constant, self.moment2, self.moment4
        )?;
        writeln!(w, "r,value,derivative")?;
        for j in 0..self.values.len() {
            writeln!(w, "{:?},{:?},{:?}", self.r_grid[j], self.values[j], self.derivative[j])?;
        }
        Ok(())
    }
}
