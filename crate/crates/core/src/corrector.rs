//! The corrector `(u_R, v_R)`: forcing terms, the linearized operators
//! `L0 = -Δ + λ - 3α0 U0²` and `L1 = -Δ + μ - 3α1 W²` (with `W = ΣV_i`),
//! their symmetric-subspace inverses, and the fixed-point iteration.
//!
//! Linear solves run MINRES on the subspace fixed by the node-preserving
//! symmetries (an exact orthogonal projection that commutes with both
//! operators), preconditioned by the exact inverse of `-Δ_h + s`. The
//! constrained solve for `v` is the saddle system
//!
//! ```text
//! [ L1  Z ] [ v ]   [ g1 ]
//! [ Zᵀ  0 ] [ Λ ] = [ 0  ]
//! ```
//!
//! whose second unknown is the Lagrange multiplier `Λ_R`.

use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::dst::HelmholtzSolver;
use crate::error::{Error, Result};
use crate::geometry::{bump_centers, BumpConfiguration, BumpFields, Symmetry};
use crate::grid::{self, laplacian_into, Field, Grid};
use crate::krylov::minres;
use crate::model::{compute_gamma0_f0, CouplingBound, ModelParams};
use crate::par;
use crate::radial::{solve_ground_state, RadialProfile};

/// Default grid spacing per dimension.
pub fn default_spacing(dim: usize) -> f64 {
    if dim == 3 {
        0.25
    } else {
        0.125
    }
}

/// Box half-width `R + max(20, 15/√λ)`.
pub fn default_half_width(radius: f64, lambda: f64) -> f64 {
    radius + 20f64.max(15.0 / lambda.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    /// Outer tolerance on the E-norm step.
    pub tol: f64,
    pub max_iter: usize,
    /// Inner (linear) tolerance as a fraction of `tol`.
    pub inner_factor: f64,
    pub max_linear_iter: usize,
    /// Apply the full (interpolating) group average to every iterate.
    pub full_symmetry: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-8, max_iter: 50, inner_factor: 0.1, max_linear_iter: 4000, full_symmetry: false }
    }
}

/// Statistics of one linear solve.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LinearStats {
    pub iterations: usize,
    pub restarts: usize,
    pub relative_residual: f64,
}

/// Grid-level data shared by every radius: the grid, the ground states, the
/// discrete `U0`, the potential and the solvers.
pub struct Background {
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    pub u0_profile: RadialProfile,
    pub v0_profile: RadialProfile,
    /// Discrete ground state of `-Δ_h U + λU = α0 U³`, started from the profile.
    pub u0: Field,
    pub mu: Field,
    pub symmetry: Symmetry,
    /// Max-norm defect of the discrete `U0` equation after Newton.
    pub u0_defect: f64,
    pre0: HelmholtzSolver,
    pre1: HelmholtzSolver,
}

impl Background {
    pub fn new(params: &ModelParams, grid: &Arc<Grid>) -> Result<Background> {
        params.validate()?;
        if grid.dim() != params.dim {
            return Err(Error::Grid(format!("grid dimension {} but N = {}", grid.dim(), params.dim)));
        }
        let u0_profile = solve_ground_state(params.lambda, params.alpha0, params.dim)?;
        let v0_profile = solve_ground_state(1.0, params.alpha1, params.dim)?;
        let mu = Field::sample(grid, |y| params.mu(y.iter().map(|x| x * x).sum::<f64>().sqrt()));
        let mu_min = mu.map(|x| -x).max().abs();
        let symmetry = Symmetry::new(grid, params.k.max(1));
        let pre0 = HelmholtzSolver::new(grid, params.lambda);
        let pre1 = HelmholtzSolver::new(grid, mu_min.max(1e-3));
        let sampled = Field::sample(grid, |y| u0_profile.eval(y.iter().map(|x| x * x).sum::<f64>().sqrt()));
        let mut bg = Background {
            params: params.clone(),
            grid: grid.clone(),
            u0_profile,
            v0_profile,
            u0: sampled,
            mu,
            symmetry,
            u0_defect: f64::NAN,
            pre0,
            pre1,
        };
        bg.polish_u0()?;
        Ok(bg)
    }

    /// Background on the default grid for the radius window `[.., r_hi]`.
    pub fn for_radius(params: &ModelParams, r_hi: f64, spacing: Option<f64>) -> Result<Background> {
        let h = spacing.unwrap_or_else(|| default_spacing(params.dim));
        let grid = Grid::covering(params.dim, default_half_width(r_hi, params.lambda), h)?;
        Background::new(params, &grid)
    }

    /// Same background with another coupling constant.
    pub fn set_beta(&mut self, beta: f64) {
        self.params.beta = beta;
    }

    fn u0_equation(&self, u: &[f64], out: &mut [f64]) {
        laplacian_into(&self.grid, u, out);
        let (lam, a0) = (self.params.lambda, self.params.alpha0);
        out.par_iter_mut().zip(u.par_iter()).for_each(|(o, &x)| *o = -*o + lam * x - a0 * x * x * x);
    }

    fn polish_u0(&mut self) -> Result<()> {
        let len = self.grid.len();
        let mut u = self.u0.values().to_vec();
        self.symmetry.project_exact_in_place(&mut u);
        let mut f = vec![0.0; len];
        let peak = self.u0_profile.peak;
        for _ in 0..12 {
            self.u0_equation(&u, &mut f);
            let defect = par::max_by(len, |i| f[i].abs());
            self.u0_defect = defect;
            if defect < 1e-12 * peak {
                break;
            }
            let w: Vec<f64> = u.iter().map(|&x| 3.0 * self.params.alpha0 * x * x).collect();
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut delta = vec![0.0; len];
            let lam = self.params.lambda;
            let grid = self.grid.clone();
            let apply = |x: &[f64], y: &mut [f64]| {
                laplacian_into(&grid, x, y);
                y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = -*yi + (lam - w[i]) * x[i]);
            };
            // Near the rounding floor an inexact step still reduces the defect.
            match solve_symmetric(&apply, &self.pre0, &self.symmetry, &self.grid, &rhs, &mut delta, 1e-8, 4000) {
                Ok(_) => {}
                Err(Error::LinearSolve { residual, .. }) if residual < 0.1 => {}
                Err(e) => return Err(e),
            }
            par::axpy(1.0, &delta, &mut u);
        }
        self.u0 = Field::from_values(&self.grid, u)?;
        debug!("discrete U0 defect {:e}", self.u0_defect);
        Ok(())
    }

    /// Bump configuration and fields at radius `R`.
    pub fn ansatz(&self, radius: f64) -> Ansatz<'_> {
        let config = bump_centers(self.params.k, radius, self.params.dim);
        let mut bumps = BumpFields::new(&self.grid, &self.v0_profile, &config);
        bumps.project_exact(&self.symmetry);
        Ansatz { bg: self, config, bumps }
    }

    /// `L0 u = -Δ_h u + λu - 3α0 U0² u`.
    pub fn apply_l0(&self, u: &Field) -> Field {
        apply_l0(u, &self.u0, &self.params)
    }

    /// Solves `L0 u = rhs` on the symmetric subspace to relative L² residual `tol`.
    pub fn solve_l0(&self, rhs: &Field, guess: Option<&Field>, tol: f64) -> Result<(Field, LinearStats)> {
        let mut x = match guess {
            Some(g) => g.values().to_vec(),
            None => vec![0.0; self.grid.len()],
        };
        let mut b = rhs.values().to_vec();
        self.symmetry.project_exact_in_place(&mut b);
        self.symmetry.project_exact_in_place(&mut x);
        let w: Vec<f64> = self.u0.values().iter().map(|&x| 3.0 * self.params.alpha0 * x * x).collect();
        let lam = self.params.lambda;
        let grid = self.grid.clone();
        let apply = |x: &[f64], y: &mut [f64]| {
            laplacian_into(&grid, x, y);
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = -*yi + (lam - w[i]) * x[i]);
        };
        let stats = solve_symmetric(&apply, &self.pre0, &self.symmetry, &self.grid, &b, &mut x, tol, 4000)?;
        Ok((Field::from_values(&self.grid, x)?, stats))
    }

    /// Smallest `|ν|` of `L0 x = ν(-Δ_h + λ)x` on the symmetric subspace, by
    /// inverse iteration; the discrete analogue of `ρ0`.
    pub fn l0_conditioning(&self, iterations: usize) -> Result<f64> {
        let lam = self.params.lambda;
        let b_apply = |f: &Field| f.laplacian().zip_map(f, |l, x| -l + lam * x);
        inverse_iteration(
            &self.grid,
            &self.symmetry,
            iterations,
            |f| self.apply_l0(f),
            b_apply,
            |rhs| self.solve_l0(rhs, None, 1e-10).map(|r| r.0),
        )
    }
}

/// Deterministic symmetric starting field for inverse iteration.
fn start_field(grid: &Arc<Grid>, sym: &Symmetry) -> Field {
    let f = Field::sample(grid, |y| {
        let r2: f64 = y.iter().map(|x| x * x).sum();
        (-r2 / 50.0).exp() * (1.0 + 0.5 * (1.3 * y[0]).cos() * (0.7 * y[1]).cos())
    });
    Field::from_values(grid, sym.project_exact(f.values())).unwrap()
}

fn inverse_iteration<A, B, S>(grid: &Arc<Grid>, sym: &Symmetry, iterations: usize, a: A, b: B, solve: S) -> Result<f64>
where
    A: Fn(&Field) -> Field,
    B: Fn(&Field) -> Field,
    S: Fn(&Field) -> Result<Field>,
{
    let mut x = start_field(grid, sym);
    let mut nu = f64::NAN;
    for _ in 0..iterations.max(1) {
        let bx = b(&x);
        let y = solve(&bx)?;
        let by = b(&y);
        let scale = grid::quad_product(&y, &by).sqrt();
        x = y.scaled(1.0 / scale);
        nu = grid::quad_product(&x, &a(&x)) / grid::quad_product(&x, &b(&x));
    }
    Ok(nu.abs())
}

/// The bump configuration at one radius together with its fields.
pub struct Ansatz<'a> {
    pub bg: &'a Background,
    pub config: BumpConfiguration,
    pub bumps: BumpFields,
}

/// `L0 u = -Δ_h u + λu - 3α0 U0² u`.
pub fn apply_l0(u: &Field, u0: &Field, params: &ModelParams) -> Field {
    let lap = u.laplacian();
    let (lam, a0) = (params.lambda, params.alpha0);
    Field::combine(&[&lap, u, u0], |x| -x[0] + lam * x[1] - 3.0 * a0 * x[2] * x[2] * x[1])
}

/// `L1 v = -Δ_h v + μv - 3α1 W² v`.
pub fn apply_l1(v: &Field, bump_sum: &Field, mu: &Field, params: &ModelParams) -> Field {
    let lap = v.laplacian();
    let a1 = params.alpha1;
    Field::combine(&[&lap, v, bump_sum, mu], |x| -x[0] + x[3] * x[1] - 3.0 * a1 * x[2] * x[2] * x[1])
}

/// `g0 = 3α0 U0 u² + α0 u³ + β(U0+u)(W+v)²`.
pub fn g0_rhs(u: &Field, v: &Field, u0: &Field, bump_sum: &Field, params: &ModelParams) -> Field {
    let (a0, b) = (params.alpha0, params.beta);
    Field::combine(&[u, v, u0, bump_sum], |x| {
        let (u, v, u0, w) = (x[0], x[1], x[2], x[3]);
        3.0 * a0 * u0 * u * u + a0 * u * u * u + b * (u0 + u) * (w + v) * (w + v)
    })
}

/// `g1 = 3α1 W v² + α1 v³ + β(U0+u)²(W+v) − (μ−1)W + α1(W³ − ΣV_i³)`.
pub fn g1_rhs(u: &Field, v: &Field, u0: &Field, bumps: &BumpFields, mu: &Field, params: &ModelParams) -> Field {
    let (a1, b) = (params.alpha1, params.beta);
    Field::combine(&[u, v, u0, &bumps.sum, &bumps.cube_sum, mu], |x| {
        let (u, v, u0, w, c3, mu) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        3.0 * a1 * w * v * v + a1 * v * v * v + b * (u0 + u) * (u0 + u) * (w + v) - (mu - 1.0) * w
            + a1 * (w * w * w - c3)
    })
}

/// Restarted MINRES on the exact-symmetry subspace until the true relative
/// L² residual is at most `tol`.
#[allow(clippy::too_many_arguments)]
fn solve_symmetric<A>(
    apply: &A,
    pre: &HelmholtzSolver,
    sym: &Symmetry,
    grid: &Arc<Grid>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<LinearStats>
where
    A: Fn(&[f64], &mut [f64]) + Sync,
{
    let op = |v: &[f64], out: &mut [f64]| {
        apply(v, out);
        sym.project_exact_in_place(out);
    };
    // Projecting both sides keeps rounding out of the complement, where `P A`
    // vanishes and MINRES would amplify it.
    let precond = |r: &[f64], z: &mut [f64]| {
        pre.solve(r, z);
        sym.project_exact_in_place(z);
    };
    let weighted_norm = |r: &[f64]| par::sum_by(r.len(), |i| grid.weight(i) * r[i] * r[i]).sqrt();
    let bnorm = weighted_norm(b);
    let mut stats = LinearStats::default();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(stats);
    }
    let mut r = vec![0.0; b.len()];
    let mut z = vec![0.0; b.len()];
    precond(b, &mut z);
    let bm = par::dot(b, &z).sqrt();
    let mut factor = 0.03;
    let mut previous = f64::INFINITY;
    let mut history = Vec::new();
    for restart in 0..8 {
        let out =
            minres(op, precond, b, x, (factor * tol).max(1e-14) * bm, max_iter - stats.iterations.min(max_iter - 1));
        stats.iterations += out.iterations;
        stats.restarts = restart;
        history.extend(out.history);
        op(x, &mut r);
        for i in 0..r.len() {
            r[i] -= b[i];
        }
        stats.relative_residual = weighted_norm(&r) / bnorm;
        if stats.relative_residual <= tol {
            return Ok(stats);
        }
        if stats.iterations >= max_iter || !(stats.relative_residual < 0.5 * previous) {
            break;
        }
        previous = stats.relative_residual;
        factor *= 0.1;
    }
    Err(Error::LinearSolve { iterations: stats.iterations, residual: stats.relative_residual, history })
}

impl<'a> Ansatz<'a> {
    pub fn radius(&self) -> f64 {
        self.config.radius
    }

    pub fn params(&self) -> &ModelParams {
        &self.bg.params
    }

    pub fn apply_l1(&self, v: &Field) -> Field {
        apply_l1(v, &self.bumps.sum, &self.bg.mu, &self.bg.params)
    }

    pub fn g0(&self, u: &Field, v: &Field) -> Field {
        g0_rhs(u, v, &self.bg.u0, &self.bumps.sum, &self.bg.params)
    }

    pub fn g1(&self, u: &Field, v: &Field) -> Field {
        g1_rhs(u, v, &self.bg.u0, &self.bumps, &self.bg.mu, &self.bg.params)
    }

    /// `γ0`, `f0` on this grid with safety 0.9.
    pub fn coupling_bound(&self) -> Result<CouplingBound> {
        compute_gamma0_f0(&self.bg.u0, &self.bumps.sum, self.bg.v0_profile.decay_constant, 0.9)
    }

    /// Solves the saddle system for `(v, Λ)` with `quad(Z v) = 0`.
    pub fn solve_l1_constrained(
        &self,
        rhs: &Field,
        guess: Option<(&Field, f64)>,
        tol: f64,
    ) -> Result<(Field, f64, LinearStats)> {
        solve_saddle(self.bg, &self.bumps.sum, &self.bumps.z, rhs, guess, tol)
    }

    /// Smallest `|ν|` of `L1 x = ν(-Δ_h + μ)x` on the symmetric subspace
    /// without the constraint (small values show the radial near-kernel).
    pub fn l1_conditioning(&self, iterations: usize) -> Result<f64> {
        let mu = &self.bg.mu;
        let b_apply = |f: &Field| Field::combine(&[&f.laplacian(), f, mu], |x| -x[0] + x[2] * x[1]);
        let len = self.bg.grid.len();
        let w: Vec<f64> = self.bumps.sum.values().iter().map(|&x| 3.0 * self.bg.params.alpha1 * x * x).collect();
        let grid = self.bg.grid.clone();
        let muv = mu.values();
        let apply = |x: &[f64], y: &mut [f64]| {
            laplacian_into(&grid, x, y);
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = -*yi + (muv[i] - w[i]) * x[i]);
        };
        inverse_iteration(
            &self.bg.grid,
            &self.bg.symmetry,
            iterations,
            |f| self.apply_l1(f),
            b_apply,
            |rhs| {
                let mut b = rhs.values().to_vec();
                self.bg.symmetry.project_exact_in_place(&mut b);
                let mut x = vec![0.0; len];
                solve_symmetric(&apply, &self.bg.pre1, &self.bg.symmetry, &self.bg.grid, &b, &mut x, 1e-10, 4000)?;
                Field::from_values(&self.bg.grid, x)
            },
        )
    }
}

/// Saddle-point solve `L1 v + Λ c = rhs`, `cᵀ v = 0` where `c = w∘Z/h^N`
/// (so that `cᵀv` is exactly `quad(Z v)/h^N`).
pub fn solve_saddle(
    bg: &Background,
    bump_sum: &Field,
    z: &Field,
    rhs: &Field,
    guess: Option<(&Field, f64)>,
    tol: f64,
) -> Result<(Field, f64, LinearStats)> {
    let grid = &bg.grid;
    let len = grid.len();
    let zz = grid::quad_product(z, z);
    if !(zz > 1e-24) {
        return Err(Error::DegenerateConstraint(zz));
    }
    let hn = grid.spacing().powi(grid.dim() as i32);
    let c: Vec<f64> = (0..len).map(|i| grid.weight(i) / hn * z.values()[i]).collect();
    let w: Vec<f64> = bump_sum.values().iter().map(|&x| 3.0 * bg.params.alpha1 * x * x).collect();
    let muv = bg.mu.values();
    let sym = &bg.symmetry;

    let apply = |x: &[f64], y: &mut [f64]| {
        let (xv, xl) = x.split_at(len);
        let (yv, yl) = y.split_at_mut(len);
        laplacian_into(grid, xv, yv);
        let lam = xl[0];
        yv.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = -*yi + (muv[i] - w[i]) * xv[i] + lam * c[i]);
        sym.project_exact_in_place(yv);
        yl[0] = par::dot(&c, xv);
    };
    let mut mc = vec![0.0; len];
    bg.pre1.solve(&c, &mut mc);
    let schur = par::dot(&c, &mc);
    let precond = |r: &[f64], out: &mut [f64]| {
        let (rv, rl) = r.split_at(len);
        let (ov, ol) = out.split_at_mut(len);
        bg.pre1.solve(rv, ov);
        sym.project_exact_in_place(ov);
        ol[0] = rl[0] / schur;
    };

    let mut b = rhs.values().to_vec();
    sym.project_exact_in_place(&mut b);
    b.push(0.0);
    let mut x = match guess {
        Some((v, l)) => {
            let mut x = v.values().to_vec();
            sym.project_exact_in_place(&mut x);
            x.push(l);
            x
        }
        None => vec![0.0; len + 1],
    };
    let weighted_norm = |r: &[f64]| par::sum_by(len, |i| grid.weight(i) * r[i] * r[i]).sqrt();
    let bnorm = weighted_norm(&b);
    let mut stats = LinearStats::default();
    if bnorm == 0.0 {
        return Ok((Field::zeros(grid), 0.0, stats));
    }
    let mut z_b = vec![0.0; len + 1];
    precond(&b, &mut z_b);
    let bm = par::dot(&b, &z_b).sqrt();
    let mut r = vec![0.0; len + 1];
    let mut factor = 0.03;
    let mut previous = f64::INFINITY;
    let mut history = Vec::new();
    let max_iter = 4000;
    let mut done = false;
    for restart in 0..8 {
        let out = minres(
            apply,
            precond,
            &b,
            &mut x,
            (factor * tol).max(1e-14) * bm,
            max_iter - stats.iterations.min(max_iter - 1),
        );
        stats.iterations += out.iterations;
        stats.restarts = restart;
        history.extend(out.history);
        apply(&x, &mut r);
        for i in 0..len {
            r[i] -= b[i];
        }
        stats.relative_residual = weighted_norm(&r) / bnorm;
        if stats.relative_residual <= tol {
            done = true;
            break;
        }
        if stats.iterations >= max_iter || !(stats.relative_residual < 0.5 * previous) {
            break;
        }
        previous = stats.relative_residual;
        factor *= 0.1;
    }
    if !done {
        return Err(Error::LinearSolve { iterations: stats.iterations, residual: stats.relative_residual, history });
    }
    let lagrange = x[len];
    x.truncate(len);
    let mut v = Field::from_values(grid, x)?;
    // Remove the rounding-level constraint defect.
    let t = grid::quad_product(z, &v) / zz;
    if t != 0.0 {
        v = v.zip_map(z, |a, b| a - t * b);
    }
    Ok((v, lagrange, stats))
}

/// Steps this many times larger than the first count as a blow-up.
const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub radius: f64,
    pub iterations: usize,
    pub last_ratio: f64,
    pub steps: Vec<f64>,
    pub norms: Vec<f64>,
    pub lagrange: Vec<f64>,
    /// `max|u|` after each iteration.
    pub u_sup: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectorResult {
    #[serde(skip)]
    pub u: Field,
    #[serde(skip)]
    pub v: Field,
    pub radius: f64,
    pub norm_e: f64,
    pub iterations: usize,
    pub contraction_factor: f64,
    pub lagrange: f64,
    pub converged: bool,
    pub steps: Vec<f64>,
    /// `‖L0 u − g0(u,v)‖_{L²}`.
    pub residual_u: f64,
    /// `‖L1 v + Λ Z − g1(u,v)‖_{L²}`.
    pub residual_v: f64,
    pub rhs_norm_u: f64,
    pub rhs_norm_v: f64,
    /// `|quad(Z v)| / (‖Z‖ ‖v‖)`.
    pub constraint_defect: f64,
    pub linear_iterations: usize,
    pub beta: f64,
    pub f0: f64,
}

impl CorrectorResult {
    /// Weak-residual invariant at tolerance `tol`.
    pub fn residual_within(&self, tol: f64) -> bool {
        self.residual_u <= tol * (1.0 + self.rhs_norm_u) && self.residual_v <= tol * (1.0 + self.rhs_norm_v)
    }
}

impl<'a> Ansatz<'a> {
    /// Iterates `(u, v) ← (L0⁻¹ g0(u,v), L1⁻¹ g1(u,v))` on the constrained
    /// symmetric space from `(0, 0)` until the E-norm step falls below `tol`.
    pub fn fixed_point(&self, settings: &SolverSettings) -> Result<CorrectorResult> {
        let bg = self.bg;
        let params = &bg.params;
        let grid = &bg.grid;
        let bound = self.coupling_bound()?;
        if params.beta.abs() >= bound.f0 {
            warn!("|beta| = {} is not below f0 = {}", params.beta.abs(), bound.f0);
        }
        if params.k >= 2 {
            if let Ok(s) = params.radius_interval() {
                if !s.contains(self.radius()) {
                    warn!("R = {} lies outside S_k = [{}, {}]", self.radius(), s.lo, s.hi);
                }
            }
        }
        let inner = settings.tol * settings.inner_factor;
        let mut u = Field::zeros(grid);
        let mut v = Field::zeros(grid);
        let mut lagrange = 0.0;
        let mut steps: Vec<f64> = Vec::new();
        let mut norms = Vec::new();
        let mut lams = Vec::new();
        let mut u_sup = Vec::new();
        let mut contraction: f64 = 0.0;
        let mut above = 0;
        let mut linear_iterations = 0;
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=settings.max_iter {
            iterations = it;
            let g0 = self.g0(&u, &v);
            let g1 = self.g1(&u, &v);
            let expanding = above > 0;
            let diverged = |reason: String, steps: Vec<f64>, norms: Vec<f64>, lagrange: Vec<f64>, u_sup: Vec<f64>| {
                let last_ratio = match steps.as_slice() {
                    [.., a, b] => b / a,
                    _ => f64::NAN,
                };
                Error::Diverged(Box::new(DivergenceReport {
                    radius: self.radius(),
                    iterations: it,
                    last_ratio,
                    steps,
                    norms,
                    lagrange,
                    u_sup,
                    reason,
                }))
            };
            let solved = bg.solve_l0(&g0, Some(&u), inner).and_then(|(un, s0)| {
                self.solve_l1_constrained(&g1, Some((&v, lagrange)), inner).map(|(vn, l, s1)| (un, s0, vn, l, s1))
            });
            let (mut un, s0, mut vn, lam, s1) = match solved {
                Ok(x) => x,
                Err(Error::LinearSolve { residual, .. }) if expanding => {
                    return Err(diverged(
                        format!("linear solve failed (residual {residual:e}) while the iteration was expanding"),
                        steps,
                        norms,
                        lams,
                        u_sup,
                    ));
                }
                Err(e) => return Err(e),
            };
            if settings.full_symmetry {
                un = bg.symmetry.apply(&un);
                vn = bg.symmetry.apply(&vn);
            }
            linear_iterations += s0.iterations + s1.iterations;
            let step = grid::norm_e(&un.sub(&u), &vn.sub(&v), params.lambda, &bg.mu);
            u = un;
            v = vn;
            lagrange = lam;
            let norm = grid::norm_e(&u, &v, params.lambda, &bg.mu);
            debug!("R={} iteration {it}: step {step:e}, norm {norm:e}, Λ {lam:e}", self.radius());
            if let Some(&prev) = steps.last() {
                let ratio = step / prev;
                contraction = contraction.max(ratio);
                above = if ratio >= 1.0 { above + 1 } else { 0 };
            }
            steps.push(step);
            norms.push(norm);
            lams.push(lam);
            u_sup.push(u.max_abs());
            if !step.is_finite() || !norm.is_finite() {
                return Err(diverged("non-finite iterate".into(), steps, norms, lams, u_sup));
            }
            if step < settings.tol {
                converged = true;
                break;
            }
            if above >= 5 {
                return Err(diverged("step ratio >= 1 for 5 consecutive iterations".into(), steps, norms, lams, u_sup));
            }
            if step > BLOW_UP * steps[0] {
                return Err(diverged(
                    format!("step grew beyond {BLOW_UP:e} times the first step"),
                    steps,
                    norms,
                    lams,
                    u_sup,
                ));
            }
        }
        let g0 = self.g0(&u, &v);
        let g1 = self.g1(&u, &v);
        let residual_u = bg.apply_l0(&u).sub(&g0).l2_norm();
        let residual_v =
            Field::combine(&[&self.apply_l1(&v), &self.bumps.z, &g1], |x| x[0] + lagrange * x[1] - x[2]).l2_norm();
        let zn = self.bumps.z.l2_norm();
        let vn = v.l2_norm();
        let constraint_defect = if vn > 0.0 { grid::quad_product(&self.bumps.z, &v).abs() / (zn * vn) } else { 0.0 };
        Ok(CorrectorResult {
            norm_e: grid::norm_e(&u, &v, params.lambda, &bg.mu),
            u,
            v,
            radius: self.radius(),
            iterations,
            contraction_factor: contraction,
            lagrange,
            converged,
            steps,
            residual_u,
            residual_v,
            rhs_norm_u: g0.l2_norm(),
            rhs_norm_v: g1.l2_norm(),
            constraint_defect,
            linear_iterations,
            beta: params.beta,
            f0: bound.f0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(k: usize) -> ModelParams {
        ModelParams { k, ..Default::default() }
    }

    fn small_background(k: usize) -> Background {
        let g = Grid::new(2, 12.0, 0.25).unwrap();
        Background::new(&small_params(k), &g).unwrap()
    }

    #[test]
    fn discrete_u0_satisfies_its_equation() {
        let bg = small_background(4);
        assert!(bg.u0_defect < 1e-10, "{}", bg.u0_defect);
        // L0 U0 = -2α0 U0³.
        let lhs = bg.apply_l0(&bg.u0);
        let rhs = bg.u0.map(|x| -2.0 * x * x * x);
        assert!(lhs.sub(&rhs).max_abs() < 1e-9);
    }

    #[test]
    fn l0_round_trip_and_identity() {
        let bg = small_background(4);
        let rhs = bg.u0.map(|x| -2.0 * x * x * x);
        let (u, stats) = bg.solve_l0(&rhs, None, 1e-10).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        assert!(u.sub(&bg.u0).max_abs() < 1e-7);
        let w = Field::sample(&bg.grid, |y| {
            (-(y[0] * y[0] + y[1] * y[1]) / 4.0).exp() * (1.0 + y[0] * y[0] * y[1] * y[1] / 10.0)
        });
        let (back, _) = bg.solve_l0(&bg.apply_l0(&w), None, 1e-11).unwrap();
        assert!(back.sub(&w).max_abs() < 1e-8);
        assert_eq!(bg.apply_l0(&Field::zeros(&bg.grid)).max_abs(), 0.0);
    }

    #[test]
    fn l0_without_background_is_shifted_laplacian() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let params = ModelParams::default();
        let l = 2.0 + 0.25;
        let f = Field::sample(&g, |y| {
            (std::f64::consts::PI * (y[0] + l) / (2.0 * l)).sin()
                * (std::f64::consts::PI * (y[1] + l) / (2.0 * l)).sin()
        });
        let out = apply_l0(&f, &Field::zeros(&g), &params);
        let h = 0.25;
        let e1 = (4.0 / (h * h)) * (std::f64::consts::PI * h / (4.0 * l)).sin().powi(2);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - (2.0 * e1 + 1.0) * b).abs() < 1e-10);
        }
    }

    #[test]
    fn forcing_at_zero() {
        let mut bg = small_background(3);
        bg.set_beta(0.07);
        let an = bg.ansatz(4.0);
        let z = Field::zeros(&bg.grid);
        let g0 = an.g0(&z, &z);
        let want = Field::combine(&[&bg.u0, &an.bumps.sum], |x| 0.07 * x[0] * x[1] * x[1]);
        assert_eq!(g0.sub(&want).max_abs(), 0.0);
        let g1 = an.g1(&z, &z);
        let want = Field::combine(&[&bg.u0, &an.bumps.sum, &an.bumps.cube_sum, &bg.mu], |x| {
            0.07 * x[0] * x[0] * x[1] - (x[3] - 1.0) * x[1] + (x[1].powi(3) - x[2])
        });
        assert!(g1.sub(&want).max_abs() < 1e-13);
    }

    #[test]
    fn single_bump_forcing_is_potential_only() {
        let bg = small_background(1);
        let an = bg.ansatz(3.0);
        let z = Field::zeros(&bg.grid);
        let g1 = an.g1(&z, &z);
        let want = Field::combine(&[&an.bumps.sum, &bg.mu], |x| -(x[1] - 1.0) * x[0]);
        assert!(g1.sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn constrained_solve_enforces_constraint() {
        let bg = small_background(4);
        let an = bg.ansatz(5.0);
        let z = Field::zeros(&bg.grid);
        let rhs = an.g1(&z, &z);
        let (v, lam, stats) = an.solve_l1_constrained(&rhs, None, 1e-10).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        let qz = grid::quad_product(&an.bumps.z, &v).abs();
        assert!(qz <= 1e-10 * an.bumps.z.l2_norm() * v.l2_norm());
        let res = Field::combine(&[&an.apply_l1(&v), &an.bumps.z, &rhs], |x| x[0] + lam * x[1] - x[2]);
        assert!(res.l2_norm() < 1e-8 * rhs.l2_norm());
    }

    #[test]
    fn degenerate_constraint_is_reported() {
        let bg = small_background(4);
        let an = bg.ansatz(5.0);
        let zero = Field::zeros(&bg.grid);
        let rhs = an.g1(&zero, &zero);
        let err = solve_saddle(&bg, &an.bumps.sum, &zero, &rhs, None, 1e-8).unwrap_err();
        assert!(matches!(err, Error::DegenerateConstraint(_)));
    }

    #[test]
    fn uncoupled_iteration_keeps_u_zero() {
        let bg = small_background(4);
        let an = bg.ansatz(6.0);
        let res = an.fixed_point(&SolverSettings { tol: 1e-8, max_iter: 40, ..Default::default() }).unwrap();
        assert!(res.converged, "{:?}", res.steps);
        assert!(res.u.values().iter().all(|&x| x == 0.0));
        assert!(res.residual_within(1e-8));
        assert!(res.norm_e > 0.0);
    }

    #[test]
    fn zero_forcing_gives_zero_corrector() {
        let params = ModelParams { k: 1, a: 1e-300, ..Default::default() };
        let g = Grid::new(2, 10.0, 0.25).unwrap();
        let bg = Background::new(&params, &g).unwrap();
        let an = bg.ansatz(2.0);
        let res = an.fixed_point(&SolverSettings::default()).unwrap();
        assert!(res.converged);
        assert!(res.norm_e < 1e-12);
    }

    #[test]
    fn conditioning_is_bounded_away_from_zero() {
        let bg = small_background(4);
        let rho = bg.l0_conditioning(6).unwrap();
        assert!(rho > 0.05 && rho < 1.0, "{rho}");
    }
}
