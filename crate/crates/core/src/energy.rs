//! The energy functional, the expansion constants of the ansatz energy, the
//! bump interaction term, and the pointwise tail bounds.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::corrector::{Ansatz, CorrectorResult};
use crate::geometry::{bump_centers, single_bump, BumpConfiguration};
use crate::grid::{inner0, inner1, quad_product, Field, Grid};
use crate::model::ModelParams;
use crate::radial::RadialProfile;

/// `I(U,V) = ½(‖U‖₀² + ‖V‖₁²) − ¼∫(α0U⁴ + α1V⁴ + 2βU²V²)`.
///
/// Evaluated as `E_U + E_V + cross`, so that for `β = 0` the split
/// `I(U,V) = I(U,0) + I(0,V)` holds bit for bit.
pub fn energy(u: &Field, v: &Field, mu: &Field, params: &ModelParams) -> f64 {
    let eu = 0.5 * inner0(u, u, params.lambda) - 0.25 * params.alpha0 * u.map(|x| x.powi(4)).quad();
    let ev = 0.5 * inner1(v, v, mu) - 0.25 * params.alpha1 * v.map(|x| x.powi(4)).quad();
    let cross = -0.5 * params.beta * u.zip_map(v, |a, b| a * a * b * b).quad();
    eu + ev + cross
}

/// `(A0, A1, A2) = ((α0/4)∫U0⁴, (α1/4)∫V0⁴, (a/2)∫V0²)`.
pub fn expansion_constants(u0: &RadialProfile, v0: &RadialProfile, params: &ModelParams) -> (f64, f64, f64) {
    (0.25 * params.alpha0 * u0.moment4, 0.25 * params.alpha1 * v0.moment4, 0.5 * params.a * v0.moment2)
}

#[derive(Debug, Clone, Serialize)]
pub struct InteractionTerm {
    /// `Σ_{i≥2} ∫V1³V_i`.
    pub sum: f64,
    /// `(α1/2)·sum / [e^{−2πR/k}(k/R)^{(N−1)/2}]`.
    pub j_surrogate: f64,
    /// Same with the chord `2R sin(π/k)` in the exponent.
    pub j_chord: f64,
}

/// Interaction of bump 1 with the others, by quadrature on `grid`.
pub fn interaction_term(
    profile: &RadialProfile,
    config: &BumpConfiguration,
    grid: &Arc<Grid>,
    alpha1: f64,
) -> InteractionTerm {
    assert!(config.k >= 2, "interaction needs k >= 2");
    let v1 = single_bump(grid, profile, config, 0);
    let cube = v1.map(|x| x * x * x);
    let terms: Vec<f64> =
        (1..config.k).into_par_iter().map(|i| quad_product(&cube, &single_bump(grid, profile, config, i))).collect();
    let sum: f64 = terms.iter().sum();
    let (k, r, n) = (config.k as f64, config.radius, config.dim as f64);
    let scale = (k / r).powf((n - 1.0) / 2.0);
    let j = |d: f64| 0.5 * alpha1 * sum / ((-d).exp() * scale);
    InteractionTerm { sum, j_surrogate: j(2.0 * PI * r / k), j_chord: j(2.0 * r * (PI / k).sin()) }
}

/// `(∫(μ−1)V1², (a/R^m)∫V0²)`.
pub fn potential_moment(
    profile: &RadialProfile,
    config: &BumpConfiguration,
    mu: &Field,
    params: &ModelParams,
) -> (f64, f64) {
    let v1 = single_bump(mu.grid(), profile, config, 0);
    let integral = Field::combine(&[mu, &v1], |x| (x[0] - 1.0) * x[1] * x[1]).quad();
    let leading = params.a / config.radius.powf(params.m) * profile.moment2;
    (integral, leading)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub radius: f64,
    pub eta: f64,
    pub samples: usize,
    /// `max Σ_{i≥2}V_i / (6M e^{−ηRπ/k} e^{(η−1)|y−x1|})`.
    pub max_ratio_tail: f64,
    /// `max Σ_i V_i / (7M e^{(η−1)|y−x1|})`.
    pub max_ratio_total: f64,
    pub violations: usize,
    pub pass: bool,
    /// `Σ_{i≥2} e^{−(η/2)|x_i−x1|}` against its bound `6e^{−ηRπ/k}`.
    pub sum2: f64,
    pub sum2_bound: f64,
    /// `2Σ_{θ2<θi≤π} e^{−ηR sin(θi/2)}` against `4e^{−ηRπ/k}`.
    pub sum3: f64,
    pub sum3_bound: f64,
}

/// Pointwise check of the tail bounds at `samples` (points of sector 1).
pub fn check_ksum_bound(
    profile: &RadialProfile,
    config: &BumpConfiguration,
    eta: f64,
    samples: &[Vec<f64>],
) -> BoundReport {
    let (k, r) = (config.k, config.radius);
    let m = profile.decay_constant;
    let decay = (-eta * r * PI / k as f64).exp();
    let ratios: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|y| {
            let d1 = config.distance_to(0, y);
            let tail: f64 = (1..k).map(|i| profile.eval(config.distance_to(i, y))).sum();
            let total = tail + profile.eval(d1);
            let envelope = ((eta - 1.0) * d1).exp();
            (tail / (6.0 * m * decay * envelope), total / (7.0 * m * envelope))
        })
        .collect();
    let violations = ratios.iter().filter(|(a, b)| *a > 1.0 || *b > 1.0).count();
    let max_ratio_tail = ratios.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_ratio_total = ratios.iter().map(|p| p.1).fold(0.0, f64::max);
    let x1 = config.centers[0];
    let sum2 = (1..k)
        .map(|i| {
            let xi = config.centers[i];
            let d = ((xi[0] - x1[0]).powi(2) + (xi[1] - x1[1]).powi(2) + (xi[2] - x1[2]).powi(2)).sqrt();
            (-0.5 * eta * d).exp()
        })
        .sum();
    let theta2 = 2.0 * PI / k as f64;
    let sum3 = 2.0
        * (0..k)
            .map(|i| 2.0 * PI * i as f64 / k as f64)
            .filter(|&t| t > theta2 + 1e-12 && t <= PI + 1e-12)
            .map(|t| (-eta * r * (t / 2.0).sin()).exp())
            .sum::<f64>();
    BoundReport {
        k,
        radius: r,
        eta,
        samples: samples.len(),
        max_ratio_tail,
        max_ratio_total,
        violations,
        pass: violations == 0,
        sum2,
        sum2_bound: 6.0 * decay,
        sum3,
        sum3_bound: 4.0 * decay,
    }
}

/// `I(U0, ΣV_i)`.
pub fn ansatz_energy(u0: &Field, bump_sum: &Field, mu: &Field, params: &ModelParams) -> f64 {
    energy(u0, bump_sum, mu, params)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub k: usize,
    pub radius: f64,
    pub direct: f64,
    /// `A0 + k(A1 + A2/R^m) − interaction_sum`.
    pub model: f64,
    /// `|direct − model| / k`.
    pub rho: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// `(α1/2)·k·Σ_{i≥2}∫V1³V_i`.
    pub interaction_sum: f64,
    pub j_surrogate: f64,
    pub j_chord: f64,
}

/// Compares the ansatz energy with its expansion at the ansatz radius.
pub fn expansion_compare(ansatz: &Ansatz<'_>) -> ExpansionReport {
    let bg = ansatz.bg;
    let params = &bg.params;
    let config = &ansatz.config;
    let (a0, a1, a2) = expansion_constants(&bg.u0_profile, &bg.v0_profile, params);
    let it = interaction_term(&bg.v0_profile, config, &bg.grid, params.alpha1);
    let k = config.k as f64;
    let interaction_sum = 0.5 * params.alpha1 * k * it.sum;
    let direct = ansatz_energy(&bg.u0, &ansatz.bumps.sum, &bg.mu, params);
    let model = a0 + k * (a1 + a2 / config.radius.powf(params.m)) - interaction_sum;
    ExpansionReport {
        k: config.k,
        radius: config.radius,
        direct,
        model,
        rho: (direct - model).abs() / k,
        a0,
        a1,
        a2,
        interaction_sum,
        j_surrogate: it.j_surrogate,
        j_chord: it.j_chord,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyBreakdown {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// `k·A2/R^m`.
    pub potential_term: f64,
    pub interaction_sum: f64,
    pub j_estimate: f64,
    pub j_chord: f64,
    /// `I(U0, ΣV_i)`.
    pub main: f64,
    /// Exact first variation of `I` at `(U0, ΣV_i)` along `(u, v)`.
    pub l_val: f64,
    /// The linear form with the profile equations used to drop terms;
    /// differs from `l_val` by the discretization defect of the profiles.
    pub l_verbatim: f64,
    pub q_val: f64,
    pub h_val: f64,
    /// `F(R) = I(U0 + u, ΣV_i + v)`.
    pub total: f64,
}

impl EnergyBreakdown {
    /// `|total − (main + l + q + h)| / |total|`.
    pub fn decomposition_defect(&self) -> f64 {
        (self.total - (self.main + self.l_val + self.q_val + self.h_val)).abs() / self.total.abs()
    }
}

/// Splits `F(R)` into the ansatz energy and the linear, quadratic and
/// higher-order parts in the corrector.
pub fn breakdown(ansatz: &Ansatz<'_>, corrector: &CorrectorResult) -> EnergyBreakdown {
    let bg = ansatz.bg;
    let p = &bg.params;
    let (u0, w, mu) = (&bg.u0, &ansatz.bumps.sum, &bg.mu);
    let (u, v) = (&corrector.u, &corrector.v);
    let (a0, a1, a2) = expansion_constants(&bg.u0_profile, &bg.v0_profile, p);
    let k = ansatz.config.k as f64;
    let (interaction_sum, j_estimate, j_chord) = if ansatz.config.k >= 2 {
        let it = interaction_term(&bg.v0_profile, &ansatz.config, &bg.grid, p.alpha1);
        (0.5 * p.alpha1 * k * it.sum, it.j_surrogate, it.j_chord)
    } else {
        (0.0, f64::NAN, f64::NAN)
    };
    let main = energy(u0, w, mu, p);
    let (al0, al1, b) = (p.alpha0, p.alpha1, p.beta);

    let l_val = inner0(u0, u, p.lambda) + inner1(w, v, mu)
        - Field::combine(&[u0, w, u, v], |x| {
            let (z, w, u, v) = (x[0], x[1], x[2], x[3]);
            al0 * z * z * z * u + al1 * w * w * w * v + b * (z * w * w * u + z * z * w * v)
        })
        .quad();
    let l_verbatim = Field::combine(&[u0, w, &ansatz.bumps.cube_sum, mu, u, v], |x| {
        let (z, w, c3, mu, u, v) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        (mu - 1.0) * w * v + al1 * (c3 - w * w * w) * v - b * (z * z * w * v + z * w * w * u)
    })
    .quad();
    let q_val = 0.5
        * (inner0(u, u, p.lambda) - 3.0 * al0 * Field::combine(&[u0, u], |x| x[0] * x[0] * x[1] * x[1]).quad())
        + 0.5 * (inner1(v, v, mu) - 3.0 * al1 * Field::combine(&[w, v], |x| x[0] * x[0] * x[1] * x[1]).quad());
    let h_val = Field::combine(&[u0, w, u, v], |x| {
        let (z, w, u, v) = (x[0], x[1], x[2], x[3]);
        -0.25 * (4.0 * al0 * z * u * u * u + al0 * u.powi(4) + 4.0 * al1 * w * v * v * v + al1 * v.powi(4))
            - 0.5 * b * (2.0 * z * u * v * v + 2.0 * w * u * u * v + u * u * v * v)
            - 0.5 * b * (z * z * v * v + 4.0 * z * w * u * v + w * w * u * u)
    })
    .quad();
    let total = energy(&u0.add(u), &w.add(v), mu, p);
    EnergyBreakdown {
        a0,
        a1,
        a2,
        potential_term: k * a2 / ansatz.config.radius.powf(p.m),
        interaction_sum,
        j_estimate,
        j_chord,
        main,
        l_val,
        l_verbatim,
        q_val,
        h_val,
        total,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossprodFit {
    pub radii: Vec<f64>,
    /// `quad(U0²(ΣV_i)²)` at each radius.
    pub values: Vec<f64>,
    /// Fitted `γ` in `values ≈ C e^{−2γR}`.
    pub gamma: f64,
    pub log_c: f64,
}

/// Log-linear least-squares fit of the cross term against `R`.
pub fn crossprod_fit(u0: &Field, profile: &RadialProfile, k: usize, radii: &[f64]) -> CrossprodFit {
    let grid = u0.grid();
    let u2 = u0.map(|x| x * x);
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let config = bump_centers(k, r, grid.dim());
            let w = Field::sample(grid, |y| (0..k).map(|i| profile.eval(config.distance_to(i, y))).sum());
            quad_product(&u2, &w.map(|x| x * x))
        })
        .collect();
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = radii.len() as f64;
    let mx = radii.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxy: f64 = radii.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = radii.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    CrossprodFit { radii: radii.to_vec(), values, gamma: -slope / 2.0, log_c: my - slope * mx }
}
