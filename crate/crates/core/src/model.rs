//! Problem constants, the asymptotic exponents, the admissible radius
//! window `S_k`, potential validation and the coupling bound `f0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

/// Radial potential families `μ(r) = μ0 + a·φ(r)` with `φ(r) ~ r^{-m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Potential {
    /// `φ(r) = (ℓ² + r²)^{-m/2}`; remainder `O(r^{-m-2})`.
    Algebraic { core: f64 },
    /// `φ(r) = (ℓ + r)^{-m}`; remainder `O(r^{-m-1})`.
    Shifted { core: f64 },
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Algebraic { core: 1.0 }
    }
}

impl Potential {
    pub fn name(&self) -> &'static str {
        match self {
            Potential::Algebraic { .. } => "algebraic",
            Potential::Shifted { .. } => "shifted",
        }
    }

    fn profile(&self, m: f64, r: f64) -> f64 {
        match *self {
            Potential::Algebraic { core } => (core * core + r * r).powf(-m / 2.0),
            Potential::Shifted { core } => (core + r).powf(-m),
        }
    }

    fn core(&self) -> f64 {
        match *self {
            Potential::Algebraic { core } | Potential::Shifted { core } => core,
        }
    }

    fn with_core(&self, core: f64) -> Potential {
        match self {
            Potential::Algebraic { .. } => Potential::Algebraic { core },
            Potential::Shifted { .. } => Potential::Shifted { core },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub mu0: f64,
    pub a: f64,
    pub m: f64,
    pub theta: f64,
    pub k: usize,
    pub dim: usize,
    pub potential: Potential,
    /// Overrides the midpoint rule for τ0.
    pub tau0: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 1.0,
            alpha0: 1.0,
            alpha1: 1.0,
            beta: 0.0,
            mu0: 1.0,
            a: 1.0,
            m: 1.0,
            theta: 2.0,
            k: 16,
            dim: 2,
            potential: Potential::default(),
            tau0: None,
        }
    }
}

impl ModelParams {
    /// Checks the sign and range constraints on the constants.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("a", self.a),
            ("theta", self.theta),
            ("mu0", self.mu0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Assumption(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.m > 0.5) {
            return Err(Error::Assumption(format!("m must exceed 1/2, got {}", self.m)));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite, got {}", self.beta)));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.potential.core() <= 0.0 {
            return Err(Error::InvalidParameter("potential core length must be positive".into()));
        }
        Ok(())
    }

    /// `μ(r)`.
    pub fn mu(&self, r: f64) -> f64 {
        self.mu0 + self.a * self.potential.profile(self.m, r)
    }

    pub fn exponents(&self) -> Result<Exponents> {
        match self.tau0 {
            Some(t) => derive_exponents_with_tau(self.m, self.theta, t),
            None => derive_exponents(self.m, self.theta),
        }
    }

    pub fn radius_interval(&self) -> Result<RadiusInterval> {
        let e = self.exponents()?;
        bump_radius_interval(self.k, self.m, e.delta0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub tau0: f64,
    pub delta0: f64,
    pub p: f64,
}

/// `τ0 = (1 + 1/(2m))/2`, `4δ0 = min{τ0 m − 1/2, τ0 − 1/2, θ}`, `p = τ0 m − 1/2 − δ0`.
pub fn derive_exponents(m: f64, theta: f64) -> Result<Exponents> {
    if !(m > 0.5) {
        return Err(Error::Assumption(format!("m must exceed 1/2, got {m}")));
    }
    derive_exponents_with_tau(m, theta, 0.5 * (1.0 + 1.0 / (2.0 * m)))
}

pub fn derive_exponents_with_tau(m: f64, theta: f64, tau0: f64) -> Result<Exponents> {
    if !(m > 0.5) {
        return Err(Error::Assumption(format!("m must exceed 1/2, got {m}")));
    }
    if !(theta > 0.0) {
        return Err(Error::Assumption(format!("theta must be positive, got {theta}")));
    }
    if !(tau0 > 0.5 && tau0 < 1.0 && tau0 * m > 0.5) {
        return Err(Error::InvalidParameter(format!("tau0={tau0} must satisfy 1/2 < tau0 < 1 and tau0*m > 1/2")));
    }
    let delta0 = (tau0 * m - 0.5).min(tau0 - 0.5).min(theta) / 4.0;
    Ok(Exponents { tau0, delta0, p: tau0 * m - 0.5 - delta0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RadiusInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, r: f64) -> bool {
        self.lo <= r && r <= self.hi
    }
}

/// `S_k = [(m−δ0)/(2π)·k ln k, (m+δ0)/(2π)·k ln k]`.
pub fn bump_radius_interval(k: usize, m: f64, delta0: f64) -> Result<RadiusInterval> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("S_k needs k >= 2, got {k}")));
    }
    let kl = k as f64 * (k as f64).ln();
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(RadiusInterval { lo: (m - delta0) / two_pi * kl, hi: (m + delta0) / two_pi * kl })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// The first failing clause, or `"all"` when every clause holds.
    pub clause: String,
    pub passed: bool,
    pub witness_radius: f64,
    pub measured_bound: f64,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<ValidationReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Assumption(format!(
                "clause '{}' fails at r={} (measured {})",
                self.clause, self.witness_radius, self.measured_bound
            )))
        }
    }
}

/// Log-spaced radii from 1 to `10·max S_k` (at least 100).
pub fn default_sample_radii(params: &ModelParams) -> Vec<f64> {
    let top = params.radius_interval().map(|s| 10.0 * s.hi).unwrap_or(100.0).max(100.0);
    let n = 400;
    (0..=n).map(|i| top.powf(i as f64 / n as f64)).collect()
}

/// Checks the potential assumption on the sampled radii, clause by clause:
/// parameter signs, the `O(r^{-m-θ})` remainder, boundedness, positivity.
pub fn validate_potential(params: &ModelParams, sample_radii: &[f64]) -> ValidationReport {
    let fail = |clause: &str, r: f64, b: f64| ValidationReport {
        clause: clause.to_string(),
        passed: false,
        witness_radius: r,
        measured_bound: b,
    };
    for (name, v) in [("a", params.a), ("theta", params.theta), ("mu0", params.mu0)] {
        if !(v > 0.0) {
            return fail(&format!("{name} > 0"), 0.0, v);
        }
    }
    if !(params.m > 0.5) {
        return fail("m > 1/2", 0.0, params.m);
    }
    let mut radii: Vec<f64> = sample_radii.iter().copied().filter(|r| r.is_finite() && *r >= 0.0).collect();
    radii.sort_by(f64::total_cmp);
    let Some(&r_top) = radii.last() else {
        return fail("samples", 0.0, 0.0);
    };

    let remainder =
        |r: f64| r.powf(params.m + params.theta) * (params.mu(r) - params.mu0 - params.a * r.powf(-params.m)).abs();
    let sup_on = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        radii
            .iter()
            .filter(|&&r| r > lo && r <= hi)
            .map(|&r| (f(r), r))
            .fold((f64::NEG_INFINITY, f64::NAN), |acc, x| if x.0 > acc.0 { x } else { acc })
    };
    let (top_bound, top_r) = sup_on(r_top / 10.0, r_top, &remainder);
    let (prev_bound, _) = sup_on(r_top / 100.0, r_top / 10.0, &remainder);
    if !top_bound.is_finite() || (prev_bound.is_finite() && top_bound > 2.0 * prev_bound + 1e-12) {
        return fail("asymptotic remainder", top_r, top_bound);
    }

    let mu_abs = |r: f64| params.mu(r).abs();
    let (sup_all, sup_r) = sup_on(-1.0, r_top, &mu_abs);
    let (sup_top, _) = sup_on(r_top / 10.0, r_top, &mu_abs);
    let (sup_prev, _) = sup_on(r_top / 100.0, r_top / 10.0, &mu_abs);
    if !sup_all.is_finite() || (sup_prev.is_finite() && sup_top > 2.0 * sup_prev) {
        return fail("bounded", sup_r, sup_all);
    }

    let (neg_min, min_r) = sup_on(-1.0, r_top, &|r| -params.mu(r));
    let min_mu = -neg_min;
    if !(min_mu > 0.0) {
        return fail("positivity", min_r, min_mu);
    }
    ValidationReport { clause: "all".into(), passed: true, witness_radius: top_r, measured_bound: top_bound }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingBound {
    pub gamma0: f64,
    pub f0: f64,
    pub gamma0_crude: f64,
}

/// `γ0 = max_grid max{U0², (ΣV_i)²}`, `γ0_crude = max{sup U0, 7M}²`, `f0 = safety/γ0`.
pub fn compute_gamma0_f0(u0: &Field, bump_sum: &Field, decay_m: f64, safety: f64) -> Result<CouplingBound> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidParameter(format!("safety must lie in (0,1), got {safety}")));
    }
    if !u0.same_grid(bump_sum) {
        return Err(Error::Grid("U0 and the bump sum live on different grids".into()));
    }
    let su = u0.max_abs();
    let sv = bump_sum.max_abs();
    let gamma0 = (su * su).max(sv * sv);
    if !(gamma0 > 0.0) {
        return Err(Error::InvalidParameter("gamma0 vanishes: both fields are zero".into()));
    }
    Ok(CouplingBound { gamma0, f0: safety / gamma0, gamma0_crude: su.max(7.0 * decay_m).powi(2) })
}

/// Rescales `x = √μ0 y` so that the potential tends to 1 at infinity.
pub fn normalize_mu0(params: &ModelParams) -> Result<ModelParams> {
    if !(params.mu0 > 0.0) {
        return Err(Error::Assumption(format!("mu0 must be positive, got {}", params.mu0)));
    }
    let s = params.mu0;
    let mut out = params.clone();
    out.lambda /= s;
    out.alpha0 /= s;
    out.alpha1 /= s;
    out.beta /= s;
    out.a *= s.powf(params.m / 2.0 - 1.0);
    out.potential = params.potential.with_core(params.potential.core() * s.sqrt());
    out.mu0 = 1.0;
    Ok(out)
}
