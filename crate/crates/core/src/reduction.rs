//! The reduced energy `F(R) = I(U0 + u_R, ΣV_i + v_R)`, its maximization
//! over the radius window, and the assembled solution.

use rayon::prelude::*;
use serde::Serialize;

use crate::corrector::{Background, CorrectorResult, SolverSettings};
use crate::energy::{breakdown, energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::Field;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Serialize)]
pub struct ReducedEnergySample {
    pub radius: f64,
    pub value: f64,
    pub breakdown: EnergyBreakdown,
    pub corrector: CorrectorResult,
}

/// `F(R)` with its decomposition; fails if the corrector does not converge.
pub fn reduced_energy(bg: &Background, radius: f64, settings: &SolverSettings) -> Result<ReducedEnergySample> {
    let ansatz = bg.ansatz(radius);
    let corrector = ansatz.fixed_point(settings)?;
    if !corrector.converged {
        return Err(Error::Diverged(Box::new(crate::corrector::DivergenceReport {
            radius,
            iterations: corrector.iterations,
            last_ratio: match corrector.steps.as_slice() {
                [.., a, b] => b / a,
                _ => f64::NAN,
            },
            steps: corrector.steps.clone(),
            norms: vec![corrector.norm_e],
            lagrange: vec![corrector.lagrange],
            u_sup: vec![corrector.u.max_abs()],
            reason: format!("no convergence within {} iterations", settings.max_iter),
        })));
    }
    let b = breakdown(&ansatz, &corrector);
    Ok(ReducedEnergySample { radius, value: b.total, breakdown: b, corrector })
}

/// Golden-section search for a maximum of `f` on `[a, b]` to width `tol`.
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct Maximum {
    pub r0: f64,
    pub value: f64,
    /// Coarse scan `(R, F)`.
    pub coarse: Vec<(f64, f64)>,
    /// Strictly between the second and second-to-last coarse nodes.
    pub interior: bool,
    /// Index of the best coarse sample.
    pub best: usize,
}

/// Coarse scan of `f` on `n_coarse` equispaced points of `[lo, hi]` (run
/// concurrently), then golden section on the bracket around the best one.
pub fn maximize_over_interval<F>(f: F, lo: f64, hi: f64, n_coarse: usize, tol: f64) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if n_coarse < 9 {
        return Err(Error::InvalidParameter(format!("n_coarse = {n_coarse} must be at least 9")));
    }
    let nodes: Vec<f64> = (0..n_coarse).map(|i| lo + (hi - lo) * i as f64 / (n_coarse - 1) as f64).collect();
    let values = nodes.par_iter().map(|&r| f(r)).collect::<Result<Vec<f64>>>()?;
    let best = (0..n_coarse).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let a = nodes[best.saturating_sub(1)];
    let b = nodes[(best + 1).min(n_coarse - 1)];
    let (r0, value) = golden_section(&f, a, b, tol)?;
    let (r0, value) = if value >= values[best] { (r0, value) } else { (nodes[best], values[best]) };
    let interior = r0 > nodes[1] && r0 < nodes[n_coarse - 2];
    Ok(Maximum { r0, value, coarse: nodes.into_iter().zip(values).collect(), interior, best })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointCheck {
    pub delta: f64,
    /// `(F(R0+δ) − F(R0−δ)) / 2δ`.
    pub derivative: f64,
    /// `max |F'|` over neighbouring coarse samples.
    pub max_slope: f64,
    pub pass: bool,
}

/// Centered-difference check at `r0` against the coarse-scan slopes.
pub fn critical_point_check<F>(f: F, r0: f64, coarse: &[(f64, f64)], tol_r: f64) -> Result<CriticalPointCheck>
where
    F: Fn(f64) -> Result<f64>,
{
    let delta = 10.0 * tol_r;
    let derivative = (f(r0 + delta)? - f(r0 - delta)?) / (2.0 * delta);
    let max_slope = coarse.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).fold(0.0, f64::max);
    Ok(CriticalPointCheck { delta, derivative, max_slope, pass: derivative.abs() < 1e-3 * max_slope })
}

#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    pub maximum: Maximum,
    pub samples: Vec<ReducedEnergySample>,
}

/// Maximizes `F` over `S_k` on the given background.
pub fn maximize_over_sk(bg: &Background, n_coarse: usize, tol_r: f64, settings: &SolverSettings) -> Result<Reduction> {
    let s = bg.params.radius_interval()?;
    let samples = std::sync::Mutex::new(Vec::new());
    let f = |r: f64| {
        let sample = reduced_energy(bg, r, settings)?;
        let value = sample.value;
        samples.lock().unwrap().push(sample);
        Ok(value)
    };
    let maximum = maximize_over_interval(f, s.lo, s.hi, n_coarse, tol_r)?;
    let mut samples = samples.into_inner().unwrap();
    samples.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    Ok(Reduction { k: bg.params.k, lo: s.lo, hi: s.hi, maximum, samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: Field,
    #[serde(skip)]
    pub v: Field,
    pub r0: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub lagrange_at_r0: f64,
    pub energy: f64,
}

/// `U = U0 + u_{R0}`, `V = ΣV_i + v_{R0}` with their strong-form residuals.
pub fn assemble_solution(bg: &Background, r0: f64, settings: &SolverSettings) -> Result<Solution> {
    let ansatz = bg.ansatz(r0);
    let c = ansatz.fixed_point(settings)?;
    let u = bg.u0.add(&c.u);
    let v = ansatz.bumps.sum.add(&c.v);
    let (residual_u, residual_v) = pde_residual(&u, &v, bg);
    let e = energy(&u, &v, &bg.mu, &bg.params);
    Ok(Solution { u, v, r0, residual_u, residual_v, lagrange_at_r0: c.lagrange, energy: e })
}

/// L² norms of the two equation defects, with the fourth-order Laplacian.
pub fn pde_residual(u: &Field, v: &Field, bg: &Background) -> (f64, f64) {
    let p = &bg.params;
    let lu = u.laplacian_fourth_order();
    let lv = v.laplacian_fourth_order();
    let ru = Field::combine(&[&lu, u, v], |x| {
        -x[0] + p.lambda * x[1] - p.alpha0 * x[1].powi(3) - p.beta * x[1] * x[2] * x[2]
    });
    let rv = Field::combine(&[&lv, v, u, &bg.mu], |x| {
        -x[0] + x[3] * x[1] - p.alpha1 * x[1].powi(3) - p.beta * x[2] * x[2] * x[1]
    });
    (ru.l2_norm(), rv.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::ModelParams;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section(|x| Ok(-(x - 0.3).powi(2)), -1.0, 2.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx <= 0.0);
    }

    #[test]
    fn monotone_function_is_not_interior() {
        let m = maximize_over_interval(|r| Ok(1.0 / r), 2.0, 4.0, 9, 1e-8).unwrap();
        assert!(!m.interior);
        assert_eq!(m.best, 0);
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(maximize_over_interval(|r| Ok(r), 0.0, 1.0, 5, 1e-6).is_err());
    }

    #[test]
    fn single_species_residual_is_discretization_limited() {
        let params = ModelParams { k: 1, ..Default::default() };
        let mut res = Vec::new();
        for h in [0.25, 0.125] {
            let g = Grid::new(2, 10.0, h).unwrap();
            let bg = Background::new(&params, &g).unwrap();
            let (ru, rv) = pde_residual(&bg.u0, &Field::zeros(&g), &bg);
            assert_eq!(rv, 0.0);
            res.push(ru);
        }
        let ratio = res[0] / res[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{res:?}");
    }
}
