//! Subcommand pipelines. Each returns the list of asserted invariants and
//! writes its artifacts into the output directory.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ringbump::corrector::{default_half_width, default_spacing, Background, SolverSettings};
use ringbump::energy::{
    check_ksum_bound, crossprod_fit, expansion_compare, potential_moment, BoundReport, ExpansionReport,
};
use ringbump::geometry::bump_centers;
use ringbump::grid::{Field, Grid};
use ringbump::model::{CouplingBound, ModelParams};
use ringbump::radial::{ode_residual, solve_ground_state, solve_ground_state_with_step, RadialProfile, DEFAULT_STEP};
use ringbump::reduction::{assemble_solution, critical_point_check, maximize_over_sk, reduced_energy, Reduction};
use ringbump::Error;

use crate::config::RunConfig;
use crate::output::{write_field, write_json, Table};
use crate::sampling::sector_samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Bounds,
    Expansion,
    Corrector,
    Reduce,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Bounds => "bounds",
            Command::Expansion => "expansion",
            Command::Corrector => "corrector",
            Command::Reduce => "reduce",
            Command::Solve => "solve",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Compare the one-dimensional profile with `√2 sech r`.
    pub sech_check: bool,
    /// Dump corrector and solution fields.
    pub dump: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Check {
        Check { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn add(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    subcommand: &'a str,
    violated: Vec<&'a str>,
    error: Option<String>,
    checks: &'a [Check],
}

/// Runs `cmd`, writing artifacts and, on failure, `failure.json`.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path, opts: &Options) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stale = out.join("failure.json");
    if stale.exists() {
        std::fs::remove_file(&stale)?;
    }
    let result = match cmd {
        Command::GroundState => ground_state(cfg, out, opts),
        Command::Bounds => bounds(cfg, out),
        Command::Expansion => expansion(cfg, out),
        Command::Corrector => corrector(cfg, out, opts),
        Command::Reduce => reduce(cfg, out).map(|(o, _)| o),
        Command::Solve => solve(cfg, out, opts),
    };
    match &result {
        Ok(outcome) if !outcome.passed() => {
            let violated = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            write_json(
                &out.join("failure.json"),
                &FailureRecord { subcommand: cmd.name(), violated, error: None, checks: &outcome.checks },
            )?;
        }
        Ok(_) => {}
        Err(e) => {
            let detail = failure_detail(e);
            write_json(
                &out.join("failure.json"),
                &FailureRecord { subcommand: cmd.name(), violated: vec![detail.0], error: Some(detail.1), checks: &[] },
            )?;
        }
    }
    result
}

/// Failure record for errors raised before a pipeline starts, such as an
/// invalid configuration.
pub fn write_failure(out: &Path, cmd: Command, violated: &str, error: &str) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(
        &out.join("failure.json"),
        &FailureRecord {
            subcommand: cmd.name(),
            violated: vec![violated],
            error: Some(error.to_string()),
            checks: &[],
        },
    )
}

fn failure_detail(e: &anyhow::Error) -> (&'static str, String) {
    match e.downcast_ref::<Error>() {
        Some(Error::Diverged(r)) => ("corrector converges", format!("{e}; steps {:?}; norms {:?}", r.steps, r.norms)),
        Some(Error::LinearSolve { .. }) => ("linear solve converges", e.to_string()),
        Some(Error::Assumption(_)) => ("potential assumption", e.to_string()),
        _ => ("pipeline completes", format!("{e:#}")),
    }
}

/// Grid for radii up to `r_hi`, honouring the `L` and `h` overrides.
pub fn background(cfg: &RunConfig, params: &ModelParams, r_hi: f64) -> Result<Background> {
    let h = cfg.spacing.unwrap_or_else(|| default_spacing(params.dim));
    let l = cfg.half_width.unwrap_or_else(|| default_half_width(r_hi, params.lambda));
    let grid = Grid::covering(params.dim, l, h)?;
    Ok(Background::new(params, &grid)?)
}

/// Sets `β` on the background: the configured value, or `f0/2` with `f0`
/// measured at the middle of `S_k`.
pub fn resolve_beta(cfg: &RunConfig, bg: &mut Background) -> Result<(f64, CouplingBound)> {
    let mid = bg.params.radius_interval()?.mid();
    let bound = bg.ansatz(mid).coupling_bound()?;
    let beta = cfg.beta.unwrap_or(bound.f0 / 2.0);
    bg.set_beta(beta);
    Ok((beta, bound))
}

pub fn settings(cfg: &RunConfig) -> SolverSettings {
    SolverSettings { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() }
}

#[derive(Serialize)]
struct ProfileSummary {
    mass_coeff: f64,
    alpha: f64,
    dim: usize,
    step: f64,
    peak: f64,
    decay_constant: f64,
    moment2: f64,
    moment4: f64,
    residual: f64,
}

impl From<&RadialProfile> for ProfileSummary {
    fn from(p: &RadialProfile) -> Self {
        ProfileSummary {
            mass_coeff: p.mass_coeff,
            alpha: p.alpha,
            dim: p.dim,
            step: p.step,
            peak: p.peak,
            decay_constant: p.decay_constant,
            moment2: p.moment2,
            moment4: p.moment4,
            residual: p.residual,
        }
    }
}

#[derive(Serialize)]
struct GroundStateSummary {
    u0: ProfileSummary,
    v0: ProfileSummary,
    residual_over_peak: f64,
    moment2_half_step: f64,
    moment2_relative_change: f64,
    sech_max_error: Option<f64>,
    sech_seconds: Option<f64>,
}

/// Sech comparison table and its max error.
pub fn sech_comparison() -> Result<(Table, f64, f64)> {
    let t = Instant::now();
    let p = solve_ground_state(1.0, 1.0, 1)?;
    let seconds = t.elapsed().as_secs_f64();
    let mut table = Table::new(&["r", "numeric", "exact", "error"]);
    let mut max_err: f64 = 0.0;
    for (&r, &w) in p.r_grid.iter().zip(&p.values) {
        let exact = 2f64.sqrt() / r.cosh();
        let err = (w - exact).abs();
        max_err = max_err.max(err);
        table.push(vec![r, w, exact, err]);
    }
    Ok((table, max_err, seconds))
}

fn ground_state(cfg: &RunConfig, out: &Path, opts: &Options) -> Result<Outcome> {
    let p = &cfg.params;
    let u0 = solve_ground_state(p.lambda, p.alpha0, p.dim)?;
    let v0 = solve_ground_state(1.0, p.alpha1, p.dim)?;
    for (name, prof) in [("u0_profile.csv", &u0), ("v0_profile.csv", &v0)] {
        let mut buf = Vec::new();
        prof.write_csv(&mut buf)?;
        crate::output::write_atomic(&out.join(name), &buf)?;
    }
    let half = solve_ground_state_with_step(1.0, p.alpha1, p.dim, DEFAULT_STEP / 2.0)?;
    let residual_over_peak = ode_residual(&v0) / v0.peak;
    let rel = (half.moment2 - v0.moment2).abs() / v0.moment2;
    let mut o = Outcome::default();
    o.add("ode residual < 1e-8 peak", residual_over_peak < 1e-8, format!("{residual_over_peak:e}"));
    o.add("moment2 step-halving < 1e-3", rel < 1e-3, format!("{rel:e}"));
    let (mut sech_max_error, mut sech_seconds) = (None, None);
    if opts.sech_check {
        let (table, err, secs) = sech_comparison()?;
        table.write(&out.join("sech.csv"))?;
        o.add("sech max error < 1e-6", err < 1e-6, format!("{err:e}"));
        sech_max_error = Some(err);
        sech_seconds = Some(secs);
    }
    write_json(
        &out.join("ground_state.json"),
        &GroundStateSummary {
            u0: (&u0).into(),
            v0: (&v0).into(),
            residual_over_peak,
            moment2_half_step: half.moment2,
            moment2_relative_change: rel,
            sech_max_error,
            sech_seconds,
        },
    )?;
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialMomentRow {
    pub radius: f64,
    pub integral: f64,
    pub leading: f64,
    pub relative_deviation: f64,
}

/// `∫(μ−1)V1²` against `(a/R^m)∫V0²` at the given radii.
pub fn potential_moment_study(cfg: &RunConfig, radii: &[f64]) -> Result<Vec<PotentialMomentRow>> {
    let p = &cfg.params;
    let profile = solve_ground_state(1.0, p.alpha1, p.dim)?;
    let r_top = radii.iter().cloned().fold(0.0, f64::max);
    let h = cfg.spacing.unwrap_or_else(|| default_spacing(p.dim));
    let grid = Grid::covering(p.dim, default_half_width(r_top, 1.0), h)?;
    let mu = Field::sample(&grid, |y| p.mu(y.iter().map(|x| x * x).sum::<f64>().sqrt()));
    Ok(radii
        .iter()
        .map(|&r| {
            let config = bump_centers(1, r, p.dim);
            let (integral, leading) = potential_moment(&profile, &config, &mu, p);
            PotentialMomentRow {
                radius: r,
                integral,
                leading,
                relative_deviation: (integral - leading).abs() / leading,
            }
        })
        .collect())
}

/// Tail-bound reports for every `(k, η)` at the middle of `S_k`.
pub fn ksum_reports(cfg: &RunConfig) -> Result<Vec<BoundReport>> {
    let p = &cfg.params;
    let profile = solve_ground_state(1.0, p.alpha1, p.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::new();
    for &k in &cfg.ks {
        let params = ModelParams { k, ..p.clone() };
        let s = params.radius_interval()?;
        let config = bump_centers(k, s.mid(), p.dim);
        for &eta in &cfg.etas {
            let samples = sector_samples(&config, cfg.samples, &mut rng);
            reports.push(check_ksum_bound(&profile, &config, eta, &samples));
        }
    }
    Ok(reports)
}

#[derive(Serialize)]
struct BoundsSummary {
    seed: u64,
    ksum: Vec<BoundReport>,
    crossprod_gamma: f64,
    potential_moment: Vec<PotentialMomentRow>,
}

fn bounds(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let p = &cfg.params;
    let ksum = ksum_reports(cfg)?;
    let mut o = Outcome::default();
    let violations: usize = ksum.iter().map(|r| r.violations).sum();
    let worst = ksum.iter().map(|r| r.max_ratio_tail.max(r.max_ratio_total)).fold(0.0, f64::max);
    o.add("ksum bound holds at every sample", violations == 0, format!("{violations} violations, max ratio {worst}"));

    let radii = [6.0, 8.0, 10.0, 12.0, 14.0, 16.0];
    let h = cfg.spacing.unwrap_or_else(|| default_spacing(p.dim));
    let grid = Grid::covering(p.dim, default_half_width(16.0, p.lambda), h)?;
    let bg = Background::new(&ModelParams { k: 1, ..p.clone() }, &grid)?;
    let fit = crossprod_fit(&bg.u0, &bg.v0_profile, p.k, &radii);
    let mut table = Table::new(&["R", "cross"]);
    for (r, v) in fit.radii.iter().zip(&fit.values) {
        table.push(vec![*r, *v]);
    }
    table.write(&out.join("crossprod.csv"))?;
    o.add("cross term decays exponentially", fit.gamma > 0.0, format!("gamma = {}", fit.gamma));

    let pm = potential_moment_study(cfg, &[10.0, 20.0, 40.0])?;
    let mut table = Table::new(&["R", "integral", "leading", "relative_deviation"]);
    for r in &pm {
        table.push(vec![r.radius, r.integral, r.leading, r.relative_deviation]);
    }
    table.write(&out.join("potential_moment.csv"))?;
    let factor = pm[0].relative_deviation / pm[1].relative_deviation;
    o.add("potential deviation shrinks >= 1.8x from R=10 to 20", factor >= 1.8, format!("factor {factor}"));
    o.add("potential deviation < 5% at R=40", pm[2].relative_deviation < 0.05, format!("{}", pm[2].relative_deviation));

    let mut table = Table::new(&[
        "k",
        "R",
        "eta",
        "max_ratio_tail",
        "max_ratio_total",
        "violations",
        "sum2",
        "sum2_bound",
        "sum3",
        "sum3_bound",
    ]);
    for r in &ksum {
        table.push(vec![
            r.k as f64,
            r.radius,
            r.eta,
            r.max_ratio_tail,
            r.max_ratio_total,
            r.violations as f64,
            r.sum2,
            r.sum2_bound,
            r.sum3,
            r.sum3_bound,
        ]);
    }
    table.write(&out.join("ksum.csv"))?;
    write_json(
        &out.join("bounds.json"),
        &BoundsSummary { seed: cfg.seed, ksum, crossprod_gamma: fit.gamma, potential_moment: pm },
    )?;
    Ok(o)
}

/// Expansion reports at the middle of `S_k` for every `k` in the list.
pub fn expansion_reports(cfg: &RunConfig) -> Result<Vec<ExpansionReport>> {
    let mut reports = Vec::new();
    for &k in &cfg.ks {
        let params = ModelParams { k, ..cfg.params.clone() };
        let s = params.radius_interval()?;
        let mut bg = background(cfg, &params, s.hi)?;
        resolve_beta(cfg, &mut bg)?;
        let t = Instant::now();
        let rep = expansion_compare(&bg.ansatz(s.mid()));
        info!("expansion k={k} R={} rho={} ({:?})", rep.radius, rep.rho, t.elapsed());
        reports.push(rep);
    }
    Ok(reports)
}

/// `(max − min)/min` of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

fn expansion(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let reports = expansion_reports(cfg)?;
    let mut table = Table::new(&[
        "k",
        "R",
        "direct",
        "model",
        "rho",
        "A0",
        "A1",
        "A2",
        "interaction_sum",
        "J_surrogate",
        "J_chord",
    ]);
    for r in &reports {
        table.push(vec![
            r.k as f64,
            r.radius,
            r.direct,
            r.model,
            r.rho,
            r.a0,
            r.a1,
            r.a2,
            r.interaction_sum,
            r.j_surrogate,
            r.j_chord,
        ]);
    }
    table.write(&out.join("expansion.csv"))?;
    write_json(&out.join("expansion.json"), &reports)?;
    let mut sorted = reports.clone();
    sorted.sort_by_key(|r| r.k);
    let decreasing = sorted.windows(2).all(|w| w[1].rho < w[0].rho);
    let rhos: Vec<f64> = sorted.iter().map(|r| r.rho).collect();
    let mut o = Outcome::default();
    o.add("rho strictly decreasing in k", decreasing, format!("{rhos:?}"));
    let js: Vec<f64> = sorted.iter().map(|r| r.j_chord).collect();
    let sp = spread(&js);
    o.add("J (chord) spread < 25%", sp < 0.25, format!("{js:?}, spread {sp}"));
    Ok(o)
}

#[derive(Serialize)]
struct CorrectorSummary<'a> {
    k: usize,
    radius: f64,
    beta: f64,
    f0: f64,
    gamma0: f64,
    p: f64,
    norm_e_times_kp: f64,
    result: &'a ringbump::CorrectorResult,
}

fn corrector(cfg: &RunConfig, out: &Path, opts: &Options) -> Result<Outcome> {
    let p = &cfg.params;
    let s = p.radius_interval()?;
    let r = cfg.radius.unwrap_or(s.mid());
    let mut bg = background(cfg, p, r.max(s.hi))?;
    let (beta, bound) = resolve_beta(cfg, &mut bg)?;
    let res = bg.ansatz(r).fixed_point(&settings(cfg))?;
    let expo = p.exponents()?;
    if opts.dump {
        write_field(&out.join("u.dump"), &res.u)?;
        write_field(&out.join("v.dump"), &res.v)?;
    }
    write_json(
        &out.join("corrector.json"),
        &CorrectorSummary {
            k: p.k,
            radius: r,
            beta,
            f0: bound.f0,
            gamma0: bound.gamma0,
            p: expo.p,
            norm_e_times_kp: res.norm_e * (p.k as f64).powf(expo.p),
            result: &res,
        },
    )?;
    let mut o = Outcome::default();
    o.add("corrector converged", res.converged, format!("{} iterations, steps {:?}", res.iterations, res.steps));
    o.add("contraction factor < 1", res.contraction_factor < 1.0, format!("{}", res.contraction_factor));
    let weak = res.residual_within(10.0 * cfg.tol);
    o.add("corrector equations hold", weak, format!("residuals {:e}, {:e}", res.residual_u, res.residual_v));
    Ok(o)
}

#[derive(Serialize)]
struct ReduceSummary {
    k: usize,
    beta: f64,
    f0: f64,
    lo: f64,
    hi: f64,
    r0: f64,
    value_at_r0: f64,
    interior: bool,
    derivative_at_r0: f64,
    max_slope: f64,
    max_decomposition_defect: f64,
}

fn reduce(cfg: &RunConfig, out: &Path) -> Result<(Outcome, Option<(Reduction, Background)>)> {
    let p = &cfg.params;
    let s = p.radius_interval()?;
    let mut bg = background(cfg, p, s.hi)?;
    let (beta, bound) = resolve_beta(cfg, &mut bg)?;
    let st = settings(cfg);
    let red = maximize_over_sk(&bg, cfg.n_coarse, cfg.tol_r, &st)?;
    let mut table =
        Table::new(&["R", "F", "main", "l", "l_verbatim", "q", "h", "lagrange", "iterations", "norm_e", "defect"]);
    for smp in &red.samples {
        let b = &smp.breakdown;
        table.push(vec![
            smp.radius,
            smp.value,
            b.main,
            b.l_val,
            b.l_verbatim,
            b.q_val,
            b.h_val,
            smp.corrector.lagrange,
            smp.corrector.iterations as f64,
            smp.corrector.norm_e,
            b.decomposition_defect(),
        ]);
    }
    table.write(&out.join("scan.csv"))?;
    let f = |r: f64| reduced_energy(&bg, r, &st).map(|x| x.value);
    let cp = critical_point_check(f, red.maximum.r0, &red.maximum.coarse, cfg.tol_r)?;
    let defect = red.samples.iter().map(|s| s.breakdown.decomposition_defect()).fold(0.0, f64::max);
    write_json(
        &out.join("reduce.json"),
        &ReduceSummary {
            k: p.k,
            beta,
            f0: bound.f0,
            lo: red.lo,
            hi: red.hi,
            r0: red.maximum.r0,
            value_at_r0: red.maximum.value,
            interior: red.maximum.interior,
            derivative_at_r0: cp.derivative,
            max_slope: cp.max_slope,
            max_decomposition_defect: defect,
        },
    )?;
    let mut o = Outcome::default();
    o.add("decomposition exact to 1e-10", defect < 1e-10, format!("{defect:e}"));
    o.add("interior maximum", red.maximum.interior, format!("R0 = {} in [{}, {}]", red.maximum.r0, red.lo, red.hi));
    o.add("critical point", cp.pass, format!("F'(R0) = {:e}, max |F'| = {:e}", cp.derivative, cp.max_slope));
    Ok((o, Some((red, bg))))
}

#[derive(Serialize)]
struct SolveSummary {
    r0: f64,
    interior: bool,
    residual_u: f64,
    residual_v: f64,
    lagrange_at_r0: f64,
    lagrange_lo: f64,
    lagrange_hi: f64,
    energy: f64,
    refined_residual_u: Option<f64>,
    refined_residual_v: Option<f64>,
}

fn solve(cfg: &RunConfig, out: &Path, opts: &Options) -> Result<Outcome> {
    let (mut o, ctx) = reduce(cfg, out)?;
    let (red, bg) = ctx.expect("reduce returns its context");
    let st = settings(cfg);
    let sol = assemble_solution(&bg, red.maximum.r0, &st)?;
    if opts.dump {
        write_field(&out.join("U.dump"), &sol.u)?;
        write_field(&out.join("V.dump"), &sol.v)?;
    }
    let lam_lo = red.samples.first().map(|s| s.corrector.lagrange).unwrap_or(f64::NAN);
    let lam_hi = red.samples.last().map(|s| s.corrector.lagrange).unwrap_or(f64::NAN);
    let lam_ok = sol.lagrange_at_r0.abs() < lam_lo.abs().min(lam_hi.abs());
    o.add(
        "multiplier smallest at R0",
        lam_ok,
        format!("|Λ(R0)| = {:e}, endpoints {:e}, {:e}", sol.lagrange_at_r0.abs(), lam_lo.abs(), lam_hi.abs()),
    );
    let (mut ru2, mut rv2) = (None, None);
    if cfg.refine {
        let h = bg.grid.spacing() / 2.0;
        let grid = Grid::new(bg.grid.dim(), bg.grid.half_width(), h)?;
        let mut fine = Background::new(&bg.params, &grid)?;
        fine.set_beta(bg.params.beta);
        let sol2 = assemble_solution(&fine, red.maximum.r0, &st)?;
        let (fu, fv) = (sol.residual_u / sol2.residual_u, sol.residual_v / sol2.residual_v);
        o.add("residuals shrink >= 3.5x under h/2", fu >= 3.5 && fv >= 3.5, format!("factors {fu}, {fv}"));
        ru2 = Some(sol2.residual_u);
        rv2 = Some(sol2.residual_v);
    }
    write_json(
        &out.join("solve.json"),
        &SolveSummary {
            r0: sol.r0,
            interior: red.maximum.interior,
            residual_u: sol.residual_u,
            residual_v: sol.residual_v,
            lagrange_at_r0: sol.lagrange_at_r0,
            lagrange_lo: lam_lo,
            lagrange_hi: lam_hi,
            energy: sol.energy,
            refined_residual_u: ru2,
            refined_residual_v: rv2,
        },
    )?;
    Ok(o)
}
