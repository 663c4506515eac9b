//! Invariant suites, and audits of finished runs from their CSV logs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{slope, BumpParams, ControllerConfig};
use crate::error::{Error, Result};
use crate::field::{Modulated, Scaled, SumField};
use crate::kernels::{nonlocal_field, ConstantKernel, HkKernel};
use crate::lyapunov::{hk_dissipation_closed_form, lie_derivative, lie_derivative_fd_oracle, MomentFunctional};
use crate::measure::{GridMeasure, Measure, ParticleMeasure};
use crate::scenarios::{
    run_hk_controlled, run_hk_uncontrolled, Backend, ConcentrationRow, InitialMeasure, KernelSpec, ScenarioSpec,
    CONCENTRATION_HEADER,
};
use crate::solver::{check_linf_bound, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Constraints,
    Conservation,
    Oracle,
    Dissipativity,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Constraints, Suite::Conservation, Suite::Oracle, Suite::Dissipativity];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Constraints => "constraints",
            Suite::Conservation => "conservation",
            Suite::Oracle => "oracle",
            Suite::Dissipativity => "dissipativity",
        }
    }

    /// Suites selected by a name; `all` selects every suite.
    pub fn select(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            Ok(Self::ALL.to_vec())
        } else {
            Ok(vec![name.parse()?])
        }
    }

    /// Whether the suite can audit a finished run instead of running its own cases.
    pub fn audits_runs(&self) -> bool {
        matches!(self, Suite::Constraints | Suite::Conservation)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown suite `{s}` (expected constraints, conservation, oracle, dissipativity or all)")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Sidecar written next to a run's logs; enough to reproduce the run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub version: String,
    pub seed: u64,
    pub scenario: ScenarioSpec,
}

impl RunMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One parsed row of a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AuditRow {
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub slope: f64,
    #[serde(deserialize_with = "coords")]
    pub control_a: Vec<f64>,
    #[serde(deserialize_with = "coords")]
    pub control_b: Vec<f64>,
    pub control_eta: Option<f64>,
    pub control_sign: i8,
    pub mass: f64,
    pub min_mass: f64,
    pub sup_norm: Option<f64>,
    pub supp_lo: Option<f64>,
    pub supp_hi: Option<f64>,
    pub field: Option<usize>,
    pub switched: u8,
    pub trigger: String,
    pub runner_up: Option<f64>,
    pub previous_slope: Option<f64>,
}

fn coords<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let s = String::deserialize(d)?;
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| x.parse().map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ConcentrationAuditRow {
    pub t: f64,
    pub epsilon: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub population_mass: f64,
    pub window_mass: f64,
    pub sup_norm: f64,
    pub left_density_dev: f64,
}

impl From<&ConcentrationRow> for ConcentrationAuditRow {
    fn from(r: &ConcentrationRow) -> Self {
        Self {
            t: r.t,
            epsilon: r.epsilon,
            v: r.v,
            population_mass: r.population_mass,
            window_mass: r.window_mass,
            sup_norm: r.sup_norm,
            left_density_dev: r.left_density_dev,
        }
    }
}

fn parse_rows<R: for<'de> Deserialize<'de>>(text: &str, header: &str) -> Result<Vec<R>> {
    let first = text.lines().next().unwrap_or_default();
    if first != header {
        return Err(Error::param(format!("unexpected CSV header `{first}`")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| Error::param(format!("malformed CSV: {e}")))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<AuditRow>> {
    parse_rows(text, CSV_HEADER)
}

pub fn parse_concentration_csv(text: &str) -> Result<Vec<ConcentrationAuditRow>> {
    parse_rows(text, CONCENTRATION_HEADER)
}

/// Run constants the audits compare against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditLimits {
    pub controller: Option<ControllerConfig>,
    pub fields: usize,
    pub radius: f64,
    pub dx: f64,
    pub dt: f64,
}

impl AuditLimits {
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        Self {
            controller: spec.controller,
            fields: spec.control_kernels.len(),
            radius: spec.radius,
            dx: (spec.domain[1] - spec.domain[0]) / spec.cells as f64,
            dt: spec.solver.dt,
        }
    }
}

fn worst<I: IntoIterator<Item = (f64, f64)>>(it: I) -> Option<(f64, f64)> {
    it.into_iter().max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Control constraints: `|omega| <= c`, `|u| <= 1`, `1 / eta <= kappa (1 + t)`, one field at a
/// time, hysteresis margins at candidate-triggered switches, increasing switch times.
pub fn audit_constraints(rows: &[AuditRow], limits: &AuditLimits) -> Vec<Check> {
    let Some(cfg) = limits.controller else {
        let idle = rows.iter().all(|r| r.control_sign == 0 && r.field.is_none());
        return vec![Check::new("zero_control", idle, "uncontrolled run emits no control")];
    };
    let active: Vec<&AuditRow> = rows.iter().filter(|r| r.control_sign != 0).collect();
    let mut checks = Vec::new();

    let volume = |r: &AuditRow| {
        let eta = r.control_eta.unwrap_or(f64::NAN);
        r.control_a
            .iter()
            .zip(&r.control_b)
            .fold(1.0, |acc, (l, u)| acc * ((u - l) + eta + eta))
    };
    let bad = active.iter().filter(|r| !(volume(r) <= cfg.c)).count();
    let max_vol = active.iter().map(|r| volume(r)).fold(0.0, f64::max);
    checks.push(Check::new(
        "omega_volume",
        bad == 0,
        format!("max |omega| = {max_vol} against c = {}, {bad} violations", cfg.c),
    ));

    let bad = rows
        .iter()
        .filter(|r| r.control_sign.abs() > 1 || (r.control_sign != 0 && r.control_eta.is_none()))
        .count();
    checks.push(Check::new("strength", bad == 0, format!("|sign| <= 1 on every row, {bad} violations")));

    let ratio = |r: &AuditRow| {
        let lip = 1.0 / r.control_eta.unwrap_or(f64::NAN);
        (r.t, lip / (cfg.kappa * (1.0 + r.t)))
    };
    let bad = active.iter().filter(|r| !(ratio(r).1 <= 1.0 + 1e-12)).count();
    let w = worst(active.iter().map(|r| ratio(r)));
    checks.push(Check::new(
        "lipschitz",
        bad == 0,
        match w {
            Some((t, q)) => format!("max Lip(u) / (kappa (1 + t)) = {q:.6} at t = {t}, {bad} violations"),
            None => "no active rows".into(),
        },
    ));

    let bad = active
        .iter()
        .filter(|r| r.field.is_none_or(|i| i >= limits.fields))
        .count();
    checks.push(Check::new(
        "single_field",
        bad == 0,
        format!("one field index below {} per active row, {bad} violations", limits.fields),
    ));

    let hyst: Vec<&AuditRow> = rows
        .iter()
        .filter(|r| r.switched == 1 && r.trigger == "hysteresis")
        .collect();
    let bad = hyst
        .iter()
        .filter(|r| match (r.previous_slope, r.runner_up) {
            (Some(old), Some(new)) => old > (1.0 - cfg.h) * new + 1e-12 * new.abs(),
            _ => true,
        })
        .count();
    checks.push(Check::new(
        "hysteresis",
        bad == 0,
        format!("{} candidate-triggered switches, {bad} without the (1 - h) margin", hyst.len()),
    ));

    let times: Vec<f64> = rows.iter().filter(|r| r.switched == 1).map(|r| r.t).collect();
    let separated = times.windows(2).all(|w| w[1] > w[0]);
    checks.push(Check::new(
        "switch_separation",
        separated,
        format!("{} switches at strictly increasing times", times.len()),
    ));
    checks
}

/// Mass to 1e-12, densities >= -1e-14, support inside `B(0, R)`, and `V` increments within
/// `10 dx dt` per step.
pub fn audit_conservation(rows: &[AuditRow], limits: &AuditLimits) -> Vec<Check> {
    let mut checks = Vec::new();
    let w = worst(rows.iter().map(|r| (r.t, (r.mass - 1.0).abs())));
    let bad = rows.iter().filter(|r| !((r.mass - 1.0).abs() <= 1e-12)).count();
    checks.push(Check::new(
        "mass",
        bad == 0,
        format!("max |mass - 1| = {:.3e}, {bad} violations", w.map_or(0.0, |x| x.1)),
    ));

    let min = rows.iter().map(|r| r.min_mass).fold(f64::INFINITY, f64::min);
    let bad = rows.iter().filter(|r| !(r.min_mass >= -1e-14)).count();
    checks.push(Check::new("positivity", bad == 0, format!("min cell mass {min:.3e}, {bad} violations")));

    let r = limits.radius;
    let bad = rows
        .iter()
        .filter(|row| match (row.supp_lo, row.supp_hi) {
            (Some(lo), Some(hi)) => lo < -r || hi > r,
            _ => true,
        })
        .count();
    checks.push(Check::new("support", bad == 0, format!("support inside [-{r}, {r}], {bad} violations")));

    let allowance = 10.0 * limits.dx * limits.dt;
    let rises: Vec<f64> = rows.windows(2).map(|w| w[1].v - w[0].v).collect();
    let max_rise = rises.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bad = rises.iter().filter(|d| !(**d <= allowance)).count();
    checks.push(Check::new(
        "lyapunov_monotone",
        bad == 0,
        format!("max V increase {max_rise:.3e} against 10 dx dt = {allowance:.3e}, {bad} violations"),
    ));
    checks
}

/// Population constraint `int_omega dmu <= c + 1e-3` and flat density left of the window.
pub fn audit_concentration(rows: &[ConcentrationAuditRow], c: f64) -> Vec<Check> {
    let max_pop = rows.iter().map(|r| r.population_mass).fold(0.0, f64::max);
    let max_dev = rows.iter().map(|r| r.left_density_dev).fold(0.0, f64::max);
    vec![
        Check::new(
            "population",
            rows.iter().all(|r| r.population_mass <= c + 1e-3),
            format!("max int_omega dmu = {max_pop:.6} against c + 1e-3 = {}", c + 1e-3),
        ),
        Check::new(
            "left_density",
            rows.iter().all(|r| r.left_density_dev <= 0.02),
            format!("max density deviation on [0, 1 - c - 0.02] = {max_dev:.3e}"),
        ),
    ]
}

/// Audits a run directory written by the CLI.
pub fn audit_run_dir(suite: Suite, dir: &Path) -> Result<SuiteReport> {
    if !suite.audits_runs() {
        return Err(Error::Unsupported(format!("suite `{suite}` does not audit run directories")));
    }
    let meta = RunMeta::read(dir)?;
    let path = dir.join("trajectory.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let checks = match (&meta.scenario.concentration, suite) {
        (Some(cs), Suite::Constraints) => audit_concentration(&parse_concentration_csv(&text)?, cs.c)
            .into_iter()
            .filter(|c| c.name == "population")
            .collect(),
        (Some(cs), _) => audit_concentration(&parse_concentration_csv(&text)?, cs.c)
            .into_iter()
            .filter(|c| c.name != "population")
            .collect(),
        (None, _) => {
            let rows = parse_trajectory_csv(&text)?;
            let limits = AuditLimits::from_spec(&meta.scenario);
            match suite {
                Suite::Constraints => audit_constraints(&rows, &limits),
                _ => audit_conservation(&rows, &limits),
            }
        }
    };
    Ok(SuiteReport { suite, checks })
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Step of the finite-difference oracle used by the suites.
pub const ORACLE_TAU: f64 = 1e-5;

/// Two-Dirac HK dissipation: closed form against the finite-difference oracle for `pairs`
/// random `(x, y)` in `[-5, 5]`, plus the exact value at `x = 0.5`, `y = -0.5`.
pub fn two_dirac_checks(pairs: usize, seed: u64) -> Result<Vec<Check>> {
    let kernel = HkKernel::new(0.05)?;
    let v = MomentFunctional::variance0(12.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    for _ in 0..pairs {
        let x: f64 = rng.gen_range(-5.0..5.0);
        let y: f64 = rng.gen_range(-5.0..5.0);
        let p = ParticleMeasure::uniform(1, vec![x, y])?;
        let closed = hk_dissipation_closed_form(&kernel, &p);
        let half_phi = -kernel.phi(x - y) / 2.0 * (x - y) * (x - y);
        let mu: Measure<f64> = p.into();
        let fd = lie_derivative_fd_oracle(&v, &nonlocal_field(&kernel, &mu), &mu, ORACLE_TAU)?;
        max_err = max_err.max(rel_err(closed, fd)).max(rel_err(half_phi, fd));
    }
    let p = ParticleMeasure::uniform(1, vec![0.5, -0.5])?;
    let exact = hk_dissipation_closed_form(&kernel, &p);
    Ok(vec![
        Check::new(
            "two_dirac_fd",
            max_err <= 1e-5,
            format!("{pairs} pairs, max relative error {max_err:.3e}"),
        ),
        Check::new("two_dirac_exact", exact == -0.5, format!("x = 0.5, y = -0.5 gives {exact}")),
    ])
}

/// `2 |int x U(a, b, eta)(x) dmu|` for `mu = chi_[-1, 1] / 2`, integrated in closed form term
/// by term.
pub fn half_interval_slope(a: f64, b: f64, eta: f64) -> f64 {
    let clip = |lo: f64, hi: f64| (lo.max(-1.0), hi.min(1.0));
    let integral = |lo: f64, hi: f64, prim: &dyn Fn(f64) -> f64| {
        let (lo, hi) = clip(lo, hi);
        if hi > lo {
            0.5 * (prim(hi) - prim(lo))
        } else {
            0.0
        }
    };
    let k = a - eta;
    let m = b + eta;
    let left = integral(a - eta, a, &|x| x * x * x / 3.0 - k * x * x / 2.0) / eta;
    let mid = integral(a, b, &|x| x * x / 2.0);
    let right = integral(b, b + eta, &|x| -x * x * x / 3.0 + m * x * x / 2.0) / eta;
    2.0 * (left + mid + right).abs()
}

/// Numerical slope on a 400-cell grid against [`half_interval_slope`] on a 10 x 10 x 5 grid.
pub fn slope_formula_check() -> Result<Check> {
    let mu: Measure<f64> = GridMeasure::uniform_on(-2.0, 2.0, 400, -1.0, 1.0)?.into();
    let v = MomentFunctional::variance0(12.0);
    let unit = ConstantKernel::unit();
    let g = nonlocal_field(&unit, &mu);
    let mut max_err = 0.0f64;
    for i in 0..10 {
        let a = -1.4 + 2.3 * i as f64 / 9.0;
        for j in 0..10 {
            let b = a + 0.05 + 1.55 * j as f64 / 9.0;
            for k in 0..5 {
                let eta = 0.01 + 0.39 * k as f64 / 4.0;
                let params = BumpParams::new_1d(a, b, eta)?;
                let s = slope(&mu, &g, &v, &params);
                max_err = max_err.max((s - half_interval_slope(a, b, eta)).abs());
            }
        }
    }
    Ok(Check::new(
        "slope_formula",
        max_err <= 1e-8,
        format!("500 bumps, max abs error {max_err:.3e}"),
    ))
}

fn random_atoms(rng: &mut ChaCha8Rng) -> Result<ParticleMeasure<f64>> {
    let n = rng.gen_range(2..=50);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = ws.iter().sum();
    ParticleMeasure::weighted_1d(xs, ws.into_iter().map(|w| w / total).collect())
}

fn random_functional(rng: &mut ChaCha8Rng) -> Result<MomentFunctional<f64>> {
    Ok(match rng.gen_range(0..3) {
        0 => MomentFunctional::variance0(12.0),
        1 => MomentFunctional::centered_variance(rng.gen_range(-2.0..2.0), 12.0),
        _ => MomentFunctional::abs_moment(rng.gen_range(1.5..3.0), 12.0)?,
    })
}

/// Lie derivative against the finite-difference oracle on `cases` random particle measures
/// (HK field or bump times `g`), with homogeneity and additivity.
pub fn lie_oracle_checks(cases: usize, seed: u64) -> Result<Vec<Check>> {
    let kernel = HkKernel::new(0.05)?;
    let unit = ConstantKernel::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut oracle, mut homog, mut addit) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..cases {
        let mu: Measure<f64> = random_atoms(&mut rng)?.into();
        let v = random_functional(&mut rng)?;
        let f = nonlocal_field(&kernel, &mu);
        let g = nonlocal_field(&unit, &mu);
        let (lo, hi) = mu.support_bounds(0.0).unwrap_or((-1.0, 1.0));
        let a = rng.gen_range(lo..hi);
        let b = a + rng.gen_range(0.2..2.0);
        let eta = rng.gen_range(0.05..0.5);
        let u = move |x: &[f64]| crate::controller::bump_1d(a, b, eta, x[0]);
        let ug = Modulated::new(u, &g);
        let (exact, fd) = if case % 2 == 0 {
            (lie_derivative(&v, &f, &mu), lie_derivative_fd_oracle(&v, &f, &mu, ORACLE_TAU)?)
        } else {
            (lie_derivative(&v, &ug, &mu), lie_derivative_fd_oracle(&v, &ug, &mu, ORACLE_TAU)?)
        };
        oracle = oracle.max(rel_err(exact, fd));

        let lambda: f64 = rng.gen_range(-3.0..3.0);
        let scaled = lie_derivative(&v, &Scaled::new(lambda, &f), &mu);
        homog = homog.max(rel_err(scaled, lambda * lie_derivative(&v, &f, &mu)));

        let sum = SumField::new(1).with(&f).with(&ug);
        let lhs = lie_derivative(&v, &sum, &mu);
        let rhs = lie_derivative(&v, &f, &mu) + lie_derivative(&v, &ug, &mu);
        addit = addit.max(rel_err(lhs, rhs));
    }
    Ok(vec![
        Check::new("lie_fd_oracle", oracle <= 1e-5, format!("{cases} cases, max relative error {oracle:.3e}")),
        Check::new("homogeneity", homog <= 1e-12, format!("max relative error {homog:.3e}")),
        Check::new("additivity", addit <= 1e-10, format!("max relative error {addit:.3e}")),
    ])
}

/// `L_f V <= 0` for the HK field and centered variances on random particle measures.
pub fn hk_dissipation_sign_check(cases: usize, seed: u64) -> Result<Check> {
    let kernel = HkKernel::new(0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max = f64::NEG_INFINITY;
    for _ in 0..cases {
        let p = random_atoms(&mut rng)?;
        let center = rng.gen_range(-2.0..2.0);
        let mu: Measure<f64> = p.into();
        let v = MomentFunctional::centered_variance(center, 12.0);
        max = max.max(lie_derivative(&v, &nonlocal_field(&kernel, &mu), &mu));
    }
    Ok(Check::new(
        "hk_dissipative",
        max <= 1e-12,
        format!("{cases} measures, max L_f V = {max:.3e}"),
    ))
}

fn shortened(name: &str, t_end: f64) -> Result<ScenarioSpec> {
    let mut spec = ScenarioSpec::builtin(name)?;
    spec.solver.t_end = t_end;
    spec.solver.snapshot_every = 0;
    Ok(spec)
}

/// Two control fields on a particle measure: a constant push and the HK attraction.
pub fn multi_field_spec() -> ScenarioSpec {
    let mut spec = ScenarioSpec::builtin("hk_ctrl_h05").expect("builtin scenario");
    spec.name = "multi_field".into();
    spec.backend = Backend::Particles;
    spec.cells = 200;
    spec.initial = InitialMeasure::UniformRandom { lo: 0.0, hi: 10.0 };
    spec.control_kernels = vec![KernelSpec::ConstantG { value: 1.0 }, KernelSpec::Hk { epsilon: 0.05 }];
    spec.solver.t_end = 5.0;
    spec.solver.snapshot_every = 0;
    spec
}

fn run_audit(spec: &ScenarioSpec, controlled: bool, suite: Suite) -> Result<Vec<Check>> {
    let outcome = if controlled {
        run_hk_controlled(spec)?
    } else {
        run_hk_uncontrolled(spec)?
    };
    let rows = parse_trajectory_csv(&outcome.log.to_csv_string())?;
    let mut limits = AuditLimits::from_spec(spec);
    if !controlled {
        limits.controller = None;
    }
    let mut checks = match suite {
        Suite::Constraints => audit_constraints(&rows, &limits),
        _ => audit_conservation(&rows, &limits),
    };
    if suite == Suite::Conservation && spec.backend == Backend::Grid {
        let linf = check_linf_bound(&outcome.log)?;
        checks.push(Check::new(
            "linf_gronwall",
            linf.gronwall.is_empty(),
            format!(
                "{} steps, worst ratio to the centered bound {:.4}, {} violations",
                linf.steps_checked,
                linf.worst_ratio,
                linf.gronwall.len()
            ),
        ));
        checks.push(Check::new(
            "linf_lemma",
            linf.lemma.is_empty(),
            format!("{} violations", linf.lemma.len()),
        ));
    }
    for c in &mut checks {
        c.name = format!("{}:{}", spec.name, c.name);
    }
    Ok(checks)
}

/// Runs a suite on its built-in cases.
pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Constraints => {
            let mut checks = run_audit(&shortened("hk_ctrl_h05", 10.0)?, true, suite)?;
            checks.extend(run_audit(&multi_field_spec(), true, suite)?);
            checks
        }
        Suite::Conservation => {
            let mut checks = run_audit(&shortened("hk_free", 10.0)?, false, suite)?;
            checks.extend(run_audit(&shortened("hk_ctrl_h05", 10.0)?, true, suite)?);
            checks
        }
        Suite::Oracle => lie_oracle_checks(100, 7)?,
        Suite::Dissipativity => {
            let mut checks = two_dirac_checks(100, 11)?;
            checks.push(slope_formula_check()?);
            checks.push(hk_dissipation_sign_check(100, 13)?);
            checks
        }
    };
    Ok(SuiteReport { suite, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(Suite::select("all").unwrap().len(), 4);
        assert!(Suite::select("nope").is_err());
    }

    #[test]
    fn half_interval_slope_whole_support() {
        // U = 1 on [0, 1] only: 2 * int_0^1 x / 2 dx = 1 / 2.
        assert!((half_interval_slope(0.0, 1.0, 1e-9) - 0.5).abs() < 1e-8);
        assert_eq!(half_interval_slope(2.0, 3.0, 0.1), 0.0);
    }

    #[test]
    fn coords_parse() {
        let text = format!("{CSV_HEADER}\n0,1,0,1;2,3;4,0.5,1,1,0,,0,10,0,0,initial,,\n");
        let rows = parse_trajectory_csv(&text).unwrap();
        assert_eq!(rows[0].control_a, vec![1.0, 2.0]);
        assert_eq!(rows[0].field, Some(0));
        assert_eq!(rows[0].runner_up, None);
    }
}
