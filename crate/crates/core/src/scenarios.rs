//! Canned experiments: free and controlled kinetic Hegselmann-Krause runs, and the
//! mass-concentration demo under a population constraint.

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerConfig};
use crate::error::{Error, Result};
use crate::field::{field_1d, VectorField};
use crate::kernels::{ConstantKernel, HkKernel, InteractionKernel, TableKernel};
use crate::lyapunov::MomentFunctional;
use crate::measure::{GridMeasure, Measure, ParticleMeasure, SupportBall};
use crate::solver::{evolve, step_particles, Dynamics, SolverConfig, TrajectoryLog};

pub const BUILTIN: [&str; 5] = ["hk_free", "hk_ctrl_h02", "hk_ctrl_h05", "hk_ctrl_h09", "concentration"];

fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "hk_free" => include_str!("../scenarios/hk_free.json"),
        "hk_ctrl_h02" => include_str!("../scenarios/hk_ctrl_h02.json"),
        "hk_ctrl_h05" => include_str!("../scenarios/hk_ctrl_h05.json"),
        "hk_ctrl_h09" => include_str!("../scenarios/hk_ctrl_h09.json"),
        "concentration" => include_str!("../scenarios/concentration.json"),
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Grid,
    Particles,
}

/// Law of `mu_0`. Grid backends bin it on the cells; particle backends put one atom per
/// cell midpoint with the cell's mass as weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMeasure {
    /// Cell weights iid uniform on `(0, 1)` for cells inside `[lo, hi]`, then normalized.
    UniformRandom { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Equal-mass uniform bumps of the given width.
    Bumps { centers: Vec<f64>, width: f64 },
    /// Explicit atoms (particle backend only).
    Atoms { positions: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Hk { epsilon: f64 },
    ConstantG {
        #[serde(default = "unit")]
        value: f64,
    },
    CustomTable { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn build(&self) -> Result<Box<dyn InteractionKernel<f64>>> {
        Ok(match self {
            KernelSpec::Hk { epsilon } => Box::new(HkKernel::new(*epsilon)?),
            KernelSpec::ConstantG { value } => Box::new(ConstantKernel::new(vec![*value])),
            KernelSpec::CustomTable { path } => Box::new(TableKernel::from_csv(path)?),
        })
    }

    /// Gap used by the cluster detector: the confidence radius for HK, else the support radius.
    fn confidence_radius(&self) -> Option<f64> {
        match self {
            KernelSpec::Hk { epsilon } => Some(1.0 + epsilon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `int (x - xbar_0)^2 dmu` with `xbar_0` the barycenter of `mu_0`.
    RecentredVariance,
    /// `int x^2 dmu`.
    Variance0,
    AbsMoment { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    pub c: f64,
    pub particles: usize,
    /// Length of each constant-`epsilon` interval of the schedule.
    pub interval: f64,
    /// `epsilon_i = eps_factor (c - t_i)`.
    pub eps_factor: f64,
    /// Stop at `stop_fraction * c`.
    pub stop_fraction: f64,
    /// Integration sub-steps per schedule interval.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub backend: Backend,
    pub domain: [f64; 2],
    pub cells: usize,
    pub initial: InitialMeasure,
    pub kernel: KernelSpec,
    #[serde(default = "default_control_kernels")]
    pub control_kernels: Vec<KernelSpec>,
    pub functional: FunctionalSpec,
    pub radius: f64,
    /// Cutoff taper; `radius / 10` when absent.
    #[serde(default)]
    pub taper: Option<f64>,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub concentration: Option<ConcentrationSpec>,
}

fn default_control_kernels() -> Vec<KernelSpec> {
    vec![KernelSpec::ConstantG { value: 1.0 }]
}

impl ScenarioSpec {
    pub fn builtin(name: &str) -> Result<Self> {
        let src = builtin_source(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
        Ok(serde_json::from_str(src)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn taper(&self) -> f64 {
        self.taper.unwrap_or(self.radius / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let [lo, hi] = self.domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(format!("domain [{lo}, {hi}] is empty")));
        }
        if self.cells == 0 {
            return Err(Error::param("cells must be positive"));
        }
        SupportBall::new(self.radius)?;
        if !(self.taper() > 0.0 && self.taper() < self.radius) {
            return Err(Error::param("taper must lie in (0, radius)"));
        }
        if lo < -self.radius || hi > self.radius {
            return Err(Error::param(format!(
                "domain [{lo}, {hi}] must lie inside B(0, {})",
                self.radius
            )));
        }
        if let Some(c) = &self.controller {
            c.validate(self.solver.t_end)?;
            if self.control_kernels.is_empty() {
                return Err(Error::param("a controller needs at least one control kernel"));
            }
        }
        if let Some(c) = &self.concentration {
            if !(c.c > 0.0 && c.c < 1.0) {
                return Err(Error::param("concentration budget must lie in (0, 1)"));
            }
            if c.particles == 0 || c.substeps == 0 || !(c.interval > 0.0) {
                return Err(Error::param("concentration schedule needs positive sizes"));
            }
            if !(c.stop_fraction > 0.0 && c.stop_fraction < 1.0) {
                return Err(Error::param("stop_fraction must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Generates `mu_0` deterministically from the seed.
    pub fn initial_measure(&self) -> Result<Measure<f64>> {
        let [x_min, x_max] = self.domain;
        let n = self.cells;
        let grid = match &self.initial {
            InitialMeasure::UniformRandom { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let probe = GridMeasure::uniform_on(x_min, x_max, n, *lo, *hi)?;
                let weights: Vec<f64> = probe
                    .masses()
                    .iter()
                    .map(|&m| {
                        let u: f64 = rng.gen();
                        if m > 0.0 {
                            m * u
                        } else {
                            0.0
                        }
                    })
                    .collect();
                GridMeasure::normalized(x_min, x_max, weights)?
            }
            InitialMeasure::Uniform { lo, hi } => GridMeasure::uniform_on(x_min, x_max, n, *lo, *hi)?,
            InitialMeasure::Bumps { centers, width } => {
                if centers.is_empty() {
                    return Err(Error::param("bumps need at least one center"));
                }
                let mut total = vec![0.0; n];
                for c in centers {
                    let b = GridMeasure::uniform_on(x_min, x_max, n, c - width / 2.0, c + width / 2.0)?;
                    total.iter_mut().zip(b.masses()).for_each(|(t, m)| *t += m);
                }
                GridMeasure::normalized(x_min, x_max, total)?
            }
            InitialMeasure::Atoms { positions, weights } => {
                if self.backend != Backend::Particles {
                    return Err(Error::param("explicit atoms need the particle backend"));
                }
                return Ok(ParticleMeasure::weighted_1d(positions.clone(), weights.clone())?.into());
            }
        };
        Ok(match self.backend {
            Backend::Grid => grid.into(),
            Backend::Particles => Measure::Grid(grid).to_particles().into(),
        })
    }

    fn functional(&self, mu0: &Measure<f64>) -> Result<MomentFunctional<f64>> {
        Ok(match self.functional {
            FunctionalSpec::RecentredVariance => MomentFunctional::centered_variance(mu0.moment_1d(|x| x), self.radius),
            FunctionalSpec::Variance0 => MomentFunctional::variance0(self.radius),
            FunctionalSpec::AbsMoment { delta } => MomentFunctional::abs_moment(delta, self.radius)?,
        })
    }

    pub fn is_concentration(&self) -> bool {
        self.concentration.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: f64,
    pub mass: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    pub consensus: bool,
}

/// Fraction of the total mass one cluster must hold for consensus.
pub const CONSENSUS_FRACTION: f64 = 0.99;

/// Groups above-floor cells into clusters; runs closer than `gap` are merged.
/// Masses and centers cover the whole basin of each cluster, widths only its above-floor run.
pub fn detect_clusters(mu: &GridMeasure<f64>, gap: f64, floor: f64) -> Result<ClusterReport> {
    if !(gap > 0.0) {
        return Err(Error::param("cluster gap must be positive"));
    }
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in 0..mu.n_cells() {
        if mu.density(i) > floor {
            match runs.last_mut() {
                Some((_, end)) if *end + 1 == i => *end = i,
                _ => runs.push((i, i)),
            }
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some((_, end)) if mu.edge(r.0) - mu.edge(*end + 1) < gap => *end = r.1,
            _ => merged.push(r),
        }
    }
    // Every cell belongs to the basin of the nearest run, split halfway across each gap,
    // so sub-floor tails still count towards their cluster's mass and barycenter.
    let n = mu.n_cells();
    let clusters: Vec<Cluster> = merged
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let start = if k == 0 { 0 } else { (merged[k - 1].1 + 1 + lo) / 2 };
            let end = if k + 1 == merged.len() { n } else { (hi + 1 + merged[k + 1].0) / 2 };
            let mass: f64 = mu.masses()[start..end].iter().sum();
            let first: f64 = (start..end).map(|i| mu.masses()[i] * mu.midpoint(i)).sum();
            Cluster {
                center: first / mass,
                mass,
                width: mu.edge(hi + 1) - mu.edge(lo),
            }
        })
        .collect();
    let total = mu.total_mass();
    let consensus = clusters.iter().any(|c| c.mass >= CONSENSUS_FRACTION * total);
    Ok(ClusterReport { clusters, consensus })
}

/// Result of a Hegselmann-Krause scenario.
#[derive(Debug, Clone)]
pub struct HkOutcome {
    pub log: TrajectoryLog<f64>,
    pub clusters: ClusterReport,
    /// First logged time with `V < V(0) / 100`.
    pub v_drop_time: Option<f64>,
}

impl HkOutcome {
    /// Largest barycenter displacement of matched clusters between the snapshot nearest
    /// `t_end - window` and the final one (`None` when cluster counts differ).
    pub fn cluster_drift(&self, window: f64, gap: f64, floor_mass: f64) -> Result<Option<f64>> {
        let last = self.log.snapshots.last().expect("final snapshot");
        let target = last.t - window;
        let early = self
            .log
            .snapshots
            .iter()
            .min_by(|a, b| (a.t - target).abs().total_cmp(&(b.t - target).abs()))
            .expect("snapshots");
        let (Some(g0), Some(g1)) = (early.measure.as_grid(), last.measure.as_grid()) else {
            return Err(Error::Unsupported("cluster drift needs grid snapshots".into()));
        };
        let a = detect_clusters(g0, gap, floor_mass / g0.dx())?;
        let b = detect_clusters(g1, gap, floor_mass / g1.dx())?;
        if a.clusters.len() != b.clusters.len() {
            return Ok(None);
        }
        Ok(Some(
            a.clusters
                .iter()
                .zip(&b.clusters)
                .fold(0.0f64, |m, (x, y)| m.max((x.center - y.center).abs())),
        ))
    }
}

/// Per-cell mass floor for cluster detection.
pub const CLUSTER_FLOOR_MASS: f64 = 1e-3;

fn run_hk(spec: &ScenarioSpec, with_controller: bool) -> Result<HkOutcome> {
    spec.validate()?;
    let mu0 = spec.initial_measure()?;
    let f = spec.kernel.build()?;
    let gs = spec
        .control_kernels
        .iter()
        .map(|k| k.build())
        .collect::<Result<Vec<_>>>()?;
    let functional = spec.functional(&mu0)?;
    let controller = match (&spec.controller, with_controller) {
        (Some(c), true) => Some(Controller::new(*c, functional.clone())?),
        _ => None,
    };
    let dynamics = Dynamics {
        f: Some(f.as_ref()),
        g: if controller.is_some() {
            gs.iter().map(|k| k.as_ref()).collect()
        } else {
            Vec::new()
        },
        drift: None,
        controller: controller.as_ref(),
        functional,
        ball: SupportBall::new(spec.radius)?,
        taper: spec.taper(),
    };
    let log = evolve(mu0, &dynamics, spec.solver)?;
    let gap = spec.kernel.confidence_radius().unwrap_or(f.support_radius().unwrap_or(1.0));
    let last = log.final_measure();
    let grid = match last {
        Measure::Grid(g) => g.clone(),
        Measure::Particles(p) => bin_particles(p, spec.domain, spec.cells)?,
    };
    let clusters = detect_clusters(&grid, gap, CLUSTER_FLOOR_MASS / grid.dx())?;
    let v0 = log.rows.first().map(|r| r.v).unwrap_or(0.0);
    let v_drop_time = log.rows.iter().find(|r| r.v < 0.01 * v0).map(|r| r.t);
    Ok(HkOutcome {
        log,
        clusters,
        v_drop_time,
    })
}

/// Evolves with `u = 0`; the controller section of the spec is ignored.
pub fn run_hk_uncontrolled(spec: &ScenarioSpec) -> Result<HkOutcome> {
    run_hk(spec, false)
}

pub fn run_hk_controlled(spec: &ScenarioSpec) -> Result<HkOutcome> {
    if spec.controller.is_none() {
        return Err(Error::param(format!("scenario `{}` has no controller", spec.name)));
    }
    run_hk(spec, true)
}

fn bin_particles(p: &ParticleMeasure<f64>, domain: [f64; 2], cells: usize) -> Result<GridMeasure<f64>> {
    let probe = GridMeasure::uniform_on(domain[0], domain[1], cells, domain[0], domain[1])?;
    let mut m = vec![0.0; cells];
    for (x, w) in p.atoms() {
        m[probe.cell_index(x[0])] += w;
    }
    GridMeasure::normalized(domain[0], domain[1], m)
}

/// `C^infinity` step from `0` (at `z <= 0`) to `1` (at `z >= 1`).
pub fn smooth_step(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / z).exp();
        let b = (-1.0 / (1.0 - z)).exp();
        a / (a + b)
    }
}

/// `u_eps`: `-1` on `[1 - c + eps, 1]`, `0` left of `1 - c` and right of `1 + eps`, smooth ramps between.
pub fn u_epsilon(c: f64, eps: f64, x: f64) -> f64 {
    let left = 1.0 - c;
    if x <= left || x >= 1.0 + eps {
        0.0
    } else if x < left + eps {
        -smooth_step((x - left) / eps)
    } else if x <= 1.0 {
        -1.0
    } else {
        -smooth_step((1.0 + eps - x) / eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub t: f64,
    pub epsilon: f64,
    pub v: f64,
    /// `int_omega dmu` with `omega = [1 - c, 1 + eps]` the support of `u_eps`.
    pub population_mass: f64,
    /// Mass in `[1 - c - 0.02, 1 - c + 0.02]`.
    pub window_mass: f64,
    /// Largest histogram density on bins of width `0.01`.
    pub sup_norm: f64,
    /// Largest `|density - 1|` over bins of width `0.02` inside `[0, 1 - c - 0.02]`.
    pub left_density_dev: f64,
}

#[derive(Debug, Clone)]
pub struct ConcentrationLog {
    pub c: f64,
    pub rows: Vec<ConcentrationRow>,
    pub final_measure: ParticleMeasure<f64>,
}

pub const CONCENTRATION_HEADER: &str = "t,epsilon,V,population_mass,window_mass,sup_norm,left_density_dev";

impl ConcentrationLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CONCENTRATION_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t, r.epsilon, r.v, r.population_mass, r.window_mass, r.sup_norm, r.left_density_dev
            )?;
        }
        Ok(())
    }
}

/// Half-width of the window around `1 - c` whose mass measures concentration.
pub const WINDOW_HALF_WIDTH: f64 = 0.02;

fn concentration_row(p: &ParticleMeasure<f64>, c: f64, eps: f64, t: f64) -> ConcentrationRow {
    let left = 1.0 - c;
    let mass_in = |lo: f64, hi: f64| p.atoms().filter(|(x, _)| x[0] >= lo && x[0] <= hi).map(|(_, w)| w).sum::<f64>();
    let hist = |width: f64, lo: f64, hi: f64| -> Vec<f64> {
        let bins = ((hi - lo) / width).round() as usize;
        let mut h = vec![0.0; bins];
        for (x, w) in p.atoms() {
            if x[0] >= lo && x[0] < hi {
                let k = (((x[0] - lo) / width) as usize).min(bins - 1);
                h[k] += w / width;
            }
        }
        h
    };
    let sup_norm = hist(0.01, 0.0, 1.0 + eps).into_iter().fold(0.0, f64::max);
    let left_density_dev = hist(0.02, 0.0, left - WINDOW_HALF_WIDTH)
        .into_iter()
        .fold(0.0, |m: f64, d| m.max((d - 1.0).abs()));
    ConcentrationRow {
        t,
        epsilon: eps,
        v: p.moment(|x| x[0] * x[0]),
        population_mass: mass_in(left, 1.0 + eps),
        window_mass: mass_in(left - WINDOW_HALF_WIDTH, left + WINDOW_HALF_WIDTH),
        sup_norm,
        left_density_dev,
    }
}

/// Applies `u_{eps_i}` on `[t_{i-1}, t_i)` with `t_i = i * interval` to `mu_0 = chi_[0,1]`
/// (one atom per cell midpoint), with `f = 0` and `g = 1`.
pub fn run_concentration_demo(c: f64, epsilons: &[f64], interval: f64, particles: usize, substeps: usize) -> Result<ConcentrationLog> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::param("budget c must lie in (0, 1)"));
    }
    if particles == 0 || substeps == 0 || !(interval > 0.0) {
        return Err(Error::param("particles, substeps and interval must be positive"));
    }
    for (i, &eps) in epsilons.iter().enumerate() {
        let t_i = interval * (i + 1) as f64;
        if !(eps > 0.0) || eps >= c - t_i {
            return Err(Error::param(format!(
                "schedule entry {i}: epsilon = {eps} must lie in (0, c - t_i = {})",
                c - t_i
            )));
        }
    }
    if epsilons.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::param("epsilon schedule must be nonincreasing"));
    }
    let positions: Vec<f64> = (0..particles).map(|i| (i as f64 + 0.5) / particles as f64).collect();
    let mut p = ParticleMeasure::uniform(1, positions)?;
    let h = interval / substeps as f64;
    let mut rows = vec![concentration_row(&p, c, epsilons.first().copied().unwrap_or(0.0), 0.0)];
    for (i, &eps) in epsilons.iter().enumerate() {
        let field = field_1d(move |x: f64| u_epsilon(c, eps, x));
        for _ in 0..substeps {
            p = step_particles(&p, &field as &dyn VectorField<f64>, h, 4);
        }
        let t = interval * (i + 1) as f64;
        let next_eps = epsilons.get(i + 1).copied().unwrap_or(eps);
        rows.push(concentration_row(&p, c, next_eps, t));
    }
    Ok(ConcentrationLog {
        c,
        rows,
        final_measure: p,
    })
}

/// Schedule `epsilon_i = factor (c - t_i)` for `t_i = i * interval` up to `stop`.
pub fn concentration_schedule(spec: &ConcentrationSpec) -> Vec<f64> {
    let stop = spec.stop_fraction * spec.c;
    let n = (stop / spec.interval).round() as usize;
    (1..=n)
        .map(|i| spec.eps_factor * (spec.c - spec.interval * i as f64))
        .collect()
}

pub fn run_concentration(spec: &ScenarioSpec) -> Result<ConcentrationLog> {
    spec.validate()?;
    let cs = spec
        .concentration
        .ok_or_else(|| Error::param(format!("scenario `{}` is not a concentration run", spec.name)))?;
    run_concentration_demo(cs.c, &concentration_schedule(&cs), cs.interval, cs.particles, cs.substeps)
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone)]
pub enum ScenarioOutcome {
    Hk(HkOutcome),
    Concentration(ConcentrationLog),
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome> {
    if spec.is_concentration() {
        run_concentration(spec).map(ScenarioOutcome::Concentration)
    } else if spec.controller.is_some() {
        run_hk_controlled(spec).map(ScenarioOutcome::Hk)
    } else {
        run_hk_uncontrolled(spec).map(ScenarioOutcome::Hk)
    }
}
