//! Time stepping of `d/dt mu + div((f[mu] + chi_omega u g[mu]) mu) = 0` on grids and particles.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{ActiveControl, Controller, ControllerState, Trigger};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kernels::{nonlocal_field, truncate_to_ball, InteractionKernel, NonlocalField, Truncated};
use crate::lyapunov::MomentFunctional;
use crate::measure::{wasserstein_1d, GridMeasure, Measure, ParticleMeasure, SupportBall};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default = "default_cfl")]
    pub cfl_max: f64,
    /// Particle integrator: `1` (explicit Euler) or `4` (classical Runge-Kutta).
    #[serde(default = "default_order")]
    pub integrator_order: u8,
    pub t_end: f64,
    /// Store a measure snapshot every this many steps (`0` keeps only the endpoints).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_order() -> u8 {
    4
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            cfl_max: default_cfl(),
            integrator_order: default_order(),
            t_end,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.cfl_max > 0.0 && self.cfl_max < 1.0) {
            return Err(Error::param(format!("cfl_max = {} must lie in (0, 1)", self.cfl_max)));
        }
        if self.integrator_order != 1 && self.integrator_order != 4 {
            return Err(Error::param(format!(
                "integrator_order = {} must be 1 or 4",
                self.integrator_order
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// `x + h v(x)`.
pub fn euler_step<T: Real>(field: &(impl VectorField<T> + ?Sized), x: &[T], h: T, out: &mut [T]) {
    field.eval(x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = *xi + h * *o;
    }
}

/// One classical Runge-Kutta step of `x' = v(x)`.
pub fn rk4_step<T: Real>(field: &(impl VectorField<T> + ?Sized), x: &[T], h: T, out: &mut [T]) {
    let d = x.len();
    let two = T::lit(2.0);
    let half = h / two;
    let mut k1 = vec![T::zero(); d];
    let mut k2 = vec![T::zero(); d];
    let mut k3 = vec![T::zero(); d];
    let mut k4 = vec![T::zero(); d];
    let mut y = vec![T::zero(); d];
    field.eval(x, &mut k1);
    for i in 0..d {
        y[i] = x[i] + half * k1[i];
    }
    field.eval(&y, &mut k2);
    for i in 0..d {
        y[i] = x[i] + half * k2[i];
    }
    field.eval(&y, &mut k3);
    for i in 0..d {
        y[i] = x[i] + h * k3[i];
    }
    field.eval(&y, &mut k4);
    for i in 0..d {
        out[i] = x[i] + h / T::lit(6.0) * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
}

/// Outcome of one upwind step with diagnostics.
#[derive(Debug, Clone)]
pub struct GridStep<T> {
    pub measure: GridMeasure<T>,
    pub substeps: usize,
    /// Largest outflow deficit `(v_{i-1}^+ + v_{i+1}^- - |v_i|) / dx`, so that one sub-step of
    /// length `h` grows the largest cell mass by at most the factor `1 + h div_sup`.
    pub div_sup: T,
    /// Mass in a boundary cell whose velocity points out of the grid.
    pub blocked_mass: T,
}

/// First-order donor-cell upwind step with the velocity sampled at cell midpoints.
///
/// Cell `i` sends `h v_i^+ / dx` of its mass to the right neighbour and `h v_i^- / dx` to
/// the left one, so mass is conserved exactly, and for antisymmetric interaction rules the
/// first moment too. Outer faces are closed. The step is split into equal sub-steps so that
/// no cell loses more than `cfl_max` of its mass.
pub fn step_grid<T: Real>(mu: &GridMeasure<T>, field: &(impl VectorField<T> + ?Sized), dt: T, cfl_max: T) -> GridMeasure<T> {
    step_grid_report(mu, field, dt, cfl_max).measure
}

pub fn step_grid_report<T: Real>(
    mu: &GridMeasure<T>,
    field: &(impl VectorField<T> + ?Sized),
    dt: T,
    cfl_max: T,
) -> GridStep<T> {
    let mids: Vec<T> = (0..mu.n_cells()).map(|i| mu.midpoint(i)).collect();
    let velocity = crate::field::sample_1d(field, &mids);
    step_with_velocities(mu, velocity, dt, cfl_max)
}

fn step_with_velocities<T: Real>(mu: &GridMeasure<T>, mut v: Vec<T>, dt: T, cfl_max: T) -> GridStep<T> {
    let n = mu.n_cells();
    let dx = mu.dx();
    let mut blocked = T::zero();
    if v[0] < T::zero() {
        blocked = blocked + mu.masses()[0];
        v[0] = T::zero();
    }
    if v[n - 1] > T::zero() {
        blocked = blocked + mu.masses()[n - 1];
        v[n - 1] = T::zero();
    }
    let max_rate = v.iter().fold(T::zero(), |acc, x| acc.max(x.abs())) / dx;
    let substeps = if max_rate > T::zero() {
        (dt * max_rate / cfl_max).ceil().to_usize().unwrap_or(1).max(1)
    } else {
        1
    };
    let div_sup = outflow_deficit(mu.masses(), &v, dx, substeps);
    let h = dt / T::from_usize_lossy(substeps);
    let mut m = mu.masses().to_vec();
    let mut right = vec![T::zero(); n];
    let mut left = vec![T::zero(); n];
    if max_rate > T::zero() {
        for _ in 0..substeps {
            for i in 0..n {
                right[i] = h * v[i].max(T::zero()) / dx * m[i];
                left[i] = -h * v[i].min(T::zero()) / dx * m[i];
            }
            for i in 0..n {
                let mut inflow = T::zero();
                if i > 0 {
                    inflow = inflow + right[i - 1];
                }
                if i + 1 < n {
                    inflow = inflow + left[i + 1];
                }
                m[i] = m[i] - right[i] - left[i] + inflow;
            }
        }
    }
    GridStep {
        measure: GridMeasure::from_parts_unchecked(mu.x_min(), mu.x_max(), m),
        substeps,
        div_sup,
        blocked_mass: blocked,
    }
}

/// Largest `(v_{i-1}^+ + v_{i+1}^- - |v_i|) / dx` over the cells that mass can reach within
/// `substeps` sub-steps (one cell per sub-step).
fn outflow_deficit<T: Real>(m: &[T], v: &[T], dx: T, substeps: usize) -> T {
    let n = m.len();
    let mut dist = vec![usize::MAX; n];
    let mut last = None;
    for i in 0..n {
        if m[i] > T::zero() {
            last = Some(i);
        }
        if let Some(j) = last {
            dist[i] = i - j;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if m[i] > T::zero() {
            last = Some(i);
        }
        if let Some(j) = last {
            dist[i] = dist[i].min(j - i);
        }
    }
    let pos = |i: usize| v[i].max(T::zero());
    let neg = |i: usize| (-v[i]).max(T::zero());
    (0..n)
        .filter(|&i| dist[i] <= substeps)
        .fold(T::zero(), |acc, i| {
            let inflow = if i > 0 { pos(i - 1) } else { T::zero() } + if i + 1 < n { neg(i + 1) } else { T::zero() };
            acc.max((inflow - pos(i) - neg(i)) / dx)
        })
}

/// Advances every atom along the frozen field; weights are untouched.
pub fn step_particles<T: Real>(
    mu: &ParticleMeasure<T>,
    field: &(impl VectorField<T> + ?Sized),
    dt: T,
    order: u8,
) -> ParticleMeasure<T> {
    let d = mu.dim();
    let mut out = mu.clone();
    out.positions_mut()
        .par_chunks_mut(d)
        .zip(mu.positions().par_chunks(d))
        .for_each(|(y, x)| {
            if order == 1 {
                euler_step(field, x, dt, y)
            } else {
                rk4_step(field, x, dt, y)
            }
        });
    out
}

/// Positions of a particle system sampled along an autonomous flow, `positions[0]` being the start.
#[derive(Debug, Clone)]
pub struct FlowMap<T> {
    pub dim: usize,
    pub times: Vec<T>,
    pub positions: Vec<Vec<T>>,
}

impl<T: Real> FlowMap<T> {
    pub fn trace(mu0: &ParticleMeasure<T>, field: &(impl VectorField<T> + ?Sized), dt: T, steps: usize, order: u8) -> Self {
        let mut times = vec![T::zero()];
        let mut positions = vec![mu0.positions().to_vec()];
        let mut mu = mu0.clone();
        for k in 1..=steps {
            mu = step_particles(&mu, field, dt, order);
            times.push(dt * T::from_usize_lossy(k));
            positions.push(mu.positions().to_vec());
        }
        Self {
            dim: mu0.dim(),
            times,
            positions,
        }
    }

    /// `Phi(t_k, x_i)`.
    pub fn at(&self, k: usize, i: usize) -> &[T] {
        &self.positions[k][i * self.dim..(i + 1) * self.dim]
    }
}

/// Velocity ingredients of a run: drift kernel `f`, control kernels `g_i`, optional feedback.
pub struct Dynamics<'a, T: Real> {
    pub f: Option<&'a dyn InteractionKernel<T>>,
    pub g: Vec<&'a dyn InteractionKernel<T>>,
    /// Extra measure-independent drift (not truncated).
    pub drift: Option<&'a dyn VectorField<T>>,
    pub controller: Option<&'a Controller<T>>,
    /// Functional logged as `V`.
    pub functional: MomentFunctional<T>,
    pub ball: SupportBall<T>,
    pub taper: T,
}

impl<'a, T: Real> Dynamics<'a, T> {
    pub fn uncontrolled(f: Option<&'a dyn InteractionKernel<T>>, functional: MomentFunctional<T>, ball: SupportBall<T>, taper: T) -> Self {
        Self {
            f,
            g: Vec::new(),
            drift: None,
            controller: None,
            functional,
            ball,
            taper,
        }
    }

    /// Lipschitz constant of the truncated kernels.
    pub fn lipschitz(&self) -> T {
        let taper_term = self.bound() / self.taper;
        self.f
            .iter()
            .chain(self.g.iter())
            .fold(T::zero(), |acc, k| acc.max(k.lipschitz()))
            + taper_term
    }

    pub fn bound(&self) -> T {
        self.f
            .iter()
            .chain(self.g.iter())
            .fold(T::zero(), |acc, k| acc.max(k.bound()))
    }
}

/// The velocity `f[mu] + drift + u g_i[mu]` frozen on one measure snapshot.
struct FrozenField<'m, T: Real> {
    dim: usize,
    f: Option<Truncated<NonlocalField<'m, T>, T>>,
    drift: Option<&'m dyn VectorField<T>>,
    control: Option<(ActiveControl<T>, usize)>,
    g: Vec<Truncated<NonlocalField<'m, T>, T>>,
}

impl<T: Real> VectorField<T> for FrozenField<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut tmp = vec![T::zero(); self.dim];
        if let Some(f) = &self.f {
            f.eval(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o = *o + *t);
        }
        if let Some(d) = self.drift {
            d.eval(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o = *o + *t);
        }
        if let Some((ctrl, i)) = &self.control {
            let u = ctrl.u(x);
            if u != T::zero() {
                self.g[*i].eval(x, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o = *o + u * *t);
            }
        }
    }
}

/// One logged time `t_k`, with the control applied on `[t_k, t_k + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow<T> {
    pub step: usize,
    pub t: T,
    pub v: T,
    pub slope: T,
    pub control: Option<ActiveControl<T>>,
    pub mass: T,
    /// Largest density (grid backend only).
    pub sup_norm: Option<T>,
    pub min_mass: T,
    pub support: Option<(T, T)>,
    pub switched: bool,
    pub trigger: Option<Trigger>,
    pub runner_up: Option<T>,
    pub previous_slope: Option<T>,
    /// Outflow deficit of the grid step taken after this row (grid backend, not on the last row).
    pub div_sup: Option<T>,
}

/// Constants needed to audit a log after the fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogContext<T> {
    pub dt: T,
    pub dx: Option<T>,
    pub dim: usize,
    pub lipschitz: T,
    pub bound: T,
    pub kappa: Option<f64>,
    pub c: Option<f64>,
    pub h: Option<f64>,
    pub radius: T,
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub step: usize,
    pub t: T,
    pub measure: Measure<T>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog<T> {
    pub rows: Vec<LogRow<T>>,
    pub snapshots: Vec<Snapshot<T>>,
    pub context: LogContext<T>,
}

pub const CSV_HEADER: &str =
    "t,V,slope,control_a,control_b,control_eta,control_sign,mass,min_mass,sup_norm,supp_lo,supp_hi,field,switched,trigger,runner_up,previous_slope";

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| format!("{}", x.as_f64())).unwrap_or_default()
}

fn join<T: Real>(v: &[T]) -> String {
    v.iter()
        .map(|x| format!("{}", x.as_f64()))
        .collect::<Vec<_>>()
        .join(";")
}

impl<T: Real> TrajectoryLog<T> {
    pub fn final_measure(&self) -> &Measure<T> {
        &self.snapshots.last().expect("log holds the final snapshot").measure
    }

    pub fn initial_measure(&self) -> &Measure<T> {
        &self.snapshots.first().expect("log holds the initial snapshot").measure
    }

    pub fn switch_count(&self) -> usize {
        self.rows.iter().filter(|r| r.switched).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            let (a, b, eta, sign, field) = match &r.control {
                Some(c) => (
                    join(c.params.a()),
                    join(c.params.b()),
                    format!("{}", c.params.eta().as_f64()),
                    c.sign.to_string(),
                    c.field_index.to_string(),
                ),
                None => Default::default(),
            };
            let sign = if sign.is_empty() { "0".to_string() } else { sign };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t.as_f64(),
                r.v.as_f64(),
                r.slope.as_f64(),
                a,
                b,
                eta,
                sign,
                r.mass.as_f64(),
                r.min_mass.as_f64(),
                opt(r.sup_norm),
                opt(r.support.map(|s| s.0)),
                opt(r.support.map(|s| s.1)),
                field,
                u8::from(r.switched),
                r.trigger.map(|t| t.as_str()).unwrap_or_default(),
                opt(r.runner_up),
                opt(r.previous_slope),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Mass floor below which a cell does not count towards the reported support.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// A running simulation: one measure, one controller state.
pub struct Simulation<'a, T: Real> {
    dynamics: &'a Dynamics<'a, T>,
    config: SolverConfig,
    mu: Measure<T>,
    state: ControllerState<T>,
    step: usize,
}

impl<'a, T: Real> Simulation<'a, T> {
    pub fn new(mu0: Measure<T>, dynamics: &'a Dynamics<'a, T>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if let Some(c) = dynamics.controller {
            c.config().validate(config.t_end)?;
        }
        if let Some(k) = dynamics.f.iter().chain(dynamics.g.iter()).find(|k| k.dim() != mu0.dim()) {
            return Err(Error::DimensionMismatch {
                expected: mu0.dim(),
                got: k.dim(),
            });
        }
        if dynamics.controller.is_some() && dynamics.g.is_empty() {
            return Err(Error::param("a controller needs at least one control kernel"));
        }
        truncate_to_ball((), dynamics.ball, dynamics.taper)?;
        if let Measure::Grid(g) = &mu0 {
            let r = dynamics.ball.radius();
            if g.x_min() < -r || g.x_max() > r {
                return Err(Error::param(format!(
                    "grid domain [{}, {}] must lie inside B(0, {r})",
                    g.x_min(),
                    g.x_max()
                )));
            }
        }
        let sim = Self {
            dynamics,
            config,
            mu: mu0,
            state: ControllerState::default(),
            step: 0,
        };
        sim.check_support()?;
        Ok(sim)
    }

    pub fn measure(&self) -> &Measure<T> {
        &self.mu
    }

    pub fn time(&self) -> T {
        T::lit(self.config.dt) * T::from_usize_lossy(self.step)
    }

    pub fn state(&self) -> &ControllerState<T> {
        &self.state
    }

    fn check_support(&self) -> Result<()> {
        let r = self.dynamics.ball.radius();
        let slack = T::lit(1e-9);
        let escaped = match &self.mu {
            Measure::Particles(p) => p
                .atoms()
                .any(|(x, w)| w > T::zero() && !self.dynamics.ball.contains(x, slack)),
            Measure::Grid(_) => false,
        };
        if escaped {
            let (lo, hi) = self.mu.support_bounds(T::zero()).unwrap_or((T::zero(), T::zero()));
            return Err(Error::SupportEscape {
                t: self.time().as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
                bound_lo: -r.as_f64(),
                bound_hi: r.as_f64(),
            });
        }
        Ok(())
    }

    /// Decides the control at the current time, logs it, and advances unless `advance` is false.
    pub fn advance(&mut self, advance: bool) -> Result<LogRow<T>> {
        let t = self.time();
        let dyns = self.dynamics;
        let mu = &self.mu;
        let trunc = |k: &'a dyn InteractionKernel<T>| truncate_to_ball(nonlocal_field(k, mu), dyns.ball, dyns.taper);
        let f = dyns.f.map(trunc).transpose()?;
        let g = dyns.g.iter().map(|k| trunc(*k)).collect::<Result<Vec<_>>>()?;
        let (decision, next_state) = match dyns.controller {
            Some(ctrl) => {
                let refs: Vec<&dyn VectorField<T>> = g.iter().map(|x| x as &dyn VectorField<T>).collect();
                let (d, s) = ctrl.decide_multi(t, mu, &refs, &self.state);
                (Some(d), s)
            }
            None => (None, self.state.clone()),
        };
        let control = decision.as_ref().and_then(|d| d.control.clone());
        let field = FrozenField {
            dim: mu.dim(),
            f,
            drift: dyns.drift,
            control: control.clone().map(|c| {
                let i = c.field_index;
                (c, i)
            }),
            g,
        };
        let mut row = LogRow {
            step: self.step,
            t,
            v: dyns.functional.value(mu),
            slope: decision.as_ref().map(|d| d.slope).unwrap_or_else(T::zero),
            control,
            mass: mu.total_mass(),
            sup_norm: mu.as_grid().map(|g| g.sup_norm()),
            min_mass: match mu {
                Measure::Grid(g) => g.masses().iter().fold(T::infinity(), |a, m| a.min(*m)),
                Measure::Particles(p) => p.weights().iter().fold(T::infinity(), |a, m| a.min(*m)),
            },
            support: mu.support_bounds(T::lit(SUPPORT_FLOOR)),
            switched: decision.as_ref().is_some_and(|d| d.switched),
            trigger: decision.as_ref().and_then(|d| d.trigger),
            runner_up: decision.as_ref().and_then(|d| d.runner_up),
            previous_slope: decision.as_ref().and_then(|d| d.previous_slope),
            div_sup: None,
        };
        if !advance {
            return Ok(row);
        }
        let dt = T::lit(self.config.dt);
        let next = match mu {
            Measure::Grid(gm) => {
                let step = step_grid_report(gm, &field, dt, T::lit(self.config.cfl_max));
                if step.blocked_mass > T::lit(SUPPORT_FLOOR) {
                    let (lo, hi) = gm.support_bounds(T::zero()).unwrap_or((gm.x_min(), gm.x_max()));
                    return Err(Error::SupportEscape {
                        t: t.as_f64(),
                        lo: lo.as_f64(),
                        hi: hi.as_f64(),
                        bound_lo: gm.x_min().as_f64(),
                        bound_hi: gm.x_max().as_f64(),
                    });
                }
                row.div_sup = Some(step.div_sup);
                Measure::Grid(step.measure)
            }
            Measure::Particles(p) => Measure::Particles(step_particles(p, &field, dt, self.config.integrator_order)),
        };
        drop(field);
        self.mu = next;
        self.state = next_state;
        self.step += 1;
        self.check_support()?;
        Ok(row)
    }
}

/// Runs the dynamics from `mu0` to `t_end`, logging every step.
pub fn evolve<T: Real>(mu0: Measure<T>, dynamics: &Dynamics<'_, T>, config: SolverConfig) -> Result<TrajectoryLog<T>> {
    let context = LogContext {
        dt: T::lit(config.dt),
        dx: mu0.as_grid().map(|g| g.dx()),
        dim: mu0.dim(),
        lipschitz: dynamics.lipschitz(),
        bound: dynamics.bound(),
        kappa: dynamics.controller.map(|c| c.config().kappa),
        c: dynamics.controller.map(|c| c.config().c),
        h: dynamics.controller.map(|c| c.config().h),
        radius: dynamics.ball.radius(),
    };
    let n = config.n_steps();
    let mut sim = Simulation::new(mu0.clone(), dynamics, config)?;
    let mut rows = Vec::with_capacity(n + 1);
    let mut snapshots = vec![Snapshot {
        step: 0,
        t: T::zero(),
        measure: mu0,
    }];
    for k in 0..=n {
        rows.push(sim.advance(k < n)?);
        let step = k + 1;
        if k < n && config.snapshot_every > 0 && step % config.snapshot_every == 0 && step < n {
            snapshots.push(Snapshot {
                step,
                t: sim.time(),
                measure: sim.measure().clone(),
            });
        }
    }
    if n > 0 {
        snapshots.push(Snapshot {
            step: n,
            t: sim.time(),
            measure: sim.measure().clone(),
        });
    }
    Ok(TrajectoryLog {
        rows,
        snapshots,
        context,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinfViolation<T> {
    pub step: usize,
    pub lhs: T,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinfReport<T> {
    pub steps_checked: usize,
    pub gronwall: Vec<LinfViolation<T>>,
    pub lemma: Vec<LinfViolation<T>>,
    /// Largest `||mu_{k+1}|| / (||mu_k|| (1 + dt D_k))`.
    pub worst_ratio: T,
}

impl<T> LinfReport<T> {
    pub fn passed(&self) -> bool {
        self.gronwall.is_empty() && self.lemma.is_empty()
    }
}

/// Audits `||mu_{k+1}|| <= ||mu_k|| (1 + dt D_k) + 5 (dx + dt) ||mu_k||` at every step and
/// `||mu(t)|| <= exp(d theta (2L + M Lip_u(theta))) ||mu_0||` with `Lip_u(theta) = kappa (1 + theta)`.
pub fn check_linf_bound<T: Real>(log: &TrajectoryLog<T>) -> Result<LinfReport<T>> {
    let ctx = &log.context;
    let dx = ctx
        .dx
        .ok_or_else(|| Error::Unsupported("L-infinity audit needs the grid backend".into()))?;
    let dt = ctx.dt;
    let five = T::lit(5.0);
    let mut report = LinfReport {
        steps_checked: 0,
        gronwall: Vec::new(),
        lemma: Vec::new(),
        worst_ratio: T::zero(),
    };
    let s0 = log.rows.first().and_then(|r| r.sup_norm).unwrap_or_else(T::zero);
    let d = T::from_usize_lossy(ctx.dim);
    let lip_u = |theta: T| ctx.kappa.map(|k| T::lit(k) * (T::one() + theta)).unwrap_or_else(T::zero);
    for pair in log.rows.windows(2) {
        let (now, next) = (&pair[0], &pair[1]);
        let (Some(a), Some(b), Some(div)) = (now.sup_norm, next.sup_norm, now.div_sup) else {
            continue;
        };
        report.steps_checked += 1;
        let base = a * (T::one() + dt * div);
        let rhs = base + five * (dx + dt) * a;
        if base > T::zero() {
            report.worst_ratio = report.worst_ratio.max(b / base);
        }
        if b > rhs {
            report.gronwall.push(LinfViolation {
                step: now.step,
                lhs: b,
                rhs,
            });
        }
        let theta = next.t;
        let log_bound = d * theta * (T::lit(2.0) * ctx.lipschitz + ctx.bound * lip_u(theta)) + s0.ln();
        if b.ln() > log_bound {
            report.lemma.push(LinfViolation {
                step: next.step,
                lhs: b.ln(),
                rhs: log_bound,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub times: Vec<T>,
    pub distances: Vec<T>,
    /// Least-squares slope of `log W_1` against `t`.
    pub rate: T,
    /// Coefficient of determination of that fit (`None` when undefined).
    pub r_squared: Option<T>,
}

/// Co-evolves two initial data under the same dynamics and records `W_1(mu(t), nu(t))`.
pub fn stability_probe<T: Real>(
    mu0: Measure<T>,
    nu0: Measure<T>,
    dynamics: &Dynamics<'_, T>,
    config: SolverConfig,
) -> Result<StabilityReport<T>> {
    let n = config.n_steps();
    let mut a = Simulation::new(mu0, dynamics, config)?;
    let mut b = Simulation::new(nu0, dynamics, config)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut distances = Vec::with_capacity(n + 1);
    for k in 0..=n {
        times.push(a.time());
        distances.push(wasserstein_1d(a.measure(), b.measure(), T::one())?);
        if k < n {
            a.advance(true)?;
            b.advance(true)?;
        }
    }
    let (rate, r_squared) = fit_log_rate(&times, &distances);
    Ok(StabilityReport {
        times,
        distances,
        rate,
        r_squared,
    })
}

fn fit_log_rate<T: Real>(times: &[T], values: &[T]) -> (T, Option<T>) {
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > T::zero())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return (T::zero(), None);
    }
    let n = T::from_usize_lossy(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let stt: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sty: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: T = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let rate = sty / stt;
    let r2 = if syy > T::zero() {
        Some(sty * sty / (stt * syy))
    } else {
        None
    };
    (rate, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{field_1d, ZeroField};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_field_leaves_grid_unchanged() {
        let mu = GridMeasure::uniform_on(-1.0, 1.0, 40, -0.5, 0.5).unwrap();
        let next = step_grid(&mu, &ZeroField { dim: 1 }, 0.1, 0.9);
        assert_eq!(next, mu);
    }

    #[test]
    fn upwind_conserves_mass_and_sign() {
        let mu = GridMeasure::from_density(-2.0, 2.0, 200, |x: f64| (-x * x).exp()).unwrap();
        let field = field_1d(|x: f64| -x.sin());
        let mut m = mu.clone();
        for _ in 0..50 {
            m = step_grid(&m, &field, 0.05, 0.9);
            assert!((m.total_mass() - 1.0).abs() < 1e-12);
            assert!(m.masses().iter().all(|&x| x >= -1e-14));
        }
    }

    #[test]
    fn outflow_deficit_bounds_growth() {
        let mu = GridMeasure::from_density(-1.0, 1.0, 40, |x: f64| 1.0 + 0.3 * (3.0 * x).cos()).unwrap();
        // Compression towards 0: the two middle cells take in 1.5 dx v' per unit time.
        let s = step_grid_report(&mu, &field_1d(|x: f64| -x), 0.01, 0.9);
        assert_abs_diff_eq!(s.div_sup, 1.5, epsilon = 1e-12);
        assert_eq!(s.substeps, 1);
        assert!(s.measure.sup_norm() <= mu.sup_norm() * (1.0 + 0.01 * s.div_sup));
        // Pure translation has no deficit unless mass can reach the closed end.
        let s = step_grid_report(&GridMeasure::uniform_on(-1.0, 1.0, 40, -0.5, 0.5).unwrap(), &field_1d(|_| 1.0), 0.01, 0.9);
        assert_abs_diff_eq!(s.div_sup, 0.0, epsilon = 1e-12);
        let s = step_grid_report(&GridMeasure::uniform_on(-1.0, 1.0, 40, 0.5, 1.0).unwrap(), &field_1d(|_| 1.0), 0.01, 0.9);
        assert_abs_diff_eq!(s.div_sup, 20.0, epsilon = 1e-12);
    }

    #[test]
    fn substeps_respect_cfl() {
        let mu = GridMeasure::uniform_on(0.0, 1.0, 100, 0.2, 0.4).unwrap();
        let field = field_1d(|_x: f64| 3.0);
        let s = step_grid_report(&mu, &field, 0.01, 0.5);
        assert_eq!(s.substeps, 6);
    }

    #[test]
    fn rk4_exponential_decay() {
        let field = field_1d(|x: f64| -x);
        let mut x = [1.0];
        let mut y = [0.0];
        let h = 0.1;
        for _ in 0..10 {
            rk4_step(&field, &x, h, &mut y);
            x = y;
        }
        assert_abs_diff_eq!(x[0], (-1.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn fit_recovers_exponential() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 1e-3 * (0.7 * t).exp()).collect();
        let (rate, r2) = fit_log_rate(&t, &v);
        assert_abs_diff_eq!(rate, 0.7, epsilon = 1e-10);
        assert_abs_diff_eq!(r2.unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0).validate().is_err());
        let mut c = SolverConfig::new(0.1, 1.0);
        c.cfl_max = 1.0;
        assert!(c.validate().is_err());
        c.cfl_max = 0.5;
        c.integrator_order = 2;
        assert!(c.validate().is_err());
    }
}
