//! Sparse feedback with hysteresis: bump controls, slope search and the switching state machine.

mod bump;
mod search;
mod slope;

pub use bump::{bump_1d, bump_nd, control_function, ActiveControl, BumpParams};
pub use search::{search_maximizer, Candidate, SearchConfig};
pub use slope::{slope, slope_oracle, DirectSlope, LineSlope, SlopeOracle};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::lyapunov::MomentFunctional;
use crate::measure::Measure;
use crate::scalar::{sign_with_deadband, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Hysteresis parameter in `(0, 1)`.
    pub h: f64,
    /// Sparsity budget on `|omega|`.
    pub c: f64,
    /// Scale of the threshold schedule.
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_eps_sign")]
    pub eps_sign: f64,
    #[serde(default)]
    pub search: SearchConfig,
}

fn one() -> f64 {
    1.0
}

fn default_eps_sign() -> f64 {
    1e-9
}

impl ControllerConfig {
    pub fn new(h: f64, c: f64) -> Self {
        Self {
            h,
            c,
            kappa: 1.0,
            eps_sign: default_eps_sign(),
            search: SearchConfig::default(),
        }
    }

    /// Checks the parameter ranges; `t_end` bounds the horizon for the sign deadband.
    pub fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::param(format!("hysteresis h = {} must lie in (0, 1)", self.h)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(format!("budget c = {} must be positive", self.c)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::param(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.eps_sign >= 0.0) {
            return Err(Error::param("eps_sign must be nonnegative"));
        }
        if self.eps_sign >= self.kappa / (1.0 + t_end.max(0.0)) {
            return Err(Error::param(format!(
                "eps_sign = {} must stay below the activation threshold {} over the horizon",
                self.eps_sign,
                self.kappa / (1.0 + t_end.max(0.0))
            )));
        }
        self.search.validate()
    }

    /// `(phi1, phi2, phi3) = (kappa / 2, kappa, 2 kappa) / (1 + t)`.
    pub fn thresholds<T: Real>(&self, t: T) -> Thresholds<T> {
        let base = T::lit(self.kappa) / (T::one() + t);
        Thresholds {
            phi1: base / T::lit(2.0),
            phi2: base,
            phi3: base * T::lit(2.0),
        }
    }

    /// `1 / (kappa (1 + t))`.
    pub fn eta_min<T: Real>(&self, t: T) -> T {
        T::one() / (T::lit(self.kappa) * (T::one() + t))
    }

    /// Shoulder floor `2 / (kappa (1 + t))` of the stricter candidate set.
    pub fn eta_min_strict<T: Real>(&self, t: T) -> T {
        T::lit(2.0) * self.eta_min(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub phi1: T,
    pub phi2: T,
    pub phi3: T,
}

/// `|omega| <= c` and `eta >= eta_min(t)`.
pub fn admissible<T: Real>(params: &BumpParams<T>, t: T, config: &ControllerConfig) -> bool {
    params.omega_volume() <= T::lit(config.c) && params.eta() >= config.eta_min(t)
}

/// Membership in the stricter set used for activation and hysteresis candidates.
pub fn admissible_strict<T: Real>(params: &BumpParams<T>, t: T, config: &ControllerConfig) -> bool {
    params.omega_volume() <= T::lit(config.c) && params.eta() >= config.eta_min_strict(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode<T> {
    /// A new step starts: search and either activate or go idle.
    Entry,
    Idle,
    Active(ActiveControl<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T> {
    pub mode: Mode<T>,
    /// Time of the last switch.
    pub t_n: T,
    pub switches: usize,
}

impl<T: Real> Default for ControllerState<T> {
    fn default() -> Self {
        Self {
            mode: Mode::Entry,
            t_n: T::zero(),
            switches: 0,
        }
    }
}

impl<T: Real> ControllerState<T> {
    pub fn active(&self) -> Option<&ActiveControl<T>> {
        match &self.mode {
            Mode::Active(c) => Some(c),
            _ => None,
        }
    }
}

/// What caused a new search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Initial,
    /// An idle controller found a strict candidate above `phi3`.
    Activation,
    /// The active control's decrease rate fell to `phi1`.
    Threshold,
    /// A strict candidate beat the active control by the hysteresis margin.
    Hysteresis,
}

impl Trigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trigger::Initial => "initial",
            Trigger::Activation => "activation",
            Trigger::Threshold => "threshold",
            Trigger::Hysteresis => "hysteresis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision<T> {
    /// `None` is the zero control.
    pub control: Option<ActiveControl<T>>,
    /// The emitted control differs from the one held before this call.
    pub switched: bool,
    pub trigger: Option<Trigger>,
    /// `|L_{u g} V|` of the emitted control (zero when idle).
    pub slope: T,
    /// Best slope seen by the searches of this call.
    pub best_slope: Option<T>,
    /// Best strict candidate compared against the held control.
    pub runner_up: Option<T>,
    /// Decrease rate `-L_{u g} V` of the held control before a hysteresis switch.
    pub previous_slope: Option<T>,
}

impl<T: Real> ControlDecision<T> {
    fn zero() -> Self {
        Self {
            control: None,
            switched: false,
            trigger: None,
            slope: T::zero(),
            best_slope: None,
            runner_up: None,
            previous_slope: None,
        }
    }
}

/// Feedback law for a fixed functional and controller configuration.
#[derive(Debug, Clone)]
pub struct Controller<T> {
    config: ControllerConfig,
    functional: MomentFunctional<T>,
}

impl<T: Real> Controller<T> {
    pub fn new(config: ControllerConfig, functional: MomentFunctional<T>) -> Result<Self> {
        config.validate(0.0)?;
        Ok(Self { config, functional })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn functional(&self) -> &MomentFunctional<T> {
        &self.functional
    }

    /// One control field `g[mu]`.
    pub fn decide(
        &self,
        t: T,
        mu: &Measure<T>,
        g: &dyn VectorField<T>,
        state: &ControllerState<T>,
    ) -> (ControlDecision<T>, ControllerState<T>) {
        self.decide_multi(t, mu, &[g], state)
    }

    /// Control fields `g_1[mu], ..., g_m[mu]`; at most one of them is driven at a time.
    pub fn decide_multi(
        &self,
        t: T,
        mu: &Measure<T>,
        gs: &[&dyn VectorField<T>],
        state: &ControllerState<T>,
    ) -> (ControlDecision<T>, ControllerState<T>) {
        let oracles: Vec<Box<dyn SlopeOracle<T>>> =
            gs.iter().map(|g| slope_oracle(&self.functional, *g, mu)).collect();
        let refs: Vec<&dyn SlopeOracle<T>> = oracles.iter().map(|o| o.as_ref()).collect();
        let th = self.config.thresholds(t);
        let c = T::lit(self.config.c);
        let strict = || search_maximizer(&refs, c, self.config.eta_min_strict(t), &self.config.search);

        match &state.mode {
            Mode::Entry => self.enter(t, &refs, state, Trigger::Initial, None, None),
            Mode::Idle => {
                let cand = strict();
                match cand {
                    Some(cand) if cand.slope >= th.phi3 => {
                        self.enter(t, &refs, state, Trigger::Activation, Some(cand), None)
                    }
                    other => {
                        let mut d = ControlDecision::zero();
                        d.best_slope = other.map(|c| c.slope);
                        (d, state.clone())
                    }
                }
            }
            Mode::Active(ctrl) => {
                let signed = refs
                    .get(ctrl.field_index)
                    .map(|o| o.signed(&ctrl.params))
                    .unwrap_or_else(T::zero);
                let achieved = -T::from_i8(ctrl.sign).unwrap_or_else(T::zero) * signed;
                if achieved <= th.phi1 {
                    return self.enter(t, &refs, state, Trigger::Threshold, None, Some(achieved));
                }
                let cand = strict();
                let h = T::lit(self.config.h);
                match cand {
                    Some(cand) if achieved <= (T::one() - h) * cand.slope => {
                        self.enter(t, &refs, state, Trigger::Hysteresis, Some(cand), Some(achieved))
                    }
                    other => {
                        let d = ControlDecision {
                            control: Some(ctrl.clone()),
                            switched: false,
                            trigger: None,
                            slope: signed.abs(),
                            best_slope: Some(signed.abs()),
                            runner_up: other.map(|c| c.slope),
                            previous_slope: None,
                        };
                        (d, state.clone())
                    }
                }
            }
        }
    }

    fn enter(
        &self,
        t: T,
        oracles: &[&dyn SlopeOracle<T>],
        state: &ControllerState<T>,
        trigger: Trigger,
        known: Option<Candidate<T>>,
        previous: Option<T>,
    ) -> (ControlDecision<T>, ControllerState<T>) {
        let th = self.config.thresholds(t);
        let found = search_maximizer(oracles, T::lit(self.config.c), self.config.eta_min(t), &self.config.search);
        let runner_up = known.as_ref().map(|c| c.slope);
        let best = match (found, known) {
            (Some(f), Some(k)) => Some(if k.beats(&f) { k } else { f }),
            (f, k) => f.or(k),
        };
        let held = state.active().cloned();
        let sign = best
            .as_ref()
            .filter(|b| b.slope >= th.phi2)
            .map(|b| -sign_with_deadband(b.signed, T::lit(self.config.eps_sign)))
            .unwrap_or(0);
        let mut next = state.clone();
        let mut decision = ControlDecision::zero();
        decision.trigger = Some(trigger);
        decision.best_slope = best.as_ref().map(|b| b.slope);
        decision.runner_up = runner_up;
        decision.previous_slope = previous;
        if sign == 0 {
            next.mode = Mode::Idle;
            decision.switched = held.is_some();
        } else {
            let best = best.expect("sign set only with a candidate");
            let ctrl = ActiveControl {
                params: best.params,
                sign,
                field_index: best.field_index,
            };
            decision.switched = held.as_ref() != Some(&ctrl);
            decision.slope = best.slope;
            decision.control = Some(ctrl.clone());
            next.mode = Mode::Active(ctrl);
        }
        if decision.switched {
            next.t_n = t;
            next.switches += 1;
        }
        (decision, next)
    }
}
