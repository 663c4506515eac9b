//! Moment functionals `V[mu] = int v dmu`, their Lie derivatives along velocity fields,
//! and distances to the target set.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::kernels::HkKernel;
use crate::measure::{wasserstein_1d, Measure, ParticleMeasure};
use crate::scalar::Real;
use crate::solver::rk4_step;

type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type GradFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub enum MomentKind<T> {
    /// `v(x) = |x - center|^2`.
    Quadratic { center: Vec<T> },
    /// `v(x) = sqrt((x - center)^2 + delta^2) - delta`, a smoothed `|x - center|` (1D).
    SmoothedAbs { center: T, delta: T },
    Custom { dim: usize, v: ScalarFn<T>, grad: GradFn<T> },
}

impl<T: std::fmt::Debug> std::fmt::Debug for MomentKind<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MomentKind::Quadratic { center } => f.debug_struct("Quadratic").field("center", center).finish(),
            MomentKind::SmoothedAbs { center, delta } => f
                .debug_struct("SmoothedAbs")
                .field("center", center)
                .field("delta", delta)
                .finish(),
            MomentKind::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish_non_exhaustive(),
        }
    }
}

/// `V[mu] = int v dmu` together with `grad v` and the radius of the ball the dynamics live in.
#[derive(Debug, Clone)]
pub struct MomentFunctional<T> {
    kind: MomentKind<T>,
    radius: T,
}

impl<T: Real> MomentFunctional<T> {
    pub fn new(kind: MomentKind<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::param("functional radius must be positive"));
        }
        if let MomentKind::SmoothedAbs { delta, .. } = &kind {
            if !(*delta > T::zero()) {
                return Err(Error::param("abs_moment smoothing must be positive"));
            }
        }
        Ok(Self { kind, radius })
    }

    /// `variance0`: `v(x) = x^2`.
    pub fn variance0(radius: T) -> Self {
        Self::centered_variance(T::zero(), radius)
    }

    /// `v(x) = (x - center)^2`.
    pub fn centered_variance(center: T, radius: T) -> Self {
        Self {
            kind: MomentKind::Quadratic { center: vec![center] },
            radius,
        }
    }

    /// `abs_moment`: smoothed `|x|` for diagnostics.
    pub fn abs_moment(delta: T, radius: T) -> Result<Self> {
        Self::new(
            MomentKind::SmoothedAbs {
                center: T::zero(),
                delta,
            },
            radius,
        )
    }

    pub fn kind(&self) -> &MomentKind<T> {
        &self.kind
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MomentKind::Quadratic { center } => center.len(),
            MomentKind::SmoothedAbs { .. } => 1,
            MomentKind::Custom { dim, .. } => *dim,
        }
    }

    pub fn v(&self, x: &[T]) -> T {
        match &self.kind {
            MomentKind::Quadratic { center } => x.iter().zip(center).map(|(a, c)| (*a - *c) * (*a - *c)).sum(),
            MomentKind::SmoothedAbs { center, delta } => {
                let z = x[0] - *center;
                (z * z + *delta * *delta).sqrt() - *delta
            }
            MomentKind::Custom { v, .. } => v(x),
        }
    }

    pub fn grad(&self, x: &[T], out: &mut [T]) {
        match &self.kind {
            MomentKind::Quadratic { center } => {
                for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                    *o = T::lit(2.0) * (*a - *c);
                }
            }
            MomentKind::SmoothedAbs { center, delta } => {
                let z = x[0] - *center;
                out[0] = z / (z * z + *delta * *delta).sqrt();
            }
            MomentKind::Custom { grad, .. } => grad(x, out),
        }
    }

    pub fn grad_1d(&self, x: T) -> T {
        let mut g = [T::zero()];
        self.grad(std::slice::from_ref(&x), &mut g);
        g[0]
    }

    /// `sup_{B(0,R)} |grad v|`.
    pub fn grad_sup(&self) -> T {
        match &self.kind {
            MomentKind::Quadratic { center } => {
                let c: T = center.iter().map(|c| *c * *c).sum::<T>().sqrt();
                T::lit(2.0) * (self.radius + c)
            }
            MomentKind::SmoothedAbs { .. } => T::one(),
            MomentKind::Custom { dim, grad, .. } => {
                // Sampled along the coordinate axes; adequate for radial profiles.
                let n = 2001;
                let mut best = T::zero();
                let mut x = vec![T::zero(); *dim];
                let mut g = vec![T::zero(); *dim];
                for axis in 0..*dim {
                    for k in 0..n {
                        x.iter_mut().for_each(|c| *c = T::zero());
                        x[axis] = self.radius * (T::lit(2.0) * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1) - T::one());
                        grad(&x, &mut g);
                        best = best.max(g.iter().map(|c| *c * *c).sum::<T>().sqrt());
                    }
                }
                best
            }
        }
    }

    /// The constant `K` in `|L_{ug} V| <= K ||u||_{L^1(mu)}`, for control fields bounded by `g_bound`.
    pub fn k_bound(&self, g_bound: T) -> T {
        self.grad_sup() * g_bound
    }

    pub fn value(&self, mu: &Measure<T>) -> T {
        mu.moment(|x| self.v(x))
    }
}

/// `L_w V[mu] = int grad v(x) . w(x) dmu(x)`.
pub fn lie_derivative<T: Real>(functional: &MomentFunctional<T>, field: &(impl VectorField<T> + ?Sized), mu: &Measure<T>) -> T {
    let d = mu.dim();
    let mut g = vec![T::zero(); d];
    let mut w = vec![T::zero(); d];
    mu.moment(|x| {
        functional.grad(x, &mut g);
        field.eval(x, &mut w);
        g.iter().zip(&w).map(|(a, b)| *a * *b).sum()
    })
}

/// Finite-difference oracle for [`lie_derivative`]: one RK4 step of `+tau` and `-tau`
/// along the frozen field on the particle representation, then a central difference of `V`.
pub fn lie_derivative_fd_oracle<T: Real>(
    functional: &MomentFunctional<T>,
    field: &(impl VectorField<T> + ?Sized),
    mu: &Measure<T>,
    tau: T,
) -> Result<T> {
    if !(tau > T::zero()) {
        return Err(Error::param("oracle step must be positive"));
    }
    let p = mu.to_particles();
    let forward = advect(&p, field, tau);
    let backward = advect(&p, field, -tau);
    let vf = forward.moment(|x| functional.v(x));
    let vb = backward.moment(|x| functional.v(x));
    Ok((vf - vb) / (T::lit(2.0) * tau))
}

fn advect<T: Real>(p: &ParticleMeasure<T>, field: &(impl VectorField<T> + ?Sized), h: T) -> ParticleMeasure<T> {
    p.pushforward(|x, y| rk4_step(field, x, h, y))
}

/// Checks `|L_{ug} V[mu]| <= K int |u| dmu`.
pub fn diff_bound_check<T: Real>(
    functional: &MomentFunctional<T>,
    u: impl Fn(&[T]) -> T + Send + Sync,
    g_field: &(impl VectorField<T> + ?Sized),
    g_bound: T,
    mu: &Measure<T>,
) -> bool {
    let ug = crate::field::Modulated::new(&u, g_field);
    let lhs = lie_derivative(functional, &ug, mu).abs();
    let l1 = mu.moment(|x| u(x).abs());
    let rhs = functional.k_bound(g_bound) * l1;
    lhs <= rhs + T::epsilon() * T::lit(64.0) * rhs.max(T::one())
}

/// Closed form of `L_f V` for `v = |x - c|^2` and the HK field on an empirical measure:
/// `-sum_ij w_i w_j phi(x_i - x_j) |x_i - x_j|^2` (independent of `c`). For
/// `mu = (delta_x + delta_y) / 2` this is `-phi(x - y) |x - y|^2 / 2`.
pub fn hk_dissipation_closed_form<T: Real>(kernel: &HkKernel<T>, mu: &ParticleMeasure<T>) -> T {
    let mut acc = T::zero();
    for (x, wx) in mu.atoms() {
        for (y, wy) in mu.atoms() {
            let d2: T = x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            acc = acc + wx * wy * kernel.phi(d2.sqrt()) * d2;
        }
    }
    -acc
}

/// The chi-zero set of a scenario, as a finite list of candidate measures.
#[derive(Debug, Clone)]
pub enum TargetSet<T> {
    /// `{delta_x}`.
    Dirac(T),
    Measures(Vec<Measure<T>>),
}

impl<T: Real> TargetSet<T> {
    pub fn measures(&self) -> Vec<Measure<T>> {
        match self {
            TargetSet::Dirac(x) => vec![ParticleMeasure::dirac(&[*x]).into()],
            TargetSet::Measures(v) => v.clone(),
        }
    }
}

/// `inf_{nu in target} W_1(mu, nu)`.
pub fn distance_to_target<T: Real>(mu: &Measure<T>, target: &TargetSet<T>) -> Result<T> {
    match target {
        TargetSet::Dirac(x) => Ok(mu.moment_1d(|y| (y - *x).abs())),
        TargetSet::Measures(list) => {
            if list.is_empty() {
                return Err(Error::param("empty target set"));
            }
            let mut best = T::infinity();
            for nu in list {
                best = best.min(wasserstein_1d(mu, nu, T::one())?);
            }
            Ok(best)
        }
    }
}
