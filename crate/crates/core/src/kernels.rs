//! Pairwise interaction kernels and the non-local fields `f[mu](x) = int F(x, y) dmu(y)`.

use std::fmt::Debug;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::measure::{Measure, SupportBall};
use crate::scalar::Real;

/// Pairwise rule `F(x, y)` with the constants of the regularity assumptions.
pub trait InteractionKernel<T: Real>: Debug + Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize {
        1
    }

    /// Writes `F(x, y)` into `out`.
    fn rule(&self, x: &[T], y: &[T], out: &mut [T]);

    /// Lipschitz constant of the rule in each argument.
    fn lipschitz(&self) -> T;

    /// Sup-norm bound `M` of the rule.
    fn bound(&self) -> T;

    /// `F(x, y) = 0` whenever `|x - y|` exceeds this radius.
    fn support_radius(&self) -> Option<T> {
        None
    }

    /// Rules independent of both arguments; their field is the constant itself for any probability measure.
    fn constant(&self) -> Option<&[T]> {
        None
    }
}

/// Mollified bounded-confidence weight `phi` of the Hegselmann–Krause model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkKernel<T> {
    epsilon: T,
}

impl<T: Real> HkKernel<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::param(format!("HK mollification width {epsilon} must be positive")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `1` below one, linear ramp to `0` on `[1, 1 + eps]`, `0` beyond.
    pub fn phi(&self, r: T) -> T {
        let r = r.abs();
        if r < T::one() {
            T::one()
        } else if r <= T::one() + self.epsilon {
            -r / self.epsilon + T::one() + T::one() / self.epsilon
        } else {
            T::zero()
        }
    }

    pub fn confidence_radius(&self) -> T {
        T::one() + self.epsilon
    }
}

impl<T: Real> InteractionKernel<T> for HkKernel<T> {
    fn name(&self) -> &str {
        "hk"
    }

    fn rule(&self, x: &[T], y: &[T], out: &mut [T]) {
        let r2: T = x.iter().zip(y).map(|(a, b)| (*b - *a) * (*b - *a)).sum();
        let w = self.phi(r2.sqrt());
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = w * (*b - *a);
        }
    }

    // d/dr [phi(r) r] is bounded by 1 + (1 + eps) / eps on the ramp.
    fn lipschitz(&self) -> T {
        T::one() + (T::one() + self.epsilon) / self.epsilon
    }

    fn bound(&self) -> T {
        T::one() + self.epsilon
    }

    fn support_radius(&self) -> Option<T> {
        Some(self.confidence_radius())
    }
}

/// Constant rule `G(x, y) = value`; `constant_g` is the 1D instance `G = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantKernel<T> {
    value: Vec<T>,
}

impl<T: Real> ConstantKernel<T> {
    pub fn new(value: Vec<T>) -> Self {
        Self { value }
    }

    pub fn unit() -> Self {
        Self::new(vec![T::one()])
    }

    pub fn zero() -> Self {
        Self::new(vec![T::zero()])
    }
}

impl<T: Real> InteractionKernel<T> for ConstantKernel<T> {
    fn name(&self) -> &str {
        "constant_g"
    }

    fn dim(&self) -> usize {
        self.value.len()
    }

    fn rule(&self, _x: &[T], _y: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.value);
    }

    fn lipschitz(&self) -> T {
        T::zero()
    }

    fn bound(&self) -> T {
        self.value.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    fn constant(&self) -> Option<&[T]> {
        Some(&self.value)
    }
}

/// 1D rule `F(x, y) = table(y - x)`, piecewise linear between the tabulated offsets and zero outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel<T> {
    offsets: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TableKernel<T> {
    pub fn new(offsets: Vec<T>, values: Vec<T>) -> Result<Self> {
        if offsets.len() != values.len() || offsets.len() < 2 {
            return Err(Error::param("table kernel needs at least two (r, value) rows"));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("table offsets must be strictly increasing"));
        }
        if values.iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::param("table contains non-finite entries"));
        }
        Ok(Self { offsets, values })
    }

    /// Reads a `r,value` CSV with a header row.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut offsets = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next()) {
                (Some(Ok(r)), Some(Ok(v))) => {
                    offsets.push(T::lit(r));
                    values.push(T::lit(v));
                }
                _ => {
                    return Err(Error::param(format!(
                        "{}:{}: expected `r,value`",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(offsets, values)
    }

    pub fn value_at(&self, r: T) -> T {
        let n = self.offsets.len();
        if r < self.offsets[0] || r > self.offsets[n - 1] {
            return T::zero();
        }
        let k = self.offsets.partition_point(|&o| o <= r).clamp(1, n - 1);
        let (r0, r1) = (self.offsets[k - 1], self.offsets[k]);
        let s = (r - r0) / (r1 - r0);
        self.values[k - 1] + (self.values[k] - self.values[k - 1]) * s
    }
}

impl<T: Real> InteractionKernel<T> for TableKernel<T> {
    fn name(&self) -> &str {
        "custom_table"
    }

    fn rule(&self, x: &[T], y: &[T], out: &mut [T]) {
        out[0] = self.value_at(y[0] - x[0]);
    }

    fn lipschitz(&self) -> T {
        let n = self.offsets.len();
        let inner = (1..n).fold(T::zero(), |acc, k| {
            acc.max(((self.values[k] - self.values[k - 1]) / (self.offsets[k] - self.offsets[k - 1])).abs())
        });
        // Jumps to zero at the table ends are not Lipschitz; report them as an infinite constant.
        if self.values[0] != T::zero() || self.values[n - 1] != T::zero() {
            T::infinity()
        } else {
            inner
        }
    }

    fn bound(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    fn support_radius(&self) -> Option<T> {
        Some(self.offsets[0].abs().max(self.offsets[self.offsets.len() - 1].abs()))
    }
}

/// Atoms of a 1D measure sorted by position, for banded kernel sums.
#[derive(Debug, Clone)]
struct SortedAtoms<T> {
    xs: Vec<T>,
    ws: Vec<T>,
}

/// `x -> int F(x, y) dmu(y)` over a borrowed measure snapshot.
///
/// Grid measures use midpoint quadrature; particle measures give the weighted
/// atom sum. Kernels with a support radius only visit atoms within reach of `x`.
pub struct NonlocalField<'a, T: Real> {
    kernel: &'a dyn InteractionKernel<T>,
    mu: &'a Measure<T>,
    sorted: Option<SortedAtoms<T>>,
}

pub fn nonlocal_field<'a, T: Real>(kernel: &'a dyn InteractionKernel<T>, mu: &'a Measure<T>) -> NonlocalField<'a, T> {
    let sorted = match mu {
        Measure::Particles(p) if p.dim() == 1 && kernel.support_radius().is_some() && kernel.constant().is_none() => {
            let mut atoms: Vec<(T, T)> = p.atoms().map(|(x, w)| (x[0], w)).collect();
            atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let (xs, ws) = atoms.into_iter().unzip();
            Some(SortedAtoms { xs, ws })
        }
        _ => None,
    };
    NonlocalField { kernel, mu, sorted }
}

impl<T: Real> VectorField<T> for NonlocalField<'_, T> {
    fn dim(&self) -> usize {
        self.mu.dim()
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        if let Some(c) = self.kernel.constant() {
            out.copy_from_slice(c);
            return;
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut tmp = vec![T::zero(); out.len()];
        let mut add = |y: &[T], w: T, out: &mut [T]| {
            self.kernel.rule(x, y, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o = *o + w * *t;
            }
        };
        let reach = self.kernel.support_radius();
        match (self.mu, &self.sorted) {
            (Measure::Grid(g), _) => {
                let (lo, hi) = match reach {
                    Some(r) => (g.cell_index(x[0] - r), g.cell_index(x[0] + r)),
                    None => (0, g.n_cells() - 1),
                };
                for i in lo..=hi {
                    let m = g.masses()[i];
                    if m > T::zero() {
                        add(&[g.midpoint(i)], m, out);
                    }
                }
            }
            (Measure::Particles(_), Some(s)) => {
                let r = reach.unwrap_or(T::infinity());
                let lo = s.xs.partition_point(|&y| y < x[0] - r);
                let hi = s.xs.partition_point(|&y| y <= x[0] + r);
                for k in lo..hi {
                    add(&[s.xs[k]], s.ws[k], out);
                }
            }
            (Measure::Particles(p), None) => {
                for (y, w) in p.atoms() {
                    add(y, w, out);
                }
            }
        }
    }
}

/// Multiplies a field by a Lipschitz cutoff: `1` on `B(0, R - taper)`, `0` outside `B(0, R)`, linear in `|x|` between.
pub struct Truncated<F, T> {
    inner: F,
    radius: T,
    taper: T,
}

impl<F, T: Real> Truncated<F, T> {
    pub fn cutoff(&self, x: &[T]) -> T {
        let r: T = x.iter().map(|c| *c * *c).sum::<T>().sqrt();
        if r <= self.radius - self.taper {
            T::one()
        } else if r >= self.radius {
            T::zero()
        } else {
            (self.radius - r) / self.taper
        }
    }
}

pub fn truncate_to_ball<F, T: Real>(field: F, ball: SupportBall<T>, taper: T) -> Result<Truncated<F, T>> {
    if !(taper > T::zero()) || taper >= ball.radius() {
        return Err(Error::param(format!(
            "cutoff taper {taper} must lie in (0, R = {})",
            ball.radius()
        )));
    }
    Ok(Truncated {
        inner: field,
        radius: ball.radius(),
        taper,
    })
}

impl<T: Real, F: VectorField<T>> VectorField<T> for Truncated<F, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        let c = self.cutoff(x);
        if c == T::zero() {
            out.iter_mut().for_each(|o| *o = T::zero());
            return;
        }
        self.inner.eval(x, out);
        if c != T::one() {
            out.iter_mut().for_each(|o| *o = *o * c);
        }
    }
}

/// Largest `|v(x_{i+1}) - v(x_i)| / (x_{i+1} - x_i)` over consecutive sample points,
/// i.e. the centered difference quotient at each midpoint of the sample grid.
pub fn divergence_sup<T: Real>(field: &(impl VectorField<T> + ?Sized), samples: &[T]) -> T {
    let values = crate::field::sample_1d(field, samples);
    divergence_sup_from_values(samples, &values)
}

pub(crate) fn divergence_sup_from_values<T: Real>(samples: &[T], values: &[T]) -> T {
    samples
        .windows(2)
        .zip(values.windows(2))
        .fold(T::zero(), |acc, (x, v)| acc.max(((v[1] - v[0]) / (x[1] - x[0])).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::field_1d;
    use crate::measure::{GridMeasure, ParticleMeasure};
    use approx::assert_abs_diff_eq;

    #[test]
    fn phi_branches() {
        let k = HkKernel::new(0.05).unwrap();
        assert_eq!(k.phi(0.5), 1.0);
        assert_abs_diff_eq!(k.phi(1.05), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.phi(1.025), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(k.phi(1.0), 1.0, epsilon = 1e-12);
        assert_eq!(k.phi(-3.0), 0.0);
        for eps in [0.01, 0.3, 2.0] {
            let k = HkKernel::new(eps).unwrap();
            assert_abs_diff_eq!(k.phi(1.0 + eps), 0.0, epsilon = 1e-12);
        }
        assert!(HkKernel::new(0.0).is_err());
        assert!(HkKernel::new(-1.0).is_err());
    }

    #[test]
    fn hk_field_at_single_atom() {
        let k = HkKernel::new(0.05).unwrap();
        let mu: Measure<f64> = ParticleMeasure::dirac(&[1.0]).into();
        let f = nonlocal_field(&k, &mu);
        assert_abs_diff_eq!(f.eval_1d(0.0), 1.0, epsilon = 1e-15);
        // The atom does not move itself.
        assert_eq!(f.eval_1d(1.0), 0.0);
    }

    #[test]
    fn symmetric_measure_gives_zero_field_at_center() {
        let k = HkKernel::new(0.05).unwrap();
        let mu: Measure<f64> = ParticleMeasure::uniform(1, vec![1.3, 0.6, 2.0, 1.4, 0.7, 2.1]).unwrap().into();
        let f = nonlocal_field(&k, &mu);
        assert_abs_diff_eq!(f.eval_1d(1.35), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_kernel_ignores_measure() {
        let g = ConstantKernel::unit();
        let mu: Measure<f64> = GridMeasure::uniform_on(-1.0, 1.0, 10, -1.0, 1.0).unwrap().into();
        assert_eq!(nonlocal_field(&g, &mu).eval_1d(0.3), 1.0);
    }

    #[test]
    fn truncation_profile() {
        let ball = SupportBall::new(10.0).unwrap();
        let t = truncate_to_ball(field_1d(|_| 2.0), ball, 1.0).unwrap();
        assert_eq!(t.eval_1d(11.0), 0.0);
        assert_eq!(t.eval_1d(-10.5), 0.0);
        assert_eq!(t.eval_1d(8.9), 2.0);
        assert_abs_diff_eq!(t.eval_1d(9.5), 1.0, epsilon = 1e-12);
        assert!(truncate_to_ball(field_1d(|x: f64| x), ball, 10.0).is_err());
        assert!(truncate_to_ball(field_1d(|x: f64| x), ball, 0.0).is_err());
    }

    #[test]
    fn divergence_examples() {
        let xs: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
        assert_eq!(divergence_sup(&field_1d(|_| 3.0), &xs), 0.0);
        assert_abs_diff_eq!(divergence_sup(&field_1d(|x: f64| -x), &xs), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn table_kernel_interpolates_and_vanishes_outside() {
        let t = TableKernel::new(vec![-1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.value_at(0.5), 0.0);
        let t = TableKernel::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(t.value_at(0.25), 0.75, epsilon = 1e-15);
        assert_eq!(t.value_at(1.5), 0.0);
        assert_eq!(t.lipschitz(), 1.0);
        assert_eq!(t.support_radius(), Some(1.0));
        assert!(TableKernel::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn table_kernel_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        std::fs::write(&path, "r,value\n-1,0\n0,0.5\n1,0\n").unwrap();
        let t = TableKernel::<f64>::from_csv(&path).unwrap();
        assert_abs_diff_eq!(t.value_at(-0.5), 0.25, epsilon = 1e-15);
        std::fs::write(&path, "r,value\n-1,zero\n").unwrap();
        assert!(TableKernel::<f64>::from_csv(&path).is_err());
    }
}
