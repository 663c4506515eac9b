//! Compactly supported probability measures: grid (finite-volume) and particle representations.

mod grid;
mod particles;
mod wasserstein;

use std::io::Write;

pub use grid::GridMeasure;
pub use particles::ParticleMeasure;
pub use wasserstein::{pairing_distance, wasserstein_1d};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Closed ball `B(0, R)` outside of which all dynamics vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBall<T> {
    radius: T,
}

impl<T: Real> SupportBall<T> {
    pub fn new(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::param(format!("support radius {radius} must be positive")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn contains(&self, x: &[T], slack: T) -> bool {
        let r2: T = x.iter().map(|&c| c * c).sum();
        r2.sqrt() <= self.radius + slack
    }
}

/// Either representation of a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure<T> {
    Grid(GridMeasure<T>),
    Particles(ParticleMeasure<T>),
}

impl<T: Real> From<GridMeasure<T>> for Measure<T> {
    fn from(g: GridMeasure<T>) -> Self {
        Measure::Grid(g)
    }
}

impl<T: Real> From<ParticleMeasure<T>> for Measure<T> {
    fn from(p: ParticleMeasure<T>) -> Self {
        Measure::Particles(p)
    }
}

impl<T: Real> Measure<T> {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Grid(_) => 1,
            Measure::Particles(p) => p.dim(),
        }
    }

    pub fn total_mass(&self) -> T {
        match self {
            Measure::Grid(g) => g.total_mass(),
            Measure::Particles(p) => p.total_mass(),
        }
    }

    /// `int v dmu`; midpoint quadrature on grids, exact sums on particles.
    pub fn moment(&self, mut v: impl FnMut(&[T]) -> T) -> T {
        match self {
            Measure::Grid(g) => g.moment(|x| v(&[x])),
            Measure::Particles(p) => p.moment(v),
        }
    }

    pub fn moment_1d(&self, mut v: impl FnMut(T) -> T) -> T {
        self.moment(|x| v(x[0]))
    }

    /// Smallest and largest occupied coordinate along the first axis.
    /// Grid measures report the edges of the outermost cells with mass above `floor`.
    pub fn support_bounds(&self, floor: T) -> Option<(T, T)> {
        match self {
            Measure::Grid(g) => g.support_bounds(floor),
            Measure::Particles(p) => {
                let (lo, hi) = p.bounds(0);
                lo.is_finite().then_some((lo, hi))
            }
        }
    }

    /// One atom per grid cell midpoint (zero-mass cells dropped); particle measures are cloned.
    pub fn to_particles(&self) -> ParticleMeasure<T> {
        match self {
            Measure::Grid(g) => {
                let (xs, ws): (Vec<T>, Vec<T>) = (0..g.n_cells())
                    .filter(|&i| g.masses()[i] > T::zero())
                    .map(|i| (g.midpoint(i), g.masses()[i]))
                    .unzip();
                ParticleMeasure::from_parts_unchecked(1, xs, ws)
            }
            Measure::Particles(p) => p.clone(),
        }
    }

    pub fn as_grid(&self) -> Option<&GridMeasure<T>> {
        match self {
            Measure::Grid(g) => Some(g),
            Measure::Particles(_) => None,
        }
    }

    pub fn as_particles(&self) -> Option<&ParticleMeasure<T>> {
        match self {
            Measure::Particles(p) => Some(p),
            Measure::Grid(_) => None,
        }
    }

    /// Snapshot CSV: `x,density` for grids, `x,weight` (or `x1,..,xd,weight`) for particles.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match self {
            Measure::Grid(g) => {
                writeln!(out, "x,density")?;
                for i in 0..g.n_cells() {
                    writeln!(out, "{},{}", g.midpoint(i), g.density(i))?;
                }
            }
            Measure::Particles(p) => {
                if p.dim() == 1 {
                    writeln!(out, "x,weight")?;
                } else {
                    let cols: Vec<String> = (1..=p.dim()).map(|k| format!("x{k}")).collect();
                    writeln!(out, "{},weight", cols.join(","))?;
                }
                for (x, w) in p.atoms() {
                    for c in x {
                        write!(out, "{c},")?;
                    }
                    writeln!(out, "{w}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn half_indicator(n: usize) -> GridMeasure<f64> {
        GridMeasure::uniform_on(-1.0, 1.0, n, -1.0, 1.0).unwrap()
    }

    #[test]
    fn total_mass_examples() {
        assert_abs_diff_eq!(half_indicator(400).total_mass(), 1.0, epsilon = 1e-12);
        assert_eq!(ParticleMeasure::dirac(&[0.3]).total_mass(), 1.0);
        let two = ParticleMeasure::uniform(1, vec![0.0, 1.0]).unwrap();
        assert_eq!(two.total_mass(), 1.0);
    }

    #[test]
    fn moment_examples() {
        let sq = |x: &[f64]| x[0] * x[0];
        assert_eq!(Measure::from(ParticleMeasure::dirac(&[0.0])).moment(sq), 0.0);
        let pair = ParticleMeasure::uniform(1, vec![0.5, -0.5]).unwrap();
        assert_abs_diff_eq!(pair.moment(sq), 0.25, epsilon = 1e-15);
        // Midpoint rule on x^2: error dx^2/12 exactly.
        let g = half_indicator(400);
        let dx = g.dx();
        assert_abs_diff_eq!(g.moment(|x| x * x), 1.0 / 3.0 - dx * dx / 12.0, epsilon = 1e-13);
    }

    #[test]
    fn sup_norm_examples() {
        assert_abs_diff_eq!(half_indicator(400).sup_norm(), 0.5, epsilon = 1e-12);
        let unit = GridMeasure::uniform_on(0.0, 1.0, 50, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(unit.sup_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(GridMeasure::new(0.0, 1.0, vec![0.5, 0.6]).is_err());
        assert!(GridMeasure::new(0.0, 1.0, vec![1.5, -0.5]).is_err());
        assert!(GridMeasure::new(1.0, 0.0, vec![1.0]).is_err());
        assert!(GridMeasure::<f64>::new(0.0, 1.0, vec![]).is_err());
        assert!(ParticleMeasure::new(1, vec![0.0], vec![0.9]).is_err());
        assert!(ParticleMeasure::new(2, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn pushforward_identity_and_collapse() {
        let g = GridMeasure::uniform_on(-2.0, 2.0, 40, -1.0, 1.0).unwrap();
        assert_eq!(g.pushforward(|x| x), g);
        let collapsed = g.pushforward(|_| 0.0);
        let k = collapsed.cell_index(0.0);
        assert_abs_diff_eq!(collapsed.masses()[k], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(collapsed.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pushforward_non_monotone_conserves_mass() {
        let g = GridMeasure::uniform_on(-2.0, 2.0, 64, -1.0, 1.0).unwrap();
        let folded = g.pushforward(|x: f64| x.abs());
        assert_abs_diff_eq!(folded.total_mass(), 1.0, epsilon = 1e-12);
        assert!(folded.masses().iter().all(|&m| m >= 0.0));
        let (lo, _) = folded.support_bounds(0.0).unwrap();
        assert!(lo >= -1e-12);
    }

    #[test]
    fn grid_translation_preserves_w1() {
        let g = GridMeasure::uniform_on(-3.0, 3.0, 120, -1.0, 0.5).unwrap();
        let shifted = Measure::from(g.translate(0.37));
        let d = wasserstein_1d(&Measure::from(g.clone()), &shifted, 1.0).unwrap();
        assert_abs_diff_eq!(d, 0.37, epsilon = 1e-12);
    }

    #[test]
    fn wasserstein_trivial_examples() {
        let a: Measure<f64> = ParticleMeasure::dirac(&[0.0]).into();
        let b: Measure<f64> = ParticleMeasure::dirac(&[1.0]).into();
        assert_eq!(wasserstein_1d(&a, &b, 1.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&a, &a, 2.0).unwrap(), 0.0);
        let g: Measure<f64> = half_indicator(100).into();
        assert_eq!(wasserstein_1d(&g, &g, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_errors() {
        let a: Measure<f64> = ParticleMeasure::dirac(&[0.0]).into();
        let b: Measure<f64> = ParticleMeasure::dirac(&[1.0, 2.0]).into();
        assert!(matches!(
            wasserstein_1d(&a, &b, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            wasserstein_1d(&b, &b, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(wasserstein_1d(&a, &a, 0.5).is_err());
    }

    #[test]
    fn pairing_distance_matches_translation() {
        let mu = ParticleMeasure::uniform(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let nu = mu.translate(&[3.0, 4.0]);
        assert_abs_diff_eq!(pairing_distance(&mu, &nu, 2.0).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let g = GridMeasure::<f32>::uniform_on(-1.0, 1.0, 100, -1.0, 1.0).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-5);
        assert!((g.sup_norm() - 0.5).abs() < 1e-5);
    }

    #[test]
    fn snapshot_csv_headers() {
        let mut buf = Vec::new();
        Measure::from(half_indicator(4)).write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,density\n"));
        let mut buf = Vec::new();
        Measure::from(ParticleMeasure::dirac(&[1.0, 2.0])).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2,weight\n1,2,1\n");
    }
}
