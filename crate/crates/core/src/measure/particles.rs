use crate::error::{Error, Result};
use crate::measure::grid::mass_tolerance;
use crate::scalar::Real;

/// Weighted empirical measure `sum_i w_i delta_{x_i}` in dimension `dim`.
///
/// Positions are stored flat, `dim` coordinates per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMeasure<T> {
    dim: usize,
    positions: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> ParticleMeasure<T> {
    pub fn new(dim: usize, positions: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if positions.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: positions.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("negative or non-finite weight {w}")));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite position".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > mass_tolerance(weights.len()) {
            return Err(Error::InvalidMeasure(format!("total weight {total} is not 1")));
        }
        Ok(Self {
            dim,
            positions,
            weights,
        })
    }

    /// Equal weights `1/N`.
    pub fn uniform(dim: usize, positions: Vec<T>) -> Result<Self> {
        let n = positions.len() / dim.max(1);
        let w = T::one() / T::from_usize_lossy(n.max(1));
        Self::new(dim, positions, vec![w; n])
    }

    /// One-dimensional atoms with the given (unnormalized) weights.
    pub fn weighted_1d(positions: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidMeasure("zero total weight".into()));
        }
        Self::new(1, positions, weights.into_iter().map(|w| w / total).collect())
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: &[T]) -> Self {
        Self {
            dim: x.len(),
            positions: x.to_vec(),
            weights: vec![T::one()],
        }
    }

    pub(crate) fn from_parts_unchecked(dim: usize, positions: Vec<T>, weights: Vec<T>) -> Self {
        Self {
            dim,
            positions,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn position(&self, i: usize) -> &[T] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.positions
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `sum_i w_i v(x_i)`.
    pub fn moment(&self, mut v: impl FnMut(&[T]) -> T) -> T {
        self.atoms().map(|(x, w)| w * v(x)).sum()
    }

    /// Smallest and largest coordinate along `axis`.
    pub fn bounds(&self, axis: usize) -> (T, T) {
        self.positions
            .iter()
            .skip(axis)
            .step_by(self.dim)
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    /// Moves every atom by `map`; weights are untouched.
    pub fn pushforward(&self, map: impl Fn(&[T], &mut [T])) -> Self {
        let mut positions = vec![T::zero(); self.positions.len()];
        for (src, dst) in self
            .positions
            .chunks_exact(self.dim)
            .zip(positions.chunks_exact_mut(self.dim))
        {
            map(src, dst);
        }
        Self::from_parts_unchecked(self.dim, positions, self.weights.clone())
    }

    pub fn pushforward_1d(&self, map: impl Fn(T) -> T) -> Self {
        self.pushforward(|x, y| y[0] = map(x[0]))
    }

    pub fn translate(&self, shift: &[T]) -> Self {
        self.pushforward(|x, y| {
            for ((yi, xi), si) in y.iter_mut().zip(x).zip(shift) {
                *yi = *xi + *si;
            }
        })
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [T] {
        &mut self.positions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_layouts() {
        assert!(ParticleMeasure::<f64>::new(0, vec![], vec![]).is_err());
        assert!(ParticleMeasure::new(2, vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
        assert!(ParticleMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(ParticleMeasure::new(1, vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(ParticleMeasure::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(ParticleMeasure::<f64>::weighted_1d(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn bounds_per_axis() {
        let p = ParticleMeasure::uniform(2, vec![0.0, 5.0, -1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.bounds(0), (-1.0, 3.0));
        assert_eq!(p.bounds(1), (2.0, 5.0));
        assert_eq!(p.position(1), &[-1.0, 2.0]);
    }

    #[test]
    fn translate_moves_atoms_only() {
        let p = ParticleMeasure::weighted_1d(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let q = p.translate(&[2.0]);
        assert_eq!(q.positions(), &[2.0, 3.0]);
        assert_eq!(q.weights(), &[0.25, 0.75]);
        assert_eq!(q.moment(|x| x[0]), 2.75);
    }
}
