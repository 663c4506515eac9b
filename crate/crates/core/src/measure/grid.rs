use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cell masses on a uniform 1D grid covering `[x_min, x_max]`.
///
/// The density is piecewise constant: cell `i` carries `cell_mass[i]` spread
/// uniformly over `[x_min + i dx, x_min + (i + 1) dx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure<T> {
    x_min: T,
    x_max: T,
    cell_mass: Vec<T>,
}

/// Tolerance on `|sum(mass) - 1|` accepted when constructing a probability measure.
pub(crate) fn mass_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(n.max(1)) * T::lit(4.0))
}

impl<T: Real> GridMeasure<T> {
    /// Validated constructor: masses must be nonnegative and sum to one.
    pub fn new(x_min: T, x_max: T, cell_mass: Vec<T>) -> Result<Self> {
        let g = Self::new_unnormalized(x_min, x_max, cell_mass)?;
        let total = g.total_mass();
        if (total - T::one()).abs() > mass_tolerance(g.n_cells()) {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not 1")));
        }
        Ok(g)
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(x_min: T, x_max: T, weights: Vec<T>) -> Result<Self> {
        let g = Self::new_unnormalized(x_min, x_max, weights)?;
        let total = g.total_mass();
        if total <= T::zero() {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        let cell_mass = g.cell_mass.iter().map(|&m| m / total).collect();
        Ok(Self { cell_mass, ..g })
    }

    fn new_unnormalized(x_min: T, x_max: T, cell_mass: Vec<T>) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidMeasure(format!(
                "grid bounds [{x_min}, {x_max}] must be finite and increasing"
            )));
        }
        if cell_mass.is_empty() {
            return Err(Error::InvalidMeasure("grid needs at least one cell".into()));
        }
        if let Some(m) = cell_mass.iter().find(|m| !(**m >= T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidMeasure(format!("negative or non-finite cell mass {m}")));
        }
        Ok(Self {
            x_min,
            x_max,
            cell_mass,
        })
    }

    /// Used by the solver, whose update preserves the invariants by construction.
    pub(crate) fn from_parts_unchecked(x_min: T, x_max: T, cell_mass: Vec<T>) -> Self {
        Self {
            x_min,
            x_max,
            cell_mass,
        }
    }

    /// Normalized indicator of `[lo, hi]`, with exact overlap fractions in the partially covered cells.
    pub fn uniform_on(x_min: T, x_max: T, n_cells: usize, lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param(format!("empty interval [{lo}, {hi}]")));
        }
        let dx = (x_max - x_min) / T::from_usize_lossy(n_cells.max(1));
        let weights = (0..n_cells)
            .map(|i| {
                let left = x_min + dx * T::from_usize_lossy(i);
                let right = left + dx;
                (right.min(hi) - left.max(lo)).max(T::zero())
            })
            .collect();
        Self::normalized(x_min, x_max, weights)
    }

    /// Cell masses `density(midpoint) * dx`, renormalized.
    pub fn from_density(x_min: T, x_max: T, n_cells: usize, density: impl Fn(T) -> T) -> Result<Self> {
        let dx = (x_max - x_min) / T::from_usize_lossy(n_cells.max(1));
        let weights = (0..n_cells)
            .map(|i| density(x_min + dx * (T::from_usize_lossy(i) + T::lit(0.5))) * dx)
            .collect();
        Self::normalized(x_min, x_max, weights)
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.cell_mass.len()
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_lossy(self.n_cells())
    }

    pub fn masses(&self) -> &[T] {
        &self.cell_mass
    }

    /// Left edge of cell `k` (`k == n_cells` gives `x_max`).
    pub fn edge(&self, k: usize) -> T {
        if k == self.n_cells() {
            self.x_max
        } else {
            self.x_min + self.dx() * T::from_usize_lossy(k)
        }
    }

    pub fn midpoint(&self, i: usize) -> T {
        self.x_min + self.dx() * (T::from_usize_lossy(i) + T::lit(0.5))
    }

    pub fn density(&self, i: usize) -> T {
        self.cell_mass[i] / self.dx()
    }

    pub fn densities(&self) -> Vec<T> {
        let dx = self.dx();
        self.cell_mass.iter().map(|&m| m / dx).collect()
    }

    pub fn total_mass(&self) -> T {
        self.cell_mass.iter().copied().sum()
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_index(&self, x: T) -> usize {
        let n = self.n_cells();
        let s = ((x - self.x_min) / self.dx()).floor();
        if !(s > T::zero()) {
            0
        } else {
            s.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }

    /// Midpoint quadrature of `v` against the measure.
    pub fn moment(&self, mut v: impl FnMut(T) -> T) -> T {
        self.cell_mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > T::zero())
            .map(|(i, &m)| m * v(self.midpoint(i)))
            .sum()
    }

    /// Largest cell density `cell_mass / dx`.
    pub fn sup_norm(&self) -> T {
        self.cell_mass
            .iter()
            .fold(T::zero(), |acc, &m| acc.max(m))
            / self.dx()
    }

    /// Edges enclosing all cells with mass above `floor`, or `None` for an empty selection.
    pub fn support_bounds(&self, floor: T) -> Option<(T, T)> {
        let first = self.cell_mass.iter().position(|&m| m > floor)?;
        let last = self.cell_mass.iter().rposition(|&m| m > floor)?;
        Some((self.edge(first), self.edge(last + 1)))
    }

    /// Pushes the measure forward by `map`.
    ///
    /// When the map is monotone on the cell edges each cell's mass is spread
    /// uniformly over the image of the cell; otherwise every cell is split into
    /// sub-atoms which are mapped and binned individually. Images falling outside
    /// the grid are clamped into the boundary cells.
    pub fn pushforward(&self, map: impl Fn(T) -> T) -> Self {
        let n = self.n_cells();
        let images: Vec<T> = (0..=n).map(|k| map(self.edge(k))).collect();
        let nondecreasing = images.windows(2).all(|w| w[1] >= w[0]);
        let nonincreasing = images.windows(2).all(|w| w[1] <= w[0]);
        let mut out = vec![T::zero(); n];
        if nondecreasing || nonincreasing {
            for i in 0..n {
                let (lo, hi) = if images[i] <= images[i + 1] {
                    (images[i], images[i + 1])
                } else {
                    (images[i + 1], images[i])
                };
                self.deposit_interval(&mut out, self.cell_mass[i], lo, hi);
            }
        } else {
            const SUB: usize = 16;
            let dx = self.dx();
            let frac = T::one() / T::from_usize_lossy(SUB);
            for i in 0..n {
                let m = self.cell_mass[i] * frac;
                for s in 0..SUB {
                    let x = self.edge(i) + dx * frac * (T::from_usize_lossy(s) + T::lit(0.5));
                    out[self.cell_index(map(x))] = out[self.cell_index(map(x))] + m;
                }
            }
        }
        Self::from_parts_unchecked(self.x_min, self.x_max, out)
    }

    /// Translation by `shift` (a pushforward by `x + shift`).
    pub fn translate(&self, shift: T) -> Self {
        self.pushforward(|x| x + shift)
    }

    fn deposit_interval(&self, out: &mut [T], mass: T, lo: T, hi: T) {
        if mass == T::zero() {
            return;
        }
        let lo = lo.max(self.x_min).min(self.x_max);
        let hi = hi.max(self.x_min).min(self.x_max);
        let len = hi - lo;
        if len <= self.dx() * T::lit(1e-12) {
            let k = self.cell_index(lo);
            out[k] = out[k] + mass;
            return;
        }
        let first = self.cell_index(lo);
        let mut last = self.cell_index(hi);
        if last > first && hi <= self.edge(last) {
            last -= 1;
        }
        let mut assigned = T::zero();
        for k in first..last {
            let overlap = self.edge(k + 1).min(hi) - self.edge(k).max(lo);
            let part = mass * overlap.max(T::zero()) / len;
            out[k] = out[k] + part;
            assigned = assigned + part;
        }
        out[last] = out[last] + (mass - assigned);
    }
}
