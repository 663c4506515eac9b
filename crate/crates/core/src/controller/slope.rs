//! Evaluation of the signed Lie derivative `L_{U(a,b,eta) g} V[mu]` for many bump parameters.

use crate::controller::bump::{bump_unchecked, BumpParams};
use crate::field::VectorField;
use crate::lyapunov::MomentFunctional;
use crate::measure::Measure;
use crate::scalar::Real;

/// Signed rate `int grad v . (U g) dmu` for a fixed measure, control field and functional.
pub trait SlopeOracle<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn signed(&self, params: &BumpParams<T>) -> T;

    /// Axis-aligned hull `(lo, hi)` of the region where the integrand can be nonzero.
    fn window(&self) -> Option<(Vec<T>, Vec<T>)>;
}

/// Exact 1D evaluator built on cumulative moments of the weighted measure
/// `nu = v'(x) g(x) mu`.
///
/// For a bump `U` with corners `a <= b` and shoulder `eta`,
/// `int U dnu = [P1(a) - P1(a-eta) - (a-eta)(P0(a) - P0(a-eta))] / eta + P0(b) - P0(a)
///            + [(b+eta)(P0(b+eta) - P0(b)) - (P1(b+eta) - P1(b))] / eta`
/// with `P0(x) = nu((-inf, x])` and `P1(x) = int_{(-inf, x]} y dnu(y)`.
/// Grid measures are treated as piecewise constant densities, with `v' g` interpolated
/// linearly inside each cell, so the integrals are exact whenever `v' g` is affine.
pub struct LineSlope<T> {
    repr: LineRepr<T>,
    window: Option<(T, T)>,
}

enum LineRepr<T> {
    Cells {
        x_min: T,
        dx: T,
        rho: Vec<T>,
        alpha: Vec<T>,
        beta: Vec<T>,
        c0: Vec<T>,
        c1: Vec<T>,
    },
    Atoms {
        xs: Vec<T>,
        c0: Vec<T>,
        c1: Vec<T>,
    },
}

impl<T: Real> LineSlope<T> {
    pub fn new(functional: &MomentFunctional<T>, g: &(impl VectorField<T> + ?Sized), mu: &Measure<T>) -> Self {
        match mu {
            Measure::Grid(grid) => {
                let n = grid.n_cells();
                let dx = grid.dx();
                let x_min = grid.x_min();
                let edges: Vec<T> = (0..=n).map(|k| x_min + dx * T::from_usize_lossy(k)).collect();
                let h = crate::field::sample_1d(g, &edges)
                    .into_iter()
                    .zip(&edges)
                    .map(|(gv, &e)| functional.grad_1d(e) * gv)
                    .collect::<Vec<T>>();
                let rho: Vec<T> = grid.masses().iter().map(|&m| m / dx).collect();
                let alpha: Vec<T> = h[..n].to_vec();
                let beta: Vec<T> = (0..n).map(|i| (h[i + 1] - h[i]) / dx).collect();
                let mut c0 = vec![T::zero(); n + 1];
                let mut c1 = vec![T::zero(); n + 1];
                for i in 0..n {
                    let (i0, i1) = cell_partial(edges[i], rho[i], alpha[i], beta[i], dx);
                    c0[i + 1] = c0[i] + i0;
                    c1[i + 1] = c1[i] + i1;
                }
                let floor = T::lit(1e-12);
                let window = grid.support_bounds(floor * grid.total_mass());
                Self {
                    repr: LineRepr::Cells {
                        x_min,
                        dx,
                        rho,
                        alpha,
                        beta,
                        c0,
                        c1,
                    },
                    window,
                }
            }
            Measure::Particles(p) => {
                let mut atoms: Vec<(T, T)> = p
                    .atoms()
                    .filter(|(_, w)| *w > T::zero())
                    .map(|(x, w)| (x[0], w * functional.grad_1d(x[0]) * g.eval_1d(x[0])))
                    .collect();
                atoms.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap_or(std::cmp::Ordering::Equal));
                let mut c0 = Vec::with_capacity(atoms.len() + 1);
                let mut c1 = Vec::with_capacity(atoms.len() + 1);
                c0.push(T::zero());
                c1.push(T::zero());
                for (x, w) in &atoms {
                    c0.push(*c0.last().unwrap() + *w);
                    c1.push(*c1.last().unwrap() + *w * *x);
                }
                let (lo, hi) = p.bounds(0);
                Self {
                    repr: LineRepr::Atoms {
                        xs: atoms.into_iter().map(|a| a.0).collect(),
                        c0,
                        c1,
                    },
                    window: Some((lo, hi)),
                }
            }
        }
    }

    /// `(P0(x), P1(x))`.
    pub fn cumulative(&self, x: T) -> (T, T) {
        match &self.repr {
            LineRepr::Cells {
                x_min,
                dx,
                rho,
                alpha,
                beta,
                c0,
                c1,
            } => {
                let n = rho.len();
                if x <= *x_min {
                    return (T::zero(), T::zero());
                }
                let s = ((x - *x_min) / *dx).floor();
                let i = s.to_usize().unwrap_or(n);
                if i >= n {
                    return (c0[n], c1[n]);
                }
                let e = *x_min + *dx * T::from_usize_lossy(i);
                let (p0, p1) = cell_partial(e, rho[i], alpha[i], beta[i], x - e);
                (c0[i] + p0, c1[i] + p1)
            }
            LineRepr::Atoms { xs, c0, c1 } => {
                let k = xs.partition_point(|&y| y <= x);
                (c0[k], c1[k])
            }
        }
    }

    pub fn signed_1d(&self, a: T, b: T, eta: T) -> T {
        let (p0_al, p1_al) = self.cumulative(a - eta);
        let (p0_a, p1_a) = self.cumulative(a);
        let (p0_b, p1_b) = self.cumulative(b);
        let (p0_br, p1_br) = self.cumulative(b + eta);
        let left = ((p1_a - p1_al) - (a - eta) * (p0_a - p0_al)) / eta;
        let middle = p0_b - p0_a;
        let right = ((b + eta) * (p0_br - p0_b) - (p1_br - p1_b)) / eta;
        left + middle + right
    }
}

/// `int_e^{e+s} rho (alpha + beta (y - e)) dy` and the same with an extra factor `y`.
fn cell_partial<T: Real>(e: T, rho: T, alpha: T, beta: T, s: T) -> (T, T) {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let s2 = s * s;
    let i0 = rho * (alpha * s + beta * s2 / two);
    let i1 = rho * (e * alpha * s + (e * beta + alpha) * s2 / two + beta * s2 * s / three);
    (i0, i1)
}

impl<T: Real> SlopeOracle<T> for LineSlope<T> {
    fn dim(&self) -> usize {
        1
    }

    fn signed(&self, params: &BumpParams<T>) -> T {
        self.signed_1d(params.a()[0], params.b()[0], params.eta())
    }

    fn window(&self) -> Option<(Vec<T>, Vec<T>)> {
        self.window.map(|(lo, hi)| (vec![lo], vec![hi]))
    }
}

/// Direct atom sum `sum_i w_i grad v(x_i) . g(x_i) U(x_i)`, any dimension.
/// Grid measures contribute one atom per cell midpoint.
pub struct DirectSlope<T> {
    dim: usize,
    positions: Vec<T>,
    coeffs: Vec<T>,
}

impl<T: Real> DirectSlope<T> {
    pub fn new(functional: &MomentFunctional<T>, g: &(impl VectorField<T> + ?Sized), mu: &Measure<T>) -> Self {
        let p = mu.to_particles();
        let d = p.dim();
        let mut grad = vec![T::zero(); d];
        let mut gv = vec![T::zero(); d];
        let mut positions = Vec::new();
        let mut coeffs = Vec::new();
        for (x, w) in p.atoms() {
            functional.grad(x, &mut grad);
            g.eval(x, &mut gv);
            let c: T = grad.iter().zip(&gv).map(|(a, b)| *a * *b).sum::<T>() * w;
            positions.extend_from_slice(x);
            coeffs.push(c);
        }
        Self {
            dim: d,
            positions,
            coeffs,
        }
    }
}

impl<T: Real> SlopeOracle<T> for DirectSlope<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn signed(&self, params: &BumpParams<T>) -> T {
        self.positions
            .chunks_exact(self.dim)
            .zip(&self.coeffs)
            .filter(|(x, _)| params.contains_in_omega(x))
            .map(|(x, c)| *c * bump_unchecked(params, x))
            .sum()
    }

    fn window(&self) -> Option<(Vec<T>, Vec<T>)> {
        if self.coeffs.is_empty() {
            return None;
        }
        let mut lo = vec![T::infinity(); self.dim];
        let mut hi = vec![T::neg_infinity(); self.dim];
        for x in self.positions.chunks_exact(self.dim) {
            for k in 0..self.dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        Some((lo, hi))
    }
}

/// Builds the evaluator matching the measure representation.
pub fn slope_oracle<'a, T: Real>(
    functional: &MomentFunctional<T>,
    g: &(impl VectorField<T> + ?Sized),
    mu: &Measure<T>,
) -> Box<dyn SlopeOracle<T> + 'a> {
    if mu.dim() == 1 {
        Box::new(LineSlope::new(functional, g, mu))
    } else {
        Box::new(DirectSlope::new(functional, g, mu))
    }
}

/// `|L_{U(a,b,eta) g[mu]} V[mu]|`.
pub fn slope<T: Real>(
    mu: &Measure<T>,
    g: &(impl VectorField<T> + ?Sized),
    functional: &MomentFunctional<T>,
    params: &BumpParams<T>,
) -> T {
    slope_oracle(functional, g, mu).signed(params).abs()
}
