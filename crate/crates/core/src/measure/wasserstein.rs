//! Wasserstein distances on the real line via quantile functions.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::measure::{Measure, ParticleMeasure};
use crate::scalar::Real;

/// `W_p(mu, nu)` for one-dimensional measures.
///
/// Both quantile functions are piecewise constant (grid measures contribute one
/// atom per cell midpoint), so `W_p^p = int_0^1 |Q_mu(s) - Q_nu(s)|^p ds` is
/// evaluated exactly on the common refinement of the two quantile partitions.
pub fn wasserstein_1d<T: Real>(mu: &Measure<T>, nu: &Measure<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::param(format!("Wasserstein order {p} must be >= 1")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    if mu.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "quantile Wasserstein distance in dimension {}; use pairing_distance for matched particle layouts",
            mu.dim()
        )));
    }
    let a = sorted_atoms(mu);
    let b = sorted_atoms(nu);
    Ok(quantile_distance(&a, &b, p))
}

fn sorted_atoms<T: Real>(m: &Measure<T>) -> Vec<(T, T)> {
    let mut atoms: Vec<(T, T)> = match m {
        Measure::Grid(g) => (0..g.n_cells())
            .filter(|&i| g.masses()[i] > T::zero())
            .map(|i| (g.midpoint(i), g.masses()[i]))
            .collect(),
        Measure::Particles(pm) => pm
            .atoms()
            .filter(|(_, w)| *w > T::zero())
            .map(|(x, w)| (x[0], w))
            .collect(),
    };
    atoms.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap_or(Ordering::Equal));
    atoms
}

fn cost<T: Real>(d: T, p: T) -> T {
    let d = d.abs();
    if p == T::one() {
        d
    } else if p == T::lit(2.0) {
        d * d
    } else {
        d.powf(p)
    }
}

fn quantile_distance<T: Real>(a: &[(T, T)], b: &[(T, T)], p: T) -> T {
    if a.is_empty() || b.is_empty() {
        return T::zero();
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = T::zero();
    loop {
        let step = ra.min(rb);
        acc = acc + step * cost(a[i].0 - b[j].0, p);
        ra = ra - step;
        rb = rb - step;
        if ra <= rb {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        } else {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    if p == T::one() {
        acc
    } else {
        acc.powf(T::one() / p)
    }
}

/// Cost of the index coupling `x_i <-> y_i` between two particle measures with identical weights:
/// `(sum_i w_i |x_i - y_i|^p)^(1/p)`, an upper bound on `W_p` in any dimension.
pub fn pairing_distance<T: Real>(mu: &ParticleMeasure<T>, nu: &ParticleMeasure<T>, p: T) -> Result<T> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    if mu.weights() != nu.weights() {
        return Err(Error::Unsupported(
            "pairing distance needs identical weight layouts".into(),
        ));
    }
    let acc: T = mu
        .atoms()
        .zip(nu.atoms())
        .map(|((x, w), (y, _))| {
            let d2: T = x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            w * cost(d2.sqrt(), p)
        })
        .sum();
    Ok(acc.powf(T::one() / p))
}
