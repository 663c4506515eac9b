use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mollified indicator of `[a, b]`: `1` on `[a, b]`, `0` outside `[a - eta, b + eta]`,
/// linear on the two shoulders.
pub fn bump_1d<T: Real>(a: T, b: T, eta: T, x: T) -> T {
    if x >= a && x <= b {
        T::one()
    } else if x < a - eta || x > b + eta {
        T::zero()
    } else if x < a {
        (x - a + eta) / eta
    } else {
        (-x + b + eta) / eta
    }
}

/// Box corners `a <= b` and shoulder width `eta` of a control bump.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpParams<T> {
    a: Vec<T>,
    b: Vec<T>,
    eta: T,
}

impl<T: Real> BumpParams<T> {
    pub fn new(a: Vec<T>, b: Vec<T>, eta: T) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::param("bump needs at least one dimension"));
        }
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::param(format!("bump width {eta} must be positive")));
        }
        if a.iter().zip(&b).any(|(l, r)| !(l <= r) || !l.is_finite() || !r.is_finite()) {
            return Err(Error::param("bump corners must satisfy a <= b componentwise"));
        }
        Ok(Self { a, b, eta })
    }

    pub fn new_1d(a: T, b: T, eta: T) -> Result<Self> {
        Self::new(vec![a], vec![b], eta)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// Lebesgue measure of `omega = prod [a_i - eta, b_i + eta]`.
    pub fn omega_volume(&self) -> T {
        self.a
            .iter()
            .zip(&self.b)
            .fold(T::one(), |acc, (l, r)| acc * ((*r - *l) + self.eta + self.eta))
    }

    /// `Lip(u) = 1 / eta`.
    pub fn lipschitz(&self) -> T {
        T::one() / self.eta
    }

    pub fn contains_in_omega(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.a.iter().zip(&self.b))
            .all(|(xi, (l, r))| *xi >= *l - self.eta && *xi <= *r + self.eta)
    }

    /// Lexicographic key `(a, b, eta)` for tie-breaking.
    pub(crate) fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |p: &Self| {
            p.a.iter()
                .chain(&p.b)
                .chain(std::iter::once(&p.eta))
                .copied()
                .collect::<Vec<T>>()
        };
        key(self)
            .partial_cmp(&key(other))
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// `min_i bump_1d(a_i, b_i, eta, x_i)`.
pub fn bump_nd<T: Real>(params: &BumpParams<T>, x: &[T]) -> Result<T> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    Ok(bump_unchecked(params, x))
}

pub(crate) fn bump_unchecked<T: Real>(params: &BumpParams<T>, x: &[T]) -> T {
    x.iter()
        .zip(params.a.iter().zip(&params.b))
        .fold(T::one(), |acc, (xi, (l, r))| acc.min(bump_1d(*l, *r, params.eta, *xi)))
}

/// An emitted control `u = sign * bump(params)` acting through the control field `field_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveControl<T> {
    pub params: BumpParams<T>,
    /// `-1` or `+1`.
    pub sign: i8,
    pub field_index: usize,
}

impl<T: Real> ActiveControl<T> {
    pub fn u(&self, x: &[T]) -> T {
        T::from_i8(self.sign).unwrap_or_else(T::zero) * bump_unchecked(&self.params, x)
    }

    /// `sup |u|`, attained on the box `[a, b]`.
    pub fn sup_norm(&self) -> T {
        if self.sign == 0 {
            T::zero()
        } else {
            T::one()
        }
    }
}

/// Control function `u(x) = sign * chi^eta_[a,b](x)` and its support box `omega`.
pub fn control_function<T: Real>(params: BumpParams<T>, sign: i8) -> Result<ActiveControl<T>> {
    if sign != 1 && sign != -1 {
        return Err(Error::param(format!("control sign must be +-1, got {sign}")));
    }
    Ok(ActiveControl {
        params,
        sign,
        field_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bump_1d_examples() {
        assert_eq!(bump_1d(0.0, 1.0, 0.5, 0.5), 1.0);
        assert_abs_diff_eq!(bump_1d(0.0, 1.0, 0.5, -0.25), 0.5, epsilon = 1e-15);
        assert_eq!(bump_1d(0.0, 1.0, 0.5, 2.0), 0.0);
        assert_abs_diff_eq!(bump_1d(0.0, 1.0, 0.5, 1.25), 0.5, epsilon = 1e-15);
        assert_eq!(bump_1d(0.0, 1.0, 0.5, 1.5), 0.0);
    }

    #[test]
    fn bump_nd_examples() {
        let p = BumpParams::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5).unwrap();
        assert_abs_diff_eq!(bump_nd(&p, &[0.5, -0.25]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(bump_nd(&p, &[0.2, 0.9]).unwrap(), 1.0);
        assert_eq!(bump_nd(&p, &[0.2, 1.6]).unwrap(), 0.0);
        assert!(bump_nd(&p, &[0.2]).is_err());
    }

    #[test]
    fn control_function_examples() {
        let p = BumpParams::new_1d(0.0, 0.5, 0.25).unwrap();
        assert_eq!(p.omega_volume(), 1.0);
        let q = BumpParams::new_1d(0.0, 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(q.lipschitz(), 10.0, epsilon = 1e-12);
        let plus = control_function(p.clone(), 1).unwrap();
        let minus = control_function(p, -1).unwrap();
        for k in 0..40 {
            let x = -0.5 + 0.04 * k as f64;
            assert_eq!(plus.u(&[x]), -minus.u(&[x]));
            assert!(plus.u(&[x]).abs() <= 1.0);
        }
        assert!(control_function(q, 0).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BumpParams::new_1d(1.0, 0.0, 0.1).is_err());
        assert!(BumpParams::new_1d(0.0, 1.0, 0.0).is_err());
        assert!(BumpParams::new(vec![0.0], vec![1.0, 2.0], 0.1).is_err());
    }
}
