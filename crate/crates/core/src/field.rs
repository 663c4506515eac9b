//! Velocity fields `x -> v(x)` and the combinators used to assemble `f + chi_omega u g`.

use crate::scalar::Real;

pub trait VectorField<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[T], out: &mut [T]);

    /// Scalar value of a one-dimensional field.
    fn eval_1d(&self, x: T) -> T {
        let mut out = [T::zero()];
        self.eval(std::slice::from_ref(&x), &mut out);
        out[0]
    }
}

pub type DynField<'a, T> = Box<dyn VectorField<T> + 'a>;

impl<T: Real, F: VectorField<T> + ?Sized> VectorField<T> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        (**self).eval(x, out)
    }
}

impl<T: Real, F: VectorField<T> + ?Sized> VectorField<T> for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        (**self).eval(x, out)
    }
}

/// Field given by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(&[T], &mut [T]) + Send + Sync> VectorField<T> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        (self.f)(x, out)
    }
}

/// One-dimensional field from a scalar closure.
pub fn field_1d<T: Real>(f: impl Fn(T) -> T + Send + Sync) -> FnField<impl Fn(&[T], &mut [T]) + Send + Sync> {
    FnField::new(1, move |x: &[T], out: &mut [T]| out[0] = f(x[0]))
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroField {
    pub dim: usize,
}

impl<T: Real> VectorField<T> for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
}

/// Pointwise sum of fields of the same dimension.
pub struct SumField<'a, T> {
    dim: usize,
    parts: Vec<DynField<'a, T>>,
}

impl<'a, T: Real> SumField<'a, T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            parts: Vec::new(),
        }
    }

    pub fn with(mut self, part: impl VectorField<T> + 'a) -> Self {
        debug_assert_eq!(part.dim(), self.dim);
        self.parts.push(Box::new(part));
        self
    }
}

impl<T: Real> VectorField<T> for SumField<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut tmp = vec![T::zero(); self.dim];
        for p in &self.parts {
            p.eval(x, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o = *o + *t;
            }
        }
    }
}

/// `x -> weight(x) * inner(x)`; with `weight = chi_omega u` this is the control term `u g`.
pub struct Modulated<W, F> {
    weight: W,
    inner: F,
}

impl<W, F> Modulated<W, F> {
    pub fn new(weight: W, inner: F) -> Self {
        Self { weight, inner }
    }
}

impl<T: Real, W: Fn(&[T]) -> T + Send + Sync, F: VectorField<T>> VectorField<T> for Modulated<W, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        let w = (self.weight)(x);
        if w == T::zero() {
            out.iter_mut().for_each(|o| *o = T::zero());
            return;
        }
        self.inner.eval(x, out);
        out.iter_mut().for_each(|o| *o = *o * w);
    }
}

/// Constant multiple of a field.
pub struct Scaled<T, F> {
    factor: T,
    inner: F,
}

impl<T, F> Scaled<T, F> {
    pub fn new(factor: T, inner: F) -> Self {
        Self { factor, inner }
    }
}

impl<T: Real, F: VectorField<T>> VectorField<T> for Scaled<T, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[T], out: &mut [T]) {
        self.inner.eval(x, out);
        out.iter_mut().for_each(|o| *o = *o * self.factor);
    }
}

/// Evaluates a 1D field at many points, in parallel.
pub fn sample_1d<T: Real>(field: &(impl VectorField<T> + ?Sized), xs: &[T]) -> Vec<T> {
    use rayon::prelude::*;
    xs.par_iter().map(|&x| field.eval_1d(x)).collect()
}
