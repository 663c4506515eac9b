//! Grid search with local refinement for the slope maximizer over admissible bumps.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::bump::BumpParams;
use crate::controller::slope::SlopeOracle;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n_a: usize,
    pub n_w: usize,
    pub n_eta: usize,
    /// Local refinement passes around the incumbent.
    pub refine: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_a: 64,
            n_w: 16,
            n_eta: 8,
            refine: 2,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_a < 2 || self.n_w < 2 || self.n_eta < 2 {
            return Err(Error::param("search grid counts must be at least 2"));
        }
        Ok(())
    }
}

/// A scored bump: signed Lie derivative and its absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub params: BumpParams<T>,
    pub field_index: usize,
    pub signed: T,
    pub slope: T,
}

impl<T: Real> Candidate<T> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.params
            .lex_cmp(&other.params)
            .then(self.field_index.cmp(&other.field_index))
    }

    /// Strictly better slope, or a tie (relative 1e-12) broken towards the smaller key.
    pub(crate) fn beats(&self, other: &Self) -> bool {
        let tol = T::lit(1e-12) * self.slope.max(other.slope);
        if self.slope > other.slope + tol {
            true
        } else if self.slope + tol >= other.slope {
            self.key_cmp(other) == Ordering::Less
        } else {
            false
        }
    }
}

fn pick<T: Real>(best: Option<Candidate<T>>, next: Option<Candidate<T>>) -> Option<Candidate<T>> {
    match (best, next) {
        (None, n) => n,
        (b, None) => b,
        (Some(b), Some(n)) => Some(if n.beats(&b) { n } else { b }),
    }
}

fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 || !(hi > lo) {
        return vec![lo];
    }
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * T::from_usize_lossy(k) / last
            }
        })
        .collect()
}

/// Builds `(a, a + w, eta)` with `|omega| <= c` enforced exactly, shrinking `b` against rounding.
fn fit<T: Real>(a: &[T], w: T, eta: T, c: T) -> Option<BumpParams<T>> {
    let w = w.max(T::zero());
    let mut b: Vec<T> = a.iter().map(|&x| x + w).collect();
    for _ in 0..8 {
        let p = BumpParams::new(a.to_vec(), b.clone(), eta).ok()?;
        if p.omega_volume() <= c {
            return Some(p);
        }
        let shrink = T::epsilon() * T::lit(4.0);
        b = a
            .iter()
            .zip(&b)
            .map(|(&l, &r)| (l + (r - l) * (T::one() - shrink) - shrink * l.abs().max(T::one())).max(l))
            .collect();
    }
    None
}

struct Box_<T> {
    a_lo: Vec<T>,
    a_hi: Vec<T>,
    w_lo: T,
    w_hi: T,
    eta_lo: T,
    eta_hi: T,
}

fn scan<T: Real>(
    oracles: &[&dyn SlopeOracle<T>],
    region: &Box_<T>,
    counts: (usize, usize, usize),
    side_max: T,
    c: T,
    window: &Option<(Vec<T>, Vec<T>)>,
) -> Option<Candidate<T>> {
    let d = region.a_lo.len();
    let etas = linspace(region.eta_lo, region.eta_hi, counts.2);
    let mut shapes = Vec::new();
    for &eta in &etas {
        let w_cap = (side_max - eta - eta).min(region.w_hi);
        if w_cap < T::zero() {
            continue;
        }
        for w in linspace(region.w_lo.min(w_cap), w_cap, counts.1) {
            shapes.push((w, eta));
        }
    }
    shapes
        .par_iter()
        .map(|&(w, eta)| {
            // Left corners range so that the bump still touches the support window.
            let (lo, hi): (Vec<T>, Vec<T>) = (0..d)
                .map(|k| {
                    let mut lo = region.a_lo[k];
                    let mut hi = region.a_hi[k];
                    if let Some((wl, wh)) = window {
                        lo = lo.max(wl[k] - w - eta);
                        hi = hi.min(wh[k] + eta);
                    }
                    (lo, hi)
                })
                .unzip();
            if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                return None;
            }
            let axes: Vec<Vec<T>> = (0..d).map(|k| linspace(lo[k], hi[k], counts.0)).collect();
            let mut best: Option<Candidate<T>> = None;
            let mut idx = vec![0usize; d];
            loop {
                let a: Vec<T> = (0..d).map(|k| axes[k][idx[k]]).collect();
                if let Some(params) = fit(&a, w, eta, c) {
                    for (i, oracle) in oracles.iter().enumerate() {
                        let signed = oracle.signed(&params);
                        let cand = Candidate {
                            params: params.clone(),
                            field_index: i,
                            signed,
                            slope: signed.abs(),
                        };
                        best = pick(best, Some(cand));
                    }
                }
                let mut k = 0;
                loop {
                    if k == d {
                        return best;
                    }
                    idx[k] += 1;
                    if idx[k] < axes[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None, pick)
}

/// Best `(a, b, eta, i)` over `{|omega| <= c, eta >= eta_min}`, or `None` if that set is empty.
///
/// Left corners are scanned over the hull of the support widened by the bump, since bumps
/// disjoint from the support have zero slope.
pub fn search_maximizer<T: Real>(
    oracles: &[&dyn SlopeOracle<T>],
    c: T,
    eta_min: T,
    config: &SearchConfig,
) -> Option<Candidate<T>> {
    let d = oracles.first()?.dim();
    let side_max = c.powf(T::one() / T::from_usize_lossy(d));
    let eta_hi = side_max / T::lit(2.0);
    if !(eta_min > T::zero()) || eta_min > eta_hi {
        return None;
    }
    let window = oracles
        .iter()
        .filter_map(|o| o.window())
        .reduce(|(l1, h1), (l2, h2)| {
            (
                l1.iter().zip(&l2).map(|(x, y)| x.min(*y)).collect(),
                h1.iter().zip(&h2).map(|(x, y)| x.max(*y)).collect(),
            )
        });
    let (lo, hi) = match &window {
        Some((lo, hi)) => (
            lo.iter().map(|&x| x - side_max).collect::<Vec<T>>(),
            hi.iter().map(|&x| x + side_max).collect::<Vec<T>>(),
        ),
        None => (vec![T::zero(); d], vec![T::zero(); d]),
    };
    let mut region = Box_ {
        a_lo: lo,
        a_hi: hi,
        w_lo: T::zero(),
        w_hi: side_max - eta_min - eta_min,
        eta_lo: eta_min,
        eta_hi,
    };
    let counts = (config.n_a, config.n_w, config.n_eta);
    let mut best = scan(oracles, &region, counts, side_max, c, &window)?;
    let two = T::lit(2.0);
    let mut steps = (
        region
            .a_lo
            .iter()
            .zip(&region.a_hi)
            .map(|(l, h)| (*h - *l) / T::from_usize_lossy(config.n_a - 1))
            .collect::<Vec<T>>(),
        (region.w_hi - region.w_lo) / T::from_usize_lossy(config.n_w - 1),
        (region.eta_hi - region.eta_lo) / T::from_usize_lossy(config.n_eta - 1),
    );
    for _ in 0..config.refine {
        let p = &best.params;
        let w = p.b()[0] - p.a()[0];
        region = Box_ {
            a_lo: p.a().iter().zip(&steps.0).map(|(a, s)| *a - *s).collect(),
            a_hi: p.a().iter().zip(&steps.0).map(|(a, s)| *a + *s).collect(),
            w_lo: (w - steps.1).max(T::zero()),
            w_hi: w + steps.1,
            eta_lo: (p.eta() - steps.2).max(eta_min),
            eta_hi: (p.eta() + steps.2).min(eta_hi),
        };
        if let Some(local) = scan(oracles, &region, (5, 5, 5), side_max, c, &None) {
            best = pick(Some(best), Some(local)).expect("incumbent present");
        }
        steps = (
            steps.0.iter().map(|s| *s / two).collect(),
            steps.1 / two,
            steps.2 / two,
        );
    }
    Some(best)
}
