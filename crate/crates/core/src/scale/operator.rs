//! k-bounded linear operators and the measured constant `N(u)`.
//!
//! For a linear `u` between scaled spaces,
//!
//! ```text
//! N(u) = sup_{s, sigma, x} sigma^k |u(x)|_s / |x|_{s+sigma}.
//! ```
//!
//! The norms here are weighted l1, so for fixed `(s, sigma)` the supremum over
//! `x` is attained on the coefficient basis and the grid supremum is exact.
//! Ratios are formed in log space: Fourier weights overflow doubles long
//! before the ratios do.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::series::{ScaleIndex, ScaledSeries, SeriesKind};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng;

/// Relative defect tolerated by the randomized linearity check.
pub const LINEARITY_TOLERANCE: f64 = 1e-12;

pub trait LinearOperator: Sync {
    fn domain_kind(&self) -> SeriesKind;

    fn domain_order(&self) -> usize;

    /// Basis indices spanning the domain. Defaults to every coefficient slot.
    fn basis(&self) -> Vec<isize> {
        ScaledSeries::zeros(self.domain_kind(), self.domain_order()).indices().collect()
    }

    fn apply(&self, x: &ScaledSeries) -> Result<ScaledSeries>;
}

/// Adapts a closure into a [`LinearOperator`] over the full coefficient basis.
pub struct FnOperator<F> {
    kind: SeriesKind,
    order: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&ScaledSeries) -> Result<ScaledSeries> + Sync,
{
    pub fn new(kind: SeriesKind, order: usize, f: F) -> Self {
        FnOperator { kind, order, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&ScaledSeries) -> Result<ScaledSeries> + Sync,
{
    fn domain_kind(&self) -> SeriesKind {
        self.kind
    }

    fn domain_order(&self) -> usize {
        self.order
    }

    fn apply(&self, x: &ScaledSeries) -> Result<ScaledSeries> {
        (self.f)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub s: f64,
    pub sigma: f64,
}

/// Sample pairs `(s, sigma)` with `0 < s`, `sigma > 0` and `s + sigma < 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleGrid {
    points: Vec<GridPoint>,
}

impl ScaleGrid {
    pub fn new(points: Vec<GridPoint>) -> Result<Self> {
        let ok = !points.is_empty()
            && points.iter().all(|p| {
                p.s > 0.0 && p.sigma > 0.0 && p.s + p.sigma < 1.0 && p.s.is_finite() && p.sigma.is_finite()
            });
        if ok {
            Ok(ScaleGrid { points })
        } else {
            Err(Error::InvalidGrid)
        }
    }

    /// Every pair of the Cartesian product with `s + reach * sigma < 1`.
    pub fn product(scales: &[f64], sigmas: &[f64], reach: f64) -> Result<Self> {
        let points = scales
            .iter()
            .flat_map(|&s| sigmas.iter().map(move |&sigma| GridPoint { s, sigma }))
            .filter(|p| p.s + reach * p.sigma < 1.0)
            .collect();
        ScaleGrid::new(points)
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn refined(&self, extra: &[GridPoint]) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend_from_slice(extra);
        ScaleGrid::new(points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundedOperatorEstimate {
    pub k: u32,
    pub norm: f64,
    /// `(s, sigma, basis index)` where the supremum was attained.
    pub argmax: (f64, f64, isize),
    pub grid: Vec<GridPoint>,
}

/// Checks `u(a x + b y) = a u(x) + b u(y)` on random pairs, returning the
/// largest relative defect, or [`Error::NotLinear`] above [`LINEARITY_TOLERANCE`].
pub fn verify_linearity<U: LinearOperator + ?Sized>(u: &U, pairs: usize, seed: u64, s: ScaleIndex) -> Result<f64> {
    let mut rng = rng::seeded(seed);
    let basis = u.basis();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = random_in_span(&mut rng, u, &basis);
        let y = random_in_span(&mut rng, u, &basis);
        let a = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let b = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let ux = u.apply(&x)?;
        let uy = u.apply(&y)?;
        let combined = u.apply(&(&x.scale_by(a) + &y.scale_by(b)))?;
        let expected = &ux.scale_by(a) + &uy.scale_by(b);
        let scale = a.norm() * ux.norm(s) + b.norm() * uy.norm(s);
        let defect = (&combined - &expected).norm(s);
        if scale > 0.0 {
            worst = worst.max(defect / scale);
        } else if defect > 0.0 {
            worst = f64::INFINITY;
        }
    }
    if worst > LINEARITY_TOLERANCE {
        return Err(Error::NotLinear { defect: worst });
    }
    Ok(worst)
}

fn random_in_span<U: LinearOperator + ?Sized>(rng: &mut impl Rng, u: &U, basis: &[isize]) -> ScaledSeries {
    let mut x = ScaledSeries::zeros(u.domain_kind(), u.domain_order());
    for &m in basis {
        x.set(m, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    x
}

/// Measures `N(u)` for loss exponent `k` over `grid`.
pub fn measure_operator_norm<U: LinearOperator + ?Sized>(
    u: &U,
    k: u32,
    grid: &ScaleGrid,
    exec: Execution,
) -> Result<BoundedOperatorEstimate> {
    let mut all = measure_operator_norms(u, &[k], grid, exec)?;
    Ok(all.remove(0))
}

/// Measures `N(u)` for several loss exponents at once; the image of each basis
/// vector is computed a single time and reused for every `k`.
pub fn measure_operator_norms<U: LinearOperator + ?Sized>(
    u: &U,
    ks: &[u32],
    grid: &ScaleGrid,
    exec: Execution,
) -> Result<Vec<BoundedOperatorEstimate>> {
    let probe = ScaleIndex::new(grid.points()[0].s)?;
    verify_linearity(u, 8, 0x6b62_6f75_6e64, probe)?;
    let kind = u.domain_kind();
    let order = u.domain_order();
    let basis = u.basis();
    // log sigma^k |u(e_m)|_s - log |e_m|_{s+sigma}, maximized per k.
    let per_basis: Vec<Result<Vec<(f64, GridPoint, isize)>>> = exec.map(&basis, |&m| {
        let image = u.apply(&ScaledSeries::basis(kind, order, m))?;
        let mut best = vec![(f64::NEG_INFINITY, grid.points()[0], m); ks.len()];
        for &p in grid.points() {
            let ratio = image.log_norm(ScaleIndex::new(p.s)?) - ScaledSeries::log_weight(kind, m, p.s + p.sigma);
            for (slot, &k) in best.iter_mut().zip(ks) {
                let v = k as f64 * p.sigma.ln() + ratio;
                if v > slot.0 {
                    *slot = (v, p, m);
                }
            }
        }
        Ok(best)
    });
    let mut best = vec![(f64::NEG_INFINITY, grid.points()[0], 0isize); ks.len()];
    for row in per_basis {
        for (slot, cand) in best.iter_mut().zip(row?) {
            if cand.0 > slot.0 {
                *slot = cand;
            }
        }
    }
    Ok(ks
        .iter()
        .zip(best)
        .map(|(&k, (log_n, p, m))| BoundedOperatorEstimate {
            k,
            norm: log_n.exp(),
            argmax: (p.s, p.sigma, m),
            grid: grid.points().to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(scales: &[f64], sigmas: &[f64]) -> ScaleGrid {
        ScaleGrid::product(scales, sigmas, 1.0).unwrap()
    }

    fn identity_op(order: usize) -> impl LinearOperator {
        FnOperator::new(SeriesKind::Taylor, order, |x: &ScaledSeries| Ok(x.clone()))
    }

    #[test]
    fn grid_validation() {
        assert!(ScaleGrid::new(vec![]).is_err());
        assert!(ScaleGrid::new(vec![GridPoint { s: 0.7, sigma: 0.3 }]).is_err());
        let g = ScaleGrid::product(&[0.2, 0.9], &[0.05, 0.2], 2.0).unwrap();
        assert_eq!(g.points().len(), 2);
    }

    #[test]
    fn identity_and_negation_have_unit_norm() {
        let g = grid(&[0.2, 0.5, 0.8], &[0.05, 0.1]);
        let id = measure_operator_norm(&identity_op(12), 0, &g, Execution::Sequential).unwrap();
        assert!((id.norm - 1.0).abs() < 1e-15);
        assert_eq!(id.argmax.2, 0);
        let neg = FnOperator::new(SeriesKind::Taylor, 12, |x: &ScaledSeries| Ok(-x));
        let n = measure_operator_norm(&neg, 0, &g, Execution::Parallel).unwrap();
        assert!((n.norm - 1.0).abs() < 1e-15);
    }

    // Independent evaluation: sup over the grid of sigma m s^{m-1} / (s + sigma)^m.
    fn derivative_oracle(order: usize, scales: &[f64], sigmas: &[f64], k: i32) -> f64 {
        let mut best = 0.0f64;
        for &s in scales {
            for &sigma in sigmas {
                for m in 1..=order {
                    let v = sigma.powi(k) * m as f64 * s.powi(m as i32 - 1) / (s + sigma).powi(m as i32);
                    best = best.max(v);
                }
            }
        }
        best
    }

    #[test]
    fn differentiation_is_one_bounded() {
        let scales = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let sigmas = [0.05, 0.1, 0.15, 0.2];
        let g = ScaleGrid::product(&scales, &sigmas, 1.0).unwrap();
        let d = FnOperator::new(SeriesKind::Taylor, 64, |x: &ScaledSeries| Ok(x.derivative()));
        let est = measure_operator_norm(&d, 1, &g, Execution::Parallel).unwrap();
        let pts: Vec<(f64, f64)> = g.points().iter().map(|p| (p.s, p.sigma)).collect();
        let mut oracle = 0.0f64;
        for (s, sigma) in pts {
            oracle = oracle.max(derivative_oracle(64, &[s], &[sigma], 1));
        }
        assert!((est.norm - oracle).abs() <= 1e-12 * oracle, "{} vs {oracle}", est.norm);
        assert!(est.norm <= 1.0);
    }

    #[test]
    fn differentiation_is_not_zero_bounded() {
        let mut previous = 0.0;
        for (order, sigma) in [(16, 0.1), (64, 0.01), (256, 0.001)] {
            let g = grid(&[0.5], &[sigma]);
            let d = FnOperator::new(SeriesKind::Taylor, order, |x: &ScaledSeries| Ok(x.derivative()));
            let n = measure_operator_norm(&d, 0, &g, Execution::Parallel).unwrap().norm;
            let oracle = derivative_oracle(order, &[0.5], &[sigma], 0);
            assert!((n - oracle).abs() <= 1e-9 * oracle);
            assert!(n > 5.0 * previous, "{n} did not outgrow {previous}");
            previous = n;
        }
    }

    #[test]
    fn refining_grid_never_decreases_norm() {
        let d = FnOperator::new(SeriesKind::Taylor, 32, |x: &ScaledSeries| Ok(x.derivative()));
        let coarse = grid(&[0.5], &[0.2]);
        let fine = coarse.refined(&[GridPoint { s: 0.3, sigma: 0.05 }, GridPoint { s: 0.8, sigma: 0.1 }]).unwrap();
        let a = measure_operator_norm(&d, 0, &coarse, Execution::Sequential).unwrap().norm;
        let b = measure_operator_norm(&d, 0, &fine, Execution::Sequential).unwrap().norm;
        assert!(b >= a);
    }

    #[test]
    fn nonlinear_operator_is_rejected() {
        let sq = FnOperator::new(SeriesKind::Taylor, 6, |x: &ScaledSeries| x.multiply(x));
        let g = grid(&[0.5], &[0.1]);
        assert!(matches!(
            measure_operator_norm(&sq, 0, &g, Execution::Sequential),
            Err(Error::NotLinear { .. })
        ));
    }

    #[test]
    fn multiple_exponents_agree_with_single_measurements() {
        let d = FnOperator::new(SeriesKind::Taylor, 24, |x: &ScaledSeries| Ok(x.derivative()));
        let g = grid(&[0.3, 0.6], &[0.05, 0.2]);
        let all = measure_operator_norms(&d, &[0, 1, 2], &g, Execution::Parallel).unwrap();
        for est in &all {
            let single = measure_operator_norm(&d, est.k, &g, Execution::Sequential).unwrap();
            assert!((single.norm - est.norm).abs() <= 1e-14 * est.norm);
        }
    }
}
