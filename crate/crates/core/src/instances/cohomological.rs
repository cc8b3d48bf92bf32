//! Small-divisor right inverse on Fourier scales.
//!
//! Solving `xi(theta + alpha) - xi(theta) = x(theta)` mode by mode divides
//! coefficient `m` by `e^{2 pi i m alpha} - 1`. For Diophantine `alpha` these
//! divisors decay like `|m|^{-tau}`, which makes the inverse k-bounded for
//! `k` near `tau` but not 0-bounded.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scale::{measure_operator_norms, BoundedOperatorEstimate, LinearOperator, ScaleGrid, ScaledSeries, SeriesKind};

/// Divisors below this modulus are rejected.
pub const DIVISOR_UNDERFLOW: f64 = 1e-15;

/// `e^{2 pi i m alpha} - 1`, formed as `2i sin(pi f) e^{i pi f}` with `f` the
/// fractional part of `m alpha`, which keeps small divisors accurate.
pub fn small_divisor(alpha: f64, m: isize) -> Complex64 {
    let f = (m as f64 * alpha).rem_euclid(1.0);
    Complex64::new(0.0, 2.0 * (PI * f).sin()) * Complex64::from_polar(1.0, PI * f)
}

/// `min_{1 <= |m| <= modes} |m|^tau |e^{2 pi i m alpha} - 1|`.
pub fn diophantine_margin(alpha: f64, tau: f64, modes: usize) -> f64 {
    (1..=modes as isize)
        .flat_map(|m| [m, -m])
        .map(|m| (m.unsigned_abs() as f64).powf(tau) * small_divisor(alpha, m).norm())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiophantineSpec {
    pub alpha: f64,
    pub tau: f64,
    /// Required lower bound `C` on the margin.
    pub c: f64,
    pub modes: usize,
}

impl DiophantineSpec {
    pub fn golden(modes: usize) -> Self {
        DiophantineSpec { alpha: (5f64.sqrt() - 1.0) / 2.0, tau: 1.0, c: 1.0, modes }
    }

    pub fn margin(&self) -> f64 {
        diophantine_margin(self.alpha, self.tau, self.modes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 1 || !(self.tau >= 1.0) || !(self.c > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Constraint(format!(
                "need modes >= 1, tau >= 1, C > 0 and finite alpha; got {self:?}"
            )));
        }
        for m in (1..=self.modes as isize).flat_map(|m| [m, -m]) {
            let d = small_divisor(self.alpha, m).norm();
            if d < DIVISOR_UNDERFLOW {
                return Err(Error::DivisorUnderflow { mode: m, modulus: d });
            }
        }
        let margin = self.margin();
        if margin < self.c {
            return Err(Error::Constraint(format!("Diophantine margin {margin:e} is below C = {}", self.c)));
        }
        Ok(())
    }
}

/// The operator `x -> xi` with `xi(theta + alpha) - xi(theta) = x(theta)` on
/// zero-mean Fourier series.
#[derive(Clone, Debug)]
pub struct CohomologicalInverse {
    alpha: f64,
    modes: usize,
    divisors: Vec<Complex64>,
}

impl CohomologicalInverse {
    pub fn new(spec: &DiophantineSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.modes as isize;
        let divisors = (-m..=m).map(|i| small_divisor(spec.alpha, i)).collect();
        Ok(CohomologicalInverse { alpha: spec.alpha, modes: spec.modes, divisors })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `x(theta + alpha)`.
    pub fn shift(&self, x: &ScaledSeries) -> ScaledSeries {
        let mut out = x.clone();
        for m in x.indices().collect::<Vec<_>>() {
            out.set(m, x.coeff(m) * Complex64::from_polar(1.0, 2.0 * PI * m as f64 * self.alpha));
        }
        out
    }
}

impl LinearOperator for CohomologicalInverse {
    fn domain_kind(&self) -> SeriesKind {
        SeriesKind::Fourier
    }

    fn domain_order(&self) -> usize {
        self.modes
    }

    fn basis(&self) -> Vec<isize> {
        let m = self.modes as isize;
        (-m..=m).filter(|&i| i != 0).collect()
    }

    fn apply(&self, x: &ScaledSeries) -> Result<ScaledSeries> {
        x.check_same_shape(&ScaledSeries::zeros(SeriesKind::Fourier, self.modes))?;
        let mean = x.coeff(0).norm();
        if mean != 0.0 {
            return Err(Error::NonZeroMean(mean));
        }
        let mut out = ScaledSeries::zeros(SeriesKind::Fourier, self.modes);
        for (o, (c, d)) in out.coeffs_mut().iter_mut().zip(x.coeffs().iter().zip(&self.divisors)) {
            if c.norm() != 0.0 {
                *o = c / d;
            }
        }
        Ok(out)
    }
}

/// `N` of the small-divisor inverse for each loss exponent and truncation.
#[derive(Clone, Debug, Serialize)]
pub struct LossExponentScan {
    pub modes: Vec<usize>,
    pub ks: Vec<u32>,
    /// `norms[k_index][mode_index]`.
    pub norms: Vec<Vec<f64>>,
    /// Smallest `k` whose `N` varies by at most `tolerance` across `modes`.
    pub stabilizing_k: Option<u32>,
    pub tolerance: f64,
}

impl LossExponentScan {
    pub fn row(&self, k: u32) -> Option<&[f64]> {
        self.ks.iter().position(|&x| x == k).map(|i| self.norms[i].as_slice())
    }

    /// `(max - min) / min` of the measured `N` for exponent `k`.
    pub fn spread(&self, k: u32) -> Option<f64> {
        let row = self.row(k)?;
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(0.0, f64::max);
        Some((hi - lo) / lo)
    }

    /// `N(last) / N(first)` for exponent `k`.
    pub fn growth(&self, k: u32) -> Option<f64> {
        let row = self.row(k)?;
        Some(row[row.len() - 1] / row[0])
    }
}

/// Measures `N` for `k = 0..=max_k` at `base_modes * 2^i`, `i < doublings`.
pub fn scan_loss_exponent(
    spec: &DiophantineSpec,
    doublings: usize,
    max_k: u32,
    grid: &ScaleGrid,
    tolerance: f64,
    exec: Execution,
) -> Result<LossExponentScan> {
    let modes: Vec<usize> = (0..doublings).map(|i| spec.modes << i).collect();
    let ks: Vec<u32> = (0..=max_k).collect();
    let mut norms = vec![Vec::with_capacity(modes.len()); ks.len()];
    for &m in &modes {
        let op = CohomologicalInverse::new(&DiophantineSpec { modes: m, ..*spec })?;
        for (row, est) in norms.iter_mut().zip(measure_operator_norms(&op, &ks, grid, exec)?) {
            row.push(est.norm);
        }
    }
    let mut scan = LossExponentScan { modes, ks, norms, stabilizing_k: None, tolerance };
    scan.stabilizing_k = scan.ks.iter().copied().find(|&k| scan.spread(k).is_some_and(|s| s <= tolerance));
    Ok(scan)
}

/// The small-divisor inverse with its loss exponent chosen as the smallest
/// `k` that stabilizes under three doublings of the truncation.
#[derive(Clone, Debug)]
pub struct CohomologicalJ {
    pub operator: CohomologicalInverse,
    pub k: u32,
    pub estimate: BoundedOperatorEstimate,
    pub scan: LossExponentScan,
}

pub fn build_cohomological_j(spec: &DiophantineSpec, grid: &ScaleGrid, exec: Execution) -> Result<CohomologicalJ> {
    let scan = scan_loss_exponent(spec, 4, 4, grid, 0.1, exec)?;
    let k = scan
        .stabilizing_k
        .ok_or_else(|| Error::Constraint("no loss exponent up to 4 stabilizes N(j)".into()))?;
    let operator = CohomologicalInverse::new(spec)?;
    let estimate = crate::scale::measure_operator_norm(&operator, k, grid, exec)?;
    Ok(CohomologicalJ { operator, k, estimate, scan })
}
