//! Scaled group actions, their infinitesimal generator, condition (A_c) and
//! the iteration map `phi(xi) = j((e^xi)^{-1} (xi . 0))`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{AlgebraElement, GermGroup, GroupElement};
use crate::rng;
use crate::scale::{GridPoint, ScaleGrid, ScaleIndex, ScaledSeries, SeriesKind};

/// Relative tolerance for `rho(j(x)) = x`.
pub const RIGHT_INVERSE_TOLERANCE: f64 = 1e-10;

/// Absolute slack on the per-call `phi` bound.
pub const PHI_TOLERANCE: f64 = 1e-10;

/// A left action of the germ group on a scaled space of series.
pub trait ScaledAction: Send + Sync {
    fn order(&self) -> usize;

    /// The loss exponent `k` of the right inverse.
    fn loss_exponent(&self) -> u32;

    fn group(&self) -> &GermGroup;

    /// `0_E`.
    fn origin(&self) -> ScaledSeries {
        ScaledSeries::zeros(SeriesKind::Taylor, self.order())
    }

    /// Rejects series outside the space the action is defined on.
    fn check_point(&self, _x: &ScaledSeries) -> Result<()> {
        Ok(())
    }

    fn act(&self, g: &GroupElement, x: &ScaledSeries) -> Result<ScaledSeries>;

    /// `(e^xi)^{-1} x`. The default inverts `e^xi` by reversion; instances with
    /// a closed form override it.
    fn act_exp_inverse(&self, xi: &AlgebraElement, x: &ScaledSeries) -> Result<ScaledSeries> {
        let g = self.group().inv(&GroupElement::new(xi.clone())?)?;
        self.act(&g, x)
    }

    /// `xi . x = d/dt|_{t=0} e^{t xi} x`.
    fn infinitesimal(&self, xi: &AlgebraElement, x: &ScaledSeries) -> Result<ScaledSeries>;

    /// The right inverse `j` of `rho: xi -> xi . 0`.
    fn right_inverse(&self, x: &ScaledSeries) -> Result<AlgebraElement>;
}

/// Constants measured on an action, plus the safety factor applied before they
/// enter the size of the certified ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasuredConstants {
    pub k: u32,
    pub c: f64,
    pub nj: f64,
    pub kappa: f64,
    pub safety_factor: f64,
}

impl MeasuredConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::Constraint(format!("condition (A_c) needs c >= 1, got {}", self.c)));
        }
        if !(self.nj > 0.0 && self.nj.is_finite()) {
            return Err(Error::Constraint(format!("N(j) must be positive and finite, got {}", self.nj)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Constraint(format!("kappa must be finite and nonnegative, got {}", self.kappa)));
        }
        if !(self.safety_factor >= 1.0) {
            return Err(Error::Constraint(format!("safety factor must be >= 1, got {}", self.safety_factor)));
        }
        Ok(())
    }

    pub fn c_used(&self) -> f64 {
        self.c * self.safety_factor
    }

    pub fn nj_used(&self) -> f64 {
        self.nj * self.safety_factor
    }

    pub fn kappa_used(&self) -> f64 {
        self.kappa * self.safety_factor
    }
}

/// An action together with its measured constants.
#[derive(Clone)]
pub struct ActionInstance {
    action: Arc<dyn ScaledAction>,
    constants: MeasuredConstants,
}

impl fmt::Debug for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionInstance").field("order", &self.action.order()).field("constants", &self.constants).finish()
    }
}

impl ActionInstance {
    pub fn new(action: Arc<dyn ScaledAction>, constants: MeasuredConstants) -> Result<Self> {
        constants.validate()?;
        if constants.k != action.loss_exponent() {
            return Err(Error::Constraint(format!(
                "constants declare k = {} but the action has k = {}",
                constants.k,
                action.loss_exponent()
            )));
        }
        Ok(ActionInstance { action, constants })
    }

    pub fn action(&self) -> &dyn ScaledAction {
        self.action.as_ref()
    }

    pub fn constants(&self) -> &MeasuredConstants {
        &self.constants
    }

    pub fn with_constants(&self, constants: MeasuredConstants) -> Result<Self> {
        ActionInstance::new(self.action.clone(), constants)
    }

    pub fn order(&self) -> usize {
        self.action.order()
    }

    pub fn rho(&self, xi: &AlgebraElement) -> Result<ScaledSeries> {
        rho(self.action(), xi)
    }

    pub fn j(&self, x: &ScaledSeries) -> Result<AlgebraElement> {
        self.action.right_inverse(x)
    }
}

/// `rho(xi) = xi . 0_E`.
pub fn rho(action: &dyn ScaledAction, xi: &AlgebraElement) -> Result<ScaledSeries> {
    action.infinitesimal(xi, &action.origin())
}

/// Largest relative error of `rho(j(x)) = x` over the given points and scales.
pub fn right_inverse_error(action: &dyn ScaledAction, points: &[ScaledSeries], scales: &[ScaleIndex]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in points {
        let back = rho(action, &action.right_inverse(x)?)?;
        let diff = &back - x;
        for &s in scales {
            let n = x.norm(s);
            if n > 0.0 {
                worst = worst.max(diff.norm(s) / n);
            }
        }
    }
    Ok(worst)
}

/// Finite-difference check of the infinitesimal action: for each `t`,
/// `max_s |(e^{t xi} x - x) / t - xi . x|_s`. Should decay linearly in `t`.
pub fn check_infinitesimal(
    action: &dyn ScaledAction,
    xi: &AlgebraElement,
    x: &ScaledSeries,
    t_values: &[f64],
    scales: &[ScaleIndex],
) -> Result<Vec<f64>> {
    let generator = action.infinitesimal(xi, x)?;
    t_values
        .iter()
        .map(|&t| {
            let g = GroupElement::new(xi.scale_real(t))?;
            let moved = action.act(&g, x)?;
            let quotient = (&moved - x).scale_real(1.0 / t);
            let defect = &quotient - &generator;
            Ok(scales.iter().map(|&s| defect.norm(s)).fold(0.0, f64::max))
        })
        .collect()
}

/// Left side of (A_c): `|(e^xi)^{-1} (xi . 0_E)|_s`.
pub fn ac_left_side(action: &dyn ScaledAction, xi: &AlgebraElement, s: ScaleIndex) -> Result<f64> {
    Ok(action.act_exp_inverse(xi, &rho(action, xi)?)?.norm(s))
}

/// Least-squares slope of `log |(e^{t xi})^{-1} (t xi . 0)|_s` against `log t`.
pub fn ac_scaling_slope(action: &dyn ScaledAction, xi: &AlgebraElement, s: ScaleIndex, t_values: &[f64]) -> Result<f64> {
    let pts = t_values
        .iter()
        .map(|&t| Ok((t.ln(), ac_left_side(action, &xi.scale_real(t), s)?.ln())))
        .collect::<Result<Vec<_>>>()?;
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcReport {
    /// Largest sampled ratio, clamped below at 1.
    pub c_estimate: f64,
    /// Largest sampled ratio before clamping.
    pub max_ratio: f64,
    pub samples: usize,
    pub skipped: usize,
    /// `(s, sigma, sample id)` of the largest ratio.
    pub worst_ratio_location: Option<(f64, f64, usize)>,
}

/// Evaluates the (A_c) ratio `|(e^xi)^{-1}(xi . 0)|_s sigma / |xi|_{s+2 sigma}^2`
/// for every sample at every grid point. Samples outside `sigma B_{s+2 sigma}`
/// are skipped and counted.
pub fn verify_ac(
    action: &dyn ScaledAction,
    samples: &[AlgebraElement],
    grid: &ScaleGrid,
    exec: Execution,
) -> Result<AcReport> {
    let jobs: Vec<(usize, GridPoint)> =
        (0..samples.len()).flat_map(|i| grid.points().iter().map(move |&p| (i, p))).collect();
    let ratios = exec.map(&jobs, |&(i, p)| -> Result<Option<f64>> {
        let s = ScaleIndex::new(p.s)?;
        let far = s.widen(2.0 * p.sigma)?;
        let xi = &samples[i];
        let n = xi.norm(far);
        if n > p.sigma {
            return Ok(None);
        }
        if n == 0.0 {
            return Ok(Some(0.0));
        }
        Ok(Some(ac_left_side(action, xi, s)? * p.sigma / (n * n)))
    });
    let mut report =
        AcReport { c_estimate: 1.0, max_ratio: 0.0, samples: 0, skipped: 0, worst_ratio_location: None };
    for (&(i, p), r) in jobs.iter().zip(ratios) {
        match r? {
            None => report.skipped += 1,
            Some(v) => {
                report.samples += 1;
                if v > report.max_ratio || report.worst_ratio_location.is_none() {
                    report.max_ratio = report.max_ratio.max(v);
                    report.worst_ratio_location = Some((p.s, p.sigma, i));
                }
            }
        }
    }
    report.c_estimate = report.max_ratio.max(1.0);
    Ok(report)
}

/// Probe set for (A_c) sweeps: `count` random germs with `l1` mass spread over
/// `(0, radius)`, followed by the monomials `radius/2 * z^m`, `m = 1..=order`.
pub fn ac_probe_samples(order: usize, count: usize, seed: u64, decay: f64, radius: f64) -> Result<Vec<AlgebraElement>> {
    let top = ScaleIndex::new(1.0 - 1e-12)?;
    let mut out = Vec::with_capacity(count + order);
    for i in 0..count {
        let mut r = rng::seeded(rng::derive_seed(seed, i as u64));
        let x = rng::random_series(&mut r, SeriesKind::Taylor, order, decay, 1);
        let u: f64 = rand::Rng::random_range(&mut r, 0.05..1.0);
        out.push(AlgebraElement::new(rng::rescale_to(&x, u * radius, top))?);
    }
    for m in 1..=order {
        let x = ScaledSeries::basis(SeriesKind::Taylor, order, m as isize).scale_real(0.5 * radius);
        out.push(AlgebraElement::new(x)?);
    }
    Ok(out)
}

/// One application of the iteration map together with its certified bound.
#[derive(Clone, Debug)]
pub struct PhiStep {
    pub value: AlgebraElement,
    /// `|phi(xi)|_s`.
    pub norm: f64,
    /// `c N(j) sigma^{-k-1} |xi|^2_{s+2 sigma}` with the inflated constants.
    pub bound: f64,
    /// Same bound with the raw measured constants.
    pub raw_bound: f64,
}

impl PhiStep {
    pub fn margin(&self) -> f64 {
        self.bound - self.norm
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.norm <= self.bound + tolerance
    }
}

/// `phi(xi)` on `sigma B_{s+2 sigma}` without raising on a bound violation.
pub fn phi_step(instance: &ActionInstance, xi: &AlgebraElement, s: ScaleIndex, sigma: f64) -> Result<PhiStep> {
    let far = s.widen(2.0 * sigma)?;
    let n = xi.norm(far);
    if n > sigma {
        return Err(Error::DomainGuard { norm: n, radius: sigma });
    }
    let action = instance.action();
    let remainder = action.act_exp_inverse(xi, &rho(action, xi)?)?;
    let value = action.right_inverse(&remainder)?;
    let k = instance.constants().k as i32;
    let c = instance.constants();
    let loss = sigma.powi(-k - 1) * n * n;
    Ok(PhiStep {
        norm: value.norm(s),
        bound: c.c_used() * c.nj_used() * loss,
        raw_bound: c.c * c.nj * loss,
        value,
    })
}

/// `phi(xi)`, failing with [`Error::CertificateFailed`] if its bound is violated.
pub fn phi(instance: &ActionInstance, xi: &AlgebraElement, s: ScaleIndex, sigma: f64) -> Result<AlgebraElement> {
    let step = phi_step(instance, xi, s, sigma)?;
    if !step.holds(PHI_TOLERANCE) {
        return Err(Error::CertificateFailed(format!(
            "|phi(xi)|_s = {:e} exceeds c N(j) sigma^(-k-1) |xi|^2 = {:e}",
            step.norm, step.bound
        )));
    }
    Ok(step.value)
}
