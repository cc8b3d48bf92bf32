//! The germ action `g . x = (a + x) ∘ g^{-1} - a` on series vanishing at 0.
//!
//! With `e^xi = id + xi` the infinitesimal action is `xi . x = -(a + x)' xi`,
//! so `rho(xi) = -a' xi` and `j(x) = -x / a'` is an exact right inverse
//! whenever `a'(0) != 0`. The loss exponent is 0.

use std::sync::Arc;

use serde::Serialize;

use crate::action::{
    ac_probe_samples, right_inverse_error, verify_ac, AcReport, ActionInstance, MeasuredConstants, ScaledAction,
    RIGHT_INVERSE_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{AlgebraElement, GermGroup, GroupElement, GroupLawReport, GroupLawSweep};
use crate::rng;
use crate::scale::{
    measure_operator_norm, BoundedOperatorEstimate, FnOperator, ScaleGrid, ScaleIndex, ScaledSeries, SeriesKind,
    INVERTIBILITY_THRESHOLD,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GermActionSpec {
    /// Base point; its truncation order fixes the order of the instance.
    pub a: ScaledSeries,
}

impl GermActionSpec {
    pub fn identity(order: usize) -> Self {
        GermActionSpec { a: ScaledSeries::identity(order) }
    }

    /// Base point `a` with real coefficients `a_0, a_1, ...`.
    pub fn from_coeffs(order: usize, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() > order + 1 {
            return Err(Error::Constraint(format!("{} coefficients exceed order {order}", coeffs.len())));
        }
        Ok(GermActionSpec { a: ScaledSeries::taylor_real(order, coeffs) })
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }

    /// Checks that `a'` is a unit: nonzero at the origin and bounded away from
    /// zero on the closed unit disc (sampled on rings).
    pub fn validate(&self) -> Result<()> {
        if self.a.kind() != SeriesKind::Taylor {
            return Err(Error::NotTaylor(self.a.kind()));
        }
        if self.order() < 1 {
            return Err(Error::Constraint("germ instances need truncation order >= 1".into()));
        }
        let da = self.a.derivative();
        let lead = da.coeff(0).norm();
        if lead < INVERTIBILITY_THRESHOLD {
            return Err(Error::NotInvertible { modulus: lead, threshold: INVERTIBILITY_THRESHOLD });
        }
        let disc_min = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .flat_map(|&r| {
                let da = &da;
                (0..256).map(move |i| {
                    let z = num_complex::Complex64::from_polar(r, 2.0 * std::f64::consts::PI * i as f64 / 256.0);
                    da.evaluate(z).norm()
                })
            })
            .fold(lead, f64::min);
        if disc_min < INVERTIBILITY_THRESHOLD {
            return Err(Error::Constraint(format!("a' nearly vanishes on the unit disc (min modulus {disc_min:e})")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GermAction {
    a: ScaledSeries,
    da_recip: ScaledSeries,
    group: GermGroup,
}

impl GermAction {
    pub fn new(spec: &GermActionSpec) -> Result<Self> {
        spec.validate()?;
        let da_recip = spec.a.derivative().reciprocal()?;
        Ok(GermAction { a: spec.a.clone(), da_recip, group: GermGroup::default() })
    }

    pub fn base_point(&self) -> &ScaledSeries {
        &self.a
    }

    /// `x -> -x / a'` on every Taylor series, the linear extension of `j` used
    /// when measuring `N(j)`.
    pub fn j_operator(&self) -> impl crate::scale::LinearOperator + '_ {
        FnOperator::new(SeriesKind::Taylor, self.order(), move |x: &ScaledSeries| {
            Ok(-&self.da_recip.multiply(x)?)
        })
    }
}

impl ScaledAction for GermAction {
    fn order(&self) -> usize {
        self.a.order()
    }

    fn loss_exponent(&self) -> u32 {
        0
    }

    fn group(&self) -> &GermGroup {
        &self.group
    }

    fn check_point(&self, x: &ScaledSeries) -> Result<()> {
        x.check_same_shape(&self.a)?;
        let c0 = x.coeff(0);
        if c0.re != 0.0 || c0.im != 0.0 {
            return Err(Error::NonZeroConstant(c0.norm()));
        }
        Ok(())
    }

    fn act(&self, g: &GroupElement, x: &ScaledSeries) -> Result<ScaledSeries> {
        let inv = self.group.inv(g)?;
        Ok(&(&self.a + x).compose(&inv.as_map())? - &self.a)
    }

    fn act_exp_inverse(&self, xi: &AlgebraElement, x: &ScaledSeries) -> Result<ScaledSeries> {
        Ok(&(&self.a + x).compose(&xi.as_map())? - &self.a)
    }

    fn infinitesimal(&self, xi: &AlgebraElement, x: &ScaledSeries) -> Result<ScaledSeries> {
        Ok(-&(&self.a + x).derivative().multiply(xi.series())?)
    }

    fn right_inverse(&self, x: &ScaledSeries) -> Result<AlgebraElement> {
        self.check_point(x)?;
        AlgebraElement::new(-&self.da_recip.multiply(x)?)
    }
}

/// The exact solution `g = (id + x)^{-1}` of `g . 0 = x` for the base point `a = id`.
pub fn reversion_oracle(x: &ScaledSeries) -> Result<GroupElement> {
    let h = &ScaledSeries::identity(x.order()) + x;
    GroupElement::from_map(&h.reversion()?)
}

/// Where and how densely the constants of an instance are measured.
#[derive(Clone, Debug)]
pub struct MeasurementConfig {
    pub scales: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Random probes for (A_c) and for each group-law sweep.
    pub samples: usize,
    pub seed: u64,
    pub decay: f64,
    pub safety_factor: f64,
    pub exec: Execution,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            scales: vec![0.2, 0.4, 0.6, 0.8],
            sigmas: vec![0.02, 0.05, 0.1],
            samples: 200,
            seed: 1,
            decay: 0.5,
            safety_factor: 1.5,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasurementReport {
    pub nj: BoundedOperatorEstimate,
    pub ac: AcReport,
    pub group_law: GroupLawReport,
    pub right_inverse_error: f64,
    pub constants: MeasuredConstants,
}

#[derive(Clone, Debug)]
pub struct GermInstance {
    pub action: Arc<GermAction>,
    pub instance: ActionInstance,
    pub report: MeasurementReport,
}

/// Builds the germ action and measures `N(j)`, `c` and `kappa` on the grid.
pub fn build_germ_instance(spec: &GermActionSpec, cfg: &MeasurementConfig) -> Result<GermInstance> {
    let action = Arc::new(GermAction::new(spec)?);
    let order = spec.order();

    let norm_grid = ScaleGrid::product(&cfg.scales, &cfg.sigmas, 1.0)?;
    let nj = measure_operator_norm(&action.j_operator(), 0, &norm_grid, cfg.exec)?;

    let double_grid = ScaleGrid::product(&cfg.scales, &cfg.sigmas, 2.0)?;
    let radius = cfg.sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    let probes = ac_probe_samples(order, cfg.samples, cfg.seed, cfg.decay, radius)?;
    let ac = verify_ac(action.as_ref(), &probes, &double_grid, cfg.exec)?;

    let sweep = GroupLawSweep {
        order,
        samples: cfg.samples,
        seed: rng::derive_seed(cfg.seed, 0x006b_6170_7061),
        decay: cfg.decay,
        grid: double_grid.clone(),
    };
    let group_law = sweep.run(action.group(), cfg.exec)?;

    let mut r = rng::seeded(rng::derive_seed(cfg.seed, 0x726a));
    let points: Vec<ScaledSeries> =
        (0..32).map(|_| rng::random_series(&mut r, SeriesKind::Taylor, order, cfg.decay, 1)).collect();
    let scales = cfg.scales.iter().map(|&s| ScaleIndex::new(s)).collect::<Result<Vec<_>>>()?;
    let rj = right_inverse_error(action.as_ref(), &points, &scales)?;
    if rj > RIGHT_INVERSE_TOLERANCE {
        return Err(Error::Constraint(format!("rho(j(x)) misses x by relative {rj:e}")));
    }

    let constants = MeasuredConstants {
        k: 0,
        c: ac.c_estimate,
        nj: nj.norm,
        kappa: group_law.kappa_estimate,
        safety_factor: cfg.safety_factor,
    };
    let instance = ActionInstance::new(action.clone(), constants)?;
    Ok(GermInstance {
        action,
        instance,
        report: MeasurementReport { nj, ac, group_law, right_inverse_error: rj, constants },
    })
}
