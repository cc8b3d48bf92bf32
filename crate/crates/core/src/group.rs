//! The group of near-identity germs `id + xi` under composition.
//!
//! The exp chart is `e^xi = id + xi` and `log` reads the displacement back,
//! so the algebra and the group share the Taylor norms of [`crate::scale`].
//! The product `e^xi e^eta` is the composition `(id + xi) ∘ (id + eta)`:
//!
//! ```text
//! log(e^xi e^eta) = eta + xi ∘ (id + eta)
//! ```
//!
//! and the group law is certified through the two inequalities
//!
//! ```text
//! |log(e^xi e^eta)|_s          <= |xi|_{s+sigma} + |eta|_s
//! |log(e^xi e^eta) - xi - eta|_s <= kappa / sigma * |xi|_{s+2 sigma} |eta|_s
//! ```
//!
//! for `xi` in the unit ball of `s + 2 sigma` and `|eta|_s <= sigma`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng;
use crate::scale::{ScaleGrid, ScaleIndex, ScaledSeries, SeriesKind, INVERTIBILITY_THRESHOLD};

/// Slack allowed on the first group inequality.
pub const GROUP_LAW_TOLERANCE: f64 = 1e-10;

/// A displacement germ `xi` with `xi(0) = 0` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement(ScaledSeries);

impl AlgebraElement {
    pub fn new(xi: ScaledSeries) -> Result<Self> {
        if xi.kind() != SeriesKind::Taylor {
            return Err(Error::NotTaylor(xi.kind()));
        }
        let c0 = xi.coeff(0);
        if c0.re != 0.0 || c0.im != 0.0 {
            return Err(Error::NonZeroConstant(c0.norm()));
        }
        Ok(AlgebraElement(xi))
    }

    pub fn zero(order: usize) -> Self {
        AlgebraElement(ScaledSeries::zeros(SeriesKind::Taylor, order))
    }

    pub fn series(&self) -> &ScaledSeries {
        &self.0
    }

    pub fn into_series(self) -> ScaledSeries {
        self.0
    }

    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn norm(&self, s: ScaleIndex) -> f64 {
        self.0.norm(s)
    }

    pub fn scale_real(&self, t: f64) -> AlgebraElement {
        AlgebraElement(self.0.scale_real(t))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `id + xi` as a plain series.
    pub fn as_map(&self) -> ScaledSeries {
        &ScaledSeries::identity(self.order()) + &self.0
    }
}

/// The germ `id + displacement`, kept invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    displacement: AlgebraElement,
}

impl GroupElement {
    pub fn new(displacement: AlgebraElement) -> Result<Self> {
        let linear = 1.0 + displacement.series().coeff(1);
        if displacement.order() >= 1 && linear.norm() < INVERTIBILITY_THRESHOLD {
            return Err(Error::NotInvertible { modulus: linear.norm(), threshold: INVERTIBILITY_THRESHOLD });
        }
        Ok(GroupElement { displacement })
    }

    /// The germ `h`, which must satisfy `h(0) = 0`.
    pub fn from_map(h: &ScaledSeries) -> Result<Self> {
        let xi = h - &ScaledSeries::identity(h.order());
        GroupElement::new(AlgebraElement::new(xi)?)
    }

    pub fn identity(order: usize) -> Self {
        GroupElement { displacement: AlgebraElement::zero(order) }
    }

    pub fn displacement(&self) -> &AlgebraElement {
        &self.displacement
    }

    pub fn order(&self) -> usize {
        self.displacement.order()
    }

    pub fn as_map(&self) -> ScaledSeries {
        self.displacement.as_map()
    }

    pub fn to_text(&self) -> String {
        crate::scale::text::write_series(self.displacement.series(), &[("group", "1")])
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (xi, flags) = crate::scale::text::read_series(text)?;
        if flags.get("group").map(String::as_str) != Some("1") {
            return Err(Error::Parse { line: 1, message: "missing group=1 flag".into() });
        }
        GroupElement::new(AlgebraElement::new(xi)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductOrientation {
    /// `e^xi e^eta = (id + xi) ∘ (id + eta)`.
    #[default]
    Composition,
    /// `e^xi e^eta = (id + eta) ∘ (id + xi)`.
    Reversed,
}

/// The germ group at a fixed truncation order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GermGroup {
    pub orientation: ProductOrientation,
}

impl GermGroup {
    pub fn new(orientation: ProductOrientation) -> Self {
        GermGroup { orientation }
    }

    /// `e^xi`, defined on the chart domain `|xi|_s < 2`.
    pub fn exp(&self, xi: &AlgebraElement, s: ScaleIndex) -> Result<GroupElement> {
        let norm = xi.norm(s);
        if !(norm < 2.0) {
            return Err(Error::ChartDomain { norm });
        }
        GroupElement::new(xi.clone())
    }

    pub fn log(&self, g: &GroupElement) -> AlgebraElement {
        g.displacement.clone()
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let (outer, inner) = match self.orientation {
            ProductOrientation::Composition => (g, h),
            ProductOrientation::Reversed => (h, g),
        };
        let xi = outer.displacement.series();
        let eta = inner.displacement.series();
        let d = eta + &xi.compose(&inner.as_map())?;
        GroupElement::new(AlgebraElement::new(d)?)
    }

    pub fn inv(&self, g: &GroupElement) -> Result<GroupElement> {
        GroupElement::from_map(&g.as_map().reversion()?)
    }

    /// `log(e^xi e^eta)` without the chart-domain check.
    pub fn log_product(&self, xi: &AlgebraElement, eta: &AlgebraElement) -> Result<AlgebraElement> {
        let p = self.mul(&GroupElement::new(xi.clone())?, &GroupElement::new(eta.clone())?)?;
        Ok(p.displacement)
    }

    /// Evaluates both group inequalities for one `(xi, eta, s, sigma)` sample.
    /// Returns `Ok(None)` for samples outside `B_{s+2 sigma} x sigma B_s`.
    pub fn verify_group_law(
        &self,
        xi: &AlgebraElement,
        eta: &AlgebraElement,
        s: ScaleIndex,
        sigma: f64,
    ) -> Result<Option<GroupLawSample>> {
        let s1 = s.widen(sigma)?;
        let s2 = s.widen(2.0 * sigma)?;
        let xi_far = xi.norm(s2);
        let eta_s = eta.norm(s);
        if xi_far > 1.0 || eta_s > sigma {
            return Ok(None);
        }
        let product = self.log_product(xi, eta)?;
        let lhs_first = product.norm(s);
        let margin_first = xi.norm(s1) + eta_s - lhs_first;
        let remainder = &(product.series() - xi.series()) - eta.series();
        let lhs_second = remainder.norm(s);
        let denom = xi_far * eta_s;
        let kappa = if lhs_second == 0.0 { 0.0 } else { lhs_second * sigma / denom };
        Ok(Some(GroupLawSample { margin_first, lhs_second, denom, sigma, kappa }))
    }
}

/// Per-sample quantities of the group-law check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupLawSample {
    pub margin_first: f64,
    /// `|log(e^xi e^eta) - xi - eta|_s`.
    pub lhs_second: f64,
    /// `|xi|_{s+2 sigma} |eta|_s`.
    pub denom: f64,
    pub sigma: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupLawReport {
    pub kappa_estimate: f64,
    pub margin_first: f64,
    /// Smallest `kappa_estimate / sigma * |xi||eta| - |remainder|` over samples.
    pub margin_second: f64,
    pub samples: usize,
    pub skipped: usize,
    pub order: usize,
}

impl GroupLawReport {
    pub fn first_inequality_holds(&self) -> bool {
        self.margin_first >= -GROUP_LAW_TOLERANCE
    }

    /// Folds samples into a report; `kappa_estimate` is the sample maximum.
    pub fn from_samples(order: usize, samples: &[Option<GroupLawSample>]) -> Self {
        let taken: Vec<&GroupLawSample> = samples.iter().flatten().collect();
        let kappa = taken.iter().map(|g| g.kappa).fold(0.0, f64::max);
        let margin_first = taken.iter().map(|g| g.margin_first).fold(f64::INFINITY, f64::min);
        let margin_second = taken
            .iter()
            .map(|g| kappa / g.sigma * g.denom - g.lhs_second)
            .fold(f64::INFINITY, f64::min);
        GroupLawReport {
            kappa_estimate: kappa,
            margin_first,
            margin_second,
            samples: taken.len(),
            skipped: samples.len() - taken.len(),
            order,
        }
    }
}

/// Settings for random group-law sweeps.
#[derive(Clone, Debug)]
pub struct GroupLawSweep {
    pub order: usize,
    pub samples: usize,
    pub seed: u64,
    /// Coefficient decay of the random germs.
    pub decay: f64,
    pub grid: ScaleGrid,
}

impl GroupLawSweep {
    /// `samples` random pairs spread over the grid, every one inside the domain:
    /// `|xi|_{s+2 sigma}` uniform in `(0, 1)` and `|eta|_s` uniform in `(0, sigma)`.
    /// Germs are drawn at order 64 and truncated, so sweeps at different orders
    /// see the same leading coefficients.
    pub fn run(&self, group: &GermGroup, exec: Execution) -> Result<GroupLawReport> {
        let samples = exec.map_range(self.samples, |i| -> Result<Option<GroupLawSample>> {
            let p = self.grid.points()[i % self.grid.points().len()];
            let mut rng = rng::seeded(rng::derive_seed(self.seed, i as u64));
            let draw_order = self.order.max(64);
            let s = ScaleIndex::new(p.s)?;
            let xi = rng::random_series(&mut rng, SeriesKind::Taylor, draw_order, self.decay, 1).with_order(self.order);
            let eta = rng::random_series(&mut rng, SeriesKind::Taylor, draw_order, self.decay, 1).with_order(self.order);
            let u: f64 = rand::Rng::random_range(&mut rng, 0.01..1.0);
            let v: f64 = rand::Rng::random_range(&mut rng, 0.01..1.0);
            let xi = rng::rescale_to(&xi, u, s.widen(2.0 * p.sigma)?);
            let eta = rng::rescale_to(&eta, v * p.sigma, s);
            group.verify_group_law(&AlgebraElement::new(xi)?, &AlgebraElement::new(eta)?, s, p.sigma)
        });
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(GroupLawReport::from_samples(self.order, &samples))
    }
}
