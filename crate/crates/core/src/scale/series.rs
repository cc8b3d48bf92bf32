use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width factor `W` of the Fourier weights `exp(2 pi |m| W s)`.
pub const FOURIER_WIDTH: f64 = 1.0;

/// Below this modulus a linear coefficient is treated as vanishing.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-8;

/// A point `s` of the open interval `(0, 1)` indexing the scale `E_s`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct ScaleIndex(f64);

impl ScaleIndex {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > 0.0 && s < 1.0 {
            Ok(ScaleIndex(s))
        } else {
            Err(Error::ScaleOutOfRange(s))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The scale `s + sigma`, which must still lie in `(0, 1)`.
    pub fn widen(self, sigma: f64) -> Result<Self> {
        ScaleIndex::new(self.0 + sigma)
    }
}

impl TryFrom<f64> for ScaleIndex {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        ScaleIndex::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Taylor,
    Fourier,
}

/// A truncated Taylor series `sum_{m=0}^{D} c_m z^m` or Fourier series
/// `sum_{|m|<=M} c_m e^{2 pi i m theta}` carrying the weighted l1 norm family
///
/// ```text
/// Taylor:  |x|_s = sum |c_m| s^m
/// Fourier: |x|_s = sum |c_m| exp(2 pi |m| W s)
/// ```
///
/// Both families are nondecreasing in `s`, so the inclusions `E_{s+sigma} -> E_s`
/// have norm at most one. All arithmetic truncates silently at the fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSeries {
    kind: SeriesKind,
    order: usize,
    // Taylor: index m at position m. Fourier: index m at position m + order.
    coeffs: Vec<Complex64>,
}

impl ScaledSeries {
    pub fn zeros(kind: SeriesKind, order: usize) -> Self {
        let len = match kind {
            SeriesKind::Taylor => order + 1,
            SeriesKind::Fourier => 2 * order + 1,
        };
        ScaledSeries { kind, order, coeffs: vec![Complex64::new(0.0, 0.0); len] }
    }

    /// Taylor series from coefficients `c_0, ..., c_D`.
    pub fn taylor(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a Taylor series needs at least one coefficient");
        ScaledSeries { kind: SeriesKind::Taylor, order: coeffs.len() - 1, coeffs }
    }

    /// Taylor series of order `order` with real leading coefficients, zero-padded.
    pub fn taylor_real(order: usize, coeffs: &[f64]) -> Self {
        assert!(coeffs.len() <= order + 1, "more coefficients than the truncation order allows");
        let mut x = ScaledSeries::zeros(SeriesKind::Taylor, order);
        for (c, &v) in x.coeffs.iter_mut().zip(coeffs) {
            *c = Complex64::new(v, 0.0);
        }
        x
    }

    /// Fourier series from coefficients for modes `-M..=M`.
    pub fn fourier(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "Fourier coefficients come in 2M + 1 modes");
        ScaledSeries { kind: SeriesKind::Fourier, order: coeffs.len() / 2, coeffs }
    }

    /// The basis element with a single unit coefficient at `index`.
    pub fn basis(kind: SeriesKind, order: usize, index: isize) -> Self {
        let mut x = ScaledSeries::zeros(kind, order);
        x.set(index, Complex64::new(1.0, 0.0));
        x
    }

    /// The identity germ `z`.
    pub fn identity(order: usize) -> Self {
        ScaledSeries::basis(SeriesKind::Taylor, order, 1)
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn indices(&self) -> impl Iterator<Item = isize> + '_ {
        let offset = self.offset();
        (0..self.coeffs.len()).map(move |p| p as isize - offset)
    }

    fn offset(&self) -> isize {
        match self.kind {
            SeriesKind::Taylor => 0,
            SeriesKind::Fourier => self.order as isize,
        }
    }

    fn position(&self, index: isize) -> Option<usize> {
        let p = index + self.offset();
        (p >= 0 && (p as usize) < self.coeffs.len()).then_some(p as usize)
    }

    /// Coefficient at `index`; zero outside the retained range.
    pub fn coeff(&self, index: isize) -> Complex64 {
        self.position(index).map_or(Complex64::new(0.0, 0.0), |p| self.coeffs[p])
    }

    pub fn set(&mut self, index: isize, value: Complex64) {
        let p = self
            .position(index)
            .unwrap_or_else(|| panic!("index {index} outside truncation order {}", self.order));
        self.coeffs[p] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Natural logarithm of the weight of basis element `index` at scale `s`.
    pub fn log_weight(kind: SeriesKind, index: isize, s: f64) -> f64 {
        match kind {
            SeriesKind::Taylor => {
                if index == 0 {
                    0.0
                } else {
                    index as f64 * s.ln()
                }
            }
            SeriesKind::Fourier => 2.0 * PI * index.unsigned_abs() as f64 * FOURIER_WIDTH * s,
        }
    }

    pub fn norm(&self, s: ScaleIndex) -> f64 {
        self.indices()
            .zip(&self.coeffs)
            .map(|(m, c)| {
                let a = c.norm();
                if a == 0.0 {
                    0.0
                } else {
                    a * Self::log_weight(self.kind, m, s.value()).exp()
                }
            })
            .sum()
    }

    /// `ln |x|_s`, evaluated without forming the (possibly overflowing) weights.
    pub fn log_norm(&self, s: ScaleIndex) -> f64 {
        let terms: Vec<f64> = self
            .indices()
            .zip(&self.coeffs)
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(m, c)| c.norm().ln() + Self::log_weight(self.kind, m, s.value()))
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    /// Norm of the highest retained band of coefficients (the top eighth of the
    /// Taylor range, at least one coefficient). Used as a truncation-noise gauge.
    pub fn tail_norm(&self, s: ScaleIndex) -> f64 {
        let mut tail = ScaledSeries::zeros(self.kind, self.order);
        let band = (self.order / 8).max(1);
        for m in self.indices() {
            if m.unsigned_abs() + band > self.order {
                tail.set(m, self.coeff(m));
            }
        }
        tail.norm(s)
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn max_coeff_distance(&self, other: &ScaledSeries) -> f64 {
        assert_eq!(self.kind, other.kind);
        let order = self.order.max(other.order) as isize;
        let range = match self.kind {
            SeriesKind::Taylor => 0..=order,
            SeriesKind::Fourier => -order..=order,
        };
        range.map(|m| (self.coeff(m) - other.coeff(m)).norm()).fold(0.0, f64::max)
    }

    pub fn check_same_shape(&self, other: &ScaledSeries) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch { left: self.kind, right: other.kind });
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        Ok(())
    }

    fn require_taylor(&self) -> Result<()> {
        match self.kind {
            SeriesKind::Taylor => Ok(()),
            kind => Err(Error::NotTaylor(kind)),
        }
    }

    pub fn scale_by(&self, factor: Complex64) -> ScaledSeries {
        let coeffs = self.coeffs.iter().map(|c| c * factor).collect();
        ScaledSeries { coeffs, ..*self }
    }

    pub fn scale_real(&self, factor: f64) -> ScaledSeries {
        self.scale_by(Complex64::new(factor, 0.0))
    }

    /// Copy of this series at another truncation order (padding with zeros or truncating).
    pub fn with_order(&self, order: usize) -> ScaledSeries {
        let mut out = ScaledSeries::zeros(self.kind, order);
        for m in out.indices().collect::<Vec<_>>() {
            out.set(m, self.coeff(m));
        }
        out
    }

    /// Truncated Cauchy product (Taylor) or truncated convolution (Fourier).
    pub fn multiply(&self, other: &ScaledSeries) -> Result<ScaledSeries> {
        self.check_same_shape(other)?;
        let mut out = ScaledSeries::zeros(self.kind, self.order);
        match self.kind {
            SeriesKind::Taylor => {
                let d = self.order;
                for (i, a) in self.coeffs.iter().enumerate() {
                    if a.re == 0.0 && a.im == 0.0 {
                        continue;
                    }
                    for (j, b) in other.coeffs[..=d - i].iter().enumerate() {
                        out.coeffs[i + j] += a * b;
                    }
                }
            }
            SeriesKind::Fourier => {
                let m = self.order as isize;
                for (p, a) in self.coeffs.iter().enumerate() {
                    if a.re == 0.0 && a.im == 0.0 {
                        continue;
                    }
                    let i = p as isize - m;
                    let lo = (-m).max(-m - i);
                    let hi = m.min(m - i);
                    for jdx in lo..=hi {
                        let b = other.coeffs[(jdx + m) as usize];
                        out.coeffs[(i + jdx + m) as usize] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Truncated composition `self ∘ h` by Horner's scheme. `h` must vanish at 0,
    /// which makes the truncated result exact in the quotient by `z^{D+1}`.
    pub fn compose(&self, h: &ScaledSeries) -> Result<ScaledSeries> {
        self.require_taylor()?;
        self.check_same_shape(h)?;
        let h0 = h.coeffs[0];
        if h0.re != 0.0 || h0.im != 0.0 {
            return Err(Error::NonZeroConstant(h0.norm()));
        }
        let mut acc = ScaledSeries::zeros(SeriesKind::Taylor, self.order);
        for c in self.coeffs.iter().rev() {
            acc = acc.multiply(h)?;
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    /// Termwise derivative. Taylor: `d/dz`, the top coefficient becomes zero.
    /// Fourier: `d/dtheta`, multiplying mode `m` by `2 pi i m`.
    pub fn derivative(&self) -> ScaledSeries {
        let mut out = ScaledSeries::zeros(self.kind, self.order);
        match self.kind {
            SeriesKind::Taylor => {
                for m in 1..=self.order {
                    out.coeffs[m - 1] = self.coeffs[m] * m as f64;
                }
            }
            SeriesKind::Fourier => {
                for (m, (o, c)) in self.indices().zip(out.coeffs.iter_mut().zip(&self.coeffs)) {
                    *o = c * Complex64::new(0.0, 2.0 * PI * m as f64);
                }
            }
        }
        out
    }

    /// Multiplicative inverse of a Taylor series with nonzero constant term.
    pub fn reciprocal(&self) -> Result<ScaledSeries> {
        self.require_taylor()?;
        let c0 = self.coeffs[0];
        if c0.norm() == 0.0 {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let inv0 = c0.inv();
        let mut out = ScaledSeries::zeros(SeriesKind::Taylor, self.order);
        out.coeffs[0] = inv0;
        for n in 1..=self.order {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 1..=n {
                acc += self.coeffs[i] * out.coeffs[n - i];
            }
            out.coeffs[n] = -acc * inv0;
        }
        Ok(out)
    }

    /// Compositional inverse of a germ `h` with `h(0) = 0` and `h'(0) != 0`.
    ///
    /// Newton's method on `F(r) = h ∘ r - id`: `r <- r - (h ∘ r - id) / (h' ∘ r)`.
    /// Starting from the linear inverse, each step doubles the number of correct
    /// coefficients, so `ceil(log2 D) + 2` steps reach the truncation order with
    /// one polishing step to spare.
    pub fn reversion(&self) -> Result<ScaledSeries> {
        self.require_taylor()?;
        let h0 = self.coeffs[0];
        if h0.norm() != 0.0 {
            return Err(Error::NonZeroConstant(h0.norm()));
        }
        let d = self.order;
        if d == 0 {
            return Ok(self.clone());
        }
        let h1 = self.coeffs[1];
        if h1.norm() < INVERTIBILITY_THRESHOLD {
            return Err(Error::NotInvertible {
                modulus: h1.norm(),
                threshold: INVERTIBILITY_THRESHOLD,
            });
        }
        let id = ScaledSeries::identity(d);
        let dh = self.derivative();
        let mut r = id.scale_by(h1.inv());
        let steps = (usize::BITS - d.leading_zeros()) as usize + 2;
        for _ in 0..steps {
            let defect = &self.compose(&r)? - &id;
            if defect.is_zero() {
                break;
            }
            let slope = dh.compose(&r)?.reciprocal()?;
            r = &r - &defect.multiply(&slope)?;
        }
        Ok(r)
    }

    /// Horner evaluation of a Taylor series at `z`.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        debug_assert_eq!(self.kind, SeriesKind::Taylor);
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Largest modulus on the circle `|z| = r`, sampled at `points` angles.
    pub fn sup_on_circle(&self, r: f64, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / points as f64;
                self.evaluate(Complex64::from_polar(r, theta)).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ScaledSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.indices().zip(&self.coeffs) {
            if c.norm() == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match self.kind {
                SeriesKind::Taylor => write!(f, "({c})z^{m}")?,
                SeriesKind::Fourier => write!(f, "({c})e[{m}]")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn zip_with(a: &ScaledSeries, b: &ScaledSeries, op: impl Fn(Complex64, Complex64) -> Complex64) -> ScaledSeries {
    if let Err(e) = a.check_same_shape(b) {
        panic!("series arithmetic on mismatched shapes: {e}");
    }
    let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| op(*x, *y)).collect();
    ScaledSeries { coeffs, ..*a }
}

impl Add for &ScaledSeries {
    type Output = ScaledSeries;

    fn add(self, rhs: &ScaledSeries) -> ScaledSeries {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &ScaledSeries {
    type Output = ScaledSeries;

    fn sub(self, rhs: &ScaledSeries) -> ScaledSeries {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl Neg for &ScaledSeries {
    type Output = ScaledSeries;

    fn neg(self) -> ScaledSeries {
        self.scale_real(-1.0)
    }
}

impl Mul<f64> for &ScaledSeries {
    type Output = ScaledSeries;

    fn mul(self, rhs: f64) -> ScaledSeries {
        self.scale_real(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> ScaleIndex {
        ScaleIndex::new(v).unwrap()
    }

    fn real(order: usize, c: &[f64]) -> ScaledSeries {
        ScaledSeries::taylor_real(order, c)
    }

    fn assert_close(a: &ScaledSeries, b: &ScaledSeries, tol: f64) {
        let d = a.max_coeff_distance(b);
        assert!(d <= tol, "distance {d:e} > {tol:e}\n  left:  {a}\n  right: {b}");
    }

    #[test]
    fn scale_index_bounds() {
        assert!(ScaleIndex::new(0.0).is_err());
        assert!(ScaleIndex::new(1.0).is_err());
        assert!(ScaleIndex::new(-0.3).is_err());
        assert!(ScaleIndex::new(f64::NAN).is_err());
        assert_eq!(ScaleIndex::new(0.3).unwrap().value(), 0.3);
        assert!(s(0.6).widen(0.5).is_err());
    }

    #[test]
    fn norm_examples() {
        let x = real(4, &[0.0, 2.0, 3.0]);
        assert!((x.norm(s(0.5)) - 1.75).abs() < 1e-15);
        assert_eq!(ScaledSeries::zeros(SeriesKind::Taylor, 8).norm(s(0.7)), 0.0);
        let z5 = ScaledSeries::basis(SeriesKind::Taylor, 8, 5);
        assert!((z5.norm(s(0.3)) - 0.3f64.powi(5)).abs() < 1e-18);
        assert!(z5.norm(s(0.3)) <= z5.norm(s(0.6)));
    }

    #[test]
    fn fourier_norm_and_log_norm() {
        let mut x = ScaledSeries::zeros(SeriesKind::Fourier, 3);
        x.set(-2, Complex64::new(0.5, 0.0));
        x.set(1, Complex64::new(0.0, 2.0));
        let expected = 0.5 * (4.0 * PI * 0.25).exp() + 2.0 * (2.0 * PI * 0.25).exp();
        assert!((x.norm(s(0.25)) - expected).abs() < 1e-12);
        assert!((x.log_norm(s(0.25)) - expected.ln()).abs() < 1e-12);
        assert_eq!(x.coeff(5), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn multiply_examples() {
        let p = real(4, &[1.0, 1.0]).multiply(&real(4, &[1.0, -1.0])).unwrap();
        assert_close(&p, &real(4, &[1.0, 0.0, -1.0]), 0.0);
        let sq = real(4, &[0.0, 1.0, 1.0]).multiply(&real(4, &[0.0, 1.0, 1.0])).unwrap();
        assert_close(&sq, &real(4, &[0.0, 0.0, 1.0, 2.0, 1.0]), 0.0);
        let zero = ScaledSeries::zeros(SeriesKind::Taylor, 4);
        assert!(real(4, &[3.0, 1.0]).multiply(&zero).unwrap().is_zero());
    }

    #[test]
    fn multiply_rejects_mismatch() {
        let a = real(4, &[1.0]);
        assert!(matches!(a.multiply(&real(5, &[1.0])), Err(Error::OrderMismatch { .. })));
        let f = ScaledSeries::zeros(SeriesKind::Fourier, 4);
        assert!(matches!(a.multiply(&f), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn fourier_multiply_is_truncated_convolution() {
        let mut a = ScaledSeries::zeros(SeriesKind::Fourier, 2);
        let mut b = ScaledSeries::zeros(SeriesKind::Fourier, 2);
        a.set(1, Complex64::new(1.0, 0.0));
        a.set(-1, Complex64::new(2.0, 0.0));
        b.set(2, Complex64::new(3.0, 0.0));
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.coeff(1), Complex64::new(6.0, 0.0));
        // mode 3 is beyond the truncation and dropped
        assert_eq!(p.norm(s(0.1)), 6.0 * (2.0 * PI * 0.1).exp());
    }

    #[test]
    fn compose_examples() {
        let x = real(4, &[0.0, 0.0, 1.0]);
        let h = real(4, &[0.0, 1.0, 1.0]);
        assert_close(&x.compose(&h).unwrap(), &real(4, &[0.0, 0.0, 1.0, 2.0, 1.0]), 0.0);
        let y = real(6, &[0.3, -1.0, 0.5, 0.0, 2.0]);
        assert_close(&y.compose(&ScaledSeries::identity(6)).unwrap(), &y, 0.0);
        assert!(matches!(y.compose(&real(6, &[0.1, 1.0])), Err(Error::NonZeroConstant(_))));
    }

    #[test]
    fn compose_scale_estimate_example() {
        // sup |0.1 z^2| on |z| = 0.5 is 0.025 <= sigma = 0.2
        let x = ScaledSeries::basis(SeriesKind::Taylor, 16, 3);
        let h = real(16, &[0.0, 1.0, 0.1]);
        let lhs = x.compose(&h).unwrap().norm(s(0.5));
        let rhs = x.norm(s(0.7));
        // (0.5 + 0.1 * 0.25)^3 evaluated termwise
        assert!((lhs - 0.525f64.powi(3)).abs() < 1e-14);
        assert!(lhs <= rhs, "{lhs} > {rhs}");
    }

    #[test]
    fn reversion_examples() {
        let r = real(4, &[0.0, 1.0, 1.0]).reversion().unwrap();
        assert_close(&r, &real(4, &[0.0, 1.0, -1.0, 2.0, -5.0]), 1e-14);
        let id = ScaledSeries::identity(9);
        assert_close(&id.reversion().unwrap(), &id, 0.0);
        let c = 1e-4;
        let lin = real(9, &[0.0, 1.0 + c]).reversion().unwrap();
        assert_close(&lin, &real(9, &[0.0, 1.0 / (1.0 + c)]), 1e-15);
    }

    #[test]
    fn reversion_errors() {
        assert!(matches!(
            real(4, &[0.0, 1e-9, 1.0]).reversion(),
            Err(Error::NotInvertible { .. })
        ));
        assert!(matches!(real(4, &[0.5, 1.0]).reversion(), Err(Error::NonZeroConstant(_))));
    }

    #[test]
    fn derivative_examples() {
        let x = ScaledSeries::basis(SeriesKind::Taylor, 5, 3);
        assert_close(&x.derivative(), &real(5, &[0.0, 0.0, 3.0]), 0.0);
        assert!(real(5, &[4.2]).derivative().is_zero());
    }

    #[test]
    fn derivative_cauchy_example() {
        let x = ScaledSeries::basis(SeriesKind::Taylor, 16, 16);
        let lhs = x.derivative().norm(s(0.4));
        let rhs = x.norm(s(0.5)) / 0.1;
        assert!((lhs - 16.0 * 0.4f64.powi(15)).abs() < 1e-18);
        assert!((rhs - 10.0 * 0.5f64.powi(16)).abs() < 1e-18);
        assert!(lhs <= rhs);
    }

    #[test]
    fn reciprocal_of_linear_factor() {
        let r = real(6, &[1.0, 0.6]).reciprocal().unwrap();
        let expected: Vec<f64> = (0..=6).map(|m| (-0.6f64).powi(m)).collect();
        assert_close(&r, &real(6, &expected), 1e-15);
        assert!(matches!(real(6, &[0.0, 1.0]).reciprocal(), Err(Error::ZeroLeadingCoefficient)));
    }

    #[test]
    fn tail_norm_reads_top_band() {
        let mut x = real(16, &[1.0, 1.0]);
        assert_eq!(x.tail_norm(s(0.5)), 0.0);
        x.set(15, Complex64::new(1.0, 0.0));
        let t = x.tail_norm(s(0.5));
        assert!((t / 0.5f64.powi(15) - 1.0).abs() < 1e-14, "{t}");
    }
}
