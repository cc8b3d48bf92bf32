//! Step schedule, the size `epsilon` of the certified ball and the scalar
//! sequences `mu_n`, `g_n` that bound the iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::certificate::{CertificateCheck, CertificateReport};

/// Scales visited by the iteration: `sigma_n = 2^{-(n+2)} delta`,
/// `s_{n+1} = s_n - 2 sigma_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub s: f64,
    pub delta: f64,
    /// `(n, s_n, sigma_n)`.
    pub entries: Vec<(usize, f64, f64)>,
}

impl Schedule {
    pub fn new(s: f64, delta: f64, len: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < s && s < 1.0) {
            return Err(Error::Constraint(format!("need 0 < delta < s < 1, got s = {s}, delta = {delta}")));
        }
        let mut entries = Vec::with_capacity(len);
        let mut s_n = s;
        for n in 0..len {
            let sigma = sigma(delta, n);
            entries.push((n, s_n, sigma));
            s_n -= 2.0 * sigma;
        }
        Ok(Schedule { s, delta, entries })
    }

    pub fn s_at(&self, n: usize) -> f64 {
        self.entries[n].1
    }

    pub fn sigma_at(&self, n: usize) -> f64 {
        self.entries[n].2
    }

    /// The limit scale `s - delta`.
    pub fn floor(&self) -> f64 {
        self.s - self.delta
    }
}

#[inline]
pub fn sigma(delta: f64, n: usize) -> f64 {
    delta * 2f64.powi(-(n as i32) - 2)
}

/// Checks `c >= 1`, `N(j) > 0` and `0 < delta <= 4 N(j)^{1/(k+1)}`.
pub fn check_constants(k: u32, c: f64, nj: f64, delta: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::Constraint(format!("c must be >= 1, got {c}")));
    }
    if !(nj > 0.0 && nj.is_finite()) {
        return Err(Error::Constraint(format!("N(j) must be positive, got {nj}")));
    }
    let cap = delta_cap(k, nj);
    if !(delta > 0.0 && delta <= cap) {
        return Err(Error::Constraint(format!("delta = {delta} must lie in (0, 4 N(j)^(1/(k+1))] = (0, {cap}]")));
    }
    Ok(())
}

/// `4 N(j)^{1/(k+1)}`.
pub fn delta_cap(k: u32, nj: f64) -> f64 {
    4.0 * nj.powf(1.0 / (k as f64 + 1.0))
}

pub fn epsilon_closed_form(k: u32, c: f64, nj: f64, delta: f64) -> Result<f64> {
    check_constants(k, c, nj, delta)?;
    let k = k as i32;
    Ok(delta.powi(2 * k + 2) / (4f64.powi(3 * k + 4) * c * nj * nj))
}

/// `log(c N(j) sigma_m^{-k-1})`.
fn log_factor(k: u32, c: f64, nj: f64, delta: f64, m: usize) -> f64 {
    (c * nj).ln() - (k as f64 + 1.0) * sigma(delta, m).ln()
}

/// `c delta / (16 sigma_0) prod_{m < terms} (c N(j) sigma_m^{-k-1})^{-2^{-m}}`,
/// summed in log space.
pub fn epsilon_product(k: u32, c: f64, nj: f64, delta: f64, terms: usize) -> f64 {
    let head = (c * delta / (16.0 * sigma(delta, 0))).ln();
    let tail: f64 = (0..terms).map(|m| 2f64.powi(-(m as i32)) * log_factor(k, c, nj, delta, m)).sum();
    (head - tail).exp()
}

/// `ln mu_n` with `mu_n = prod_{m >= n+1} (c N(j) sigma_m^{-k-1})^{-2^{-m}}`,
/// truncated to `terms` factors.
pub fn log_mu(n: usize, k: u32, c: f64, nj: f64, delta: f64, terms: usize) -> Result<f64> {
    check_constants(k, c, nj, delta)?;
    Ok(-(n + 1..n + 1 + terms).map(|m| 2f64.powi(-(m as i32)) * log_factor(k, c, nj, delta, m)).sum::<f64>())
}

pub fn mu(n: usize, k: u32, c: f64, nj: f64, delta: f64, terms: usize) -> Result<f64> {
    log_mu(n, k, c, nj, delta, terms).map(f64::exp)
}

/// `(2^{-4} delta mu_n)^{2^n}`, evaluated through logs so that it underflows
/// cleanly to zero.
pub fn lemma1_sharp_bound(n: usize, k: u32, c: f64, nj: f64, delta: f64, terms: usize) -> Result<f64> {
    let log_mu = log_mu(n, k, c, nj, delta, terms)?;
    Ok((2f64.powi(n as i32) * ((delta / 16.0).ln() + log_mu)).exp())
}

/// `(2^{-4} delta)^{2^n}`.
pub fn lemma1_bound(n: usize, delta: f64) -> f64 {
    (2f64.powi(n as i32) * (delta / 16.0).ln()).exp()
}

/// `(1 + kappa) 2^{-2^{n+1}}`.
pub fn lemma3_bound(n: usize, kappa: f64) -> f64 {
    (1.0 + kappa) * 2f64.powf(-2f64.powi(n as i32 + 1))
}

/// `g_0 = 2^{-4}`, `g_n = (1 + 2^{-2^{n+1}}) g_{n-1} + 2^{-2^{n+1}}`.
pub fn g_sequence(n: usize) -> f64 {
    let mut g = 0.0625;
    for m in 1..=n {
        let t = 2f64.powf(-2f64.powi(m as i32 + 1));
        g = (1.0 + t) * g + t;
    }
    g
}

/// All `g_0..=g_n`.
pub fn g_values(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut g = 0.0625;
    out.push(g);
    for m in 1..=n {
        let t = 2f64.powf(-2f64.powi(m as i32 + 1));
        g = (1.0 + t) * g + t;
        out.push(g);
    }
    out
}

/// Checks `(2^{-4} delta)^{2^n} <= sigma_{n+1}` and
/// `sigma_n^{-1} (2^{-4} delta)^{2^n} <= 2^{-2^{n+1}}` for `n = 0..=n_max`.
///
/// Both sides are compared as base-2 logarithms written as `2^n L` against
/// `L + integer`, with `L = log2(delta / 16)`. The powers underflow doubles
/// long before `n = 10`, and at `n = 0` the second inequality is an equality
/// that this form reproduces bit for bit.
pub fn verify_preliminary_remark(delta: f64, n_max: usize) -> CertificateReport {
    let mut report = CertificateReport::default();
    if !(delta > 0.0 && delta < 1.0) {
        let mut check = CertificateCheck::new("preliminary_remark_domain", None, delta, 1.0, 0.0, false);
        check.passed = false;
        report.push(check);
        return report;
    }
    let l = (delta / 16.0).log2();
    for n in 0..=n_max {
        let lhs = 2f64.powi(n as i32) * l;
        // sigma_{n+1} = (delta / 16) 2^{1-n}
        let sigma_next = l + (1 - n as i64) as f64;
        report.push(CertificateCheck::new("preliminary_remark_log2", Some(n), lhs, sigma_next, 0.0, false));
        // 2^{-2^{n+1}} sigma_n = (delta / 16) 2^{2 - n - 2^{n+1}}
        let aux = l + (2 - n as i64 - (1i64 << (n + 1))) as f64;
        report.push(CertificateCheck::new("lemma2_auxiliary_log2", Some(n), lhs, aux, 0.0, false));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn schedule_telescopes() {
        let sch = Schedule::new(0.9, 0.5, 40).unwrap();
        for &(n, s_n, sigma_n) in &sch.entries {
            assert_eq!(sigma_n, 0.5 * 2f64.powi(-(n as i32) - 2));
            assert!((0.9 - s_n - 0.5 * (1.0 - 2f64.powi(-(n as i32)))).abs() < 1e-15);
            assert!(s_n > sch.floor());
        }
        assert!(Schedule::new(0.5, 0.5, 3).is_err());
        assert!(Schedule::new(0.9, 0.0, 3).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(epsilon_closed_form(0, 1.0, 1.0, 0.5).unwrap(), 9.765625e-4);
        assert_eq!(epsilon_closed_form(0, 1.0, 1.0, 1.0).unwrap(), 1.0 / 256.0);
        assert!(rel(epsilon_closed_form(1, 2.0, 1.0, 0.5).unwrap(), 0.0625 / 32768.0) < 1e-15);
        assert!(epsilon_closed_form(0, 0.5, 1.0, 0.5).is_err());
        assert!(epsilon_closed_form(0, 1.0, 0.01, 0.5).is_err());
    }

    #[test]
    fn product_converges_to_closed_form() {
        assert!(rel(epsilon_product(0, 1.0, 1.0, 0.5, 1), 0.03125) < 1e-15);
        for k in 0..3 {
            for c in [1.0, 2.0] {
                for nj in [1.0, 3.0] {
                    for delta in [0.1, 0.5, 0.9] {
                        let closed = epsilon_closed_form(k, c, nj, delta).unwrap();
                        assert!(rel(epsilon_product(k, c, nj, delta, 60), closed) < 1e-10);
                    }
                }
            }
        }
        let errs: Vec<f64> =
            [5, 10, 20, 40].iter().map(|&t| rel(epsilon_product(0, 1.0, 1.0, 0.5, t), 9.765625e-4)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mu_identities() {
        let (k, c, nj, delta) = (1, 1.5, 2.0, 0.6);
        for n in 1..=6 {
            let p = 2f64.powi(n as i32);
            let lhs = p * log_mu(n - 1, k, c, nj, delta, 60).unwrap();
            let rhs = -log_factor(k, c, nj, delta, n) + p * log_mu(n, k, c, nj, delta, 60).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
        let eps = epsilon_closed_form(k, c, nj, delta).unwrap();
        let mu0 = mu(0, k, c, nj, delta, 60).unwrap();
        assert!(rel(nj * sigma(delta, 0).powi(-(k as i32)) * eps, delta / 16.0 * mu0) < 1e-10);
        let mus: Vec<f64> = (0..30).map(|n| mu(n, k, c, nj, delta, 60).unwrap()).collect();
        assert!(mus.iter().all(|&m| m <= 1.0));
        assert!(mus.windows(2).all(|w| w[1] >= w[0]));
        assert!(1.0 - mus[29] < 1e-6);
        assert!(mu(0, 0, 1.0, 1.0, 5.0, 60).is_err());
    }

    #[test]
    fn g_sequence_values() {
        assert_eq!(g_sequence(0), 0.0625);
        assert_eq!(g_sequence(1), 0.12890625);
        let gs = g_values(30);
        assert!(gs.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(gs[5], g_sequence(5));
        // 1 + g_inf = (17/16) (16/15)
        assert!((gs[30] - 2.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn preliminary_remark_examples() {
        assert!(lemma1_bound(0, 0.5) <= sigma(0.5, 1));
        assert!((lemma1_bound(1, 0.5) - 9.765625e-4).abs() < 1e-18);
        assert!(lemma1_bound(1, 0.5) <= sigma(0.5, 2));
        for delta in [0.1, 0.5, 0.99] {
            let report = verify_preliminary_remark(delta, 10);
            assert_eq!(report.checks.len(), 22);
            assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
        }
        // the auxiliary inequality is tight at n = 0
        let first = &verify_preliminary_remark(0.3, 0).checks[1];
        assert_eq!(first.measured, first.bound);
        assert!(!verify_preliminary_remark(1.0, 3).all_passed());
    }
}
