use std::collections::BTreeMap;

use serde::Serialize;

/// Comparisons allow `1e-10` plus this many ulps per retained coefficient of
/// the running norm.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-10;

/// `1e-10 + D eps |running norm|`.
pub fn noise_allowance(order: usize, running: f64) -> f64 {
    CERTIFICATE_TOLERANCE + order as f64 * f64::EPSILON * running.abs()
}

/// One inequality `measured <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub name: String,
    pub step: Option<usize>,
    pub measured: f64,
    pub bound: f64,
    /// `bound - measured`.
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Advisory checks are recorded but never fail a run.
    pub advisory: bool,
}

impl CertificateCheck {
    pub fn new(name: &str, step: Option<usize>, measured: f64, bound: f64, tolerance: f64, advisory: bool) -> Self {
        CertificateCheck {
            name: name.to_string(),
            step,
            measured,
            bound,
            margin: bound - measured,
            tolerance,
            passed: measured <= bound + tolerance,
            advisory,
        }
    }
}

/// Worst case of every check sharing a name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub count: usize,
    pub failed: usize,
    pub min_margin: f64,
    pub advisory: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CertificateReport {
    pub checks: Vec<CertificateCheck>,
}

impl CertificateReport {
    pub fn push(&mut self, check: CertificateCheck) {
        self.checks.push(check);
    }

    pub fn check(&mut self, name: &str, step: Option<usize>, measured: f64, bound: f64, tolerance: f64) {
        self.push(CertificateCheck::new(name, step, measured, bound, tolerance, false));
    }

    pub fn advise(&mut self, name: &str, step: Option<usize>, measured: f64, bound: f64, tolerance: f64) {
        self.push(CertificateCheck::new(name, step, measured, bound, tolerance, true));
    }

    pub fn extend(&mut self, other: CertificateReport) {
        self.checks.extend(other.checks);
    }

    /// True when every non-advisory check passed.
    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CertificateCheck> {
        self.checks.iter().filter(|c| !c.passed && !c.advisory)
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CertificateCheck> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn summary(&self) -> BTreeMap<String, CheckSummary> {
        let mut out: BTreeMap<String, CheckSummary> = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.name.clone()).or_insert(CheckSummary {
                count: 0,
                failed: 0,
                min_margin: f64::INFINITY,
                advisory: c.advisory,
            });
            e.count += 1;
            e.failed += usize::from(!c.passed);
            e.min_margin = e.min_margin.min(c.margin);
        }
        out
    }

    /// `name@step` of the first failing non-advisory check.
    pub fn first_failure(&self) -> Option<String> {
        self.failures().next().map(|c| match c.step {
            Some(n) => format!("{}@{}", c.name, n),
            None => c.name.clone(),
        })
    }
}
