//! The quadratically convergent iteration that solves `g . 0_E = x`.
//!
//! Starting from `xi_0 = j(x)` the solver runs `xi_{n+1} = phi(xi_n)` on the
//! schedule `(s_n, sigma_n)`, moves the target by `x_{n+1} = (e^{xi_n})^{-1} x_n`
//! and accumulates `gamma_n = log(e^{gamma_{n-1}} e^{xi_n})`. Every step is
//! checked against the bounds that make the iteration converge; the answer is
//! `g = e^{gamma}` for the last `gamma`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::action::{phi_step, ActionInstance, MeasuredConstants};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{AlgebraElement, GroupElement};
use crate::scale::{ScaleIndex, ScaledSeries};
use crate::solver::certificate::{noise_allowance, CertificateReport};
use crate::solver::schedule::{
    check_constants, epsilon_closed_form, g_sequence, lemma1_bound, lemma1_sharp_bound, lemma3_bound, mu, Schedule,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveConfig {
    pub s: f64,
    pub delta: f64,
    pub max_iter: usize,
    /// Stop once `|xi_n|_{s_{n+1}}` drops below this.
    pub tol: f64,
    /// Largest accepted residual `|g . 0 - x|_{(s-delta)/2}`.
    pub residual_tol: f64,
    /// Factors kept in the products defining `mu_n`.
    pub product_terms: usize,
    /// Replaces the instance's safety factor when set.
    pub safety_factor: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            s: 0.9,
            delta: 0.5,
            max_iter: 12,
            tol: 1e-13,
            residual_tol: 1e-10,
            product_terms: 60,
            safety_factor: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    DomainGuardTripped,
    CertificateFailed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::DomainGuardTripped => "DomainGuardTripped",
            SolveStatus::CertificateFailed => "CertificateFailed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub s_n: f64,
    pub sigma_n: f64,
    /// `|xi_n|_{s_{n+1}}`.
    pub xi_norm: f64,
    /// `(2^{-4} delta)^{2^n}`.
    pub lemma1_bound: f64,
    /// `(2^{-4} delta mu_n)^{2^n}`.
    pub lemma1_sharp: f64,
    pub mu_n: f64,
    /// `|gamma_n|_{s_{n+1}}`.
    pub gamma_norm: f64,
    pub g_n: f64,
    /// `|x_n|_{s_n}`.
    pub x_norm: f64,
    /// `|gamma_n - gamma_{n-1}|_{s-delta}`.
    pub cauchy_inc: f64,
    pub lemma3_bound: f64,
}

pub const TRACE_HEADER: &str = "n,s_n,sigma_n,xi_norm,lemma1_bound,mu_n,gamma_norm,g_n,x_norm,cauchy_inc,lemma3_bound";

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn xi_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.xi_norm).collect()
    }

    /// CSV with a header line and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.n,
                r.s_n,
                r.sigma_n,
                r.xi_norm,
                r.lemma1_bound,
                r.mu_n,
                r.gamma_norm,
                r.g_n,
                r.x_norm,
                r.cauchy_inc,
                r.lemma3_bound
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub g: GroupElement,
    /// `|g . 0_E - x|_{(s-delta)/2}`.
    pub residual: f64,
    pub trace: IterationTrace,
    pub certificates: CertificateReport,
    pub status: SolveStatus,
    /// Machine-readable reason for a non-converged status.
    pub failure: Option<String>,
    pub config: SolveConfig,
    pub constants: MeasuredConstants,
    /// Radius of the certified ball with the inflated constants.
    pub epsilon: f64,
    /// Same with the raw measured constants.
    pub epsilon_raw: f64,
    /// `|x|_s`.
    pub input_norm: f64,
    /// `|log g|_{s-delta}`.
    pub log_norm: f64,
    /// Norm of the top coefficient band of `log g` at `s - delta`.
    pub truncation_noise: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary<'a> {
    pub status: SolveStatus,
    pub failure: Option<&'a str>,
    pub iterations: usize,
    pub residual: f64,
    pub input_norm: f64,
    pub epsilon: f64,
    pub epsilon_raw: f64,
    pub input_certified: bool,
    pub log_norm: f64,
    pub truncation_noise: f64,
    pub quadratic_rate: Option<f64>,
    pub config: &'a SolveConfig,
    pub constants: &'a MeasuredConstants,
    pub c_used: f64,
    pub nj_used: f64,
    pub kappa_used: f64,
    pub certificates: std::collections::BTreeMap<String, crate::solver::certificate::CheckSummary>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Whether `|x|_s <= epsilon` held for the inflated constants.
    pub fn input_certified(&self) -> bool {
        self.certificates.named("input_ball").all(|c| c.passed)
    }

    pub fn summary(&self) -> SolveSummary<'_> {
        SolveSummary {
            status: self.status,
            failure: self.failure.as_deref(),
            iterations: self.iterations(),
            residual: self.residual,
            input_norm: self.input_norm,
            epsilon: self.epsilon,
            epsilon_raw: self.epsilon_raw,
            input_certified: self.input_certified(),
            log_norm: self.log_norm,
            truncation_noise: self.truncation_noise,
            quadratic_rate: quadratic_rate(&self.trace).ok(),
            config: &self.config,
            constants: &self.constants,
            c_used: self.constants.c_used(),
            nj_used: self.constants.nj_used(),
            kappa_used: self.constants.kappa_used(),
            certificates: self.certificates.summary(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

enum Outcome {
    Converged,
    MaxIterations,
    DomainGuard(String),
}

/// Solves `g . 0_E = x` for `g` near the identity.
///
/// Returns `Err` only for malformed input (wrong shape, violated constant
/// constraints, scales outside `(0, 1)`) or a numerical breakdown of the
/// underlying series operations. Iterations that leave the certified regime
/// come back as a [`SolveResult`] whose status says why.
pub fn solve(instance: &ActionInstance, x: &ScaledSeries, cfg: &SolveConfig) -> Result<SolveResult> {
    let instance = match cfg.safety_factor {
        Some(f) => instance.with_constants(MeasuredConstants { safety_factor: f, ..*instance.constants() })?,
        None => instance.clone(),
    };
    let consts = *instance.constants();
    let action = instance.action();
    action.check_point(x)?;
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::Constraint("tol must be positive and max_iter at least 1".into()));
    }
    let order = action.order();
    let (k, delta, terms) = (consts.k, cfg.delta, cfg.product_terms);
    let (c, nj, kappa) = (consts.c_used(), consts.nj_used(), consts.kappa_used());

    let schedule = Schedule::new(cfg.s, delta, cfg.max_iter + 2)?;
    check_constants(k, c, nj, delta)?;
    let epsilon = epsilon_closed_form(k, c, nj, delta)?;
    let epsilon_raw = epsilon_closed_form(k, consts.c, consts.nj, delta)?;
    let s0 = ScaleIndex::new(cfg.s)?;
    let floor = ScaleIndex::new(schedule.floor())?;
    let half = ScaleIndex::new(schedule.floor() / 2.0)?;

    let mut report = CertificateReport::default();
    let input_norm = x.norm(s0);
    report.check("input_ball", None, input_norm, epsilon, noise_allowance(order, epsilon));
    report.advise("input_ball_raw", None, input_norm, epsilon_raw, noise_allowance(order, epsilon_raw));

    let group = *action.group();
    let mut trace = IterationTrace::default();
    let mut gamma = AlgebraElement::zero(order);
    let mut outcome = Outcome::Converged;

    if !x.is_zero() {
        let mut xi = instance.j(x)?;
        let mut x_n = x.clone();
        let mut cauchy_sum = 0.0;
        let mut cauchy_cap = 0.0;
        for n in 0..cfg.max_iter {
            let s_next = ScaleIndex::new(schedule.s_at(n + 1))?;
            let xi_norm = xi.norm(s_next);
            let x_norm = x_n.norm(ScaleIndex::new(schedule.s_at(n))?);
            let slack = order as f64 * f64::EPSILON * (1.0 + x_norm);

            let rho_gap = (&instance.rho(&xi)? - &x_n).norm(s_next);
            report.check("invariant_rho", Some(n), rho_gap, cfg.tol, slack);
            let j_gap = (instance.j(&x_n)?.series() - xi.series()).norm(s_next);
            report.check("invariant_j", Some(n), j_gap, cfg.tol, slack);

            let l1 = lemma1_bound(n, delta);
            let l1_sharp = lemma1_sharp_bound(n, k, c, nj, delta, terms)?;
            let xi_tol = noise_allowance(order, xi_norm);
            report.check("lemma1", Some(n), xi_norm, l1, xi_tol);
            report.check("lemma1_sharp", Some(n), xi_norm, l1_sharp, xi_tol);
            if let Ok(raw) = lemma1_sharp_bound(n, k, consts.c, consts.nj, delta, terms) {
                report.advise("lemma1_sharp_raw", Some(n), xi_norm, raw, xi_tol);
            }

            let next = if n == 0 { xi.clone() } else { group.log_product(&gamma, &xi)? };
            let gamma_norm = next.norm(s_next);
            let g_n = g_sequence(n);
            report.check("lemma2", Some(n), gamma_norm, g_n, noise_allowance(order, gamma_norm));
            report.check("lemma2_unit", Some(n), g_n, 1.0, 0.0);

            let inc = (next.series() - gamma.series()).norm(floor);
            let l3 = lemma3_bound(n, kappa);
            report.check("lemma3", Some(n), inc, l3, noise_allowance(order, inc));
            report.advise("lemma3_raw", Some(n), inc, lemma3_bound(n, consts.kappa), noise_allowance(order, inc));
            cauchy_sum += inc;
            cauchy_cap += l3;

            trace.rows.push(TraceRow {
                n,
                s_n: schedule.s_at(n),
                sigma_n: schedule.sigma_at(n),
                xi_norm,
                lemma1_bound: l1,
                lemma1_sharp: l1_sharp,
                mu_n: mu(n, k, c, nj, delta, terms)?,
                gamma_norm,
                g_n,
                x_norm,
                cauchy_inc: inc,
                lemma3_bound: l3,
            });
            gamma = next;

            if xi_norm < cfg.tol {
                break;
            }
            if n + 1 == cfg.max_iter {
                outcome = Outcome::MaxIterations;
                break;
            }
            let sigma_next = schedule.sigma_at(n + 1);
            if xi_norm > sigma_next {
                outcome = Outcome::DomainGuard(format!("domain_guard@{n}: |xi|={xi_norm:e} > sigma={sigma_next:e}"));
                break;
            }
            let step = match phi_step(&instance, &xi, ScaleIndex::new(schedule.s_at(n + 2))?, sigma_next) {
                Ok(step) => step,
                Err(Error::DomainGuard { norm, radius }) => {
                    outcome = Outcome::DomainGuard(format!("domain_guard@{n}: |xi|={norm:e} > sigma={radius:e}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            report.check("phi_bound", Some(n), step.norm, step.bound, noise_allowance(order, step.bound));
            report.advise("phi_bound_raw", Some(n), step.norm, step.raw_bound, noise_allowance(order, step.raw_bound));
            x_n = action.act_exp_inverse(&xi, &x_n)?;
            xi = step.value;
        }
        report.check("lemma3_sum", None, cauchy_sum, cauchy_cap, noise_allowance(order, cauchy_sum));
    }

    let g = GroupElement::new(gamma)?;
    let residual = (&action.act(&g, &action.origin())? - x).norm(half);
    let log_norm = g.displacement().norm(floor);
    report.check("chart", None, log_norm, 1.0, noise_allowance(order, log_norm));
    report.check("residual", None, residual, cfg.residual_tol, 0.0);

    let (status, failure) = match outcome {
        Outcome::DomainGuard(reason) => (SolveStatus::DomainGuardTripped, Some(reason)),
        Outcome::MaxIterations => (
            SolveStatus::MaxIterations,
            Some(format!("max_iterations: |xi| still above tol after {} steps", cfg.max_iter)),
        ),
        Outcome::Converged => match report.first_failure() {
            None => (SolveStatus::Converged, None),
            Some(which) => (SolveStatus::CertificateFailed, Some(format!("certificate:{which}"))),
        },
    };
    Ok(SolveResult {
        truncation_noise: g.displacement().series().tail_norm(floor),
        g,
        residual,
        trace,
        certificates: report,
        status,
        failure,
        config: *cfg,
        constants: consts,
        epsilon,
        epsilon_raw,
        input_norm,
        log_norm,
    })
}

/// Independent solves, one per input, in input order.
pub fn solve_batch(
    instance: &ActionInstance,
    inputs: &[ScaledSeries],
    cfg: &SolveConfig,
    exec: Execution,
) -> Vec<Result<SolveResult>> {
    exec.map(inputs, |x| solve(instance, x, cfg))
}

/// Eligible steps have `|xi_n|` inside this window and a nonzero successor.
pub const RATE_WINDOW: (f64, f64) = (1e-14, 1e-1);

/// Median of `log|xi_{n+1}| / log|xi_n|` over eligible consecutive steps.
/// Needs at least two such ratios, i.e. three recorded steps.
pub fn quadratic_rate(trace: &IterationTrace) -> Result<f64> {
    let norms = trace.xi_norms();
    let mut ratios: Vec<f64> = norms
        .windows(2)
        .filter(|w| w[0] > RATE_WINDOW.0 && w[0] < RATE_WINDOW.1 && w[1] > 0.0)
        .map(|w| w[1].ln() / w[0].ln())
        .collect();
    if ratios.len() < 2 {
        return Err(Error::InsufficientSteps { needed: 2, found: ratios.len() });
    }
    ratios.sort_by(f64::total_cmp);
    let mid = ratios.len() / 2;
    Ok(if ratios.len().is_multiple_of(2) { 0.5 * (ratios[mid - 1] + ratios[mid]) } else { ratios[mid] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{build_germ_instance, reversion_oracle, GermActionSpec, MeasurementConfig};
    use crate::rng;
    use crate::scale::SeriesKind;

    fn identity_instance(order: usize) -> ActionInstance {
        let cfg = MeasurementConfig { samples: 40, ..MeasurementConfig::default() };
        build_germ_instance(&GermActionSpec::identity(order), &cfg).unwrap().instance
    }

    fn trace_of(norms: &[f64]) -> IterationTrace {
        IterationTrace {
            rows: norms
                .iter()
                .enumerate()
                .map(|(n, &xi_norm)| TraceRow {
                    n,
                    s_n: 0.5,
                    sigma_n: 0.1,
                    xi_norm,
                    lemma1_bound: 1.0,
                    lemma1_sharp: 1.0,
                    mu_n: 1.0,
                    gamma_norm: 0.0,
                    g_n: 0.0625,
                    x_norm: 0.0,
                    cauchy_inc: 0.0,
                    lemma3_bound: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_input_needs_no_iterations() {
        let inst = identity_instance(16);
        let r = solve(&inst, &ScaledSeries::zeros(SeriesKind::Taylor, 16), &SolveConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.residual, 0.0);
        assert!(r.g.displacement().is_zero());
        assert!(matches!(quadratic_rate(&r.trace), Err(Error::InsufficientSteps { .. })));
    }

    #[test]
    fn linear_input_matches_closed_form() {
        let inst = identity_instance(32);
        let x = ScaledSeries::taylor_real(32, &[0.0, 1e-4]);
        let r = solve(&inst, &x, &SolveConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "{:?}", r.failure);
        let expected = ScaledSeries::taylor_real(32, &[0.0, 1.0 / (1.0 + 1e-4)]);
        assert!(r.g.as_map().max_coeff_distance(&expected) < 1e-10);
    }

    #[test]
    fn polynomial_input_matches_reversion() {
        let inst = identity_instance(32);
        let x = ScaledSeries::taylor_real(32, &[0.0, 1e-4, 0.5e-4, 0.25e-4]);
        let r = solve(&inst, &x, &SolveConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "{:?}", r.failure);
        let oracle = reversion_oracle(&x).unwrap();
        assert!(r.g.as_map().max_coeff_distance(&oracle.as_map()) < 1e-10);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn certified_run_is_quadratic_and_bounded() {
        let inst = identity_instance(32);
        let cfg = SolveConfig::default();
        let eps = epsilon_closed_form(0, inst.constants().c_used(), inst.constants().nj_used(), 0.5).unwrap();
        let raw = rng::random_series(&mut rng::seeded(3), SeriesKind::Taylor, 32, 0.5, 1);
        let x = rng::rescale_to(&raw, eps / 2.0, ScaleIndex::new(0.9).unwrap());
        let r = solve(&inst, &x, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "{:?}", r.failure);
        assert!(r.certificates.all_passed());
        for row in &r.trace.rows {
            assert!(row.xi_norm <= row.lemma1_sharp + 1e-10);
            assert!(row.lemma1_sharp <= row.lemma1_bound);
            assert!(row.gamma_norm <= row.g_n && row.g_n <= 1.0);
            assert!(row.cauchy_inc <= row.lemma3_bound + 1e-10);
        }
        let rate = quadratic_rate(&r.trace).unwrap();
        assert!((1.7..=2.3).contains(&rate), "{rate} {:?}", r.trace.xi_norms());
    }

    #[test]
    fn far_input_is_never_reported_converged() {
        let inst = identity_instance(32);
        let cfg = SolveConfig::default();
        let raw = rng::random_series(&mut rng::seeded(42), SeriesKind::Taylor, 32, 0.5, 1);
        let eps = epsilon_closed_form(0, inst.constants().c_used(), inst.constants().nj_used(), 0.5).unwrap();
        let x = rng::rescale_to(&raw, 50.0 * eps, ScaleIndex::new(0.9).unwrap());
        let r = solve(&inst, &x, &cfg).unwrap();
        assert_ne!(r.status, SolveStatus::Converged);
        assert!(r.failure.is_some());
        assert!(!r.input_certified());
    }

    #[test]
    fn tiny_budget_hits_max_iterations() {
        let inst = identity_instance(16);
        let x = ScaledSeries::taylor_real(16, &[0.0, 1e-4]);
        let r = solve(&inst, &x, &SolveConfig { max_iter: 1, ..SolveConfig::default() }).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIterations);
    }

    #[test]
    fn rejects_bad_config_and_input() {
        let inst = identity_instance(16);
        let x = ScaledSeries::taylor_real(16, &[0.0, 1e-4]);
        assert!(solve(&inst, &x, &SolveConfig { delta: 0.95, ..SolveConfig::default() }).is_err());
        assert!(solve(&inst, &ScaledSeries::taylor_real(16, &[1e-3, 1e-4]), &SolveConfig::default()).is_err());
        assert!(solve(&inst, &ScaledSeries::taylor_real(8, &[0.0, 1e-4]), &SolveConfig::default()).is_err());
    }

    #[test]
    fn rate_of_synthetic_traces() {
        let healthy = trace_of(&[1e-3, 1e-6, 1e-12, 1e-24]);
        assert!((quadratic_rate(&healthy).unwrap() - 2.0).abs() < 1e-12);
        let stalled = trace_of(&[1e-2, 0.9e-2, 0.85e-2, 0.8e-2, 0.78e-2]);
        assert!((quadratic_rate(&stalled).unwrap() - 1.0).abs() < 0.05);
        assert!(quadratic_rate(&trace_of(&[1e-3, 1e-6])).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = trace_of(&[1e-3, 1e-6]).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,5.0000000000000000e-1,"));
        assert_eq!(lines[1].split(',').count(), 11);
    }

    #[test]
    fn batch_matches_single_solves() {
        let inst = identity_instance(16);
        let inputs: Vec<ScaledSeries> =
            (1..5).map(|i| ScaledSeries::taylor_real(16, &[0.0, 1e-5 * i as f64, 1e-6])).collect();
        let cfg = SolveConfig::default();
        let par = solve_batch(&inst, &inputs, &cfg, Execution::Parallel);
        let seq = solve_batch(&inst, &inputs, &cfg, Execution::Sequential);
        for (p, s) in par.iter().zip(&seq) {
            let (p, s) = (p.as_ref().unwrap(), s.as_ref().unwrap());
            assert_eq!(p.g, s.g);
            assert_eq!(p.trace, s.trace);
        }
    }
}
