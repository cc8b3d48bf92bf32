//! Schedules, certified constants and the solver for `g . 0_E = x`.

pub mod certificate;
pub mod iterate;
pub mod schedule;

pub use certificate::{noise_allowance, CertificateCheck, CertificateReport, CheckSummary, CERTIFICATE_TOLERANCE};
pub use iterate::{
    quadratic_rate, solve, solve_batch, IterationTrace, SolveConfig, SolveResult, SolveStatus, SolveSummary, TraceRow,
    RATE_WINDOW, TRACE_HEADER,
};
pub use schedule::{
    check_constants, delta_cap, epsilon_closed_form, epsilon_product, g_sequence, g_values, lemma1_bound,
    lemma1_sharp_bound, lemma3_bound, log_mu, mu, sigma, verify_preliminary_remark, Schedule,
};
