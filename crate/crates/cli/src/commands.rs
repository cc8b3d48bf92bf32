use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use kamscale::action::{ac_probe_samples, ac_scaling_slope, right_inverse_error, verify_ac};
use kamscale::group::{AlgebraElement, GermGroup, GroupLawSweep};
use kamscale::instances::{
    build_germ_instance, reversion_oracle, scan_loss_exponent, DiophantineSpec, GermAction, GermActionSpec,
    GermInstance, MeasurementConfig,
};
use kamscale::rng;
use kamscale::scale::{measure_operator_norm, read_series, write_series, ScaleGrid, ScaleIndex, ScaledSeries, SeriesKind};
use kamscale::solver::{
    epsilon_closed_form, epsilon_product, quadratic_rate, solve, solve_batch, SolveConfig, SolveResult,
};
use kamscale::Execution;

use crate::config::{ConfigError, InstanceKind, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
    Core(kamscale::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(..) => "io",
            CliError::Core(_) => "numeric",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<kamscale::Error> for CliError {
    fn from(e: kamscale::Error) -> Self {
        CliError::Core(e)
    }
}

/// What a command reports back: whether its asserted checks passed, a
/// `key=value` summary for stdout and the first failure reason.
pub struct Report {
    pub ok: bool,
    pub summary: String,
    pub failure: Option<String>,
}

/// Values go out with 17 significant digits.
fn e17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(path, e))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn measurement_config(cfg: &RunConfig) -> MeasurementConfig {
    MeasurementConfig {
        scales: cfg.grid_s.clone(),
        sigmas: cfg.grid_sigma.clone(),
        samples: cfg.samples,
        seed: cfg.seed,
        decay: cfg.decay,
        safety_factor: cfg.safety_factor,
        exec: Execution::Parallel,
    }
}

fn germ_spec(cfg: &RunConfig) -> Result<GermActionSpec, CliError> {
    Ok(GermActionSpec::from_coeffs(cfg.trunc, &cfg.a_coeffs)?)
}

fn germ_instance(cfg: &RunConfig) -> Result<GermInstance, CliError> {
    Ok(build_germ_instance(&germ_spec(cfg)?, &measurement_config(cfg))?)
}

fn solve_config(cfg: &RunConfig, delta: f64) -> SolveConfig {
    SolveConfig {
        s: cfg.s,
        delta,
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        residual_tol: cfg.residual_tol,
        product_terms: cfg.product_terms,
        safety_factor: None,
    }
}

fn certified_epsilon(gi: &GermInstance, delta: f64) -> Result<f64, CliError> {
    let c = gi.instance.constants();
    Ok(epsilon_closed_form(c.k, c.c_used(), c.nj_used(), delta)?)
}

/// Random input with `|x|_s = fraction * epsilon`.
fn random_input(cfg: &RunConfig, seed: u64, fraction: f64, epsilon: f64) -> Result<ScaledSeries, CliError> {
    let raw = rng::random_series(&mut rng::seeded(seed), SeriesKind::Taylor, cfg.trunc, cfg.decay, 1);
    Ok(rng::rescale_to(&raw, fraction * epsilon, ScaleIndex::new(cfg.s)?))
}

fn rate_text(r: &SolveResult) -> String {
    quadratic_rate(&r.trace).map(e17).unwrap_or_else(|_| "nan".into())
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let gi = germ_instance(cfg)?;
    let epsilon = certified_epsilon(&gi, cfg.delta)?;
    let x = match &cfg.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            read_series(&text)?.0
        }
        None => random_input(cfg, cfg.seed, cfg.fraction, epsilon)?,
    };
    let r = solve(&gi.instance, &x, &solve_config(cfg, cfg.delta))?;

    write_out(out, "trace.csv", &r.trace.to_csv())?;
    write_out(out, "result.json", &(r.to_json() + "\n"))?;
    write_out(out, "solution.txt", &r.g.to_text())?;
    write_out(out, "input.txt", &write_series(&x, &[]))?;
    write_out(out, "instance.json", &pretty(&json!(gi.report)))?;

    let ok = r.converged() && r.certificates.all_passed();
    Ok(Report {
        ok,
        summary: format!(
            "status={} iterations={} residual={:e} input_norm={:e} epsilon={:e}",
            r.status.as_str(),
            r.iterations(),
            r.residual,
            r.input_norm,
            r.epsilon
        ),
        failure: r.failure.clone().or_else(|| (!ok).then(|| "certificate".to_string())),
    })
}

pub fn verify_group(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let grid = ScaleGrid::product(&cfg.grid_s, &cfg.grid_sigma, 2.0)?;
    let sweep = GroupLawSweep { order: cfg.trunc, samples: cfg.samples, seed: cfg.seed, decay: cfg.decay, grid };
    let report = sweep.run(&GermGroup::new(cfg.orientation), Execution::Parallel)?;
    let ok = report.first_inequality_holds() && report.kappa_estimate.is_finite() && report.samples > 0;
    let doc = json!({
        "orientation": cfg.orientation,
        "seed": cfg.seed,
        "grid": sweep.grid.points(),
        "first_inequality_holds": report.first_inequality_holds(),
        "report": report,
    });
    write_out(out, "group_law.json", &pretty(&doc))?;
    Ok(Report {
        ok,
        summary: format!(
            "samples={} skipped={} kappa={:e} margin_first={:e}",
            report.samples, report.skipped, report.kappa_estimate, report.margin_first
        ),
        failure: (!ok).then(|| "group_law:first_inequality".to_string()),
    })
}

/// Scale at which the action scaling slopes are measured.
const SLOPE_SCALE: f64 = 0.5;

pub fn verify_ac_cmd(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let action = GermAction::new(&germ_spec(cfg)?)?;
    let grid = ScaleGrid::product(&cfg.grid_s, &cfg.grid_sigma, 2.0)?;
    let radius = cfg.grid_sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let probes = ac_probe_samples(cfg.trunc, cfg.samples, cfg.seed, cfg.decay, radius)?;
    let report = verify_ac(&action, &probes, &grid, Execution::Parallel)?;

    let ts: Vec<f64> = (0..9).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect();
    let s = ScaleIndex::new(SLOPE_SCALE)?;
    let slopes = (0..20u64)
        .map(|i| {
            let raw = rng::random_series(&mut rng::seeded(rng::derive_seed(cfg.seed, 1000 + i)), SeriesKind::Taylor, cfg.trunc, cfg.decay, 1);
            let xi = AlgebraElement::new(rng::rescale_to(&raw, 1.0, s))?;
            ac_scaling_slope(&action, &xi, s, &ts)
        })
        .collect::<kamscale::Result<Vec<f64>>>()?;
    let slopes_ok = slopes.iter().all(|v| (v - 2.0).abs() <= 0.05);
    let ok = report.c_estimate.is_finite() && slopes_ok;
    let doc = json!({
        "seed": cfg.seed,
        "grid": grid.points(),
        "report": report,
        "scaling": { "s": SLOPE_SCALE, "t": ts, "slopes": slopes, "within_tolerance": slopes_ok },
    });
    write_out(out, "ac.json", &pretty(&doc))?;
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Report {
        ok,
        summary: format!("c={:e} max_ratio={:e} samples={} slopes=[{lo:.4},{hi:.4}]", report.c_estimate, report.max_ratio, report.samples),
        failure: (!ok).then(|| "ac:scaling_slope".to_string()),
    })
}

pub fn measure_j(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    match cfg.instance {
        InstanceKind::Germ => {
            let action = GermAction::new(&germ_spec(cfg)?)?;
            let grid = ScaleGrid::product(&cfg.grid_s, &cfg.grid_sigma, 1.0)?;
            let est = measure_operator_norm(&action.j_operator(), 0, &grid, Execution::Parallel)?;
            let mut r = rng::seeded(rng::derive_seed(cfg.seed, 0x726a));
            let points: Vec<ScaledSeries> =
                (0..32).map(|_| rng::random_series(&mut r, SeriesKind::Taylor, cfg.trunc, cfg.decay, 1)).collect();
            let scales = cfg.grid_s.iter().map(|&s| ScaleIndex::new(s)).collect::<kamscale::Result<Vec<_>>>()?;
            let rj = right_inverse_error(&action, &points, &scales)?;
            let ok = est.norm.is_finite() && rj <= 1e-10;
            write_out(out, "measure_j.json", &pretty(&json!({ "instance": "germ", "estimate": est, "right_inverse_error": rj })))?;
            Ok(Report {
                ok,
                summary: format!("instance=germ k=0 nj={:e} right_inverse_error={rj:e}", est.norm),
                failure: (!ok).then(|| "measure_j:right_inverse".to_string()),
            })
        }
        InstanceKind::Cohomological => {
            let spec = DiophantineSpec { alpha: cfg.alpha, tau: cfg.tau, c: cfg.c, modes: cfg.modes };
            let grid = ScaleGrid::product(&cfg.coh_s, &cfg.coh_sigma, 1.0)?;
            let scan = scan_loss_exponent(&spec, cfg.doublings, cfg.max_k, &grid, cfg.stabilize_tol, Execution::Parallel)?;
            let mut csv = String::from("k,modes,norm\n");
            for (ki, k) in scan.ks.iter().enumerate() {
                for (mi, m) in scan.modes.iter().enumerate() {
                    let _ = writeln!(csv, "{k},{m},{}", e17(scan.norms[ki][mi]));
                }
            }
            write_out(out, "loss_scan.csv", &csv)?;
            write_out(
                out,
                "measure_j.json",
                &pretty(&json!({ "instance": "cohomological", "spec": spec, "margin": spec.margin(), "scan": scan })),
            )?;
            let ok = scan.stabilizing_k.is_some();
            let k = scan.stabilizing_k.map_or("none".to_string(), |k| k.to_string());
            Ok(Report {
                ok,
                summary: format!("instance=cohomological stabilizing_k={k} k0_growth={:e}", scan.growth(0).unwrap_or(f64::NAN)),
                failure: (!ok).then(|| "measure_j:no_stabilizing_k".to_string()),
            })
        }
    }
}

pub fn oracle_compare(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let identity = cfg.a_coeffs.iter().enumerate().all(|(i, &c)| c == if i == 1 { 1.0 } else { 0.0 });
    if !identity || cfg.a_coeffs.len() < 2 {
        return Err(ConfigError { line: None, message: "oracle-compare needs the base point a = id".into() }.into());
    }
    let gi = germ_instance(cfg)?;
    let epsilon = certified_epsilon(&gi, cfg.delta)?;
    let inputs = (0..cfg.samples as u64)
        .map(|i| random_input(cfg, rng::derive_seed(cfg.seed, i), cfg.fraction, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let results = solve_batch(&gi.instance, &inputs, &solve_config(cfg, cfg.delta), Execution::Parallel);
    let mut csv = String::from("index,status,iterations,residual,oracle_gap\n");
    let (mut converged, mut worst) = (0, 0.0f64);
    for (i, (x, r)) in inputs.iter().zip(results).enumerate() {
        let r = r?;
        let gap = r.g.as_map().max_coeff_distance(&reversion_oracle(x)?.as_map());
        converged += usize::from(r.converged());
        worst = worst.max(gap);
        let _ = writeln!(csv, "{i},{},{},{},{}", r.status.as_str(), r.iterations(), e17(r.residual), e17(gap));
    }
    write_out(out, "oracle.csv", &csv)?;
    let ok = converged == inputs.len() && worst <= 1e-10;
    Ok(Report {
        ok,
        summary: format!("solves={} converged={converged} max_oracle_gap={worst:e}", inputs.len()),
        failure: (!ok).then(|| "oracle:mismatch_or_unconverged".to_string()),
    })
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let gi = germ_instance(cfg)?;
    let points: Vec<(f64, f64)> =
        cfg.sweep_deltas.iter().flat_map(|&d| cfg.sweep_fractions.iter().map(move |&f| (d, f))).collect();
    let rows = Execution::Parallel.map_range(points.len(), |i| -> Result<String, CliError> {
        let (delta, fraction) = points[i];
        let epsilon = certified_epsilon(&gi, delta)?;
        let x = random_input(cfg, rng::derive_seed(cfg.seed, i as u64), fraction, epsilon)?;
        let r = solve(&gi.instance, &x, &solve_config(cfg, delta))?;
        Ok(format!("{},{},{},{},{},{}", e17(delta), e17(fraction), r.status.as_str(), r.iterations(), e17(r.residual), rate_text(&r)))
    });
    let mut csv = String::from("delta,fraction,status,iterations,residual,rate\n");
    let mut converged = 0;
    for row in rows {
        let row = row?;
        converged += usize::from(row.contains(",Converged,"));
        csv.push_str(&row);
        csv.push('\n');
    }
    write_out(out, "sweep.csv", &csv)?;
    Ok(Report { ok: true, summary: format!("points={} converged={converged}", points.len()), failure: None })
}

pub fn epsilon_table(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let mut csv = String::from("k,c,Nj,delta,eps_closed,eps_product,rel_err\n");
    let (mut rows, mut worst) = (0, 0.0f64);
    for &k in &cfg.eps_k {
        for &c in &cfg.eps_c {
            for &nj in &cfg.eps_nj {
                for &delta in &cfg.eps_delta {
                    let closed = epsilon_closed_form(k, c, nj, delta)?;
                    let product = epsilon_product(k, c, nj, delta, cfg.eps_terms);
                    let rel = (product / closed - 1.0).abs();
                    worst = worst.max(rel);
                    rows += 1;
                    let _ = writeln!(csv, "{k},{},{},{},{},{},{}", e17(c), e17(nj), e17(delta), e17(closed), e17(product), e17(rel));
                }
            }
        }
    }
    write_out(out, "epsilon_table.csv", &csv)?;
    let ok = worst <= 1e-10;
    Ok(Report {
        ok,
        summary: format!("rows={rows} max_rel_err={worst:e}"),
        failure: (!ok).then(|| "epsilon:rel_err".to_string()),
    })
}
