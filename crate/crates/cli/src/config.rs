//! `key = value` run configuration with `#` comments.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use kamscale::group::ProductOrientation;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    Germ,
    Cohomological,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub trunc: usize,
    pub a_coeffs: Vec<f64>,

    pub s: f64,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub safety_factor: f64,
    pub product_terms: usize,

    pub seed: u64,
    pub input: Option<PathBuf>,
    pub fraction: f64,
    pub decay: f64,
    pub samples: usize,
    pub grid_s: Vec<f64>,
    pub grid_sigma: Vec<f64>,
    pub orientation: ProductOrientation,

    pub instance: InstanceKind,
    pub alpha: f64,
    pub tau: f64,
    pub c: f64,
    pub modes: usize,
    pub doublings: usize,
    pub max_k: u32,
    pub stabilize_tol: f64,
    pub coh_s: Vec<f64>,
    pub coh_sigma: Vec<f64>,

    pub sweep_deltas: Vec<f64>,
    pub sweep_fractions: Vec<f64>,

    pub eps_k: Vec<u32>,
    pub eps_c: Vec<f64>,
    pub eps_nj: Vec<f64>,
    pub eps_delta: Vec<f64>,
    pub eps_terms: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trunc: 32,
            a_coeffs: vec![0.0, 1.0],
            s: 0.9,
            delta: 0.5,
            tol: 1e-13,
            max_iter: 12,
            residual_tol: 1e-10,
            safety_factor: 1.5,
            product_terms: 60,
            seed: 42,
            input: None,
            fraction: 0.5,
            decay: 0.5,
            samples: 200,
            grid_s: vec![0.2, 0.4, 0.6, 0.8],
            grid_sigma: vec![0.02, 0.05, 0.1],
            orientation: ProductOrientation::Composition,
            instance: InstanceKind::Germ,
            alpha: (5f64.sqrt() - 1.0) / 2.0,
            tau: 1.0,
            c: 1.0,
            modes: 32,
            doublings: 4,
            max_k: 4,
            stabilize_tol: 0.1,
            coh_s: vec![0.1, 0.3, 0.5, 0.7],
            coh_sigma: vec![1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2],
            sweep_deltas: vec![0.2, 0.4, 0.6],
            sweep_fractions: vec![0.25, 0.5, 1.0],
            eps_k: vec![0, 1, 2],
            eps_c: vec![1.0, 2.0],
            eps_nj: vec![1.0, 3.0],
            eps_delta: vec![0.1, 0.5, 0.9],
            eps_terms: 60,
        }
    }
}

fn parse_one<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| err(Some(line), format!("cannot parse {key} = {v:?}")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    let items: Vec<T> = v.split(',').map(|p| parse_one(line, key, p.trim())).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(err(Some(line), format!("{key} is empty")));
    }
    Ok(items)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(None, format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(input) = &cfg.input {
            if input.is_relative() {
                cfg.input = Some(path.parent().unwrap_or(Path::new(".")).join(input));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| err(Some(line), format!("expected key = value, got {body:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(Some(line), format!("duplicate key {key}")));
            }
            match key {
                "trunc" => cfg.trunc = parse_one(line, key, v)?,
                "a.coeffs" => cfg.a_coeffs = parse_list(line, key, v)?,
                "s" => cfg.s = parse_one(line, key, v)?,
                "delta" => cfg.delta = parse_one(line, key, v)?,
                "tol" => cfg.tol = parse_one(line, key, v)?,
                "max_iter" => cfg.max_iter = parse_one(line, key, v)?,
                "residual_tol" => cfg.residual_tol = parse_one(line, key, v)?,
                "safety_factor" => cfg.safety_factor = parse_one(line, key, v)?,
                "product_terms" => cfg.product_terms = parse_one(line, key, v)?,
                "seed" => cfg.seed = parse_one(line, key, v)?,
                "input" => cfg.input = Some(PathBuf::from(v)),
                "fraction" => cfg.fraction = parse_one(line, key, v)?,
                "decay" => cfg.decay = parse_one(line, key, v)?,
                "samples" => cfg.samples = parse_one(line, key, v)?,
                "grid.s" => cfg.grid_s = parse_list(line, key, v)?,
                "grid.sigma" => cfg.grid_sigma = parse_list(line, key, v)?,
                "orientation" => {
                    cfg.orientation = match v {
                        "composition" => ProductOrientation::Composition,
                        "reversed" => ProductOrientation::Reversed,
                        _ => return Err(err(Some(line), format!("orientation must be composition or reversed, got {v}"))),
                    }
                }
                "instance" => {
                    cfg.instance = match v {
                        "germ" => InstanceKind::Germ,
                        "cohomological" => InstanceKind::Cohomological,
                        _ => return Err(err(Some(line), format!("instance must be germ or cohomological, got {v}"))),
                    }
                }
                "alpha" => cfg.alpha = parse_one(line, key, v)?,
                "tau" => cfg.tau = parse_one(line, key, v)?,
                "C" => cfg.c = parse_one(line, key, v)?,
                "modes" => cfg.modes = parse_one(line, key, v)?,
                "doublings" => cfg.doublings = parse_one(line, key, v)?,
                "max_k" => cfg.max_k = parse_one(line, key, v)?,
                "stabilize_tol" => cfg.stabilize_tol = parse_one(line, key, v)?,
                "coh.s" => cfg.coh_s = parse_list(line, key, v)?,
                "coh.sigma" => cfg.coh_sigma = parse_list(line, key, v)?,
                "sweep.deltas" => cfg.sweep_deltas = parse_list(line, key, v)?,
                "sweep.fractions" => cfg.sweep_fractions = parse_list(line, key, v)?,
                "eps.k" => cfg.eps_k = parse_list(line, key, v)?,
                "eps.c" => cfg.eps_c = parse_list(line, key, v)?,
                "eps.nj" => cfg.eps_nj = parse_list(line, key, v)?,
                "eps.delta" => cfg.eps_delta = parse_list(line, key, v)?,
                "eps.terms" => cfg.eps_terms = parse_one(line, key, v)?,
                _ => return Err(err(Some(line), format!("unknown key {key}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta < self.s && self.s < 1.0) {
            return Err(err(None, format!("need 0 < delta < s < 1, got s = {}, delta = {}", self.s, self.delta)));
        }
        if !(self.tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(err(None, "tol and residual_tol must be positive"));
        }
        if self.trunc < 1 || self.max_iter < 1 || self.product_terms < 1 || self.eps_terms < 1 {
            return Err(err(None, "trunc, max_iter, product_terms and eps.terms must be at least 1"));
        }
        if !(self.fraction >= 0.0) || !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(err(None, "fraction must be >= 0 and decay in (0, 1)"));
        }
        if self.sweep_deltas.iter().any(|&d| !(d > 0.0 && d < self.s)) {
            return Err(err(None, "every sweep delta must lie in (0, s)"));
        }
        Ok(())
    }
}
