//! Run parameters: built-in defaults, then a JSON config file, then command-line flags.

use std::path::{Path, PathBuf};

use eqg_core::elliptic_core::EllipticParams;
use eqg_core::{c64, C64};
use serde::Deserialize;

use crate::report::Failure;

/// Complex number in a config file: either a bare real or `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for C64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(re) => c64(re, 0.0),
            ComplexValue::Pair([re, im]) => c64(re, im),
        }
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub tau: Option<ComplexValue>,
    pub eta: Option<ComplexValue>,
    pub p: Option<ComplexValue>,
    #[serde(rename = "N")]
    pub level: Option<i64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub lambdas: Option<Vec<ComplexValue>>,
    pub z: Option<Vec<ComplexValue>>,
    pub c: Option<ComplexValue>,
    pub w: Option<ComplexValue>,
    pub w2: Option<ComplexValue>,
    pub lambda: Option<ComplexValue>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

/// Parses `a`, `a,b`, `a+bi`, `a-bi` or `bi`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let s = s.trim().replace(' ', "");
    let bad = || format!("cannot read '{s}' as a complex number");
    if let Some((re, im)) = s.split_once(',') {
        return Ok(c64(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?));
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().map(|re| c64(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not the leading sign or part of an exponent.
    let split = body
        .char_indices()
        .filter(|&(k, ch)| (ch == '+' || ch == '-') && k > 0 && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
        .map(|(k, _)| k)
        .last();
    let coefficient = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => t.parse().map_err(|_| bad()),
    };
    match split {
        Some(k) => Ok(c64(body[..k].parse().map_err(|_| bad())?, coefficient(&body[k..])?)),
        None => Ok(c64(0.0, coefficient(body)?)),
    }
}

/// `;`-separated list of complex numbers given as a single flag value.
#[derive(Debug, Clone)]
pub struct ComplexList(pub Vec<C64>);

pub fn parse_complex_list(s: &str) -> Result<ComplexList, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_complex).collect::<Result<_, _>>().map(ComplexList)
}

/// Fully resolved parameters shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tau: C64,
    pub eta: Option<C64>,
    pub p: C64,
    pub level: Option<i64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub lambdas: Option<Vec<C64>>,
    pub z: Option<Vec<C64>>,
    pub c: C64,
    pub w: C64,
    pub w2: C64,
    pub lambda: C64,
    pub tol: Option<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tau: c64(0.0, 1.0),
            eta: None,
            p: c64(0.0, 0.0),
            level: None,
            n: None,
            m: None,
            lambdas: None,
            z: None,
            c: c64(0.0, std::f64::consts::PI),
            w: c64(0.07, -0.13),
            w2: c64(-0.21, 0.05),
            lambda: c64(0.31, -0.12),
            tol: None,
            seed: 7,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn apply_file(&mut self, file: ConfigFile) {
        let set = |slot: &mut C64, v: Option<ComplexValue>| {
            if let Some(v) = v {
                *slot = v.into();
            }
        };
        set(&mut self.tau, file.tau);
        set(&mut self.p, file.p);
        set(&mut self.c, file.c);
        set(&mut self.w, file.w);
        set(&mut self.w2, file.w2);
        set(&mut self.lambda, file.lambda);
        self.eta = file.eta.map(Into::into).or(self.eta);
        self.level = file.level.or(self.level);
        self.n = file.n.or(self.n);
        self.m = file.m.or(self.m);
        self.lambdas = file.lambdas.map(|v| v.into_iter().map(Into::into).collect()).or(self.lambdas.take());
        self.z = file.z.map(|v| v.into_iter().map(Into::into).collect()).or(self.z.take());
        self.tol = file.tol.or(self.tol);
        self.seed = file.seed.unwrap_or(self.seed);
        self.output = file.output.or(self.output.take());
    }

    /// `eta`, defaulting to `1/2N` when a level is given; a conflicting explicit value is rejected.
    pub fn eta(&self) -> Result<C64, Failure> {
        match (self.eta, self.level) {
            (Some(eta), Some(level)) => {
                let expect = 0.5 / level as f64;
                if (eta - expect).norm() > 1e-12 {
                    return Err(Failure::config(format!("eta = {eta} is inconsistent with N = {level} (expected {expect})")));
                }
                Ok(eta)
            }
            (Some(eta), None) => Ok(eta),
            (None, Some(level)) => Ok(c64(0.5 / level as f64, 0.0)),
            (None, None) => Ok(c64(0.093, 0.011)),
        }
    }

    pub fn params(&self) -> Result<EllipticParams, Failure> {
        if let Some(level) = self.level {
            if level < 2 {
                return Err(Failure::config(format!("N must be at least 2, got {level}")));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Failure::config(format!("tolerance must lie in (0, 1), got {tol}")));
            }
        }
        Ok(EllipticParams::new(self.tau, self.eta()?)?.with_p(self.p)?)
    }

    pub fn tolerance(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    /// Points `z`, defaulting to a fixed generic configuration for `n <= 4` and seeded samples beyond.
    pub fn points(&self, n: usize) -> Result<Vec<C64>, Failure> {
        if let Some(z) = &self.z {
            if z.len() != n {
                return Err(Failure::config(format!("{} points given for {n} sites", z.len())));
            }
            return Ok(z.clone());
        }
        let fixed = [c64(0.11, 0.03), c64(-0.2, 0.01), c64(0.33, -0.02), c64(0.05, 0.04)];
        if n <= fixed.len() {
            return Ok(fixed[..n].to_vec());
        }
        let mut sampler = eqg_core::sampling::Sampler::new(self.seed);
        Ok((0..n).map(|_| sampler.complex((-0.4, 0.4), (-0.1, 0.1))).collect())
    }

    pub fn weights(&self, n: usize) -> Result<Vec<C64>, Failure> {
        match &self.lambdas {
            Some(l) if l.len() != n => Err(Failure::config(format!("{} weights given for {n} sites", l.len()))),
            Some(l) => Ok(l.clone()),
            None => Ok(vec![c64(1.0, 0.0); n]),
        }
    }
}
