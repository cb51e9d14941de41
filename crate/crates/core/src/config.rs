//! Flat key=value scenario files.
//!
//! Lines are `key = value`; `#` starts a comment. Model keys match the
//! parameter struct field names; the capital costs may instead be given
//! as annuities through `annuity_distributed` (= rho c / b) and
//! `annuity_centralised` (= rho h). A `price.*` section selects the
//! exogenous price model and a `run.*` section sets simulation defaults.
//! Unknown keys are errors, as are duplicates; every model key except the
//! initial states `x0`, `q0` (default 0) must be present.

use crate::error::{Error, Result};
use crate::montecarlo::SimConfig;
use crate::params::ModelParams;
use crate::price::PriceModel;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub seed: u64,
    pub n_paths: usize,
    /// Step (years).
    pub dt: f64,
    /// Horizon (years).
    pub horizon: f64,
    pub format: OutputFormat,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 1,
            n_paths: 10_000,
            dt: 1.0 / 256.0,
            horizon: 30.0,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    /// Present only when the file declares a `price.model`.
    pub price: Option<PriceModel>,
    pub run: RunSettings,
}

fn take_f64(kv: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<Option<f64>> {
    match kv.remove(key) {
        None => Ok(None),
        Some((line, v)) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("line {line}: `{key}` is not a number: `{v}`"))),
    }
}

fn require(key: &str, got: Option<f64>) -> Result<f64> {
    got.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if kv.insert(key.clone(), (i + 1, value)).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Self::from_pairs(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn from_pairs(mut kv: BTreeMap<String, (usize, String)>) -> Result<Self> {
        let rho = require("rho", take_f64(&mut kv, "rho")?)?;
        let sigma = require("sigma", take_f64(&mut kv, "sigma")?)?;
        let b = require("b", take_f64(&mut kv, "b")?)?;
        let gamma = require("gamma", take_f64(&mut kv, "gamma")?)?;
        let theta = require("theta", take_f64(&mut kv, "theta")?)?;
        let eta = require("eta", take_f64(&mut kv, "eta")?)?;
        let demand = require("demand", take_f64(&mut kv, "demand")?)?;
        let delta = require("delta", take_f64(&mut kv, "delta")?)?;
        let pi = require("pi", take_f64(&mut kv, "pi")?)?;
        let lambda = require("lambda", take_f64(&mut kv, "lambda")?)?;

        let c_direct = take_f64(&mut kv, "c")?;
        let c_annuity = take_f64(&mut kv, "annuity_distributed")?;
        let c = match (c_direct, c_annuity) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `c` or `annuity_distributed`, not both".into(),
                ))
            }
            (Some(c), None) => c,
            (None, Some(a)) => {
                if rho == 0.0 {
                    return Err(Error::Config("`annuity_distributed` needs rho > 0".into()));
                }
                a * b / rho
            }
            (None, None) => {
                return Err(Error::Config(
                    "missing required key `c` (or `annuity_distributed`)".into(),
                ))
            }
        };
        let h_direct = take_f64(&mut kv, "h")?;
        let h_annuity = take_f64(&mut kv, "annuity_centralised")?;
        let h = match (h_direct, h_annuity) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `h` or `annuity_centralised`, not both".into(),
                ))
            }
            (Some(h), None) => h,
            (None, Some(a)) => {
                if rho == 0.0 {
                    return Err(Error::Config("`annuity_centralised` needs rho > 0".into()));
                }
                a / rho
            }
            (None, None) => {
                return Err(Error::Config(
                    "missing required key `h` (or `annuity_centralised`)".into(),
                ))
            }
        };

        let x0 = take_f64(&mut kv, "x0")?.unwrap_or(0.0);
        let q0 = take_f64(&mut kv, "q0")?.unwrap_or(0.0);

        let params = ModelParams {
            rho,
            sigma,
            b,
            c,
            gamma,
            theta,
            eta,
            demand,
            h,
            delta,
            pi,
            lambda,
            x0,
            q0,
        };

        let price = match kv.remove("price.model") {
            None => None,
            Some((line, model)) => Some(match model.as_str() {
                "constant" => PriceModel::Constant {
                    p_bar: require("price.p_bar", take_f64(&mut kv, "price.p_bar")?)?,
                },
                "martingale" => PriceModel::Martingale {
                    p_init: require("price.p_init", take_f64(&mut kv, "price.p_init")?)?,
                    vol: require("price.vol", take_f64(&mut kv, "price.vol")?)?,
                },
                "ou" => PriceModel::OrnsteinUhlenbeck {
                    p_init: require("price.p_init", take_f64(&mut kv, "price.p_init")?)?,
                    kappa: require("price.kappa", take_f64(&mut kv, "price.kappa")?)?,
                    p_bar: require("price.p_bar", take_f64(&mut kv, "price.p_bar")?)?,
                    vol: require("price.vol", take_f64(&mut kv, "price.vol")?)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown price model `{other}` (expected constant, martingale, or ou)"
                    )))
                }
            }),
        };

        let mut run = RunSettings::default();
        if let Some(v) = take_f64(&mut kv, "run.seed")? {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Config("`run.seed` must be a nonnegative integer".into()));
            }
            run.seed = v as u64;
        }
        if let Some(v) = take_f64(&mut kv, "run.n_paths")? {
            if v < 2.0 || v.fract() != 0.0 {
                return Err(Error::Config("`run.n_paths` must be an integer >= 2".into()));
            }
            run.n_paths = v as usize;
        }
        if let Some(v) = take_f64(&mut kv, "run.dt")? {
            run.dt = v;
        }
        if let Some(v) = take_f64(&mut kv, "run.horizon")? {
            run.horizon = v;
        }
        if let Some((line, v)) = kv.remove("run.format") {
            run.format = match v.as_str() {
                "csv" => OutputFormat::Csv,
                "md" => OutputFormat::Markdown,
                other => {
                    return Err(Error::Config(format!(
                        "line {line}: unknown format `{other}` (expected csv or md)"
                    )))
                }
            };
        }

        if let Some((key, (line, _))) = kv.iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
        }

        let report = params.validate();
        if !report.is_valid() {
            return Err(Error::Validation(report.summary()));
        }

        Ok(ScenarioConfig {
            params,
            price,
            run,
        })
    }

    /// Simulation settings with the discount rate as truncation-tail rate.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_paths: self.run.n_paths,
            dt: self.run.dt,
            horizon: self.run.horizon,
            seed: self.run.seed,
            tail_rate: self.params.rho,
        }
    }
}
