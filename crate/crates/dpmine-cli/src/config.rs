//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every default is embedded here and printable through the `defaults`
//! subcommand; a config file overrides defaults, command-line flags
//! override the file. Unknown sections or keys are errors.

use anyhow::{bail, Context, Result};
use dpmine::mi::BoundKind;
use dpmine::nn::Activation;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    IndependentUniform,
    SignGaussian,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::IndependentUniform => "independent_uniform",
            Family::SignGaussian => "sign_gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Concentration {
    Map,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightingChoice {
    Dp,
    Empirical,
    Both,
}

/// Everything the estimate/dimsweep/gendemo commands need.
#[derive(Debug, Clone)]
pub struct Config {
    // [estimate]
    pub family: Family,
    pub dim: usize,
    pub n: usize,
    pub noise_scale: f64,
    pub bound: BoundKind,
    pub weighting: WeightingChoice,
    pub epochs: usize,
    pub redraw_per_epoch: bool,
    pub truncation_per_epoch: bool,
    pub derangement: bool,
    pub critic_hidden: Vec<usize>,
    pub critic_output: Activation,
    pub learning_rate: f64,
    pub minibatch: usize,

    // [dp]
    pub concentration: Concentration,
    pub map_grid: Vec<f64>,
    pub epsilon: f64,
    pub truncation_override: usize,
    pub n_max: usize,

    // [run]
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub out: String,
    pub timing: bool,

    // [summary]
    pub window: usize,
    pub tol: f64,

    // [dimsweep]
    pub dims: Vec<usize>,
    pub epochs_d1000: usize,

    // [gendemo]
    pub gen_points: usize,
    pub gen_epochs: usize,
    pub latent_dim: usize,
    pub sublatent_dim: usize,
    pub hidden: usize,
    pub lambda_gp: f64,
    pub mi_coefficients: [f64; 4],
    pub atom_cap: usize,
    pub gen_epsilon: f64,
    pub bins: usize,
    pub emit_svg: bool,
    pub n_generate: usize,
    pub score_replications: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            family: Family::SignGaussian,
            dim: 1,
            n: 16,
            noise_scale: 0.2,
            bound: BoundKind::Dv,
            weighting: WeightingChoice::Both,
            epochs: 500,
            redraw_per_epoch: true,
            truncation_per_epoch: false,
            derangement: false,
            critic_hidden: vec![400, 400, 400],
            critic_output: Activation::Identity,
            learning_rate: 0.0002,
            minibatch: 0,

            concentration: Concentration::Map,
            map_grid: vec![0.1, 1.0, 10.0, 100.0],
            epsilon: 0.001,
            truncation_override: 0,
            n_max: 10_000,

            seeds: vec![0, 1, 2],
            workers: 0,
            out: "out".into(),
            timing: false,

            window: 100,
            tol: 0.15,

            dims: vec![2, 10, 100, 1000],
            epochs_d1000: 1500,

            gen_points: 5000,
            gen_epochs: 5000,
            latent_dim: 100,
            sublatent_dim: 10,
            hidden: 128,
            lambda_gp: 10.0,
            mi_coefficients: [1.0; 4],
            atom_cap: 256,
            gen_epsilon: 0.01,
            bins: 20,
            emit_svg: true,
            n_generate: 1000,
            score_replications: 100,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("expected true/false, got {other}"),
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(Into::into))
        .collect::<Result<Vec<T>>>()
}

pub fn parse_bound(v: &str) -> Result<BoundKind> {
    match v {
        "dv" => Ok(BoundKind::Dv),
        "js" => Ok(BoundKind::Js),
        other => bail!("bound must be dv or js, got {other}"),
    }
}

pub fn parse_weighting(v: &str) -> Result<WeightingChoice> {
    match v {
        "dp" => Ok(WeightingChoice::Dp),
        "empirical" => Ok(WeightingChoice::Empirical),
        "both" => Ok(WeightingChoice::Both),
        other => bail!("weighting must be dp, empirical or both, got {other}"),
    }
}

impl Config {
    /// Parse a config file over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .with_context(|| format!("line {}: [{section}] {key}", lineno + 1))?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("estimate", "family") => {
                self.family = match value {
                    "independent_uniform" => Family::IndependentUniform,
                    "sign_gaussian" => Family::SignGaussian,
                    other => bail!("unknown family {other}"),
                }
            }
            ("estimate", "dim") => self.dim = value.parse()?,
            ("estimate", "n") => self.n = value.parse()?,
            ("estimate", "noise_scale") => self.noise_scale = value.parse()?,
            ("estimate", "bound") => self.bound = parse_bound(value)?,
            ("estimate", "weighting") => self.weighting = parse_weighting(value)?,
            ("estimate", "epochs") => self.epochs = value.parse()?,
            ("estimate", "redraw_per_epoch") => self.redraw_per_epoch = parse_bool(value)?,
            ("estimate", "truncation") => {
                self.truncation_per_epoch = match value {
                    "fixed" => false,
                    "per_epoch" => true,
                    other => bail!("truncation must be fixed or per_epoch, got {other}"),
                }
            }
            ("estimate", "derangement") => self.derangement = parse_bool(value)?,
            ("estimate", "critic_hidden") => self.critic_hidden = parse_list(value)?,
            ("estimate", "critic_output") => {
                self.critic_output = match value {
                    "identity" => Activation::Identity,
                    "relu" => Activation::Relu,
                    other => bail!("critic_output must be identity or relu, got {other}"),
                }
            }
            ("estimate", "learning_rate") => self.learning_rate = value.parse()?,
            ("estimate", "minibatch") => self.minibatch = value.parse()?,

            ("dp", "concentration") => {
                self.concentration = if value == "map" {
                    Concentration::Map
                } else {
                    Concentration::Fixed(value.parse()?)
                }
            }
            ("dp", "map_grid") => self.map_grid = parse_list(value)?,
            ("dp", "epsilon") => self.epsilon = value.parse()?,
            ("dp", "truncation_override") => self.truncation_override = value.parse()?,
            ("dp", "n_max") => self.n_max = value.parse()?,

            ("run", "seeds") => self.seeds = parse_list(value)?,
            ("run", "workers") => self.workers = value.parse()?,
            ("run", "out") => self.out = value.to_string(),
            ("run", "timing") => self.timing = parse_bool(value)?,

            ("summary", "window") => self.window = value.parse()?,
            ("summary", "tol") => self.tol = value.parse()?,

            ("dimsweep", "dims") => self.dims = parse_list(value)?,
            ("dimsweep", "epochs_d1000") => self.epochs_d1000 = value.parse()?,

            ("gendemo", "n_points") => self.gen_points = value.parse()?,
            ("gendemo", "epochs") => self.gen_epochs = value.parse()?,
            ("gendemo", "latent_dim") => self.latent_dim = value.parse()?,
            ("gendemo", "sublatent_dim") => self.sublatent_dim = value.parse()?,
            ("gendemo", "hidden") => self.hidden = value.parse()?,
            ("gendemo", "lambda_gp") => self.lambda_gp = value.parse()?,
            ("gendemo", "mi_coefficients") => {
                let v: Vec<f64> = parse_list(value)?;
                if v.len() != 4 {
                    bail!("mi_coefficients needs exactly 4 entries");
                }
                self.mi_coefficients = [v[0], v[1], v[2], v[3]];
            }
            ("gendemo", "atom_cap") => self.atom_cap = value.parse()?,
            ("gendemo", "epsilon") => self.gen_epsilon = value.parse()?,
            ("gendemo", "bins") => self.bins = value.parse()?,
            ("gendemo", "emit_svg") => self.emit_svg = parse_bool(value)?,
            ("gendemo", "n_generate") => self.n_generate = value.parse()?,
            ("gendemo", "score_replications") => self.score_replications = value.parse()?,

            (s, k) => bail!("unknown config key [{s}] {k}"),
        }
        Ok(())
    }

    /// Render the full configuration in the file format.
    pub fn to_text(&self) -> String {
        let join_usize = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let join_f64 = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let join_u64 = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "[estimate]\n\
             family = {}\n\
             dim = {}\n\
             n = {}\n\
             noise_scale = {}\n\
             bound = {}\n\
             weighting = {}\n\
             epochs = {}\n\
             redraw_per_epoch = {}\n\
             truncation = {}\n\
             derangement = {}\n\
             critic_hidden = {}\n\
             critic_output = {}\n\
             learning_rate = {}\n\
             minibatch = {}\n\
             \n[dp]\n\
             concentration = {}\n\
             map_grid = {}\n\
             epsilon = {}\n\
             truncation_override = {}\n\
             n_max = {}\n\
             \n[run]\n\
             seeds = {}\n\
             workers = {}\n\
             out = {}\n\
             timing = {}\n\
             \n[summary]\n\
             window = {}\n\
             tol = {}\n\
             \n[dimsweep]\n\
             dims = {}\n\
             epochs_d1000 = {}\n\
             \n[gendemo]\n\
             n_points = {}\n\
             epochs = {}\n\
             latent_dim = {}\n\
             sublatent_dim = {}\n\
             hidden = {}\n\
             lambda_gp = {}\n\
             mi_coefficients = {}\n\
             atom_cap = {}\n\
             epsilon = {}\n\
             bins = {}\n\
             emit_svg = {}\n\
             n_generate = {}\n\
             score_replications = {}\n",
            self.family.label(),
            self.dim,
            self.n,
            self.noise_scale,
            self.bound.label(),
            match self.weighting {
                WeightingChoice::Dp => "dp",
                WeightingChoice::Empirical => "empirical",
                WeightingChoice::Both => "both",
            },
            self.epochs,
            self.redraw_per_epoch,
            if self.truncation_per_epoch { "per_epoch" } else { "fixed" },
            self.derangement,
            join_usize(&self.critic_hidden),
            match self.critic_output {
                Activation::Identity => "identity",
                _ => "relu",
            },
            self.learning_rate,
            self.minibatch,
            match self.concentration {
                Concentration::Map => "map".to_string(),
                Concentration::Fixed(a) => a.to_string(),
            },
            join_f64(&self.map_grid),
            self.epsilon,
            self.truncation_override,
            self.n_max,
            join_u64(&self.seeds),
            self.workers,
            self.out,
            self.timing,
            self.window,
            self.tol,
            join_usize(&self.dims),
            self.epochs_d1000,
            self.gen_points,
            self.gen_epochs,
            self.latent_dim,
            self.sublatent_dim,
            self.hidden,
            self.lambda_gp,
            join_f64(&self.mi_coefficients),
            self.atom_cap,
            self.gen_epsilon,
            self.bins,
            self.emit_svg,
            self.n_generate,
            self.score_replications,
        )
    }
}
