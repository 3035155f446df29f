//! Run configuration: a flat JSON object whose keys mirror the command-line
//! flags. Flags override file values.

use std::path::{Path, PathBuf};

use chfgap::asymptotics::{Mode, DEFAULT_COEFF_BOUND, DEFAULT_HORIZON, DEFAULT_S_HAT};
use chfgap::nystrom::Precision;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Whether `compare` runs the Nyström oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub endpoints: Vec<f64>,
    pub alpha: f64,
    pub beta_im: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
    pub mode: Mode,
    pub oracle: Switch,
    pub nodes_per_interval: usize,
    pub precision: Precision,
    pub theta_tol: f64,
    pub quad_order: usize,
    pub s_hat: f64,
    pub dio_coeff_bound: i64,
    /// Time-average horizon in units of 1/Ω₁.
    pub horizon: f64,
    /// Threshold on drift and standard deviation in `compare`.
    pub flatness_tol: f64,
    pub output_dir: PathBuf,
    /// Test hook for `verify`: added to the diagonal of τ inside the θ engine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_tau: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            endpoints: vec![-1.0, 1.0],
            alpha: 0.0,
            beta_im: 0.0,
            s_min: 4.0,
            s_max: 16.0,
            s_count: 13,
            mode: Mode::Auto,
            oracle: Switch::On,
            nodes_per_interval: 64,
            precision: Precision::DoubleDouble,
            theta_tol: chfgap::theta::DEFAULT_TOL,
            quad_order: chfgap::quadrature::DEFAULT_ORDER,
            s_hat: DEFAULT_S_HAT,
            dio_coeff_bound: DEFAULT_COEFF_BOUND,
            horizon: DEFAULT_HORIZON,
            flatness_tol: 2e-2,
            output_dir: PathBuf::from("out"),
            perturb_tau: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))
    }

    /// Positive knobs and a positive increasing grid.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Validation(m.to_string()));
        if !(self.s_min > 0.0) || !self.s_max.is_finite() {
            return bad("s_min must be positive and s_max finite");
        }
        if self.s_count == 0 {
            return bad("s_count must be at least 1");
        }
        if self.s_count > 1 && !(self.s_max > self.s_min) {
            return bad("s_max must exceed s_min");
        }
        if !(self.theta_tol > 0.0)
            || !(self.s_hat > 0.0)
            || !(self.horizon > 0.0)
            || !(self.flatness_tol > 0.0)
        {
            return bad("theta_tol, s_hat, horizon and flatness_tol must be positive");
        }
        if self.nodes_per_interval == 0 || self.quad_order == 0 || self.dio_coeff_bound < 1 {
            return bad("nodes_per_interval, quad_order and dio_coeff_bound must be positive");
        }
        Ok(())
    }

    /// s_count points from s_min to s_max inclusive.
    pub fn grid(&self) -> Vec<f64> {
        if self.s_count == 1 {
            return vec![self.s_min];
        }
        let h = (self.s_max - self.s_min) / (self.s_count - 1) as f64;
        (0..self.s_count)
            .map(|k| {
                if k + 1 == self.s_count {
                    self.s_max
                } else {
                    self.s_min + h * k as f64
                }
            })
            .collect()
    }
}

/// Flags shared by all subcommands; each overrides the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated a0,b0,a1,b1,...
    #[arg(long, global = true, allow_hyphen_values = true, value_delimiter = ',')]
    pub endpoints: Option<Vec<f64>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long = "beta-im", global = true, allow_hyphen_values = true)]
    pub beta_im: Option<f64>,
    #[arg(long = "s-min", global = true)]
    pub s_min: Option<f64>,
    #[arg(long = "s-max", global = true)]
    pub s_max: Option<f64>,
    #[arg(long = "s-count", global = true)]
    pub s_count: Option<usize>,
    /// general | diophantine | ergodic | n1 | auto
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    pub oracle: Option<Switch>,
    #[arg(long = "nodes", global = true)]
    pub nodes_per_interval: Option<usize>,
    #[arg(long = "theta-tol", global = true)]
    pub theta_tol: Option<f64>,
    #[arg(long = "quad-order", global = true)]
    pub quad_order: Option<usize>,
    #[arg(long = "s-hat", global = true)]
    pub s_hat: Option<f64>,
    #[arg(long = "dio-coeff-bound", global = true)]
    pub dio_coeff_bound: Option<i64>,
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    /// Config file (or defaults) with the given flags applied, validated.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {
                $(if let Some(v) = &self.$f { c.$f = v.clone(); })*
            };
        }
        set!(
            endpoints,
            alpha,
            beta_im,
            s_min,
            s_max,
            s_count,
            mode,
            oracle,
            nodes_per_interval,
            theta_tol,
            quad_order,
            s_hat,
            dio_coeff_bound,
            output_dir
        );
        c.validate()?;
        Ok(c)
    }
}
