//! Run configuration: one flat key-value document per run, read from TOML or
//! from a previous run's manifest, with command-line flags taking precedence.

use std::fs;
use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Record `u` on the all-plus outcome.
    A,
    /// Record the sign-adjusted axes for every outcome.
    B,
    /// Classical top with an epsilon-cone acceptance.
    Classical,
    /// Phase-space experiment on a truncated box.
    Cv,
    /// Classical Liouville version with an epsilon-ball acceptance.
    ClassicalCv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Top-level seed; every random stream derives from it.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Preset (coherent, coherent:THETA,PHI, mixed, random:SEED, random-mixed:SEED,
    /// vacuum, coherent-cv, coherent-cv:X,P, thermal-cv:R, random-cv:SEED) or a JSON file.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<ExperimentKind>,

    /// Number of trials.
    #[arg(long, short = 'm')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,

    /// Quadrature order L (spin) or nodes per axis (CV); grid size for husimi-grid.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    /// Monte Carlo samples for Wehrl entropy beyond three particles.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<u64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_z: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_phi: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_x: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins_p: Option<usize>,

    /// Also log rejected trials.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_rejected: Option<bool>,

    /// Spin rate in units of the precession rate C|B|.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ratio: Option<f64>,

    /// Magnetic field `Bx,By,Bz` (the top uses C = 1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<f64>>,

    /// Initial top axis `wx,wy,wz` (normalized).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec<f64>>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,

    /// Rigid-body step; the canonical integrator uses `dt_canonical`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_canonical: Option<f64>,

    /// Read and write times as `tau = C|B| t`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensionless_time: Option<bool>,

    /// Keep every k-th trajectory sample in the CSV output.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,

    /// Centre `x,p` of the Gaussian Liouville density or the coherent-cv preset.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `self` win; the rest come from `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        overlay!(self, base;
            seed, state, n_particles, variant, m, grid, mc_trials, epsilon,
            bins_z, bins_phi, bins_x, bins_p, keep_rejected,
            omega_ratio, field, axis, t_end, dt, dt_canonical, dimensionless_time, record_every,
            sigma, hbar, fock_dim, x_max, p_max, center,
        )
    }

    /// Loads a TOML config, or the `config` of a manifest when the file is JSON.
    pub fn load(path: &Path, command: &str) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if m.command != command {
                return Err(CliError::Input(format!("manifest was written by `{}`, not `{command}`", m.command)));
            }
            Ok(m.config)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn vec3(v: &Option<Vec<f64>>, name: &str) -> Result<Option<[f64; 3]>, CliError> {
        match v {
            None => Ok(None),
            Some(x) if x.len() == 3 && x.iter().all(|c| c.is_finite()) => Ok(Some([x[0], x[1], x[2]])),
            Some(_) => Err(CliError::Input(format!("{name} needs three finite components"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::from_toml("seed = 7\nm = 100\nstate = \"mixed\"\n").unwrap();
        let flags = RunConfig { seed: Some(9), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.m, Some(100));
        assert_eq!(merged.state.as_deref(), Some("mixed"));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let c = RunConfig {
            variant: Some(ExperimentKind::ClassicalCv),
            field: Some(vec![0.0, 0.5, 1.0]),
            keep_rejected: Some(true),
            ..Default::default()
        };
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(RunConfig::from_toml("sed = 1").is_err());
        assert!(RunConfig::from_toml("variant = \"c\"").is_err());
    }
}
