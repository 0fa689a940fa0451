//! Named states and state files.

use std::f64::consts::PI;
use std::fs;

use husimi_lab::cvmode::{random_cv_pure, CvConfig, CvState, PhasePoint};
use husimi_lab::qspin::{random_mixed_state, random_pure_state, DensityMatrix, DirectionTuple, UnitVector};

use crate::error::CliError;

pub const DEFAULT_SPIN_STATE: &str = "coherent";
pub const DEFAULT_CV_STATE: &str = "vacuum";

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedState {
    Spin(DensityMatrix),
    /// CV state plus the `(sigma, hbar)` stored in a state file, if any.
    Cv {
        state: CvState,
        scales: Option<(f64, f64)>,
    },
}

/// Direction used by the plain `coherent` preset.
pub fn default_direction() -> UnitVector {
    UnitVector::from_angles(PI / 3.0, PI / 4.0)
}

fn numbers<const K: usize>(arg: &str, what: &str) -> Result<[f64; K], CliError> {
    let v: Vec<f64> = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("{what}: cannot parse `{arg}`")))?;
    v.try_into()
        .ok()
        .filter(|a: &[f64; K]| a.iter().all(|x| x.is_finite()))
        .ok_or_else(|| CliError::Input(format!("{what}: expected {K} finite numbers")))
}

fn seed_of(arg: &str) -> Result<u64, CliError> {
    arg.parse().map_err(|_| CliError::Input(format!("bad seed `{arg}`")))
}

pub fn is_cv_preset(spec: &str) -> bool {
    let head = spec.split(':').next().unwrap_or("");
    matches!(head, "vacuum" | "coherent-cv" | "thermal-cv" | "random-cv")
}

/// Resolves a preset name or reads a JSON state file.
pub fn load_state(spec: &str, n_particles: usize, cv: &CvConfig, center: PhasePoint) -> Result<LoadedState, CliError> {
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (spec, None),
    };
    let spin = |rho: DensityMatrix| Ok(LoadedState::Spin(rho));
    let cvs = |state: CvState| Ok(LoadedState::Cv { state, scales: None });
    match (head, arg) {
        ("coherent", None) => spin(DensityMatrix::coherent(&DirectionTuple(vec![default_direction(); n_particles]))),
        ("coherent", Some(a)) => {
            let [t, p] = numbers::<2>(a, "coherent:THETA,PHI")?;
            spin(DensityMatrix::coherent(&DirectionTuple(vec![UnitVector::from_angles(t, p); n_particles])))
        }
        ("mixed", None) => spin(DensityMatrix::maximally_mixed(n_particles)?),
        ("random", Some(a)) => spin(random_pure_state(n_particles, seed_of(a)?)?),
        ("random-mixed", Some(a)) => spin(random_mixed_state(n_particles, 1 << n_particles, seed_of(a)?)?),
        ("vacuum", None) => cvs(CvState::vacuum(cv.fock_dim)?),
        ("coherent-cv", None) => cvs(CvState::coherent(&center, cv)?),
        ("coherent-cv", Some(a)) => {
            let [x, p] = numbers::<2>(a, "coherent-cv:X,P")?;
            cvs(CvState::coherent(&PhasePoint::new(x, p), cv)?)
        }
        ("thermal-cv", Some(a)) => {
            let [r] = numbers::<1>(a, "thermal-cv:R")?;
            cvs(CvState::thermal(r, cv.fock_dim)?)
        }
        ("random-cv", Some(a)) => cvs(random_cv_pure(5.min(cv.fock_dim - 1), cv.fock_dim, seed_of(a)?)?),
        _ => load_file(spec),
    }
}

fn load_file(path: &str) -> Result<LoadedState, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("`{path}` is neither a preset nor a readable state file ({e})")))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    if value.get("n_particles").is_some() {
        Ok(LoadedState::Spin(DensityMatrix::from_json(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?))
    } else if value.get("dim").is_some() {
        let (state, s, h) = CvState::from_json(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        Ok(LoadedState::Cv { state, scales: Some((s, h)) })
    } else {
        Err(CliError::Input(format!("{path}: expected a spin (n_particles) or CV (dim) state document")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        let cv = CvConfig::default();
        let c = PhasePoint::new(0.0, 0.0);
        assert!(matches!(load_state("mixed", 2, &cv, c).unwrap(), LoadedState::Spin(r) if r.n_particles() == 2));
        assert!(matches!(load_state("coherent:1.0,2.0", 1, &cv, c).unwrap(), LoadedState::Spin(_)));
        assert!(matches!(load_state("random:3", 1, &cv, c).unwrap(), LoadedState::Spin(_)));
        assert!(matches!(load_state("thermal-cv:0.2", 1, &cv, c).unwrap(), LoadedState::Cv { .. }));
        assert!(load_state("coherent:1.0", 1, &cv, c).is_err());
        assert!(load_state("random:x", 1, &cv, c).is_err());
        assert!(load_state("/nonexistent/state.json", 1, &cv, c).is_err());
        assert!(is_cv_preset("coherent-cv:1,2"));
        assert!(!is_cv_preset("coherent"));
    }
}
