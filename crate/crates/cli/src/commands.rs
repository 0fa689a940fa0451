//! One function per subcommand. Each resolves its defaults into the config it
//! was given, so that the manifest echo is enough to replay the run.

use std::f64::consts::{PI, TAU};

use husimi_lab::bayes::{
    acceptance_rate, bin_probabilities, gof_chisquare, histogram, ks_polar_marginal, run_experiment, ExperimentConfig,
    Variant, MIN_KS_SAMPLES,
};
use husimi_lab::classitop::{
    averaged_step, bin_max_deviation, classical_bayes_experiment, classical_gof, cone_smoothed, hamilton_traj,
    rigid_body_sim, write_axis_csv, write_canonical_csv, CanonicalState, ClassicalExperimentConfig, DipoleDensity,
    TopParams, TopState,
};
use husimi_lab::cvmode::{
    box_mass, classical_cv_experiment, coherent_wehrl, cv_bin_max_deviation, cv_experiment, cv_gof, cv_histogram,
    expected_cv_acceptance, wehrl_cv, write_husimi_cv_csv, ClassicalCvConfig, CvConfig, CvExperimentConfig, CvState,
    GaussianLiouville, PhasePoint, DEFAULT_GRID,
};
use husimi_lab::husimi::{default_grid_order, wehrl_mc, wehrl_quadrature, HusimiField, ProductGrid};
use husimi_lab::qspin::{DensityMatrix, UnitVector};
use nalgebra::Vector3;
use serde_json::{json, Value};

use crate::config::{ExperimentKind, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_ORACLE};
use crate::manifest::OutputDir;
use crate::presets::{is_cv_preset, load_state, LoadedState, DEFAULT_CV_STATE, DEFAULT_SPIN_STATE};
use crate::selftest;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_M: u64 = 1_000_000;
pub const DEFAULT_MC_TRIALS: u64 = 1_000_000;
pub const CV_CSV_POINTS: usize = 101;
const MAX_GRID_ROWS: usize = 20_000_000;

fn csv<F: FnOnce(&mut Vec<u8>) -> husimi_lab::Result<()>>(f: F) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn center_of(cfg: &RunConfig) -> Result<PhasePoint, CliError> {
    match &cfg.center {
        None => Ok(PhasePoint::new(0.0, 0.0)),
        Some(c) if c.len() == 2 && c.iter().all(|v| v.is_finite()) => Ok(PhasePoint::new(c[0], c[1])),
        Some(_) => Err(CliError::Input("center needs two finite numbers x,p".into())),
    }
}

/// Fills the CV fields of `cfg` and builds the configuration.
fn cv_config(cfg: &mut RunConfig) -> Result<CvConfig, CliError> {
    let sigma = *cfg.sigma.get_or_insert(1.0);
    let hbar = *cfg.hbar.get_or_insert(1.0);
    let d = *cfg.fock_dim.get_or_insert(32);
    let x = *cfg.x_max.get_or_insert(6.0 * sigma);
    let p = *cfg.p_max.get_or_insert(12.0 * hbar / sigma);
    Ok(CvConfig::new(sigma, hbar, d, x, p)?)
}

enum State {
    Spin(DensityMatrix),
    Cv(CvState, CvConfig),
}

fn resolve_state(cfg: &mut RunConfig, default: &str) -> Result<State, CliError> {
    let spec = cfg.state.get_or_insert_with(|| default.to_string()).clone();
    let cv_like = is_cv_preset(&spec);
    let n = cfg.n_particles.unwrap_or(1);
    let mut probe = cfg.clone();
    let cv0 = cv_config(&mut probe)?;
    let center = center_of(cfg)?;
    match load_state(&spec, n, &cv0, center)? {
        LoadedState::Spin(rho) => {
            if cfg.n_particles.is_some_and(|k| k != rho.n_particles()) {
                return Err(CliError::Input(format!(
                    "state has {} particles but n_particles = {}",
                    rho.n_particles(),
                    n
                )));
            }
            cfg.n_particles = Some(rho.n_particles());
            Ok(State::Spin(rho))
        }
        LoadedState::Cv { state, scales } => {
            if let Some((s, h)) = scales {
                for (given, file, name) in [(cfg.sigma, s, "sigma"), (cfg.hbar, h, "hbar")] {
                    if given.is_some_and(|g| g != file) {
                        return Err(CliError::Input(format!("{name} differs from the state file ({file})")));
                    }
                }
                cfg.sigma = Some(s);
                cfg.hbar = Some(h);
                cfg.fock_dim = Some(state.dim());
            }
            if cv_like && spec == "coherent-cv" {
                cfg.center.get_or_insert_with(|| vec![center.x_star, center.p_star]);
            }
            let cv = cv_config(cfg)?;
            if cv.fock_dim != state.dim() {
                return Err(CliError::Input(format!(
                    "fock_dim {} differs from the state ({})",
                    cv.fock_dim,
                    state.dim()
                )));
            }
            Ok(State::Cv(state, cv))
        }
    }
}

pub fn wehrl(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let report = match resolve_state(cfg, DEFAULT_SPIN_STATE)? {
        State::Spin(rho) => {
            let n = rho.n_particles();
            let coherent = n as f64 * (TAU.ln() + 0.5);
            let maximum = n as f64 * (4.0 * PI).ln();
            match cfg.grid.or(default_grid_order(n)) {
                Some(l) => {
                    cfg.grid = Some(l);
                    let s = wehrl_quadrature(&rho, &ProductGrid::uniform(n, l)?)?;
                    json!({"kind": "spin", "n_particles": n, "method": "quadrature", "grid_L": l,
                           "estimate": s, "coherent_value": coherent, "maximum": maximum})
                }
                None => {
                    let m = *cfg.mc_trials.get_or_insert(DEFAULT_MC_TRIALS);
                    let seed = *cfg.seed.get_or_insert(DEFAULT_SEED);
                    let est = wehrl_mc(&rho, m, seed)?;
                    json!({"kind": "spin", "n_particles": n, "method": "monte_carlo", "m": m, "seed": seed,
                           "estimate": est.estimate, "stderr": est.stderr,
                           "coherent_value": coherent, "maximum": maximum})
                }
            }
        }
        State::Cv(st, cv) => {
            let l = *cfg.grid.get_or_insert(DEFAULT_GRID);
            let s = wehrl_cv(&st, &cv, l)?;
            json!({"kind": "cv", "method": "quadrature", "grid": l, "estimate": s,
                   "coherent_value": coherent_wehrl(&cv), "box_mass": box_mass(&st, &cv, l)})
        }
    };
    println!("S_W = {}", report["estimate"]);
    out.write_json("wehrl.json", &report)?;
    Ok(EXIT_OK)
}

pub fn husimi_grid(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let bytes = match resolve_state(cfg, DEFAULT_SPIN_STATE)? {
        State::Spin(rho) => {
            let n = rho.n_particles();
            let default = match n {
                1 => 32,
                2 => 8,
                _ => 4,
            };
            let l = *cfg.grid.get_or_insert(default);
            let rows = (2 * l * l).checked_pow(n as u32).filter(|&r| r <= MAX_GRID_ROWS);
            if rows.is_none() {
                return Err(CliError::Input(format!("grid L = {l} for N = {n} exceeds {MAX_GRID_ROWS} rows")));
            }
            let grid = ProductGrid::uniform(n, l)?;
            csv(|b| HusimiField::new(&rho).write_csv(&grid, b))?
        }
        State::Cv(st, cv) => {
            let n = *cfg.grid.get_or_insert(CV_CSV_POINTS);
            csv(|b| write_husimi_cv_csv(&st, &cv, n, b))?
        }
    };
    out.write("husimi_grid.csv", &bytes)?;
    println!("wrote {}", out.path().join("husimi_grid.csv").display());
    Ok(EXIT_OK)
}

fn spin_bins(cfg: &mut RunConfig, n: usize) -> (usize, usize) {
    let (z, p) = match n {
        1 => (8, 16),
        2 => (4, 4),
        _ => (2, 2),
    };
    (*cfg.bins_z.get_or_insert(z), *cfg.bins_phi.get_or_insert(p))
}

pub fn experiment(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let kind = *cfg.variant.get_or_insert(ExperimentKind::A);
    let m = *cfg.m.get_or_insert(DEFAULT_M);
    let seed = *cfg.seed.get_or_insert(DEFAULT_SEED);
    let keep = *cfg.keep_rejected.get_or_insert(false);
    let report = match kind {
        ExperimentKind::A | ExperimentKind::B => {
            let State::Spin(rho) = resolve_state(cfg, DEFAULT_SPIN_STATE)? else {
                return Err(CliError::Input("variants a and b need a spin state".into()));
            };
            let n = rho.n_particles();
            let (variant, expected_rate) = match kind {
                ExperimentKind::A => (Variant::A, 0.5f64.powi(n as i32)),
                _ => (Variant::B, 1.0),
            };
            let log = run_experiment(&rho, &ExperimentConfig::new(variant, n, m, seed).keep_rejected(keep))?;
            out.write("log.csv", &csv(|b| log.write_csv(b))?)?;
            let (bz, bp) = spin_bins(cfg, n);
            let hist = histogram(&log, bz, bp)?;
            let d = hist.total as f64;
            let expected: Vec<f64> = bin_probabilities(&rho, hist.binning).iter().map(|p| d * p).collect();
            out.write("histogram.csv", &csv(|b| hist.write_csv(&expected, b))?)?;
            let gof = gof_chisquare(&hist, &rho)?;
            let (rate, se) = acceptance_rate(&log)?;
            let ks: Vec<Value> = if log.accepted() >= MIN_KS_SAMPLES {
                (0..n).map(|j| ks_polar_marginal(&log, &rho, j).map(|k| json!(k))).collect::<Result<_, _>>()?
            } else {
                Vec::new()
            };
            json!({"variant": kind, "n_particles": n, "m": m, "seed": seed, "recorded": log.accepted(),
                   "acceptance_rate": rate, "acceptance_stderr": se, "expected_rate": expected_rate,
                   "chi_square": gof, "ks_polar": ks})
        }
        ExperimentKind::Classical => {
            let State::Spin(rho) = resolve_state(cfg, DEFAULT_SPIN_STATE)? else {
                return Err(CliError::Input("the classical experiment needs a single-particle spin state".into()));
            };
            if rho.n_particles() != 1 {
                return Err(CliError::Input("the classical experiment is defined for one particle".into()));
            }
            let eps = *cfg.epsilon.get_or_insert(0.2);
            let r = rho.bloch_vector(0)?;
            let dens = DipoleDensity::new(Vector3::new(r[0], r[1], r[2]))?;
            let ecfg = ClassicalExperimentConfig { m, epsilon: eps, seed, keep_rejected: keep };
            let log = classical_bayes_experiment(&dens, &ecfg)?;
            out.write("log.csv", &csv(|b| log.write_csv(b))?)?;
            let (bz, bp) = spin_bins(cfg, 1);
            let hist = histogram(&log, bz, bp)?;
            let smoothed = cone_smoothed(&dens, eps);
            let d = hist.total as f64;
            let expected: Vec<f64> = smoothed.bin_probabilities(hist.binning).iter().map(|p| d * p).collect();
            out.write("histogram.csv", &csv(|b| hist.write_csv(&expected, b))?)?;
            let gof = classical_gof(&hist, &smoothed)?;
            let (rate, se) = acceptance_rate(&log)?;
            json!({"variant": kind, "m": m, "seed": seed, "epsilon": eps, "recorded": log.accepted(),
                   "acceptance_rate": rate, "acceptance_stderr": se, "expected_rate": (1.0 - eps.cos()) / 2.0,
                   "chi_square_vs_cone_smoothed": gof,
                   "bin_max_deviation_vs_p_c": bin_max_deviation(&hist, &dens),
                   "bin_max_deviation_vs_cone_smoothed": bin_max_deviation(&hist, &smoothed)})
        }
        ExperimentKind::Cv => {
            let State::Cv(st, cv) = resolve_state(cfg, DEFAULT_CV_STATE)? else {
                return Err(CliError::Input("the cv experiment needs a CV state".into()));
            };
            let log = cv_experiment(&st, &cv, &CvExperimentConfig { m, seed, keep_rejected: keep })?;
            out.write("log.csv", &csv(|b| log.write_csv(b))?)?;
            let bx = *cfg.bins_x.get_or_insert(8);
            let bp = *cfg.bins_p.get_or_insert(8);
            let hist = cv_histogram(&log, &cv, bx, bp)?;
            out.write("histogram.csv", &csv(|b| hist.write_csv(b))?)?;
            let gof = cv_gof(&hist, &st, &cv)?;
            let (rate, se) = log.acceptance_rate()?;
            json!({"variant": kind, "m": m, "seed": seed, "recorded": log.accepted,
                   "acceptance_rate": rate, "acceptance_stderr": se,
                   "expected_rate": expected_cv_acceptance(&st, &cv), "chi_square": gof})
        }
        ExperimentKind::ClassicalCv => {
            let cv = cv_config(cfg)?;
            let center = center_of(cfg)?;
            cfg.center = Some(vec![center.x_star, center.p_star]);
            let eps = *cfg.epsilon.get_or_insert(0.25);
            let rho_l = GaussianLiouville::new(center, cv);
            let log = classical_cv_experiment(
                &rho_l,
                &cv,
                &ClassicalCvConfig { m, epsilon: eps, seed, keep_rejected: keep },
            )?;
            out.write("log.csv", &csv(|b| log.write_csv(b))?)?;
            let bx = *cfg.bins_x.get_or_insert(8);
            let bp = *cfg.bins_p.get_or_insert(8);
            let hist = cv_histogram(&log, &cv, bx, bp)?;
            out.write("histogram.csv", &csv(|b| hist.write_csv(b))?)?;
            let (rate, se) = log.acceptance_rate()?;
            json!({"variant": kind, "m": m, "seed": seed, "epsilon": eps, "recorded": log.accepted,
                   "acceptance_rate": rate, "acceptance_stderr": se,
                   "bin_max_deviation_vs_liouville": cv_bin_max_deviation(&hist, &rho_l)})
        }
    };
    println!("recorded {} of {} trials; rate {}", report["recorded"], m, report["acceptance_rate"]);
    out.write_json("gof.json", &report)?;
    Ok(EXIT_OK)
}

pub fn top(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let field = RunConfig::vec3(&cfg.field, "field")?.unwrap_or([0.0, 0.0, 1.0]);
    cfg.field = Some(field.to_vec());
    let b = Vector3::from(field);
    let default_axis = UnitVector::from_angles(PI / 3.0, 0.0);
    let axis = RunConfig::vec3(&cfg.axis, "axis")?.unwrap_or([default_axis.x, default_axis.y, default_axis.z]);
    cfg.axis = Some(axis.to_vec());
    let w0 = UnitVector::new(axis[0], axis[1], axis[2]).map_err(|e| CliError::Input(format!("axis: {e}")))?;
    let ratio = *cfg.omega_ratio.get_or_insert(1000.0);
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(CliError::Input("omega_ratio must be positive".into()));
    }
    let dimensionless = *cfg.dimensionless_time.get_or_insert(false);
    // C = 1, so C|B| = |B|; with no field the rate scale falls back to 1.
    let rate = if b.norm() > 0.0 { b.norm() } else { 1.0 };
    if dimensionless && b.norm() == 0.0 {
        return Err(CliError::Input("dimensionless time needs a non-zero field".into()));
    }
    let to_t = |tau: f64| if dimensionless { tau / rate } else { tau };
    let from_t = |t: f64| if dimensionless { t * rate } else { t };
    let params = TopParams::unit_coupling(ratio * rate, b)?;
    let t_end = to_t(*cfg.t_end.get_or_insert(from_t(TAU / rate)));
    let dt = to_t(*cfg.dt.get_or_insert(from_t(params.spin_period() / 64.0)));
    let dt_c = to_t(*cfg.dt_canonical.get_or_insert(from_t(TAU / rate / 2000.0)));

    let rigid = rigid_body_sim(&params, &TopState::from_axis(&w0), t_end, dt)?;
    for w in &rigid.warnings {
        eprintln!("warning: {w}");
    }
    let every = *cfg.record_every.get_or_insert(rigid.times.len().div_ceil(1000).max(1));
    let keep = |i: usize, len: usize| i.is_multiple_of(every) || i + 1 == len;
    let n = rigid.times.len();
    let rigid_rows = (0..n).filter(|&i| keep(i, n)).map(|i| (from_t(rigid.times[i]), rigid.states[i].axis()));
    out.write("rigid.csv", &csv(|b| write_axis_csv(rigid_rows, b))?)?;
    let avg_rows =
        (0..n).filter(|&i| keep(i, n)).map(|i| (from_t(rigid.times[i]), averaged_step(&w0, &params, rigid.times[i])));
    out.write("averaged.csv", &csv(|b| write_axis_csv(avg_rows, b))?)?;

    let canon = hamilton_traj(&CanonicalState::from_axis(&w0), &params, t_end, dt_c)?;
    let canon_dev = canon
        .times
        .iter()
        .zip(&canon.states)
        .map(|(&t, s)| s.axis().angle_to(&averaged_step(&w0, &params, t)))
        .fold(0.0, f64::max);
    let mut scaled = canon.clone();
    scaled.times.iter_mut().for_each(|t| *t = from_t(*t));
    let c_every = canon.times.len().div_ceil(1000).max(1);
    out.write("canonical.csv", &csv(|b| write_canonical_csv(&scaled, c_every, b))?)?;

    let bhat = if b.norm() > 0.0 { b / b.norm() } else { Vector3::zeros() };
    let proj0 = w0.to_vector().dot(&bhat);
    let rigid_proj = rigid.states.iter().map(|s| (s.w.dot(&bhat) - proj0).abs()).fold(0.0, f64::max);
    let avg_proj = rigid
        .times
        .iter()
        .map(|&t| (averaged_step(&w0, &params, t).to_vector().dot(&bhat) - proj0).abs())
        .fold(0.0, f64::max);
    let deviation = rigid.max_deviation_from_averaged(&params);
    let report = json!({
        "coupling_C": params.coupling(), "field": field, "omega": params.omega, "spin_ratio": ratio,
        "time_unit": if dimensionless { "tau = C|B| t" } else { "t" },
        "t_end": from_t(t_end), "dt": from_t(dt), "dt_canonical": from_t(dt_c), "steps": n - 1,
        "max_deviation_rad": deviation,
        "max_norm_drift": rigid.max_norm_drift,
        "averaged_projection_drift": avg_proj,
        "rigid_projection_oscillation": rigid_proj,
        "canonical_max_deviation_rad": canon_dev,
        "hamiltonian_rel_drift": canon.max_rel_energy_drift,
        "warnings": rigid.warnings,
    });
    println!("max deviation {deviation:e} rad, |w| drift {:e}", rigid.max_norm_drift);
    out.write_json("top_report.json", &report)?;
    Ok(EXIT_OK)
}

pub fn cv(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let State::Cv(st, cv) = resolve_state(cfg, DEFAULT_CV_STATE)? else {
        return Err(CliError::Input("the cv command needs a CV state".into()));
    };
    let l = *cfg.grid.get_or_insert(DEFAULT_GRID);
    let s = wehrl_cv(&st, &cv, l)?;
    let report = json!({
        "dim": st.dim(), "sigma": cv.sigma, "hbar": cv.hbar, "x_max": cv.x_max, "p_max": cv.p_max,
        "purity": st.purity(), "box_mass": box_mass(&st, &cv, l), "grid": l,
        "wehrl": s, "coherent_value": coherent_wehrl(&cv),
        "expected_acceptance_rate": expected_cv_acceptance(&st, &cv),
    });
    out.write("husimi_cv.csv", &csv(|b| write_husimi_cv_csv(&st, &cv, CV_CSV_POINTS, b))?)?;
    out.write_json("cv_report.json", &report)?;
    println!("S_W = {s} (coherent {})", coherent_wehrl(&cv));
    Ok(EXIT_OK)
}

pub fn selftest(cfg: &mut RunConfig, out: &mut OutputDir) -> Result<i32, CliError> {
    let seed = *cfg.seed.get_or_insert(DEFAULT_SEED);
    let scale = selftest::tolerance_scale()?;
    let rows = selftest::run(seed, scale)?;
    print!("{}", selftest::table(&rows));
    let failed = rows.iter().filter(|r| !r.pass).count();
    out.write_json("selftest.json", &json!({"tolerance_scale": scale, "checks": rows, "failed": failed}))?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ORACLE })
}
