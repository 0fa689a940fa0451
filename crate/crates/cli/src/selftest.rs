//! Closed-form oracle table run by `husimi-lab selftest`.

use std::env;
use std::f64::consts::{PI, TAU};
use std::fmt::Write;

use husimi_lab::bayes::{acceptance_rate, run_experiment, ExperimentConfig, Variant};
use husimi_lab::classitop::{
    averaged_step, gibbs_entropy, heisenberg_expectation, heisenberg_map, DipoleDensity, TopParams,
};
use husimi_lab::cvmode::{
    coherent_wehrl, gibbs_entropy_cv, wehrl_cv, CvConfig, CvState, GaussianLiouville, PhasePoint, DEFAULT_GRID,
};
use husimi_lab::husimi::{completeness_residual, sphere_grid, wehrl_quadrature, ProductGrid};
use husimi_lab::qspin::{DensityMatrix, DirectionTuple, UnitVector};
use nalgebra::Vector3;
use serde::Serialize;

use crate::error::CliError;

/// Multiplies every tolerance; e.g. `1e-12` forces failures on purpose.
pub const TOL_SCALE_ENV: &str = "HUSIMI_SELFTEST_TOL_SCALE";

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn tolerance_scale() -> Result<f64, CliError> {
    match env::var(TOL_SCALE_ENV) {
        Err(_) => Ok(1.0),
        Ok(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0 && v.is_finite())
            .ok_or_else(|| CliError::Input(format!("{TOL_SCALE_ENV} must be a non-negative number, got `{s}`"))),
    }
}

fn check(name: &str, value: f64, expected: f64, tolerance: f64, scale: f64) -> Check {
    let tolerance = tolerance * scale;
    Check { name: name.into(), value, expected, tolerance, pass: (value - expected).abs() <= tolerance }
}

pub fn run(seed: u64, scale: f64) -> Result<Vec<Check>, CliError> {
    let coherent1 = TAU.ln() + 0.5;
    let g1 = ProductGrid::uniform(1, 64)?;
    let g2 = ProductGrid::uniform(2, 48)?;
    let n0 = UnitVector::from_angles(PI / 3.0, PI / 4.0);
    let one = DirectionTuple::single(n0);
    let two = DirectionTuple(vec![n0, UnitVector::from_angles(2.0, 0.5)]);
    let mut rows = vec![
        check(
            "wehrl I/2 = ln 4pi",
            wehrl_quadrature(&DensityMatrix::maximally_mixed(1)?, &g1)?,
            (4.0 * PI).ln(),
            1e-10,
            scale,
        ),
        check(
            "wehrl coherent = ln 2pi + 1/2",
            wehrl_quadrature(&DensityMatrix::coherent(&one), &g1)?,
            coherent1,
            1e-6,
            scale,
        ),
        check(
            "wehrl two-qubit product coherent",
            wehrl_quadrature(&DensityMatrix::coherent(&two), &g2)?,
            2.0 * coherent1,
            1e-5,
            scale,
        ),
    ];
    let cv = CvConfig::default();
    rows.push(check(
        "wehrl CV coherent = 1 + ln 2pi",
        wehrl_cv(&CvState::coherent(&PhasePoint::new(0.5, -1.0), &cv)?, &cv, DEFAULT_GRID)?,
        1.0 + TAU.ln(),
        1e-6,
        scale,
    ));
    rows.push(check("completeness residual N=1 (L=64)", completeness_residual(&g1), 0.0, 1e-10, scale));
    rows.push(check(
        "completeness residual N=2 (L=16)",
        completeness_residual(&ProductGrid::uniform(2, 16)?),
        0.0,
        1e-10,
        scale,
    ));
    for n in [1usize, 2] {
        let m = 200_000;
        let rho = DensityMatrix::coherent(&DirectionTuple(vec![n0; n]));
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::A, n, m, seed))?;
        let (rate, _) = acceptance_rate(&log)?;
        let p = 0.5f64.powi(n as i32);
        let four_se = 4.0 * (p * (1.0 - p) / m as f64).sqrt();
        rows.push(check(&format!("acceptance rate N={n} = 1/2^N"), rate, p, four_se, scale));
    }
    let grid = sphere_grid(64)?;
    rows.push(check(
        "Gibbs(P_C) = Wehrl(coherent)",
        gibbs_entropy(&DipoleDensity::coherent(&n0), &grid),
        wehrl_quadrature(&DensityMatrix::coherent(&one), &g1)?,
        1e-9,
        scale,
    ));
    rows.push(check(
        "Gibbs(vacuum Liouville) = 1 + ln 2pi hbar",
        gibbs_entropy_cv(&GaussianLiouville::new(PhasePoint::new(0.0, 0.0), cv), &cv, DEFAULT_GRID),
        coherent_wehrl(&cv),
        1e-6,
        scale,
    ));
    let f = Vector3::new(0.3, -0.7, 0.4);
    let params = TopParams::unit_coupling(1.0, heisenberg_map(&f, 1.0)?)?;
    let worst = (0..=100)
        .map(|k| {
            let t = 0.1 * k as f64;
            (heisenberg_expectation(&f, &n0, t) - averaged_step(&n0, &params, t).to_vector()).norm()
        })
        .fold(0.0, f64::max);
    rows.push(check("top vs <sigma(t)> with B = -2f/C", worst, 0.0, 1e-8, scale));
    Ok(rows)
}

pub fn table(rows: &[Check]) -> String {
    let mut s = String::new();
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>18.12}  {:>18.12}  tol {:<9.2e} {}",
            r.name,
            r.value,
            r.expected,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let _ = writeln!(s, "{} checks, {} failed", rows.len(), failed);
    s
}
