//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any of them fails. Built with `harness = false` so the
//! lines are always visible under `cargo test`.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use husimi_lab::bayes::{gof_chisquare, histogram, run_experiment, two_sample_compare, ExperimentConfig, Variant};
use husimi_lab::classitop::{
    averaged_step, averaged_trajectory, gibbs_entropy, hamilton_traj, heisenberg_expectation, heisenberg_map,
    rigid_body_sim, CanonicalState, DipoleDensity, TopParams, TopState,
};
use husimi_lab::cvmode::{
    coherent_wehrl, gibbs_entropy_cv, random_cv_mixed, random_cv_pure, wehrl_cv, CvConfig, CvState, GaussianLiouville,
    PhasePoint, DEFAULT_GRID,
};
use husimi_lab::husimi::{completeness_residual, sphere_grid, wehrl_quadrature, ProductGrid};
use husimi_lab::qspin::{random_mixed_state, random_pure_state, DensityMatrix, DirectionTuple, UnitVector};
use husimi_lab::rng;
use husimi_lab_cli::manifest::{self, Manifest, MANIFEST_FILE};
use nalgebra::Vector3;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tilted() -> UnitVector {
    UnitVector::from_angles(PI / 3.0, PI / 4.0)
}

fn entropy_constants() -> Outcome {
    let started = Instant::now();
    let g1 = ProductGrid::uniform(1, 64).unwrap();
    let g2 = ProductGrid::uniform(2, 48).unwrap();
    let coh = TAU.ln() + 0.5;
    let mixed = wehrl_quadrature(&DensityMatrix::maximally_mixed(1).unwrap(), &g1).unwrap();
    let single = wehrl_quadrature(&DensityMatrix::coherent(&DirectionTuple::single(tilted())), &g1).unwrap();
    let pair = DirectionTuple(vec![tilted(), UnitVector::from_angles(2.0, 0.5)]);
    let two = wehrl_quadrature(&DensityMatrix::coherent(&pair), &g2).unwrap();
    let cv = CvConfig::default();
    let cvc = wehrl_cv(&CvState::coherent(&PhasePoint::new(0.5, -1.0), &cv).unwrap(), &cv, DEFAULT_GRID).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let errs = [
        (mixed - (4.0 * PI).ln()).abs(),
        (single - coh).abs(),
        (cvc - (1.0 + TAU.ln())).abs(),
        (two - 2.0 * coh).abs(),
    ];
    let pass = errs[0] < 1e-10 && errs[1] < 1e-6 && errs[2] < 1e-6 && errs[3] < 1e-5 && secs < 10.0;
    outcome(
        pass,
        format!(
            "I/2 {mixed:.12} (err {:.1e}), coherent {single:.9} ({:.1e}), CV {cvc:.9} ({:.1e}), pair {two:.9} ({:.1e}), {secs:.2}s",
            errs[0], errs[1], errs[2], errs[3]
        ),
    )
}

fn completeness() -> Outcome {
    let started = Instant::now();
    let r1 = completeness_residual(&ProductGrid::uniform(1, 64).unwrap());
    let r2 = completeness_residual(&ProductGrid::uniform(2, 48).unwrap());
    let secs = started.elapsed().as_secs_f64();
    outcome(r1 < 1e-10 && r2 < 1e-10 && secs < 60.0, format!("N=1 {r1:.1e}, N=2 {r2:.1e}, {secs:.1}s"))
}

fn bayes_experiment() -> Outcome {
    const RUNS: u64 = 100;
    const M: u64 = 1_000_000;
    let started = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1usize, 2] {
        let (hz, hp) = if n == 1 { (8, 16) } else { (4, 4) };
        let dirs = DirectionTuple(vec![tilted(), UnitVector::from_angles(2.0, 0.5)][..n].to_vec());
        let states = [
            ("coherent", DensityMatrix::coherent(&dirs)),
            ("mixed", DensityMatrix::maximally_mixed(n).unwrap()),
            ("random-pure", random_pure_state(n, 11).unwrap()),
            ("random-mixed", random_mixed_state(n, 1 << n, 12).unwrap()),
        ];
        let p = 0.5f64.powi(n as i32);
        for (name, rho) in &states {
            let mut good = 0;
            let mut accepted = 0u64;
            for seed in 0..RUNS {
                let log = run_experiment(rho, &ExperimentConfig::new(Variant::A, n, M, seed)).unwrap();
                accepted += log.accepted();
                let ok = histogram(&log, hz, hp)
                    .and_then(|h| gof_chisquare(&h, rho))
                    .map(|r| r.p_value > 0.01)
                    .unwrap_or(false);
                good += ok as u32;
            }
            let trials = (RUNS * M) as f64;
            let rate = accepted as f64 / trials;
            let z = (rate - p) / (p * (1.0 - p) / trials).sqrt();
            pass &= good >= 95 && z.abs() <= 3.0;
            parts.push(format!("N={n} {name} {good}/100 z={z:+.2}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    outcome(pass, format!("{}; {secs:.0}s", parts.join(", ")))
}

fn variant_equivalence() -> Outcome {
    let rho = DensityMatrix::coherent(&DirectionTuple::single(tilted()));
    let mut good = 0;
    for seed in 0..100 {
        let a = run_experiment(&rho, &ExperimentConfig::new(Variant::A, 1, 1_000_000, seed)).unwrap();
        let b = run_experiment(&rho, &ExperimentConfig::new(Variant::B, 1, 1_000_000, seed)).unwrap();
        let ks = two_sample_compare(&a, &b).unwrap();
        good += ks.iter().all(|r| r.p_value > 0.01) as u32;
    }
    outcome(good >= 95, format!("{good}/100 runs with p > 0.01"))
}

fn classical_top() -> Outcome {
    let started = Instant::now();
    let b = Vector3::new(0.3, 0.1, 1.0);
    let w0 = UnitVector::from_angles(1.0, 0.2);
    let bhat = b.normalize();
    let c0 = w0.to_vector().dot(&bhat);
    let mut devs = Vec::new();
    let mut drift: f64 = 0.0;
    let mut projection: f64 = 0.0;
    for ratio in [1000.0, 2000.0] {
        let p = TopParams::unit_coupling(ratio * b.norm(), b).unwrap();
        let dt = p.spin_period() / 64.0;
        let t_end = p.precession_period();
        let traj = rigid_body_sim(&p, &TopState::from_axis(&w0), t_end, dt).unwrap();
        devs.push(traj.max_deviation_from_averaged(&p));
        drift = drift.max(traj.max_norm_drift);
        for (_, w) in averaged_trajectory(&w0, &p, t_end, dt).unwrap() {
            projection = projection.max((w.to_vector().dot(&bhat) - c0).abs());
            drift = drift.max(w.norm_residual());
        }
    }
    let halving = devs[1] / devs[0];
    let secs = started.elapsed().as_secs_f64();
    let pass = devs[0] <= 5e-3 && (0.35..=0.65).contains(&halving) && drift < 1e-8 && projection < 1e-8 && secs < 120.0;
    outcome(
        pass,
        format!(
            "deviation {:.3e} -> {:.3e} rad (ratio {halving:.3}), |w| drift {drift:.1e}, w.B drift {projection:.1e}, {secs:.1}s",
            devs[0], devs[1]
        ),
    )
}

fn hamiltonian_equivalence() -> Outcome {
    let bhat = Vector3::new((PI / 6.0).sin(), 0.0, (PI / 6.0).cos());
    let p = TopParams::unit_coupling(1.0, 1.3 * bhat).unwrap();
    // 40 degrees away from the field keeps the axis clear of the chart poles
    let w0 = UnitVector::from_vector(
        &nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), 40f64.to_radians()).transform_vector(&bhat),
    )
    .unwrap();
    let period = p.precession_period();
    let traj = hamilton_traj(&CanonicalState::from_axis(&w0), &p, 10.0 * period, period / 2000.0).unwrap();
    let dev = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| s.axis().angle_to(&averaged_step(&w0, &p, t)))
        .fold(0.0, f64::max);
    let energy = traj.max_rel_energy_drift;
    outcome(dev < 1e-6 && energy < 1e-9, format!("max deviation {dev:.2e} rad, energy drift {energy:.2e}"))
}

fn heisenberg() -> Outcome {
    let mut r = rng::stream(2024, "acceptance/heisenberg", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let f = rng::uniform_direction(&mut r).to_vector() * (0.1 + 2.0 * r.random::<f64>());
        let coupling = 0.5 + r.random::<f64>();
        let p = TopParams::new(2.0 * coupling, 1.0, 1.0, 1.0, heisenberg_map(&f, coupling).unwrap()).unwrap();
        let s0 = rng::uniform_direction(&mut r);
        for k in 0..=1000 {
            let t = 0.01 * k as f64;
            worst = worst.max((heisenberg_expectation(&f, &s0, t) - averaged_step(&s0, &p, t).to_vector()).norm());
        }
    }
    outcome(worst < 1e-8, format!("worst |<sigma> - w| {worst:.2e}"))
}

fn bridges() -> Outcome {
    let grid = sphere_grid(64).unwrap();
    let g1 = ProductGrid::uniform(1, 64).unwrap();
    let spin_gap = (gibbs_entropy(&DipoleDensity::coherent(&tilted()), &grid)
        - wehrl_quadrature(&DensityMatrix::coherent(&DirectionTuple::single(tilted())), &g1).unwrap())
    .abs();
    let cv = CvConfig::default();
    let liouville = GaussianLiouville::new(PhasePoint::new(0.0, 0.0), cv);
    let cv_gap = (gibbs_entropy_cv(&liouville, &cv, DEFAULT_GRID) - coherent_wehrl(&cv)).abs();
    outcome(spin_gap < 1e-9 && cv_gap < 1e-6, format!("spin gap {spin_gap:.1e}, CV gap {cv_gap:.1e}"))
}

fn lieb_bounds() -> Outcome {
    let g1 = ProductGrid::uniform(1, 64).unwrap();
    let floor = TAU.ln() + 0.5;
    let spin_min = (0..200)
        .map(|s| wehrl_quadrature(&random_pure_state(1, 1000 + s).unwrap(), &g1).unwrap())
        .fold(f64::INFINITY, f64::min);
    let cv = CvConfig::default();
    let cv_min = (0..25)
        .map(|s| random_cv_pure(1 + s as usize % 5, 32, 500 + s).unwrap())
        .chain((0..25).map(|s| random_cv_mixed(1 + s as usize % 5, 1 + s as usize % 4, 32, 600 + s).unwrap()))
        .map(|st| wehrl_cv(&st, &cv, DEFAULT_GRID).unwrap())
        .fold(f64::INFINITY, f64::min);
    let cv_floor = coherent_wehrl(&cv);
    outcome(
        spin_min >= floor - 1e-6 && cv_min >= cv_floor - 1e-6,
        format!("spin min {spin_min:.9} vs {floor:.9}, CV min {cv_min:.9} vs {cv_floor:.9}"),
    )
}

const RUNS: &[&[&str]] = &[
    &["wehrl", "--state", "random-mixed:3"],
    &["wehrl", "--state", "thermal-cv:0.3"],
    &["husimi-grid", "--state", "random:5", "--n-particles", "2", "--grid", "6"],
    &["experiment", "--variant", "a", "--state", "random-mixed:4", "-m", "300000", "--keep-rejected"],
    &["experiment", "--variant", "b", "--n-particles", "2", "-m", "200000"],
    &["experiment", "--variant", "classical", "-m", "300000"],
    &["experiment", "--variant", "cv", "--state", "coherent-cv:0.5,-0.3", "-m", "200000"],
    &["experiment", "--variant", "classical-cv", "-m", "200000"],
    &["top", "--omega-ratio", "200", "--field", "0.3,0.1,1"],
    &["cv", "--state", "random-cv:7"],
];

fn husimi_lab(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_husimi-lab")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn replay_one(root: &Path, k: usize, args: &[&str]) -> Result<(), String> {
    let first = root.join(format!("run{k}"));
    let first_s = first.to_str().unwrap();
    let mut cmd = args.to_vec();
    cmd.extend(["--threads", "1", "--out", first_s]);
    husimi_lab(&cmd)?;
    let m1: Manifest = serde_json::from_str(&fs::read_to_string(first.join(MANIFEST_FILE)).unwrap()).unwrap();
    let manifest_path = first.join(MANIFEST_FILE);
    for threads in ["3", "8"] {
        let again = root.join(format!("run{k}-t{threads}"));
        husimi_lab(&[
            args[0],
            "--config",
            manifest_path.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            again.to_str().unwrap(),
        ])?;
        let m2: Manifest = serde_json::from_str(&fs::read_to_string(again.join(MANIFEST_FILE)).unwrap()).unwrap();
        if m1.outputs != m2.outputs || m1.config != m2.config {
            return Err(format!("{} replay with {threads} threads differs", args[0]));
        }
        for name in m1.outputs.keys() {
            if fs::read(first.join(name)).unwrap() != fs::read(again.join(name)).unwrap() {
                return Err(format!("{name} differs on replay"));
            }
        }
        let bad = manifest::verify(&again, &m2).map_err(|e| e.to_string())?;
        if !bad.is_empty() {
            return Err(format!("digest mismatch in {bad:?}"));
        }
    }
    Ok(())
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut files = 0;
    for (k, args) in RUNS.iter().enumerate() {
        if let Err(e) = replay_one(root.path(), k, args) {
            return outcome(false, e);
        }
        let m: Manifest =
            serde_json::from_str(&fs::read_to_string(root.path().join(format!("run{k}/{MANIFEST_FILE}"))).unwrap())
                .unwrap();
        files += m.outputs.len();
    }
    outcome(true, format!("{} runs, {files} files identical at 1, 3 and 8 threads", RUNS.len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("entropy constants", entropy_constants),
        ("completeness", completeness),
        ("bayes experiment", bayes_experiment),
        ("variant equivalence", variant_equivalence),
        ("classical top", classical_top),
        ("hamiltonian equivalence", hamiltonian_equivalence),
        ("heisenberg correspondence", heisenberg),
        ("quantum-classical bridge", bridges),
        ("lieb bounds", lieb_bounds),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += !o.pass as usize;
        println!("criterion {:>2} {name:<26} {}  {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
