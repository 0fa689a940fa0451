//! Charged symmetric top in a uniform magnetic field: the classical
//! counterpart of a spin-1/2 particle.
//!
//! Three descriptions of the axis direction `w` are provided and cross-checked:
//! the fast-spin averaged precession `dw/dt = C w x B` with `C = Q R^2 / (2 I)`,
//! the full rigid body driven by the instantaneous Lorentz torque, and the
//! canonical pair `(varphi, p_varphi = w_z)` with Hamiltonian `H_top`.
//!
//! The torque is `M = r x F_L`. Writing it as `F_L x r` flips the sign of the
//! averaged torque; only `r x F_L` gives `<M> = QR^2 omega (w x B) / 2`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::bayes::{DirectionLog, SphereBinning, SphericalHistogram};
use crate::error::{Error, Result};
use crate::husimi::SphereGrid;
use crate::qspin::{coherent_ket, pauli, DensityMatrix, UnitVector};
use crate::rng;
use crate::stats::{self, ChiSquareResult, SparseBins};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopParams {
    pub charge: f64,
    pub radius: f64,
    pub inertia: f64,
    pub omega: f64,
    pub field: Vector3<f64>,
}

impl TopParams {
    pub fn new(charge: f64, radius: f64, inertia: f64, omega: f64, field: Vector3<f64>) -> Result<Self> {
        let all_finite =
            [charge, radius, inertia, omega].iter().all(|v| v.is_finite()) && field.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("top parameters must be finite".into()));
        }
        if inertia <= 0.0 {
            return Err(Error::InvalidParameter("moment of inertia must be positive".into()));
        }
        if radius < 0.0 {
            return Err(Error::InvalidParameter("charge radius must be non-negative".into()));
        }
        Ok(Self { charge, radius, inertia, omega, field })
    }

    /// Dimensionless setup with `C = 1`: `Q = 2, R = 1, I = 1`.
    pub fn unit_coupling(omega: f64, field: Vector3<f64>) -> Result<Self> {
        Self::new(2.0, 1.0, 1.0, omega, field)
    }

    /// `C = Q R^2 / (2 I)`.
    pub fn coupling(&self) -> f64 {
        self.charge * self.radius * self.radius / (2.0 * self.inertia)
    }

    /// Precession angular frequency `C |B|`.
    pub fn precession_rate(&self) -> f64 {
        (self.coupling() * self.field.norm()).abs()
    }

    pub fn precession_period(&self) -> f64 {
        TAU / self.precession_rate()
    }

    pub fn spin_period(&self) -> f64 {
        TAU / self.omega.abs()
    }

    /// `omega / (C |B|)`.
    pub fn spin_ratio(&self) -> f64 {
        self.omega.abs() / self.precession_rate()
    }
}

/// Axis `w` plus the right-handed triad `(w1, w2, w)` carrying the charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopState {
    pub w: Vector3<f64>,
    pub w1: Vector3<f64>,
    pub w2: Vector3<f64>,
    pub spin_phase: f64,
}

impl TopState {
    /// `w1 = e_phi`, `w2 = -e_theta`, so that `w1 x w2 = w`.
    pub fn from_axis(w: &UnitVector) -> Self {
        let (theta, phi) = (w.theta(), w.phi());
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            w: w.to_vector(),
            w1: Vector3::new(-sp, cp, 0.0),
            w2: Vector3::new(-ct * cp, -ct * sp, st),
            spin_phase: 0.0,
        }
    }

    pub fn axis(&self) -> UnitVector {
        UnitVector::from_vector(&self.w).expect("axis is non-zero")
    }

    /// Largest deviation of the triad Gram matrix from the identity, plus handedness.
    pub fn orthonormality_residual(&self) -> f64 {
        let v = [self.w1, self.w2, self.w];
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v[i].dot(&v[j]) - target).abs());
            }
        }
        worst.max((self.w1.cross(&self.w2) - self.w).norm())
    }

    /// Charge position `R (cos(phase) w1 + sin(phase) w2)`.
    pub fn charge_position(&self, params: &TopParams) -> Vector3<f64> {
        let (s, c) = self.spin_phase.sin_cos();
        params.radius * (c * self.w1 + s * self.w2)
    }

    /// Spin part of the charge velocity, `R omega (-sin w1 + cos w2)`.
    pub fn charge_velocity(&self, params: &TopParams) -> Vector3<f64> {
        let (s, c) = self.spin_phase.sin_cos();
        params.radius * params.omega * (-s * self.w1 + c * self.w2)
    }

    fn gram_schmidt(&mut self) {
        self.w = self.w.normalize();
        self.w1 = (self.w1 - self.w1.dot(&self.w) * self.w).normalize();
        self.w2 = self.w.cross(&self.w1);
    }
}

/// Exact solution of `dw/dt = C w x B` over `dt`: rotation about `B^` by `-C|B| dt`.
pub fn averaged_step(w: &UnitVector, params: &TopParams, dt: f64) -> UnitVector {
    let b = params.field.norm();
    if b == 0.0 || params.coupling() == 0.0 {
        return *w;
    }
    let axis = params.field / b;
    let angle = -params.coupling() * b * dt;
    let v = w.to_vector();
    let (s, c) = angle.sin_cos();
    let rotated = v * c + axis.cross(&v) * s + axis * axis.dot(&v) * (1.0 - c);
    UnitVector::from_vector(&rotated).expect("rotation preserves norm")
}

/// Spin-period mean of the Lorentz torque, `Q R^2 omega (w x B) / 2`.
pub fn mean_torque(w: &UnitVector, params: &TopParams) -> Vector3<f64> {
    0.5 * params.charge * params.radius * params.radius * params.omega * w.to_vector().cross(&params.field)
}

/// `M = r x F_L` with `F_L = Q v x B` and the spin velocity of the charge.
pub fn instantaneous_torque(state: &TopState, params: &TopParams) -> Vector3<f64> {
    let r = state.charge_position(params);
    let f = params.charge * state.charge_velocity(params).cross(&params.field);
    r.cross(&f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<TopState>,
    /// Largest `||w| - 1|` after an RK4 step, before re-orthonormalization.
    pub max_norm_drift: f64,
    pub warnings: Vec<String>,
}

impl RigidTrajectory {
    /// Largest angle between `w(t)` and the averaged precession from the same start.
    pub fn max_deviation_from_averaged(&self, params: &TopParams) -> f64 {
        let w0 = self.states[0].axis();
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| s.axis().angle_to(&averaged_step(&w0, params, t)))
            .fold(0.0, f64::max)
    }
}

fn uniform_steps(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("end time {t_end} must be non-negative")));
    }
    let n = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    Ok(if n == 0 { (0, dt) } else { (n, t_end / n as f64) })
}

#[derive(Clone, Copy)]
struct RigidDeriv {
    w: Vector3<f64>,
    w1: Vector3<f64>,
    w2: Vector3<f64>,
    phase: f64,
}

fn rigid_rhs(s: &TopState, params: &TopParams) -> RigidDeriv {
    let m = instantaneous_torque(s, params);
    let w_dot = m / (params.inertia * params.omega);
    // transport the triad with the axis, no extra spin about w
    let omega_t = s.w.cross(&w_dot);
    RigidDeriv { w: w_dot, w1: omega_t.cross(&s.w1), w2: omega_t.cross(&s.w2), phase: params.omega }
}

fn advance(s: &TopState, d: &RigidDeriv, h: f64) -> TopState {
    TopState { w: s.w + d.w * h, w1: s.w1 + d.w1 * h, w2: s.w2 + d.w2 * h, spin_phase: s.spin_phase + d.phase * h }
}

pub const MIN_STEPS_PER_SPIN: f64 = 50.0;

/// Integrates `dw/dt = M(t) / (I omega)` with RK4 and per-step Gram–Schmidt.
pub fn rigid_body_sim(params: &TopParams, state0: &TopState, t_end: f64, dt: f64) -> Result<RigidTrajectory> {
    if params.omega == 0.0 {
        return Err(Error::InvalidParameter("rigid-body model needs a spinning top (omega != 0)".into()));
    }
    let limit = params.spin_period() / MIN_STEPS_PER_SPIN;
    if dt > limit {
        return Err(Error::TimeStepTooLarge { dt, limit });
    }
    let (n, h) = uniform_steps(t_end, dt)?;
    let mut warnings = Vec::new();
    let ratio = params.spin_ratio();
    if ratio < 100.0 {
        warnings.push(format!("spin ratio omega/(C|B|) = {ratio:.3} < 100; averaging is not justified"));
    }
    let mut s = *state0;
    s.gram_schmidt();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(s);
    let mut drift: f64 = 0.0;
    for i in 0..n {
        let k1 = rigid_rhs(&s, params);
        let k2 = rigid_rhs(&advance(&s, &k1, 0.5 * h), params);
        let k3 = rigid_rhs(&advance(&s, &k2, 0.5 * h), params);
        let k4 = rigid_rhs(&advance(&s, &k3, h), params);
        let comb = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| {
            (a + 2.0 * b + 2.0 * c + d) * (h / 6.0)
        };
        s = TopState {
            w: s.w + comb(k1.w, k2.w, k3.w, k4.w),
            w1: s.w1 + comb(k1.w1, k2.w1, k3.w1, k4.w1),
            w2: s.w2 + comb(k1.w2, k2.w2, k3.w2, k4.w2),
            spin_phase: state0.spin_phase + params.omega * h * (i + 1) as f64,
        };
        drift = drift.max((s.w.norm() - 1.0).abs());
        s.gram_schmidt();
        times.push(h * (i + 1) as f64);
        states.push(s);
    }
    Ok(RigidTrajectory { times, states, max_norm_drift: drift, warnings })
}

/// Averaged precession sampled every `dt` up to `t_end`.
pub fn averaged_trajectory(w0: &UnitVector, params: &TopParams, t_end: f64, dt: f64) -> Result<Vec<(f64, UnitVector)>> {
    let (n, h) = uniform_steps(t_end, dt)?;
    Ok((0..=n)
        .map(|i| {
            let t = h * i as f64;
            (t, averaged_step(w0, params, t))
        })
        .collect())
}

/// Canonical chart `(varphi, p_varphi = w_z)` of the axis direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalState {
    pub varphi: f64,
    pub p_varphi: f64,
}

impl CanonicalState {
    pub fn new(varphi: f64, p_varphi: f64) -> Result<Self> {
        if !(p_varphi.abs() <= 1.0) || !varphi.is_finite() {
            return Err(Error::InvalidParameter(format!("|p_varphi| = {} exceeds 1", p_varphi.abs())));
        }
        Ok(Self { varphi: varphi.rem_euclid(TAU), p_varphi })
    }

    pub fn from_axis(w: &UnitVector) -> Self {
        Self { varphi: w.phi(), p_varphi: w.z }
    }

    pub fn axis(&self) -> UnitVector {
        UnitVector::from_z_phi(self.p_varphi, self.varphi)
    }
}

/// `H = -C [B_z p + B_x sqrt(1 - p^2) cos(varphi) + B_y sqrt(1 - p^2) sin(varphi)]`.
pub fn hamiltonian(state: &CanonicalState, params: &TopParams) -> Result<f64> {
    let p = state.p_varphi;
    if !(p.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("|p_varphi| = {} exceeds 1", p.abs())));
    }
    let s = (1.0 - p * p).max(0.0).sqrt();
    let b = params.field;
    let (sp, cp) = state.varphi.sin_cos();
    Ok(-params.coupling() * (b.z * p + b.x * s * cp + b.y * s * sp))
}

/// `(dvarphi/dt, dp/dt) = (dH/dp, -dH/dvarphi)`.
fn hamilton_rhs(phi: f64, p: f64, params: &TopParams) -> (f64, f64) {
    let c = params.coupling();
    let b = params.field;
    let s = (1.0 - p * p).sqrt();
    let (sp, cp) = phi.sin_cos();
    let phi_dot = -c * (b.z - p / s * (b.x * cp + b.y * sp));
    let p_dot = c * s * (b.y * cp - b.x * sp);
    (phi_dot, p_dot)
}

pub const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CanonicalState>,
    pub energies: Vec<f64>,
    /// `max |H - H0| / max(|H0|, C|B|)`.
    pub max_rel_energy_drift: f64,
}

/// RK4 in the canonical chart; refuses to approach the chart's poles.
pub fn hamilton_traj(state0: &CanonicalState, params: &TopParams, t_end: f64, dt: f64) -> Result<CanonicalTrajectory> {
    let (n, h) = uniform_steps(t_end, dt)?;
    let guard = |p: f64| {
        if !(p.abs() <= 1.0 - POLE_GUARD) {
            Err(Error::PoleProximity { p })
        } else {
            Ok(())
        }
    };
    guard(state0.p_varphi)?;
    let e0 = hamiltonian(state0, params)?;
    let scale = e0.abs().max(params.precession_rate()).max(f64::MIN_POSITIVE);
    let (mut phi, mut p) = (state0.varphi, state0.p_varphi);
    let mut times = vec![0.0];
    let mut states = vec![*state0];
    let mut energies = vec![e0];
    let mut drift: f64 = 0.0;
    for i in 0..n {
        let (a1, b1) = hamilton_rhs(phi, p, params);
        let p2 = p + 0.5 * h * b1;
        guard(p2)?;
        let (a2, b2) = hamilton_rhs(phi + 0.5 * h * a1, p2, params);
        let p3 = p + 0.5 * h * b2;
        guard(p3)?;
        let (a3, b3) = hamilton_rhs(phi + 0.5 * h * a2, p3, params);
        let p4 = p + h * b3;
        guard(p4)?;
        let (a4, b4) = hamilton_rhs(phi + h * a3, p4, params);
        phi += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        p += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        guard(p)?;
        let st = CanonicalState { varphi: phi.rem_euclid(TAU), p_varphi: p };
        let e = hamiltonian(&st, params)?;
        drift = drift.max((e - e0).abs() / scale);
        times.push(h * (i + 1) as f64);
        states.push(st);
        energies.push(e);
    }
    Ok(CanonicalTrajectory { times, states, energies, max_rel_energy_drift: drift })
}

/// Field that makes the top follow `d sigma/dt = -2 sigma x f`: `B = -2 f / C`.
pub fn heisenberg_map(f: &Vector3<f64>, coupling: f64) -> Result<Vector3<f64>> {
    if coupling == 0.0 || !coupling.is_finite() {
        return Err(Error::InvalidParameter("coupling C must be non-zero".into()));
    }
    Ok(-2.0 * f / coupling)
}

/// `<sigma>(t)` for the pure state with Bloch vector `s0` under `H = hbar f . sigma`,
/// from the exact propagator `cos(|f| t) I - i sin(|f| t) f^ . sigma`.
pub fn heisenberg_expectation(f: &Vector3<f64>, s0: &UnitVector, t: f64) -> Vector3<f64> {
    let fnorm = f.norm();
    let k = coherent_ket(s0);
    let psi = Vector2::new(k.amplitudes()[0], k.amplitudes()[1]);
    let mut u = Matrix2::identity() * Complex64::new((fnorm * t).cos(), 0.0);
    if fnorm > 0.0 {
        let fs = (fnorm * t).sin() / fnorm;
        for (axis, fa) in f.iter().enumerate() {
            u -= pauli(axis) * Complex64::new(0.0, fs * fa);
        }
    }
    let psi_t = u * psi;
    let mut out = Vector3::zeros();
    for axis in 0..3 {
        out[axis] = (psi_t.adjoint() * pauli(axis) * psi_t)[(0, 0)].re;
    }
    out
}

/// A normalized density on the sphere with a sampler.
pub trait SphereDensity: Sync {
    fn density(&self, n: &UnitVector) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector;
}

/// `P_C(n) = (1 + r . n) / (4pi)` with `|r| <= 1`; `r = 0` is uniform and
/// `|r| = 1` matches the Husimi function of a spin coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleDensity {
    r: Vector3<f64>,
}

impl DipoleDensity {
    pub fn new(r: Vector3<f64>) -> Result<Self> {
        if !(r.norm() <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("|r| = {} exceeds 1", r.norm())));
        }
        Ok(Self { r })
    }

    pub fn uniform() -> Self {
        Self { r: Vector3::zeros() }
    }

    pub fn coherent(n0: &UnitVector) -> Self {
        Self { r: n0.to_vector() }
    }

    pub fn dipole(&self) -> Vector3<f64> {
        self.r
    }

    /// Same function as the Husimi field of `(I + r . sigma) / 2`.
    pub fn as_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_bloch([self.r.x, self.r.y, self.r.z]).expect("|r| <= 1")
    }

    pub fn bin_probabilities(&self, binning: SphereBinning) -> Vec<f64> {
        crate::bayes::bin_probabilities(&self.as_density_matrix(), binning)
    }

    pub fn rotated(&self, rot: &nalgebra::Rotation3<f64>) -> Self {
        Self { r: rot * self.r }
    }
}

impl SphereDensity for DipoleDensity {
    fn density(&self, n: &UnitVector) -> f64 {
        (1.0 + self.r.dot(&n.to_vector())) / (4.0 * PI)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector {
        let a = self.r.norm();
        let u: f64 = rng.random();
        let phi: f64 = rng.random_range(0.0..TAU);
        // inverse CDF of c = n . r^, density (1 + a c)/2 on [-1, 1]
        let q = 4.0 * u + a - 2.0;
        let c = (q / (1.0 + (1.0 - a * (2.0 - a - 4.0 * u)).max(0.0).sqrt())).clamp(-1.0, 1.0);
        if a == 0.0 {
            return UnitVector::from_z_phi(c, phi);
        }
        let axis = self.r / a;
        let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = axis.cross(&helper).normalize();
        let e2 = axis.cross(&e1);
        let s = ((1.0 - c) * (1.0 + c)).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        UnitVector::from_vector(&(c * axis + s * (cp * e1 + sp * e2))).expect("unit")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalExperimentConfig {
    pub m: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub keep_rejected: bool,
}

impl ClassicalExperimentConfig {
    pub fn new(m: u64, epsilon: f64, seed: u64) -> Self {
        Self { m, epsilon, seed, keep_rejected: false }
    }
}

/// Draws the top axis `w ~ P_C` and a uniform proposal `u`; records `u` when
/// the angle between them is below `epsilon`, the cone version of "w = u".
pub fn classical_bayes_experiment<D: SphereDensity>(
    density: &D,
    cfg: &ClassicalExperimentConfig,
) -> Result<DirectionLog> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= PI / 4.0) {
        return Err(Error::InvalidParameter(format!("epsilon {} outside (0, pi/4]", cfg.epsilon)));
    }
    if cfg.m == 0 {
        return Err(Error::InvalidParameter("trial count m must be >= 1".into()));
    }
    let cos_eps = cfg.epsilon.cos();
    let chunks: Vec<_> = rng::chunks(cfg.m).collect();
    let parts: Vec<DirectionLog> = chunks
        .par_iter()
        .map(|&(c, start, len)| {
            let mut r = rng::stream(cfg.seed, "classitop/bayes", c);
            let mut log = DirectionLog::new(1, len);
            for t in start..start + len {
                let w = density.sample(&mut r);
                let u = rng::uniform_direction(&mut r);
                let accept = w.dot(&u) > cos_eps;
                if accept || cfg.keep_rejected {
                    log.push(t, accept, &[u]);
                }
            }
            log
        })
        .collect();
    let mut log = DirectionLog::new(1, cfg.m);
    for p in parts {
        for (i, e) in p.entries().iter().enumerate() {
            log.push(e.trial, e.accepted, p.dirs_of(i));
        }
    }
    Ok(log)
}

/// Recorded density of the cone experiment for a dipole `P_C`: the cone
/// average shrinks the dipole by `(1 + cos(eps)) / 2`.
pub fn cone_smoothed(density: &DipoleDensity, epsilon: f64) -> DipoleDensity {
    DipoleDensity { r: density.r * (0.5 * (1.0 + epsilon.cos())) }
}

/// Chi-square against a dipole density. Sparse bins are pooled: the
/// cone-smoothed density of a near-coherent `P_C` almost vanishes at the antipode.
pub fn classical_gof(hist: &SphericalHistogram, density: &DipoleDensity) -> Result<ChiSquareResult> {
    if hist.n_particles != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: hist.n_particles });
    }
    let d = hist.total as f64;
    let expected: Vec<f64> = density.bin_probabilities(hist.binning).iter().map(|p| d * p).collect();
    stats::chi_square_gof(&hist.counts, &expected, SparseBins::Pool)
}

/// Largest `|counts/D - int_bin P_C|` over bins.
pub fn bin_max_deviation(hist: &SphericalHistogram, density: &DipoleDensity) -> f64 {
    let d = hist.total as f64;
    density
        .bin_probabilities(hist.binning)
        .iter()
        .zip(&hist.counts)
        .map(|(p, &c)| (c as f64 / d - p).abs())
        .fold(0.0, f64::max)
}

/// `-sum_k w_k P_C ln P_C`, in nats.
pub fn gibbs_entropy<D: SphereDensity>(density: &D, grid: &SphereGrid) -> f64 {
    -grid.integrate(|n| {
        let p = density.density(n);
        if p > 0.0 {
            p * p.ln()
        } else {
            0.0
        }
    })
}

/// CSV: `t,w_x,w_y,w_z`.
pub fn write_axis_csv<W: Write>(rows: impl Iterator<Item = (f64, UnitVector)>, mut out: W) -> Result<()> {
    writeln!(out, "t,w_x,w_y,w_z")?;
    for (t, w) in rows {
        writeln!(out, "{t},{},{},{}", w.x, w.y, w.z)?;
    }
    Ok(())
}

/// CSV: `t,w_x,w_y,w_z,phi,p_phi,H`.
pub fn write_canonical_csv<W: Write>(traj: &CanonicalTrajectory, stride: usize, mut out: W) -> Result<()> {
    writeln!(out, "t,w_x,w_y,w_z,phi,p_phi,H")?;
    for i in (0..traj.times.len()).step_by(stride.max(1)) {
        let s = traj.states[i];
        let w = s.axis();
        writeln!(out, "{},{},{},{},{},{},{}", traj.times[i], w.x, w.y, w.z, s.varphi, s.p_varphi, traj.energies[i])?;
    }
    Ok(())
}
