//! One-dimensional continuous-variable analogue: Gaussian coherent states,
//! phase-space Husimi function, Wehrl entropy and the box-truncated sampling
//! experiment.
//!
//! States live in a truncated Fock basis of the oscillator with annihilation
//! operator `a = x/sigma + i sigma p / (2 hbar)`, so the vacuum has
//! `dx = sigma/2`, `dp = hbar/sigma` and `|x*, p*>` is the coherent state
//! `|alpha>` with `alpha = x*/sigma + i sigma p*/(2 hbar)`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspin::density_report;
use crate::quadrature::GaussLegendre;
use crate::rng;
use crate::stats::{self, ChiSquareResult, SparseBins};

pub const TAIL_LIMIT: f64 = 1e-6;
pub const TRACE_FLOOR: f64 = 1e-8;
pub const WEHRL_BOX_MASS: f64 = 1.0 - 1e-8;
pub const EXPERIMENT_BOX_MASS: f64 = 1.0 - 1e-6;
pub const DEFAULT_GRID: usize = 192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub sigma: f64,
    pub hbar: f64,
    pub fock_dim: usize,
    /// Box half-widths: `x in [-x_max, x_max]`, `p in [-p_max, p_max]`.
    pub x_max: f64,
    pub p_max: f64,
}

impl Default for CvConfig {
    /// `sigma = hbar = 1`, `D = 32`, box `|x| <= 6 sigma`, `|p| <= 12 hbar / sigma`.
    fn default() -> Self {
        Self::with_scales(1.0, 1.0).expect("defaults are valid")
    }
}

impl CvConfig {
    pub fn new(sigma: f64, hbar: f64, fock_dim: usize, x_max: f64, p_max: f64) -> Result<Self> {
        let cfg = Self { sigma, hbar, fock_dim, x_max, p_max };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default box and truncation for the given scales.
    pub fn with_scales(sigma: f64, hbar: f64) -> Result<Self> {
        Self::new(sigma, hbar, 32, 6.0 * sigma, 12.0 * hbar / sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.sigma) || !pos(self.hbar) {
            return Err(Error::InvalidParameter("sigma and hbar must be positive".into()));
        }
        if self.fock_dim == 0 {
            return Err(Error::InvalidParameter("Fock dimension must be >= 1".into()));
        }
        if !pos(self.x_max) || !pos(self.p_max) {
            return Err(Error::InvalidParameter("phase-space box must be nonempty".into()));
        }
        Ok(())
    }

    pub fn box_area(&self) -> f64 {
        4.0 * self.x_max * self.p_max
    }

    pub fn alpha_of(&self, pt: &PhasePoint) -> Complex64 {
        Complex64::new(pt.x_star / self.sigma, self.sigma * pt.p_star / (2.0 * self.hbar))
    }

    pub fn point_of(&self, alpha: Complex64) -> PhasePoint {
        PhasePoint { x_star: alpha.re * self.sigma, p_star: 2.0 * self.hbar * alpha.im / self.sigma }
    }

    pub fn contains(&self, pt: &PhasePoint) -> bool {
        pt.x_star.abs() <= self.x_max && pt.p_star.abs() <= self.p_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x_star: f64,
    pub p_star: f64,
}

impl PhasePoint {
    pub fn new(x_star: f64, p_star: f64) -> Self {
        Self { x_star, p_star }
    }
}

/// `(2/(pi sigma^2))^{1/4} exp[-(x - x*)^2/sigma^2 + i p* x / hbar]`.
pub fn coherent_wavefunction(x: f64, pt: &PhasePoint, cfg: &CvConfig) -> Complex64 {
    let norm = (2.0 / (PI * cfg.sigma * cfg.sigma)).powf(0.25);
    let d = x - pt.x_star;
    Complex64::from_polar(norm * (-d * d / (cfg.sigma * cfg.sigma)).exp(), pt.p_star * x / cfg.hbar)
}

/// `|<a|b>|^2 = exp[-dx^2/sigma^2 - sigma^2 dp^2 / (4 hbar^2)]`.
pub fn coherent_overlap_sq(a: &PhasePoint, b: &PhasePoint, cfg: &CvConfig) -> f64 {
    let dx = a.x_star - b.x_star;
    let dp = a.p_star - b.p_star;
    (-dx * dx / (cfg.sigma * cfg.sigma) - cfg.sigma * cfg.sigma * dp * dp / (4.0 * cfg.hbar * cfg.hbar)).exp()
}

/// First `d` Fock amplitudes `e^{-|alpha|^2/2} alpha^k / sqrt(k!)` (exact, no tail check).
pub fn coherent_amplitudes(alpha: Complex64, d: usize) -> DVector<Complex64> {
    let mut c = DVector::zeros(d);
    if d == 0 {
        return c;
    }
    c[0] = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 1..d {
        c[k] = c[k - 1] * alpha / (k as f64).sqrt();
    }
    c
}

/// Truncated coherent state with the lost tail `1 - sum |c_k|^2`.
pub fn coherent_in_fock(alpha: Complex64, d: usize) -> Result<(DVector<Complex64>, f64)> {
    if d == 0 {
        return Err(Error::InvalidParameter("Fock dimension must be >= 1".into()));
    }
    let c = coherent_amplitudes(alpha, d);
    let tail = (1.0 - c.norm_squared()).abs();
    if tail > TAIL_LIMIT {
        return Err(Error::TruncationTail { tail, limit: TAIL_LIMIT });
    }
    Ok((c, tail))
}

/// A density matrix on the truncated Fock space `{|0>, ..., |D-1>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvState {
    rho: DMatrix<Complex64>,
}

impl CvState {
    /// Checks Hermiticity, positivity, `tr in [1 - 1e-8, 1]` and `<D-1|rho|D-1> < 1e-6`.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        let (r, c) = rho.shape();
        if r != c || r == 0 {
            return Err(Error::InvalidState(format!("matrix is {r}x{c}, not a nonempty square")));
        }
        let rep = density_report(&rho);
        if !(rep.hermiticity_residual <= 1e-10) {
            return Err(Error::InvalidState(format!("not Hermitian (residual {:e})", rep.hermiticity_residual)));
        }
        if !(rep.min_eigenvalue >= -1e-10) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {:e})",
                rep.min_eigenvalue
            )));
        }
        let tr = rho.trace().re;
        if !(1.0 - TRACE_FLOOR..=1.0 + 1e-10).contains(&tr) {
            return Err(Error::InvalidState(format!("trace {tr} outside [1 - 1e-8, 1]")));
        }
        let tail = rho[(r - 1, r - 1)].re;
        if tail >= TAIL_LIMIT {
            return Err(Error::TruncationTail { tail, limit: TAIL_LIMIT });
        }
        Ok(Self { rho })
    }

    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi / Complex64::new(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn fock(n: usize, d: usize) -> Result<Self> {
        if n >= d {
            return Err(Error::InvalidParameter(format!("Fock level {n} outside dimension {d}")));
        }
        let mut v = DVector::zeros(d);
        v[n] = Complex64::new(1.0, 0.0);
        Self::pure(&v)
    }

    pub fn vacuum(d: usize) -> Result<Self> {
        Self::fock(0, d)
    }

    /// `|x*, p*>` truncated to the configured dimension and renormalized; the
    /// relative error this introduces is at most the reported tail.
    pub fn coherent(pt: &PhasePoint, cfg: &CvConfig) -> Result<Self> {
        let (c, _) = coherent_in_fock(cfg.alpha_of(pt), cfg.fock_dim)?;
        Self::pure(&c)
    }

    /// `rho ∝ diag(1, r, r^2, ...)`.
    pub fn thermal(r: f64, d: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("thermal ratio {r} outside [0, 1)")));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("Fock dimension must be >= 1".into()));
        }
        let w: Vec<f64> = (0..d).map(|k| r.powi(k as i32)).collect();
        let z: f64 = w.iter().sum();
        Self::new(DMatrix::from_fn(
            d,
            d,
            |i, j| {
                if i == j {
                    Complex64::new(w[i] / z, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// `D(alpha) rho D(alpha)^dagger`, with `D(alpha)` exponentiated in a padded space.
    pub fn displaced(&self, shift: &PhasePoint, cfg: &CvConfig) -> Result<Self> {
        let d = self.dim();
        let alpha = cfg.alpha_of(shift);
        let big = d + 40 + (4.0 * alpha.norm_sqr()).ceil() as usize;
        let mut gen = DMatrix::zeros(big, big);
        for k in 1..big {
            let s = (k as f64).sqrt();
            gen[(k, k - 1)] = alpha * s;
            gen[(k - 1, k)] = -alpha.conj() * s;
        }
        let u = gen.exp();
        let mut padded = DMatrix::zeros(big, big);
        padded.view_mut((0, 0), (d, d)).copy_from(&self.rho);
        let moved = &u * padded * u.adjoint();
        let kept = moved.view((0, 0), (d, d)).into_owned();
        let adj = kept.adjoint();
        Self::new((kept + adj).map(|z| z * 0.5))
    }

    pub fn to_json(&self, cfg: &CvConfig) -> String {
        let d = self.dim();
        let v = CvStateJson {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| self.rho[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.rho[(i, j)].im).collect()).collect(),
            sigma: cfg.sigma,
            hbar: cfg.hbar,
        };
        serde_json::to_string(&v).expect("finite matrix serializes")
    }

    /// Parses `{dim, re, im, sigma, hbar}`; returns the state and its `(sigma, hbar)`.
    pub fn from_json(s: &str) -> Result<(Self, f64, f64)> {
        let v: CvStateJson = serde_json::from_str(s)?;
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == v.dim && m.iter().all(|r| r.len() == v.dim);
        if v.dim == 0 || !rows_ok(&v.re) || !rows_ok(&v.im) {
            return Err(Error::DimensionMismatch { expected: v.dim, actual: v.re.len().max(v.im.len()) });
        }
        if !(v.sigma > 0.0 && v.sigma.is_finite() && v.hbar > 0.0 && v.hbar.is_finite()) {
            return Err(Error::InvalidParameter("sigma and hbar must be positive".into()));
        }
        let rho = DMatrix::from_fn(v.dim, v.dim, |i, j| Complex64::new(v.re[i][j], v.im[i][j]));
        Ok((Self::new(rho)?, v.sigma, v.hbar))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CvStateJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    sigma: f64,
    hbar: f64,
}

/// Random pure state on Fock levels `0..=max_level`, padded to `d`.
pub fn random_cv_pure(max_level: usize, d: usize, seed: u64) -> Result<CvState> {
    if max_level >= d {
        return Err(Error::InvalidParameter(format!("level {max_level} outside dimension {d}")));
    }
    let mut r = ChaCha20Rng::from_seed(rng::child_key(seed, "cvmode/random_pure"));
    let mut v = DVector::zeros(d);
    for k in 0..=max_level {
        v[k] = Complex64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r));
    }
    CvState::pure(&v)
}

/// Random Wishart mixture on Fock levels `0..=max_level` with the given rank.
pub fn random_cv_mixed(max_level: usize, rank: usize, d: usize, seed: u64) -> Result<CvState> {
    if max_level >= d || rank == 0 {
        return Err(Error::InvalidParameter("need max_level < d and rank >= 1".into()));
    }
    let mut r = ChaCha20Rng::from_seed(rng::child_key(seed, "cvmode/random_mixed"));
    let g = DMatrix::from_fn(d, rank, |i, _| {
        if i <= max_level {
            Complex64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let w = &g * g.adjoint();
    let tr = w.trace();
    CvState::new(w / tr)
}

/// `<psi|rho|psi>` for the coherent state at `pt`, using the amplitudes inside the truncation.
pub fn coherent_expectation(rho: &CvState, pt: &PhasePoint, cfg: &CvConfig) -> f64 {
    let c = coherent_amplitudes(cfg.alpha_of(pt), rho.dim());
    (c.adjoint() * &rho.rho * &c)[(0, 0)].re.max(0.0)
}

/// `P_H = <psi|rho|psi> / (2 pi hbar)`.
///
/// Because `rho` is supported on the truncated space, only the kept coherent
/// amplitudes enter and the value carries no truncation error.
pub fn husimi_cv(rho: &CvState, pt: &PhasePoint, cfg: &CvConfig) -> f64 {
    coherent_expectation(rho, pt, cfg) / (2.0 * PI * cfg.hbar)
}

/// Tensor Gauss–Legendre rule over the box in `(x, p)`, weights include `dx dp`.
pub fn box_grid(cfg: &CvConfig, n: usize) -> Vec<(PhasePoint, f64)> {
    let gl = GaussLegendre::new(n);
    let xs: Vec<_> = gl.mapped(-cfg.x_max, cfg.x_max).collect();
    let ps: Vec<_> = gl.mapped(-cfg.p_max, cfg.p_max).collect();
    xs.iter().flat_map(|&(x, wx)| ps.iter().map(move |&(p, wp)| (PhasePoint::new(x, p), wx * wp))).collect()
}

fn box_integral<F: Fn(&PhasePoint) -> f64 + Sync>(cfg: &CvConfig, n: usize, f: F) -> f64 {
    let gl = GaussLegendre::new(n);
    let xs: Vec<_> = gl.mapped(-cfg.x_max, cfg.x_max).collect();
    let ps: Vec<_> = gl.mapped(-cfg.p_max, cfg.p_max).collect();
    let rows: Vec<f64> = xs
        .par_iter()
        .map(|&(x, wx)| wx * ps.iter().map(|&(p, wp)| wp * f(&PhasePoint::new(x, p))).sum::<f64>())
        .collect();
    rows.iter().sum()
}

/// `int_box P_H dx dp`.
pub fn box_mass(rho: &CvState, cfg: &CvConfig, n: usize) -> f64 {
    box_integral(cfg, n, |pt| husimi_cv(rho, pt, cfg))
}

/// `-int P_H ln P_H dx dp` over the box; fails if the box misses more than `1e-8` of the mass.
pub fn wehrl_cv(rho: &CvState, cfg: &CvConfig, n: usize) -> Result<f64> {
    cfg.validate()?;
    let mass = box_mass(rho, cfg, n);
    if mass < WEHRL_BOX_MASS {
        return Err(Error::InsufficientBoxMass { mass, required: WEHRL_BOX_MASS });
    }
    Ok(-box_integral(cfg, n, |pt| {
        let q = husimi_cv(rho, pt, cfg);
        if q > 0.0 {
            q * q.ln()
        } else {
            0.0
        }
    }))
}

/// `1 + ln(2 pi hbar)`, the coherent-state value.
pub fn coherent_wehrl(cfg: &CvConfig) -> f64 {
    1.0 + (2.0 * PI * cfg.hbar).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvLogEntry {
    pub trial: u64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CvLog {
    pub trials: u64,
    pub accepted: u64,
    pub entries: Vec<CvLogEntry>,
    pub points: Vec<PhasePoint>,
}

impl CvLog {
    fn push(&mut self, trial: u64, accepted: bool, pt: PhasePoint) {
        self.entries.push(CvLogEntry { trial, accepted });
        self.points.push(pt);
    }

    fn merge(parts: Vec<CvLog>, trials: u64) -> Self {
        let mut out = CvLog { trials, ..Default::default() };
        for p in parts {
            out.accepted += p.accepted;
            out.entries.extend(p.entries);
            out.points.extend(p.points);
        }
        out
    }

    pub fn recorded(&self) -> impl Iterator<Item = &PhasePoint> {
        self.entries.iter().zip(&self.points).filter(|(e, _)| e.accepted).map(|(_, p)| p)
    }

    pub fn acceptance_rate(&self) -> Result<(f64, f64)> {
        if self.trials == 0 {
            return Err(Error::EmptyLog);
        }
        let m = self.trials as f64;
        let r = self.accepted as f64 / m;
        Ok((r, (r * (1.0 - r) / m).sqrt()))
    }

    /// CSV: `trial_index,accepted,x_star,p_star`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "trial_index,accepted,x_star,p_star")?;
        for (e, p) in self.entries.iter().zip(&self.points) {
            writeln!(out, "{},{},{},{}", e.trial, u8::from(e.accepted), p.x_star, p.p_star)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvExperimentConfig {
    pub m: u64,
    pub seed: u64,
    pub keep_rejected: bool,
}

impl CvExperimentConfig {
    pub fn new(m: u64, seed: u64) -> Self {
        Self { m, seed, keep_rejected: false }
    }
}

fn uniform_in_box<R: Rng + ?Sized>(r: &mut R, cfg: &CvConfig) -> PhasePoint {
    PhasePoint::new(r.random_range(-cfg.x_max..=cfg.x_max), r.random_range(-cfg.p_max..=cfg.p_max))
}

fn run_chunked<F>(m: u64, seed: u64, label: &str, keep: bool, trial: F) -> CvLog
where
    F: Fn(&mut ChaCha20Rng) -> (bool, PhasePoint) + Sync,
{
    let chunks: Vec<_> = rng::chunks(m).collect();
    let parts = chunks
        .par_iter()
        .map(|&(c, start, len)| {
            let mut r = rng::stream(seed, label, c);
            let mut log = CvLog::default();
            for t in start..start + len {
                let (acc, pt) = trial(&mut r);
                if acc {
                    log.accepted += 1;
                }
                if acc || keep {
                    log.push(t, acc, pt);
                }
            }
            log
        })
        .collect();
    CvLog::merge(parts, m)
}

/// Uniform proposals on the box, accepted with probability `<psi_{x*,p*}|rho|psi_{x*,p*}>`.
pub fn cv_experiment(rho: &CvState, cfg: &CvConfig, exp: &CvExperimentConfig) -> Result<CvLog> {
    cfg.validate()?;
    if exp.m == 0 {
        return Err(Error::InvalidParameter("trial count m must be >= 1".into()));
    }
    let mass = box_mass(rho, cfg, DEFAULT_GRID);
    if mass < EXPERIMENT_BOX_MASS {
        return Err(Error::InsufficientBoxMass { mass, required: EXPERIMENT_BOX_MASS });
    }
    Ok(run_chunked(exp.m, exp.seed, "cvmode/experiment", exp.keep_rejected, |r| {
        let pt = uniform_in_box(r, cfg);
        let u: f64 = r.random();
        (u < coherent_expectation(rho, &pt, cfg), pt)
    }))
}

/// Expected acceptance rate `2 pi hbar / Area * (box mass)`.
pub fn expected_cv_acceptance(rho: &CvState, cfg: &CvConfig) -> f64 {
    2.0 * PI * cfg.hbar / cfg.box_area() * box_mass(rho, cfg, DEFAULT_GRID)
}

/// Equal-area `nx x np` rectangular binning of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct CvHistogram {
    pub nx: usize,
    pub np: usize,
    pub x_max: f64,
    pub p_max: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl CvHistogram {
    pub fn index(&self, pt: &PhasePoint) -> Option<usize> {
        let fx = (pt.x_star + self.x_max) / (2.0 * self.x_max);
        let fp = (pt.p_star + self.p_max) / (2.0 * self.p_max);
        if !(0.0..=1.0).contains(&fx) || !(0.0..=1.0).contains(&fp) {
            return None;
        }
        let i = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let j = ((fp * self.np as f64) as usize).min(self.np - 1);
        Some(i * self.np + j)
    }

    /// `((x0, x1), (p0, p1))` for bin `b`.
    pub fn bounds(&self, b: usize) -> ((f64, f64), (f64, f64)) {
        let (i, j) = (b / self.np, b % self.np);
        let hx = 2.0 * self.x_max / self.nx as f64;
        let hp = 2.0 * self.p_max / self.np as f64;
        let x0 = -self.x_max + hx * i as f64;
        let p0 = -self.p_max + hp * j as f64;
        ((x0, x0 + hx), (p0, p0 + hp))
    }

    /// CSV: `bin,x_lo,x_hi,p_lo,p_hi,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin,x_lo,x_hi,p_lo,p_hi,count")?;
        for (b, c) in self.counts.iter().enumerate() {
            let ((x0, x1), (p0, p1)) = self.bounds(b);
            writeln!(out, "{b},{x0},{x1},{p0},{p1},{c}")?;
        }
        Ok(())
    }
}

pub fn cv_histogram(log: &CvLog, cfg: &CvConfig, nx: usize, np: usize) -> Result<CvHistogram> {
    if nx == 0 || np == 0 {
        return Err(Error::InvalidParameter("bin counts must be >= 1".into()));
    }
    let mut h = CvHistogram { nx, np, x_max: cfg.x_max, p_max: cfg.p_max, counts: vec![0; nx * np], total: 0 };
    for pt in log.recorded() {
        if let Some(b) = h.index(pt) {
            h.counts[b] += 1;
            h.total += 1;
        }
    }
    if h.total == 0 {
        return Err(Error::EmptyLog);
    }
    Ok(h)
}

/// Per-bin integrals of a phase-space density, by Gauss–Legendre on each bin.
pub fn bin_integrals<F: Fn(&PhasePoint) -> f64 + Sync>(hist: &CvHistogram, order: usize, f: F) -> Vec<f64> {
    let gl = GaussLegendre::new(order);
    (0..hist.counts.len())
        .into_par_iter()
        .map(|b| {
            let ((x0, x1), (p0, p1)) = hist.bounds(b);
            gl.mapped(x0, x1)
                .map(|(x, wx)| wx * gl.mapped(p0, p1).map(|(p, wp)| wp * f(&PhasePoint::new(x, p))).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Chi-square of recorded points against `P_H` renormalized to the box; sparse bins pooled.
pub fn cv_gof(hist: &CvHistogram, rho: &CvState, cfg: &CvConfig) -> Result<ChiSquareResult> {
    let probs = bin_integrals(hist, 16, |pt| husimi_cv(rho, pt, cfg));
    let mass: f64 = probs.iter().sum();
    let d = hist.total as f64;
    let expected: Vec<f64> = probs.iter().map(|p| d * p / mass).collect();
    stats::chi_square_gof(&hist.counts, &expected, SparseBins::Pool)
}

fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// CDF of the vacuum Husimi x-marginal restricted to `[-X, X]`.
pub fn vacuum_x_marginal_cdf(x: f64, cfg: &CvConfig) -> f64 {
    let e = erf(cfg.x_max / cfg.sigma);
    ((erf(x / cfg.sigma) + e) / (2.0 * e)).clamp(0.0, 1.0)
}

/// A normalized classical phase-space density with a sampler.
pub trait PhaseDensity: Sync {
    fn density(&self, pt: &PhasePoint) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint;
}

/// Liouville density equal to the Husimi function of the coherent state at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLiouville {
    pub center: PhasePoint,
    pub cfg: CvConfig,
}

impl GaussianLiouville {
    pub fn new(center: PhasePoint, cfg: CvConfig) -> Self {
        Self { center, cfg }
    }
}

impl PhaseDensity for GaussianLiouville {
    fn density(&self, pt: &PhasePoint) -> f64 {
        coherent_overlap_sq(pt, &self.center, &self.cfg) / (2.0 * PI * self.cfg.hbar)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let sx = self.cfg.sigma / 2f64.sqrt();
        let sp = 2f64.sqrt() * self.cfg.hbar / self.cfg.sigma;
        let nx = Normal::new(self.center.x_star, sx).expect("positive width");
        let np = Normal::new(self.center.p_star, sp).expect("positive width");
        PhasePoint::new(nx.sample(rng), np.sample(rng))
    }
}

/// Uniform density on the configured box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBox {
    pub cfg: CvConfig,
}

impl PhaseDensity for UniformBox {
    fn density(&self, pt: &PhasePoint) -> f64 {
        if self.cfg.contains(pt) {
            1.0 / self.cfg.box_area()
        } else {
            0.0
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        uniform_in_box(rng, &self.cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalCvConfig {
    pub m: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub keep_rejected: bool,
}

impl ClassicalCvConfig {
    pub fn new(m: u64, epsilon: f64, seed: u64) -> Self {
        Self { m, epsilon, seed, keep_rejected: false }
    }
}

/// Draws the particle state from `rho_L` and a uniform proposal on the box;
/// records the proposal when the two lie within `epsilon` in the
/// dimensionless `(x/sigma, sigma p / (2 hbar))` plane.
pub fn classical_cv_experiment<D: PhaseDensity>(rho_l: &D, cfg: &CvConfig, exp: &ClassicalCvConfig) -> Result<CvLog> {
    cfg.validate()?;
    if !(exp.epsilon > 0.0 && exp.epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon {} must be positive", exp.epsilon)));
    }
    if exp.m == 0 {
        return Err(Error::InvalidParameter("trial count m must be >= 1".into()));
    }
    let eps2 = exp.epsilon * exp.epsilon;
    Ok(run_chunked(exp.m, exp.seed, "cvmode/classical", exp.keep_rejected, |r| {
        let state = rho_l.sample(r);
        let pt = uniform_in_box(r, cfg);
        let d = cfg.alpha_of(&state) - cfg.alpha_of(&pt);
        (d.norm_sqr() < eps2, pt)
    }))
}

/// Largest `|counts/total - int_bin rho|` with `rho` renormalized to the box.
pub fn cv_bin_max_deviation<D: PhaseDensity>(hist: &CvHistogram, rho_l: &D) -> f64 {
    let probs = bin_integrals(hist, 16, |pt| rho_l.density(pt));
    let mass: f64 = probs.iter().sum();
    let d = hist.total as f64;
    probs.iter().zip(&hist.counts).map(|(p, &c)| (c as f64 / d - p / mass).abs()).fold(0.0, f64::max)
}

/// `-int rho_L ln rho_L dx dp` over the box.
pub fn gibbs_entropy_cv<D: PhaseDensity>(rho_l: &D, cfg: &CvConfig, n: usize) -> f64 {
    -box_integral(cfg, n, |pt| {
        let v = rho_l.density(pt);
        if v > 0.0 {
            v * v.ln()
        } else {
            0.0
        }
    })
}

/// CSV of `P_H` on an `n x n` uniform grid: `x,p,value`.
pub fn write_husimi_cv_csv<W: Write>(rho: &CvState, cfg: &CvConfig, n: usize, mut out: W) -> Result<()> {
    writeln!(out, "x,p,value")?;
    let n = n.max(2);
    for i in 0..n {
        let x = -cfg.x_max + 2.0 * cfg.x_max * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let p = -cfg.p_max + 2.0 * cfg.p_max * j as f64 / (n - 1) as f64;
            writeln!(out, "{x},{p},{}", husimi_cv(rho, &PhasePoint::new(x, p), cfg))?;
        }
    }
    Ok(())
}
