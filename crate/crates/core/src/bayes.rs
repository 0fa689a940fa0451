//! Rejection-sampling thought experiments whose recorded directions follow the
//! Husimi function.
//!
//! Variant A draws a uniform direction tuple `u`, accepts it with probability
//! `<u|rho|u>` (all N outcomes +1) and records `u`. Variant B samples the joint
//! outcome signs `s` with probability `<s.u|rho|s.u>` and always records the
//! sign-adjusted tuple `(s_1 u_1, ..., s_N u_N)`. For N = 1 this is the
//! "record -u on a -1 outcome" protocol; for N > 1 it is an extension of it
//! that yields the same recorded density.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspin::{pauli, product_ket_into, quad_form, DensityMatrix, DirectionTuple, UnitVector};
use crate::rng;
use crate::stats::{self, ChiSquareResult, KsResult, SparseBins};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Record `u` only when every outcome is +1.
    A,
    /// Record the sign-adjusted tuple on every trial.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub m: u64,
    pub seed: u64,
    pub n_particles: usize,
    /// Keep rejected proposals in the log (needed for the full CSV trace).
    pub keep_rejected: bool,
}

impl ExperimentConfig {
    pub fn new(variant: Variant, n_particles: usize, m: u64, seed: u64) -> Self {
        Self { variant, m, seed, n_particles, keep_rejected: false }
    }

    pub fn keep_rejected(mut self, keep: bool) -> Self {
        self.keep_rejected = keep;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("trial count m must be >= 1".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub trial: u64,
    pub accepted: bool,
}

/// The notebook: trial metadata plus one direction tuple per kept entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionLog {
    n_particles: usize,
    trials: u64,
    accepted: u64,
    entries: Vec<LogEntry>,
    dirs: Vec<UnitVector>,
}

impl DirectionLog {
    pub fn new(n_particles: usize, trials: u64) -> Self {
        Self { n_particles, trials, accepted: 0, entries: Vec::new(), dirs: Vec::new() }
    }

    pub fn push(&mut self, trial: u64, accepted: bool, dirs: &[UnitVector]) {
        debug_assert_eq!(dirs.len(), self.n_particles);
        if accepted {
            self.accepted += 1;
        }
        self.entries.push(LogEntry { trial, accepted });
        self.dirs.extend_from_slice(dirs);
    }

    fn append(&mut self, other: DirectionLog) {
        self.accepted += other.accepted;
        self.entries.extend(other.entries);
        self.dirs.extend(other.dirs);
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// D, the number of recorded (accepted) tuples.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    /// Directions of entry `i`.
    pub fn dirs_of(&self, i: usize) -> &[UnitVector] {
        &self.dirs[i * self.n_particles..(i + 1) * self.n_particles]
    }

    /// Accepted direction tuples in trial order.
    pub fn recorded(&self) -> impl Iterator<Item = &[UnitVector]> + '_ {
        self.entries.iter().enumerate().filter(|(_, e)| e.accepted).map(move |(i, _)| self.dirs_of(i))
    }

    pub fn recorded_tuples(&self) -> Vec<DirectionTuple> {
        self.recorded().map(|d| DirectionTuple(d.to_vec())).collect()
    }

    /// `cos(theta_j)` of every recorded tuple.
    pub fn polar_cosines(&self, j: usize) -> Vec<f64> {
        self.recorded().map(|d| d[j].z).collect()
    }

    /// CSV: `trial_index,accepted,theta_1,phi_1,...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("trial_index,accepted");
        for j in 1..=self.n_particles {
            header.push_str(&format!(",theta_{j},phi_{j}"));
        }
        writeln!(out, "{header}")?;
        for (i, e) in self.entries.iter().enumerate() {
            let mut line = format!("{},{}", e.trial, u8::from(e.accepted));
            for d in self.dirs_of(i) {
                line.push_str(&format!(",{},{}", d.theta(), d.phi()));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the CSV written by [`DirectionLog::write_csv`].
    ///
    /// `trials` is the trial count m; when absent it is inferred as the last
    /// trial index plus one.
    pub fn read_csv<R: BufRead>(input: R, trials: Option<u64>) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 4 || !cols.len().is_multiple_of(2) || cols[0] != "trial_index" || cols[1] != "accepted" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let n = (cols.len() - 2) / 2;
        for j in 0..n {
            if cols[2 + 2 * j] != format!("theta_{}", j + 1) || cols[3 + 2 * j] != format!("phi_{}", j + 1) {
                return Err(Error::Parse(format!("unexpected header {header:?}")));
            }
        }
        let mut log = DirectionLog::new(n, 0);
        let mut last: Option<u64> = None;
        let mut buf = Vec::with_capacity(n);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!("line {}: expected {} fields", lineno + 2, cols.len())));
            }
            let trial: u64 =
                fields[0].parse().map_err(|_| Error::Parse(format!("line {}: bad trial index", lineno + 2)))?;
            if last.is_some_and(|l| trial <= l) {
                return Err(Error::Parse(format!("line {}: trial indices must increase", lineno + 2)));
            }
            last = Some(trial);
            let accepted = match fields[1] {
                "0" => false,
                "1" => true,
                _ => return Err(Error::Parse(format!("line {}: accepted must be 0 or 1", lineno + 2))),
            };
            buf.clear();
            for j in 0..n {
                let theta: f64 = parse_angle(fields[2 + 2 * j], lineno + 2)?;
                let phi: f64 = parse_angle(fields[3 + 2 * j], lineno + 2)?;
                if !(0.0..=PI).contains(&theta) || !(0.0..TAU).contains(&phi) {
                    return Err(Error::Parse(format!("line {}: angle out of range", lineno + 2)));
                }
                buf.push(UnitVector::from_angles(theta, phi));
            }
            log.push(trial, accepted, &buf);
        }
        let inferred = match last {
            Some(l) => l.checked_add(1).ok_or_else(|| Error::Parse("trial index overflow".into()))?,
            None => 0,
        };
        log.trials = match trials {
            Some(t) if t < inferred => {
                return Err(Error::Parse(format!("trial index {} exceeds m = {t}", inferred - 1)))
            }
            Some(t) => t,
            None => inferred,
        };
        Ok(log)
    }
}

fn parse_angle(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite angle")));
    }
    Ok(v)
}

/// Runs the seeded experiment. Chunks of [`rng::CHUNK_TRIALS`] trials are
/// independent streams merged in trial order, so the log does not depend on
/// the thread count.
pub fn run_experiment(rho: &DensityMatrix, cfg: &ExperimentConfig) -> Result<DirectionLog> {
    cfg.validate()?;
    if rho.n_particles() != cfg.n_particles {
        return Err(Error::DimensionMismatch { expected: cfg.n_particles, actual: rho.n_particles() });
    }
    let label = match cfg.variant {
        Variant::A => "bayes/variant_a",
        Variant::B => "bayes/variant_b",
    };
    let chunks: Vec<_> = rng::chunks(cfg.m).collect();
    let parts: Vec<DirectionLog> = chunks
        .par_iter()
        .map(|&(c, start, len)| {
            let mut r = rng::stream(cfg.seed, label, c);
            run_chunk(rho, cfg, &mut r, start, len)
        })
        .collect();
    let mut log = DirectionLog::new(cfg.n_particles, cfg.m);
    for p in parts {
        log.append(p);
    }
    Ok(log)
}

fn run_chunk<R: Rng>(rho: &DensityMatrix, cfg: &ExperimentConfig, r: &mut R, start: u64, len: u64) -> DirectionLog {
    let n = cfg.n_particles;
    let n_outcomes = 1usize << n;
    let mat = rho.matrix();
    let mut log = DirectionLog::new(n, len);
    let mut u = vec![UnitVector::PLUS_Z; n];
    let mut su = vec![UnitVector::PLUS_Z; n];
    let mut ket = Vec::with_capacity(n_outcomes);
    for t in start..start + len {
        for d in u.iter_mut() {
            *d = rng::uniform_direction(r);
        }
        let draw: f64 = r.random();
        match cfg.variant {
            Variant::A => {
                product_ket_into(&u, &mut ket);
                let accept = draw < quad_form(mat, &ket);
                if accept || cfg.keep_rejected {
                    log.push(t, accept, &u);
                }
            }
            Variant::B => {
                // outcome index bit (N-1-j) set means particle j read -1
                let mut cum = 0.0;
                let mut chosen = n_outcomes - 1;
                for s in 0..n_outcomes {
                    for j in 0..n {
                        let minus = (s >> (n - 1 - j)) & 1 == 1;
                        su[j] = if minus { u[j].neg() } else { u[j] };
                    }
                    product_ket_into(&su, &mut ket);
                    cum += quad_form(mat, &ket);
                    if draw < cum {
                        chosen = s;
                        break;
                    }
                }
                for j in 0..n {
                    let minus = (chosen >> (n - 1 - j)) & 1 == 1;
                    su[j] = if minus { u[j].neg() } else { u[j] };
                }
                log.push(t, true, &su);
            }
        }
    }
    log
}

/// `(D/m, sqrt(p(1-p)/m))`.
pub fn acceptance_rate(log: &DirectionLog) -> Result<(f64, f64)> {
    if log.trials == 0 {
        return Err(Error::InvalidParameter("log has no trials".into()));
    }
    let m = log.trials as f64;
    let p = log.accepted as f64 / m;
    Ok((p, (p * (1.0 - p) / m).sqrt()))
}

/// Equal-area bins on each sphere: `h_z` bands in z times `h_phi` sectors in phi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereBinning {
    pub h_z: usize,
    pub h_phi: usize,
}

impl SphereBinning {
    pub fn new(h_z: usize, h_phi: usize) -> Result<Self> {
        if h_z == 0 || h_phi == 0 {
            return Err(Error::InvalidParameter("bin counts must be positive".into()));
        }
        Ok(Self { h_z, h_phi })
    }

    pub fn bins(&self) -> usize {
        self.h_z * self.h_phi
    }

    pub fn solid_angle(&self) -> f64 {
        4.0 * PI / self.bins() as f64
    }

    pub fn index(&self, d: &UnitVector) -> usize {
        let iz = (((d.z + 1.0) / 2.0 * self.h_z as f64) as usize).min(self.h_z - 1);
        let ip = ((d.phi() / TAU * self.h_phi as f64) as usize).min(self.h_phi - 1);
        iz * self.h_phi + ip
    }

    /// `(z_lo, z_hi, phi_lo, phi_hi)` of bin `b`.
    pub fn bounds(&self, b: usize) -> (f64, f64, f64, f64) {
        let (iz, ip) = (b / self.h_phi, b % self.h_phi);
        let dz = 2.0 / self.h_z as f64;
        let dp = TAU / self.h_phi as f64;
        (-1.0 + iz as f64 * dz, -1.0 + (iz + 1) as f64 * dz, ip as f64 * dp, (ip + 1) as f64 * dp)
    }

    /// `int_bin n dn` in closed form.
    pub fn first_moment(&self, b: usize) -> [f64; 3] {
        let (z0, z1, p0, p1) = self.bounds(b);
        let g = |z: f64| 0.5 * (z * (1.0 - z * z).max(0.0).sqrt() + z.clamp(-1.0, 1.0).asin());
        let s = g(z1) - g(z0);
        [s * (p1.sin() - p0.sin()), s * (p0.cos() - p1.cos()), 0.5 * (z1 * z1 - z0 * z0) * (p1 - p0)]
    }

    /// `int_bin |n><n| dn / (2pi) = (Omega I + m . sigma) / (4pi)`.
    fn bin_operator(&self, b: usize) -> DMatrix<Complex64> {
        let m = self.first_moment(b);
        let omega = self.solid_angle();
        let mut op = DMatrix::from_diagonal_element(2, 2, Complex64::new(omega / (4.0 * PI), 0.0));
        for (axis, &ma) in m.iter().enumerate() {
            let p = pauli(axis);
            for i in 0..2 {
                for j in 0..2 {
                    op[(i, j)] += p[(i, j)] * (ma / (4.0 * PI));
                }
            }
        }
        op
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalHistogram {
    pub n_particles: usize,
    pub binning: SphereBinning,
    /// Product-bin counts, particle 1 most significant.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl SphericalHistogram {
    pub fn product_index(&self, dirs: &[UnitVector]) -> usize {
        dirs.iter().fold(0, |acc, d| acc * self.binning.bins() + self.binning.index(d))
    }

    /// Per-particle bin indices of product bin `b`.
    pub fn split_index(&self, mut b: usize) -> Vec<usize> {
        let k = self.binning.bins();
        let mut out = vec![0; self.n_particles];
        for j in (0..self.n_particles).rev() {
            out[j] = b % k;
            b /= k;
        }
        out
    }

    pub fn bin_solid_angle(&self) -> f64 {
        self.binning.solid_angle().powi(self.n_particles as i32)
    }

    /// CSV: `bin,count,expected` then per-particle bin bounds.
    pub fn write_csv<W: Write>(&self, expected: &[f64], mut out: W) -> Result<()> {
        let mut header = String::from("bin,count,expected");
        for j in 1..=self.n_particles {
            header.push_str(&format!(",z_lo_{j},z_hi_{j},phi_lo_{j},phi_hi_{j}"));
        }
        writeln!(out, "{header}")?;
        for (b, &c) in self.counts.iter().enumerate() {
            let mut line = format!("{b},{c},{}", expected[b]);
            for pb in self.split_index(b) {
                let (z0, z1, p0, p1) = self.binning.bounds(pb);
                line.push_str(&format!(",{z0},{z1},{p0},{p1}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

pub fn histogram(log: &DirectionLog, h_z: usize, h_phi: usize) -> Result<SphericalHistogram> {
    if log.accepted == 0 {
        return Err(Error::EmptyLog);
    }
    let binning = SphereBinning::new(h_z, h_phi)?;
    let n_bins = binning
        .bins()
        .checked_pow(log.n_particles as u32)
        .filter(|&b| b <= 1 << 24)
        .ok_or_else(|| Error::InvalidParameter("too many product bins".into()))?;
    let mut hist = SphericalHistogram { n_particles: log.n_particles, binning, counts: vec![0; n_bins], total: 0 };
    for dirs in log.recorded() {
        let b = hist.product_index(dirs);
        hist.counts[b] += 1;
        hist.total += 1;
    }
    Ok(hist)
}

/// `int_bin P_H dn` for every product bin, from the per-sphere bin operators:
/// the bin integral is `tr(rho (A_{b_1} (x) ... (x) A_{b_N}))`.
pub fn bin_probabilities(rho: &DensityMatrix, binning: SphereBinning) -> Vec<f64> {
    let ops: Vec<DMatrix<Complex64>> = (0..binning.bins()).map(|b| binning.bin_operator(b)).collect();
    let mut out = Vec::with_capacity(binning.bins().pow(rho.n_particles() as u32));
    trace_level(rho.matrix(), &ops, rho.n_particles(), &mut out);
    out
}

/// Partial trace of the leading qubit against each bin operator, recursively.
fn trace_level(m: &DMatrix<Complex64>, ops: &[DMatrix<Complex64>], remaining: usize, out: &mut Vec<f64>) {
    let h = m.nrows() / 2;
    for op in ops {
        let mut reduced = DMatrix::<Complex64>::zeros(h, h);
        for a in 0..2 {
            for b in 0..2 {
                let w = op[(b, a)];
                for s in 0..h {
                    for t in 0..h {
                        reduced[(s, t)] += w * m[(a * h + s, b * h + t)];
                    }
                }
            }
        }
        if remaining == 1 {
            out.push(reduced[(0, 0)].re);
        } else {
            trace_level(&reduced, ops, remaining - 1, out);
        }
    }
}

/// Pearson chi-square of the histogram against `D * int_bin P_H dn`.
pub fn gof_chisquare(hist: &SphericalHistogram, rho: &DensityMatrix) -> Result<ChiSquareResult> {
    if hist.total == 0 {
        return Err(Error::EmptyLog);
    }
    if hist.n_particles != rho.n_particles() {
        return Err(Error::DimensionMismatch { expected: rho.n_particles(), actual: hist.n_particles });
    }
    let d = hist.total as f64;
    let expected: Vec<f64> = bin_probabilities(rho, hist.binning).iter().map(|p| d * p).collect();
    stats::chi_square_gof(&hist.counts, &expected, SparseBins::Reject)
}

pub const MIN_KS_SAMPLES: u64 = 100;

/// CDF of `c = cos(theta_j)` under the Husimi marginal of particle `j`:
/// `(c + 1)/2 + r_z (c^2 - 1)/4`, with `r_z` the reduced Bloch z-component.
pub fn polar_marginal_cdf(rho: &DensityMatrix, j: usize) -> Result<impl Fn(f64) -> f64> {
    let rz = rho.bloch_vector(j)?[2];
    Ok(move |c: f64| {
        let c = c.clamp(-1.0, 1.0);
        (c + 1.0) / 2.0 + rz * (c * c - 1.0) / 4.0
    })
}

/// One-sample KS test of the recorded `cos(theta_j)` values.
pub fn ks_polar_marginal(log: &DirectionLog, rho: &DensityMatrix, j: usize) -> Result<KsResult> {
    if log.accepted < MIN_KS_SAMPLES {
        return Err(Error::InvalidParameter(format!("KS test needs D >= {MIN_KS_SAMPLES}, got {}", log.accepted)));
    }
    let cdf = polar_marginal_cdf(rho, j)?;
    stats::ks_one_sample(&log.polar_cosines(j), cdf)
}

/// Two-sample KS on the `cos(theta_j)` marginals, one result per particle.
pub fn two_sample_compare(a: &DirectionLog, b: &DirectionLog) -> Result<Vec<KsResult>> {
    if a.n_particles != b.n_particles {
        return Err(Error::DimensionMismatch { expected: a.n_particles, actual: b.n_particles });
    }
    (0..a.n_particles).map(|j| stats::ks_two_sample(&a.polar_cosines(j), &b.polar_cosines(j))).collect()
}

/// `{variant, m, seed, state_hash, D}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub variant: String,
    pub m: u64,
    pub seed: u64,
    pub state_hash: String,
    #[serde(rename = "D")]
    pub accepted: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::husimi::husimi_eval;
    use crate::qspin::{random_mixed_state, random_pure_state};
    use crate::quadrature::GaussLegendre;
    use approx::assert_abs_diff_eq;

    fn up() -> DensityMatrix {
        DensityMatrix::coherent(&DirectionTuple::single(UnitVector::PLUS_Z))
    }

    /// Per-bin tensor quadrature of the Husimi function, independent of the
    /// bin-operator route.
    fn quadrature_bin_probabilities(rho: &DensityMatrix, binning: SphereBinning) -> Vec<f64> {
        let gl = GaussLegendre::new(24);
        let n = rho.n_particles();
        let k = binning.bins();
        let nodes: Vec<Vec<(UnitVector, f64)>> = (0..k)
            .map(|b| {
                let (z0, z1, p0, p1) = binning.bounds(b);
                let mut v = Vec::new();
                // theta parametrization keeps the integrand smooth at the poles
                for (t, wt) in gl.mapped(z1.clamp(-1.0, 1.0).acos(), z0.clamp(-1.0, 1.0).acos()) {
                    for (p, wp) in gl.mapped(p0, p1) {
                        v.push((UnitVector::from_angles(t, p), wt * t.sin() * wp));
                    }
                }
                v
            })
            .collect();
        let mut out = Vec::new();
        for b in 0..k.pow(n as u32) {
            let mut idx = vec![0; n];
            let mut r = b;
            for j in (0..n).rev() {
                idx[j] = r % k;
                r /= k;
            }
            let mut sum = 0.0;
            let mut pos = vec![0usize; n];
            loop {
                let dirs: Vec<UnitVector> = (0..n).map(|j| nodes[idx[j]][pos[j]].0).collect();
                let w: f64 = (0..n).map(|j| nodes[idx[j]][pos[j]].1).product();
                sum += w * husimi_eval(rho, &DirectionTuple(dirs)).unwrap();
                let mut j = n;
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    pos[j] += 1;
                    if pos[j] < nodes[idx[j]].len() {
                        break;
                    }
                    pos[j] = 0;
                }
                if pos.iter().all(|&p| p == 0) {
                    break;
                }
            }
            out.push(sum);
        }
        out
    }

    #[test]
    fn bin_probabilities_match_quadrature() {
        let binning = SphereBinning::new(6, 12).unwrap();
        for seed in 0..3 {
            let rho = random_mixed_state(1, 2, seed).unwrap();
            let exact = bin_probabilities(&rho, binning);
            let quad = quadrature_bin_probabilities(&rho, binning);
            assert_abs_diff_eq!(exact.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for (a, b) in exact.iter().zip(&quad) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
        let binning = SphereBinning::new(2, 3).unwrap();
        let rho = random_mixed_state(2, 4, 5).unwrap();
        let exact = bin_probabilities(&rho, binning);
        let quad = quadrature_bin_probabilities(&rho, binning);
        assert_eq!(exact.len(), 36);
        for (a, b) in exact.iter().zip(&quad) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn binning_is_equal_area() {
        let b = SphereBinning::new(6, 12).unwrap();
        for i in 0..b.bins() {
            let (z0, z1, p0, p1) = b.bounds(i);
            assert_abs_diff_eq!((z1 - z0) * (p1 - p0), b.solid_angle(), epsilon = 1e-12);
            let mid = UnitVector::from_z_phi(0.5 * (z0 + z1), 0.5 * (p0 + p1));
            assert_eq!(b.index(&mid), i);
        }
        assert_eq!(b.index(&UnitVector::PLUS_Z), b.bins() - b.h_phi);
        assert_eq!(b.index(&UnitVector::MINUS_Z), 0);
    }

    #[test]
    fn variant_a_accepts_on_pure_state_axis() {
        // <+z|rho|+z> = 1, so a proposal along +z is always accepted
        let rho = up();
        let mut r = rng::stream(0, "test", 0);
        let cfg = ExperimentConfig::new(Variant::A, 1, 1, 0);
        let p = rho.expectation(crate::qspin::coherent_ket(&UnitVector::PLUS_Z).amplitudes());
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        for _ in 0..100 {
            let draw: f64 = r.random();
            assert!(draw < p);
        }
        assert!(run_experiment(&rho, &cfg).is_ok());
    }

    #[test]
    fn acceptance_rate_maximally_mixed() {
        for n in 1..=2 {
            let rho = DensityMatrix::maximally_mixed(n).unwrap();
            let log = run_experiment(&rho, &ExperimentConfig::new(Variant::A, n, 1_000_000, 17)).unwrap();
            let (rate, se) = acceptance_rate(&log).unwrap();
            let p = 1.0 / (1 << n) as f64;
            assert!((rate - p).abs() < 3.0 * (p * (1.0 - p) / 1e6f64).sqrt(), "{rate} {se}");
        }
    }

    #[test]
    fn variant_b_records_every_trial() {
        let rho = up();
        let m = 1_000_000;
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::B, 1, m, 3)).unwrap();
        assert_eq!(log.accepted(), m);
        assert_eq!(acceptance_rate(&log).unwrap(), (1.0, 0.0));
        // first moment of (1 + c)/2 on [-1, 1] by 1-D quadrature
        let gl = GaussLegendre::new(8);
        let mean_c = gl.integrate(-1.0, 1.0, |c| c * (1.0 + c) / 2.0);
        assert_abs_diff_eq!(mean_c, 1.0 / 3.0, epsilon = 1e-14);
        let cs = log.polar_cosines(0);
        let mean = cs.iter().sum::<f64>() / cs.len() as f64;
        let var = cs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (cs.len() - 1) as f64;
        assert!((mean - mean_c).abs() < 3.0 * (var / cs.len() as f64).sqrt(), "{mean}");
    }

    #[test]
    fn determinism_and_chunk_independence() {
        let rho = random_mixed_state(2, 3, 4).unwrap();
        let cfg = ExperimentConfig::new(Variant::A, 2, 50_000, 99).keep_rejected(true);
        let a = run_experiment(&rho, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_experiment(&rho, &cfg)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries().len(), 50_000);
        let c = run_experiment(&rho, &ExperimentConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_counts() {
        let rho = up();
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::A, 1, 200_000, 8)).unwrap();
        let h = histogram(&log, 6, 12).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), log.accepted());
        assert_abs_diff_eq!(h.bin_solid_angle(), 4.0 * PI / 72.0, epsilon = 1e-12);
        let empty = DirectionLog::new(1, 10);
        assert!(matches!(histogram(&empty, 6, 12), Err(Error::EmptyLog)));
    }

    #[test]
    fn histogram_pole_ratio() {
        // Top and bottom z-bands: expected ratio (1 + zbar_top)/(1 + zbar_bottom).
        let rho = up();
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::B, 1, 2_000_000, 21)).unwrap();
        let h = histogram(&log, 4, 1).unwrap();
        let top = h.counts[3] as f64;
        let bottom = h.counts[0] as f64;
        let ratio = (1.0 + 0.75) / (1.0 - 0.75);
        let se = ratio * (1.0 / top + 1.0 / bottom).sqrt();
        assert!((top / bottom - ratio).abs() < 4.0 * se, "{} vs {ratio}", top / bottom);
    }

    #[test]
    fn gof_accepts_true_state_and_rejects_wrong_one() {
        let rho = random_pure_state(1, 12).unwrap();
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::A, 1, 1_000_000, 5)).unwrap();
        let h = histogram(&log, 6, 12).unwrap();
        assert!(gof_chisquare(&h, &rho).unwrap().p_value > 1e-4);
        let log = run_experiment(&up(), &ExperimentConfig::new(Variant::A, 1, 1_000_000, 5)).unwrap();
        let h = histogram(&log, 6, 12).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(gof_chisquare(&h, &mixed).unwrap().p_value < 1e-6);
    }

    #[test]
    fn gof_rejects_underfilled_bins() {
        let log = run_experiment(&up(), &ExperimentConfig::new(Variant::A, 1, 1_000, 5)).unwrap();
        let h = histogram(&log, 6, 12).unwrap();
        assert!(matches!(gof_chisquare(&h, &up()), Err(Error::UnderfilledBins { .. })));
    }

    #[test]
    fn polar_marginal_cdf_matches_quadrature() {
        // N = 1, |+z>: CDF (c + 1)^2 / 4; uniform: (c + 1)/2
        let f = polar_marginal_cdf(&up(), 0).unwrap();
        let g = polar_marginal_cdf(&DensityMatrix::maximally_mixed(1).unwrap(), 0).unwrap();
        for k in 0..=10 {
            let c = -1.0 + 0.2 * k as f64;
            assert_abs_diff_eq!(f(c), (c + 1.0).powi(2) / 4.0, epsilon = 1e-14);
            assert_abs_diff_eq!(g(c), (c + 1.0) / 2.0, epsilon = 1e-14);
        }
        // two particles: integrate the Husimi function over the other sphere and phi
        let rho = random_mixed_state(2, 3, 31).unwrap();
        let grid = crate::husimi::sphere_grid(12).unwrap();
        let gl = GaussLegendre::new(16);
        for j in 0..2 {
            let cdf = polar_marginal_cdf(&rho, j).unwrap();
            for &c in &[-0.7, -0.1, 0.4, 0.9] {
                let v = gl.integrate(-1.0, c, |z| {
                    gl.integrate(0.0, TAU, |p| {
                        let nj = UnitVector::from_z_phi(z, p);
                        grid.integrate(|other| {
                            let dirs = if j == 0 { vec![nj, *other] } else { vec![*other, nj] };
                            husimi_eval(&rho, &DirectionTuple(dirs)).unwrap()
                        })
                    })
                });
                assert_abs_diff_eq!(v, cdf(c), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ks_marginal_and_two_sample() {
        let a = run_experiment(&up(), &ExperimentConfig::new(Variant::A, 1, 400_000, 1)).unwrap();
        let b = run_experiment(&up(), &ExperimentConfig::new(Variant::B, 1, 400_000, 2)).unwrap();
        assert!(ks_polar_marginal(&a, &up(), 0).unwrap().p_value > 1e-4);
        assert!(two_sample_compare(&a, &b).unwrap()[0].p_value > 1e-4);
        let down = DensityMatrix::coherent(&DirectionTuple::single(UnitVector::MINUS_Z));
        let c = run_experiment(&down, &ExperimentConfig::new(Variant::A, 1, 400_000, 3)).unwrap();
        assert!(two_sample_compare(&a, &c).unwrap()[0].p_value < 1e-6);
        let small = run_experiment(&up(), &ExperimentConfig::new(Variant::A, 1, 50, 3)).unwrap();
        assert!(ks_polar_marginal(&small, &up(), 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rho = random_mixed_state(2, 2, 3).unwrap();
        let log = run_experiment(&rho, &ExperimentConfig::new(Variant::A, 2, 300, 4).keep_rejected(true)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("trial_index,accepted,theta_1,phi_1,theta_2,phi_2\n"));
        let back = DirectionLog::read_csv(&buf[..], Some(300)).unwrap();
        assert_eq!(back.accepted(), log.accepted());
        assert_eq!(back.trials(), 300);
        for i in 0..log.entries().len() {
            for (a, b) in log.dirs_of(i).iter().zip(back.dirs_of(i)) {
                assert!(a.angle_to(b) < 1e-12);
            }
        }
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert!(DirectionLog::read_csv(&b"trial_index,accepted\n"[..], None).is_err());
        assert!(DirectionLog::read_csv(&b"trial_index,accepted,theta_1,phi_1\n0,2,0,0\n"[..], None).is_err());
        assert!(DirectionLog::read_csv(&b"trial_index,accepted,theta_1,phi_1\n1,1,0,0\n0,1,0,0\n"[..], None).is_err());
        assert!(DirectionLog::read_csv(&b"trial_index,accepted,theta_1,phi_1\n5,1,0,0\n"[..], Some(3)).is_err());
    }
}
