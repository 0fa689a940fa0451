//! Spin-1/2 kets, density matrices and spin coherent states.
//!
//! Basis conventions used throughout the crate:
//! * single-qubit index 0 is the sigma_z = +1 state;
//! * in a tensor product, particle 1 is the most significant index;
//! * the coherent ket along (theta, phi) is `(cos(theta/2), e^{i phi} sin(theta/2))`,
//!   with phi = 0 at both poles.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const MAX_PARTICLES: usize = 10;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVector {
    pub const PLUS_X: UnitVector = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const PLUS_Y: UnitVector = UnitVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const PLUS_Z: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };
    pub const MINUS_Z: UnitVector = UnitVector { x: 0.0, y: 0.0, z: -1.0 };

    /// Normalizes `(x, y, z)`; fails on a zero or non-finite vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let r = (x * x + y * y + z * z).sqrt();
        if !r.is_finite() || r == 0.0 {
            return Err(Error::InvalidParameter(format!("cannot normalize ({x}, {y}, {z})")));
        }
        Ok(Self { x: x / r, y: y / r, z: z / r })
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    /// Area-uniform parametrization: `z = cos(theta)`.
    pub fn from_z_phi(z: f64, phi: f64) -> Self {
        let z = z.clamp(-1.0, 1.0);
        let s = ((1.0 - z) * (1.0 + z)).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        Self { x: s * cp, y: s * sp, z }
    }

    pub fn theta(&self) -> f64 {
        self.x.hypot(self.y).atan2(self.z)
    }

    /// Azimuth in [0, 2pi); zero at the poles.
    pub fn phi(&self) -> f64 {
        if self.x == 0.0 && self.y == 0.0 {
            return 0.0;
        }
        let p = self.y.atan2(self.x).rem_euclid(TAU);
        // rem_euclid can round up to exactly 2pi for tiny negative inputs
        if p >= TAU {
            0.0
        } else {
            p
        }
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Angle to `other` in radians, accurate for nearly parallel vectors.
    pub fn angle_to(&self, other: &UnitVector) -> f64 {
        let c = self.to_vector().cross(&other.to_vector()).norm();
        c.atan2(self.dot(other))
    }

    pub fn neg(&self) -> UnitVector {
        UnitVector { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm_residual(&self) -> f64 {
        ((self.x * self.x + self.y * self.y + self.z * self.z) - 1.0).abs()
    }
}

/// A point of the N-fold product of spheres, one direction per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTuple(pub Vec<UnitVector>);

impl DirectionTuple {
    pub fn new(dirs: Vec<UnitVector>) -> Result<Self> {
        if dirs.is_empty() {
            return Err(Error::InvalidParameter("direction tuple needs N >= 1".into()));
        }
        Ok(Self(dirs))
    }

    pub fn single(dir: UnitVector) -> Self {
        Self(vec![dir])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dirs(&self) -> &[UnitVector] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<Complex64>,
}

impl Ket {
    pub fn new(amps: DVector<Complex64>) -> Result<Self> {
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("ket has squared norm {n2}")));
        }
        Ok(Self { amps })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        Ket { amps: kron_vec(&self.amps, &other.amps) }
    }
}

pub(crate) fn kron_vec(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DVector<Complex64> {
    let nb = b.len();
    DVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

pub(crate) fn kron_mat(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// `(cos(theta/2), e^{i phi} sin(theta/2))`, the +1 eigenvector of `sigma . dir`.
pub fn coherent_ket(dir: &UnitVector) -> Ket {
    let c = ((1.0 + dir.z) / 2.0).max(0.0).sqrt();
    let s = ((1.0 - dir.z) / 2.0).max(0.0).sqrt();
    let rho = dir.x.hypot(dir.y);
    let phase = if rho == 0.0 { C1 } else { Complex64::new(dir.x / rho, dir.y / rho) };
    Ket { amps: DVector::from_vec(vec![Complex64::new(c, 0.0), phase * s]) }
}

pub fn product_coherent_ket(n: &DirectionTuple) -> Ket {
    let mut it = n.0.iter();
    let first = coherent_ket(it.next().expect("DirectionTuple is non-empty"));
    it.fold(first, |acc, d| acc.kron(&coherent_ket(d)))
}

pub fn sigma_dot_n(dir: &UnitVector) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(dir.z, 0.0),
        Complex64::new(dir.x, -dir.y),
        Complex64::new(dir.x, dir.y),
        Complex64::new(-dir.z, 0.0),
    )
}

pub fn pauli(axis: usize) -> Matrix2<Complex64> {
    match axis {
        0 => Matrix2::new(C0, C1, C1, C0),
        1 => Matrix2::new(C0, -CI, CI, C0),
        2 => Matrix2::new(C1, C0, C0, -C1),
        _ => panic!("Pauli axis must be 0, 1 or 2"),
    }
}

/// Residuals reported by [`validate_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityReport {
    pub dim: usize,
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub trace_deviation: f64,
    pub pass: bool,
}

pub fn validate_density(mat: &DMatrix<Complex64>) -> Result<DensityReport> {
    let (r, c) = mat.shape();
    if r != c {
        return Err(Error::InvalidState(format!("matrix is {r}x{c}, not square")));
    }
    if r == 0 || !r.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(r));
    }
    Ok(density_report(mat))
}

pub(crate) fn density_report(mat: &DMatrix<Complex64>) -> DensityReport {
    let dim = mat.nrows();
    let adj = mat.adjoint();
    let herm = (mat - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sym = (mat + &adj).map(|z| z * 0.5);
    let min_eig = if mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    let tr = mat.trace();
    let trace_dev = (tr - C1).norm();
    let pass = herm <= HERMITIAN_TOL && min_eig >= -EIGEN_TOL && trace_dev <= TRACE_TOL;
    DensityReport { dim, hermiticity_residual: herm, min_eigenvalue: min_eig, trace_deviation: trace_dev, pass }
}

/// Density matrix of N spin-1/2 particles.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_particles: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        let report = validate_density(&mat)?;
        if !report.pass {
            return Err(Error::InvalidState(format!(
                "hermiticity residual {:.3e}, min eigenvalue {:.3e}, trace deviation {:.3e}",
                report.hermiticity_residual, report.min_eigenvalue, report.trace_deviation
            )));
        }
        let n_particles = report.dim.trailing_zeros() as usize;
        if n_particles == 0 || n_particles > MAX_PARTICLES {
            return Err(Error::InvalidParameter(format!("particle count {n_particles} outside 1..={MAX_PARTICLES}")));
        }
        Ok(Self { n_particles, mat })
    }

    pub fn pure(ket: &Ket) -> Result<Self> {
        let a = ket.amplitudes();
        Self::new(a * a.adjoint())
    }

    pub fn coherent(n: &DirectionTuple) -> Self {
        let a = product_coherent_ket(n).amps;
        Self { n_particles: n.len(), mat: &a * a.adjoint() }
    }

    pub fn maximally_mixed(n_particles: usize) -> Result<Self> {
        check_particles(n_particles)?;
        let d = 1usize << n_particles;
        let mat = DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
        Ok(Self { n_particles, mat })
    }

    /// Single-qubit state `(I + r . sigma) / 2` for |r| <= 1.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let mut mat = DMatrix::from_diagonal_element(2, 2, Complex64::new(0.5, 0.0));
        for (axis, &ra) in r.iter().enumerate() {
            let p = pauli(axis);
            for i in 0..2 {
                for j in 0..2 {
                    mat[(i, j)] += p[(i, j)] * (0.5 * ra);
                }
            }
        }
        Self::new(mat)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let n = self.n_particles + other.n_particles;
        check_particles(n)?;
        Ok(Self { n_particles: n, mat: kron_mat(&self.mat, &other.mat) })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Real part of `<k| rho |k>`.
    pub fn expectation(&self, ket: &DVector<Complex64>) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            let mut row = C0;
            for i in 0..d {
                row += ket[i].conj() * self.mat[(i, j)];
            }
            acc += (row * ket[j]).re;
        }
        acc
    }

    /// `tr(rho A)` for an operator of the same dimension.
    pub fn trace_with(&self, op: &DMatrix<Complex64>) -> Complex64 {
        let d = self.dim();
        let mut acc = C0;
        for i in 0..d {
            for j in 0..d {
                acc += self.mat[(i, j)] * op[(j, i)];
            }
        }
        acc
    }

    /// Bloch vector of the reduced state of particle `j` (0-based).
    pub fn bloch_vector(&self, j: usize) -> Result<[f64; 3]> {
        if j >= self.n_particles {
            return Err(Error::InvalidParameter(format!("particle {j} out of range for N = {}", self.n_particles)));
        }
        let mut out = [0.0; 3];
        for (axis, o) in out.iter_mut().enumerate() {
            let op = local_operator(self.n_particles, j, &pauli(axis));
            *o = self.trace_with(&op).re;
        }
        Ok(out)
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        if u.shape() != self.mat.shape() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: u.nrows() });
        }
        let mat = u * &self.mat * u.adjoint();
        Ok(Self { n_particles: self.n_particles, mat })
    }

    pub fn to_json_value(&self) -> DensityMatrixJson {
        let d = self.dim();
        DensityMatrixJson {
            n_particles: self.n_particles,
            re: (0..d).map(|i| (0..d).map(|j| self.mat[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.mat[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("finite matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: DensityMatrixJson = serde_json::from_str(s)?;
        v.try_into()
    }
}

fn check_particles(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PARTICLES {
        return Err(Error::InvalidParameter(format!("particle count {n} outside 1..={MAX_PARTICLES}")));
    }
    Ok(())
}

/// `I (x) ... (x) op_j (x) ... (x) I` on N qubits.
pub fn local_operator(n_particles: usize, j: usize, op: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    let op = DMatrix::from_fn(2, 2, |r, c| op[(r, c)]);
    let mut acc = DMatrix::<Complex64>::identity(1, 1);
    for k in 0..n_particles {
        acc = kron_mat(&acc, if k == j { &op } else { &id });
    }
    acc
}

/// Row-major JSON form: `{"n_particles": N, "re": [[..]], "im": [[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixJson {
    pub n_particles: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(v: DensityMatrixJson) -> Result<Self> {
        check_particles(v.n_particles)?;
        let d = 1usize << v.n_particles;
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !rows_ok(&v.re) || !rows_ok(&v.im) {
            return Err(Error::DimensionMismatch { expected: d, actual: v.re.len().max(v.im.len()) });
        }
        let mat = DMatrix::from_fn(d, d, |i, j| Complex64::new(v.re[i][j], v.im[i][j]));
        DensityMatrix::new(mat)
    }
}

/// Writes the product coherent ket of `dirs` into `buf` (resized to `2^N`).
pub(crate) fn product_ket_into(dirs: &[UnitVector], buf: &mut Vec<Complex64>) {
    buf.clear();
    buf.push(C1);
    for d in dirs {
        let k = coherent_ket(d);
        let (k0, k1) = (k.amps[0], k.amps[1]);
        let len = buf.len();
        buf.resize(2 * len, C0);
        for i in (0..len).rev() {
            let a = buf[i];
            buf[2 * i] = a * k0;
            buf[2 * i + 1] = a * k1;
        }
    }
}

/// Real part of `k^dagger M k`.
pub(crate) fn quad_form(m: &DMatrix<Complex64>, k: &[Complex64]) -> f64 {
    let d = k.len();
    let mut acc = 0.0;
    for j in 0..d {
        let col = m.column(j);
        let mut row = C0;
        for i in 0..d {
            row += k[i].conj() * col[i];
        }
        acc += (row * k[j]).re;
    }
    acc
}

/// Probability that measuring `sigma . n_j` on every particle gives +1: `<n| rho |n>`.
pub fn outcome_plus_prob(rho: &DensityMatrix, n: &DirectionTuple) -> Result<f64> {
    if n.len() != rho.n_particles() {
        return Err(Error::DimensionMismatch { expected: rho.n_particles(), actual: n.len() });
    }
    Ok(rho.expectation(product_coherent_ket(n).amplitudes()))
}

fn ginibre(dim: usize, cols: usize, rng: &mut ChaCha20Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

pub fn random_pure_state(n_particles: usize, seed: u64) -> Result<DensityMatrix> {
    check_particles(n_particles)?;
    let d = 1usize << n_particles;
    let mut rng = ChaCha20Rng::from_seed(crate::rng::child_key(seed, "qspin/random_pure"));
    let g = ginibre(d, 1, &mut rng);
    let v = g.column(0).into_owned();
    let v = &v / Complex64::new(v.norm(), 0.0);
    Ok(DensityMatrix { n_particles, mat: &v * v.adjoint() })
}

/// Normalized Wishart state `G G^dagger / tr(G G^dagger)` with `G` of shape `2^N x rank`.
pub fn random_mixed_state(n_particles: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    check_particles(n_particles)?;
    let d = 1usize << n_particles;
    if rank == 0 || rank > d {
        return Err(Error::InvalidParameter(format!("rank {rank} outside 1..={d}")));
    }
    let mut rng = ChaCha20Rng::from_seed(crate::rng::child_key(seed, "qspin/random_mixed"));
    let g = ginibre(d, rank, &mut rng);
    let w = &g * g.adjoint();
    let tr = w.trace();
    Ok(DensityMatrix { n_particles, mat: w / tr })
}

/// Random SU(2) element from a normalized Gaussian quaternion.
pub fn random_su2(rng: &mut ChaCha20Rng) -> Matrix2<Complex64> {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (a, b, c, d) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix2::new(Complex64::new(a, b), Complex64::new(c, d), Complex64::new(-c, d), Complex64::new(a, -b))
}

/// Tensor product of single-qubit unitaries, particle 1 first.
pub fn product_unitary(us: &[Matrix2<Complex64>]) -> DMatrix<Complex64> {
    us.iter().fold(DMatrix::identity(1, 1), |acc, u| kron_mat(&acc, &DMatrix::from_fn(2, 2, |r, c| u[(r, c)])))
}

/// Rotates a direction by the SO(3) image of `u`: `sigma . (R n) = U (sigma . n) U^dagger`.
pub fn rotate_direction(u: &Matrix2<Complex64>, n: &UnitVector) -> UnitVector {
    let m = u * sigma_dot_n(n) * u.adjoint();
    let x = m[(1, 0)].re;
    let y = m[(1, 0)].im;
    let z = m[(0, 0)].re;
    UnitVector::new(x, y, z).expect("rotation preserves norm")
}
