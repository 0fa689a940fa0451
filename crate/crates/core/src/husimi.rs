//! Husimi function on the product of spheres, completeness, normalization and
//! Wehrl entropy by quadrature and by Monte Carlo.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspin::{coherent_ket, product_coherent_ket, DensityMatrix, DirectionTuple, UnitVector};
use crate::quadrature::GaussLegendre;
use crate::rng;

/// Gauss–Legendre in cos(theta) times a uniform trapezoid in phi.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    order: usize,
    nodes: Vec<(UnitVector, f64)>,
}

pub fn sphere_grid(l: usize) -> Result<SphereGrid> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!("sphere grid order {l} < 2")));
    }
    let gl = GaussLegendre::new(l);
    let n_phi = 2 * l;
    let dphi = TAU / n_phi as f64;
    let mut nodes = Vec::with_capacity(l * n_phi);
    for (&z, &wz) in gl.nodes.iter().zip(&gl.weights) {
        for k in 0..n_phi {
            nodes.push((UnitVector::from_z_phi(z, k as f64 * dphi), wz * dphi));
        }
    }
    Ok(SphereGrid { order: l, nodes })
}

impl SphereGrid {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[(UnitVector, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&UnitVector) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|(n, w)| w * f(n)).sum()
    }
}

/// One [`SphereGrid`] per particle; node weights multiply.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGrid {
    spheres: Vec<SphereGrid>,
}

impl ProductGrid {
    pub fn new(spheres: Vec<SphereGrid>) -> Result<Self> {
        if spheres.is_empty() {
            return Err(Error::InvalidParameter("product grid needs at least one sphere".into()));
        }
        Ok(Self { spheres })
    }

    /// The same order-`l` grid on each of `n_particles` spheres.
    pub fn uniform(n_particles: usize, l: usize) -> Result<Self> {
        let g = sphere_grid(l)?;
        Self::new(vec![g; n_particles])
    }

    pub fn n_particles(&self) -> usize {
        self.spheres.len()
    }

    pub fn spheres(&self) -> &[SphereGrid] {
        &self.spheres
    }

    pub fn total_nodes(&self) -> usize {
        self.spheres.iter().map(SphereGrid::len).product()
    }

    pub fn total_weight(&self) -> f64 {
        self.spheres.iter().map(|s| s.nodes.iter().map(|n| n.1).sum::<f64>()).product()
    }

    /// Visits every `(DirectionTuple, weight)` in odometer order, last particle fastest.
    pub fn for_each<F: FnMut(&DirectionTuple, f64)>(&self, mut f: F) {
        let n = self.spheres.len();
        let mut idx = vec![0usize; n];
        let mut tuple = DirectionTuple(self.spheres.iter().map(|s| s.nodes[0].0).collect());
        loop {
            let mut w = 1.0;
            for (j, s) in self.spheres.iter().enumerate() {
                tuple.0[j] = s.nodes[idx[j]].0;
                w *= s.nodes[idx[j]].1;
            }
            f(&tuple, w);
            let mut j = n;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.spheres[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
}

impl From<SphereGrid> for ProductGrid {
    fn from(g: SphereGrid) -> Self {
        Self { spheres: vec![g] }
    }
}

/// Per-sphere coherent kets cached for a grid.
struct KetTable {
    kets: Vec<[Complex64; 2]>,
    weights: Vec<f64>,
}

impl KetTable {
    fn new(g: &SphereGrid) -> Self {
        let kets = g
            .nodes
            .iter()
            .map(|(n, _)| {
                let k = coherent_ket(n);
                [k.amplitudes()[0], k.amplitudes()[1]]
            })
            .collect();
        Self { kets, weights: g.nodes.iter().map(|n| n.1).collect() }
    }
}

/// Contracts the most significant qubit of `m` with `<k| . |k>`.
fn contract_first(m: &DMatrix<Complex64>, k: &[Complex64; 2]) -> DMatrix<Complex64> {
    let h = m.nrows() / 2;
    DMatrix::from_fn(h, h, |s, t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                acc += k[a].conj() * m[(a * h + s, b * h + t)] * k[b];
            }
        }
        acc
    })
}

fn quad2(m: &DMatrix<Complex64>, k: &[Complex64; 2]) -> f64 {
    let mut acc = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            acc += (k[a].conj() * m[(a, b)] * k[b]).re;
        }
    }
    acc
}

fn sum_level<G: Fn(f64, f64) -> f64 + Sync>(m: &DMatrix<Complex64>, tables: &[KetTable], w_prefix: f64, g: &G) -> f64 {
    let (head, tail) = tables.split_first().expect("at least one sphere");
    if tail.is_empty() {
        head.kets.iter().zip(&head.weights).map(|(k, w)| g(quad2(m, k), w_prefix * w)).sum()
    } else {
        head.kets.iter().zip(&head.weights).map(|(k, w)| sum_level(&contract_first(m, k), tail, w_prefix * w, g)).sum()
    }
}

/// `sum_k g(<n_k|rho|n_k>, w_k)` over a product grid.
///
/// The outermost sphere is split across threads and partial sums are added in
/// node order, so the result does not depend on the thread count.
pub fn fold_grid<G: Fn(f64, f64) -> f64 + Sync>(rho: &DensityMatrix, grid: &ProductGrid, g: G) -> Result<f64> {
    if grid.n_particles() != rho.n_particles() {
        return Err(Error::DimensionMismatch { expected: rho.n_particles(), actual: grid.n_particles() });
    }
    let tables: Vec<KetTable> = grid.spheres.iter().map(KetTable::new).collect();
    let (head, tail) = tables.split_first().expect("non-empty");
    let m = rho.matrix();
    let partials: Vec<f64> = head
        .kets
        .par_iter()
        .zip(head.weights.par_iter())
        .map(|(k, &w)| if tail.is_empty() { g(quad2(m, k), w) } else { sum_level(&contract_first(m, k), tail, w, &g) })
        .collect();
    Ok(partials.iter().sum())
}

fn husimi_norm(n_particles: usize) -> f64 {
    TAU.powi(n_particles as i32)
}

fn p_ln_p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `P_H(rho; n) = <n|rho|n> / (2pi)^N`.
pub fn husimi_eval(rho: &DensityMatrix, n: &DirectionTuple) -> Result<f64> {
    let q = crate::qspin::outcome_plus_prob(rho, n)?;
    Ok(q.max(0.0) / husimi_norm(n.len()))
}

/// Husimi function of a fixed state.
pub struct HusimiField<'a> {
    rho: &'a DensityMatrix,
}

impl<'a> HusimiField<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        Self { rho }
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 / husimi_norm(self.rho.n_particles())
    }

    pub fn eval(&self, n: &DirectionTuple) -> Result<f64> {
        husimi_eval(self.rho, n)
    }

    /// Values at every grid node in [`ProductGrid::for_each`] order.
    pub fn eval_grid(&self, grid: &ProductGrid) -> Result<Vec<f64>> {
        if grid.n_particles() != self.rho.n_particles() {
            return Err(Error::DimensionMismatch { expected: self.rho.n_particles(), actual: grid.n_particles() });
        }
        let norm = husimi_norm(grid.n_particles());
        let mut out = Vec::with_capacity(grid.total_nodes());
        grid.for_each(|n, _| out.push(self.rho.expectation(product_coherent_ket(n).amplitudes()).max(0.0) / norm));
        Ok(out)
    }

    /// CSV with columns `theta_1,phi_1,...,theta_N,phi_N,value`.
    pub fn write_csv<W: Write>(&self, grid: &ProductGrid, mut out: W) -> Result<()> {
        let n = grid.n_particles();
        let mut header: Vec<String> = (1..=n).flat_map(|j| [format!("theta_{j}"), format!("phi_{j}")]).collect();
        header.push("value".into());
        writeln!(out, "{}", header.join(","))?;
        let values = self.eval_grid(grid)?;
        let mut i = 0;
        let mut err = None;
        grid.for_each(|tuple, _| {
            if err.is_some() {
                return;
            }
            let mut line = String::new();
            for d in tuple.dirs() {
                line.push_str(&format!("{},{},", d.theta(), d.phi()));
            }
            line.push_str(&format!("{}", values[i]));
            i += 1;
            if let Err(e) = writeln!(out, "{line}") {
                err = Some(e);
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

/// `max |(1/(2pi)^N) sum_k w_k |n_k><n_k| - I|` over matrix entries.
pub fn completeness_residual(grid: &ProductGrid) -> f64 {
    let n = grid.n_particles();
    let d = 1usize << n;
    let tables: Vec<KetTable> = grid.spheres.iter().map(KetTable::new).collect();
    // full product-ket projectors, not the per-sphere factorization
    let partials: Vec<DMatrix<Complex64>> = (0..tables[0].kets.len())
        .into_par_iter()
        .map(|i0| {
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            let mut idx = vec![0usize; n];
            idx[0] = i0;
            loop {
                let mut amps = vec![Complex64::new(1.0, 0.0)];
                let mut w = 1.0;
                for (j, t) in tables.iter().enumerate() {
                    let k = t.kets[idx[j]];
                    w *= t.weights[idx[j]];
                    amps = amps.iter().flat_map(|a| [a * k[0], a * k[1]]).collect();
                }
                for r in 0..d {
                    for c in 0..d {
                        acc[(r, c)] += amps[r] * amps[c].conj() * w;
                    }
                }
                let mut j = n;
                loop {
                    j -= 1;
                    if j == 0 {
                        return acc;
                    }
                    idx[j] += 1;
                    if idx[j] < tables[j].kets.len() {
                        break;
                    }
                    idx[j] = 0;
                }
            }
        })
        .collect();
    let mut total = DMatrix::<Complex64>::zeros(d, d);
    for p in &partials {
        total += p;
    }
    let norm = husimi_norm(n);
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((total[(r, c)] / norm - target).norm());
        }
    }
    worst
}

/// Quadrature of `P_H` over the grid; equals 1 for every valid state.
pub fn integrate_husimi(rho: &DensityMatrix, grid: &ProductGrid) -> Result<f64> {
    let norm = husimi_norm(rho.n_particles());
    fold_grid(rho, grid, |q, w| w * q.max(0.0) / norm)
}

/// `-sum_k w_k P ln P` with `0 ln 0 = 0`, in nats.
pub fn wehrl_quadrature(rho: &DensityMatrix, grid: &ProductGrid) -> Result<f64> {
    let norm = husimi_norm(rho.n_particles());
    let s = fold_grid(rho, grid, |q, w| w * p_ln_p(q.max(0.0) / norm))?;
    Ok(-s)
}

/// Grid order used for quadrature entropy; `None` means Monte Carlo only.
pub fn default_grid_order(n_particles: usize) -> Option<usize> {
    match n_particles {
        1 => Some(64),
        2 => Some(48),
        3 => Some(16),
        _ => None,
    }
}

pub const MIN_MC_TRIALS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Uniform-sampling estimate `-(4pi)^N mean[P ln P]` and its standard error.
pub fn wehrl_mc(rho: &DensityMatrix, m: u64, seed: u64) -> Result<McEstimate> {
    if m < MIN_MC_TRIALS {
        return Err(Error::InvalidParameter(format!("Monte Carlo Wehrl entropy needs m >= {MIN_MC_TRIALS}, got {m}")));
    }
    let n = rho.n_particles();
    let norm = husimi_norm(n);
    let chunks: Vec<_> = rng::chunks(m).collect();
    let sums: Vec<(f64, f64)> = chunks
        .par_iter()
        .map(|&(c, _, len)| {
            let mut r = rng::stream(seed, "husimi/wehrl_mc", c);
            let mut tuple = DirectionTuple(vec![UnitVector::PLUS_Z; n]);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                for d in tuple.0.iter_mut() {
                    *d = rng::uniform_direction(&mut r);
                }
                let q = rho.expectation(product_coherent_ket(&tuple).amplitudes());
                let v = p_ln_p(q.max(0.0) / norm);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mf = m as f64;
    let mean = s1 / mf;
    let var = ((s2 / mf - mean * mean) * mf / (mf - 1.0)).max(0.0);
    let vol = (4.0 * PI).powi(n as i32);
    Ok(McEstimate { estimate: -vol * mean, stderr: vol * (var / mf).sqrt() })
}

/// JSON entropy report: `{estimate, stderr?, method, grid_L | m, seed?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    pub method: String,
    #[serde(rename = "grid_L", skip_serializing_if = "Option::is_none", default)]
    pub grid_l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Quadrature for N <= 3 at the default order, Monte Carlo beyond.
pub fn wehrl_auto(rho: &DensityMatrix, m: u64, seed: u64) -> Result<EntropyReport> {
    match default_grid_order(rho.n_particles()) {
        Some(l) => {
            let grid = ProductGrid::uniform(rho.n_particles(), l)?;
            Ok(EntropyReport {
                estimate: wehrl_quadrature(rho, &grid)?,
                stderr: None,
                method: "quadrature".into(),
                grid_l: Some(l),
                m: None,
                seed: None,
            })
        }
        None => {
            let est = wehrl_mc(rho, m, seed)?;
            Ok(EntropyReport {
                estimate: est.estimate,
                stderr: Some(est.stderr),
                method: "monte_carlo".into(),
                grid_l: None,
                m: Some(m),
                seed: Some(seed),
            })
        }
    }
}
