//! Goodness-of-fit tests: Pearson chi-square and Kolmogorov–Smirnov.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// What to do with bins whose expected count is below [`MIN_EXPECTED`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseBins {
    Reject,
    /// Pool all sparse bins into one; if the pool is still sparse, fold it into
    /// the smallest adequate bin.
    Pool,
}

/// Pearson chi-square of `observed` against `expected` counts, `dof = bins - 1`.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], sparse: SparseBins) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch { expected: expected.len(), actual: observed.len() });
    }
    let (obs, exp) = match sparse {
        SparseBins::Reject => {
            if let Some((bin, &e)) =
                expected.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).filter(|(_, e)| **e < MIN_EXPECTED)
            {
                return Err(Error::UnderfilledBins { bin, min_expected: e, threshold: MIN_EXPECTED });
            }
            (observed.iter().map(|&o| o as f64).collect::<Vec<_>>(), expected.to_vec())
        }
        SparseBins::Pool => pool_sparse(observed, expected)?,
    };
    if obs.len() < 2 {
        return Err(Error::InvalidParameter("chi-square test needs at least two bins".into()));
    }
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = obs.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p_value = dist.sf(statistic).clamp(0.0, 1.0);
    Ok(ChiSquareResult { statistic, dof, p_value })
}

fn pool_sparse(observed: &[u64], expected: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < MIN_EXPECTED {
            po += o as f64;
            pe += e;
        } else {
            obs.push(o as f64);
            exp.push(e);
        }
    }
    if pe >= MIN_EXPECTED {
        obs.push(po);
        exp.push(pe);
    } else if pe > 0.0 || po > 0.0 {
        let Some(i) = (0..exp.len()).min_by(|&a, &b| exp[a].total_cmp(&exp[b])) else {
            return Err(Error::UnderfilledBins { bin: 0, min_expected: pe, threshold: MIN_EXPECTED });
        };
        obs[i] += po;
        exp[i] += pe;
    }
    Ok((obs, exp))
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small lambda.
        let y = -PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (y * j * j).exp();
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with the effective-size correction of Stephens.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `samples` against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n), n: xs.len() })
}

/// Two-sample KS test; ties are stepped through together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n_eff), n: xs.len() + ys.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kolmogorov_reference_values() {
        // Tabulated critical values of the limiting distribution.
        assert_abs_diff_eq!(kolmogorov_sf(1.358), 0.05, epsilon = 2e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.628), 0.01, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.224), 0.10, epsilon = 3e-4);
        // the two series agree where they switch
        let lo = {
            let y = -PI * PI / (8.0 * 1.18 * 1.18);
            1.0 - (2.0 * PI).sqrt() / 1.18 * (1..=20).map(|k| (y * ((2 * k - 1) as f64).powi(2)).exp()).sum::<f64>()
        };
        let hi = 2.0
            * (1..=100)
                .map(|k| {
                    let t = (-2.0 * (k * k) as f64 * 1.18 * 1.18).exp();
                    if k % 2 == 1 {
                        t
                    } else {
                        -t
                    }
                })
                .sum::<f64>();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-12);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-20);
    }

    #[test]
    fn chi_square_known_value() {
        let obs = [10u64, 20, 30];
        let exp = [20.0, 20.0, 20.0];
        let r = chi_square_gof(&obs, &exp, SparseBins::Reject).unwrap();
        assert_abs_diff_eq!(r.statistic, 10.0, epsilon = 1e-12);
        assert_eq!(r.dof, 2);
        assert_abs_diff_eq!(r.p_value, (-5.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn sparse_bins() {
        let obs = [3u64, 50, 47];
        let exp = [2.0, 49.0, 49.0];
        assert!(matches!(chi_square_gof(&obs, &exp, SparseBins::Reject), Err(Error::UnderfilledBins { bin: 0, .. })));
        let r = chi_square_gof(&obs, &exp, SparseBins::Pool).unwrap();
        assert_eq!(r.dof, 1);
        let obs = [3u64, 4, 50, 43];
        let exp = [3.0, 3.0, 47.0, 47.0];
        assert_eq!(chi_square_gof(&obs, &exp, SparseBins::Pool).unwrap().dof, 2);
    }

    #[test]
    fn ks_uniform_sample() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let r = ks_one_sample(&xs, |x| x).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.5 / n as f64, epsilon = 1e-12);
        assert!(r.p_value > 0.999);
        let shifted: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_one_sample(&shifted, |x| x).unwrap().p_value < 1e-6);
        assert!(ks_one_sample(&[], |x| x).is_err());
    }

    #[test]
    fn ks_two_sample_statistic() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.25, 0.35, 0.45, 0.55];
        // brute force over all evaluation points
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0, f64::max);
        let r = ks_two_sample(&a, &b).unwrap();
        assert_abs_diff_eq!(r.statistic, brute, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }
}
