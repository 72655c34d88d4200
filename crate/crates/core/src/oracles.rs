//! Independent reference prices: Black–Scholes put, binomial American put and
//! Monte Carlo for the European basket.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::BasketSpec;
use crate::spectral::eigendecompose;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// European put under Black–Scholes.
pub fn bs_put(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && k > 0.0 && sigma > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!(
            "bs_put needs positive S, K, sigma, T (got {s}, {k}, {sigma}, {t})"
        )));
    }
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    let d2 = d1 - sd;
    Ok(k * (-r * t).exp() * normal_cdf(-d2) - s * normal_cdf(-d1))
}

/// Cox–Ross–Rubinstein tree with early exercise at every node.
pub fn crr_american_put(s: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize) -> f64 {
    assert!(steps >= 1);
    let dt = t / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let growth = (r * dt).exp();
    let p = (growth - d) / (u - d);
    let disc = 1.0 / growth;
    let price = |n: usize, j: usize| s * u.powi(j as i32) * d.powi((n - j) as i32);
    let mut v: Vec<f64> = (0..=steps).map(|j| (k - price(steps, j)).max(0.0)).collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = cont.max(k - price(n, j));
        }
    }
    v[0]
}

/// Square root `L` of the covariance used to correlate the normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    /// `Q sqrt(Lambda)` from the eigendecomposition.
    Spectral,
    /// Cholesky with diagonal pivoting (works for semidefinite matrices).
    PivotedCholesky,
}

const BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub stderr: f64,
}

pub fn mc_european_basket(spec: &BasketSpec, paths: usize, seed: u64) -> Result<McEstimate> {
    mc_european_basket_with(spec, paths, seed, Factor::Spectral)
}

pub fn mc_european_basket_with(spec: &BasketSpec, paths: usize, seed: u64, factor: Factor) -> Result<McEstimate> {
    assert!(paths >= 1);
    let d = spec.dim();
    let cov = spec.covariance();
    let l = match factor {
        Factor::Spectral => {
            let s = eigendecompose(&cov)?;
            (0..d)
                .map(|i| (0..d).map(|k| s.vectors[i][k] * s.eigenvalues[k].sqrt()).collect())
                .collect()
        }
        Factor::PivotedCholesky => pivoted_cholesky(&cov),
    };
    let t = spec.maturity;
    let sqrt_t = t.sqrt();
    let log_mean: Vec<f64> = (0..d)
        .map(|i| spec.spot[i].ln() + (spec.rate - 0.5 * spec.vols[i] * spec.vols[i]) * t)
        .collect();

    let batches = paths.div_ceil(BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(paths - b * BATCH);
            let mut z = vec![0.0; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                let basket: f64 = (0..d)
                    .map(|i| {
                        let e: f64 = l[i].iter().zip(&z).map(|(a, b): (&f64, &f64)| a * b).sum();
                        spec.weights[i] * (log_mean[i] + sqrt_t * e).exp()
                    })
                    .sum();
                let x = (spec.strike - basket).max(0.0);
                s1 += x;
                s2 += x * x;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = pairwise_sum(&sums);
    let n = paths as f64;
    let disc = (-spec.rate * t).exp();
    let mean = s1 / n;
    let var = if paths > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { price: disc * mean, stderr: disc * (var / n).sqrt() })
}

fn pairwise_sum(v: &[(f64, f64)]) -> (f64, f64) {
    match v.len() {
        0 => (0.0, 0.0),
        1 => v[0],
        n => {
            let (a, b) = (pairwise_sum(&v[..n / 2]), pairwise_sum(&v[n / 2..]));
            (a.0 + b.0, a.1 + b.1)
        }
    }
}

/// Lower-triangular-up-to-permutation factor `L` with `L L^T = a`.
fn pivoted_cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let scale = (0..d).fold(0.0_f64, |m, i| m.max(a[i][i]));
    let mut residual: Vec<Vec<f64>> = a.to_vec();
    let mut l = vec![vec![0.0; d]; d];
    let mut used = vec![false; d];
    for col in 0..d {
        let Some(p) = (0..d)
            .filter(|&i| !used[i])
            .max_by(|&i, &j| residual[i][i].total_cmp(&residual[j][j]))
        else {
            break;
        };
        let pivot = residual[p][p];
        if pivot <= 1e-14 * scale {
            break;
        }
        used[p] = true;
        let root = pivot.sqrt();
        for i in 0..d {
            l[i][col] = if used[i] && i != p { 0.0 } else { residual[i][p] / root };
        }
        for i in 0..d {
            for j in 0..d {
                residual[i][j] -= l[i][col] * l[j][col];
            }
        }
    }
    l
}
