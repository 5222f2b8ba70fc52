//! Empirical λ from the growth of the normalized free energy, by exact
//! likelihood quadrature over a uniform box prior.
//!
//! `E[F_n⁰] = λ log n + O(1)` when the multiplicity is 1, so λ̂ is the least
//! squares slope of the replicate mean of `F_n⁰` against `log n`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelspec::ModelSpec;
use crate::par::{self, Exec};
use crate::scalar::{ratio_to_f64, Rational, Q};

pub const MAX_DIM: usize = 3;
pub const DEFAULT_TOLERANCE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FEnergyConfig {
    /// Half-width of the box around θ*, before any halving for positivity.
    pub half_width: Q,
    pub grid_points_per_dim: usize,
    pub n_schedule: Vec<usize>,
    pub replicates: usize,
    pub rng_seed: u64,
    pub tolerance: f64,
    pub exec: Exec,
}

impl Default for FEnergyConfig {
    fn default() -> Self {
        FEnergyConfig {
            half_width: Q(Rational::new(1.into(), 4.into())),
            grid_points_per_dim: 64,
            n_schedule: vec![50, 87, 152, 264, 460, 800],
            replicates: 200,
            rng_seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            exec: Exec::default(),
        }
    }
}

/// `log p(x | θ_g)` on the midpoint grid, one row per grid point.
#[derive(Clone, Debug)]
pub struct LikelihoodGrid {
    pub half_width: Rational,
    pub points: usize,
    pub outcomes: usize,
    pub log_p: Vec<f64>,
}

impl LikelihoodGrid {
    pub fn build(spec: &ModelSpec, cfg: &FEnergyConfig) -> Result<Self> {
        let d = spec.dim();
        if d > MAX_DIM {
            return Err(Error::DimensionTooHigh(d));
        }
        if d == 0 || cfg.grid_points_per_dim == 0 {
            return Err(Error::InvalidConfig("empty quadrature grid".into()));
        }
        let g = cfg.grid_points_per_dim;
        let points = g.pow(d as u32);
        let k = spec.outcomes.len();
        let star: Vec<f64> = spec.theta_star.iter().map(ratio_to_f64).collect();
        let mut hw = cfg.half_width.0.clone();
        for _ in 0..20 {
            let w = ratio_to_f64(&hw);
            let rows = par::map_range(cfg.exec, points, |idx| {
                let mut theta = vec![0.0; d];
                let mut rem = idx;
                for t in theta.iter_mut().rev() {
                    let j = rem % g;
                    rem /= g;
                    *t = -w + (2.0 * j as f64 + 1.0) * w / g as f64;
                }
                let point: Vec<f64> = theta.iter().zip(&star).map(|(t, s)| t + s).collect();
                spec.prob_exprs
                    .iter()
                    .map(|e| e.evaluate(&point).filter(|p| *p > 0.0).map(f64::ln))
                    .collect::<Option<Vec<f64>>>()
            });
            if rows.iter().all(Option::is_some) {
                let log_p = rows.into_iter().flatten().flatten().collect();
                return Ok(LikelihoodGrid {
                    half_width: hw,
                    points,
                    outcomes: k,
                    log_p,
                });
            }
            hw /= Rational::from_integer(2.into());
        }
        Err(Error::InvalidConfig(
            "no box around θ* keeps every probability positive".into(),
        ))
    }

    /// `F = −log mean_g Π_x p(x|θ_g)^{c_x}` for outcome counts `c`.
    pub fn free_energy(&self, counts: &[u64]) -> Result<f64> {
        let mut ll = Vec::with_capacity(self.points);
        for g in 0..self.points {
            let row = &self.log_p[g * self.outcomes..(g + 1) * self.outcomes];
            let v: f64 = row
                .iter()
                .zip(counts)
                .filter(|(_, &c)| c > 0)
                .map(|(lp, &c)| c as f64 * lp)
                .sum();
            ll.push(v);
        }
        let max = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::GridUnderflow);
        }
        let s: f64 = ll.iter().map(|v| (v - max).exp()).sum();
        Ok(-(max + (s / self.points as f64).ln()))
    }
}

pub fn free_energy(spec: &ModelSpec, data: &[usize], cfg: &FEnergyConfig) -> Result<f64> {
    let grid = LikelihoodGrid::build(spec, cfg)?;
    let mut counts = vec![0u64; spec.outcomes.len()];
    for &x in data {
        let k = counts.len();
        *counts
            .get_mut(x)
            .ok_or(Error::IndexOutOfRange { index: x, dim: k })? += 1;
    }
    grid.free_energy(&counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FEnergyEstimate {
    pub lambda_hat: f64,
    pub std_error: f64,
    /// `(n, mean F_n⁰)`
    pub per_n_means: Vec<(usize, f64)>,
    pub theoretical_lambda: Option<Q>,
    pub tolerance: f64,
    pub verdict: Option<bool>,
    pub half_width: Q,
}

/// Least squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}

fn replicate_seed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn estimate_lambda(
    spec: &ModelSpec,
    cfg: &FEnergyConfig,
    theoretical: Option<Rational>,
) -> Result<FEnergyEstimate> {
    if cfg.n_schedule.len() < 2 || cfg.replicates == 0 {
        return Err(Error::InvalidConfig(
            "need at least two sample sizes and one replicate".into(),
        ));
    }
    let grid = LikelihoodGrid::build(spec, cfg)?;
    let q = spec.true_distribution();
    let qf: Vec<f64> = q.weights.iter().map(ratio_to_f64).collect();
    let support = q.support();
    let sampler = WeightedIndex::new(support.iter().map(|&x| qf[x]))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let reps = cfg.replicates;
    let mut per_n_means = Vec::new();
    for (ni, &n) in cfg.n_schedule.iter().enumerate() {
        let values = par::map_range(cfg.exec, reps, |rep| -> Result<f64> {
            let mut rng = replicate_seed(cfg.rng_seed, (ni * reps + rep) as u64);
            let mut counts = vec![0u64; grid.outcomes];
            for _ in 0..n {
                counts[support[sampler.sample(&mut rng)]] += 1;
            }
            let f = grid.free_energy(&counts)?;
            let log_q: f64 = counts
                .iter()
                .zip(&qf)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, p)| c as f64 * p.ln())
                .sum();
            Ok(f + log_q)
        });
        let mut sum = 0.0;
        for v in values {
            sum += v?;
        }
        per_n_means.push((n, sum / reps as f64));
    }
    let xs: Vec<f64> = per_n_means.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = per_n_means.iter().map(|(_, v)| *v).collect();
    let (lambda_hat, std_error) = ols_slope(&xs, &ys);
    let verdict = theoretical
        .as_ref()
        .map(|t| (lambda_hat - ratio_to_f64(t)).abs() <= cfg.tolerance);
    Ok(FEnergyEstimate {
        lambda_hat,
        std_error,
        per_n_means,
        theoretical_lambda: theoretical.map(Q),
        tolerance: cfg.tolerance,
        verdict,
        half_width: Q(grid.half_width),
    })
}
