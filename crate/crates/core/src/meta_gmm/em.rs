//! Full-covariance Gaussian mixture fitted by expectation-maximization.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative change in log-likelihood below which a run has converged.
    pub tol: f64,
    /// Added to every covariance diagonal after each M-step.
    pub ridge: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 5,
            max_iter: 500,
            tol: 1e-6,
            ridge: 1e-6,
        }
    }
}

/// Mixture parameters; covariances are `d × d` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn prepare(&self) -> Result<PreparedMixture> {
        PreparedMixture::new(self)
    }
}

/// Mixture with Cholesky-factored covariances, ready for density queries.
#[derive(Debug, Clone)]
pub struct PreparedMixture {
    dim: usize,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Lower Cholesky factors, `d × d` row-major.
    chol_l: Vec<Vec<f64>>,
    log_norm: Vec<f64>,
}

impl PreparedMixture {
    fn new(params: &MixtureParams) -> Result<Self> {
        let d = params.dim();
        let mut chol_l = Vec::with_capacity(params.k());
        let mut log_norm = Vec::with_capacity(params.k());
        for (k, cov) in params.covariances.iter().enumerate() {
            let m = DMatrix::from_row_slice(d, d, cov);
            let chol = m.cholesky().ok_or(Error::SingularCovariance(k))?;
            let l = chol.unpack();
            let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            if !log_det.is_finite() {
                return Err(Error::SingularCovariance(k));
            }
            log_norm.push(-0.5 * (d as f64 * LN_2PI + log_det));
            chol_l.push((0..d * d).map(|i| l[(i / d, i % d)]).collect());
        }
        Ok(Self {
            dim: d,
            log_weights: params.weights.iter().map(|w| w.ln()).collect(),
            means: params.means.clone(),
            chol_l,
            log_norm,
        })
    }

    /// `ln π_k + ln N(x | μ_k, Σ_k)` for every component.
    pub fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut z = [0.0f64; 32];
        let mut heap = Vec::new();
        let z: &mut [f64] = if d <= z.len() {
            &mut z[..d]
        } else {
            heap.resize(d, 0.0);
            &mut heap
        };
        for k in 0..self.means.len() {
            let (l, mu) = (&self.chol_l[k], &self.means[k]);
            // forward substitution L z = x - mu
            let mut q = 0.0;
            for a in 0..d {
                let mut v = x[a] - mu[a];
                for b in 0..a {
                    v -= l[a * d + b] * z[b];
                }
                z[a] = v / l[a * d + a];
                q += z[a] * z[a];
            }
            out[k] = self.log_weights[k] + self.log_norm[k] - 0.5 * q;
        }
    }

    /// `ln Σ_k π_k N(x | μ_k, Σ_k)`.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.means.len()];
        self.component_log_densities(x, &mut buf);
        log_sum_exp(&buf)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: MixtureParams,
    pub loglik: f64,
    /// Log-likelihood after every E-step of the winning restart.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
}

/// Bayesian information criterion for a full-covariance mixture; lower is better.
pub fn bic(loglik: f64, k: usize, d: usize, n: usize) -> f64 {
    free_parameters(k, d) as f64 * (n as f64).ln() - 2.0 * loglik
}

pub fn free_parameters(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

/// Fits a `k`-component mixture to the `n × d` row-major `data`, keeping the
/// restart with the highest final log-likelihood (lowest index on ties).
pub fn em_fit(data: &[f64], n: usize, d: usize, k: usize, cfg: &EmConfig) -> Result<EmFit> {
    if d == 0 {
        return Err(Error::EmptyFeatureSet);
    }
    if data.len() != n * d {
        return Err(Error::LengthMismatch(data.len(), n * d));
    }
    if k == 0 {
        return Err(Error::InvalidParam("component count must be >= 1".into()));
    }
    if n < k.max(1) || n < 2 {
        return Err(Error::TooFewSamples {
            needed: k.max(2),
            got: n,
        });
    }
    if cfg.ridge < 0.0 || cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidParam(
            "EM needs ridge >= 0, restarts >= 1, max_iter >= 1".into(),
        ));
    }
    let restarts = if k == 1 { 1 } else { cfg.restarts };
    let runs: Vec<Result<EmFit>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, rng::stream_id(k as u32, r as u32));
            run_once(data, n, d, k, cfg, &mut rng).map(|mut f| {
                f.restart = r;
                f
            })
        })
        .collect();

    let mut best: Option<EmFit> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::SingularCovariance(0)))
}

fn run_once(
    data: &[f64],
    n: usize,
    d: usize,
    k: usize,
    cfg: &EmConfig,
    rng: &mut rng::Rng,
) -> Result<EmFit> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let global_mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| row(i)[j]).sum::<f64>() / n as f64)
        .collect();
    let ones = vec![1.0; n];
    let global_cov = weighted_covariance(data, n, d, &ones, &global_mean, n as f64, cfg.ridge);

    let mut params = MixtureParams {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(data, n, d, k, rng),
        covariances: vec![global_cov.clone(); k],
    };

    let mut resp = vec![0.0; n * k];
    let mut lp = vec![0.0; k];
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let prepared = params.prepare()?;
        let mut ll = 0.0;
        for i in 0..n {
            prepared.component_log_densities(row(i), &mut lp);
            let lse = log_sum_exp(&lp);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (lp[c] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || trace.len() > cfg.max_iter {
            break;
        }

        // M-step
        for c in 0..k {
            let w: Vec<f64> = (0..n).map(|i| resp[i * k + c]).collect();
            let nk: f64 = w.iter().sum();
            if nk <= 1e-12 {
                // collapsed component: keep its location, drop its weight
                params.weights[c] = 0.0;
                continue;
            }
            let mean: Vec<f64> = (0..d)
                .map(|j| (0..n).map(|i| w[i] * row(i)[j]).sum::<f64>() / nk)
                .collect();
            params.covariances[c] = weighted_covariance(data, n, d, &w, &mean, nk, cfg.ridge);
            params.means[c] = mean;
            params.weights[c] = nk / n as f64;
        }
    }
    let loglik = *trace.last().expect("at least one E-step");
    Ok(EmFit {
        params,
        loglik,
        iterations: trace.len(),
        trace,
        converged,
        restart: 0,
    })
}

fn weighted_covariance(
    data: &[f64],
    n: usize,
    d: usize,
    w: &[f64],
    mean: &[f64],
    total: f64,
    ridge: f64,
) -> Vec<f64> {
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let x = &data[i * d..(i + 1) * d];
        for a in 0..d {
            let da = w[i] * (x[a] - mean[a]);
            for b in a..d {
                cov[a * d + b] += da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / total;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
        cov[a * d + a] += ridge;
    }
    cov
}

/// k-means++ seeding: first centre uniform, then proportional to the
/// squared distance to the nearest chosen centre.
fn kmeans_pp(data: &[f64], n: usize, d: usize, k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut centres = vec![row(rng.gen_range(0..n)).to_vec()];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &di) in dist.iter().enumerate() {
                if target < di {
                    idx = i;
                    break;
                }
                target -= di;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(row(i), &c));
        }
        centres.push(c);
    }
    centres
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
