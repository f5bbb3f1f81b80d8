//! Ordinary Kriging over phenotypes with the isotropic Manhattan kernel
//! `exp(-theta * |x - x'|_1)`.
//!
//! The single kernel parameter is fitted by maximizing the concentrated
//! log-likelihood on a log10 grid followed by golden-section refinement.
//! A nugget is added to the correlation diagonal, starting at 1e-8 and
//! escalated tenfold until the Cholesky factorization succeeds (at most
//! 1e-2).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::phd::{l1, Phenotype};

pub const NUGGET_START: f64 = 1e-8;
pub const NUGGET_MAX: f64 = 1e-2;
const GRID_POINTS: usize = 40;
const GOLDEN_ITERATIONS: usize = 30;

/// Search interval for theta, on the log10 scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBounds {
    pub log10_lower: f64,
    pub log10_upper: f64,
}

impl Default for ThetaBounds {
    fn default() -> Self {
        ThetaBounds {
            log10_lower: -6.0,
            log10_upper: 3.0,
        }
    }
}

/// In-place Cholesky factorization of a row-major symmetric matrix. Only
/// the lower triangle is read and written. Returns false if the matrix is
/// not numerically positive definite.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L x = b` in place.
fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place.
fn solve_upper_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn solve_chol(l: &[f64], n: usize, b: &mut [f64]) {
    solve_lower(l, n, b);
    solve_upper_t(l, n, b);
}

/// Pairwise Manhattan distances, row-major `n x n`.
fn distance_matrix(phenos: &[Phenotype]) -> Vec<f64> {
    let n = phenos.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = l1(phenos[i].as_slice(), phenos[j].as_slice());
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Everything derived from one theta and the data.
struct Evaluation {
    nugget: f64,
    chol: Vec<f64>,
    mu_hat: f64,
    sigma2_hat: f64,
    alpha: Vec<f64>,
    log_likelihood: f64,
}

fn evaluate(dist: &[f64], n: usize, y: &[f64], theta: f64, nugget_start: f64) -> Option<Evaluation> {
    let mut nugget = nugget_start;
    let chol = loop {
        let mut r: Vec<f64> = dist.iter().map(|&d| (-theta * d).exp()).collect();
        for i in 0..n {
            r[i * n + i] = 1.0 + nugget;
        }
        if cholesky(&mut r, n) {
            break r;
        }
        nugget *= 10.0;
        if nugget > NUGGET_MAX * (1.0 + 1e-9) {
            return None;
        }
    };
    let mut r_inv_one = vec![1.0; n];
    solve_chol(&chol, n, &mut r_inv_one);
    let mut r_inv_y = y.to_vec();
    solve_chol(&chol, n, &mut r_inv_y);
    let mu_hat = r_inv_y.iter().sum::<f64>() / r_inv_one.iter().sum::<f64>();
    let alpha: Vec<f64> = r_inv_y
        .iter()
        .zip(&r_inv_one)
        .map(|(a, b)| a - mu_hat * b)
        .collect();
    let sigma2_hat = y
        .iter()
        .zip(&alpha)
        .map(|(yi, ai)| (yi - mu_hat) * ai)
        .sum::<f64>()
        .max(0.0)
        / n as f64;
    let log_det: f64 = (0..n).map(|i| 2.0 * chol[i * n + i].ln()).sum();
    let log_likelihood =
        -(n as f64) / 2.0 * sigma2_hat.max(f64::MIN_POSITIVE).ln() - 0.5 * log_det;
    Some(Evaluation {
        nugget,
        chol,
        mu_hat,
        sigma2_hat,
        alpha,
        log_likelihood,
    })
}

fn check_training(phenos: &[Phenotype], y: &[f64]) -> Result<()> {
    if phenos.len() < 2 {
        return Err(Error::ModelInput("need at least two training points".into()));
    }
    if phenos.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: phenos.len(),
            actual: y.len(),
        });
    }
    let len = phenos[0].len();
    if len == 0 {
        return Err(Error::ModelInput("phenotypes must not be empty".into()));
    }
    if let Some(p) = phenos.iter().find(|p| p.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: p.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelInput("training fitnesses must be finite".into()));
    }
    Ok(())
}

/// Concentrated log-likelihood `-(n/2) ln sigma2(theta) - (1/2) ln det R`
/// of the data at a fixed theta and nugget.
pub fn concentrated_log_likelihood(
    phenos: &[Phenotype],
    y: &[f64],
    theta: f64,
    nugget: f64,
) -> Result<f64> {
    check_training(phenos, y)?;
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta(theta));
    }
    let n = phenos.len();
    let dist = distance_matrix(phenos);
    let e = evaluate(&dist, n, y, theta, nugget).ok_or(Error::FitFailure { nugget })?;
    // `evaluate` escalates on failure; the caller asked for this nugget.
    if e.nugget != nugget {
        return Err(Error::FitFailure { nugget });
    }
    Ok(e.log_likelihood)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub theta: f64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub nugget: f64,
    pub training_size: usize,
    pub log_likelihood: f64,
}

/// A fitted Kriging model. Immutable once built.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    theta: f64,
    mu_hat: f64,
    sigma2_hat: f64,
    nugget: f64,
    log_likelihood: f64,
    n: usize,
    dim: usize,
    /// Training phenotypes, row-major `n x dim`.
    training: Vec<f64>,
    fitnesses: Vec<f64>,
    /// Lower Cholesky factor of `R + nugget I`, row-major.
    chol: Vec<f64>,
    /// `R^-1 (y - 1 mu_hat)`.
    alpha: Vec<f64>,
}

impl KrigingModel {
    /// Fits theta by maximum likelihood within `bounds`.
    pub fn fit(phenos: &[Phenotype], y: &[f64], bounds: ThetaBounds) -> Result<Self> {
        check_training(phenos, y)?;
        if !(bounds.log10_lower < bounds.log10_upper) {
            return Err(Error::InvalidConfig("empty theta search interval".into()));
        }
        let n = phenos.len();
        let dist = distance_matrix(phenos);
        let score = |log_theta: f64| -> Option<Evaluation> {
            evaluate(&dist, n, y, 10f64.powf(log_theta), NUGGET_START)
        };
        let ll = |e: &Option<Evaluation>| e.as_ref().map_or(f64::NEG_INFINITY, |e| e.log_likelihood);

        let step = (bounds.log10_upper - bounds.log10_lower) / (GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|i| bounds.log10_lower + step * i as f64)
            .collect();
        let mut best_i = None;
        let mut best_ll = f64::NEG_INFINITY;
        for (i, &g) in grid.iter().enumerate() {
            let v = ll(&score(g));
            if v > best_ll {
                best_ll = v;
                best_i = Some(i);
            }
        }
        let best_i = best_i.ok_or(Error::FitFailure { nugget: NUGGET_MAX })?;

        // Golden-section search between the grid neighbours of the best point.
        let mut lo = grid[best_i.saturating_sub(1)];
        let mut hi = grid[(best_i + 1).min(GRID_POINTS - 1)];
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = ll(&score(x1));
        let mut f2 = ll(&score(x2));
        for _ in 0..GOLDEN_ITERATIONS {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = ll(&score(x1));
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = ll(&score(x2));
            }
        }
        let (refined, refined_ll) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        let log_theta = if refined_ll > best_ll {
            refined
        } else {
            grid[best_i]
        };
        let theta = 10f64.powf(log_theta);
        let e = score(log_theta).ok_or(Error::FitFailure { nugget: NUGGET_MAX })?;
        Ok(Self::from_evaluation(phenos, y, theta, e))
    }

    /// Builds the model at a fixed theta (no likelihood search).
    pub fn fit_with_theta(phenos: &[Phenotype], y: &[f64], theta: f64) -> Result<Self> {
        check_training(phenos, y)?;
        if !(theta > 0.0) {
            return Err(Error::NonPositiveTheta(theta));
        }
        let n = phenos.len();
        let dist = distance_matrix(phenos);
        let e = evaluate(&dist, n, y, theta, NUGGET_START).ok_or(Error::FitFailure {
            nugget: NUGGET_MAX,
        })?;
        Ok(Self::from_evaluation(phenos, y, theta, e))
    }

    fn from_evaluation(phenos: &[Phenotype], y: &[f64], theta: f64, e: Evaluation) -> Self {
        let dim = phenos[0].len();
        KrigingModel {
            theta,
            mu_hat: e.mu_hat,
            sigma2_hat: e.sigma2_hat,
            nugget: e.nugget,
            log_likelihood: e.log_likelihood,
            n: phenos.len(),
            dim,
            training: phenos.iter().flat_map(|p| p.0.iter().copied()).collect(),
            fitnesses: y.to_vec(),
            chol: e.chol,
            alpha: e.alpha,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn training_size(&self) -> usize {
        self.n
    }

    pub fn phenotype_len(&self) -> usize {
        self.dim
    }

    pub fn fitnesses(&self) -> &[f64] {
        &self.fitnesses
    }

    pub fn diagnostics(&self) -> ModelDiagnostics {
        ModelDiagnostics {
            theta: self.theta,
            mu_hat: self.mu_hat,
            sigma2_hat: self.sigma2_hat,
            nugget: self.nugget,
            training_size: self.n,
            log_likelihood: self.log_likelihood,
        }
    }

    pub fn predict(&self, p: &Phenotype) -> Result<Prediction> {
        if p.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                actual: p.len(),
            });
        }
        let mut r: Vec<f64> = self
            .training
            .chunks_exact(self.dim)
            .map(|row| (-self.theta * l1(row, p.as_slice())).exp())
            .collect();
        let mean = self.mu_hat + r.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        solve_lower(&self.chol, self.n, &mut r);
        let explained: f64 = r.iter().map(|w| w * w).sum();
        let variance = (self.sigma2_hat * (1.0 - explained)).max(0.0);
        Ok(Prediction { mean, variance })
    }

    /// Expected improvement below `y_best` (minimization).
    pub fn expected_improvement(&self, p: &Phenotype, y_best: f64) -> Result<f64> {
        let pred = self.predict(p)?;
        Ok(expected_improvement(pred.mean, pred.variance.sqrt(), y_best))
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `(y_best - mean) Phi(z) + sd phi(z)` with `z = (y_best - mean) / sd`;
/// the plain improvement when `sd` is zero.
pub fn expected_improvement(mean: f64, sd: f64, y_best: f64) -> f64 {
    let improvement = y_best - mean;
    if !(sd > 0.0) {
        return improvement.max(0.0);
    }
    let z = improvement / sd;
    (improvement * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}
