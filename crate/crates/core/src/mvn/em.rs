use nalgebra::{DMatrix, DVector};

use super::{checked_cholesky, symmetrize, ConditionalMap, MvnParams};
use crate::error::{Error, Result};

/// Flattened monotone rows: observed prefix lengths plus values, with
/// unobserved slots holding scratch values that callers overwrite.
#[derive(Debug, Clone)]
pub(crate) struct MonotoneRows {
    pub j: usize,
    pub n_obs: Vec<usize>,
    pub values: Vec<f64>,
}

impl MonotoneRows {
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let j = rows.first().map_or(0, Vec::len);
        if j == 0 {
            return Err(Error::DimensionMismatch("no subjects or no visits".into()));
        }
        let mut n_obs = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * j);
        for r in rows {
            if r.len() != j {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            let d = r.iter().take_while(|c| c.is_some()).count();
            if d == 0 || r[d..].iter().any(Option::is_some) {
                return Err(Error::DimensionMismatch(
                    "rows must have an observed baseline and monotone missingness".into(),
                ));
            }
            n_obs.push(d);
            values.extend(r.iter().map(|c| c.unwrap_or(0.0)));
        }
        Ok(MonotoneRows { j, n_obs, values })
    }

    pub fn n(&self) -> usize {
        self.n_obs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.j..(i + 1) * self.j]
    }

    pub fn n_complete(&self) -> usize {
        self.n_obs.iter().filter(|&&d| d == self.j).count()
    }

    pub fn has_missing(&self) -> bool {
        self.n_obs.iter().any(|&d| d < self.j)
    }

    pub fn require_full_rank(&self) -> Result<()> {
        let c = self.n_complete();
        if c < self.j + 1 {
            return Err(Error::RankDeficient {
                completers: c,
                required: self.j + 1,
            });
        }
        Ok(())
    }

    /// Mean and 1/n covariance of the completers.
    pub fn completer_moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let j = self.j;
        let idx: Vec<usize> = (0..self.n()).filter(|&i| self.n_obs[i] == j).collect();
        let nc = idx.len() as f64;
        let mut mean = DVector::zeros(j);
        for &i in &idx {
            for t in 0..j {
                mean[t] += self.row(i)[t];
            }
        }
        mean /= nc;
        let mut cov = DMatrix::zeros(j, j);
        for &i in &idx {
            let r = self.row(i);
            for a in 0..j {
                for b in 0..=a {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..j {
            for b in 0..a {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        cov /= nc;
        (mean, cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Stop when the relative change of the log-likelihood falls below this.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            rel_tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: MvnParams,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `params` is then the last iterate.
    pub converged: bool,
}

/// Observed-data log-likelihood under MAR for monotone rows.
pub fn observed_loglik(rows: &[Vec<Option<f64>>], params: &MvnParams) -> Result<f64> {
    loglik(&MonotoneRows::from_rows(rows)?, params)
}

pub(crate) fn loglik(data: &MonotoneRows, params: &MvnParams) -> Result<f64> {
    let j = data.j;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for d in 1..=j {
        let members: Vec<usize> = (0..data.n()).filter(|&i| data.n_obs[i] == d).collect();
        if members.is_empty() {
            continue;
        }
        let s_oo = params.cov.view((0, 0), (d, d)).into_owned();
        let chol = checked_cholesky(&s_oo, "observed block")?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(d).map(|v| v.ln()).sum::<f64>();
        for &i in &members {
            let r = data.row(i);
            let resid = DVector::from_fn(d, |t, _| r[t] - params.mean[t]);
            let q = resid.dot(&chol.solve(&resid));
            total += -0.5 * (d as f64 * ln2pi + logdet + q);
        }
    }
    Ok(total)
}

/// MAR maximum-likelihood estimate of the mean and covariance by EM.
///
/// Starts from the completers' moments; with complete data the result is
/// the sample mean and the divisor-n sample covariance.
pub fn em_mle_monotone(rows: &[Vec<Option<f64>>], config: &EmConfig) -> Result<EmFit> {
    let data = MonotoneRows::from_rows(rows)?;
    em_fit(&data, config)
}

pub(crate) fn em_fit(data: &MonotoneRows, config: &EmConfig) -> Result<EmFit> {
    data.require_full_rank()?;
    let j = data.j;
    let n = data.n() as f64;
    let (mean0, cov0) = data.completer_moments();
    let mut params = MvnParams::new(mean0, cov0)?;
    let initial_loglik = loglik(data, &params)?;
    if !data.has_missing() {
        return Ok(EmFit {
            params,
            loglik: initial_loglik,
            initial_loglik,
            iterations: 0,
            converged: true,
        });
    }
    let mut ll = initial_loglik;
    let mut filled = vec![0.0; j];
    for iter in 1..=config.max_iter {
        let maps: Vec<Option<ConditionalMap>> = (0..j)
            .map(|d| {
                if d == 0 || !data.n_obs.contains(&d) {
                    Ok(None)
                } else {
                    ConditionalMap::new(&params, d).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut t1 = DVector::<f64>::zeros(j);
        let mut t2 = DMatrix::<f64>::zeros(j, j);
        for i in 0..data.n() {
            let d = data.n_obs[i];
            let r = data.row(i);
            filled.copy_from_slice(r);
            if let Some(map) = maps.get(d).and_then(Option::as_ref) {
                map.mean_into(&r[..d], &mut filled[d..]);
                for a in 0..j - d {
                    for b in 0..=a {
                        t2[(d + a, d + b)] += map.cov[(a, b)];
                    }
                }
            }
            for a in 0..j {
                t1[a] += filled[a];
                for b in 0..=a {
                    t2[(a, b)] += filled[a] * filled[b];
                }
            }
        }
        let mean = t1 / n;
        let mut cov = DMatrix::from_fn(j, j, |a, b| {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            t2[(hi, lo)] / n - mean[a] * mean[b]
        });
        symmetrize(&mut cov);
        params = MvnParams::new(mean, cov)?;
        let new_ll = loglik(data, &params)?;
        let rel = (new_ll - ll).abs() / ll.abs().max(1e-300);
        ll = new_ll;
        if rel < config.rel_tol {
            return Ok(EmFit {
                params,
                loglik: ll,
                initial_loglik,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(EmFit {
        params,
        loglik: ll,
        initial_loglik,
        iterations: config.max_iter,
        converged: false,
    })
}
