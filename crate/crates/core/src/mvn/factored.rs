use nalgebra::{DMatrix, DVector};

use super::em::MonotoneRows;
use super::{checked_cholesky, symmetrize, MvnParams};
use crate::error::{Error, Result};

/// Closed-form MAR maximum-likelihood estimate for monotone data.
///
/// Factors the likelihood into the baseline marginal and the sequence of
/// regressions of visit `t` on visits `0..t` among subjects observed at `t`.
/// Agrees with the EM fixed point, without iterating.
pub fn monotone_mle(rows: &[Vec<Option<f64>>]) -> Result<MvnParams> {
    factored_mle(&MonotoneRows::from_rows(rows)?, |_| true)
}

pub(crate) fn factored_mle(data: &MonotoneRows, include: impl Fn(usize) -> bool) -> Result<MvnParams> {
    let j = data.j;
    let members: Vec<usize> = (0..data.n()).filter(|&i| include(i)).collect();
    let completers = members.iter().filter(|&&i| data.n_obs[i] == j).count();
    if completers < j + 1 {
        return Err(Error::RankDeficient {
            completers,
            required: j + 1,
        });
    }
    let mut mean = DVector::<f64>::zeros(j);
    let mut cov = DMatrix::<f64>::zeros(j, j);

    let n0 = members.len() as f64;
    mean[0] = members.iter().map(|&i| data.row(i)[0]).sum::<f64>() / n0;
    cov[(0, 0)] = members.iter().map(|&i| (data.row(i)[0] - mean[0]).powi(2)).sum::<f64>() / n0;

    for t in 1..j {
        let p = t + 1;
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        let mut count = 0usize;
        let mut x = vec![0.0; p];
        for &i in &members {
            if data.n_obs[i] <= t {
                continue;
            }
            let r = data.row(i);
            x[0] = 1.0;
            x[1..].copy_from_slice(&r[..t]);
            for a in 0..p {
                xty[a] += x[a] * r[t];
                for b in 0..p {
                    xtx[(a, b)] += x[a] * x[b];
                }
            }
            count += 1;
        }
        let chol = checked_cholesky(&xtx, "regression design").map_err(|_| Error::RankDeficient {
            completers: count,
            required: p + 1,
        })?;
        let beta = chol.solve(&xty);
        let mut rss = 0.0;
        for &i in &members {
            if data.n_obs[i] <= t {
                continue;
            }
            let r = data.row(i);
            let fit = beta[0] + (0..t).map(|c| beta[c + 1] * r[c]).sum::<f64>();
            rss += (r[t] - fit).powi(2);
        }
        let sigma2 = rss / count as f64;
        let slopes = beta.rows(1, t).into_owned();
        let prev = cov.view((0, 0), (t, t)).into_owned();
        mean[t] = beta[0] + slopes.dot(&mean.rows(0, t));
        let cross = &prev * &slopes;
        for c in 0..t {
            cov[(t, c)] = cross[c];
            cov[(c, t)] = cross[c];
        }
        cov[(t, t)] = sigma2 + slopes.dot(&cross);
    }
    symmetrize(&mut cov);
    MvnParams::new(mean, cov)
}
