use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::em::{em_fit, MonotoneRows};
use super::{checked_cholesky, symmetrize, ConditionalMap, EmConfig, MvnParams};
use crate::data::Arm;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

const MAX_PD_RETRIES: usize = 10;

/// Burn-in and thinning for the data-augmentation chain, in Gibbs sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 200,
            thin: 100,
        }
    }
}

/// One posterior draw of the parameters of both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub index: usize,
    pub reference: MvnParams,
    pub active: MvnParams,
}

impl PosteriorDraw {
    pub fn arm(&self, arm: Arm) -> &MvnParams {
        match arm {
            Arm::Reference => &self.reference,
            Arm::Active => &self.active,
        }
    }
}

/// Gibbs data-augmentation sampler for one arm under MAR.
///
/// Prior: flat on the mean, Jeffreys on the covariance. Each sweep imputes
/// every missing tail from its current conditional normal, then draws
/// `Sigma ~ IW(n - 1, S)` and `mu | Sigma ~ N(ybar, Sigma / n)` from the
/// completed data. Arms without missing values skip augmentation and give
/// exact independent conjugate draws.
pub struct PosteriorSampler {
    data: MonotoneRows,
    config: ChainConfig,
    state: MvnParams,
    rng: StreamRng,
    draws_taken: usize,
    complete_stats: Option<(DVector<f64>, DMatrix<f64>)>,
    patterns: Vec<usize>,
    z: Vec<f64>,
}

impl PosteriorSampler {
    /// Initialise at the EM estimate.
    pub fn new(rows: &[Vec<Option<f64>>], config: ChainConfig, rng: StreamRng) -> Result<Self> {
        let data = MonotoneRows::from_rows(rows)?;
        let em = em_fit(&data, &EmConfig::default())?;
        let j = data.j;
        let complete_stats = (!data.has_missing()).then(|| scatter(&data));
        let mut patterns: Vec<usize> = data.n_obs.iter().copied().filter(|&d| d < j).collect();
        patterns.sort_unstable();
        patterns.dedup();
        Ok(PosteriorSampler {
            data,
            config,
            state: em.params,
            rng,
            draws_taken: 0,
            complete_stats,
            patterns,
            z: vec![0.0; j],
        })
    }

    pub fn config(&self) -> ChainConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Current chain state (the EM estimate before the first draw).
    pub fn state(&self) -> &MvnParams {
        &self.state
    }

    pub fn draws_taken(&self) -> usize {
        self.draws_taken
    }

    /// Advance the chain and return the next retained draw.
    pub fn next_draw(&mut self) -> Result<MvnParams> {
        if let Some((mean, s)) = &self.complete_stats {
            let (mean, s) = (mean.clone(), s.clone());
            self.state = conjugate_draw(&mean, &s, self.data.n(), &mut self.rng)?;
        } else {
            let sweeps = if self.draws_taken == 0 {
                self.config.burn_in.max(1)
            } else {
                self.config.thin.max(1)
            };
            for _ in 0..sweeps {
                self.sweep()?;
            }
        }
        self.draws_taken += 1;
        Ok(self.state.clone())
    }

    fn sweep(&mut self) -> Result<()> {
        let j = self.data.j;
        let mut maps: Vec<Option<ConditionalMap>> = vec![None; j];
        for &d in &self.patterns {
            maps[d] = Some(ConditionalMap::new(&self.state, d)?);
        }
        for i in 0..self.data.n() {
            let d = self.data.n_obs[i];
            if d == j {
                continue;
            }
            let map = maps[d].as_ref().expect("map built for every pattern");
            let m = j - d;
            for zk in &mut self.z[..m] {
                *zk = StandardNormal.sample(&mut self.rng);
            }
            let row = &mut self.data.values[i * j..(i + 1) * j];
            let (obs, mis) = row.split_at_mut(d);
            map.sample_into(obs, &self.z[..m], mis);
        }
        let (mean, s) = scatter(&self.data);
        self.state = conjugate_draw(&mean, &s, self.data.n(), &mut self.rng)?;
        Ok(())
    }
}

/// Mean and scatter matrix `sum (y - ybar)(y - ybar)^T` of all rows as stored.
fn scatter(data: &MonotoneRows) -> (DVector<f64>, DMatrix<f64>) {
    let j = data.j;
    let n = data.n() as f64;
    let mut mean = DVector::zeros(j);
    for i in 0..data.n() {
        for (t, v) in data.row(i).iter().enumerate() {
            mean[t] += v;
        }
    }
    mean /= n;
    let mut s = DMatrix::zeros(j, j);
    let mut dev = vec![0.0; j];
    for i in 0..data.n() {
        for (t, v) in data.row(i).iter().enumerate() {
            dev[t] = v - mean[t];
        }
        for a in 0..j {
            for b in 0..=a {
                s[(a, b)] += dev[a] * dev[b];
            }
        }
    }
    for a in 0..j {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    (mean, s)
}

/// Draw `(mu, Sigma)` from the normal / inverse-Wishart posterior of complete data.
pub(crate) fn conjugate_draw<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    scatter: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<MvnParams> {
    let j = mean.len();
    if n < j + 1 {
        return Err(Error::RankDeficient {
            completers: n,
            required: j + 1,
        });
    }
    let mut attempt = 0;
    let cov = loop {
        attempt += 1;
        match sample_inverse_wishart((n - 1) as f64, scatter, rng) {
            Ok(c) => break c,
            Err(_) if attempt < MAX_PD_RETRIES => continue,
            Err(_) => return Err(Error::NonPositiveDefiniteDraw { attempts: attempt }),
        }
    };
    let l = checked_cholesky(&cov, "covariance draw")?.l();
    let z = DVector::from_fn(j, |_, _| StandardNormal.sample(rng));
    let mu = mean + (&l * z) / (n as f64).sqrt();
    Ok(MvnParams { mean: mu, cov })
}

/// Inverse-Wishart draw with `df` degrees of freedom and scale matrix `scale`,
/// via the Bartlett decomposition of the Wishart(df, scale^-1) precision.
pub(crate) fn sample_inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let j = scale.nrows();
    let precision_scale = checked_cholesky(scale, "inverse-Wishart scale")?.inverse();
    let c = checked_cholesky(&precision_scale, "inverse-Wishart scale")?.l();
    let mut a = DMatrix::<f64>::zeros(j, j);
    for i in 0..j {
        let chi = ChiSquared::new(df - i as f64).map_err(|_| Error::RankDeficient {
            completers: df as usize + 1,
            required: j + 1,
        })?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for k in 0..i {
            a[(i, k)] = StandardNormal.sample(rng);
        }
    }
    let m = c * a;
    let w = &m * m.transpose();
    let mut sigma = checked_cholesky(&w, "Wishart draw")?.inverse();
    symmetrize(&mut sigma);
    checked_cholesky(&sigma, "inverse-Wishart draw")?;
    Ok(sigma)
}
