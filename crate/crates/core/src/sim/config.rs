use std::path::Path;

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::kv::{join, join_matrix, KvDoc};
use crate::mvn::{ChainConfig, MvnParams};
use crate::strategy::{ImputationStrategy, Method};

/// Parameters of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_per_arm: usize,
    pub reference: MvnParams,
    pub active: MvnParams,
    /// Total percentage deviating, one study level per entry.
    pub dropout_pct: Vec<f64>,
    /// Split of each level over first-unobserved visits `2..=J`; sums to 1.
    pub dropout_split: Vec<f64>,
    pub dropout_arm: Arm,
    pub strategies: Vec<ImputationStrategy>,
    pub k: usize,
    pub replicates: usize,
    pub seed: u64,
    pub chain: ChainConfig,
    pub tolerance: f64,
    /// Groups in the jackknife behind the design-based variance.
    pub jackknife_groups: usize,
}

const KEYS: &[&str] = &[
    "n_per_arm",
    "mu_reference",
    "mu_active",
    "sigma",
    "dropout_pct",
    "dropout_split",
    "dropout_arm",
    "strategies",
    "delta_grid",
    "k",
    "replicates",
    "seed",
    "burn_in",
    "thin",
    "tolerance",
    "jackknife_groups",
];

impl SimConfig {
    /// The two-follow-up design with `n = 250` per arm and active final
    /// mean `mu_active_final`.
    pub fn three_visit(mu_active_final: f64) -> Self {
        let sigma: [&[f64]; 3] = [&[0.4, 0.2, 0.2], &[0.2, 0.5, 0.2], &[0.2, 0.2, 0.6]];
        SimConfig {
            n_per_arm: 250,
            reference: MvnParams::from_slices(&[2.0, 1.95, 1.9], &sigma).expect("valid"),
            active: MvnParams::from_slices(&[2.0, 2.21, mu_active_final], &sigma).expect("valid"),
            dropout_pct: vec![10.0, 20.0, 30.0, 40.0],
            dropout_split: vec![0.5, 0.5],
            dropout_arm: Arm::Active,
            strategies: ["mar", "j2r", "cir", "cr", "lmcf"].iter().map(|s| s.parse().expect("valid")).collect(),
            k: 50,
            replicates: 500,
            seed: 20_190_101,
            chain: ChainConfig::default(),
            tolerance: crate::analysis::DEFAULT_TOLERANCE,
            jackknife_groups: 50,
        }
    }

    pub fn n_visits(&self) -> usize {
        self.reference.dim()
    }

    pub fn params(&self, arm: Arm) -> &MvnParams {
        match arm {
            Arm::Reference => &self.reference,
            Arm::Active => &self.active,
        }
    }

    /// Per-visit deviating proportions at one level.
    pub fn proportions(&self, pct: f64) -> Vec<f64> {
        self.dropout_split.iter().map(|s| pct / 100.0 * s).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.n_visits();
        if j < 2 || self.active.dim() != j {
            return Err(Error::Config("arms need the same number (>= 2) of visits".into()));
        }
        if self.dropout_split.len() != j - 1 {
            return Err(Error::Config(format!("dropout_split needs {} entries", j - 1)));
        }
        let total: f64 = self.dropout_split.iter().sum();
        if self.dropout_split.iter().any(|s| !(*s >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config("dropout_split must be non-negative and sum to 1".into()));
        }
        if self.dropout_pct.iter().any(|p| !(0.0..=100.0).contains(p)) {
            return Err(Error::Config("dropout_pct entries must lie in [0, 100]".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::TooFewImputations(self.k));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies".into()));
        }
        if self.jackknife_groups < 2 {
            return Err(Error::Config("jackknife_groups must be at least 2".into()));
        }
        for s in &self.strategies {
            s.validate(self.n_per_arm)?;
        }
        Ok(())
    }

    /// Parse the key-value form; unspecified keys take the three-visit
    /// defaults with final active mean 2.2.
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        doc.reject_unknown(KEYS)?;
        let mut c = SimConfig::three_visit(2.2);
        if let Some(n) = doc.parse_value("n_per_arm")? {
            c.n_per_arm = n;
        }
        let sigma = match doc.matrix("sigma")? {
            Some(rows) => {
                let j = rows.len();
                if rows.iter().any(|r| r.len() != j) {
                    return Err(Error::Config("sigma must be square".into()));
                }
                nalgebra::DMatrix::from_fn(j, j, |r, col| rows[r][col])
            }
            None => c.reference.cov.clone(),
        };
        let mean = |key: &str, default: &MvnParams| -> Result<nalgebra::DVector<f64>> {
            Ok(match doc.list::<f64>(key)? {
                Some(v) => nalgebra::DVector::from_vec(v),
                None => default.mean.clone(),
            })
        };
        let mu_r = mean("mu_reference", &c.reference)?;
        let mu_a = mean("mu_active", &c.active)?;
        if mu_r.len() != sigma.nrows() || mu_a.len() != sigma.nrows() {
            return Err(Error::Config("means and sigma differ in dimension".into()));
        }
        c.reference = MvnParams::new(mu_r, sigma.clone()).map_err(|e| Error::Config(format!("sigma: {e}")))?;
        c.active = MvnParams::new(mu_a, sigma).map_err(|e| Error::Config(format!("sigma: {e}")))?;
        if let Some(v) = doc.list("dropout_pct")? {
            c.dropout_pct = v;
        }
        match doc.list("dropout_split")? {
            Some(v) => c.dropout_split = v,
            None if c.n_visits() != 3 => {
                let j = c.n_visits();
                c.dropout_split = vec![1.0 / (j - 1) as f64; j - 1];
            }
            None => {}
        }
        if let Some(label) = doc.get("dropout_arm") {
            c.dropout_arm = Arm::from_label(label).ok_or_else(|| Error::Config(format!("unknown arm `{label}`")))?;
        }
        if let Some(v) = doc.list::<String>("strategies")? {
            c.strategies = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(grid) = doc.list::<f64>("delta_grid")? {
            c.strategies.extend(grid.into_iter().map(|delta| ImputationStrategy::new(Method::DeltaFixed { delta })));
        }
        if let Some(k) = doc.parse_value("k")? {
            c.k = k;
        }
        if let Some(r) = doc.parse_value("replicates")? {
            c.replicates = r;
        }
        if let Some(s) = doc.parse_value("seed")? {
            c.seed = s;
        }
        if let Some(b) = doc.parse_value("burn_in")? {
            c.chain.burn_in = b;
        }
        if let Some(t) = doc.parse_value("thin")? {
            c.chain.thin = t;
        }
        if let Some(t) = doc.parse_value("tolerance")? {
            c.tolerance = t;
        }
        if let Some(g) = doc.parse_value("jackknife_groups")? {
            c.jackknife_groups = g;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_kv(&KvDoc::parse(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
        };
        doc.set("n_per_arm", self.n_per_arm);
        doc.set("mu_reference", join(self.reference.mean.as_slice()));
        doc.set("mu_active", join(self.active.mean.as_slice()));
        doc.set("sigma", join_matrix(&rows(&self.reference.cov)));
        doc.set("dropout_pct", join(&self.dropout_pct));
        doc.set("dropout_split", join(&self.dropout_split));
        doc.set("dropout_arm", self.dropout_arm.label());
        doc.set("strategies", join(&self.strategies));
        doc.set("k", self.k);
        doc.set("replicates", self.replicates);
        doc.set("seed", self.seed);
        doc.set("burn_in", self.chain.burn_in);
        doc.set("thin", self.chain.thin);
        doc.set("tolerance", self.tolerance);
        doc.set("jackknife_groups", self.jackknife_groups);
        doc
    }
}
