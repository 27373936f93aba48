//! Fixtures shared by the benchmarks.

use anchormi::rng::{stream, Domain};
use anchormi::sim::{generate_trial, impose_dropout, SimConfig};
use anchormi::{Arm, TrialDataset};

/// The default three-visit design with `n` per arm and `pct` percent
/// active-arm dropout, from a fixed seed.
pub fn trial(n: usize, pct: f64) -> TrialDataset {
    let mut c = SimConfig::three_visit(2.2);
    c.n_per_arm = n;
    let complete = generate_trial(&c, &mut stream(1, Domain::Generate, &[])).expect("valid design");
    impose_dropout(&complete, Arm::Active, &c.proportions(pct), &mut stream(1, Domain::Dropout, &[])).expect("feasible")
}

/// A one-replicate study small enough to time repeatedly.
pub fn small_study() -> SimConfig {
    let mut c = SimConfig::three_visit(2.2);
    c.n_per_arm = 100;
    c.k = 5;
    c.replicates = 1;
    c.dropout_pct = vec![30.0];
    c.strategies = vec!["mar".parse().expect("valid"), "j2r".parse().expect("valid")];
    c.jackknife_groups = 10;
    c.chain.burn_in = 50;
    c.chain.thin = 10;
    c
}
