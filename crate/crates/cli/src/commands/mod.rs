//! The four subcommands. Each writes its human-readable report to `out` and returns an
//! error carrying the exit code when something did not hold.

mod hierarchy;
mod selftest;
mod solve;
mod verify;

use std::path::PathBuf;

use nijhydro::fields::DomainBox;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use hierarchy::run_hierarchy;
pub use selftest::{run_selftest, Fault};
pub use solve::run_solve;
pub use verify::run_verify;

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fault: Option<Fault>,
}

/// `explicit` points followed by `count` uniform samples from `domain`.
pub fn probe_points(domain: &DomainBox, explicit: &[Vec<f64>], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    explicit
        .iter()
        .cloned()
        .chain((0..count).map(|_| domain.sample(&mut rng)))
        .collect()
}

pub(crate) fn fmt_point(u: &[f64]) -> String {
    let parts: Vec<String> = u.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}
