//! Numerical probes of the auxiliary inequalities: a fractional commutator
//! bound, Hardy–Littlewood–Sobolev, the degenerate elliptic extension of the
//! Riesz energy and the lower bounds of the relative internal energy.

mod commutator;
mod extension;
mod hls;
mod lower_bounds;

pub use commutator::{
    commutator_field, commutator_ratio, commutator_ratio_study, CommutatorReport, CommutatorStudy,
};
pub use extension::{
    extension_energy, extension_normalization, gaussian_difference, ExtensionProblem, ExtensionResult,
};
pub use hls::{hls_probe, riemann_zeta, HlsConfig, HlsLevel, HlsReport};
pub use lower_bounds::{
    lgamma_chain_study, pointwise_lower_bound_study, ChainReport, LowerBoundReport,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for trial `trial` of a study seeded by `master`.
pub(crate) fn trial_rng(master: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng
}
