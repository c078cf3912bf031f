//! Randomization-based inference for peer effects when units are randomly
//! formed into equal-size groups.
//!
//! Units carry a discrete attribute in `0..H`. Each unit ends up with `K`
//! peers, and the multiset of its peers' attributes is the treatment it
//! receives. Two assignment mechanisms are supported: uniform random
//! partitioning and complete randomization with a fixed vector of group
//! compositions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and thread-parallel drivers live in the companion `peerfx-cli` crate.
//!
//! Attribute indices are 0-based everywhere in this API. Human-facing
//! renderings (`Display` on [`AttrMultiset`]) use 1-based labels.
#![no_std]

extern crate alloc;

pub mod design;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod kernel;
pub mod linalg;
pub mod multiset;
pub mod optimize;
pub mod oracle;
pub mod population;
pub mod rtest;
pub mod science;
pub mod stats;

pub use design::{assignment_probability, feasible_compositions, sample, Design};
pub use error::{Error, Result};
pub use kernel::ProbabilityKernel;
pub use multiset::{enumerate_group_sets, enumerate_peer_sets, AttrMultiset, TreatmentSpace};
pub use population::{composition_vector, n_ar_from_l, units_treatment, Assignment, OutcomeData, Population};

/// Seeded generator used for every random operation in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Generator for the `index`-th independent draw of a run seeded with `seed`.
///
/// Draw `i` always uses `seed ^ i`, so results do not depend on how draws are
/// scheduled across threads.
pub fn draw_rng(seed: u64, index: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed ^ index)
}
