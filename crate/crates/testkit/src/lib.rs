//! Test support for thadc: seeded generators of MiniC programs and THAD
//! sets, and a concrete interpreter for generated assert-mode wrappers.

pub mod programs;
pub mod specs;
pub mod wrapper;

pub use programs::{random_program, ProgramShape};
pub use specs::random_thad_set;
pub use wrapper::{run_wrapper, WrapperError};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for a test case number.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
