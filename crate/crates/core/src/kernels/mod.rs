//! Dense linear algebra and linear programming primitives.

pub mod combination;
pub mod dense;
pub mod lp;
pub mod pd;
pub mod rank;

pub use combination::{signed_combination_exists, verify_witness, CombinationWitness, SignedCombinationQuery};
pub use lp::{lp_feasible, LinearProgram, LpCertificate, LpOutcome, Relation};
pub use pd::is_positive_definite;
pub use rank::{numerical_rank, RankResult};
