//! Bilevel hyperparameter selection for L1-loss support vector
//! classification, recast as an MPEC through the lower-level KKT system.

pub mod analysis;
pub mod dataset;
pub mod gamma;
pub mod instance;
pub mod pattern;
pub mod point;
pub mod solver;
pub mod theorems;

pub use analysis::{analyze_bho_point, direct_misclassification_rate, AgreementRecord, BhoAnalysis, GammaSummary};
pub use dataset::{Dataset, FoldSplit};
pub use gamma::{assemble_gamma, compare_with_bundle, GammaComparison, GammaMatrix, GammaRow};
pub use instance::{BhoInstance, InstanceData};
pub use pattern::{check_index_relations, classify_lambda_psi, AssumptionFlags, BlockIndexSets, LambdaPsiPattern};
pub use point::{assemble_feasible_point, validation_error, AssembledPoint, BhoPoint};
pub use solver::{natural_residual, solve_box_qp, solve_lower_level, QpOptions, QpSolution};
pub use theorems::{check_licq_theorem, check_mfcq_r_theorem, LicqCase, LicqTheoremVerdict};
