//! Stationary random fields on `Z^d` driven by orthomartingale or iid
//! innovations, with exact conditioning by truncation, LL-normalized maximal
//! functions, Orlicz norms, dyadic decompositions checked pointwise, and a
//! configuration-driven experiment harness.

// Negated float comparisons double as NaN rejection in argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod decomposition;
pub mod error;
pub mod field;
pub mod harness;
pub mod innovations;
pub mod lattice;
pub mod maximal;
pub mod norms;
pub mod rng;

pub use decomposition::{
    d_k, d_k_i, hannan_series, mw_inner_sum, mw_series, u_k, verify_pointwise_inequality, Decomposition,
    DecompositionTerm, LawMode, Variant, VerifyOutcome,
};
pub use error::{Error, Result};
pub use field::{render_from_realization, render_sample, symbolic_partial_sum, FieldKind, FieldModel, FieldSample};
pub use harness::{ExperimentConfig, ExperimentKind, Record, Report};
pub use innovations::{sample_atoms, AtomCombination, InnovationModel, MarginalLaw, Realization};
pub use lattice::{lil_normalizer, AxisSet, LatticeIndex, PrefixSumTable, Region, Window};
pub use maximal::{maximal_function, y_statistic, z_statistic, MaximalResult};
pub use norms::{orlicz_norm, phi, weak_lp_norms, DiscreteLaw, NormEstimate, OrliczParams};
