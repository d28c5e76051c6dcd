//! Exact engine for quadratic risk-minimization of life-insurance
//! liabilities on finite discrete-time probability spaces: filtered
//! spaces, stochastic calculus, progressive filtration enlargement,
//! optional martingale representation, hedging and securitization
//! strategies, and a brute-force least-squares oracle.

pub mod build;
pub mod calculus;
pub mod enlargement;
pub mod error;
pub mod linalg;
pub mod representation;
pub mod scalar;
pub mod space;

pub use build::{build_space, DeathLaw, MarketNode, MarketTree, Model};
pub use calculus::{
    angle_bracket, are_orthogonal, bracket, density_ratio, dual_projection, gkw, integrate,
    integrate_many, is_martingale, martingale_from_terminal, Diagnostic, GkwParts,
};
pub use enlargement::{
    azema_bundle, compensator_identity_check, enlarge_filtration, hat_transform,
    is_pseudo_stopping, survival_surface, validate_model, EnlargementBundle, ModelReport,
};
pub use error::{Error, Result};
pub use representation::{
    benefit_against_compensator, death_claim_martingale, death_claim_terminal,
    optional_representation, predictable_claim_martingale, Representation,
};
pub use scalar::{Rational, Scalar};
pub use space::{
    EventTime, FilteredSpace, Filtration, Partition, Process, ProjectionMode, RandomTime, Tag,
    project, validate_space,
};
