//! Shapley-value attribution for tabular models.
//!
//! Value functions ([`valuefn`]) turn a model, an instance and background data
//! into a cooperative game; the [`engine`] attributes the game's payoff to
//! features exactly, by permutation sampling, under a causal ordering, or by
//! stratifying the background and redistributing the stratum reference.
//! [`oracle`] holds closed-form values for the two-feature linear spline used
//! to validate all of the above.

pub mod coalition;
pub mod data;
pub mod engine;
pub mod error;
pub mod models;
pub mod oracle;
pub mod report;
pub mod valuefn;

pub use coalition::{enumerate_subsets, shapley_weight, Coalition, DEFAULT_ENUMERATION_CAP};
pub use data::{ColumnKind, Dataset, FeatureVector};
pub use engine::{
    asymmetric_shapley, exact_shapley, exact_shapley_with_cap, permutation_shapley, stratified_attribution,
    stratified_explain, two_feature_shapley, AsymmetricOptions, CausalOrdering, Direction, PermutationOptions,
    StratifiedConfig, StratifiedExplanation, Xi, XiChoice,
};
pub use error::{Error, Result};
pub use models::{load_model, Model, SplineParams, TreeEnsemble};
pub use report::{compare_reports, AttributionReport, Comparison, Method};
pub use valuefn::{
    stratified_background, ConditionalProvider, MarginalProvider, MatchRule, StratumKey, StratumSpec, TableGame,
    ValueFunction,
};
