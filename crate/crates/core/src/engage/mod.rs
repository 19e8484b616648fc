//! Regression of engagement on affective, moral and factor features.
//!
//! Every column and target is quantile-normalised, features are screened
//! by variance inflation and the survivors enter an OLS fit, so reported
//! coefficients are standardised effect sizes.

pub mod ols;
pub mod quantile;
pub mod suite;
pub mod vif;

pub use ols::{fit_ols, OlsFit};
pub use quantile::{average_ranks, quantile_normalize, quantile_normalize_with};
pub use suite::{
    fit_model, r2_grid, run_engagement_suite, run_topic_suite, write_coefficients, write_model_summary,
    Coefficient, Feature, FeatureTable, Group, GridRow, R2Grid, RegressionReport, Scheme, Source, SuiteParams,
    Target,
};
pub use vif::{vif, vif_filter, VifOutcome};
