//! Cox proportional-hazards models: Breslow partial likelihood, Newton and
//! LASSO fits, cross-validated penalty choice, baseline hazard and
//! prediction.
//!
//! Covariates are always z-scored internally and coefficients are reported
//! per standard deviation of the covariate.

mod baseline;
mod cv;
mod data;
mod fit;
mod io;
mod lasso;
mod partial;

pub use baseline::{breslow_baseline, predict_risk, predict_survival, BaselineHazard, RiskScore};
pub use cv::{cv_select_lambda, fit_lasso_cox, stratified_folds, CvResult, DEFAULT_FOLDS};
pub use data::{Standardization, SurvivalData};
pub use fit::{fit_cox, linear_predictors, CoefficientRow, CoxFit, DIVERGENCE_BOUND};
pub use io::{load_coxfit, read_coxfit, save_coxfit, write_coxfit, COXFIT_MAGIC};
pub use lasso::{fit_lasso_path, lambda_sequence, lasso_objective, LassoPath, LASSO_TOL};
pub use partial::{neg_log_partial_likelihood, PartialLikelihood};
