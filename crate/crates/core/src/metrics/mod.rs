//! Evaluation statistics: concordance, survival curves, group tests, ROC
//! analysis and agreement measures.

mod adjusted;
mod amyloid;
mod bootstrap;
mod concordance;
mod corr;
mod km;
mod logrank;
mod roc;
pub mod special;
mod stratify;

pub use adjusted::{adjusted_group_test, LikelihoodRatio};
pub use amyloid::{amyloid_status, AmyloidStatus, CSF_ABETA42_CUTOFF, SUVR_CUTOFF};
pub use bootstrap::{bootstrap_ci, BootstrapCi, DEFAULT_RESAMPLES};
pub use concordance::{concordance_index, Concordance, TieRule};
pub use corr::{icc, pearson_r, wilcoxon_rank_sum, RankSum};
pub use km::{censoring_km, kaplan_meier, SurvivalCurve};
pub use logrank::{logrank_test, LogRank};
pub use roc::{binary_roc_auc, td_roc_ipcw, RocCurve, RocPoint, TdRoc};
pub use stratify::{quantile_sorted, stratify_by_risk, RiskGroup};
