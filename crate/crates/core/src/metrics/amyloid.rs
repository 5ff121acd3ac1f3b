//! Amyloid positivity from CSF Aβ42 or amyloid-PET SUVR.

use std::fmt;

/// CSF Aβ42 below this level (pg/mL) is amyloid positive.
pub const CSF_ABETA42_CUTOFF: f64 = 192.0;
/// SUVR above this ratio is amyloid positive (used when CSF is unavailable).
pub const SUVR_CUTOFF: f64 = 1.11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmyloidStatus {
    Positive,
    Negative,
    Unknown,
}

impl fmt::Display for AmyloidStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AmyloidStatus::Positive => "positive",
            AmyloidStatus::Negative => "negative",
            AmyloidStatus::Unknown => "unknown",
        })
    }
}

/// CSF takes precedence; SUVR is consulted only when CSF is missing.
pub fn amyloid_status(csf_abeta42: Option<f64>, suvr: Option<f64>) -> AmyloidStatus {
    match (csf_abeta42, suvr) {
        (Some(csf), _) => {
            if csf < CSF_ABETA42_CUTOFF {
                AmyloidStatus::Positive
            } else {
                AmyloidStatus::Negative
            }
        }
        (None, Some(s)) => {
            if s > SUVR_CUTOFF {
                AmyloidStatus::Positive
            } else {
                AmyloidStatus::Negative
            }
        }
        (None, None) => AmyloidStatus::Unknown,
    }
}
