//! Subject-level records shared by training, survival fitting and the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Volume;

/// Diagnostic group of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Nc,
    Ad,
    Mci,
}

impl Label {
    /// Classifier target index (NC = 0, AD = 1); `None` for MCI.
    pub fn class_index(self) -> Option<usize> {
        match self {
            Label::Nc => Some(0),
            Label::Ad => Some(1),
            Label::Mci => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Nc => "NC",
            Label::Ad => "AD",
            Label::Mci => "MCI",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NC" => Ok(Label::Nc),
            "AD" => Ok(Label::Ad),
            "MCI" => Ok(Label::Mci),
            other => Err(Error::Config(format!(
                "unknown label '{other}' (expected NC, AD or MCI)"
            ))),
        }
    }
}

/// One subject with both hippocampal crops and optional follow-up data.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub left: Volume,
    pub right: Volume,
    pub label: Label,
    /// Months to progression or censoring.
    pub time: Option<f64>,
    pub event: Option<bool>,
    /// Latent disease severity, known only for synthetic cohorts.
    pub severity: Option<f64>,
    /// Clinical covariates by column name; absent keys are missing values.
    pub clinical: BTreeMap<String, f64>,
}

/// A volume pair with a classifier target, as consumed by training.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub id: String,
    pub left: Volume,
    pub right: Volume,
    /// 0 = NC, 1 = AD.
    pub label: usize,
}

impl SubjectRecord {
    /// Classifier view of an NC/AD record; MCI records are rejected.
    pub fn to_labeled(&self) -> Result<LabeledPair> {
        let label = self.label.class_index().ok_or_else(|| {
            Error::precondition(format!("subject {}: MCI rows cannot be classifier targets", self.id))
        })?;
        Ok(LabeledPair {
            id: self.id.clone(),
            left: self.left.clone(),
            right: self.right.clone(),
            label,
        })
    }
}
