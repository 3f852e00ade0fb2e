use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::wfdb::STANDARD_LEADS;

/// The four experiment arms (1, 3, 6 and 12 leads) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LeadSubset {
    LeadI,
    Limb3,
    Limb6,
    All,
    Custom(Vec<String>),
}

impl LeadSubset {
    pub const ARMS: [LeadSubset; 4] = [LeadSubset::LeadI, LeadSubset::Limb3, LeadSubset::Limb6, LeadSubset::All];

    pub fn leads(&self) -> Vec<String> {
        let fixed: &[&str] = match self {
            LeadSubset::LeadI => &["I"],
            LeadSubset::Limb3 => &["I", "II", "III"],
            LeadSubset::Limb6 => &["I", "II", "III", "AVL", "AVR", "AVF"],
            LeadSubset::All => &STANDARD_LEADS,
            LeadSubset::Custom(v) => return v.clone(),
        };
        fixed.iter().map(|s| s.to_string()).collect()
    }

    pub fn n_channels(&self) -> usize {
        match self {
            LeadSubset::LeadI => 1,
            LeadSubset::Limb3 => 3,
            LeadSubset::Limb6 => 6,
            LeadSubset::All => 12,
            LeadSubset::Custom(v) => v.len(),
        }
    }
}

impl FromStr for LeadSubset {
    type Err = EvalError;

    /// Accepts `I`, `limb3`, `limb6`, `all`, or a comma-separated lead list.
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "i" | "lead-i" | "1" => return Ok(LeadSubset::LeadI),
            "limb3" | "3" => return Ok(LeadSubset::Limb3),
            "limb6" | "6" => return Ok(LeadSubset::Limb6),
            "all" | "12" => return Ok(LeadSubset::All),
            _ => {}
        }
        let mut leads: Vec<String> = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let canonical = STANDARD_LEADS
                .iter()
                .find(|l| l.eq_ignore_ascii_case(part))
                .ok_or_else(|| EvalError::InvalidLeadSubset(format!("unknown lead {part:?}")))?;
            if leads.iter().any(|l| l == canonical) {
                return Err(EvalError::InvalidLeadSubset(format!("lead {canonical} listed twice")));
            }
            leads.push(canonical.to_string());
        }
        Ok(LeadSubset::ARMS
            .into_iter()
            .find(|arm| arm.leads() == leads)
            .unwrap_or(LeadSubset::Custom(leads)))
    }
}

impl fmt::Display for LeadSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeadSubset::LeadI => f.write_str("I"),
            LeadSubset::Limb3 => f.write_str("limb3"),
            LeadSubset::Limb6 => f.write_str("limb6"),
            LeadSubset::All => f.write_str("all"),
            LeadSubset::Custom(v) => f.write_str(&v.join(",")),
        }
    }
}

impl TryFrom<String> for LeadSubset {
    type Error = EvalError;
    fn try_from(s: String) -> Result<Self, EvalError> {
        s.parse()
    }
}

impl From<LeadSubset> for String {
    fn from(l: LeadSubset) -> String {
        l.to_string()
    }
}
