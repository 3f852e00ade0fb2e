//! Training targets: highest-confidence SCP code → superclass → normal (0)
//! or abnormal (1), plus inverse-frequency class weights.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wfdb::ScpCodes;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("unknown SCP code {0:?}")]
    UnknownCode(String),
    #[error("no SCP code maps to a superclass")]
    UnlabeledRecord,
    #[error("class weights need both classes (normal {normal}, abnormal {abnormal})")]
    DegenerateDistribution { normal: usize, abnormal: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Superclass {
    Norm,
    Sttc,
    Mi,
    Hyp,
    Cd,
    Other,
}

impl Superclass {
    pub const ALL: [Superclass; 6] = [
        Superclass::Norm,
        Superclass::Sttc,
        Superclass::Mi,
        Superclass::Hyp,
        Superclass::Cd,
        Superclass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Superclass::Norm => "NORM",
            Superclass::Sttc => "STTC",
            Superclass::Mi => "MI",
            Superclass::Hyp => "HYP",
            Superclass::Cd => "CD",
            Superclass::Other => "OTHER",
        }
    }

    pub fn binary(self) -> BinaryLabel {
        if self == Superclass::Norm {
            BinaryLabel::Normal
        } else {
            BinaryLabel::Abnormal
        }
    }
}

impl fmt::Display for Superclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Superclass {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Superclass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabelError::UnknownCode(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum BinaryLabel {
    Normal = 0,
    Abnormal = 1,
}

impl BinaryLabel {
    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::Normal => "normal",
            BinaryLabel::Abnormal => "abnormal",
        }
    }
}

impl From<BinaryLabel> for u8 {
    fn from(l: BinaryLabel) -> u8 {
        l.value()
    }
}

impl TryFrom<u8> for BinaryLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(BinaryLabel::Normal),
            1 => Ok(BinaryLabel::Abnormal),
            other => Err(format!("binary label must be 0 or 1, got {other}")),
        }
    }
}

/// The embedded code table, verbatim and diffable.
pub const SUPERCLASS_TABLE: &str = include_str!("scp_superclasses.txt");

/// Parsed [`SUPERCLASS_TABLE`], in file order.
pub fn superclass_table() -> &'static [(String, Superclass)] {
    static TABLE: OnceLock<Vec<(String, Superclass)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        SUPERCLASS_TABLE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut parts = l.split_whitespace();
                let code = parts.next().expect("code column");
                let class = parts.next().expect("superclass column");
                (code.to_owned(), class.parse().expect("known superclass"))
            })
            .collect()
    })
}

fn lookup() -> &'static HashMap<&'static str, Superclass> {
    static MAP: OnceLock<HashMap<&'static str, Superclass>> = OnceLock::new();
    MAP.get_or_init(|| superclass_table().iter().map(|(c, s)| (c.as_str(), *s)).collect())
}

pub fn map_to_superclass(code: &str) -> Result<Superclass, LabelError> {
    lookup()
        .get(code)
        .copied()
        .ok_or_else(|| LabelError::UnknownCode(code.to_owned()))
}

/// Resolves ties between max-confidence codes whose superclasses disagree
/// on normal vs abnormal. Later entries in `priority` win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub priority: Vec<Superclass>,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self {
            priority: vec![
                Superclass::Norm,
                Superclass::Other,
                Superclass::Sttc,
                Superclass::Mi,
                Superclass::Hyp,
                Superclass::Cd,
            ],
        }
    }
}

impl LabelPolicy {
    fn rank(&self, class: Superclass) -> usize {
        self.priority.iter().position(|c| *c == class).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelDecision {
    pub superclass: Superclass,
    pub label: BinaryLabel,
}

/// Picks the label from the highest-confidence mappable code.
pub fn select_label(scp: &ScpCodes, policy: &LabelPolicy) -> Result<LabelDecision, LabelError> {
    let mappable: Vec<(Superclass, f64)> = scp
        .iter()
        .filter_map(|(code, &conf)| map_to_superclass(code).ok().map(|s| (s, conf)))
        .collect();
    let best = mappable.iter().map(|&(_, c)| c).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<Superclass> = mappable.iter().filter(|&&(_, c)| c == best).map(|&(s, _)| s).collect();
    if tied.is_empty() {
        return Err(LabelError::UnlabeledRecord);
    }
    tied.sort_by_key(|&s| policy.rank(s));
    let agree = tied.iter().all(|s| s.binary() == tied[0].binary());
    // Agreeing ties keep the first code's class; disagreements go to priority.
    let superclass = if agree {
        mappable
            .iter()
            .find(|&&(_, c)| c == best)
            .map(|&(s, _)| s)
            .unwrap_or(tied[0])
    } else {
        *tied.last().unwrap()
    };
    Ok(LabelDecision {
        superclass,
        label: superclass.binary(),
    })
}

pub fn select_binary_label(scp: &ScpCodes) -> Result<BinaryLabel, LabelError> {
    select_label(scp, &LabelPolicy::default()).map(|d| d.label)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_normal: f64,
    pub weight_abnormal: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        weight_normal: 1.0,
        weight_abnormal: 1.0,
    };

    pub fn for_label(&self, label: BinaryLabel) -> f64 {
        match label {
            BinaryLabel::Normal => self.weight_normal,
            BinaryLabel::Abnormal => self.weight_abnormal,
        }
    }

    /// Weight for a 0/1 target stored as a float.
    pub fn for_target(&self, y: f64) -> f64 {
        if y >= 0.5 {
            self.weight_abnormal
        } else {
            self.weight_normal
        }
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// `w_c = N / (2 · N_c)`.
pub fn compute_class_weights(labels: &[BinaryLabel]) -> Result<ClassWeights, LabelError> {
    let abnormal = labels.iter().filter(|&&l| l == BinaryLabel::Abnormal).count();
    let normal = labels.len() - abnormal;
    if normal == 0 || abnormal == 0 {
        return Err(LabelError::DegenerateDistribution { normal, abnormal });
    }
    let n = labels.len() as f64;
    Ok(ClassWeights {
        weight_normal: n / (2.0 * normal as f64),
        weight_abnormal: n / (2.0 * abnormal as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfdb::parse_scp_codes;
    use proptest::prelude::*;

    #[test]
    fn table_is_disjoint_and_complete() {
        let table = superclass_table();
        assert_eq!(table.len(), 51);
        assert_eq!(lookup().len(), table.len(), "duplicate code in table");
        let count = |s| table.iter().filter(|(_, c)| *c == s).count();
        assert_eq!(count(Superclass::Norm), 1);
        assert_eq!(count(Superclass::Sttc), 13);
        assert_eq!(count(Superclass::Mi), 14);
        assert_eq!(count(Superclass::Hyp), 5);
        assert_eq!(count(Superclass::Cd), 11);
        assert_eq!(count(Superclass::Other), 7);
    }

    #[test]
    fn known_codes() {
        assert_eq!(map_to_superclass("LNGQT"), Ok(Superclass::Sttc));
        assert_eq!(map_to_superclass("ASMI"), Ok(Superclass::Mi));
        assert_eq!(map_to_superclass("LAO/LAE"), Ok(Superclass::Hyp));
        assert_eq!(map_to_superclass("1AVB"), Ok(Superclass::Cd));
        assert_eq!(map_to_superclass("AFIB"), Ok(Superclass::Other));
        assert_eq!(map_to_superclass("XYZ"), Err(LabelError::UnknownCode("XYZ".into())));
    }

    #[test]
    fn abnormal_example_records() {
        let id39 =
            parse_scp_codes("{'IMI': 15.0, 'LNGQT': 100.0, 'NST_': 100.0, 'DIG': 100.0, 'ABQRS': 0.0, 'SR': 0.0}")
                .unwrap();
        let d = select_label(&id39, &LabelPolicy::default()).unwrap();
        assert_eq!(d.superclass, Superclass::Sttc);
        assert_eq!(d.label, BinaryLabel::Abnormal);

        let id63 = parse_scp_codes("{'ASMI': 15.0, 'ABQRS': 0.0, 'SR': 0.0}").unwrap();
        let d = select_label(&id63, &LabelPolicy::default()).unwrap();
        assert_eq!(d.superclass, Superclass::Mi);
        assert_eq!(d.label, BinaryLabel::Abnormal);

        let norm = parse_scp_codes("{'NORM': 100.0}").unwrap();
        assert_eq!(select_binary_label(&norm), Ok(BinaryLabel::Normal));
    }

    #[test]
    fn zero_confidence_codes_still_label() {
        let c = parse_scp_codes("{'NORM': 0.0, 'SR': 0.0}").unwrap();
        assert_eq!(select_binary_label(&c), Ok(BinaryLabel::Normal));
        let c = parse_scp_codes("{'SR': 0.0, 'ABQRS': 0.0}").unwrap();
        assert_eq!(select_binary_label(&c), Err(LabelError::UnlabeledRecord));
    }

    #[test]
    fn cross_class_tie() {
        let c = parse_scp_codes("{'NORM': 80.0, 'IRBBB': 80.0}").unwrap();
        let d = select_label(&c, &LabelPolicy::default()).unwrap();
        assert_eq!(d.superclass, Superclass::Cd);
        assert_eq!(d.label, BinaryLabel::Abnormal);

        let normal_wins = LabelPolicy {
            priority: vec![Superclass::Cd, Superclass::Norm],
        };
        assert_eq!(select_label(&c, &normal_wins).unwrap().label, BinaryLabel::Normal);
    }

    #[test]
    fn class_weight_values() {
        let mut labels = vec![BinaryLabel::Normal; 40];
        labels.extend(vec![BinaryLabel::Abnormal; 60]);
        let w = compute_class_weights(&labels).unwrap();
        assert!((w.weight_normal - 1.25).abs() < 1e-12);
        assert!((w.weight_abnormal - 100.0 / 120.0).abs() < 1e-12);

        let mut labels = vec![BinaryLabel::Normal; 50];
        labels.extend(vec![BinaryLabel::Abnormal; 50]);
        assert_eq!(compute_class_weights(&labels).unwrap(), ClassWeights::UNIFORM);

        assert_eq!(
            compute_class_weights(&[BinaryLabel::Abnormal; 3]),
            Err(LabelError::DegenerateDistribution { normal: 0, abnormal: 3 })
        );
    }

    #[test]
    fn reference_weights_imply_minority_normal() {
        // Reference weights for class 0 / class 1 are > 1 / < 1.
        let w0 = 1.192181295358072f64;
        let w1 = 0.8611770524233432f64;
        // N0 / N = 1 / (2 w0)
        let frac_normal = 1.0 / (2.0 * w0);
        assert!(frac_normal < 0.5);
        assert!((1.0 / (2.0 * w1) + frac_normal - 1.0).abs() < 1e-9);
    }

    #[test]
    fn label_serde_is_numeric() {
        assert_eq!(u8::from(BinaryLabel::Abnormal), 1);
        assert!(BinaryLabel::try_from(2).is_err());
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_rescaling(
            picks in prop::collection::btree_map(0usize..51, 0.0f64..=100.0, 1..6),
            scale in 0.01f64..1.0,
        ) {
            let table = superclass_table();
            let scp: ScpCodes = picks.iter().map(|(&i, &c)| (table[i].0.clone(), c)).collect();
            let scaled: ScpCodes = scp.iter().map(|(k, &c)| (k.clone(), c * scale)).collect();
            let policy = LabelPolicy::default();
            prop_assert_eq!(select_label(&scp, &policy), select_label(&scaled, &policy));
        }

        #[test]
        fn weighted_count_equals_count(normal in 1usize..500, abnormal in 1usize..500) {
            let mut labels = vec![BinaryLabel::Normal; normal];
            labels.extend(vec![BinaryLabel::Abnormal; abnormal]);
            let w = compute_class_weights(&labels).unwrap();
            let total: f64 = labels.iter().map(|&l| w.for_label(l)).sum();
            prop_assert!((total - labels.len() as f64).abs() < 1e-9);

            labels.push(BinaryLabel::Abnormal);
            let w2 = compute_class_weights(&labels).unwrap();
            prop_assert!(w2.weight_abnormal < w.weight_abnormal);
        }
    }
}
