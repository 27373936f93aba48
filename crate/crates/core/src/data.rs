//! Trial data, validation and missingness bookkeeping.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Randomised arm of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Reference,
    Active,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Reference, Arm::Active];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Reference => "ref",
            Arm::Active => "act",
        }
    }

    pub fn from_label(label: &str) -> Option<Arm> {
        match label {
            "ref" => Some(Arm::Reference),
            "act" => Some(Arm::Active),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Reference => 0,
            Arm::Active => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Reference => Arm::Active,
            Arm::Active => Arm::Reference,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    MissingBaseline,
    NonMonotoneMissingness,
    UnknownArmLabel,
    WrongVisitCount,
}

/// One failed invariant, located by subject (0-based row) and visit (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: usize,
    pub visit: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "subject {}: {:?}", self.subject, self.kind)?;
        if let Some(v) = self.visit {
            write!(f, " at visit {v}")?;
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// A subject as read from disk, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSubject {
    pub id: String,
    pub arm_label: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub n_visits: usize,
    pub subjects: Vec<RawSubject>,
}

/// Validated two-arm longitudinal dataset with monotone missingness.
///
/// Cells are stored row-major, one row of `n_visits` per subject. A `None`
/// cell is missing. Identifiers and arm labels are shared between clones so
/// that completed copies only duplicate the outcome cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    n_visits: usize,
    ids: Arc<[String]>,
    arms: Arc<[Arm]>,
    cells: Vec<Option<f64>>,
}

impl TrialDataset {
    /// Build directly from parts; runs full validation.
    pub fn new(n_visits: usize, ids: Vec<String>, arms: Vec<Arm>, cells: Vec<Option<f64>>) -> Result<Self> {
        if ids.len() != arms.len() || cells.len() != ids.len() * n_visits {
            return Err(Error::DimensionMismatch(format!(
                "{} ids, {} arms, {} cells for {} visits",
                ids.len(),
                arms.len(),
                cells.len(),
                n_visits
            )));
        }
        let ds = TrialDataset {
            n_visits,
            ids: ids.into(),
            arms: arms.into(),
            cells,
        };
        validate_dataset(ds.to_raw())
    }

    /// Complete dataset from per-subject rows; ids are generated as 1..n.
    pub fn from_complete_rows(arms: Vec<Arm>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_visits = rows.first().map_or(0, Vec::len);
        let ids = (1..=rows.len()).map(|i| i.to_string()).collect();
        let cells = rows.iter().flat_map(|r| r.iter().map(|&v| Some(v))).collect();
        Self::new(n_visits, ids, arms, cells)
    }

    pub fn n_visits(&self) -> usize {
        self.n_visits
    }

    pub fn n_subjects(&self) -> usize {
        self.arms.len()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn arm(&self, i: usize) -> Arm {
        self.arms[i]
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        &self.cells[i * self.n_visits..(i + 1) * self.n_visits]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [Option<f64>] {
        let j = self.n_visits;
        &mut self.cells[i * j..(i + 1) * j]
    }

    pub fn value(&self, i: usize, visit: usize) -> Option<f64> {
        self.cells[i * self.n_visits + visit]
    }

    /// Number of observed visits for subject `i`, i.e. the last observed
    /// visit in 1-based numbering.
    pub fn n_observed(&self, i: usize) -> usize {
        self.row(i).iter().take_while(|c| c.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn n_in_arm(&self, arm: Arm) -> usize {
        self.arms.iter().filter(|&&a| a == arm).count()
    }

    pub fn subjects_in(&self, arm: Arm) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().enumerate().filter(move |(_, &a)| a == arm).map(|(i, _)| i)
    }

    /// Per-subject rows for one arm, in dataset order.
    pub fn arm_rows(&self, arm: Arm) -> Vec<Vec<Option<f64>>> {
        self.subjects_in(arm).map(|i| self.row(i).to_vec()).collect()
    }

    /// Copy with visits from `from_visit` (0-based) onward blanked for subject `i`.
    pub(crate) fn truncate_subject(&mut self, i: usize, from_visit: usize) {
        for c in &mut self.row_mut(i)[from_visit..] {
            *c = None;
        }
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            n_visits: self.n_visits,
            subjects: (0..self.n_subjects())
                .map(|i| RawSubject {
                    id: self.ids[i].clone(),
                    arm_label: self.arms[i].label().to_string(),
                    values: self.row(i).to_vec(),
                })
                .collect(),
        }
    }

    /// True when both datasets share subjects and agree on every cell that
    /// is observed in `self`.
    pub fn agrees_on_observed(&self, other: &TrialDataset) -> bool {
        self.n_visits == other.n_visits
            && self.arms == other.arms
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.is_none() || a.map(f64::to_bits) == b.map(f64::to_bits))
    }
}

/// Check every invariant and report all violations, not just the first.
pub fn validate_dataset(raw: RawDataset) -> Result<TrialDataset> {
    let mut violations = Vec::new();
    let j = raw.n_visits;
    let mut arms = Vec::with_capacity(raw.subjects.len());
    for (i, s) in raw.subjects.iter().enumerate() {
        match Arm::from_label(&s.arm_label) {
            Some(a) => arms.push(a),
            None => {
                arms.push(Arm::Reference);
                violations.push(Violation {
                    subject: i,
                    visit: None,
                    kind: ViolationKind::UnknownArmLabel,
                    detail: format!("label `{}`", s.arm_label),
                });
            }
        }
        if s.values.len() != j {
            violations.push(Violation {
                subject: i,
                visit: None,
                kind: ViolationKind::WrongVisitCount,
                detail: format!("{} values for {} visits", s.values.len(), j),
            });
            continue;
        }
        if s.values.first().is_some_and(Option::is_none) {
            violations.push(Violation {
                subject: i,
                visit: Some(1),
                kind: ViolationKind::MissingBaseline,
                detail: String::new(),
            });
        }
        let first_missing = s.values.iter().position(Option::is_none);
        if let Some(m) = first_missing {
            for (t, v) in s.values.iter().enumerate().skip(m + 1) {
                if v.is_some() {
                    violations.push(Violation {
                        subject: i,
                        visit: Some(t + 1),
                        kind: ViolationKind::NonMonotoneMissingness,
                        detail: format!("observed after missing visit {}", m + 1),
                    });
                }
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let mut ids = Vec::with_capacity(raw.subjects.len());
    let mut cells = Vec::with_capacity(raw.subjects.len() * j);
    for s in raw.subjects {
        ids.push(s.id);
        cells.extend(s.values);
    }
    Ok(TrialDataset {
        n_visits: j,
        ids: ids.into(),
        arms: arms.into(),
        cells,
    })
}

/// Deviation counts for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMissingness {
    pub n: usize,
    /// Completers.
    pub n_complete: usize,
    /// `n_deviating[j]` counts subjects whose first missing visit is `j`
    /// (0-based). Entries 0 is always zero.
    pub n_deviating: Vec<usize>,
}

impl ArmMissingness {
    pub fn n_deviators(&self) -> usize {
        self.n_deviating.iter().sum()
    }

    /// Proportion deviating at each visit, `n_deviating[j] / n`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.n_deviating.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn proportion_deviating(&self) -> f64 {
        self.n_deviators() as f64 / self.n.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessSummary {
    pub n_visits: usize,
    pub reference: ArmMissingness,
    pub active: ArmMissingness,
}

impl MissingnessSummary {
    pub fn arm(&self, arm: Arm) -> &ArmMissingness {
        match arm {
            Arm::Reference => &self.reference,
            Arm::Active => &self.active,
        }
    }
}

pub fn summarize_missingness(d: &TrialDataset) -> MissingnessSummary {
    let j = d.n_visits();
    let mut per_arm = [
        ArmMissingness {
            n: 0,
            n_complete: 0,
            n_deviating: vec![0; j],
        },
        ArmMissingness {
            n: 0,
            n_complete: 0,
            n_deviating: vec![0; j],
        },
    ];
    for i in 0..d.n_subjects() {
        let s = &mut per_arm[d.arm(i).index()];
        s.n += 1;
        let obs = d.n_observed(i);
        if obs == j {
            s.n_complete += 1;
        } else {
            s.n_deviating[obs] += 1;
        }
    }
    let [reference, active] = per_arm;
    MissingnessSummary {
        n_visits: j,
        reference,
        active,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(rows: &[(&str, &[Option<f64>])]) -> RawDataset {
        RawDataset {
            n_visits: rows[0].1.len(),
            subjects: rows
                .iter()
                .enumerate()
                .map(|(i, (arm, v))| RawSubject {
                    id: format!("s{i}"),
                    arm_label: arm.to_string(),
                    values: v.to_vec(),
                })
                .collect(),
        }
    }

    #[test]
    fn complete_dataset_accepted_unchanged() {
        let r = raw(&[
            ("ref", &[Some(1.0), Some(2.0), Some(3.0)]),
            ("act", &[Some(1.5), Some(2.5), Some(3.5)]),
        ]);
        let d = validate_dataset(r.clone()).unwrap();
        assert_eq!(d.to_raw(), r);
    }

    #[test]
    fn non_monotone_rejected() {
        let r = raw(&[("act", &[Some(1.0), None, Some(3.0)])]);
        match validate_dataset(r) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].kind, ViolationKind::NonMonotoneMissingness);
                assert_eq!(v[0].visit, Some(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_baseline_rejected() {
        let r = raw(&[("ref", &[None, None, None])]);
        let Err(Error::Validation(v)) = validate_dataset(r) else {
            panic!("expected validation failure")
        };
        assert_eq!(v[0].kind, ViolationKind::MissingBaseline);
    }

    #[test]
    fn every_violation_reported() {
        let r = raw(&[
            ("pbo", &[Some(1.0), Some(1.0)]),
            ("act", &[None, Some(2.0)]),
        ]);
        let Err(Error::Validation(v)) = validate_dataset(r) else {
            panic!("expected validation failure")
        };
        let kinds: Vec<_> = v.iter().map(|x| (x.subject, x.kind)).collect();
        assert!(kinds.contains(&(0, ViolationKind::UnknownArmLabel)));
        assert!(kinds.contains(&(1, ViolationKind::MissingBaseline)));
        assert!(kinds.contains(&(1, ViolationKind::NonMonotoneMissingness)));
    }

    #[test]
    fn summary_counts_deviation_visits() {
        let mut rows: Vec<(&str, &[Option<f64>])> = Vec::new();
        let full: &[Option<f64>] = &[Some(1.0), Some(1.0), Some(1.0)];
        let at2: &[Option<f64>] = &[Some(1.0), None, None];
        let at3: &[Option<f64>] = &[Some(1.0), Some(1.0), None];
        for _ in 0..200 {
            rows.push(("act", full));
        }
        for _ in 0..25 {
            rows.push(("act", at2));
            rows.push(("act", at3));
        }
        let d = validate_dataset(raw(&rows)).unwrap();
        let s = summarize_missingness(&d);
        assert_eq!(s.active.n, 250);
        assert_eq!(s.active.n_complete, 200);
        assert_eq!(s.active.n_deviating, vec![0, 25, 25]);
        let p = s.active.proportions();
        assert!((p[1] - 0.1).abs() < 1e-15 && (p[2] - 0.1).abs() < 1e-15);
        assert!((s.active.proportion_deviating() - 0.2).abs() < 1e-15);
        assert_eq!(s.reference.n, 0);
    }
}
