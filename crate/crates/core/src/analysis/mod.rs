//! Within-subject study analysis: counterbalancing, repeated-measures ANOVA,
//! Tukey HSD, raw NASA-TLX and rank-sum preference scores.

mod anova;
mod latin;
mod qtable;
mod ranks;
pub mod report;
pub mod special;
mod tlx;
mod tukey;

use thiserror::Error;

use crate::persistence::ScoreReportRow;
use crate::track::Condition;

pub use anova::{rm_anova, AnovaResult};
pub use latin::latin_square;
pub use qtable::{q_critical_05, Q_TABLE_DFS};
pub use ranks::{load_rankings, rank_sum, RankSums, Rankings};
pub use tlx::{tlx_by_condition, tlx_overall, TlxResponse, DEFAULT_TLX_SCALE_MAX};
pub use tukey::{tukey_hsd, TukeyPair, TukeyResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {min} {what}, got {got}")]
    TooFew {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("row {row} has {got} values, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("degenerate (zero error variance)")]
    Degenerate,
    #[error("unsupported alpha {0}; only 0.05 is tabulated")]
    UnsupportedAlpha(f64),
    #[error("no tabulated q critical value for k = {k}, df = {df}")]
    NoCriticalValue { k: usize, df: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")]
    NoConvergence { a: f64, b: f64, x: f64 },
    #[error("row {row} is not a permutation of 1..={k}")]
    NotPermutation { row: usize, k: usize },
    #[error("missing value for participant `{participant}`, condition {condition}")]
    MissingCell {
        participant: String,
        condition: String,
    },
    #[error("duplicate value for participant `{participant}`, condition {condition}")]
    DuplicateCell {
        participant: String,
        condition: String,
    },
    #[error("column `{0}` is not a numeric report column")]
    UnknownMeasure(String),
    #[error("line {line}: {detail}")]
    Input { line: usize, detail: String },
}

/// A complete participants × conditions matrix of one dependent measure.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    participants: Vec<String>,
    conditions: Vec<String>,
    /// `values[participant][condition]`
    values: Vec<Vec<f64>>,
}

impl StudyTable {
    pub fn new(
        participants: Vec<String>,
        conditions: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, AnalysisError> {
        if participants.len() < 2 {
            return Err(AnalysisError::TooFew {
                what: "participants",
                min: 2,
                got: participants.len(),
            });
        }
        if conditions.len() < 2 {
            return Err(AnalysisError::TooFew {
                what: "conditions",
                min: 2,
                got: conditions.len(),
            });
        }
        if values.len() != participants.len() {
            return Err(AnalysisError::Ragged {
                row: values.len(),
                got: values.len(),
                expected: participants.len(),
            });
        }
        for (row, r) in values.iter().enumerate() {
            if r.len() != conditions.len() {
                return Err(AnalysisError::Ragged {
                    row,
                    got: r.len(),
                    expected: conditions.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(AnalysisError::NonFinite { row, col });
            }
        }
        Ok(Self {
            participants,
            conditions,
            values,
        })
    }

    /// Unlabelled table; participants are `P1..`, conditions `C1..`.
    pub fn from_matrix(values: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let n = values.len();
        let k = values.first().map_or(0, Vec::len);
        Self::new(
            (1..=n).map(|i| format!("P{i}")).collect(),
            (1..=k).map(|j| format!("C{j}")).collect(),
            values,
        )
    }

    /// Pivots report rows into a table of `measure`. Participants keep their
    /// first-appearance order; conditions are sorted C1..C4 and only those
    /// present are included.
    pub fn from_report(rows: &[ScoreReportRow], measure: &str) -> Result<Self, AnalysisError> {
        let mut participants: Vec<String> = Vec::new();
        let mut conditions: Vec<Condition> = Vec::new();
        for r in rows {
            if !participants.contains(&r.participant) {
                participants.push(r.participant.clone());
            }
            if !conditions.contains(&r.condition) {
                conditions.push(r.condition);
            }
        }
        conditions.sort();
        let mut cells: Vec<Vec<Option<f64>>> =
            vec![vec![None; conditions.len()]; participants.len()];
        for r in rows {
            let i = participants
                .iter()
                .position(|p| *p == r.participant)
                .unwrap();
            let j = conditions.iter().position(|c| *c == r.condition).unwrap();
            if cells[i][j].is_some() {
                return Err(AnalysisError::DuplicateCell {
                    participant: r.participant.clone(),
                    condition: r.condition.to_string(),
                });
            }
            let v = match r.measure(measure) {
                Some(v) => v,
                None if is_report_measure(measure) => {
                    return Err(AnalysisError::MissingCell {
                        participant: r.participant.clone(),
                        condition: r.condition.to_string(),
                    })
                }
                None => return Err(AnalysisError::UnknownMeasure(measure.to_owned())),
            };
            cells[i][j] = Some(v);
        }
        let mut values = Vec::with_capacity(participants.len());
        for (p, row) in participants.iter().zip(cells) {
            let mut out = Vec::with_capacity(row.len());
            for (c, v) in conditions.iter().zip(row) {
                out.push(v.ok_or_else(|| AnalysisError::MissingCell {
                    participant: p.clone(),
                    condition: c.to_string(),
                })?);
            }
            values.push(out);
        }
        Self::new(
            participants,
            conditions.iter().map(|c| c.to_string()).collect(),
            values,
        )
    }

    pub fn participants(&self) -> &[String] {
        &self.participants
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.participants.len()
    }

    pub fn k(&self) -> usize {
        self.conditions.len()
    }
}

fn is_report_measure(column: &str) -> bool {
    let header = crate::persistence::report_header();
    header.iter().skip(2).any(|h| h == column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::PerSegment;

    fn row(p: &str, c: Condition, e: f64) -> ScoreReportRow {
        ScoreReportRow {
            participant: p.into(),
            condition: c,
            mean_error: e,
            frames_scored: 10,
            frames_unscored: 0,
            per_segment: PerSegment([None; 10]),
            tlx: [None; 6],
        }
    }

    #[test]
    fn table_validation() {
        assert!(StudyTable::from_matrix(vec![vec![1.0, 2.0]]).is_err());
        assert!(StudyTable::from_matrix(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(matches!(
            StudyTable::from_matrix(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(AnalysisError::Ragged { row: 1, .. })
        ));
        assert!(matches!(
            StudyTable::from_matrix(vec![vec![1.0, 2.0], vec![1.0, f64::NAN]]),
            Err(AnalysisError::NonFinite { row: 1, col: 1 })
        ));
    }

    #[test]
    fn pivot_from_report() {
        let rows = vec![
            row("P2", Condition::C2, 0.2),
            row("P2", Condition::C1, 0.1),
            row("P1", Condition::C1, 0.3),
            row("P1", Condition::C2, 0.4),
        ];
        let t = StudyTable::from_report(&rows, "mean_error_rad").unwrap();
        assert_eq!(t.participants(), ["P2", "P1"]);
        assert_eq!(t.conditions(), ["C1", "C2"]);
        assert_eq!(t.values(), [vec![0.1, 0.2], vec![0.3, 0.4]]);

        assert!(matches!(
            StudyTable::from_report(&rows[..3], "mean_error_rad"),
            Err(AnalysisError::MissingCell { .. })
        ));
        assert!(matches!(
            StudyTable::from_report(&rows, "tlx_physical"),
            Err(AnalysisError::MissingCell { .. })
        ));
        assert!(matches!(
            StudyTable::from_report(&rows, "bogus"),
            Err(AnalysisError::UnknownMeasure(_))
        ));
        let mut dup = rows.clone();
        dup.push(row("P1", Condition::C1, 0.3));
        assert!(matches!(
            StudyTable::from_report(&dup, "mean_error_rad"),
            Err(AnalysisError::DuplicateCell { .. })
        ));
    }
}
