use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parse_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub participant: String,
    pub label: u8,
    pub values: Vec<f64>,
}

/// Training rows tagged by participant. Text form, one row per line:
/// `participant_id \t label \t v1,v2,...`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatureSet {
    pub rows: Vec<LabeledRow>,
}

impl LabeledFeatureSet {
    pub fn new(rows: Vec<LabeledRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.values.len())
    }

    /// Distinct participants in first-seen order.
    pub fn participants(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.participant.clone()))
            .map(|r| r.participant.clone())
            .collect()
    }

    pub fn has_both_labels(&self) -> bool {
        self.rows.iter().any(|r| r.label == 1) && self.rows.iter().any(|r| r.label == 0)
    }

    /// Consistent dimensionality, binary labels and finite values.
    pub fn validate(&self) -> Result<()> {
        let Some(dim) = self.dim() else {
            return Ok(());
        };
        for (i, row) in self.rows.iter().enumerate() {
            if row.values.len() != dim {
                return Err(domain(format!(
                    "row {i} has {} features, expected {dim}",
                    row.values.len()
                )));
            }
            if row.label > 1 {
                return Err(domain(format!("row {i} has non-binary label {}", row.label)));
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(domain(format!("row {i} has non-finite features")));
            }
        }
        Ok(())
    }

    pub fn split_by_participant(&self, held_out: &str) -> (LabeledFeatureSet, LabeledFeatureSet) {
        let (test, train): (Vec<_>, Vec<_>) = self
            .rows
            .iter()
            .cloned()
            .partition(|r| r.participant == held_out);
        (LabeledFeatureSet::new(train), LabeledFeatureSet::new(test))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(participant), Some(label), Some(values), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(parse_err(line_no, "expected 3 tab-separated fields"));
            };
            let label = match label.trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(line_no, format!("label must be 0 or 1, got {other:?}"))),
            };
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(line_no, format!("bad feature value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(LabeledRow {
                participant: participant.to_string(),
                label,
                values,
            });
        }
        let set = Self { rows };
        set.validate()?;
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = write!(out, "{}\t{}\t", row.participant, row.label);
            for (j, v) in row.values.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}
