//! Prediction and truth files: `id,label` with optional ranked columns
//! `label1..labelK`, and their evaluation against each other.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{accumulate_labels, topk_accuracy, ConfusionMatrix, MetricsReport};

/// One row of a label file. `ranked` is empty when the file has no ranked
/// columns; otherwise `ranked[0]` is conventionally equal to `label`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub id: String,
    pub label: String,
    pub ranked: Vec<String>,
}

impl LabelRow {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        LabelRow {
            id: id.into(),
            label: label.into(),
            ranked: Vec::new(),
        }
    }

    /// A row whose label is the first of `ranked`.
    pub fn ranked(id: impl Into<String>, ranked: Vec<String>) -> Result<Self> {
        let label = ranked
            .first()
            .cloned()
            .ok_or_else(|| Error::invalid("a ranked row needs at least one label"))?;
        Ok(LabelRow {
            id: id.into(),
            label,
            ranked,
        })
    }
}

/// Parses a label file. The header must be `id,label` followed by
/// `label1, label2, …` in order.
pub fn read_labels(reader: impl Read, source: &str) -> Result<Vec<LabelRow>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::format(format!("{source}: {e}")))?
        .clone();
    let k = header.len().saturating_sub(2);
    let expected: Vec<String> = ["id".to_string(), "label".to_string()]
        .into_iter()
        .chain((1..=k).map(|i| format!("label{i}")))
        .collect();
    if header.len() < 2 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::MalformedRow {
            path: source.to_string(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, record) in csv.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            path: source.to_string(),
            line,
            message: e.to_string(),
        })?;
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        rows.push(LabelRow {
            id,
            label: record[1].to_string(),
            ranked: record.iter().skip(2).map(str::to_string).collect(),
        });
    }
    Ok(rows)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, &path.display().to_string())
}

/// Serializes rows; ranked columns are written when every row has the same
/// nonzero number of them.
pub fn labels_to_csv(rows: &[LabelRow]) -> String {
    let k = rows.first().map_or(0, |r| r.ranked.len());
    let k = if rows.iter().all(|r| r.ranked.len() == k) {
        k
    } else {
        0
    };
    let mut s = String::from("id,label");
    for i in 1..=k {
        let _ = write!(s, ",label{i}");
    }
    s.push('\n');
    for r in rows {
        s.push_str(&r.id);
        s.push(',');
        s.push_str(&r.label);
        for l in r.ranked.iter().take(k) {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
    }
    s
}

pub fn save_labels(path: impl AsRef<Path>, rows: &[LabelRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, labels_to_csv(rows)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEvaluation {
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    /// `(k, accuracy)` for `k = 1..=K` when every prediction has `K` ranked
    /// labels.
    pub topk: Vec<(usize, f64)>,
}

impl LabelEvaluation {
    pub fn topk_csv(&self) -> String {
        let mut s = String::from("k,accuracy\n");
        for (k, a) in &self.topk {
            let _ = writeln!(s, "{k},{a:.6}");
        }
        s
    }
}

/// Joins predictions to truth by id. Every truth id must be predicted; extra
/// predictions are an error. Classes are the sorted union of all labels.
pub fn evaluate_labels(predictions: &[LabelRow], truth: &[LabelRow]) -> Result<LabelEvaluation> {
    let by_id: HashMap<&str, &LabelRow> = predictions.iter().map(|r| (r.id.as_str(), r)).collect();
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truth rows",
            predictions.len(),
            truth.len()
        )));
    }
    let mut joined = Vec::with_capacity(truth.len());
    for t in truth {
        let p = by_id
            .get(t.id.as_str())
            .ok_or_else(|| Error::invalid(format!("no prediction for `{}`", t.id)))?;
        joined.push((*p, t));
    }
    let classes: Vec<String> = predictions
        .iter()
        .flat_map(|p| std::iter::once(&p.label).chain(&p.ranked))
        .chain(truth.iter().map(|t| &t.label))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pairs: Vec<(&str, &str)> = joined
        .iter()
        .map(|(p, t)| (p.label.as_str(), t.label.as_str()))
        .collect();
    let confusion = accumulate_labels(classes.clone(), &pairs)?;
    let report = MetricsReport::from_confusion(&confusion);

    let k = predictions.first().map_or(0, |p| p.ranked.len());
    let mut topk = Vec::new();
    if k > 0 && predictions.iter().all(|p| p.ranked.len() == k) {
        let index = |l: &str| {
            classes
                .iter()
                .position(|c| c == l)
                .expect("label drawn from classes")
        };
        let rankings: Vec<Vec<usize>> = joined
            .iter()
            .map(|(p, _)| p.ranked.iter().map(|l| index(l)).collect())
            .collect();
        let truths: Vec<usize> = joined.iter().map(|(_, t)| index(&t.label)).collect();
        for k in 1..=k {
            topk.push((k, topk_accuracy(&rankings, &truths, k)?));
        }
    }
    Ok(LabelEvaluation {
        confusion,
        report,
        topk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranked_files_roundtrip() {
        let rows = vec![
            LabelRow::ranked("a", vec!["tiger".into(), "leopard".into()]).unwrap(),
            LabelRow::ranked("b", vec!["leopard".into(), "tiger".into()]).unwrap(),
        ];
        let text = labels_to_csv(&rows);
        assert!(text.starts_with("id,label,label1,label2\n"));
        assert_eq!(read_labels(text.as_bytes(), "mem").unwrap(), rows);
    }

    #[test]
    fn bad_headers_and_duplicates_are_rejected() {
        assert!(read_labels("id,class\na,b\n".as_bytes(), "mem").is_err());
        assert!(read_labels("id,label,label2\na,b,c\n".as_bytes(), "mem").is_err());
        assert!(matches!(
            read_labels("id,label\na,b\na,c\n".as_bytes(), "mem"),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn identical_files_score_perfectly() {
        let rows: Vec<LabelRow> = ["x", "y", "z", "x"]
            .iter()
            .enumerate()
            .map(|(i, l)| LabelRow::new(i.to_string(), *l))
            .collect();
        let e = evaluate_labels(&rows, &rows).unwrap();
        for m in &e.report.classes {
            assert_eq!(
                [m.sensitivity, m.specificity, m.precision, m.accuracy],
                [Some(1.0); 4]
            );
        }
        assert!(e.topk.is_empty());
    }

    #[test]
    fn topk_uses_ranked_columns() {
        let pred = vec![
            LabelRow::ranked("a", vec!["x".into(), "y".into()]).unwrap(),
            LabelRow::ranked("b", vec!["x".into(), "y".into()]).unwrap(),
        ];
        let truth = vec![LabelRow::new("a", "x"), LabelRow::new("b", "y")];
        let e = evaluate_labels(&pred, &truth).unwrap();
        assert_eq!(e.topk, vec![(1, 0.5), (2, 1.0)]);
        assert!(evaluate_labels(&pred[..1], &truth).is_err());
    }
}
