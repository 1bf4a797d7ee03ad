use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{BdtError, LoadError, Result};

/// Feature columns of a CSV file and, when present, its raw label column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub label_name: Option<String>,
    /// Row-major.
    pub features: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.features.len().checked_div(self.feature_names.len()).unwrap_or(0)
    }
}

/// Reads a headed CSV file. Every column other than `label_column` must be
/// numeric and finite. A missing label column is an error only when
/// `require_label` is set.
pub fn read_table(path: &Path, label_column: &str, require_label: bool) -> Result<RawTable, LoadError> {
    if !path.is_file() {
        return Err(LoadError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(LoadError::Malformed("missing header row".into()));
    }
    let label_idx = headers.iter().position(|h| h == label_column);
    if label_idx.is_none() && require_label {
        return Err(LoadError::UnknownLabelColumn(label_column.to_string()));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(LoadError::Malformed("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(LoadError::Ragged { row, expected: headers.len(), found: record.len() });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let column = || headers[c].clone();
            if cell.is_empty() {
                return Err(LoadError::MissingValue { row, column: column() });
            }
            let v: f64 =
                cell.parse().map_err(|_| LoadError::NonNumeric { row, column: column(), value: cell.to_string() })?;
            if !v.is_finite() {
                return Err(LoadError::NonFinite { row, column: column() });
            }
            features.push(v);
        }
        if let (Some(l), Some(out)) = (label_idx, labels.as_mut()) {
            let cell = record[l].trim();
            if cell.is_empty() {
                return Err(LoadError::MissingValue { row, column: headers[l].clone() });
            }
            out.push(cell.to_string());
        }
    }
    Ok(RawTable {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        label_name: label_idx.map(|l| headers[l].clone()),
        features,
        labels,
    })
}

/// Maps raw label strings to class indices: non-negative integers map to
/// themselves; otherwise exactly two distinct text values map to 0 and 1 in
/// lexical order.
pub(crate) fn encode_labels(raw: &[String]) -> Result<(Vec<usize>, Vec<String>), LoadError> {
    if let Ok(ints) = raw.iter().map(|s| s.parse::<usize>()).collect::<Result<Vec<_>, _>>() {
        let classes = ints.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        return Ok((ints, (0..classes).map(|c| c.to_string()).collect()));
    }
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(LoadError::InvalidLabels(format!(
            "expected integers or two distinct values, found {} distinct values",
            distinct.len()
        )));
    }
    let names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    let labels = raw.iter().map(|s| names.iter().position(|n| n == s).unwrap()).collect();
    Ok((labels, names))
}

/// Loads a labeled dataset from CSV.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let table = read_table(path.as_ref(), label_column, true)?;
    let raw = table.labels.expect("label column required");
    let (labels, class_names) = encode_labels(&raw)?;
    Dataset::from_flat(
        table.features,
        labels,
        table.feature_names,
        table.label_name.unwrap_or_else(|| label_column.to_string()),
        class_names,
    )
    .map_err(|e| match e {
        BdtError::Input(msg) => BdtError::Load(LoadError::Malformed(msg)),
        other => other,
    })
}

/// Writes `data` as CSV: feature columns then the label column, labels
/// written by class name.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<(), LoadError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(data.label_name());
    w.write_record(&header)?;
    let mut cells: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..data.n_rows() {
        cells.clear();
        cells.extend(data.row(i).iter().map(|v| v.to_string()));
        cells.push(data.class_names()[data.label(i)].clone());
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b,y\n1.0,2,0\n3,4.5,1\n-1e3,0,1\n");
        let d = load_csv(&p, "y").unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (3, 2));
        assert_eq!(d.row(2), &[-1000.0, 0.0]);
        assert_eq!(d.labels(), &[0, 1, 1]);
    }

    #[test]
    fn text_labels_map_lexically() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x,cls\n1,yes\n2,no\n3,yes\n");
        let d = load_csv(&p, "cls").unwrap();
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.class_names(), &["no".to_string(), "yes".to_string()]);
        let p = write(&dir, "b.csv", "x,cls\n1,a\n2,b\n3,c\n");
        assert!(matches!(load_csv(&p, "cls"), Err(BdtError::Load(LoadError::InvalidLabels(_)))));
    }

    #[test]
    fn named_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(load_csv(&missing, "y"), Err(BdtError::Load(LoadError::MissingFile(_)))));

        let p = write(&dir, "empty.csv", "a,b,y\n1,,0\n2,3,1\n");
        match load_csv(&p, "y") {
            Err(BdtError::Load(LoadError::MissingValue { row, column })) => {
                assert_eq!((row, column.as_str()), (1, "b"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "ragged.csv", "a,b,y\n1,2,0\n2,1\n");
        assert!(matches!(load_csv(&p, "y"), Err(BdtError::Load(LoadError::Ragged { row: 2, .. }))));
        let p = write(&dir, "nan.csv", "a,y\nNaN,0\n2,1\n");
        assert!(matches!(load_csv(&p, "y"), Err(BdtError::Load(LoadError::NonFinite { .. }))));
        let p = write(&dir, "text.csv", "a,y\nabc,0\n2,1\n");
        assert!(matches!(load_csv(&p, "y"), Err(BdtError::Load(LoadError::NonNumeric { .. }))));
        let p = write(&dir, "ok.csv", "a,y\n1,0\n2,1\n");
        assert!(matches!(load_csv(&p, "label"), Err(BdtError::Load(LoadError::UnknownLabelColumn(_)))));
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..20),
        ) {
            let n = rows.len();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let d = Dataset::with_names(
                rows, labels, vec!["p".into(), "q".into(), "r".into()], "alert".into(),
                vec!["0".into(), "1".into()],
            ).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.csv");
            write_csv(&d, fs::File::create(&p).unwrap()).unwrap();
            let back = load_csv(&p, "alert").unwrap();
            prop_assert_eq!(back.feature_buffer(), d.feature_buffer());
            prop_assert_eq!(back.labels(), d.labels());
            prop_assert_eq!(back.feature_names(), d.feature_names());
        }
    }
}
