use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Labelled feature matrix. Labels index into `classes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: Vec<String>,
    feature_names: Vec<String>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        classes: Vec<String>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: features.cols(),
                found: feature_names.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::UnknownClass(bad.to_string()));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self {
            features,
            labels,
            classes,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Member count per class, in class order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Rows belonging to class `c`.
    pub fn class_rows(&self, c: usize) -> Matrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == c).collect();
        self.features.select_rows(&idx)
    }

    /// Writes `features..., label` with a header row, preceded by `comment`
    /// as `#` lines when given.
    pub fn write_csv(&self, path: &Path, label_column: &str, comment: Option<&str>) -> Result<()> {
        let mut w = csv::Writer::from_writer(create_with_comment(path, comment)?);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for (row, &label) in self.features.row_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.classes[label].clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Creates `path` and writes each line of `comment` prefixed by `# `.
pub fn create_with_comment(path: &Path, comment: Option<&str>) -> Result<std::fs::File> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(text) = comment {
        for line in text.lines() {
            writeln!(file, "# {line}").map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(file)
}

/// Reads an unlabelled numeric CSV, skipping `drop_column` if present.
/// Returns the remaining column names and the (possibly empty) matrix.
pub fn load_features(path: &Path, drop_column: Option<&str>) -> Result<(Vec<String>, Matrix)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let cols: Vec<usize> = (0..header.len())
        .filter(|&c| Some(header[c].as_str()) != drop_column)
        .collect();
    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for &c in &cols {
            let text = record.get(c).unwrap_or("");
            let v = text.parse::<f64>().ok().filter(|v| v.is_finite());
            values.push(v.ok_or_else(|| Error::UnparseableValue {
                row: i + 1,
                column: header[c].clone(),
                value: text.to_string(),
            })?);
        }
        n += 1;
    }
    let names = cols.iter().map(|&c| header[c].clone()).collect();
    Ok((names, Matrix::from_vec(n, cols.len(), values)))
}

/// Text-to-number map for one categorical column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub column: String,
    pub levels: Vec<(String, f64)>,
}

/// How to read a labelled CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    #[serde(default)]
    pub categorical_encodings: Vec<CategoricalEncoding>,
    /// Declared label set; inferred (sorted) when absent.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    #[serde(default)]
    pub expected_features: Option<usize>,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            categorical_encodings: Vec::new(),
            classes: None,
            expected_rows: None,
            expected_features: None,
        }
    }

    /// South African heart disease data: famhist is Present/Absent, label `chd`.
    pub fn saheart() -> Self {
        Self {
            label_column: "chd".into(),
            categorical_encodings: vec![CategoricalEncoding {
                column: "famhist".into(),
                levels: vec![("Present".into(), 1.0), ("Absent".into(), 0.0)],
            }],
            classes: Some(vec!["0".into(), "1".into()]),
            expected_rows: Some(462),
            expected_features: Some(9),
        }
    }

    /// Haberman survival data: status 1 survived five years, 2 died.
    pub fn haberman() -> Self {
        Self {
            label_column: "status".into(),
            categorical_encodings: Vec::new(),
            classes: Some(vec!["1".into(), "2".into()]),
            expected_rows: Some(306),
            expected_features: Some(3),
        }
    }

    fn encoding(&self, column: &str) -> Option<&CategoricalEncoding> {
        self.categorical_encodings.iter().find(|e| e.column == column)
    }
}

/// Reads a header-first CSV file into a [`Dataset`].
///
/// Row coordinates in errors count data rows from 1.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_pos = header
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| {
            Error::SchemaMismatch(format!("label column '{}' not in header", schema.label_column))
        })?;
    for enc in &schema.categorical_encodings {
        if !header.contains(&enc.column) {
            return Err(Error::SchemaMismatch(format!(
                "categorical column '{}' not in header",
                enc.column
            )));
        }
    }
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_pos).collect();
    if let Some(d) = schema.expected_features {
        if feature_cols.len() != d {
            return Err(Error::SchemaMismatch(format!(
                "expected {d} feature columns, found {}",
                feature_cols.len()
            )));
        }
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |c: usize| record.get(c).unwrap_or("");
        for &c in &feature_cols {
            let text = cell(c);
            let parsed = match schema.encoding(&header[c]) {
                Some(enc) => enc.levels.iter().find(|(k, _)| k == text).map(|(_, v)| *v),
                None => text.parse::<f64>().ok().filter(|v| v.is_finite()),
            };
            values.push(parsed.ok_or_else(|| Error::UnparseableValue {
                row,
                column: header[c].clone(),
                value: text.to_string(),
            })?);
        }
        let label = cell(label_pos);
        if label.is_empty() {
            return Err(Error::UnparseableValue {
                row,
                column: schema.label_column.clone(),
                value: String::new(),
            });
        }
        raw_labels.push((row, label.to_string()));
    }
    let n = raw_labels.len();
    if let Some(expected) = schema.expected_rows {
        if n != expected {
            return Err(Error::SchemaMismatch(format!("expected {expected} rows, found {n}")));
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("{} has no data rows", path.display())));
    }

    let classes = match &schema.classes {
        Some(c) => c.clone(),
        None => raw_labels
            .iter()
            .map(|(_, l)| l.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let mut labels = Vec::with_capacity(n);
    for (row, l) in raw_labels {
        let idx = classes.iter().position(|c| *c == l).ok_or_else(|| Error::UnparseableValue {
            row,
            column: schema.label_column.clone(),
            value: l.clone(),
        })?;
        labels.push(idx);
    }
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let features = Matrix::from_vec(n, feature_cols.len(), values);
    let provenance = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(features, labels, classes, feature_names, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn categorical_and_label_columns() {
        let f = write("a,flag,y\n1.5,Present,1\n2,Absent,0\n");
        let mut schema = CsvSchema::new("y");
        schema.categorical_encodings = CsvSchema::saheart().categorical_encodings;
        schema.categorical_encodings[0].column = "flag".into();
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.features().row(0), &[1.5, 1.0]);
        assert_eq!(ds.features().row(1), &[2.0, 0.0]);
        assert_eq!(ds.classes(), &["0".to_string(), "1".to_string()]);
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn missing_cell_names_coordinates() {
        let f = write("a,b,y\n1,2,0\n3,,1\n");
        match load_csv(f.path(), &CsvSchema::new("y")) {
            Err(Error::UnparseableValue { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_level_is_unparseable() {
        let f = write("famhist,chd\nMaybe,1\n");
        let mut schema = CsvSchema::saheart();
        schema.expected_rows = None;
        schema.expected_features = None;
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::UnparseableValue { row: 1, .. })
        ));
    }

    #[test]
    fn header_mismatch() {
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), &CsvSchema::new("y")), Err(Error::SchemaMismatch(_))));
        let f = write("a,b,y\n1,2,0\n");
        let mut schema = CsvSchema::new("y");
        schema.expected_rows = Some(5);
        assert!(matches!(load_csv(f.path(), &schema), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let f = write("a,b,y\n1.25,-2,x\n3,4e-3,z\n");
        let ds = load_csv(f.path(), &CsvSchema::new("y")).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(out.path(), "y", Some("made by test\nsecond line")).unwrap();
        let text = std::fs::read_to_string(out.path()).unwrap();
        assert!(text.starts_with("# made by test\n# second line\na,b,y\n"));
        let back = load_csv(out.path(), &CsvSchema::new("y")).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn features_without_labels() {
        let f = write("# note\nx0,x1,label\n1,2,a\n3,4,b\n");
        let (names, m) = load_features(f.path(), Some("label")).unwrap();
        assert_eq!(names, ["x0", "x1"]);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        let f = write("x0,x1\n");
        let (_, m) = load_features(f.path(), Some("label")).unwrap();
        assert_eq!((m.rows(), m.cols()), (0, 2));
    }
}
