//! Matrix files, dataset manifests, model files and reports.
//!
//! Matrices are stored either as CSV text (one row per line, no header) or as
//! binary-v1: the magic `CLAM`, version byte `0x01`, rows and cols as
//! little-endian `u64`, then the entries as little-endian `f64` in row-major
//! order. Model files (`CLAZ`, version `0x01`) hold `λ`, the source names,
//! `β`, then `A_s` and the fused `W_s` as embedded binary-v1 matrices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{SemanticSpace, ZslDataset};
use crate::error::{ClaError, Result};
use crate::eval::EvaluationReport;
use crate::linalg::DenseMatrix;
use crate::model::ClaModel;

pub const MATRIX_MAGIC: &[u8; 4] = b"CLAM";
pub const MODEL_MAGIC: &[u8; 4] = b"CLAZ";
pub const FORMAT_VERSION: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    TextCsv,
    BinaryV1,
}

impl MatrixFormat {
    /// `.csv` is text; `.bin` and `.clam` are binary-v1.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(MatrixFormat::TextCsv),
            Some("bin") | Some("clam") => Ok(MatrixFormat::BinaryV1),
            _ => Err(ClaError::Format(format!(
                "cannot infer matrix format of {} (expected .csv, .bin or .clam)",
                path.display()
            ))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::TextCsv => "csv",
            MatrixFormat::BinaryV1 => "bin",
        }
    }
}

fn check_finite(values: &[f64], cols: usize) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(ClaError::Validation(format!(
            "non-finite value at row {}, column {}",
            pos / cols.max(1),
            pos % cols.max(1)
        )));
    }
    Ok(())
}

/// Parses CSV text. Blank trailing lines are ignored.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| ClaError::Parse {
                line: line_no,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(ClaError::Validation(format!(
                    "non-finite value '{field}' on line {line_no}"
                )));
            }
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(ClaError::Parse {
                    line: line_no,
                    message: format!("row has {width} values, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| ClaError::Parse {
        line: 1,
        message: "no rows".into(),
    })?;
    DenseMatrix::from_row_major(rows, cols, values)
}

/// CSV text that parses back to the same bits (shortest round-trip form).
pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 8 * m.as_slice().len());
    write_matrix(&mut out, m);
    out
}

fn write_matrix(out: &mut Vec<u8>, m: &DenseMatrix) {
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Sequential reader over a byte buffer; running out of bytes is a format
/// error.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                ClaError::Format(format!(
                    "truncated data: need {n} bytes for {what} at offset {}, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self, what: &str, elem_size: usize) -> Result<usize> {
        let n = self.u64(what)?;
        let left = (self.bytes.len() - self.pos) as u64;
        if n.saturating_mul(elem_size as u64) > left {
            return Err(ClaError::Format(format!(
                "truncated data: {what} declares {n} entries, only {left} bytes left"
            )));
        }
        Ok(n as usize)
    }

    fn magic(&mut self, expected: &[u8; 4], version: u8) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(ClaError::Format(format!(
                "bad magic {:?} ({}), expected {:?}",
                String::from_utf8_lossy(found),
                found
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                String::from_utf8_lossy(expected)
            )));
        }
        let found = self.u8("version")?;
        if found != version {
            return Err(ClaError::UnsupportedVersion {
                found,
                expected: version,
            });
        }
        Ok(())
    }

    fn matrix(&mut self) -> Result<DenseMatrix> {
        self.magic(MATRIX_MAGIC, FORMAT_VERSION)?;
        let rows = self.u64("rows")?;
        let cols = self.u64("cols")?;
        let count = rows
            .checked_mul(cols)
            .filter(|&n| n.saturating_mul(8) <= (self.bytes.len() - self.pos) as u64)
            .ok_or_else(|| {
                ClaError::Format(format!(
                    "truncated data: {rows}x{cols} matrix needs more than the {} bytes left",
                    self.bytes.len() - self.pos
                ))
            })? as usize;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(self.f64("matrix entry")?);
        }
        check_finite(&values, cols as usize)?;
        DenseMatrix::from_row_major(rows as usize, cols as usize, values)
    }

    fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(ClaError::Format(format!(
                "{} trailing bytes after {what}",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader::new(bytes);
    let m = r.matrix()?;
    r.finish("matrix")?;
    Ok(m)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| ClaError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ClaError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| ClaError::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let parsed = match format {
        MatrixFormat::BinaryV1 => decode_matrix(&bytes),
        MatrixFormat::TextCsv => std::str::from_utf8(&bytes)
            .map_err(|e| ClaError::Format(format!("not UTF-8: {e}")))
            .and_then(parse_csv),
    };
    parsed.map_err(|e| ClaError::in_file(path, e))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::BinaryV1 => encode_matrix(m),
        MatrixFormat::TextCsv => to_csv(m).into_bytes(),
    };
    write_file(path.as_ref(), &bytes)
}

/// Loads a matrix, choosing the format from the file extension.
pub fn load_matrix_auto(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    load_matrix(path, MatrixFormat::from_path(path)?)
}

pub fn save_matrix_auto(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    save_matrix(path, m, MatrixFormat::from_path(path)?)
}

/// Class indices from a single-row or single-column matrix of whole numbers.
pub fn labels_from_matrix(m: &DenseMatrix) -> Result<Vec<usize>> {
    if m.rows() != 1 && m.cols() != 1 {
        return Err(ClaError::Shape(format!(
            "labels must be a single row or column, found {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    m.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                Err(ClaError::Validation(format!(
                    "label {v} at position {i} is not a class index"
                )))
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

/// Labels as a single column.
pub fn labels_to_matrix(labels: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(labels.len(), 1, |i, _| labels[i] as f64)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    labels_from_matrix(&load_matrix_auto(path)?).map_err(|e| ClaError::in_file(path, e))
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    save_matrix_auto(path, &labels_to_matrix(labels))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticEntry {
    pub name: String,
    /// `dim x k_s` prototypes.
    pub seen: PathBuf,
    /// `dim x k_u` prototypes.
    pub unseen: PathBuf,
}

/// TOML description of a dataset on disk. Paths are relative to the
/// manifest's directory.
///
/// ```toml
/// seen_features = "seen_features.bin"    # d x N_s
/// seen_labels = "seen_labels.csv"
/// unseen_features = "unseen_features.bin" # d x N_u
/// unseen_truth = "unseen_truth.csv"       # optional
/// k_seen = 40
/// k_unseen = 10
/// feature_dim = 1024
///
/// [[semantic_space]]
/// name = "att"
/// seen = "att_seen.csv"
/// unseen = "att_unseen.csv"
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seen_features: PathBuf,
    pub seen_labels: PathBuf,
    pub unseen_features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unseen_truth: Option<PathBuf>,
    pub k_seen: usize,
    pub k_unseen: usize,
    pub feature_dim: usize,
    #[serde(rename = "semantic_space", default)]
    pub semantic_spaces: Vec<SemanticEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: DatasetManifest =
            toml::from_str(text).map_err(|e| ClaError::Format(format!("invalid manifest: {e}")))?;
        if manifest.semantic_spaces.is_empty() {
            return Err(ClaError::Validation(
                "manifest lists no [[semantic_space]]".into(),
            ));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ClaError::io(path, e))?;
        Self::parse(&text).map_err(|e| ClaError::in_file(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

fn load_checked(path: &Path, rows: Option<usize>, cols: usize, what: &str) -> Result<DenseMatrix> {
    let m = load_matrix_auto(path)?;
    let rows_ok = rows.is_none_or(|r| r == m.rows());
    if !rows_ok || m.cols() != cols {
        let expected = match rows {
            Some(r) => format!("{r}x{cols}"),
            None => format!("{cols} columns"),
        };
        return Err(ClaError::in_file(
            path,
            ClaError::Shape(format!(
                "{what}: expected {expected}, found {}x{}",
                m.rows(),
                m.cols()
            )),
        ));
    }
    Ok(m)
}

/// Loads every file named by the manifest at `path` and checks the shapes.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<ZslDataset> {
    let path = path.as_ref();
    let manifest = DatasetManifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    load_dataset_from(&manifest, base)
}

pub fn load_dataset_from(manifest: &DatasetManifest, base: &Path) -> Result<ZslDataset> {
    let d = manifest.feature_dim;
    let seen_features = load_matrix_auto(base.join(&manifest.seen_features))?;
    let n_s = seen_features.cols();
    let seen_features = check_shape(
        seen_features,
        &base.join(&manifest.seen_features),
        d,
        n_s,
        "seen features",
    )?;
    let seen_labels = load_labels(base.join(&manifest.seen_labels))?;
    if seen_labels.len() != n_s {
        return Err(ClaError::in_file(
            base.join(&manifest.seen_labels),
            ClaError::Shape(format!(
                "expected {n_s} labels, found {}",
                seen_labels.len()
            )),
        ));
    }
    let unseen_path = base.join(&manifest.unseen_features);
    let unseen_features = load_matrix_auto(&unseen_path)?;
    let n_u = unseen_features.cols();
    let unseen_features = check_shape(unseen_features, &unseen_path, d, n_u, "unseen features")?;
    let unseen_truth = match &manifest.unseen_truth {
        Some(p) => {
            let truth = load_labels(base.join(p))?;
            if truth.len() != n_u {
                return Err(ClaError::in_file(
                    base.join(p),
                    ClaError::Shape(format!("expected {n_u} labels, found {}", truth.len())),
                ));
            }
            Some(truth)
        }
        None => None,
    };
    let semantic_spaces = manifest
        .semantic_spaces
        .iter()
        .map(|s| {
            let seen = load_checked(
                &base.join(&s.seen),
                None,
                manifest.k_seen,
                &format!("semantic space '{}' seen prototypes", s.name),
            )?;
            let unseen = load_checked(
                &base.join(&s.unseen),
                Some(seen.rows()),
                manifest.k_unseen,
                &format!("semantic space '{}' unseen prototypes", s.name),
            )?;
            Ok(SemanticSpace {
                name: s.name.clone(),
                seen,
                unseen,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = ZslDataset {
        seen_features,
        seen_labels,
        unseen_features,
        unseen_truth,
        semantic_spaces,
        k_seen: manifest.k_seen,
        k_unseen: manifest.k_unseen,
    };
    dataset.validate()?;
    Ok(dataset)
}

fn check_shape(
    m: DenseMatrix,
    path: &Path,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DenseMatrix> {
    if m.shape() != (rows, cols) {
        return Err(ClaError::in_file(
            path,
            ClaError::Shape(format!(
                "{what}: expected {rows}x{cols}, found {}x{}",
                m.rows(),
                m.cols()
            )),
        ));
    }
    Ok(m)
}

/// Writes every part of `dataset` into `dir` plus `manifest.toml`; returns
/// the manifest path.
pub fn save_dataset(
    dataset: &ZslDataset,
    dir: impl AsRef<Path>,
    format: MatrixFormat,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let ext = format.extension();
    let file = |stem: &str| PathBuf::from(format!("{stem}.{ext}"));
    let mut manifest = DatasetManifest {
        seen_features: file("seen_features"),
        seen_labels: PathBuf::from("seen_labels.csv"),
        unseen_features: file("unseen_features"),
        unseen_truth: None,
        k_seen: dataset.k_seen,
        k_unseen: dataset.k_unseen,
        feature_dim: dataset.feature_dim(),
        semantic_spaces: Vec::new(),
    };
    save_matrix(
        dir.join(&manifest.seen_features),
        &dataset.seen_features,
        format,
    )?;
    save_labels(dir.join(&manifest.seen_labels), &dataset.seen_labels)?;
    save_matrix(
        dir.join(&manifest.unseen_features),
        &dataset.unseen_features,
        format,
    )?;
    if let Some(truth) = &dataset.unseen_truth {
        let p = PathBuf::from("unseen_truth.csv");
        save_labels(dir.join(&p), truth)?;
        manifest.unseen_truth = Some(p);
    }
    for s in &dataset.semantic_spaces {
        let entry = SemanticEntry {
            name: s.name.clone(),
            seen: file(&format!("{}_seen", s.name)),
            unseen: file(&format!("{}_unseen", s.name)),
        };
        save_matrix(dir.join(&entry.seen), &s.seen, format)?;
        save_matrix(dir.join(&entry.unseen), &s.unseen, format)?;
        manifest.semantic_spaces.push(entry);
    }
    let path = dir.join("manifest.toml");
    write_file(&path, manifest.to_toml().as_bytes())?;
    Ok(path)
}

pub fn encode_model(model: &ClaModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&model.lambda.to_le_bytes());
    out.extend_from_slice(&(model.source_names.len() as u64).to_le_bytes());
    for name in &model.source_names {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(model.beta.len() as u64).to_le_bytes());
    for b in &model.beta {
        out.extend_from_slice(&b.to_le_bytes());
    }
    write_matrix(&mut out, &model.a_s);
    write_matrix(&mut out, &model.fused_w_s);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ClaModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC, FORMAT_VERSION)?;
    let lambda = r.f64("lambda")?;
    let n = r.len("source name count", 8)?;
    let mut source_names = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.len("source name length", 1)?;
        let name = std::str::from_utf8(r.take(len, "source name")?)
            .map_err(|e| ClaError::Format(format!("source name is not UTF-8: {e}")))?;
        source_names.push(name.to_owned());
    }
    let n = r.len("beta length", 8)?;
    let beta = (0..n).map(|_| r.f64("beta")).collect::<Result<Vec<_>>>()?;
    let a_s = r.matrix()?;
    let fused_w_s = r.matrix()?;
    r.finish("model")?;
    let model = ClaModel {
        a_s,
        fused_w_s,
        lambda,
        source_names,
        beta,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &ClaModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_model(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClaModel> {
    let path = path.as_ref();
    decode_model(&read_file(path)?).map_err(|e| ClaError::in_file(path, e))
}

/// `x` with six significant digits in fixed notation (`100` → `100.000`).
pub fn format_number(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.5}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Line-oriented `key=value` form of a report.
pub fn report_to_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for (n, acc) in &report.top_n_accuracy {
        out.push_str(&format!("top{n}={}\n", format_number(*acc)));
    }
    for (c, acc) in report.per_class_accuracy.iter().enumerate() {
        let v = acc.map_or_else(|| "absent".to_owned(), format_number);
        out.push_str(&format!("class{c}={v}\n"));
    }
    out.push_str(&format!("n_samples={}\n", report.n_samples));
    let absent: Vec<String> = report
        .absent_classes
        .iter()
        .map(|c| c.to_string())
        .collect();
    out.push_str(&format!("absent_classes={}\n", absent.join(",")));
    out.push_str(&format!("config_digest={}\n", report.config_digest));
    out
}

/// Writes `<stem>.txt` and `<stem>.json` into `dir`.
pub fn save_report(report: &EvaluationReport, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    write_file(
        &dir.join(format!("{stem}.txt")),
        report_to_text(report).as_bytes(),
    )?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(&dir.join(format!("{stem}.json")), json.as_bytes())
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ClaError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| ClaError::in_file(path, ClaError::Format(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_single_value() {
        assert_eq!(parse_csv("3.5").unwrap(), DenseMatrix::from_rows(&[&[3.5]]));
        assert_eq!(
            parse_csv("1, 2\n3,4\n\n").unwrap(),
            DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]])
        );
    }

    #[test]
    fn csv_errors() {
        match parse_csv("1,2\n3\n") {
            Err(ClaError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_csv("1,x"),
            Err(ClaError::Parse { line: 1, .. })
        ));
        assert!(matches!(parse_csv("1,NaN"), Err(ClaError::Validation(_))));
        assert!(matches!(parse_csv("inf"), Err(ClaError::Validation(_))));
        assert!(matches!(parse_csv(""), Err(ClaError::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DenseMatrix::from_rows(&[&[0.1, -1e-300, 1.0 / 3.0], &[f64::MAX, 5e-324, -0.0]]);
        let back = parse_csv(&to_csv(&m)).unwrap();
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn binary_layout() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0]]);
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..5], b"CLAM\x01");
        assert_eq!(&bytes[5..13], &1u64.to_le_bytes());
        assert_eq!(&bytes[13..21], &2u64.to_le_bytes());
        assert_eq!(&bytes[21..29], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 37);
        assert_eq!(decode_matrix(&bytes).unwrap(), m);
    }

    #[test]
    fn binary_errors() {
        let bytes = encode_matrix(&DenseMatrix::identity(2));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = decode_matrix(&bad).unwrap_err();
        assert!(matches!(err, ClaError::Format(ref m) if m.contains("XLAM")));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            decode_matrix(&v2),
            Err(ClaError::UnsupportedVersion {
                found: 2,
                expected: 1
            })
        ));
        for cut in [0, 3, 5, 12, 20, bytes.len() - 1] {
            assert!(
                decode_matrix(&bytes[..cut]).unwrap_err().is_io_or_format(),
                "cut at {cut}"
            );
        }
        let mut huge = bytes[..21].to_vec();
        huge[5..13].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_matrix(&huge).unwrap_err().is_io_or_format());
        let mut nan = bytes.clone();
        nan[21..29].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_matrix(&nan), Err(ClaError::Validation(_))));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode_matrix(&trailing).is_err());
    }

    #[test]
    fn labels_must_be_whole_numbers() {
        assert_eq!(
            labels_from_matrix(&DenseMatrix::from_rows(&[&[0.0, 2.0, 1.0]])).unwrap(),
            vec![0, 2, 1]
        );
        assert_eq!(
            labels_from_matrix(&labels_to_matrix(&[3, 1])).unwrap(),
            vec![3, 1]
        );
        assert!(labels_from_matrix(&DenseMatrix::from_rows(&[&[0.5]])).is_err());
        assert!(labels_from_matrix(&DenseMatrix::from_rows(&[&[-1.0]])).is_err());
        assert!(labels_from_matrix(&DenseMatrix::identity(2)).is_err());
    }

    #[test]
    fn manifest_parsing() {
        let text = r#"
            seen_features = "xs.bin"
            seen_labels = "ys.csv"
            unseen_features = "xu.bin"
            k_seen = 2
            k_unseen = 1
            feature_dim = 3

            [[semantic_space]]
            name = "att"
            seen = "att_s.csv"
            unseen = "att_u.csv"
        "#;
        let m = DatasetManifest::parse(text).unwrap();
        assert_eq!(m.unseen_truth, None);
        assert_eq!(m.semantic_spaces[0].name, "att");
        assert_eq!(DatasetManifest::parse(&m.to_toml()).unwrap(), m);
        let no_spaces = text.split("[[semantic_space]]").next().unwrap();
        assert!(DatasetManifest::parse(no_spaces).is_err());
        assert!(DatasetManifest::parse("k_seen = 'x'")
            .unwrap_err()
            .is_io_or_format());
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_number(100.0), "100.000");
        assert_eq!(format_number(86.3), "86.3000");
        assert_eq!(format_number(0.001234567), "0.00123457");
        assert_eq!(format_number(0.0), "0.00000");
        assert_eq!(format_number(-2.5), "-2.50000");
        assert_eq!(format_number(1234567.0), "1234567");
    }
}
