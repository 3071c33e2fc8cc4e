//! Line-delimited JSON corpora and the dense binary probability side-car.
//!
//! One document per line:
//!
//! ```json
//! {"doc_id":"r1","tokens":[{"text":"56"},{"text":".","joins_previous":true}],
//!  "label_vocab":["O","B-total","I-total"],"probs":[[0.1,0.9,0.0],[0.2,0.0,0.8]],
//!  "probs_are_log":false,"gold_labels":["B-total","I-total"],"locale":"decimal-point"}
//! ```
//!
//! `probs` is `n x l` in `label_vocab` column order. With `probs_are_log` the
//! entries are natural logs and `null` stands for `-inf`; otherwise they are
//! probabilities in `[0, 1]` (`null` is read as 0). `probs` may be left empty
//! when the matrices come from a side-car file.
//!
//! The side-car is the 8-byte magic `LZKPROB1` followed by every document's
//! matrix as little-endian `f64`, row-major, in corpus order. Values are read
//! according to each record's `probs_are_log` flag.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{DocContext, Locale, Token};
use crate::error::TableError;
use crate::table::ProbTable;

pub const PROBS_BIN_MAGIC: &[u8; 8] = b"LZKPROB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRecord {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub label_vocab: Vec<String>,
    #[serde(default)]
    pub probs: Vec<Vec<Option<f64>>>,
    #[serde(default)]
    pub probs_are_log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locale: Option<Locale>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("{rows} probability rows for {tokens} tokens")]
    RowCount { rows: usize, tokens: usize },
    #[error("probability row {row} has {got} entries for {labels} labels")]
    RowLength { row: usize, got: usize, labels: usize },
    #[error("probability at row {row}, label {label} is {value}, outside [0, 1]")]
    NotAProbability { row: usize, label: usize, value: f64 },
    #[error("gold label {label:?} at position {position} is not in the vocabulary")]
    UnknownGoldLabel { position: usize, label: String },
    #[error("{got} gold labels for {tokens} tokens")]
    GoldLength { got: usize, tokens: usize },
    #[error("duplicate label {0:?} in the vocabulary")]
    DuplicateLabel(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("probability side-car: {0}")]
    Side(String),
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io { path: path.display().to_string(), source }
    }
}

impl DocRecord {
    /// Validates the record and builds its log-probability table.
    pub fn table(&self) -> Result<ProbTable, RecordError> {
        let (n, l) = (self.tokens.len(), self.label_vocab.len());
        for (i, label) in self.label_vocab.iter().enumerate() {
            if self.label_vocab[..i].contains(label) {
                return Err(RecordError::DuplicateLabel(label.clone()));
            }
        }
        if self.probs.len() != n {
            return Err(RecordError::RowCount { rows: self.probs.len(), tokens: n });
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in self.probs.iter().enumerate() {
            if row.len() != l {
                return Err(RecordError::RowLength { row: i, got: row.len(), labels: l });
            }
            let mut out = Vec::with_capacity(l);
            for (j, v) in row.iter().enumerate() {
                let logp = match (*v, self.probs_are_log) {
                    (None, _) => f64::NEG_INFINITY,
                    (Some(x), true) => x,
                    (Some(x), false) => {
                        if !(0.0..=1.0).contains(&x) {
                            return Err(RecordError::NotAProbability { row: i, label: j, value: x });
                        }
                        x.ln()
                    }
                };
                out.push(logp);
            }
            rows.push(out);
        }
        if let Some(gold) = &self.gold_labels {
            if gold.len() != n {
                return Err(RecordError::GoldLength { got: gold.len(), tokens: n });
            }
            if let Some((position, label)) = gold.iter().enumerate().find(|(_, g)| !self.label_vocab.contains(g)) {
                return Err(RecordError::UnknownGoldLabel { position, label: label.clone() });
            }
        }
        Ok(ProbTable::new(&rows)?)
    }

    /// Sets `probs` from log-probability rows, writing `-inf` as `null`.
    pub fn set_log_probs(&mut self, rows: &[Vec<f64>]) {
        self.probs_are_log = true;
        self.probs = rows.iter().map(|r| r.iter().map(|&x| (x != f64::NEG_INFINITY).then_some(x)).collect()).collect();
    }
}

/// A validated record with its table.
#[derive(Debug, Clone)]
pub struct Document {
    pub record: DocRecord,
    pub table: ProbTable,
}

impl Document {
    pub fn new(record: DocRecord) -> Result<Self, RecordError> {
        let table = record.table()?;
        Ok(Self { record, table })
    }

    pub fn ctx(&self) -> DocContext<'_> {
        DocContext::new(&self.record.tokens, self.record.locale.unwrap_or_default())
    }

    pub fn vocab(&self) -> &[String] {
        &self.record.label_vocab
    }
}

/// Parses a corpus; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let records = read_records(reader)?;
    records
        .into_iter()
        .map(|(line, r)| Document::new(r).map_err(|e| CorpusError::Line { line, message: e.to_string() }))
        .collect()
}

fn read_records<R: BufRead>(reader: R) -> Result<Vec<(usize, DocRecord)>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Line { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Line { line: line_no, message: e.to_string() })?;
        out.push((line_no, record));
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus(BufReader::new(file))
}

/// Loads a corpus whose matrices live in a side-car file.
pub fn load_corpus_with_bin(path: &Path, bin: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut records = read_records(BufReader::new(file))?;
    let mut data = Vec::new();
    File::open(bin).and_then(|mut f| f.read_to_end(&mut data)).map_err(|e| CorpusError::io(bin, e))?;
    let body = data
        .strip_prefix(PROBS_BIN_MAGIC.as_slice())
        .ok_or_else(|| CorpusError::Side("missing LZKPROB1 header".into()))?;
    if body.len() % 8 != 0 {
        return Err(CorpusError::Side(format!("body of {} bytes is not a whole number of f64s", body.len())));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for (line, record) in &mut records {
        if !record.probs.is_empty() {
            return Err(CorpusError::Line {
                line: *line,
                message: "probs given both inline and in the side-car".into(),
            });
        }
        let (n, l) = (record.tokens.len(), record.label_vocab.len());
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<Option<f64>> = values.by_ref().take(l).map(Some).collect();
            if row.len() != l {
                return Err(CorpusError::Side(format!("ran out of values at the document on line {line}")));
            }
            rows.push(row);
        }
        record.probs = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.filter(|x| *x != f64::NEG_INFINITY || !record.probs_are_log)).collect())
            .collect();
    }
    if values.next().is_some() {
        return Err(CorpusError::Side("trailing values after the last document".into()));
    }
    records
        .into_iter()
        .map(|(line, r)| Document::new(r).map_err(|e| CorpusError::Line { line, message: e.to_string() }))
        .collect()
}

pub fn write_corpus<W: Write>(mut w: W, records: &[DocRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_corpus(path: &Path, records: &[DocRecord]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_corpus(BufWriter::new(file), records).map_err(|e| CorpusError::io(path, e))
}

/// Moves every record's matrix into a side-car file, leaving `probs` empty.
pub fn save_corpus_with_bin(path: &Path, bin: &Path, records: &[DocRecord]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(bin).map_err(|e| CorpusError::io(bin, e))?);
    let mut stripped = Vec::with_capacity(records.len());
    let write = |out: &mut BufWriter<File>, stripped: &mut Vec<DocRecord>| -> io::Result<()> {
        out.write_all(PROBS_BIN_MAGIC)?;
        for r in records {
            let missing = if r.probs_are_log { f64::NEG_INFINITY } else { 0.0 };
            for row in &r.probs {
                for v in row {
                    out.write_all(&v.unwrap_or(missing).to_le_bytes())?;
                }
            }
            stripped.push(DocRecord { probs: Vec::new(), ..r.clone() });
        }
        out.flush()
    };
    write(&mut out, &mut stripped).map_err(|e| CorpusError::io(bin, e))?;
    save_corpus(path, &stripped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> DocRecord {
        DocRecord {
            doc_id: "d".into(),
            tokens: vec![Token::new("56"), Token::joined(".")],
            label_vocab: vec!["O".into(), "B-x".into()],
            probs: vec![vec![Some(0.25), Some(0.75)], vec![Some(1.0), Some(0.0)]],
            probs_are_log: false,
            gold_labels: Some(vec!["B-x".into(), "O".into()]),
            locale: None,
        }
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(read_corpus(&b""[..]).unwrap().is_empty());
        assert!(read_corpus(&b"\n  \n"[..]).unwrap().is_empty());
    }

    #[test]
    fn raw_probabilities_become_logs() {
        let doc = Document::new(record()).unwrap();
        assert_eq!(doc.table.logp(0, 1), 0.75f64.ln());
        assert_eq!(doc.table.logp(1, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn validation_errors() {
        let mut r = record();
        r.probs[1].pop();
        assert!(matches!(r.table(), Err(RecordError::RowLength { row: 1, .. })));
        let mut r = record();
        r.probs[0][0] = Some(1.5);
        assert!(matches!(r.table(), Err(RecordError::NotAProbability { .. })));
        let mut r = record();
        r.probs.pop();
        assert!(matches!(r.table(), Err(RecordError::RowCount { .. })));
        let mut r = record();
        r.gold_labels = Some(vec!["B-y".into(), "O".into()]);
        assert!(matches!(r.table(), Err(RecordError::UnknownGoldLabel { position: 0, .. })));
        let mut r = record();
        r.label_vocab[1] = "O".into();
        assert!(matches!(r.table(), Err(RecordError::DuplicateLabel(_))));
    }

    #[test]
    fn malformed_lines_are_numbered() {
        let good = serde_json::to_string(&record()).unwrap();
        let mut bad = record();
        bad.probs[0].push(Some(0.0));
        let bad = serde_json::to_string(&bad).unwrap();
        let text = format!("{good}\n\n{bad}\n");
        let err = read_corpus(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Line { line: 3, .. }), "{err}");
        let err = read_corpus(&b"{\"doc_id\":\"a\",\"extra\":1}"[..]).unwrap_err();
        assert!(matches!(err, CorpusError::Line { line: 1, .. }));
    }

    #[test]
    fn log_probs_serialize_neg_inf_as_null() {
        let mut r = record();
        r.set_log_probs(&[vec![-0.5, f64::NEG_INFINITY], vec![0.0, -2.0]]);
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains("[-0.5,null]"));
        let back: DocRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }
}
