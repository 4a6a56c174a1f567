//! JSONL ingestion.
//!
//! Files are read in batches of complete lines; each batch is parsed in
//! parallel and results are reassembled in line order, so memory stays bounded
//! by the batch size regardless of file size.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::{QueryRecord, Trajectory, TrajectoryRecord};

const BATCH_BYTES: usize = 4 << 20;

/// One non-blank input line with its 1-based line number.
#[derive(Debug, Clone, Copy)]
pub struct Line<'a> {
    pub number: usize,
    pub text: &'a str,
}

/// Reads `reader` in batches of whole lines and hands each batch to `on_batch`.
/// Blank lines are skipped but still counted.
pub fn scan_lines<R: BufRead>(
    mut reader: R,
    mut on_batch: impl FnMut(&[Line<'_>]) -> Result<()>,
) -> Result<()> {
    let mut buf = String::with_capacity(BATCH_BYTES + 4096);
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        spans.clear();
        let mut eof = false;
        while buf.len() < BATCH_BYTES {
            let start = buf.len();
            let read = reader.read_line(&mut buf).map_err(|e| {
                if e.kind() == std::io::ErrorKind::InvalidData {
                    Error::Json {
                        line: line_no + 1,
                        message: "invalid UTF-8".into(),
                    }
                } else {
                    Error::Invalid(format!("read failed after line {line_no}: {e}"))
                }
            })?;
            if read == 0 {
                eof = true;
                break;
            }
            line_no += 1;
            let text = buf[start..].trim_end_matches(['\n', '\r']);
            if !text.trim().is_empty() {
                spans.push((line_no, start, start + text.len()));
            }
        }
        if !spans.is_empty() {
            let lines: Vec<Line<'_>> = spans
                .iter()
                .map(|&(number, a, b)| Line {
                    number,
                    text: &buf[a..b],
                })
                .collect();
            on_batch(&lines)?;
        }
        if eof {
            return Ok(());
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

/// Parses every line of a batch in parallel; returns results in line order or
/// the error from the earliest failing line.
pub(crate) fn parse_batch<T: Send>(
    lines: &[Line<'_>],
    parse: impl Fn(Line<'_>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let parsed: Vec<Result<T>> = lines.par_iter().map(|line| parse(*line)).collect();
    parsed.into_iter().collect()
}

/// Query records indexed by id.
#[derive(Debug, Clone, Default)]
pub struct QueryCorpus {
    records: Vec<QueryRecord>,
    index: HashMap<String, usize>,
}

impl QueryCorpus {
    /// Builds a corpus, rejecting invalid records and duplicate ids.
    pub fn from_records(records: Vec<QueryRecord>) -> Result<Self> {
        let mut corpus = QueryCorpus::default();
        for (i, record) in records.into_iter().enumerate() {
            corpus.push(i + 1, record)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, line: usize, record: QueryRecord) -> Result<()> {
        record
            .validate()
            .map_err(|message| Error::Invariant { line, message })?;
        if self.index.contains_key(&record.query_id) {
            return Err(Error::DuplicateQuery {
                line,
                query_id: record.query_id,
            });
        }
        self.index.insert(record.query_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&QueryRecord> {
        self.index.get(query_id).map(|&i| &self.records[i])
    }

    pub fn position(&self, query_id: &str) -> Option<usize> {
        self.index.get(query_id).copied()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn parse_queries<R: BufRead>(reader: R) -> Result<QueryCorpus> {
    let mut corpus = QueryCorpus::default();
    scan_lines(reader, |lines| {
        let parsed = parse_batch(lines, |line| {
            serde_json::from_str::<QueryRecord>(line.text)
                .map_err(|e| Error::from_json(line.number, e))
        })?;
        for (line, record) in lines.iter().zip(parsed) {
            corpus.push(line.number, record)?;
        }
        Ok(())
    })?;
    Ok(corpus)
}

/// Reads `queries.jsonl`.
pub fn read_queries(path: impl AsRef<Path>) -> Result<QueryCorpus> {
    let path = path.as_ref();
    parse_queries(open(path)?).map_err(|e| with_path(path, e))
}

fn parse_trajectory_line(line: Line<'_>, corpus: Option<&QueryCorpus>) -> Result<Trajectory> {
    let record: TrajectoryRecord =
        serde_json::from_str(line.text).map_err(|e| Error::from_json(line.number, e))?;
    let gold = match corpus {
        Some(corpus) => match corpus.get(&record.query_id) {
            Some(query) => Some(query.gold_answer.as_str()),
            None => {
                return Err(Error::UnknownQuery {
                    line: line.number,
                    query_id: record.query_id,
                })
            }
        },
        None => None,
    };
    Trajectory::from_record(record, gold).map_err(|message| Error::Invariant {
        line: line.number,
        message,
    })
}

/// Parses trajectories. With a corpus, query ids are checked and missing
/// `correct` flags are computed against the gold answer; without one, every
/// line must carry `correct`.
pub fn parse_trajectories<R: BufRead>(
    reader: R,
    corpus: Option<&QueryCorpus>,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    scan_lines(reader, |lines| {
        out.extend(parse_batch(lines, |line| parse_trajectory_line(line, corpus))?);
        Ok(())
    })?;
    Ok(out)
}

/// Reads `trajectories.jsonl`.
pub fn read_trajectories(
    path: impl AsRef<Path>,
    corpus: Option<&QueryCorpus>,
) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    parse_trajectories(open(path)?, corpus).map_err(|e| with_path(path, e))
}

/// Reads any JSONL file of `T` records.
pub fn read_jsonl<T>(path: impl AsRef<Path>) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned + Send,
{
    let path = path.as_ref();
    let mut out = Vec::new();
    scan_lines(open(path)?, |lines| {
        out.extend(parse_batch(lines, |line| {
            serde_json::from_str::<T>(line.text).map_err(|e| Error::from_json(line.number, e))
        })?);
        Ok(())
    })
    .map_err(|e| with_path(path, e))?;
    Ok(out)
}

/// Writes one JSON object per line.
pub fn write_jsonl<'a, T, I>(path: impl AsRef<Path>, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::Invalid(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Io { .. } => err,
        other => Error::Invalid(format!("{}: {}", path.display(), other)),
    }
}
