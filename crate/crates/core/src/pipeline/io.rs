//! JSONL readers and writers for example, prediction and report records.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{validate_example, validate_prediction, DocumentExample, PredictionTuple};

/// Opens `path` for reading; `-` means standard input.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Box::new(BufReader::new(file)))
}

/// Creates `path` for writing; `-` means standard output.
pub fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Box::new(BufWriter::new(file)))
}

/// Iterates the non-blank lines of a JSONL stream as parsed values, tagging
/// errors with 1-based line numbers.
pub struct JsonLines<R> {
    reader: R,
    path: PathBuf,
    line: usize,
    buf: String,
}

impl<R: BufRead> JsonLines<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>) -> Self {
        JsonLines {
            reader,
            path: path.into(),
            line: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonLines<R> {
    type Item = Result<(usize, Value)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) if self.buf.trim().is_empty() => continue,
                Ok(_) => {
                    let line = self.line;
                    return Some(
                        serde_json::from_str(&self.buf)
                            .map(|v| (line, v))
                            .map_err(|source| Error::Json { line, source }),
                    );
                }
                Err(source) => {
                    return Some(Err(Error::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
            }
        }
    }
}

pub fn read_examples<R: BufRead>(reader: R, path: impl Into<PathBuf>) -> impl Iterator<Item = Result<DocumentExample>> {
    JsonLines::new(reader, path).map(|item| {
        let (line, value) = item?;
        validate_example(&value).map_err(|e| e.at_line(line))
    })
}

pub fn read_predictions<R: BufRead>(reader: R, path: impl Into<PathBuf>) -> impl Iterator<Item = Result<PredictionTuple>> {
    JsonLines::new(reader, path).map(|item| {
        let (line, value) = item?;
        validate_prediction(&value).map_err(|e| e.at_line(line))
    })
}

pub fn load_examples(path: &Path) -> Result<Vec<DocumentExample>> {
    read_examples(open_input(path)?, path).collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionTuple>> {
    read_predictions(open_input(path)?, path).collect()
}

/// Writes one compact JSON object followed by `\n`.
pub fn write_json_line<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer(&mut *out, value).map_err(|e| io_err(io::Error::other(e)))?;
    out.write_all(b"\n").map_err(io_err)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = open_output(path)?;
    for item in items {
        write_json_line(&mut *out, item, path)?;
    }
    out.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a pretty-printed JSON document followed by `\n`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(io::Error::other(e)))?;
    out.write_all(b"\n").map_err(io_err)?;
    out.flush().map_err(io_err)
}
