//! Streaming readers and writers for the two view-matrix storage formats.
//!
//! Both readers hand out instances (columns of the `dim x n` view matrix)
//! in file order a chunk at a time, so a full pass over a view needs memory
//! proportional to one chunk, never to the whole matrix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

fn parse_value(tok: &str) -> std::result::Result<f64, String> {
    let v: f64 = tok
        .parse()
        .map_err(|_| format!("expected a real number, got {:?}", tok))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {:?}", tok));
    }
    if v < 0.0 {
        return Err(format!("negative value {} not allowed", v));
    }
    Ok(v)
}

/// Reader for the dense text format: one instance per line, `dim`
/// whitespace-separated values. Generic over the byte source so the same
/// parsing path serves files and in-memory buffers.
pub struct DenseReader<R = BufReader<File>> {
    path: PathBuf,
    reader: R,
    dim: usize,
    scale: f64,
    line_no: usize,
    buf: String,
}

impl DenseReader<BufReader<File>> {
    pub fn open(path: &Path, dim: usize, scale: f64) -> Result<DenseReader> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(DenseReader {
            path: path.to_path_buf(),
            reader: BufReader::new(file),
            dim,
            scale,
            line_no: 0,
            buf: String::new(),
        })
    }

    pub fn rewind(&mut self) -> Result<()> {
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        self.reader = BufReader::new(file);
        self.line_no = 0;
        Ok(())
    }
}

impl<R: BufRead> DenseReader<R> {
    /// Wrap an already-open byte source; errors report `<memory>` as the
    /// origin.
    pub fn from_reader(reader: R, dim: usize, scale: f64) -> DenseReader<R> {
        DenseReader {
            path: PathBuf::from("<memory>"),
            reader,
            dim,
            scale,
            line_no: 0,
            buf: String::new(),
        }
    }

    /// Read the next `count` instances into a `dim x count` matrix.
    /// Errors if the file ends first.
    pub fn read_columns(&mut self, count: usize) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.dim, count));
        for col in 0..count {
            loop {
                self.buf.clear();
                let n = self
                    .reader
                    .read_line(&mut self.buf)
                    .map_err(|e| Error::io(&self.path, e))?;
                if n == 0 {
                    return Err(Error::parse(
                        &self.path,
                        self.line_no + 1,
                        "unexpected end of file",
                    ));
                }
                self.line_no += 1;
                if !self.buf.trim().is_empty() {
                    break;
                }
            }
            let mut fields = 0usize;
            for tok in self.buf.split_whitespace() {
                if fields >= self.dim {
                    return Err(Error::parse(
                        &self.path,
                        self.line_no,
                        format!("expected {} values per line, found more", self.dim),
                    ));
                }
                let v = parse_value(tok).map_err(|msg| Error::parse(&self.path, self.line_no, msg))?;
                out[[fields, col]] = v * self.scale;
                fields += 1;
            }
            if fields != self.dim {
                return Err(Error::parse(
                    &self.path,
                    self.line_no,
                    format!("expected {} values per line, found {}", self.dim, fields),
                ));
            }
        }
        Ok(out)
    }

    /// Skip the next `count` instances without materialising them.
    pub fn skip_columns(&mut self, count: usize) -> Result<()> {
        self.read_columns(count).map(|_| ())
    }
}

/// Reader for the sparse coordinate format. Entries must arrive in
/// ascending `(instance, feature)` order, which is what makes column-wise
/// streaming possible.
pub struct SparseReader<R = BufReader<File>> {
    path: PathBuf,
    reader: R,
    dim: usize,
    n: usize,
    scale: f64,
    line_no: usize,
    /// Next parsed entry that belongs to a not-yet-requested instance.
    pending: Option<(usize, usize, f64)>,
    last_key: Option<(usize, usize)>,
    next_instance: usize,
}

impl SparseReader<BufReader<File>> {
    pub fn open(path: &Path, dim: usize, n: usize, scale: f64) -> Result<SparseReader> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(SparseReader {
            path: path.to_path_buf(),
            reader: BufReader::new(file),
            dim,
            n,
            scale,
            line_no: 0,
            pending: None,
            last_key: None,
            next_instance: 0,
        })
    }

    pub fn rewind(&mut self) -> Result<()> {
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        self.reader = BufReader::new(file);
        self.line_no = 0;
        self.pending = None;
        self.last_key = None;
        self.next_instance = 0;
        Ok(())
    }
}

impl<R: BufRead> SparseReader<R> {
    /// Wrap an already-open byte source; errors report `<memory>` as the
    /// origin.
    pub fn from_reader(reader: R, dim: usize, n: usize, scale: f64) -> SparseReader<R> {
        SparseReader {
            path: PathBuf::from("<memory>"),
            reader,
            dim,
            n,
            scale,
            line_no: 0,
            pending: None,
            last_key: None,
            next_instance: 0,
        }
    }

    fn read_entry(&mut self) -> Result<Option<(usize, usize, f64)>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let read = self
                .reader
                .read_line(&mut buf)
                .map_err(|e| Error::io(&self.path, e))?;
            if read == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = buf.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(si), Some(sj), Some(sv), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::parse(
                    &self.path,
                    self.line_no,
                    "expected `instance feature value`",
                ));
            };
            let i: usize = si.parse().map_err(|_| {
                Error::parse(&self.path, self.line_no, format!("bad instance index {:?}", si))
            })?;
            let j: usize = sj.parse().map_err(|_| {
                Error::parse(&self.path, self.line_no, format!("bad feature index {:?}", sj))
            })?;
            let v = parse_value(sv).map_err(|msg| Error::parse(&self.path, self.line_no, msg))?;
            if i >= self.n {
                return Err(Error::parse(
                    &self.path,
                    self.line_no,
                    format!("instance index {} out of range (n = {})", i, self.n),
                ));
            }
            if j >= self.dim {
                return Err(Error::parse(
                    &self.path,
                    self.line_no,
                    format!("feature index {} out of range (dim = {})", j, self.dim),
                ));
            }
            if let Some(last) = self.last_key {
                if (i, j) <= last {
                    return Err(Error::parse(
                        &self.path,
                        self.line_no,
                        format!(
                            "entries must be in strictly ascending (instance, feature) order; \
                             ({}, {}) follows ({}, {})",
                            i, j, last.0, last.1
                        ),
                    ));
                }
            }
            self.last_key = Some((i, j));
            return Ok(Some((i, j, v)));
        }
    }

    /// Read the next `count` instances into a `dim x count` matrix.
    pub fn read_columns(&mut self, count: usize) -> Result<Array2<f64>> {
        let start = self.next_instance;
        let end = start + count;
        if end > self.n {
            return Err(Error::parse(
                &self.path,
                self.line_no,
                format!("requested instances up to {} but n = {}", end, self.n),
            ));
        }
        let mut out = Array2::zeros((self.dim, count));
        loop {
            let entry = match self.pending.take() {
                Some(e) => Some(e),
                None => self.read_entry()?,
            };
            let Some((i, j, v)) = entry else { break };
            if i >= end {
                self.pending = Some((i, j, v));
                break;
            }
            // Ordering guarantees i >= start here: earlier instances were
            // consumed by previous calls.
            out[[j, i - start]] = v * self.scale;
        }
        self.next_instance = end;
        Ok(out)
    }

    pub fn skip_columns(&mut self, count: usize) -> Result<()> {
        self.read_columns(count).map(|_| ())
    }
}

/// Either storage format behind one interface.
pub enum ViewReader {
    Dense(DenseReader),
    Sparse(SparseReader),
}

impl ViewReader {
    pub fn read_columns(&mut self, count: usize) -> Result<Array2<f64>> {
        match self {
            ViewReader::Dense(r) => r.read_columns(count),
            ViewReader::Sparse(r) => r.read_columns(count),
        }
    }

    pub fn skip_columns(&mut self, count: usize) -> Result<()> {
        match self {
            ViewReader::Dense(r) => r.skip_columns(count),
            ViewReader::Sparse(r) => r.skip_columns(count),
        }
    }

    pub fn rewind(&mut self) -> Result<()> {
        match self {
            ViewReader::Dense(r) => r.rewind(),
            ViewReader::Sparse(r) => r.rewind(),
        }
    }
}

fn validate_dense_reader<R: BufRead>(mut reader: DenseReader<R>, n: usize) -> Result<()> {
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(256);
        reader.read_columns(take)?;
        remaining -= take;
    }
    // Anything after the last expected instance must be blank.
    let mut rest = String::new();
    reader
        .reader
        .read_to_string(&mut rest)
        .map_err(|e| Error::io(&reader.path, e))?;
    if !rest.trim().is_empty() {
        return Err(Error::parse(
            &reader.path,
            reader.line_no + 1,
            format!("expected {} instances, found extra data", n),
        ));
    }
    Ok(())
}

/// Validate a whole view file in one bounded-memory scan: instance count,
/// per-line arity, index ranges, ordering, and that every value is finite
/// and non-negative. Leaves no reader state behind.
pub fn validate_dense(path: &Path, dim: usize, n: usize, scale: f64) -> Result<()> {
    validate_dense_reader(DenseReader::open(path, dim, scale)?, n)
}

/// [`validate_dense`] over an in-memory buffer instead of a file.
pub fn validate_dense_bytes(bytes: &[u8], dim: usize, n: usize, scale: f64) -> Result<()> {
    validate_dense_reader(DenseReader::from_reader(bytes, dim, scale), n)
}

fn validate_sparse_reader<R: BufRead>(mut reader: SparseReader<R>, n: usize) -> Result<()> {
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(256);
        reader.read_columns(take)?;
        remaining -= take;
    }
    if reader.pending.is_some() || reader.read_entry()?.is_some() {
        return Err(Error::parse(
            &reader.path,
            reader.line_no,
            format!("entry refers to instance beyond n = {}", n),
        ));
    }
    Ok(())
}

pub fn validate_sparse(path: &Path, dim: usize, n: usize, scale: f64) -> Result<()> {
    validate_sparse_reader(SparseReader::open(path, dim, n, scale)?, n)
}

/// [`validate_sparse`] over an in-memory buffer instead of a file.
pub fn validate_sparse_bytes(bytes: &[u8], dim: usize, n: usize, scale: f64) -> Result<()> {
    validate_sparse_reader(SparseReader::from_reader(bytes, dim, n, scale), n)
}

/// Write a `dim x n` matrix (instances as columns) in dense text form.
pub fn write_dense(path: &Path, matrix: ArrayView2<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let (dim, n) = matrix.dim();
    for col in 0..n {
        for row in 0..dim {
            if row > 0 {
                write!(w, " ").map_err(|e| Error::io(path, e))?;
            }
            write!(w, "{}", matrix[[row, col]]).map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write a `dim x n` matrix in sparse coordinate form, listing only
/// non-zero entries in ascending `(instance, feature)` order.
pub fn write_sparse(path: &Path, matrix: ArrayView2<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let (dim, n) = matrix.dim();
    for col in 0..n {
        for row in 0..dim {
            let v = matrix[[row, col]];
            if v != 0.0 {
                writeln!(w, "{} {} {}", col, row, v).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
