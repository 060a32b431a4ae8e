//! Storage for the full N × K consensus matrix.
//!
//! The run's working memory is independent of N except for these rows,
//! which the final clustering needs for every instance. When they exceed
//! the configured budget they live in a flat binary scratch file written
//! in chunk order; passes after the first overwrite rows in place.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

static SPILL_COUNTER: AtomicU64 = AtomicU64::new(0);

pub enum ConsensusStore {
    Memory {
        data: Array2<f64>,
    },
    Disk {
        file: File,
        path: PathBuf,
        n: usize,
        k: usize,
    },
}

impl ConsensusStore {
    /// Hold the rows in memory when they fit the budget, otherwise in a
    /// zero-initialized scratch file (at `spill_path` if given, else a
    /// fresh file in the system temp directory).
    pub fn create(
        n: usize,
        k: usize,
        budget_bytes: usize,
        spill_path: Option<&Path>,
    ) -> Result<ConsensusStore> {
        let needed = n * k * std::mem::size_of::<f64>();
        if needed <= budget_bytes {
            return Ok(ConsensusStore::Memory {
                data: Array2::zeros((n, k)),
            });
        }
        let path = match spill_path {
            Some(p) => p.to_path_buf(),
            None => std::env::temp_dir().join(format!(
                "omvc-consensus-{}-{}.bin",
                std::process::id(),
                SPILL_COUNTER.fetch_add(1, Ordering::Relaxed)
            )),
        };
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.set_len(needed as u64).map_err(|e| Error::io(&path, e))?;
        Ok(ConsensusStore::Disk { file, path, n, k })
    }

    pub fn n(&self) -> usize {
        match self {
            ConsensusStore::Memory { data } => data.nrows(),
            ConsensusStore::Disk { n, .. } => *n,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ConsensusStore::Memory { data } => data.ncols(),
            ConsensusStore::Disk { k, .. } => *k,
        }
    }

    pub fn is_spilled(&self) -> bool {
        matches!(self, ConsensusStore::Disk { .. })
    }

    /// Bytes of consensus data held in memory (zero once spilled).
    pub fn in_memory_bytes(&self) -> usize {
        match self {
            ConsensusStore::Memory { data } => data.len() * std::mem::size_of::<f64>(),
            ConsensusStore::Disk { .. } => 0,
        }
    }

    /// Store a chunk's consensus rows at instance offset `start`,
    /// overwriting whatever an earlier pass left there.
    pub fn write_rows(&mut self, start: usize, rows: ArrayView2<'_, f64>) -> Result<()> {
        let (count, k) = rows.dim();
        if k != self.k() || start + count > self.n() {
            return Err(Error::Dimension(format!(
                "consensus rows [{}, {}) x {} do not fit a {} x {} store",
                start,
                start + count,
                k,
                self.n(),
                self.k()
            )));
        }
        if let Some(bad) = rows.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidValue(format!(
                "consensus entries must be finite and non-negative, got {}",
                bad
            )));
        }
        match self {
            ConsensusStore::Memory { data } => {
                data.slice_mut(ndarray::s![start..start + count, ..]).assign(&rows);
                Ok(())
            }
            ConsensusStore::Disk { file, path, .. } => {
                let offset = (start * k * std::mem::size_of::<f64>()) as u64;
                file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(&*path, e))?;
                let mut buf = Vec::with_capacity(count * k * std::mem::size_of::<f64>());
                for row in rows.outer_iter() {
                    for &x in row.iter() {
                        buf.write_f64::<LittleEndian>(x).expect("vec write");
                    }
                }
                file.write_all(&buf).map_err(|e| Error::io(&*path, e))?;
                Ok(())
            }
        }
    }

    /// Materialize all N rows (the final clustering input).
    pub fn to_array(&mut self) -> Result<Array2<f64>> {
        let n = self.n();
        self.read_prefix(n)
    }

    /// Read back the first `rows` rows (checkpoints store these so a
    /// resumed run does not depend on the scratch file surviving).
    pub fn read_prefix(&mut self, rows: usize) -> Result<Array2<f64>> {
        if rows > self.n() {
            return Err(Error::Dimension(format!(
                "prefix of {} rows from a {}-row store",
                rows,
                self.n()
            )));
        }
        match self {
            ConsensusStore::Memory { data } => Ok(data.slice(ndarray::s![..rows, ..]).to_owned()),
            ConsensusStore::Disk { file, path, k, .. } => {
                file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(&*path, e))?;
                let mut bytes = vec![0u8; rows * *k * std::mem::size_of::<f64>()];
                file.read_exact(&mut bytes).map_err(|e| Error::io(&*path, e))?;
                let mut cursor = &bytes[..];
                let mut out = Array2::zeros((rows, *k));
                for mut row in out.outer_iter_mut() {
                    for x in row.iter_mut() {
                        *x = cursor.read_f64::<LittleEndian>().expect("sized buffer");
                    }
                }
                Ok(out)
            }
        }
    }
}

impl Drop for ConsensusStore {
    fn drop(&mut self) {
        if let ConsensusStore::Disk { path, .. } = self {
            let _ = std::fs::remove_file(path);
        }
    }
}

impl std::fmt::Debug for ConsensusStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsensusStore::Memory { data } => f
                .debug_struct("ConsensusStore::Memory")
                .field("n", &data.nrows())
                .field("k", &data.ncols())
                .finish(),
            ConsensusStore::Disk { path, n, k, .. } => f
                .debug_struct("ConsensusStore::Disk")
                .field("path", path)
                .field("n", n)
                .field("k", k)
                .finish(),
        }
    }
}
