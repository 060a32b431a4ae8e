//! Versioned flat-binary checkpoints for interrupting and resuming a run.
//!
//! A checkpoint captures everything the solver carries forward — per-view
//! bases and history accumulators, streaming statistics, the random
//! generator, the loss record and the consensus rows already written in
//! the current pass — so that resuming after chunk `t` reproduces the
//! uninterrupted run bit for bit. All integers and floats are little
//! endian; the decoder validates every length against the remaining input
//! before allocating, so arbitrary bytes fail cleanly instead of
//! panicking.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{RunningViewStats, ViewStats};
use crate::error::{Error, Result};
use crate::factorization::FactorState;
use crate::pipeline::run::{LossPoint, RunFlags};

const MAGIC: &[u8; 4] = b"OMVC";
const VERSION: u16 = 1;

/// Snapshot of a run after some chunk of some pass.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Nominal chunk size the run was started with.
    pub chunk_size: usize,
    /// Total instances in the dataset.
    pub n_instances: usize,
    /// 1-based pass being processed when the snapshot was taken.
    pub pass: usize,
    /// Chunks of that pass completed (accumulated and recorded).
    pub chunks_done: usize,
    pub state: FactorState,
    pub stats: RunningViewStats,
    /// Per-chunk loss sums recorded so far in the current pass.
    pub chunk_sums: Vec<f64>,
    /// Full loss trace across all passes so far.
    pub trace: Vec<LossPoint>,
    pub flags: RunFlags,
    /// Consensus rows written so far in the current pass (row-major,
    /// `min(chunks_done * chunk_size, n_instances)` rows).
    pub consensus_prefix: Array2<f64>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u16(&mut out, VERSION);

        let k = self.state.k;
        put_u16(&mut out, self.state.n_views() as u16);
        put_u32(&mut out, k as u32);
        put_u64(&mut out, self.chunk_size as u64);
        put_u64(&mut out, self.n_instances as u64);
        put_u32(&mut out, self.pass as u32);
        put_u64(&mut out, self.chunks_done as u64);

        out.extend_from_slice(&self.state.rng.get_seed());
        put_u64(&mut out, self.state.rng.get_stream());
        put_u128(&mut out, self.state.rng.get_word_pos());
        put_u8(&mut out, self.state.initialized as u8);
        match self.state.last_accumulated() {
            Some((p, c)) => {
                put_u8(&mut out, 1);
                put_u32(&mut out, p as u32);
                put_u64(&mut out, c as u64);
            }
            None => {
                put_u8(&mut out, 0);
                put_u32(&mut out, 0);
                put_u64(&mut out, 0);
            }
        }

        for vf in &self.state.views {
            put_u64(&mut out, vf.dim() as u64);
            put_f64_iter(&mut out, vf.basis.iter());
            put_f64_iter(&mut out, vf.accum_a.iter());
            put_f64_iter(&mut out, vf.accum_b.iter());
            put_f64(&mut out, vf.hist_const);
        }

        put_u64(&mut out, self.stats.instances_seen);
        for vs in &self.stats.views {
            put_u64(&mut out, vs.count);
            put_f64_iter(&mut out, vs.feature_sum.iter());
        }

        put_u64(&mut out, self.chunk_sums.len() as u64);
        put_f64_iter(&mut out, self.chunk_sums.iter());

        put_u64(&mut out, self.trace.len() as u64);
        for p in &self.trace {
            put_u32(&mut out, p.pass as u32);
            put_u64(&mut out, p.chunk as u64);
            put_f64(&mut out, p.loss);
        }

        put_u64(&mut out, self.flags.cold_starts as u64);
        put_u64(&mut out, self.flags.sweeps as u64);
        put_u64(&mut out, self.flags.accepted_steps as u64);
        put_u64(&mut out, self.flags.ls_exhaustions as u64);
        put_u64(&mut out, self.flags.rollbacks as u64);
        put_u64(&mut out, self.flags.decrease_violations as u64);

        put_u64(&mut out, self.consensus_prefix.nrows() as u64);
        put_f64_iter(&mut out, self.consensus_prefix.iter());

        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = cur.u16()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {})",
                version, VERSION
            )));
        }

        let n_views = cur.u16()? as usize;
        if n_views == 0 {
            return Err(Error::Checkpoint("checkpoint declares zero views".into()));
        }
        let k = cur.u32()? as usize;
        if k == 0 {
            return Err(Error::Checkpoint("checkpoint declares zero factors".into()));
        }
        let chunk_size = cur.count("chunk size")?;
        if chunk_size == 0 {
            return Err(Error::Checkpoint("checkpoint declares zero chunk size".into()));
        }
        let n_instances = cur.count("instance count")?;
        let pass = cur.u32()? as usize;
        if pass == 0 {
            return Err(Error::Checkpoint("pass index must be at least 1".into()));
        }
        let chunks_done = cur.count("completed chunk count")?;

        let mut seed = [0u8; 32];
        seed.copy_from_slice(cur.take(32)?);
        let stream = cur.u64()?;
        let word_pos = cur.u128()?;
        let initialized = match cur.u8()? {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Checkpoint(format!(
                    "initialized flag must be 0 or 1, got {}",
                    other
                )))
            }
        };
        let last_flag = cur.u8()?;
        let last_pass = cur.u32()? as usize;
        let last_chunk = cur.count("last accumulated chunk")?;
        let last_accumulated = match last_flag {
            0 => None,
            1 => Some((last_pass, last_chunk)),
            other => {
                return Err(Error::Checkpoint(format!(
                    "accumulation flag must be 0 or 1, got {}",
                    other
                )))
            }
        };

        let mut dims = Vec::with_capacity(n_views);
        let mut views_raw = Vec::with_capacity(n_views);
        for _ in 0..n_views {
            let dim = cur.count("view dimension")?;
            if dim == 0 {
                return Err(Error::Checkpoint("view dimension must be at least 1".into()));
            }
            let basis = cur.matrix(dim, k, "basis")?;
            let accum_a = cur.matrix(k, k, "history Gram accumulator")?;
            let accum_b = cur.matrix(dim, k, "history cross accumulator")?;
            let hist_const = cur.f64()?;
            dims.push(dim);
            views_raw.push((basis, accum_a, accum_b, hist_const));
        }

        let instances_seen = cur.u64()?;
        let mut stat_views = Vec::with_capacity(n_views);
        for &dim in &dims {
            let count = cur.u64()?;
            let sums = cur.f64_vec(dim, "feature sums")?;
            stat_views.push(ViewStats {
                count,
                feature_sum: Array1::from_vec(sums),
            });
        }

        let n_sums = cur.count("loss sum count")?;
        let chunk_sums = cur.f64_vec(n_sums, "loss sums")?;

        let n_points = cur.count("trace length")?;
        cur.need(n_points, 4 + 8 + 8, "loss trace")?;
        let mut trace = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let p = cur.u32()? as usize;
            let c = cur.count("trace chunk index")?;
            let loss = cur.f64()?;
            trace.push(LossPoint { pass: p, chunk: c, loss });
        }

        let flags = RunFlags {
            cold_starts: cur.count("cold start count")?,
            sweeps: cur.count("sweep count")?,
            accepted_steps: cur.count("accepted step count")?,
            ls_exhaustions: cur.count("line search exhaustion count")?,
            rollbacks: cur.count("rollback count")?,
            decrease_violations: cur.count("decrease violation count")?,
        };

        let prefix_rows = cur.count("consensus prefix rows")?;
        if prefix_rows > n_instances {
            return Err(Error::Checkpoint(format!(
                "consensus prefix has {} rows but the dataset has {}",
                prefix_rows, n_instances
            )));
        }
        let consensus_prefix = cur.matrix(prefix_rows, k, "consensus prefix")?;

        if cur.pos != cur.buf.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint payload",
                cur.buf.len() - cur.pos
            )));
        }

        let mut state = FactorState::new(&dims, k, 0);
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        state.rng = rng;
        state.pass_index = pass;
        state.initialized = initialized;
        state.set_last_accumulated(last_accumulated);
        for (vf, (basis, accum_a, accum_b, hist_const)) in
            state.views.iter_mut().zip(views_raw)
        {
            vf.basis = basis;
            vf.accum_a = accum_a;
            vf.accum_b = accum_b;
            vf.hist_const = hist_const;
        }

        Ok(Checkpoint {
            chunk_size,
            n_instances,
            pass,
            chunks_done,
            state,
            stats: RunningViewStats {
                instances_seen,
                views: stat_views,
            },
            chunk_sums,
            trace,
            flags,
            consensus_prefix,
        })
    }

    /// Write atomically: encode to a sibling temp file, then rename over
    /// the target so an interrupted write never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::Checkpoint(format!("{} has no file name", path.display())))?;
        let tmp = path.with_file_name(format!("{}.tmp", file_name.to_string_lossy()));
        std::fs::write(&tmp, self.encode()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes)
    }
}

fn put_u8(out: &mut Vec<u8>, x: u8) {
    out.push(x);
}
fn put_u16(out: &mut Vec<u8>, x: u16) {
    out.extend_from_slice(&x.to_le_bytes());
}
fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}
fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}
fn put_u128(out: &mut Vec<u8>, x: u128) {
    out.extend_from_slice(&x.to_le_bytes());
}
fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}
fn put_f64_iter<'a>(out: &mut Vec<u8>, xs: impl Iterator<Item = &'a f64>) {
    for &x in xs {
        put_f64(out, x);
    }
}

/// Bounds-checked reader over the encoded bytes.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {} bytes at offset {}, only {} remain",
                n,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    /// Check that `count` items of `item_bytes` each fit in the remaining
    /// input before anything is allocated for them.
    fn need(&self, count: usize, item_bytes: usize, what: &str) -> Result<()> {
        let total = count
            .checked_mul(item_bytes)
            .ok_or_else(|| Error::Checkpoint(format!("{} length overflows", what)))?;
        if self.buf.len() - self.pos < total {
            return Err(Error::Checkpoint(format!(
                "truncated: {} needs {} bytes, only {} remain",
                what,
                total,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A u64 that must fit in usize.
    fn count(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| Error::Checkpoint(format!("{} does not fit in memory", what)))
    }

    fn f64_vec(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        self.need(count, 8, what)?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{} shape overflows", what)))?;
        let data = self.f64_vec(len, what)?;
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Checkpoint(format!("{}: {}", what, e)))
    }
}
