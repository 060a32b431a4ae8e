//! End-to-end streaming runs: one or many passes over a dataset under a
//! memory ceiling that does not grow with the number of instances.
//!
//! Each chunk is read, mean-filled and weighted, solved by alternating
//! minimization, folded into the per-view history accumulators, and its
//! loss terms recorded — then the raw data is dropped. Passes after the
//! first rewind the stream, freeze the fill statistics at their
//! full-dataset values, and keep refining the same bases and accumulators
//! while overwriting the stored consensus rows.

use std::path::PathBuf;
use std::time::Instant;

use crate::dataset::MultiViewSource;
use crate::error::{Error, Result};
use crate::factorization::{chunk_alternation, FactorState, LossTracker, SolverConfig};
use crate::pipeline::checkpoint::Checkpoint;
use crate::pipeline::consensus_store::ConsensusStore;

/// One recorded point of the loss trace: the cumulative average loss
/// after `chunk` chunks of `pass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    /// 1-based pass index.
    pub pass: usize,
    /// 1-based chunk index within the pass.
    pub chunk: usize,
    /// Average loss over the instances covered so far in this pass.
    pub loss: f64,
}

/// Counters surfaced so silent degradation is visible in every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunFlags {
    /// Missing instances served before their view had any observation.
    pub cold_starts: usize,
    /// Alternation sweeps kept across all chunks and passes.
    pub sweeps: usize,
    /// Accepted Newton projected-gradient steps.
    pub accepted_steps: usize,
    /// Line searches that ran out of trials without an acceptable step.
    pub ls_exhaustions: usize,
    /// Sweeps undone because round-off raised the objective.
    pub rollbacks: usize,
    /// Accepted steps whose directly-checked sufficient decrease failed.
    pub decrease_violations: usize,
}

/// Everything configuring a run apart from the dataset itself.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub solver: SolverConfig,
    /// Nominal instances per chunk (the last chunk of a pass may be short).
    pub chunk_size: usize,
    /// Seed for the run's single random generator.
    pub seed: u64,
    /// Consensus rows above this budget are spilled to a scratch file.
    pub consensus_budget_bytes: usize,
    /// Where to spill (defaults to a fresh file in the temp directory).
    pub spill_path: Option<PathBuf>,
    /// When set, a checkpoint is written atomically after every chunk.
    pub checkpoint_path: Option<PathBuf>,
    /// Stop after this many newly processed chunks (simulated interruption
    /// or budgeted execution); `RunReport::completed` reports the cut.
    pub stop_after_chunks: Option<usize>,
}

impl RunOptions {
    pub fn new(solver: SolverConfig, chunk_size: usize, seed: u64) -> RunOptions {
        RunOptions {
            solver,
            chunk_size,
            seed,
            consensus_budget_bytes: 256 << 20,
            spill_path: None,
            checkpoint_path: None,
            stop_after_chunks: None,
        }
    }

    fn validate(&self, source: &MultiViewSource) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk size must be at least 1".into()));
        }
        self.solver.validate(source.n_views())
    }
}

/// The outcome of a run: the loss trace, the stored consensus rows from
/// the final pass, per-chunk wall times and degradation counters.
#[derive(Debug)]
pub struct RunReport {
    /// One entry per processed chunk per pass, in order.
    pub loss_trace: Vec<LossPoint>,
    /// N x k consensus rows as written by the last pass, in dataset order.
    pub consensus: ConsensusStore,
    /// Wall-clock seconds per processed chunk, including the read. Timing
    /// is environment noise; everything else in the report is a pure
    /// function of (dataset, options, seed).
    pub chunk_seconds: Vec<f64>,
    pub flags: RunFlags,
    /// Passes the run was asked for.
    pub passes: usize,
    pub chunk_size: usize,
    /// False only when `stop_after_chunks` cut the run short.
    pub completed: bool,
    /// Peak bytes across the structures the run keeps alive per chunk
    /// (chunk arrays, factors and their rollback snapshots, state,
    /// statistics, in-memory consensus). Excludes transient temporaries.
    pub peak_tracked_bytes: usize,
}

/// Bytes a chunk-sized working set is expected to occupy, counting the
/// chunk arrays, a residual-sized temporary, factor state with rollback
/// copies, per-view solver scratch and the shared consensus buffers.
/// `run_*` keeps `peak_tracked_bytes` within a small factor of this, no
/// matter how many instances the dataset has.
pub fn working_set_estimate(dims: &[usize], k: usize, chunk_size: usize) -> usize {
    let s = chunk_size;
    let f = std::mem::size_of::<f64>();
    let per_view: usize = dims
        .iter()
        .map(|&d| {
            f * (3 * d * s        // raw + filled + residual temporary
                + 2 * s           // weights + squared weights
                + 4 * d * k       // basis + snapshot, history B + effective B
                + 2 * k * k       // history A + effective A
                + 5 * s * k       // latent + snapshot + weighted latent + XᵀU + direction
                + d)              // running mean statistics
                + s // presence bytes
        })
        .sum();
    per_view + f * (2 * s * k + k * k)
}

/// Stream the dataset once: draw or warm-start factors per chunk, run the
/// alternating solver, fold the chunk into the history and record its
/// loss. Equivalent to `run_multi_pass` with one pass.
pub fn run_one_pass(
    source: &mut MultiViewSource,
    options: &RunOptions,
) -> Result<(FactorState, RunReport)> {
    run_passes(source, options, 1, None)
}

/// Stream the dataset `passes` times. The first pass uses prefix fill
/// statistics; later passes freeze them at full-dataset values, keep the
/// bases and accumulators evolving, and overwrite the consensus rows, so
/// the report carries the final pass's embedding for every instance.
pub fn run_multi_pass(
    source: &mut MultiViewSource,
    options: &RunOptions,
    passes: usize,
) -> Result<(FactorState, RunReport)> {
    if passes < 1 {
        return Err(Error::Config("a run needs at least one pass".into()));
    }
    run_passes(source, options, passes, None)
}

/// Continue an interrupted run from a checkpoint as if it had never
/// stopped: the stream is fast-forwarded past the completed chunks and
/// every restored structure (factors, statistics, generator, loss record,
/// consensus prefix) picks up exactly where the snapshot was taken.
pub fn resume_run(
    source: &mut MultiViewSource,
    options: &RunOptions,
    passes: usize,
    checkpoint: Checkpoint,
) -> Result<(FactorState, RunReport)> {
    if passes < checkpoint.pass {
        return Err(Error::Config(format!(
            "checkpoint is in pass {} but only {} passes were requested",
            checkpoint.pass, passes
        )));
    }
    run_passes(source, options, passes, Some(checkpoint))
}

fn run_passes(
    source: &mut MultiViewSource,
    options: &RunOptions,
    passes: usize,
    resume: Option<Checkpoint>,
) -> Result<(FactorState, RunReport)> {
    options.validate(source)?;
    let n = source.n_instances();
    let k = options.solver.k;
    let dims = source.dims();
    let chunks_per_pass = n.div_ceil(options.chunk_size);

    let mut store = ConsensusStore::create(
        n,
        k,
        options.consensus_budget_bytes,
        options.spill_path.as_deref(),
    )?;

    let (mut state, mut stats, mut tracker, mut trace, mut flags, start_pass, resumed_chunks) =
        match resume {
            Some(cp) => {
                validate_checkpoint(&cp, &dims, k, options.chunk_size, n, chunks_per_pass)?;
                if cp.consensus_prefix.nrows() > 0 {
                    store.write_rows(0, cp.consensus_prefix.view())?;
                }
                let mut tracker = LossTracker::new(options.chunk_size, n);
                for &sum in &cp.chunk_sums {
                    tracker.record_sum(sum);
                }
                (cp.state, cp.stats, tracker, cp.trace, cp.flags, cp.pass, cp.chunks_done)
            }
            None => (
                FactorState::new(&dims, k, options.seed),
                source.fresh_stats(),
                LossTracker::new(options.chunk_size, n),
                Vec::new(),
                RunFlags::default(),
                1,
                0,
            ),
        };

    let mut chunk_seconds = Vec::new();
    let mut peak_tracked = 0usize;
    let mut processed = 0usize;
    let mut completed = true;

    'run: for pass in start_pass..=passes {
        state.pass_index = pass;
        let frozen = pass >= 2;
        source.rewind()?;
        if pass == start_pass && resumed_chunks > 0 {
            source.skip_chunks(options.chunk_size, resumed_chunks)?;
        } else {
            tracker = LossTracker::new(options.chunk_size, n);
        }

        loop {
            let started = Instant::now();
            let Some(chunk) = source.next_chunk(&mut stats, options.chunk_size, frozen)? else {
                break;
            };
            flags.cold_starts += chunk.cold_starts;

            let (factors, report) = chunk_alternation(&chunk, &mut state, &options.solver)?;
            state.accumulate(&chunk, &factors)?;
            tracker.record_chunk(&state, &chunk, &factors, &options.solver);
            store.write_rows(chunk.start, factors.consensus.view())?;
            trace.push(LossPoint {
                pass,
                chunk: chunk.chunk_index,
                loss: tracker.current()?,
            });

            flags.sweeps += report.sweeps;
            flags.accepted_steps += report.flags.accepted;
            flags.ls_exhaustions += report.flags.ls_exhaustions;
            flags.rollbacks += report.rollbacks;
            flags.decrease_violations += report.flags.decrease_violations;

            let basis_bytes: usize = state
                .views
                .iter()
                .map(|v| v.basis.len() * std::mem::size_of::<f64>())
                .sum();
            let tracked = chunk.memory_bytes()
                + 2 * factors.memory_bytes()
                + state.memory_bytes()
                + basis_bytes
                + stats.memory_bytes()
                + store.in_memory_bytes();
            peak_tracked = peak_tracked.max(tracked);
            chunk_seconds.push(started.elapsed().as_secs_f64());

            if let Some(path) = &options.checkpoint_path {
                let rows = (chunk.start + chunk.size).min(n);
                let checkpoint = Checkpoint {
                    chunk_size: options.chunk_size,
                    n_instances: n,
                    pass,
                    chunks_done: chunk.chunk_index,
                    state: state.clone(),
                    stats: stats.clone(),
                    chunk_sums: tracker.chunk_sums().to_vec(),
                    trace: trace.clone(),
                    flags,
                    consensus_prefix: store.read_prefix(rows)?,
                };
                checkpoint.save(path)?;
            }

            processed += 1;
            if options.stop_after_chunks == Some(processed) {
                completed = false;
                break 'run;
            }
        }
    }

    let report = RunReport {
        loss_trace: trace,
        consensus: store,
        chunk_seconds,
        flags,
        passes,
        chunk_size: options.chunk_size,
        completed,
        peak_tracked_bytes: peak_tracked,
    };
    Ok((state, report))
}

fn validate_checkpoint(
    cp: &Checkpoint,
    dims: &[usize],
    k: usize,
    chunk_size: usize,
    n: usize,
    chunks_per_pass: usize,
) -> Result<()> {
    if cp.state.dims() != dims {
        return Err(Error::Checkpoint(format!(
            "checkpoint view dimensions {:?} do not match the dataset's {:?}",
            cp.state.dims(),
            dims
        )));
    }
    if cp.state.k != k {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} factors, options ask for {}",
            cp.state.k, k
        )));
    }
    if cp.chunk_size != chunk_size {
        return Err(Error::Checkpoint(format!(
            "checkpoint used chunk size {}, options use {}",
            cp.chunk_size, chunk_size
        )));
    }
    if cp.n_instances != n {
        return Err(Error::Checkpoint(format!(
            "checkpoint covered {} instances, dataset has {}",
            cp.n_instances, n
        )));
    }
    if cp.chunks_done > chunks_per_pass {
        return Err(Error::Checkpoint(format!(
            "checkpoint claims {} chunks done of {} per pass",
            cp.chunks_done, chunks_per_pass
        )));
    }
    let expected_rows = (cp.chunks_done * chunk_size).min(n);
    if cp.consensus_prefix.nrows() != expected_rows {
        return Err(Error::Checkpoint(format!(
            "consensus prefix has {} rows, expected {}",
            cp.consensus_prefix.nrows(),
            expected_rows
        )));
    }
    if cp.chunk_sums.len() != cp.chunks_done {
        return Err(Error::Checkpoint(format!(
            "checkpoint records {} loss sums for {} chunks",
            cp.chunk_sums.len(),
            cp.chunks_done
        )));
    }
    let seen = cp.stats.instances_seen as usize;
    if cp.pass == 1 {
        if seen != expected_rows {
            return Err(Error::Checkpoint(format!(
                "first-pass statistics cover {} instances, expected {}",
                seen, expected_rows
            )));
        }
    } else if seen != n {
        return Err(Error::Checkpoint(format!(
            "later-pass statistics must cover all {} instances, found {}",
            n, seen
        )));
    }
    Ok(())
}
