//! Drive a full streaming factorization run from a config file and write
//! its artifacts to disk.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cli::config::ExperimentConfig;
use crate::dataset::{IndicatorMatrix, MultiViewSource};
use crate::error::{Error, Result};
use crate::pipeline::{resume_run, run_multi_pass, Checkpoint, RunOptions, RunReport};

/// Environment override for the output directory, applied when the
/// command line gives none.
pub const OUT_DIR_ENV: &str = "OMVC_OUT_DIR";

/// Inputs of the `run` subcommand.
#[derive(Debug, Clone)]
pub struct RunCommand {
    pub config_path: PathBuf,
    /// Overrides the config's output directory (highest priority).
    pub out_override: Option<PathBuf>,
    /// Continue from this checkpoint instead of starting fresh.
    pub resume_from: Option<PathBuf>,
    /// Stop early after this many chunks; used to exercise interruption.
    pub stop_after_chunks: Option<usize>,
}

/// Output directory precedence: `--out` flag, then the `OMVC_OUT_DIR`
/// environment variable, then the config file. Flag and environment
/// paths are taken as given; a relative config path is anchored at the
/// config file's directory.
pub fn resolve_output_dir(
    flag: Option<&Path>,
    config_dir: &Path,
    config_out: &Path,
) -> PathBuf {
    if let Some(path) = flag {
        return path.to_path_buf();
    }
    if let Ok(env) = std::env::var(OUT_DIR_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    if config_out.is_absolute() {
        config_out.to_path_buf()
    } else {
        config_dir.join(config_out)
    }
}

/// Execute a run end to end and return the resolved output directory.
///
/// Files written there:
/// - `loss_trace.txt` — one `pass chunk loss` line per processed chunk;
/// - `consensus.txt` — final consensus embedding, one instance per line;
/// - `checkpoint.bin` — resumable snapshot taken after the last chunk;
/// - `run_summary.txt` — deterministic run facts and solver event counts;
/// - `timings.txt` — wall-clock seconds per chunk (machine-dependent, the
///   only non-reproducible artifact).
pub fn cmd_run(cmd: &RunCommand) -> Result<PathBuf> {
    let config = ExperimentConfig::load(&cmd.config_path)?;
    let config_dir = cmd
        .config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ".".into());

    let manifest_path = if config.manifest.is_absolute() {
        config.manifest.clone()
    } else {
        config_dir.join(&config.manifest)
    };
    let out_dir = resolve_output_dir(cmd.out_override.as_deref(), &config_dir, &config.output_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut source = MultiViewSource::open(&manifest_path)?;
    if config.missing_rate > 0.0 {
        // The simulated pattern replaces whatever the manifest declared.
        let indicator = IndicatorMatrix::simulate_missing(
            source.n_instances(),
            source.n_views(),
            config.missing_rate,
            config.seed,
        )?;
        source.set_indicator(indicator)?;
    }

    let solver = config.solver_config(source.n_views())?;
    let mut options = RunOptions::new(solver, config.chunk_size, config.seed);
    options.checkpoint_path = Some(out_dir.join("checkpoint.bin"));
    options.spill_path = Some(out_dir.join("consensus.spill"));
    options.stop_after_chunks = cmd.stop_after_chunks;

    let (_state, mut report) = match &cmd.resume_from {
        Some(path) => {
            let checkpoint = Checkpoint::load(path)?;
            resume_run(&mut source, &options, config.passes, checkpoint)?
        }
        None => run_multi_pass(&mut source, &options, config.passes)?,
    };

    write_outputs(&out_dir, &source, &config, &mut report)?;
    Ok(out_dir)
}

fn write_outputs(
    out_dir: &Path,
    source: &MultiViewSource,
    config: &ExperimentConfig,
    report: &mut RunReport,
) -> Result<()> {
    let trace_path = out_dir.join("loss_trace.txt");
    let mut trace = create(&trace_path)?;
    for point in &report.loss_trace {
        writeln!(trace, "{} {} {}", point.pass, point.chunk, point.loss)
            .map_err(|e| Error::io(&trace_path, e))?;
    }

    let consensus_path = out_dir.join("consensus.txt");
    let consensus = report.consensus.to_array()?;
    let mut file = create(&consensus_path)?;
    let mut line = String::new();
    for row in consensus.rows() {
        line.clear();
        for (j, value) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{}", value));
        }
        writeln!(file, "{}", line).map_err(|e| Error::io(&consensus_path, e))?;
    }

    let summary_path = out_dir.join("run_summary.txt");
    let mut summary = create(&summary_path)?;
    let chunks_per_pass = source.n_instances().div_ceil(config.chunk_size);
    let final_loss = report
        .loss_trace
        .last()
        .map(|p| format!("{}", p.loss))
        .unwrap_or_else(|| "none".into());
    write!(
        summary,
        "format 1\n\
         instances {}\n\
         views {}\n\
         k {}\n\
         chunk_size {}\n\
         chunks_per_pass {}\n\
         passes {}\n\
         missing_rate {}\n\
         seed {}\n\
         completed {}\n\
         final_loss {}\n\
         cold_starts {}\n\
         sweeps {}\n\
         accepted_steps {}\n\
         line_search_exhaustions {}\n\
         rollbacks {}\n\
         decrease_violations {}\n\
         peak_tracked_bytes {}\n",
        source.n_instances(),
        source.n_views(),
        config.solver.k,
        config.chunk_size,
        chunks_per_pass,
        report.passes,
        config.missing_rate,
        config.seed,
        report.completed,
        final_loss,
        report.flags.cold_starts,
        report.flags.sweeps,
        report.flags.accepted_steps,
        report.flags.ls_exhaustions,
        report.flags.rollbacks,
        report.flags.decrease_violations,
        report.peak_tracked_bytes,
    )
    .map_err(|e| Error::io(&summary_path, e))?;

    let timings_path = out_dir.join("timings.txt");
    let mut timings = create(&timings_path)?;
    for (i, secs) in report.chunk_seconds.iter().enumerate() {
        writeln!(timings, "{} {:.6}", i, secs).map_err(|e| Error::io(&timings_path, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

/// Parse a `consensus.txt` produced by [`cmd_run`] back into a matrix.
pub fn read_consensus(path: &Path) -> Result<ndarray::Array2<f64>> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(lineno + 1, format!("'{}' is not a number", tok)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    lineno + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no rows".into()));
    }
    let k = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    ndarray::Array2::from_shape_vec((rows.len(), k), flat)
        .map_err(|e| parse_err(0, e.to_string()))
}
