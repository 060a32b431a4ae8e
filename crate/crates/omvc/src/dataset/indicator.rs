//! Presence/absence bookkeeping for incomplete multi-view data.
//!
//! Row `i`, column `v` of the indicator is 1 when instance `i` was observed
//! in view `v`. Every instance must be observed in at least one view.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    /// `n x n_views`, entries 0 or 1.
    presence: Array2<u8>,
}

impl IndicatorMatrix {
    pub fn all_present(n: usize, n_views: usize) -> IndicatorMatrix {
        IndicatorMatrix {
            presence: Array2::ones((n, n_views)),
        }
    }

    /// Validate and wrap an explicit 0/1 matrix.
    pub fn from_array(presence: Array2<u8>) -> Result<IndicatorMatrix> {
        for (row, r) in presence.outer_iter().enumerate() {
            let mut any = false;
            for &v in r.iter() {
                if v > 1 {
                    return Err(Error::InvalidValue(format!(
                        "indicator entries must be 0 or 1, row {} has {}",
                        row, v
                    )));
                }
                any |= v == 1;
            }
            if !any {
                return Err(Error::InvalidValue(format!(
                    "instance {} is absent from every view",
                    row
                )));
            }
        }
        Ok(IndicatorMatrix { presence })
    }

    pub fn parse_str(text: &str, n: usize, n_views: usize) -> std::result::Result<IndicatorMatrix, (usize, String)> {
        let mut presence = Array2::zeros((n, n_views));
        let mut row = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if row >= n {
                return Err((lineno + 1, format!("expected {} rows, found extra data", n)));
            }
            let mut col = 0usize;
            for tok in trimmed.split_whitespace() {
                if col >= n_views {
                    return Err((lineno + 1, format!("expected {} entries per row", n_views)));
                }
                presence[[row, col]] = match tok {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err((lineno + 1, format!("indicator entry must be 0 or 1, got {:?}", other)))
                    }
                };
                col += 1;
            }
            if col != n_views {
                return Err((lineno + 1, format!("expected {} entries per row, found {}", n_views, col)));
            }
            row += 1;
        }
        if row != n {
            return Err((row + 1, format!("expected {} rows, found {}", n, row)));
        }
        IndicatorMatrix::from_array(presence).map_err(|e| (0, e.to_string()))
    }

    pub fn load(path: &Path, n: usize, n_views: usize) -> Result<IndicatorMatrix> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, n, n_views).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for row in self.presence.outer_iter() {
            for (i, &v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push(if v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn n(&self) -> usize {
        self.presence.nrows()
    }

    pub fn n_views(&self) -> usize {
        self.presence.ncols()
    }

    #[inline]
    pub fn present(&self, instance: usize, view: usize) -> bool {
        self.presence[[instance, view]] == 1
    }

    /// Number of observed instances per view.
    pub fn view_counts(&self) -> Vec<usize> {
        (0..self.n_views())
            .map(|v| self.presence.column(v).iter().filter(|&&x| x == 1).count())
            .collect()
    }

    /// Fraction of instances missing from each view.
    pub fn incompleteness_rates(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.view_counts()
            .into_iter()
            .map(|c| 1.0 - c as f64 / n)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.presence.iter().all(|&x| x == 1)
    }

    /// Drop exactly `floor(rate * n)` instances from each view, chosen
    /// uniformly at random, while keeping every instance observed in at
    /// least one view.
    ///
    /// When the independent draws would leave an instance with no view, one
    /// of its views is restored and, to keep the per-view drop count exact,
    /// the same view is dropped from another instance that can spare it
    /// (one still observed elsewhere). At extreme rates no such donor may
    /// exist; the restore still happens and that view ends up one drop
    /// short, since the no-empty-instance guarantee takes priority.
    pub fn simulate_missing(n: usize, n_views: usize, rate: f64, seed: u64) -> Result<IndicatorMatrix> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidValue(format!(
                "missing rate must lie in [0, 1), got {}",
                rate
            )));
        }
        if n == 0 || n_views == 0 {
            return Err(Error::InvalidValue("need at least one instance and one view".into()));
        }
        let per_view = (rate * n as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut presence: Array2<u8> = Array2::ones((n, n_views));

        // Independent uniform sample of `per_view` distinct instances per
        // view, via a partial Fisher-Yates shuffle.
        let mut pool: Vec<usize> = (0..n).collect();
        for v in 0..n_views {
            for slot in 0..per_view {
                let j = rng.gen_range(slot..n);
                pool.swap(slot, j);
                presence[[pool[slot], v]] = 0;
            }
        }

        let row_count =
            |p: &Array2<u8>, i: usize| p.row(i).iter().filter(|&&x| x == 1).count();

        for i in 0..n {
            if row_count(&presence, i) > 0 {
                continue;
            }
            let view = rng.gen_range(0..n_views);
            presence[[i, view]] = 1;
            let donors: Vec<usize> = (0..n)
                .filter(|&d| d != i && presence[[d, view]] == 1 && row_count(&presence, d) >= 2)
                .collect();
            if !donors.is_empty() {
                let d = donors[rng.gen_range(0..donors.len())];
                presence[[d, view]] = 0;
            }
        }

        Ok(IndicatorMatrix { presence })
    }
}
