//! Partition-agreement metrics: normalized mutual information and
//! best-matching accuracy.
//!
//! Both metrics see labelings only through their contingency table, so
//! they are invariant under any relabeling of either argument.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Remap arbitrary label ids to `0..k` by first appearance.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut mapping: Vec<usize> = Vec::new();
    let dense = labels
        .iter()
        .map(|&raw| match mapping.iter().position(|&m| m == raw) {
            Some(found) => found,
            None => {
                mapping.push(raw);
                mapping.len() - 1
            }
        })
        .collect();
    (dense, mapping.len())
}

/// Joint count table: entry `(i, j)` counts positions labeled `i` by `a`
/// and `j` by `b`.
fn contingency(a: &[usize], b: &[usize]) -> Result<(Array2<usize>, usize)> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "labelings disagree in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidValue("labelings must not be empty".into()));
    }
    let (da, ka) = densify(a);
    let (db, kb) = densify(b);
    let mut table = Array2::zeros((ka, kb));
    for (&i, &j) in da.iter().zip(&db) {
        table[[i, j]] += 1;
    }
    Ok((table, a.len()))
}

/// Normalized mutual information between two labelings: mutual
/// information divided by the arithmetic mean of the marginal entropies,
/// in `[0, 1]`. When either labeling has a single cluster its entropy is
/// zero and the result is 0 by convention. Symmetric in its arguments.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let (table, n) = contingency(a, b)?;
    let n = n as f64;
    let row_sums: Vec<f64> = table
        .rows()
        .into_iter()
        .map(|r| r.sum() as f64 / n)
        .collect();
    let col_sums: Vec<f64> = table
        .columns()
        .into_iter()
        .map(|c| c.sum() as f64 / n)
        .collect();

    // All sums run over terms in a canonical sorted order, and the
    // per-cell term is written so its value is invariant under swapping
    // the arguments and collapses bit-for-bit onto the entropy terms when
    // the partitions coincide. That makes nmi(a, b) == nmi(b, a) exact
    // and identical partitions score exactly 1.
    let entropy = |marginal: &[f64]| -> f64 {
        sorted_sum(
            marginal
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * (-p.ln()))
                .collect(),
        )
    };
    let h_a = entropy(&row_sums);
    let h_b = entropy(&col_sums);
    if h_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }

    let terms: Vec<f64> = table
        .indexed_iter()
        .filter(|(_, &count)| count > 0)
        .map(|((i, j), &count)| {
            let p = count as f64 / n;
            p * (p.ln() - (row_sums[i].ln() + col_sums[j].ln()))
        })
        .collect();
    let information = sorted_sum(terms);
    Ok((information / (0.5 * (h_a + h_b))).clamp(0.0, 1.0))
}

/// Sum in a value-canonical order so any permutation of the same terms
/// produces the same floating-point result.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Clustering accuracy: the largest fraction of positions that agree
/// under any one-to-one map between predicted clusters and true labels
/// (optimal assignment on the contingency table; the rectangular case is
/// zero-padded to square so surplus clusters match nothing).
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let (table, n) = contingency(predicted, truth)?;
    let side = table.nrows().max(table.ncols());
    // Maximize matched counts == minimize negated counts.
    let mut cost = Array2::zeros((side, side));
    for ((i, j), &count) in table.indexed_iter() {
        cost[[i, j]] = -(count as i64);
    }
    let (total, _) = assign_min_cost(&cost);
    Ok(-total as f64 / n as f64)
}

/// Minimum-cost perfect matching on a square matrix in O(side³) via the
/// potential-based augmenting-path (Hungarian) algorithm. Returns the
/// total cost and the column matched to each row.
fn assign_min_cost(cost: &Array2<i64>) -> (i64, Vec<usize>) {
    let side = cost.nrows();
    debug_assert_eq!(side, cost.ncols());
    let inf = i64::MAX / 4;
    // 1-based arrays; index 0 is the virtual unmatched column.
    let mut row_potential = vec![0i64; side + 1];
    let mut col_potential = vec![0i64; side + 1];
    let mut matched_row = vec![0usize; side + 1];
    let mut way = vec![0usize; side + 1];

    for row in 1..=side {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![inf; side + 1];
        let mut used = vec![false; side + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=side {
                if used[j] {
                    continue;
                }
                let slack = cost[[i0 - 1, j - 1]] - row_potential[i0] - col_potential[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=side {
                if used[j] {
                    row_potential[matched_row[j]] += delta;
                    col_potential[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the found path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![0usize; side];
    let mut total = 0;
    for j in 1..=side {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
            total += cost[[matched_row[j] - 1, j - 1]];
        }
    }
    (total, row_to_col)
}
