//! Totally random trees embedding: rows are routed through seeded random
//! splits and encoded by the leaf they land in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transforms::dense_matrix;
use super::{OperatorError, OperatorId};
use crate::data::{Column, Dataset};

pub const N_TREES: usize = 8;
pub const DEPTH: u32 = 3;
const INTERNAL_NODES: usize = (1 << DEPTH) - 1;

/// Split choices are drawn up front for every internal node so the random
/// stream does not depend on the data; only thresholds do.
struct TreeDraws {
    features: [usize; INTERNAL_NODES],
    positions: [f64; INTERNAL_NODES],
}

fn leaf_of(row: &[f64], splits: &[(usize, f64)]) -> usize {
    let mut node = 0usize;
    for _ in 0..DEPTH {
        let (feature, threshold) = splits[node];
        node = if row[feature] <= threshold {
            2 * node + 1
        } else {
            2 * node + 2
        };
    }
    node - INTERNAL_NODES
}

/// Thresholds for one tree, placed between the min and max of the chosen
/// feature over the rows that reach each node.
fn grow(rows: &[Vec<f64>], draws: &TreeDraws) -> Vec<(usize, f64)> {
    let mut splits = vec![(0usize, 0.0f64); INTERNAL_NODES];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); INTERNAL_NODES];
    members[0] = (0..rows.len()).collect();
    for node in 0..INTERNAL_NODES {
        let feature = draws.features[node];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &members[node] {
            lo = lo.min(rows[r][feature]);
            hi = hi.max(rows[r][feature]);
        }
        let threshold = if lo.is_finite() {
            lo + draws.positions[node] * (hi - lo)
        } else {
            0.0
        };
        splits[node] = (feature, threshold);
        let left = 2 * node + 1;
        if left < INTERNAL_NODES {
            let (l, r): (Vec<usize>, Vec<usize>) = members[node]
                .iter()
                .partition(|&&i| rows[i][feature] <= threshold);
            members[left] = l;
            members[left + 1] = r;
        }
    }
    splits
}

pub(super) fn random_trees_embedding(
    d: &Dataset,
    op: OperatorId,
    seed: u64,
) -> Result<Dataset, OperatorError> {
    let (_, m) = dense_matrix(d, op)?;
    let n_features = m.ncols();
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut columns = Vec::new();
    for tree in 0..N_TREES {
        let mut draws = TreeDraws {
            features: [0; INTERNAL_NODES],
            positions: [0.0; INTERNAL_NODES],
        };
        for node in 0..INTERNAL_NODES {
            draws.features[node] = rng.random_range(0..n_features);
            draws.positions[node] = rng.random::<f64>();
        }
        let splits = grow(&rows, &draws);
        let leaves: Vec<usize> = rows.iter().map(|r| leaf_of(r, &splits)).collect();
        for leaf in 0..(1usize << DEPTH) {
            if leaves.contains(&leaf) {
                columns.push(Column::dense(
                    format!("rte{tree}_{leaf}"),
                    &leaves
                        .iter()
                        .map(|&l| if l == leaf { 1.0 } else { 0.0 })
                        .collect::<Vec<_>>(),
                ));
            }
        }
    }
    Ok(d.with_columns(columns)?)
}
