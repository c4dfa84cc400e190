use rand::seq::SliceRandom;

use super::{DataTable, DatasetError};
use crate::rng;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng_for(seed));
    idx
}

/// Partition the first `first` shuffled rows from the rest; both parts keep file order.
fn partition(table: &DataTable, first: usize, seed: u64) -> (DataTable, DataTable) {
    let idx = shuffled(table.n_rows(), seed);
    let (mut a, mut b) = (idx[..first].to_vec(), idx[first..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (table.subset(&a), table.subset(&b))
}

/// Random train/test split with `round(train_fraction * n)` training rows.
pub fn split(table: &DataTable, train_fraction: f64, seed: u64) -> Result<(DataTable, DataTable), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(DatasetError::EmptyPartition);
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DatasetError::EmptyPartition);
    }
    Ok(partition(table, n_train, seed))
}

/// Set aside exactly `count` random rows; returns `(rest, held_out)`.
pub fn hold_out(table: &DataTable, count: usize, seed: u64) -> Result<(DataTable, DataTable), DatasetError> {
    let n = table.n_rows();
    if count == 0 || count >= n {
        return Err(DatasetError::BadCount { count, n });
    }
    let (held, rest) = partition(table, count, seed);
    Ok((rest, held))
}
