use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Cross-validation fold labels for `n` rows. Fold sizes differ by at most
/// one and the assignment is a pure function of `(n, k, seed)`.
#[derive(Clone, Debug)]
pub struct FoldAssignment {
    fold_id: Vec<usize>,
    k: usize,
    seed: u64,
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {}", k)));
    }
    if k > n {
        return Err(Error::Config(format!(
            "cannot split {} rows into {} folds",
            n, k
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_id = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_id[row] = pos % k;
    }
    Ok(FoldAssignment { fold_id, k, seed })
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.fold_id.len()
    }

    pub fn fold_ids(&self) -> &[usize] {
        &self.fold_id
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.fold_id {
            sizes[f] += 1;
        }
        sizes
    }

    /// Row indices for the training and held-out parts of one fold.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        assert!(fold < self.k, "fold {} out of range", fold);
        let mut train = Vec::with_capacity(self.fold_id.len());
        let mut test = Vec::new();
        for (row, &f) in self.fold_id.iter().enumerate() {
            if f == fold {
                test.push(row);
            } else {
                train.push(row);
            }
        }
        (train, test)
    }
}
