use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bootstrap multiplicities of one tree: `counts[j]` is how often row `j`
/// was drawn. Rows with a zero count are out-of-bag for the tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub counts: Vec<u32>,
}

impl BootstrapRecord {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, row: usize) -> u32 {
        self.counts[row]
    }

    pub fn is_oob(&self, row: usize) -> bool {
        self.counts[row] == 0
    }

    /// Total number of draws; equals the number of rows for a bootstrap.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn in_bag(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.counts[j] > 0).collect()
    }

    pub fn oob(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.counts[j] == 0).collect()
    }
}

/// `n` uniform draws with replacement from `0..n`, tallied per row.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BootstrapRecord {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    BootstrapRecord { counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_row_is_always_in_bag() {
        let b = bootstrap_sample(1, &mut rng::stream(0, 0));
        assert_eq!(b.counts, vec![1]);
        assert!(b.oob().is_empty());
    }

    #[test]
    fn counts_sum_to_n_and_oob_is_complement() {
        for n in [2, 7, 50, 333] {
            let b = bootstrap_sample(n, &mut rng::stream(n as u64, 1));
            assert_eq!(b.total(), n as u64);
            let oob = b.oob();
            let inb = b.in_bag();
            assert_eq!(oob.len() + inb.len(), n);
            assert!(oob.iter().all(|&j| b.count(j) == 0));
        }
    }

    #[test]
    fn oob_fraction_approaches_inverse_e() {
        // (1 - 1/n)^n -> e^-1 ~ 0.3679 for n = 1000
        let n = 1000;
        let mean: f64 = (0..200)
            .map(|s| bootstrap_sample(n, &mut rng::stream(77, s)).oob().len() as f64 / n as f64)
            .sum::<f64>()
            / 200.0;
        assert!((mean - 0.368).abs() < 0.01, "mean oob fraction {mean}");
    }
}
