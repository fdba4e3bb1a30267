//! Stratified train/test splitting.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

use super::dataset::Dataset;

/// Split `data` into train/test with `round(test_frac · n)` test samples,
/// stratified by label. Classes with a single sample stay in train; if the
/// stratified quota cannot be met the remainder is drawn without
/// stratification.
pub fn split_local(data: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = stream(seed, StreamId::LocalSplit, 0, 0);
    split_local_with_rng(data, test_frac, &mut rng)
}

/// Same as [`split_local`] but drawing from a caller-owned stream; used by the
/// partitioner so each client's split has its own tagged stream.
pub fn split_local_with_rng(
    data: &Dataset,
    test_frac: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, Dataset)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::config(
            Some("test_frac"),
            format!("test fraction {test_frac} must lie in (0, 1)"),
        ));
    }
    let n = data.len();
    let total_test = (test_frac * n as f64).round() as usize;
    if total_test == 0 || total_test >= n {
        return Err(Error::config(
            None,
            format!("splitting {n} samples at {test_frac} leaves an empty side"),
        ));
    }

    // Shuffled per-class index pools, visited in class order for determinism.
    let class_count = data.class_count();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in data.labels().iter().enumerate() {
        pools[l as usize].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }

    // Largest-remainder quotas over classes with >= 2 samples, capped so train
    // keeps at least one sample of each of those classes.
    let mut quota = vec![0usize; class_count];
    let mut assigned = 0usize;
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (c, pool) in pools.iter().enumerate() {
        if pool.len() < 2 {
            continue;
        }
        let ideal = test_frac * pool.len() as f64;
        let base = (ideal.floor() as usize).min(pool.len() - 1);
        quota[c] = base;
        assigned += base;
        remainders.push((ideal - ideal.floor(), c));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in &remainders {
        if assigned >= total_test {
            break;
        }
        if quota[c] < pools[c].len() - 1 {
            quota[c] += 1;
            assigned += 1;
        }
    }
    // Fallback: fill any shortfall from whatever classes still have samples,
    // even if that empties a class from train.
    while assigned < total_test {
        let donor = (0..class_count)
            .filter(|&c| quota[c] < pools[c].len())
            .max_by_key(|&c| pools[c].len() - quota[c])
            .expect("total_test < n guarantees a donor");
        quota[donor] += 1;
        assigned += 1;
    }

    let mut test_idx = Vec::with_capacity(total_test);
    let mut train_idx = Vec::with_capacity(n - total_test);
    for (c, pool) in pools.iter().enumerate() {
        test_idx.extend_from_slice(&pool[..quota[c]]);
        train_idx.extend_from_slice(&pool[quota[c]..]);
    }
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(labels: Vec<u16>, class_count: usize) -> Dataset {
        let features = (0..labels.len() * 2).map(|i| i as f32).collect();
        Dataset::new(features, labels, 2, class_count).unwrap()
    }

    #[test]
    fn ten_samples_split_eight_two() {
        let d = dataset(vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2);
        let (train, test) = split_local(&d, 0.2, 3).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        // stratified: one test sample from each class
        assert_eq!(test.histogram(), vec![1, 1]);
    }

    #[test]
    fn single_class_client_still_splits() {
        let d = dataset(vec![1; 10], 3);
        let (train, test) = split_local(&d, 0.2, 0).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        assert!(train.labels().iter().all(|&l| l == 1));
        assert!(test.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn same_seed_same_split() {
        let d = dataset(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0], 3);
        let a = split_local(&d, 0.3, 11).unwrap();
        let b = split_local(&d, 0.3, 11).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn degenerate_split_is_a_config_error() {
        let d = dataset(vec![0, 1], 2);
        assert!(split_local(&d, 0.2, 0).is_err()); // test rounds to 0
        let d1 = dataset(vec![0], 2);
        assert!(split_local(&d1, 0.5, 0).is_err()); // train would be empty
    }

    #[test]
    fn singleton_class_goes_to_train_when_possible() {
        let mut labels = vec![0u16; 9];
        labels.push(1); // one sample of class 1
        let d = dataset(labels, 2);
        let (train, test) = split_local(&d, 0.2, 5).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(train.histogram()[1], 1);
        assert_eq!(test.histogram()[1], 0);
    }
}
