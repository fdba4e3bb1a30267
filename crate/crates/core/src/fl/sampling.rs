//! Per-round client sampling.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

/// Uniform sample of `max(1, round(fraction · total))` client ids without
/// replacement, returned ascending. Depends only on `(seed, round)`, so the
/// schedule is identical across strategies.
pub fn sample_clients(total: usize, fraction: f64, round: u64, seed: u64) -> Result<Vec<usize>> {
    if total == 0 {
        return Err(Error::validation("no clients to sample".to_string()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(
            Some("sample_fraction"),
            format!("{fraction} must lie in (0, 1]"),
        ));
    }
    let count = ((fraction * total as f64).round() as usize).clamp(1, total);
    let mut ids: Vec<usize> = (0..total).collect();
    let mut rng = stream(seed, StreamId::ClientSampling, round, 0);
    ids.shuffle(&mut rng);
    let mut picked: Vec<usize> = ids.into_iter().take(count).collect();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_percent_of_twenty_is_two() {
        let s = sample_clients(20, 0.1, 1, 0).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_fraction_takes_everyone() {
        let s = sample_clients(7, 1.0, 3, 9).unwrap();
        assert_eq!(s, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn deterministic_in_seed_and_round() {
        assert_eq!(
            sample_clients(50, 0.2, 4, 11).unwrap(),
            sample_clients(50, 0.2, 4, 11).unwrap()
        );
        assert_ne!(
            sample_clients(50, 0.2, 4, 11).unwrap(),
            sample_clients(50, 0.2, 5, 11).unwrap()
        );
    }

    #[test]
    fn tiny_fraction_still_samples_one() {
        let s = sample_clients(10, 0.01, 0, 0).unwrap();
        assert_eq!(s.len(), 1);
    }
}
