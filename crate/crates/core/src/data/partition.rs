//! Label-skewed client partitioning via per-class Dirichlet draws.

use rand::seq::SliceRandom;
use rand_distr::{Dirichlet, Distribution};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

use super::dataset::{ClientDataset, Dataset};
use super::split::split_local_with_rng;

/// Partition `data` across `clients` and give every client a local
/// train/test split.
///
/// For each class, proportions over clients are drawn from
/// `Dirichlet(alpha, ..., alpha)` and that class's samples are dealt out by
/// largest remainder, so lower `alpha` means more skewed label mixes. Clients
/// left under `min_per_client` samples are topped up from the largest client,
/// one sample of its most plentiful class at a time. The union of client
/// samples is exactly the input, with no overlaps.
pub fn dirichlet_partition(
    data: &Dataset,
    clients: usize,
    alpha: f64,
    min_per_client: usize,
    test_frac: f64,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    let assignments = partition_indices(data, clients, alpha, min_per_client, seed)?;
    let mut out = Vec::with_capacity(clients);
    for (k, indices) in assignments.iter().enumerate() {
        let local = data.subset(indices)?;
        let mut rng = stream(seed, StreamId::LocalSplit, k as u64, 1);
        let (train, test) = split_local_with_rng(&local, test_frac, &mut rng).map_err(|e| {
            Error::config(
                None,
                format!("client {k} with {} samples cannot be split: {e}", local.len()),
            )
        })?;
        out.push(ClientDataset::new(k, train, test));
    }
    Ok(out)
}

/// The index-level partition behind [`dirichlet_partition`]: `result[k]` holds
/// the sample indices assigned to client `k`, sorted ascending.
pub fn partition_indices(
    data: &Dataset,
    clients: usize,
    alpha: f64,
    min_per_client: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if clients < 2 {
        return Err(Error::config(Some("clients"), format!("need >= 2 clients, got {clients}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(Some("alpha"), format!("alpha {alpha} must be > 0")));
    }
    if min_per_client < 1 {
        return Err(Error::config(Some("min_per_client"), "must be >= 1".to_string()));
    }
    if clients * min_per_client > data.len() {
        return Err(Error::config(
            Some("min_per_client"),
            format!(
                "{clients} clients x {min_per_client} minimum exceeds {} samples",
                data.len()
            ),
        ));
    }

    let mut assignments: Vec<Vec<usize>> = vec![Vec::new(); clients];
    for c in 0..data.class_count() {
        let mut indices: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels()[i] as usize == c)
            .collect();
        if indices.is_empty() {
            continue;
        }
        let mut rng = stream(seed, StreamId::PartitionClass, c as u64, 0);
        let proportions = Dirichlet::new(&vec![alpha; clients])
            .map_err(|e| Error::config(Some("alpha"), format!("dirichlet({alpha}): {e}")))?
            .sample(&mut rng);
        indices.shuffle(&mut rng);

        let counts = largest_remainder(&proportions, indices.len());
        let mut cursor = 0usize;
        for (k, &count) in counts.iter().enumerate() {
            assignments[k].extend_from_slice(&indices[cursor..cursor + count]);
            cursor += count;
        }
    }

    rebalance_minimum(&mut assignments, data.labels(), min_per_client);
    for a in &mut assignments {
        a.sort_unstable();
    }
    Ok(assignments)
}

/// Integer counts summing to `total` that best match `proportions`
/// (floor + distribute remainders by descending fractional part, ties to the
/// lower index).
fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let ideals: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = ideals.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = ideals[a] - ideals[a].floor();
        let fb = ideals[b] - ideals[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().take(total - assigned) {
        counts[k] += 1;
    }
    counts
}

/// Greedy top-up: while some client is under the minimum, move one sample of
/// the largest client's most plentiful class to the smallest client. No RNG;
/// entirely id-ordered, so the result is deterministic.
fn rebalance_minimum(assignments: &mut [Vec<usize>], labels: &[u16], min_per_client: usize) {
    loop {
        let needy = match (0..assignments.len())
            .filter(|&k| assignments[k].len() < min_per_client)
            .min_by_key(|&k| (assignments[k].len(), k))
        {
            Some(k) => k,
            None => return,
        };
        let donor = (0..assignments.len())
            .max_by_key(|&k| (assignments[k].len(), std::cmp::Reverse(k)))
            .expect("at least two clients");
        debug_assert_ne!(donor, needy);

        // Most plentiful class within the donor, lowest class on ties.
        let class_count = labels.iter().map(|&l| l as usize).max().unwrap_or(0) + 1;
        let mut hist = vec![0usize; class_count];
        for &i in &assignments[donor] {
            hist[labels[i] as usize] += 1;
        }
        let class = (0..class_count)
            .max_by_key(|&c| (hist[c], std::cmp::Reverse(c)))
            .unwrap();
        let pos = assignments[donor]
            .iter()
            .rposition(|&i| labels[i] as usize == class)
            .expect("donor has a sample of its own most plentiful class");
        let sample = assignments[donor].remove(pos);
        assignments[needy].push(sample);
    }
}
