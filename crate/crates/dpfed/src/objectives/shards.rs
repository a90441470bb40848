//! Pathological non-i.i.d. data partitioning by label-sorted shards.
//!
//! Samples are sorted by label, cut into `n_clients * shards_per_client`
//! equal contiguous shards, and the shards are dealt to clients uniformly
//! at random without replacement. When per-class counts are multiples of
//! the shard size every shard is single-class, so each client sees at most
//! `shards_per_client` distinct classes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::stream::StreamKey;

/// A dealt shard partition: `client_samples[i]` lists the sample indices
/// held by client `i`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardAssignment {
    pub shards_per_client: usize,
    pub client_samples: Vec<Vec<usize>>,
}

impl ShardAssignment {
    /// JSON object mapping client id to its sample indices.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, &Vec<usize>> = self
            .client_samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i.to_string(), s))
            .collect();
        serde_json::to_string_pretty(&map).expect("shard map serializes")
    }

    /// Checks the partition property: every index in `0..total` appears in
    /// exactly one client's list.
    pub fn validate_partition(&self, total: usize) -> Result<()> {
        let mut seen = vec![false; total];
        for (client, samples) in self.client_samples.iter().enumerate() {
            for &idx in samples {
                if idx >= total || seen[idx] {
                    return Err(Error::InvalidConfig(format!(
                        "client {client} holds sample {idx} which is out of range or duplicated"
                    )));
                }
                seen[idx] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "shard assignment does not cover every sample".into(),
            ))
        }
    }
}

/// Deal label-sorted shards to clients.
///
/// Requires the sample count to split into `n_clients * shards_per_client`
/// equal shards. After dealing, verifies that no client ends up with more
/// distinct classes than shards; that can only trip when class counts are
/// not multiples of the shard size, which the caller should treat as a
/// data-sizing mistake.
pub fn partition_by_label_shards(
    labels: &[usize],
    n_clients: usize,
    shards_per_client: usize,
    key: &StreamKey,
) -> Result<ShardAssignment> {
    if n_clients == 0 || shards_per_client == 0 {
        return Err(Error::InvalidConfig(
            "n_clients and shards_per_client must be positive".into(),
        ));
    }
    let total_shards = n_clients * shards_per_client;
    if labels.is_empty() || labels.len() % total_shards != 0 {
        return Err(Error::ShardDivisibility {
            samples: labels.len(),
            clients: n_clients,
            shards: shards_per_client,
        });
    }
    let shard_size = labels.len() / total_shards;

    // Stable sort keeps equal labels in input order, so the cut points are
    // a pure function of the label multiset and input order.
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);

    let mut shard_ids: Vec<usize> = (0..total_shards).collect();
    key.stream().shuffle(&mut shard_ids);

    let mut client_samples = Vec::with_capacity(n_clients);
    for client in 0..n_clients {
        let mut samples = Vec::with_capacity(shards_per_client * shard_size);
        for &shard in &shard_ids[client * shards_per_client..(client + 1) * shards_per_client] {
            samples.extend_from_slice(&order[shard * shard_size..(shard + 1) * shard_size]);
        }
        samples.sort_unstable();
        let mut distinct: Vec<usize> = samples.iter().map(|&i| labels[i]).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() > shards_per_client {
            return Err(Error::ShardClasses {
                client,
                distinct: distinct.len(),
                allowed: shards_per_client,
            });
        }
        client_samples.push(samples);
    }
    Ok(ShardAssignment {
        shards_per_client,
        client_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_client_example_partitions_evenly() {
        // 10 samples, 2 classes of 5, 2 clients x 5 shards of size 1.
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let key = StreamKey::new(4).child("shards", 0);
        let a = partition_by_label_shards(&labels, 2, 5, &key).unwrap();
        assert_eq!(a.client_samples[0].len(), 5);
        assert_eq!(a.client_samples[1].len(), 5);
        a.validate_partition(10).unwrap();
    }

    #[test]
    fn single_class_shards_bound_client_classes() {
        // 4 classes x 6 samples, 4 clients x 2 shards of size 3: every
        // shard is single-class, so every client sees at most 2 classes.
        let mut labels = Vec::new();
        for c in 0..4 {
            labels.extend(std::iter::repeat(c).take(6));
        }
        let key = StreamKey::new(8).child("shards", 0);
        let a = partition_by_label_shards(&labels, 4, 2, &key).unwrap();
        for samples in &a.client_samples {
            let mut classes: Vec<usize> = samples.iter().map(|&i| labels[i]).collect();
            classes.sort_unstable();
            classes.dedup();
            assert!(classes.len() <= 2);
        }
        a.validate_partition(24).unwrap();
    }

    #[test]
    fn indivisible_counts_are_rejected() {
        let labels = vec![0usize; 10];
        let key = StreamKey::new(0).child("shards", 0);
        assert!(matches!(
            partition_by_label_shards(&labels, 3, 2, &key),
            Err(Error::ShardDivisibility { samples: 10, clients: 3, shards: 2 })
        ));
    }

    #[test]
    fn dealing_is_reproducible_per_key() {
        let labels: Vec<usize> = (0..40).map(|i| i / 10).collect();
        let key = StreamKey::new(15).child("shards", 0);
        let a = partition_by_label_shards(&labels, 4, 2, &key).unwrap();
        let b = partition_by_label_shards(&labels, 4, 2, &key).unwrap();
        assert_eq!(a, b);
        let c = partition_by_label_shards(&labels, 4, 2, &StreamKey::new(16).child("shards", 0))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn json_export_lists_every_client() {
        let labels = vec![0, 0, 1, 1];
        let key = StreamKey::new(2).child("shards", 0);
        let a = partition_by_label_shards(&labels, 2, 1, &key).unwrap();
        let json = a.to_json();
        let parsed: std::collections::BTreeMap<String, Vec<usize>> =
            serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.len(), 2);
        let mut all: Vec<usize> = parsed.values().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }
}
