//! Naive rehearsal: a reservoir buffer of previously seen samples and the
//! half-new / half-replayed batch construction.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, subseed};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fixed-capacity reservoir over the stream of inserted samples: at
/// capacity, every sample seen so far has equal retention probability.
/// Contents are deterministic given the seed and the insertion sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    seed: u64,
    seen: u64,
    items: Vec<Sample>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(ReplayBuffer { capacity, seed, seen: 0, items: Vec::new() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[Sample] {
        &self.items
    }

    /// Reservoir insertion (algorithm R). Each inserted sample draws its
    /// slot from a stream derived from (seed, position), so the buffer
    /// contents survive serialization without RNG state.
    pub fn insert(&mut self, samples: &[Sample]) {
        for s in samples {
            self.seen += 1;
            if self.items.len() < self.capacity {
                self.items.push(s.clone());
            } else {
                let mut rng = rng_from_seed(subseed(self.seed, &format!("ins.{}", self.seen)));
                let j = rng.random_range(0..self.seen);
                if (j as usize) < self.capacity {
                    self.items[j as usize] = s.clone();
                }
            }
            debug_assert!(self.items.len() <= self.capacity);
        }
    }

    /// Draw `k` stored samples uniformly without replacement.
    pub fn sample(&self, k: usize, seed: u64) -> Result<Vec<Sample>> {
        if self.items.is_empty() {
            return Err(Error::Usage(
                "sampling from an empty replay buffer (task 1 must fall back to all-new batches)"
                    .into(),
            ));
        }
        if k > self.items.len() {
            return Err(Error::Usage(format!(
                "requested {k} samples from a buffer of {}",
                self.items.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.items.len()).collect();
        let mut rng = rng_from_seed(seed);
        for i in 0..k {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        Ok(idx[..k].iter().map(|&i| self.items[i].clone()).collect())
    }
}

/// Mix a training batch with replayed samples: ceil(B/2) new plus
/// floor(B/2) replayed, shuffled. With an empty buffer the batch passes
/// through unchanged and the returned flag is false (task-1 behavior; the
/// caller logs it). A buffer smaller than floor(B/2) contributes what it
/// has.
pub fn interleave_batch(
    new_batch: Vec<Sample>,
    buffer: &ReplayBuffer,
    seed: u64,
) -> Result<(Vec<Sample>, bool)> {
    let b = new_batch.len();
    if buffer.is_empty() {
        return Ok((new_batch, false));
    }
    let replay_quota = (b / 2).min(buffer.len());
    let keep_new = b - replay_quota;
    let mut mixed: Vec<Sample> = new_batch.into_iter().take(keep_new).collect();
    mixed.extend(buffer.sample(replay_quota, subseed(seed, "replay.draw"))?);
    let mut rng = rng_from_seed(subseed(seed, "replay.shuffle"));
    for i in (1..mixed.len()).rev() {
        let j = rng.random_range(0..=i);
        mixed.swap(i, j);
    }
    Ok((mixed, true))
}
