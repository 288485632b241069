use std::collections::VecDeque;

use rand::Rng;

use crate::error::LearnerError;

/// FIFO ring buffer with uniform sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer<E> {
    capacity: usize,
    storage: VecDeque<E>,
    insert_count: u64,
}

impl<E: Clone> ReplayBuffer<E> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
            insert_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Total number of inserts, including evicted entries.
    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn store(&mut self, e: E) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(e);
        self.insert_count += 1;
    }

    pub fn get(&self, i: usize) -> Option<&E> {
        self.storage.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &E> {
        self.storage.iter()
    }

    pub fn clear(&mut self) {
        self.storage.clear();
    }

    /// `n` draws, uniform with replacement over the current contents.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<E>, LearnerError> {
        self.sample_newest(self.storage.len(), n, rng)
    }

    /// `n` draws, uniform with replacement over the newest `window` entries.
    pub fn sample_newest<R: Rng>(
        &self,
        window: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<E>, LearnerError> {
        if self.storage.is_empty() {
            return Err(LearnerError::EmptyBuffer);
        }
        let len = self.storage.len();
        let start = len - window.clamp(1, len);
        Ok((0..n)
            .map(|_| self.storage[rng.gen_range(start..len)].clone())
            .collect())
    }
}

pub fn buffer_store<E: Clone>(buffer: &mut ReplayBuffer<E>, e: E) {
    buffer.store(e);
}

pub fn buffer_sample<E: Clone, R: Rng>(
    buffer: &ReplayBuffer<E>,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<E>, LearnerError> {
    buffer.sample(batch_size, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.store(i);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(b.insert_count(), 4);
    }

    #[test]
    fn singleton_sampling() {
        let mut b = ReplayBuffer::new(10);
        b.store(42);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(5, &mut rng).unwrap(), vec![42; 5]);
    }

    #[test]
    fn empty_sampling_fails() {
        let b: ReplayBuffer<u8> = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(1, &mut rng), Err(LearnerError::EmptyBuffer));
    }

    #[test]
    fn uniform_over_four() {
        let mut b = ReplayBuffer::new(4);
        for i in 0..4usize {
            b.store(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        for v in b.sample(10_000, &mut rng).unwrap() {
            counts[v] += 1;
        }
        // 3 sigma of Binomial(10^4, 1/4) is about 130.
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 130.0, "{counts:?}");
        }
    }

    #[test]
    fn newest_window() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.store(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(b.sample_newest(5, 200, &mut rng).unwrap().iter().all(|&v| v >= 45));
    }
}
