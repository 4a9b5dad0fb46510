use rand::Rng;
use serde::{Deserialize, Serialize};

use super::priority::{compute_priority, PriorityParams, Strategy};
use super::transition::Transition;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sumtree::SumTree;

/// Handle to a stored transition.
///
/// `serial` is the insertion number of the transition; once the slot is
/// overwritten (or the buffer cleared) the handle becomes stale and priority
/// updates through it are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotId {
    pub index: usize,
    pub serial: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityRecord<S> {
    pub priority: S,
    pub visit_count: u64,
    pub last_signal: S,
}

impl<S: Scalar> PriorityRecord<S> {
    fn vacant() -> Self {
        Self { priority: S::zero(), visit_count: 0, last_signal: S::zero() }
    }
}

/// Fixed-capacity FIFO ring of transitions with sum-tree priorities.
#[derive(Debug, Clone)]
pub struct PrioritizedBuffer<S: Scalar> {
    pub(super) capacity: usize,
    pub(super) slots: Vec<Option<Transition<S>>>,
    pub(super) serials: Vec<u64>,
    pub(super) records: Vec<PriorityRecord<S>>,
    pub(super) tree: SumTree<S>,
    pub(super) write_cursor: usize,
    pub(super) len: usize,
    pub(super) inserted_total: u64,
    pub(super) running_loss_min: S,
    pub(super) obs_dim: Option<usize>,
    pub(super) skipped_updates: u64,
    pub(super) applied_updates: u64,
    pub(super) params: PriorityParams<S>,
}

impl<S: Scalar> PrioritizedBuffer<S> {
    pub fn new(capacity: usize, params: PriorityParams<S>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            capacity,
            slots: vec![None; capacity],
            serials: vec![0; capacity],
            records: vec![PriorityRecord::vacant(); capacity],
            tree: SumTree::new(capacity)?,
            write_cursor: 0,
            len: 0,
            inserted_total: 0,
            running_loss_min: S::infinity(),
            obs_dim: None,
            skipped_updates: 0,
            applied_updates: 0,
            params,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of occupied slots.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transitions ever added, including evicted ones.
    pub fn inserted_total(&self) -> u64 {
        self.inserted_total
    }

    pub fn params(&self) -> &PriorityParams<S> {
        &self.params
    }

    pub fn strategy(&self) -> Strategy {
        self.params.strategy
    }

    /// Smallest signal seen so far; `+inf` before the first update.
    pub fn running_loss_min(&self) -> S {
        self.running_loss_min
    }

    /// Updates dropped because their slot had been overwritten.
    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    /// Per-transition priority updates applied so far.
    pub fn applied_updates(&self) -> u64 {
        self.applied_updates
    }

    pub fn obs_dim(&self) -> Option<usize> {
        self.obs_dim
    }

    pub fn tree(&self) -> &SumTree<S> {
        &self.tree
    }

    pub fn record(&self, index: usize) -> Option<&PriorityRecord<S>> {
        self.slots.get(index)?.as_ref().map(|_| &self.records[index])
    }

    pub fn transition(&self, index: usize) -> Option<&Transition<S>> {
        self.slots.get(index)?.as_ref()
    }

    pub fn is_current(&self, id: SlotId) -> bool {
        id.index < self.capacity && self.slots[id.index].is_some() && self.serials[id.index] == id.serial
    }

    /// Occupied slots with their records, in slot order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, &Transition<S>, &PriorityRecord<S>)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.as_ref().map(|t| (i, t, &self.records[i])))
    }

    /// Store a transition at the write cursor with priority `p_max` and a zero
    /// visit count, evicting the oldest transition once the ring is full.
    pub fn add(&mut self, transition: Transition<S>) -> Result<SlotId> {
        transition.validate()?;
        match self.obs_dim {
            Some(dim) if dim != transition.obs_dim() => {
                return Err(Error::DimensionMismatch { expected: dim, got: transition.obs_dim() })
            }
            _ => self.obs_dim = Some(transition.obs_dim()),
        }
        let index = self.write_cursor;
        if self.slots[index].is_none() {
            self.len += 1;
        }
        let serial = self.inserted_total;
        self.slots[index] = Some(transition);
        self.serials[index] = serial;
        self.records[index] = PriorityRecord {
            priority: self.params.p_max,
            visit_count: 0,
            last_signal: S::zero(),
        };
        self.tree.set(index, self.params.p_max)?;
        self.write_cursor = (index + 1) % self.capacity;
        self.inserted_total += 1;
        Ok(SlotId { index, serial })
    }

    /// Draw `batch_size` transitions with probability proportional to their
    /// priority. Visit counts are not touched here.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<(SlotId, Transition<S>)>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let indices = self.tree.sample_batch(batch_size, rng)?;
        Ok(indices
            .into_iter()
            .map(|index| {
                let t = self.slots[index].clone().expect("sum tree only returns occupied slots");
                (SlotId { index, serial: self.serials[index] }, t)
            })
            .collect())
    }

    /// Current sampling probability `p_i / sum_j p_j` of a stored transition.
    /// Callers wanting importance-sampling corrections can build them on this.
    pub fn sampling_probability(&self, id: SlotId) -> Option<S> {
        if !self.is_current(id) {
            return None;
        }
        self.tree.probability(id.index)
    }

    /// Recompute priorities of trained transitions from their latest signal
    /// (model loss or TD error), then bump their visit counts.
    ///
    /// Duplicate ids are processed in order. Stale ids are skipped and counted.
    pub fn update_priorities(&mut self, ids: &[SlotId], signals: &[S]) -> Result<()> {
        if ids.len() != signals.len() {
            return Err(invalid(format!(
                "{} ids but {} signals",
                ids.len(),
                signals.len()
            )));
        }
        if let Some(s) = signals.iter().find(|s| !s.is_finite()) {
            return Err(invalid(format!("priority signal must be finite, got {s}")));
        }
        for (&id, &signal) in ids.iter().zip(signals) {
            if !self.is_current(id) {
                self.skipped_updates += 1;
                continue;
            }
            let effective = if self.params.use_running_min {
                self.running_loss_min = self.running_loss_min.min(signal);
                signal - self.running_loss_min
            } else {
                signal
            };
            let record = &mut self.records[id.index];
            if self.params.strategy != Strategy::Uniform {
                // floor keeps occupied slots sampleable once beta^v underflows
                record.priority =
                    compute_priority(&self.params, record.visit_count, effective)?.max(S::min_positive_value());
                self.tree.set(id.index, record.priority)?;
            }
            record.last_signal = signal;
            record.visit_count += 1;
            self.applied_updates += 1;
        }
        Ok(())
    }

    /// Drop every stored transition. Outstanding slot ids become stale; the
    /// running loss minimum and counters are kept.
    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
        self.records.iter_mut().for_each(|r| *r = PriorityRecord::vacant());
        self.tree.clear();
        self.write_cursor = 0;
        self.len = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(x: f64) -> Transition<f64> {
        Transition::new(vec![x, 0.0], 0, 0.0, vec![0.0, x], false)
    }

    fn buffer(capacity: usize, strategy: Strategy) -> PrioritizedBuffer<f64> {
        PrioritizedBuffer::new(capacity, PriorityParams::with_strategy(strategy)).unwrap()
    }

    #[test]
    fn add_sets_p_max() {
        let mut b = buffer(8, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        assert_eq!(b.tree().get(id.index), 1e5);
        assert_eq!(b.record(id.index).unwrap().visit_count, 0);
    }

    #[test]
    fn ring_semantics() {
        let mut b = buffer(4, Strategy::Curious);
        let ids: Vec<_> = (0..5).map(|i| b.add(tr(i as f64)).unwrap()).collect();
        assert_eq!(ids[4].index, 0);
        assert_eq!(b.len(), 4);
        assert_eq!(b.inserted_total(), 5);
        assert_eq!(b.transition(0).unwrap().observation[0], 4.0);
        assert!(!b.is_current(ids[0]));
    }

    #[test]
    fn dimension_mismatch() {
        let mut b = buffer(4, Strategy::Curious);
        b.add(tr(1.0)).unwrap();
        let bad = Transition::new(vec![1.0], 0, 0.0, vec![1.0], false);
        assert!(matches!(b.add(bad), Err(Error::DimensionMismatch { .. })));
        let ragged = Transition::new(vec![1.0, 2.0], 0, 0.0, vec![1.0], false);
        assert!(b.add(ragged).is_err());
    }

    #[test]
    fn empty_buffer_sampling() {
        let b = buffer(4, Strategy::Uniform);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample_batch(1, &mut rng), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn single_slot_always_drawn() {
        let mut b = buffer(4, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(b.sample_batch(50, &mut rng).unwrap().iter().all(|(i, _)| *i == id));
    }

    #[test]
    fn update_lifecycle() {
        let mut b = buffer(4, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        b.update_priorities(&[id], &[0.99]).unwrap();
        let r = b.record(id.index).unwrap();
        assert!((r.priority - 10001.0).abs() < 1e-9);
        assert_eq!(r.visit_count, 1);
        b.update_priorities(&[id], &[0.99]).unwrap();
        let r = b.record(id.index).unwrap();
        assert!((r.priority - 7001.0).abs() < 1e-9);
        assert_eq!(r.visit_count, 2);
        assert_eq!(b.tree().get(id.index), r.priority);
    }

    #[test]
    fn duplicates_processed_in_order() {
        let mut b = buffer(4, Strategy::Count);
        let id = b.add(tr(1.0)).unwrap();
        b.update_priorities(&[id, id, id], &[0.0, 0.0, 0.0]).unwrap();
        let r = b.record(id.index).unwrap();
        assert_eq!(r.visit_count, 3);
        // last write used v = 2
        assert!((r.priority - 0.49).abs() < 1e-12);
    }

    #[test]
    fn running_min_subtraction() {
        let params = PriorityParams { use_running_min: true, ..PriorityParams::<f64>::default() };
        let mut b = PrioritizedBuffer::new(4, params).unwrap();
        assert_eq!(b.running_loss_min(), f64::INFINITY);
        let x = b.add(tr(1.0)).unwrap();
        let y = b.add(tr(2.0)).unwrap();
        b.update_priorities(&[x], &[5.0]).unwrap();
        b.update_priorities(&[y], &[5.0]).unwrap();
        assert_eq!(b.running_loss_min(), 5.0);
        let expected = 1e4 + 0.01f64.powf(0.7);
        assert!((b.record(y.index).unwrap().priority - expected).abs() < 1e-9);
    }

    #[test]
    fn stale_ids_skipped() {
        let mut b = buffer(2, Strategy::Curious);
        let old = b.add(tr(1.0)).unwrap();
        b.add(tr(2.0)).unwrap();
        b.add(tr(3.0)).unwrap();
        b.update_priorities(&[old], &[1.0]).unwrap();
        assert_eq!(b.skipped_updates(), 1);
        assert_eq!(b.record(0).unwrap().visit_count, 0);
        assert_eq!(b.record(0).unwrap().priority, 1e5);
    }

    #[test]
    fn update_rejects_mismatched_lengths_and_nan() {
        let mut b = buffer(2, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        assert!(b.update_priorities(&[id], &[]).is_err());
        assert!(b.update_priorities(&[id], &[f64::NAN]).is_err());
        assert_eq!(b.record(0).unwrap().visit_count, 0);
    }

    #[test]
    fn uniform_keeps_leaves_equal() {
        let mut b = buffer(8, Strategy::Uniform);
        let ids: Vec<_> = (0..6).map(|i| b.add(tr(i as f64)).unwrap()).collect();
        b.update_priorities(&ids[..3], &[9.0, 0.1, 3.0]).unwrap();
        let leaves: Vec<_> = b.occupied().map(|(i, _, _)| b.tree().get(i)).collect();
        assert!(leaves.iter().all(|&p| p == leaves[0]));
        assert_eq!(b.record(ids[0].index).unwrap().visit_count, 1);
    }

    #[test]
    fn eviction_resets_record() {
        let mut b = buffer(1, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        b.update_priorities(&[id, id], &[3.0, 3.0]).unwrap();
        let fresh = b.add(tr(2.0)).unwrap();
        let r = b.record(fresh.index).unwrap();
        assert_eq!((r.priority, r.visit_count, r.last_signal), (1e5, 0, 0.0));
        b.update_priorities(&[fresh], &[0.99]).unwrap();
        assert!((b.record(0).unwrap().priority - 10001.0).abs() < 1e-9);
    }

    #[test]
    fn clear_invalidates_ids() {
        let mut b = buffer(4, Strategy::Curious);
        let id = b.add(tr(1.0)).unwrap();
        b.clear();
        assert!(b.is_empty());
        assert_eq!(b.tree().total(), 0.0);
        let next = b.add(tr(2.0)).unwrap();
        assert_eq!(next.index, 0);
        assert_ne!(next, id);
        b.update_priorities(&[id], &[1.0]).unwrap();
        assert_eq!(b.skipped_updates(), 1);
    }

    #[test]
    fn sampling_probability_hook() {
        let mut b = buffer(4, Strategy::Curious);
        let a = b.add(tr(1.0)).unwrap();
        let c = b.add(tr(2.0)).unwrap();
        assert_eq!(b.sampling_probability(a), Some(0.5));
        b.update_priorities(&[c], &[0.99]).unwrap();
        let expected = 1e5 / (1e5 + 10001.0);
        assert!((b.sampling_probability(a).unwrap() - expected).abs() < 1e-12);
    }
}
