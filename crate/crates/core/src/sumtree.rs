//! Sum tree over non-negative leaf priorities.
//!
//! The tree is stored implicitly in a flat array: node `1` is the root, node
//! `i` has children `2i` and `2i + 1`, and the leaves occupy the last
//! `width` positions where `width` is `capacity` rounded up to a power of two.
//! Padding leaves are permanently zero and are never returned by sampling.
//!
//! Internal nodes are always recomputed from their two children (never
//! updated by deltas), so every internal node is bitwise equal to the sum of
//! its children after any sequence of operations.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Number of `set` calls between full rebuilds of the internal nodes.
pub const REBUILD_PERIOD: u64 = 1 << 20;

#[derive(Debug, Clone)]
pub struct SumTree<S: Scalar> {
    capacity: usize,
    width: usize,
    nodes: Vec<S>,
    leaf_count_in_use: usize,
    sets_since_rebuild: u64,
}

impl<S: Scalar> SumTree<S> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("sum tree capacity must be at least 1"));
        }
        let width = capacity.next_power_of_two();
        Ok(Self {
            capacity,
            width,
            nodes: vec![S::zero(); 2 * width],
            leaf_count_in_use: 0,
            sets_since_rebuild: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of leaves currently holding a strictly positive priority.
    pub fn leaf_count_in_use(&self) -> usize {
        self.leaf_count_in_use
    }

    #[inline]
    pub fn total(&self) -> S {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, index: usize) -> S {
        self.nodes[self.width + index]
    }

    /// Leaf priorities in index order.
    pub fn leaves(&self) -> &[S] {
        &self.nodes[self.width..self.width + self.capacity]
    }

    pub fn set(&mut self, index: usize, priority: S) -> Result<()> {
        if index >= self.capacity {
            return Err(invalid(format!(
                "leaf index {index} out of range for capacity {}",
                self.capacity
            )));
        }
        if !priority.is_finite() || priority < S::zero() {
            return Err(invalid(format!(
                "priority must be finite and non-negative, got {priority}"
            )));
        }
        let mut node = self.width + index;
        let old = self.nodes[node];
        match (old > S::zero(), priority > S::zero()) {
            (false, true) => self.leaf_count_in_use += 1,
            (true, false) => self.leaf_count_in_use -= 1,
            _ => {}
        }
        self.nodes[node] = priority;
        while node > 1 {
            node >>= 1;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }

        self.sets_since_rebuild += 1;
        if self.sets_since_rebuild >= REBUILD_PERIOD {
            self.rebuild();
        }
        Ok(())
    }

    /// Recompute every internal node bottom-up from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.width).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
        self.sets_since_rebuild = 0;
    }

    /// Reset every leaf to zero.
    pub fn clear(&mut self) {
        self.nodes.iter_mut().for_each(|v| *v = S::zero());
        self.leaf_count_in_use = 0;
        self.sets_since_rebuild = 0;
    }

    /// Index `i` with `prefix(i) <= u * total < prefix(i + 1)`.
    ///
    /// When the residual mass equals the left subtree's sum the descent goes
    /// right, so the selected interval is half-open and zero-mass leaves are
    /// never returned.
    pub fn sample(&self, u: S) -> Result<usize> {
        if !(u >= S::zero() && u < S::one()) {
            return Err(invalid(format!("sample point must lie in [0, 1), got {u}")));
        }
        let total = self.total();
        if total <= S::zero() {
            return Err(Error::EmptyDistribution);
        }
        Ok(self.descend(u * total))
    }

    #[inline]
    fn descend(&self, mut mass: S) -> usize {
        let mut node = 1;
        while node < self.width {
            let left = 2 * node;
            let left_sum = self.nodes[left];
            // Rounding can push `mass` past the last positive leaf; an empty
            // right subtree is never entered.
            if mass < left_sum || self.nodes[left + 1] <= S::zero() {
                node = left;
            } else {
                mass -= left_sum;
                node = left + 1;
            }
        }
        node - self.width
    }

    /// Draw `n` indices independently, each with probability `leaf / total`.
    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        let total = self.total();
        if total <= S::zero() {
            return Err(Error::EmptyDistribution);
        }
        (0..n)
            .map(|_| {
                let u = S::of(rng.gen::<f64>());
                // f32 may round a draw just below 1 up to exactly 1
                let u = if u >= S::one() { S::one() - S::epsilon() } else { u };
                self.sample(u)
            })
            .collect()
    }

    /// `leaf / total`, or `None` if the tree is empty.
    pub fn probability(&self, index: usize) -> Option<S> {
        let total = self.total();
        (index < self.capacity && total > S::zero()).then(|| self.get(index) / total)
    }

    /// Internal nodes as a slice, root first. Exposed for consistency checks.
    pub fn internal_nodes(&self) -> &[S] {
        &self.nodes[1..self.width]
    }

    #[doc(hidden)]
    pub fn raw_nodes(&self) -> &[S] {
        &self.nodes
    }

    #[doc(hidden)]
    pub fn width(&self) -> usize {
        self.width
    }
}
