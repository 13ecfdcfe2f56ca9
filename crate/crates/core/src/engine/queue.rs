use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::vl::Nanos;

/// Min-queue ordered by `(due, insertion sequence)`; simultaneous events pop
/// in the order they were scheduled.
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<(Nanos, u64, usize)>>,
    slots: Vec<Option<T>>,
    free: Vec<usize>,
    next_seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            next_seq: 0,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn push(&mut self, due: Nanos, item: T) {
        let slot = match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(item);
                i
            }
            None => {
                self.slots.push(Some(item));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((due, self.next_seq, slot)));
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Nanos, T)> {
        let Reverse((due, _, slot)) = self.heap.pop()?;
        self.free.push(slot);
        Some((due, self.slots[slot].take().expect("live slot")))
    }

    pub fn peek_due(&self) -> Option<Nanos> {
        self.heap.peek().map(|Reverse((d, _, _))| *d)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::default();
        q.push(5, "a");
        q.push(3, "b");
        q.push(5, "c");
        q.push(3, "d");
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(3, "b"), (3, "d"), (5, "a"), (5, "c")]);
        assert!(q.is_empty());
    }

    #[test]
    fn slots_are_reused() {
        let mut q = EventQueue::default();
        for i in 0..10 {
            q.push(i, i);
            assert_eq!(q.pop(), Some((i, i)));
        }
        assert_eq!(q.slots.len(), 1);
    }
}
