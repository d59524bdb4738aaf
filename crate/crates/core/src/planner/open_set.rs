use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Open-set entry. Priority: lower `f`, then higher `g` (deeper nodes first),
/// then earlier insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenEntry {
    pub f: u32,
    pub g: u32,
    pub seq: u64,
    pub node: u32,
}

impl OpenEntry {
    fn key(&self) -> (u32, std::cmp::Reverse<u32>, u64) {
        (self.f, std::cmp::Reverse(self.g), self.seq)
    }

    /// True when `self` should be expanded before `other`.
    pub fn precedes(&self, other: &OpenEntry) -> bool {
        self.key() < other.key()
    }
}

impl Ord for OpenEntry {
    // Reversed so that `BinaryHeap` (a max-heap) yields the best entry first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub trait OpenSet {
    fn push(&mut self, entry: OpenEntry);
    fn pop_min(&mut self) -> Option<OpenEntry>;
    /// Records a cheaper entry for a node that is already open.
    fn replace(&mut self, entry: OpenEntry);
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Binary heap with lazy deletion: `replace` pushes a duplicate and the
/// search skips the stale one when it surfaces.
#[derive(Debug, Default)]
pub struct HeapOpenSet {
    heap: BinaryHeap<OpenEntry>,
}

impl OpenSet for HeapOpenSet {
    fn push(&mut self, entry: OpenEntry) {
        self.heap.push(entry);
    }

    fn pop_min(&mut self) -> Option<OpenEntry> {
        self.heap.pop()
    }

    fn replace(&mut self, entry: OpenEntry) {
        self.heap.push(entry);
    }

    fn len(&self) -> usize {
        self.heap.len()
    }
}

/// Unordered list; `pop_min` and `replace` scan every entry.
#[derive(Debug, Default)]
pub struct ListOpenSet {
    items: Vec<OpenEntry>,
}

impl OpenSet for ListOpenSet {
    fn push(&mut self, entry: OpenEntry) {
        self.items.push(entry);
    }

    fn pop_min(&mut self) -> Option<OpenEntry> {
        let mut best = 0;
        for (i, e) in self.items.iter().enumerate().skip(1) {
            if e.precedes(&self.items[best]) {
                best = i;
            }
        }
        (!self.items.is_empty()).then(|| self.items.swap_remove(best))
    }

    fn replace(&mut self, entry: OpenEntry) {
        match self.items.iter().position(|e| e.node == entry.node) {
            Some(i) => self.items[i] = entry,
            None => self.items.push(entry),
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    enum Op {
        Push(u32, u32),
        Pop,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..20u32, 0..20u32).prop_map(|(f, g)| Op::Push(f, g)),
            Just(Op::Pop),
        ]
    }

    #[test]
    fn ties_prefer_deeper_then_older() {
        let mut heap = HeapOpenSet::default();
        let a = OpenEntry { f: 5, g: 1, seq: 0, node: 0 };
        let b = OpenEntry { f: 5, g: 3, seq: 1, node: 1 };
        let c = OpenEntry { f: 5, g: 3, seq: 2, node: 2 };
        let d = OpenEntry { f: 4, g: 0, seq: 3, node: 3 };
        for e in [a, b, c, d] {
            heap.push(e);
        }
        let order: Vec<u32> = std::iter::from_fn(|| heap.pop_min()).map(|e| e.node).collect();
        assert_eq!(order, vec![3, 1, 2, 0]);
    }

    #[test]
    fn list_replace_removes_old_entry() {
        let mut list = ListOpenSet::default();
        list.push(OpenEntry { f: 9, g: 9, seq: 0, node: 7 });
        list.push(OpenEntry { f: 5, g: 1, seq: 1, node: 8 });
        list.replace(OpenEntry { f: 3, g: 2, seq: 2, node: 7 });
        assert_eq!(list.len(), 2);
        assert_eq!(list.pop_min().unwrap().f, 3);
        assert_eq!(list.pop_min().unwrap().node, 8);
        assert!(list.pop_min().is_none());
    }

    proptest! {
        /// Both open sets pop exactly what a sorted-vector oracle would.
        #[test]
        fn pops_match_sorted_oracle(ops in prop::collection::vec(op(), 1..200)) {
            let mut heap = HeapOpenSet::default();
            let mut list = ListOpenSet::default();
            let mut oracle: Vec<OpenEntry> = Vec::new();
            for (seq, op) in ops.into_iter().enumerate() {
                match op {
                    Op::Push(f, g) => {
                        let e = OpenEntry { f, g, seq: seq as u64, node: seq as u32 };
                        heap.push(e);
                        list.push(e);
                        oracle.push(e);
                    }
                    Op::Pop => {
                        oracle.sort_by_key(|e| (e.f, u32::MAX - e.g, e.seq));
                        let expected = (!oracle.is_empty()).then(|| oracle.remove(0));
                        prop_assert_eq!(heap.pop_min(), expected);
                        prop_assert_eq!(list.pop_min(), expected);
                    }
                }
                prop_assert_eq!(heap.len(), oracle.len());
                prop_assert_eq!(list.len(), oracle.len());
            }
        }
    }
}
