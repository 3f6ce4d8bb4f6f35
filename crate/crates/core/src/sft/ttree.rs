//! One-dimensional time tree held by each spatial leaf of the SFT index.
//!
//! Leaves group segments whose time ranges chain together. Inserting a range
//! that overlaps a leaf merges it into that leaf; a leaf that then holds more
//! than `capacity` entries or spans more than `max_span` seconds is split at
//! the median start time. Internal levels are rebuilt from the sorted leaves
//! after every structural change.

use crate::trajectory::{Mbr, TimeRange};

/// Spatio-temporal envelope of an indexed segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub tr: TimeRange,
    pub mbr: Mbr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TLeaf {
    pub tr: TimeRange,
    pub mbr: Mbr,
    /// Indices into the caller's segment arena.
    pub entries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TTreeNode {
    Leaf(usize),
    Internal { tr: TimeRange, mbr: Mbr, children: Vec<TTreeNode> },
}

#[derive(Debug, Clone)]
pub struct TTree {
    capacity: usize,
    max_span: i64,
    leaves: Vec<TLeaf>,
    root: Option<TTreeNode>,
}

impl TTree {
    pub fn new(capacity: usize, max_span: i64) -> Self {
        Self { capacity: capacity.max(1), max_span, leaves: Vec::new(), root: None }
    }

    pub fn leaves(&self) -> &[TLeaf] {
        &self.leaves
    }

    pub fn root(&self) -> Option<&TTreeNode> {
        self.root.as_ref()
    }

    fn too_big(&self, leaf: &TLeaf) -> bool {
        leaf.entries.len() > self.capacity || leaf.tr.span() > self.max_span
    }

    pub fn insert(&mut self, idx: usize, env: Envelope, arena: &[Envelope]) {
        let hit = self.leaves.iter().position(|l| l.tr.intersects(&env.tr));
        let Some(pos) = hit else {
            let leaf = TLeaf { tr: env.tr, mbr: env.mbr, entries: vec![idx] };
            let at = self.leaves.partition_point(|l| (l.tr.start, l.tr.end) <= (env.tr.start, env.tr.end));
            self.leaves.insert(at, leaf);
            self.rebuild();
            return;
        };
        let mut leaf = self.leaves.remove(pos);
        leaf.entries.push(idx);
        leaf.tr = leaf.tr.union(&env.tr);
        leaf.mbr = leaf.mbr.union(&env.mbr);

        // Absorb other leaves the grown range now overlaps, while limits allow.
        loop {
            let next = self.leaves.iter().position(|l| {
                l.tr.intersects(&leaf.tr)
                    && leaf.entries.len() + l.entries.len() <= self.capacity
                    && leaf.tr.union(&l.tr).span() <= self.max_span
            });
            let Some(j) = next else { break };
            let other = self.leaves.remove(j);
            leaf.entries.extend(other.entries);
            leaf.tr = leaf.tr.union(&other.tr);
            leaf.mbr = leaf.mbr.union(&other.mbr);
        }

        let parts = if self.too_big(&leaf) { self.split(leaf, arena) } else { vec![leaf] };
        for part in parts {
            let at = self.leaves.partition_point(|l| (l.tr.start, l.tr.end) <= (part.tr.start, part.tr.end));
            self.leaves.insert(at, part);
        }
        self.rebuild();
    }

    fn split(&self, mut leaf: TLeaf, arena: &[Envelope]) -> Vec<TLeaf> {
        if leaf.entries.len() < 2 || !self.too_big(&leaf) {
            return vec![leaf];
        }
        leaf.entries.sort_by_key(|&i| (arena[i].tr.start, arena[i].tr.end, i));
        let right = leaf.entries.split_off(leaf.entries.len() / 2);
        let mut out = self.split(make_leaf(leaf.entries, arena), arena);
        out.extend(self.split(make_leaf(right, arena), arena));
        out
    }

    fn rebuild(&mut self) {
        if self.leaves.is_empty() {
            self.root = None;
            return;
        }
        let mut level: Vec<TTreeNode> = (0..self.leaves.len()).map(TTreeNode::Leaf).collect();
        while level.len() > 1 {
            level = level
                .chunks(self.capacity.max(2))
                .map(|chunk| {
                    let (tr, mbr) = chunk
                        .iter()
                        .map(|n| self.envelope(n))
                        .reduce(|(t1, m1), (t2, m2)| (t1.union(&t2), m1.union(&m2)))
                        .expect("non-empty chunk");
                    TTreeNode::Internal { tr, mbr, children: chunk.to_vec() }
                })
                .collect();
        }
        self.root = level.pop();
    }

    pub fn envelope(&self, node: &TTreeNode) -> (TimeRange, Mbr) {
        match node {
            TTreeNode::Leaf(i) => (self.leaves[*i].tr, self.leaves[*i].mbr),
            TTreeNode::Internal { tr, mbr, .. } => (*tr, *mbr),
        }
    }

    /// Leaves in depth-first order from the root.
    pub fn leaves_dfs(&self) -> Vec<&TLeaf> {
        fn walk<'a>(t: &'a TTree, n: &TTreeNode, out: &mut Vec<&'a TLeaf>) {
            match n {
                TTreeNode::Leaf(i) => out.push(&t.leaves[*i]),
                TTreeNode::Internal { children, .. } => children.iter().for_each(|c| walk(t, c, out)),
            }
        }
        let mut out = Vec::with_capacity(self.leaves.len());
        if let Some(root) = &self.root {
            walk(self, root, &mut out);
        }
        out
    }
}

fn make_leaf(entries: Vec<usize>, arena: &[Envelope]) -> TLeaf {
    let (tr, mbr) = entries
        .iter()
        .map(|&i| (arena[i].tr, arena[i].mbr))
        .reduce(|(t1, m1), (t2, m2)| (t1.union(&t2), m1.union(&m2)))
        .expect("non-empty leaf");
    TLeaf { tr, mbr, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn env(st: i64, et: i64) -> Envelope {
        Envelope { tr: TimeRange { start: st, end: et }, mbr: Mbr::point(st as f64 * 1e-6, 0.0) }
    }

    fn build(arena: &[Envelope], cap: usize, span: i64) -> TTree {
        let mut t = TTree::new(cap, span);
        for (i, e) in arena.iter().enumerate() {
            t.insert(i, *e, arena);
        }
        t
    }

    #[test]
    fn one_entry_one_leaf() {
        let arena = [env(0, 10)];
        let t = build(&arena, 4, 100);
        assert_eq!(t.leaves().len(), 1);
        assert_eq!(t.leaves_dfs().len(), 1);
    }

    #[test]
    fn overlapping_ranges_merge() {
        let arena = [env(0, 10), env(5, 20), env(30, 40)];
        let t = build(&arena, 8, 1000);
        assert_eq!(t.leaves().len(), 2);
        assert_eq!(t.leaves()[0].tr, TimeRange { start: 0, end: 20 });
    }

    #[test]
    fn overlapping_but_too_long_stay_apart() {
        let arena = [env(0, 60), env(50, 120)];
        let t = build(&arena, 8, 100);
        assert_eq!(t.leaves().len(), 2);
        assert!(t.leaves()[0].tr.intersects(&t.leaves()[1].tr));
    }

    #[test]
    fn capacity_splits_at_median() {
        let arena: Vec<Envelope> = (0..9).map(|i| env(i * 5, i * 5 + 10)).collect();
        let t = build(&arena, 4, 10_000);
        for l in t.leaves() {
            assert!(l.entries.len() <= 4);
        }
        assert!(t.leaves().len() >= 3);
    }

    #[test]
    fn random_inserts_cover_everything_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..200);
            let arena: Vec<Envelope> = (0..n)
                .map(|_| {
                    let st = rng.gen_range(0..10_000);
                    env(st, st + rng.gen_range(0..300))
                })
                .collect();
            let cap = rng.gen_range(1..10);
            let t = build(&arena, cap, 400);
            let mut seen = vec![0usize; n];
            for l in t.leaves_dfs() {
                assert!(l.entries.len() <= cap || l.tr.span() <= 400);
                assert!(l.entries.len() <= cap || l.entries.len() == 1);
                for &i in &l.entries {
                    seen[i] += 1;
                    assert!(l.tr.start <= arena[i].tr.start && arena[i].tr.end <= l.tr.end);
                    assert!(l.mbr.contains(&arena[i].mbr));
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            // internal envelopes cover their subtrees
            fn check(t: &TTree, n: &TTreeNode) -> (TimeRange, Mbr) {
                let (tr, mbr) = t.envelope(n);
                if let TTreeNode::Internal { children, .. } = n {
                    for c in children {
                        let (ctr, cm) = check(t, c);
                        assert!(tr.start <= ctr.start && ctr.end <= tr.end && mbr.contains(&cm));
                    }
                }
                (tr, mbr)
            }
            check(&t, t.root().unwrap());
        }
    }
}
