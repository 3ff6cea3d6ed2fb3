//! Crawl frontier: a max-priority queue by score, FIFO among equal scores.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierItem {
    pub url: String,
    pub depth: u32,
    pub score: f64,
    pub discovered_from: Option<String>,
}

struct Entry {
    seq: u64,
    item: FrontierItem,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.item
            .score
            .total_cmp(&other.item.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub struct Frontier {
    heap: BinaryHeap<Entry>,
    known: HashSet<String>,
    next_seq: u64,
    max_depth: u32,
}

impl Frontier {
    pub fn new(max_depth: u32) -> Self {
        Frontier {
            heap: BinaryHeap::new(),
            known: HashSet::new(),
            next_seq: 0,
            max_depth,
        }
    }

    /// Enqueue unless too deep or already known; returns whether it was added.
    pub fn push(&mut self, item: FrontierItem) -> bool {
        if item.depth > self.max_depth || !self.known.insert(item.url.clone()) {
            return false;
        }
        self.heap.push(Entry {
            seq: self.next_seq,
            item,
        });
        self.next_seq += 1;
        true
    }

    pub fn pop(&mut self) -> Option<FrontierItem> {
        self.heap.pop().map(|e| e.item)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Queued items in pop order, without consuming the frontier.
    pub fn ordered(&self) -> Vec<FrontierItem> {
        let mut entries: Vec<&Entry> = self.heap.iter().collect();
        entries.sort_by(|a, b| b.cmp(a));
        entries.into_iter().map(|e| e.item.clone()).collect()
    }
}
