//! Incremental maximiser of the cumulative hindsight objective
//! `G(p) = sum_i (b_i - s_i) 1{s_i <= p <= b_i}` over observed valuations.
//!
//! A treap keyed by candidate price stores `G` at every candidate with lazy
//! range additions and a subtree maximum (ties resolved to the smallest
//! key). Adding a round costs `O(log n)` expected.

use std::cmp::Ordering;

use crate::trade::{PricePoint, SurplusSum, ValuationPair};

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node<V> {
    key: V,
    val: SurplusSum,
    lazy: SurplusSum,
    best: SurplusSum,
    best_node: u32,
    /// Total surplus of trading rounds whose buyer valuation equals `key`.
    end_weight: SurplusSum,
    prio: u64,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct HindsightObjective<V> {
    nodes: Vec<Node<V>>,
    root: u32,
    prio_state: u64,
    rounds: usize,
}

impl<V: PricePoint> Default for HindsightObjective<V> {
    fn default() -> Self {
        Self::new()
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<V: PricePoint> HindsightObjective<V> {
    pub fn new() -> Self {
        HindsightObjective {
            nodes: Vec::new(),
            root: NIL,
            prio_state: 0x5EED,
            rounds: 0,
        }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.root = NIL;
        self.prio_state = 0x5EED;
        self.rounds = 0;
    }

    /// Number of rounds absorbed.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Number of distinct candidate prices.
    pub fn candidates(&self) -> usize {
        self.nodes.len()
    }

    /// Smallest candidate maximising `G`, with its value.
    pub fn argmax(&self) -> Option<(&V, SurplusSum)> {
        (self.root != NIL).then(|| {
            let r = &self.nodes[self.root as usize];
            (&self.nodes[r.best_node as usize].key, r.best)
        })
    }

    /// Absorb one round.
    pub fn add(&mut self, pair: &ValuationPair<V>) {
        self.rounds += 1;
        self.insert_key(&pair.s);
        self.insert_key(&pair.b);
        if pair.s.order(&pair.b) == Ordering::Less {
            let w = SurplusSum::of(pair.spread());
            if w == SurplusSum::ZERO {
                return;
            }
            let (lo, rest) = self.split(self.root, &pair.s, false);
            let (mid, hi) = self.split(rest, &pair.b, true);
            self.apply(mid, w);
            let merged = self.merge(mid, hi);
            self.root = self.merge(lo, merged);
            let end = self.find(&pair.b).expect("buyer valuation was inserted");
            self.nodes[end as usize].end_weight += w;
        }
    }

    /// `G` at every candidate, in increasing key order (test and debug aid).
    pub fn values(&mut self) -> Vec<(V, SurplusSum)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        self.collect(self.root, &mut out);
        out
    }

    fn collect(&mut self, n: u32, out: &mut Vec<(V, SurplusSum)>) {
        if n == NIL {
            return;
        }
        self.push(n);
        let (l, r) = (self.nodes[n as usize].left, self.nodes[n as usize].right);
        self.collect(l, out);
        let node = &self.nodes[n as usize];
        out.push((node.key.clone(), node.val));
        self.collect(r, out);
    }

    fn find(&mut self, key: &V) -> Option<u32> {
        let mut n = self.root;
        while n != NIL {
            self.push(n);
            let node = &self.nodes[n as usize];
            n = match key.order(&node.key) {
                Ordering::Equal => return Some(n),
                Ordering::Less => node.left,
                Ordering::Greater => node.right,
            };
        }
        None
    }

    fn insert_key(&mut self, key: &V) {
        // Locate the key or its predecessor, pushing pending additions so the
        // predecessor's value is current.
        let mut n = self.root;
        let mut pred = NIL;
        while n != NIL {
            self.push(n);
            let node = &self.nodes[n as usize];
            n = match key.order(&node.key) {
                Ordering::Equal => return,
                Ordering::Less => node.left,
                Ordering::Greater => {
                    pred = n;
                    node.right
                }
            };
        }
        // Between pred and its successor, G drops only by the rounds whose
        // buyer valuation is exactly pred.
        let val = if pred == NIL {
            SurplusSum::ZERO
        } else {
            let p = &self.nodes[pred as usize];
            p.val - p.end_weight
        };
        let id = self.nodes.len() as u32;
        let prio = splitmix(&mut self.prio_state);
        self.nodes.push(Node {
            key: key.clone(),
            val,
            lazy: SurplusSum::ZERO,
            best: val,
            best_node: id,
            end_weight: SurplusSum::ZERO,
            prio,
            left: NIL,
            right: NIL,
        });
        let (lo, hi) = self.split(self.root, key, false);
        let merged = self.merge(lo, id);
        self.root = self.merge(merged, hi);
    }

    fn apply(&mut self, n: u32, add: SurplusSum) {
        if n == NIL {
            return;
        }
        let node = &mut self.nodes[n as usize];
        node.val += add;
        node.best += add;
        node.lazy += add;
    }

    fn push(&mut self, n: u32) {
        let node = &mut self.nodes[n as usize];
        let lazy = node.lazy;
        if lazy != SurplusSum::ZERO {
            node.lazy = SurplusSum::ZERO;
            let (l, r) = (node.left, node.right);
            self.apply(l, lazy);
            self.apply(r, lazy);
        }
    }

    fn pull(&mut self, n: u32) {
        let (l, r) = {
            let node = &self.nodes[n as usize];
            (node.left, node.right)
        };
        // Candidates in key order: left subtree, node, right subtree. Strict
        // improvements only, so the smallest key wins ties.
        let mut best = (self.nodes[n as usize].val, n);
        if l != NIL {
            let left = &self.nodes[l as usize];
            if left.best >= best.0 {
                best = (left.best, left.best_node);
            }
        }
        if r != NIL {
            let right = &self.nodes[r as usize];
            if right.best > best.0 {
                best = (right.best, right.best_node);
            }
        }
        let node = &mut self.nodes[n as usize];
        node.best = best.0;
        node.best_node = best.1;
    }

    /// Split into keys `< key` (or `<= key` when `inclusive`) and the rest.
    fn split(&mut self, n: u32, key: &V, inclusive: bool) -> (u32, u32) {
        if n == NIL {
            return (NIL, NIL);
        }
        self.push(n);
        let ord = self.nodes[n as usize].key.order(key);
        let goes_left = ord == Ordering::Less || (inclusive && ord == Ordering::Equal);
        if goes_left {
            let r = self.nodes[n as usize].right;
            let (a, b) = self.split(r, key, inclusive);
            self.nodes[n as usize].right = a;
            self.pull(n);
            (n, b)
        } else {
            let l = self.nodes[n as usize].left;
            let (a, b) = self.split(l, key, inclusive);
            self.nodes[n as usize].left = b;
            self.pull(n);
            (a, n)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            self.push(a);
            let r = self.nodes[a as usize].right;
            let m = self.merge(r, b);
            self.nodes[a as usize].right = m;
            self.pull(a);
            a
        } else {
            self.push(b);
            let l = self.nodes[b as usize].left;
            let m = self.merge(a, l);
            self.nodes[b as usize].left = m;
            self.pull(b);
            b
        }
    }
}
