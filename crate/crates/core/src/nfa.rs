//! NFAs over an alphabet of symbols, with optional ε-labels (written `1`).
//! Used for rational constraints (through Boolean matrix monoids) and for
//! Benois saturation over free products.

use crate::alphabet::{SymbolId, Word};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Transitions are (state, label, state); `None` is the ε/1 label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterNfa {
    pub states: usize,
    pub initial: BTreeSet<u32>,
    pub final_: BTreeSet<u32>,
    pub transitions: BTreeSet<(usize, Option<SymbolId>, usize)>,
}

impl LetterNfa {
    pub fn new(states: usize) -> Self {
        LetterNfa { states, initial: BTreeSet::new(), final_: BTreeSet::new(), transitions: BTreeSet::new() }
    }

    pub fn letters(&self) -> BTreeSet<SymbolId> {
        self.transitions.iter().filter_map(|&(_, l, _)| l).collect()
    }

    pub fn eps_closure(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = set.clone();
        let mut queue: VecDeque<usize> = set.iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            for &(s, l, t) in &self.transitions {
                if s == p && l.is_none() && out.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        out
    }

    pub fn step(&self, set: &BTreeSet<usize>, a: SymbolId) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &p in set {
            for &(s, l, t) in &self.transitions {
                if s == p && l == Some(a) {
                    out.insert(t);
                }
            }
        }
        self.eps_closure(&out)
    }

    pub fn accepts(&self, w: &[SymbolId]) -> bool {
        let mut cur = self.eps_closure(&self.initial.iter().map(|&x| x as usize).collect());
        for &a in w {
            cur = self.step(&cur, a);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|&q| self.final_.contains(&(q as u32)))
    }

    /// Standard ε-elimination; the result has only letter transitions.
    pub fn eliminate_epsilon(&self) -> LetterNfa {
        let mut out = LetterNfa::new(self.states);
        out.final_ = self.final_.clone();
        for i in self.initial.iter() {
            let cl = self.eps_closure(&BTreeSet::from([*i as usize]));
            if cl.iter().any(|&q| self.final_.contains(&(q as u32))) {
                out.final_.insert(*i);
            }
            out.initial.insert(*i);
        }
        for p in 0..self.states {
            let cl = self.eps_closure(&BTreeSet::from([p]));
            for &q in &cl {
                for &(s, l, t) in &self.transitions {
                    if s == q {
                        if let Some(a) = l {
                            let tcl = self.eps_closure(&BTreeSet::from([t]));
                            for &t2 in &tcl {
                                out.transitions.insert((p, Some(a), t2));
                            }
                        }
                    }
                }
            }
            if cl.iter().any(|&q| self.final_.contains(&(q as u32))) && !self.final_.contains(&(p as u32)) {
                // p can reach a final state by ε alone
                out.final_.insert(p as u32);
            }
        }
        out
    }

    /// Product construction: L(a) ∩ L(b). Both should be ε-free.
    pub fn intersect(&self, other: &LetterNfa) -> LetterNfa {
        let a = self.eliminate_epsilon();
        let b = other.eliminate_epsilon();
        let n = a.states * b.states;
        let idx = |p: usize, q: usize| p * b.states + q;
        let mut out = LetterNfa::new(n);
        for &p in &a.initial {
            for &q in &b.initial {
                out.initial.insert(idx(p as usize, q as usize) as u32);
            }
        }
        for &p in &a.final_ {
            for &q in &b.final_ {
                out.final_.insert(idx(p as usize, q as usize) as u32);
            }
        }
        for &(p1, l1, q1) in &a.transitions {
            for &(p2, l2, q2) in &b.transitions {
                if l1 == l2 {
                    out.transitions.insert((idx(p1, p2), l1, idx(q1, q2)));
                }
            }
        }
        out
    }

    /// Complement over the given alphabet via subset construction.
    pub fn complement(&self, letters: &BTreeSet<SymbolId>) -> LetterNfa {
        let base = self.eliminate_epsilon();
        let start: BTreeSet<usize> = base.initial.iter().map(|&x| x as usize).collect();
        let mut states: Vec<BTreeSet<usize>> = vec![start.clone()];
        let mut index: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
        index.insert(start, 0);
        let mut trans: Vec<(usize, SymbolId, usize)> = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let cur = states[i].clone();
            for &a in letters {
                let mut next = BTreeSet::new();
                for &p in &cur {
                    for &(s, l, t) in &base.transitions {
                        if s == p && l == Some(a) {
                            next.insert(t);
                        }
                    }
                }
                let j = *index.entry(next.clone()).or_insert_with(|| {
                    states.push(next.clone());
                    states.len() - 1
                });
                trans.push((i, a, j));
            }
            i += 1;
        }
        let mut out = LetterNfa::new(states.len());
        out.initial.insert(0);
        for (i, set) in states.iter().enumerate() {
            let accepts = set.iter().any(|&q| base.final_.contains(&(q as u32)));
            if !accepts {
                out.final_.insert(i as u32);
            }
        }
        for (p, a, q) in trans {
            out.transitions.insert((p, Some(a), q));
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        let mut seen: BTreeSet<usize> = self.initial.iter().map(|&x| x as usize).collect();
        let mut queue: VecDeque<usize> = seen.iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            if self.final_.contains(&(p as u32)) {
                return false;
            }
            for &(s, _, t) in &self.transitions {
                if s == p && seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        self.initial.iter().all(|&p| !self.final_.contains(&p))
    }

    /// All accepted words of length ≤ `max_len` (test-sized automata only).
    pub fn enumerate(&self, letters: &BTreeSet<SymbolId>, max_len: usize) -> BTreeSet<Word> {
        let mut out = BTreeSet::new();
        let mut layer: Vec<Word> = vec![vec![]];
        for len in 0..=max_len {
            for w in &layer {
                if self.accepts(w) {
                    out.insert(w.clone());
                }
            }
            if len == max_len {
                break;
            }
            let mut next = Vec::new();
            for w in &layer {
                for &a in letters {
                    let mut w2 = w.clone();
                    w2.push(a);
                    next.push(w2);
                }
            }
            layer = next;
        }
        out
    }
}
