//! Reconstruction quality measured against ground truth.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::ir::{Event, GroundTruthTrace};
use crate::reconstruct::{FeasibilityChecker, FeasibilityError, ReconstructedTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Share of multi-fragment traces the control-flow check accepts.
    pub precision: f64,
    /// Share of multi-fragment traces that occur verbatim in some
    /// ground-truth trace.
    pub exactness: f64,
    /// Share of distinct adjacent label pairs of the ground truth that occur
    /// adjacently in some reconstructed trace.
    pub coverage: f64,
    /// Mean recorded fraction per run.
    pub overhead_proxy: f64,
    pub runs: usize,
    pub faulted_runs: usize,
    pub conditions: usize,
    pub fragments: usize,
    pub reconstructed: usize,
    pub multi_fragment: usize,
    pub longest_chain: usize,
    pub signature_evaluations: usize,
    /// Share of reconstructed traces whose junction signatures match both
    /// neighbouring fragments, recomputed from the fragments.
    pub junction_audit: f64,
}

/// Every contiguous subsequence of a corpus of sequences, as a generalized
/// suffix automaton over label ids.
#[derive(Debug, Default)]
pub struct SubstringIndex {
    labels: HashMap<String, u32>,
    next: Vec<HashMap<u32, usize>>,
    link: Vec<Option<usize>>,
    len: Vec<usize>,
}

impl SubstringIndex {
    pub fn new<'a>(corpus: impl IntoIterator<Item = &'a [Event]>) -> Self {
        let mut idx = SubstringIndex {
            labels: HashMap::new(),
            next: vec![HashMap::new()],
            link: vec![None],
            len: vec![0],
        };
        for seq in corpus {
            let mut last = 0;
            for e in seq {
                let n = idx.labels.len() as u32;
                let c = *idx.labels.entry(e.label.clone()).or_insert(n);
                last = idx.extend(last, c);
            }
        }
        idx
    }

    fn new_state(&mut self, len: usize) -> usize {
        self.next.push(HashMap::new());
        self.link.push(None);
        self.len.push(len);
        self.next.len() - 1
    }

    fn clone_state(&mut self, q: usize, len: usize) -> usize {
        let c = self.new_state(len);
        self.next[c] = self.next[q].clone();
        self.link[c] = self.link[q];
        c
    }

    /// Appends `c` after state `last`; returns the new last state.
    fn extend(&mut self, last: usize, c: u32) -> usize {
        if let Some(&q) = self.next[last].get(&c) {
            if self.len[q] == self.len[last] + 1 {
                return q;
            }
            let clone = self.clone_state(q, self.len[last] + 1);
            let mut p = Some(last);
            while let Some(pp) = p {
                if self.next[pp].get(&c) != Some(&q) {
                    break;
                }
                self.next[pp].insert(c, clone);
                p = self.link[pp];
            }
            self.link[q] = Some(clone);
            return clone;
        }
        let cur = self.new_state(self.len[last] + 1);
        let mut p = Some(last);
        while let Some(pp) = p {
            if self.next[pp].contains_key(&c) {
                break;
            }
            self.next[pp].insert(c, cur);
            p = self.link[pp];
        }
        match p {
            None => self.link[cur] = Some(0),
            Some(pp) => {
                let q = self.next[pp][&c];
                if self.len[pp] + 1 == self.len[q] {
                    self.link[cur] = Some(q);
                } else {
                    let clone = self.clone_state(q, self.len[pp] + 1);
                    let mut p = Some(pp);
                    while let Some(x) = p {
                        if self.next[x].get(&c) != Some(&q) {
                            break;
                        }
                        self.next[x].insert(c, clone);
                        p = self.link[x];
                    }
                    self.link[q] = Some(clone);
                    self.link[cur] = Some(clone);
                }
            }
        }
        cur
    }

    /// True iff `events` occurs contiguously in some corpus sequence.
    pub fn contains(&self, events: &[Event]) -> bool {
        let mut s = 0;
        for e in events {
            let Some(c) = self.labels.get(&e.label) else {
                return false;
            };
            match self.next[s].get(c) {
                Some(&t) => s = t,
                None => return false,
            }
        }
        true
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn pairs(events: &[Event]) -> impl Iterator<Item = (&str, &str)> {
    events
        .windows(2)
        .map(|w| (w[0].label.as_str(), w[1].label.as_str()))
}

/// Distinct adjacent pairs of `truth` witnessed in `traces`, as a fraction.
/// An empty pair universe counts as fully covered.
pub fn coverage(truth: &[GroundTruthTrace], traces: &[ReconstructedTrace]) -> f64 {
    let universe: BTreeSet<(&str, &str)> = truth.iter().flat_map(|t| pairs(&t.events)).collect();
    let seen: BTreeSet<(&str, &str)> = traces.iter().flat_map(|t| pairs(&t.events)).collect();
    fraction(universe.intersection(&seen).count(), universe.len())
}

/// Precision over the multi-fragment traces: the share `checker` accepts.
/// Vacuously 1.0.
pub fn precision(
    checker: &mut FeasibilityChecker<'_>,
    traces: &[ReconstructedTrace],
) -> Result<f64, FeasibilityError> {
    let mut ok = 0;
    let mut total = 0;
    for t in traces.iter().filter(|t| t.is_multi_fragment()) {
        total += 1;
        if checker.feasible(&t.events)? {
            ok += 1;
        }
    }
    Ok(fraction(ok, total))
}

/// Exactness over the multi-fragment traces. Vacuously 1.0.
pub fn exactness(index: &SubstringIndex, traces: &[ReconstructedTrace]) -> f64 {
    let multi: Vec<_> = traces.iter().filter(|t| t.is_multi_fragment()).collect();
    let ok = multi.iter().filter(|t| index.contains(&t.events)).count();
    fraction(ok, multi.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> Vec<Event> {
        s.chars().map(|c| Event::new(c.to_string())).collect()
    }

    #[test]
    fn substring_index_matches_brute_force() {
        let corpus = [ev("abcab"), ev("bbca"), ev("cab")];
        let idx = SubstringIndex::new(corpus.iter().map(|v| v.as_slice()));
        let alphabet = ['a', 'b', 'c', 'd'];
        for len in 0..=5u32 {
            for code in 0..4usize.pow(len) {
                let w: String = (0..len)
                    .map(|i| alphabet[code / 4usize.pow(i) % 4])
                    .collect();
                let expected = corpus.iter().any(|s| {
                    let s: String = s.iter().map(|e| e.label.as_str()).collect();
                    s.contains(&w)
                });
                assert_eq!(idx.contains(&ev(&w)), expected, "{w}");
            }
        }
    }
}
