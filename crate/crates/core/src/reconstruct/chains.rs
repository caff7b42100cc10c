//! Concatenation of fragments at equal signatures and bounded enumeration of
//! fragment chains.

use std::collections::BTreeMap;

use crate::ir::Event;
use crate::monitor::{Fragment, FragmentMeta, FragmentSet, SignatureVector};

pub const DEFAULT_MAX_CHAIN_LENGTH: usize = 8;
pub const DEFAULT_MAX_OUTPUTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainBounds {
    pub max_chain_length: usize,
    pub max_outputs: usize,
}

impl Default for ChainBounds {
    fn default() -> Self {
        ChainBounds {
            max_chain_length: DEFAULT_MAX_CHAIN_LENGTH,
            max_outputs: DEFAULT_MAX_OUTPUTS,
        }
    }
}

/// True when `b` may follow `a`: the signatures are exactly equal, with `U`
/// matching only `U`.
pub fn can_concat(a: &Fragment, b: &Fragment) -> bool {
    a.end == b.start
}

/// Joins two fragments, or returns `None` if their signatures differ. The
/// result is synthetic, so it carries no trace indices.
pub fn concatenate(a: &Fragment, b: &Fragment) -> Option<Fragment> {
    if !can_concat(a, b) {
        return None;
    }
    let mut events = a.events.clone();
    events.extend(b.events.iter().cloned());
    Some(Fragment {
        start: a.start.clone(),
        events,
        end: b.end.clone(),
        meta: FragmentMeta {
            run: a.meta.run,
            inst: a.meta.inst.clone(),
            start_index: None,
            end_index: None,
        },
    })
}

/// A chain of fragments joined at equal signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconstructedTrace {
    /// Fragment ids (positions in the source set), in chain order.
    pub chain: Vec<usize>,
    pub events: Vec<Event>,
    pub start: SignatureVector,
    pub end: SignatureVector,
    /// The signature at each junction; `junctions[i]` joins `chain[i]` and
    /// `chain[i + 1]`.
    pub junctions: Vec<SignatureVector>,
}

impl ReconstructedTrace {
    fn from_chain(set: &FragmentSet, chain: Vec<usize>) -> Self {
        let frags: Vec<&Fragment> = chain.iter().map(|&i| &set.fragments[i]).collect();
        let junctions = frags[1..].iter().map(|f| f.start.clone()).collect();
        ReconstructedTrace {
            events: frags
                .iter()
                .flat_map(|f| f.events.iter().cloned())
                .collect(),
            start: frags[0].start.clone(),
            end: frags[frags.len() - 1].end.clone(),
            junctions,
            chain,
        }
    }

    pub fn is_multi_fragment(&self) -> bool {
        self.chain.len() > 1
    }
}

/// The fragment digraph: an arc `a -> b` whenever `can_concat(a, b)`.
struct Graph {
    succ: Vec<Vec<usize>>,
    has_pred: Vec<bool>,
}

impl Graph {
    fn new(set: &FragmentSet) -> Self {
        let mut by_start: BTreeMap<&SignatureVector, Vec<usize>> = BTreeMap::new();
        for (i, f) in set.fragments.iter().enumerate() {
            by_start.entry(&f.start).or_default().push(i);
        }
        let succ: Vec<Vec<usize>> = set
            .fragments
            .iter()
            .map(|f| by_start.get(&f.end).cloned().unwrap_or_default())
            .collect();
        let mut has_pred = vec![false; set.len()];
        for s in &succ {
            for &b in s {
                has_pred[b] = true;
            }
        }
        Graph { succ, has_pred }
    }

    /// `table[k][v]`: some chain of exactly `k + 1` fragments starts at `v`
    /// (and, with `to_sink`, ends at a fragment without successors).
    fn reach(&self, max: usize, to_sink: bool) -> Vec<Vec<bool>> {
        let n = self.succ.len();
        let mut table = vec![vec![false; n]; max];
        for (slot, succ) in table[0].iter_mut().zip(&self.succ) {
            *slot = !to_sink || succ.is_empty();
        }
        for k in 1..max {
            for v in 0..n {
                table[k][v] = self.succ[v].iter().any(|&w| table[k - 1][w]);
            }
        }
        table
    }
}

/// Enumerates chains of up to `max_chain_length` fragments. Fragments may
/// repeat, so signature cycles produce chains up to the bound. Maximal
/// chains (those that cannot be extended at either end within the bound)
/// come first, then the rest; within each group longer chains come first
/// and ties are broken lexicographically by fragment id sequence. At most
/// `max_outputs` chains are returned. Trace indices are never consulted.
pub fn reconstruct(set: &FragmentSet, bounds: &ChainBounds) -> Vec<ReconstructedTrace> {
    let max = bounds.max_chain_length;
    if set.is_empty() || max == 0 || bounds.max_outputs == 0 {
        return Vec::new();
    }
    let g = Graph::new(set);
    let any = g.reach(max, false);
    let sink = g.reach(max, true);
    let mut out = Vec::new();
    let emit = |chain: Vec<usize>, out: &mut Vec<Vec<usize>>| {
        out.push(chain);
        out.len() >= bounds.max_outputs
    };

    // Maximal chains: full length, or from a source to a sink.
    'maximal: for len in (1..=max).rev() {
        let full = len == max;
        let table = if full { &any } else { &sink };
        for v in 0..set.len() {
            if (full || !g.has_pred[v])
                && table[len - 1][v]
                && walk(&g, table, v, len, &mut |c| emit(c, &mut out))
            {
                break 'maximal;
            }
        }
    }
    if out.len() < bounds.max_outputs {
        for len in (1..max).rev() {
            let mut done = false;
            for v in 0..set.len() {
                if !any[len - 1][v] {
                    continue;
                }
                done = walk(&g, &any, v, len, &mut |c| {
                    let maximal = !g.has_pred[c[0]] && g.succ[c[c.len() - 1]].is_empty();
                    !maximal && emit(c, &mut out)
                });
                if done {
                    break;
                }
            }
            if done {
                break;
            }
        }
    }
    out.into_iter()
        .map(|c| ReconstructedTrace::from_chain(set, c))
        .collect()
}

/// Visits every chain of exactly `len` fragments starting at `start` whose
/// continuation is allowed by `table`, in lexicographic order. Stops early
/// when `visit` returns true, and then returns true.
fn walk(
    g: &Graph,
    table: &[Vec<bool>],
    start: usize,
    len: usize,
    visit: &mut dyn FnMut(Vec<usize>) -> bool,
) -> bool {
    fn go(
        g: &Graph,
        table: &[Vec<bool>],
        chain: &mut Vec<usize>,
        len: usize,
        visit: &mut dyn FnMut(Vec<usize>) -> bool,
    ) -> bool {
        if chain.len() == len {
            return visit(chain.clone());
        }
        let last = chain[chain.len() - 1];
        let left = len - chain.len();
        for &w in &g.succ[last] {
            if table[left - 1][w] {
                chain.push(w);
                let stop = go(g, table, chain, len, visit);
                chain.pop();
                if stop {
                    return true;
                }
            }
        }
        false
    }
    go(g, table, &mut vec![start], len, visit)
}
