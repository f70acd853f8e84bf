use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::datamodel::{intersect_sorted, to_vertical, Item, Itemset, Tid, TransactionDatabase};

use super::KrimpError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub itemset: Itemset,
    pub support: usize,
}

/// Frequent itemsets in candidate order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter()
    }

    pub fn support_of(&self, x: &Itemset) -> Option<usize> {
        self.candidates.iter().find(|c| &c.itemset == x).map(|c| c.support)
    }
}

/// Support descending, then length descending, then lexicographic.
pub fn candidate_order(a: (&Itemset, usize), b: (&Itemset, usize)) -> Ordering {
    b.1.cmp(&a.1).then(b.0.len().cmp(&a.0.len())).then(a.0.cmp(b.0))
}

/// Length descending, then support descending, then lexicographic.
pub fn cover_order(a: (&Itemset, usize), b: (&Itemset, usize)) -> Ordering {
    b.0.len().cmp(&a.0.len()).then(b.1.cmp(&a.1)).then(a.0.cmp(b.0))
}

/// All itemsets of size ≥ 1 with support ≥ `min_count`, by depth-first
/// tidset intersection.
pub fn mine_candidates(db: &TransactionDatabase, min_count: usize) -> Result<CandidateSet, KrimpError> {
    if min_count == 0 {
        return Err(KrimpError::ZeroMinCount);
    }
    let vertical = to_vertical(db);
    let roots: Vec<(Item, Vec<Tid>)> =
        vertical.tidsets.into_iter().filter(|(_, tids)| tids.len() >= min_count).collect();
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    extend(&roots, min_count, &mut prefix, &mut out);
    out.sort_by(|a: &Candidate, b| candidate_order((&a.itemset, a.support), (&b.itemset, b.support)));
    Ok(CandidateSet { candidates: out })
}

fn extend(level: &[(Item, Vec<Tid>)], min_count: usize, prefix: &mut Vec<Item>, out: &mut Vec<Candidate>) {
    for (n, (item, tids)) in level.iter().enumerate() {
        prefix.push(*item);
        out.push(Candidate { itemset: Itemset::new(prefix.iter().copied()), support: tids.len() });
        let next: Vec<(Item, Vec<Tid>)> = level[n + 1..]
            .iter()
            .map(|(other, other_tids)| (*other, intersect_sorted(tids, other_tids)))
            .filter(|(_, t)| t.len() >= min_count)
            .collect();
        if !next.is_empty() {
            extend(&next, min_count, prefix, out);
        }
        prefix.pop();
    }
}
