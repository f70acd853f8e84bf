use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Fragment, Itemset};
use crate::protocol::ProtocolTranscript;

use super::count::{count_candidate, CandidateCount, CountOutcome, Federation, ProtocolSettings};
use super::FederatedError;

/// One level of the miner: candidates `C_k` and the frequent ones `L_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelState {
    pub k: usize,
    pub candidates: Vec<Itemset>,
    pub frequent: Vec<CandidateCount>,
}

/// The mined collection `F = ⋃ L_k`: itemsets and counts only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederatedItemsets {
    pub levels: Vec<LevelState>,
}

impl FederatedItemsets {
    pub fn itemsets(&self) -> impl Iterator<Item = &CandidateCount> {
        self.levels.iter().flat_map(|l| l.frequent.iter())
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.frequent.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count_of(&self, x: &Itemset) -> Option<usize> {
        self.itemsets().find(|c| &c.itemset == x).map(|c| c.count)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub k: usize,
    pub itemset: Itemset,
    pub local: bool,
    pub count: usize,
    pub kept: bool,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.itemset.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "k={} c={} mode={} count={} kept={}",
            self.k,
            items.join(","),
            if self.local { "local" } else { "cross" },
            self.count,
            self.kept
        )
    }
}

/// Per-candidate trace and the transcripts of every cross-party count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub lines: Vec<TraceLine>,
    pub transcripts: Vec<(Itemset, ProtocolTranscript)>,
}

impl RunTrace {
    pub fn to_text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Levelwise federated mining.
///
/// `L_1` holds the frequent singletons, each counted by its owner. Level `k`
/// joins pairs of `L_{k-1}` members that share their first `k-2` items and
/// drops any join with an infrequent `(k-1)`-subset; survivors are counted
/// (in parallel, order kept) and those reaching `min_count` form `L_k`.
pub fn run_cparmdl(
    fragments: Vec<Fragment>,
    min_count: usize,
    settings: &ProtocolSettings,
) -> Result<(FederatedItemsets, RunTrace), FederatedError> {
    let federation = Federation::new(fragments)?;
    mine_federation(&federation, min_count, settings)
}

pub(crate) fn mine_federation(
    federation: &Federation,
    min_count: usize,
    settings: &ProtocolSettings,
) -> Result<(FederatedItemsets, RunTrace), FederatedError> {
    if min_count == 0 {
        return Err(FederatedError::ZeroMinCount);
    }
    let mut out = FederatedItemsets::default();
    let mut trace = RunTrace::default();
    let mut candidates: Vec<Itemset> = federation.alphabet().map(Itemset::singleton).collect();
    let mut k = 1;
    while !candidates.is_empty() {
        let outcomes = candidates
            .par_iter()
            .map(|c| count_candidate(c, federation, settings))
            .collect::<Result<Vec<CountOutcome>, _>>()?;
        let mut frequent = Vec::new();
        for o in outcomes {
            let kept = o.count.count >= min_count;
            trace.lines.push(TraceLine {
                k,
                itemset: o.count.itemset.clone(),
                local: o.count.is_local(),
                count: o.count.count,
                kept,
            });
            if let Some(t) = o.transcript {
                trace.transcripts.push((o.count.itemset.clone(), t));
            }
            if kept {
                frequent.push(o.count);
            }
        }
        let next = join_level(&frequent);
        out.levels.push(LevelState { k, candidates, frequent });
        candidates = next;
        k += 1;
    }
    Ok((out, trace))
}

/// Apriori join with subset pruning, lexicographic output.
fn join_level(frequent: &[CandidateCount]) -> Vec<Itemset> {
    let prev: BTreeSet<&Itemset> = frequent.iter().map(|c| &c.itemset).collect();
    let sorted: Vec<&Itemset> = prev.iter().copied().collect();
    let mut out = Vec::new();
    for (a_idx, a) in sorted.iter().enumerate() {
        let k1 = a.len();
        for b in &sorted[a_idx + 1..] {
            if a.items()[..k1 - 1] != b.items()[..k1 - 1] {
                // sorted order: no later b shares the prefix either
                break;
            }
            let joined = a.union(b);
            let all_subsets_frequent = joined.iter().all(|drop| {
                let sub: Itemset = joined.iter().filter(|&i| i != drop).collect();
                prev.contains(&sub)
            });
            if all_subsets_frequent {
                out.push(joined);
            }
        }
    }
    out
}
