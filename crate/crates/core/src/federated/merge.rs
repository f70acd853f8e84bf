use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Itemset, TransactionDatabase};
use crate::krimp::CodeTable;

use super::CandidateCount;

/// One attempted removal of a subset in favor of a superset code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub removed: Itemset,
    pub parent: Itemset,
    pub ratio: f64,
    pub size_before: f64,
    pub size_after: f64,
    pub accepted: bool,
}

/// The single merged code table answering queries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub code_table: CodeTable,
    pub sources: Vec<String>,
    pub audit: Vec<MergeRecord>,
    /// Encoded size of the concatenated input before any merge.
    pub baseline_bits: f64,
    pub final_bits: f64,
}

/// Builds one code table from `itemsets` and removes subset codes that a
/// frequent enough superset can stand in for.
///
/// The starting table holds every input itemset in cover order plus all
/// singletons. Non-singleton entries are visited shortest first; entry `X`
/// is a merge candidate when some superset `Y` still in the table has
/// `count(Y) / count(X) ≥ theta`. The parent is the superset with the
/// shortest code (highest usage), then largest count, then lexicographic.
/// Removing `X` re-routes its covers; the removal is kept only if the
/// encoded size of `db` does not grow.
pub fn pruning_merging(
    itemsets: &[CandidateCount],
    db: &TransactionDatabase,
    theta: f64,
    sources: Vec<String>,
) -> GlobalModel {
    let counts: BTreeMap<Itemset, usize> = itemsets.iter().map(|c| (c.itemset.clone(), c.count)).collect();
    merge_counts(counts, db, theta, sources)
}

/// Concatenates several code tables (e.g. one per fragment) and merges them
/// as one collection. An itemset present in more than one table keeps its
/// largest support.
pub fn pruning_merging_tables(tables: &[CodeTable], db: &TransactionDatabase, theta: f64) -> GlobalModel {
    let mut counts: BTreeMap<Itemset, usize> = BTreeMap::new();
    for e in tables.iter().flat_map(|t| t.patterns()) {
        let c = counts.entry(e.itemset.clone()).or_default();
        *c = (*c).max(e.support);
    }
    let sources = tables.iter().map(|t| t.provenance.clone()).collect();
    merge_counts(counts, db, theta, sources)
}

fn merge_counts(
    counts: BTreeMap<Itemset, usize>,
    db: &TransactionDatabase,
    theta: f64,
    sources: Vec<String>,
) -> GlobalModel {
    let patterns = counts.iter().filter(|(x, _)| x.len() >= 2).map(|(x, &c)| (x.clone(), c));
    let mut ct = CodeTable::with_patterns(db, patterns, sources.join("+"));
    let baseline_bits = ct.encoded_size().total();
    let mut current = baseline_bits;

    let mut order: Vec<Itemset> = ct.patterns().iter().map(|e| e.itemset.clone()).collect();
    order.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));

    let mut audit = Vec::new();
    for x in order {
        let Some(entry) = ct.get(&x) else { continue };
        let count_x = entry.support.max(1) as f64;
        let parent = ct
            .patterns()
            .iter()
            .filter(|y| x.is_proper_subset_of(&y.itemset) && y.support as f64 / count_x >= theta)
            .max_by(|a, b| a.usage.cmp(&b.usage).then(a.support.cmp(&b.support)).then(b.itemset.cmp(&a.itemset)));
        let Some(parent) = parent else { continue };
        let (parent_set, ratio) = (parent.itemset.clone(), parent.support as f64 / count_x);

        let mut trial = ct.clone();
        trial.remove_pattern(&x);
        trial.recompute_usage(db);
        let size = trial.encoded_size().total();
        let accepted = size <= current;
        audit.push(MergeRecord {
            removed: x,
            parent: parent_set,
            ratio,
            size_before: current,
            size_after: size,
            accepted,
        });
        if accepted {
            ct = trial;
            current = size;
        }
    }
    GlobalModel { code_table: ct, sources, audit, baseline_bits, final_bits: current }
}
