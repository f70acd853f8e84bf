use serde::{Deserialize, Serialize};

use crate::datamodel::{Itemset, TransactionDatabase};

use super::{CodeTable, KrimpError};

/// Disjoint code-table itemsets whose union is the covered transaction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverResult {
    pub parts: Vec<Itemset>,
}

impl CoverResult {
    pub fn union(&self) -> Itemset {
        self.parts.iter().flat_map(Itemset::iter).collect()
    }
}

/// Greedy cover: walk the table in cover order and take every entry that
/// fits in what is still uncovered.
pub fn cover(t: &Itemset, ct: &CodeTable) -> Result<CoverResult, KrimpError> {
    let parts = cover_indices(t, ct)?.into_iter().map(|p| ct.entries()[p].itemset.clone()).collect();
    Ok(CoverResult { parts })
}

pub(crate) fn cover_indices(t: &Itemset, ct: &CodeTable) -> Result<Vec<usize>, KrimpError> {
    if let Some(bad) = t.iter().find(|&i| !ct.has_item(i)) {
        return Err(KrimpError::UnknownItem(bad));
    }
    let mut remainder = t.clone();
    let mut out = Vec::new();
    for (p, e) in ct.entries().iter().enumerate() {
        if remainder.is_empty() {
            break;
        }
        if e.itemset.len() <= remainder.len() && e.itemset.is_subset_of(&remainder) {
            remainder = remainder.difference(&e.itemset);
            out.push(p);
        }
    }
    Ok(out)
}

/// Covers of every transaction, in tid order.
pub fn cover_database(db: &TransactionDatabase, ct: &CodeTable) -> Result<Vec<CoverResult>, KrimpError> {
    db.transactions().iter().map(|t| cover(t, ct)).collect()
}
