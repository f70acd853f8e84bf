use serde::{Deserialize, Serialize};

use crate::datamodel::Itemset;
use crate::krimp::CodeTable;

use super::QueryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub count: usize,
    /// Sum of usages of code-table supersets; a guaranteed lower bound.
    pub lower_bound: usize,
    pub approximate: bool,
}

/// Support of `x` read off a code table.
///
/// An itemset stored in the table returns its tracked support. Otherwise
/// the supersets' usages give a lower bound (their covers are disjoint per
/// transaction), and the answer is the larger of that bound and the
/// independence estimate `⌊|D| · Π supp(i)/|D|⌋`.
pub fn estimate_support(x: &Itemset, ct: &CodeTable) -> Result<SupportEstimate, QueryError> {
    let n = ct.n_transactions();
    if x.is_empty() {
        return Ok(SupportEstimate { count: n, lower_bound: n, approximate: false });
    }
    if let Some(item) = x.iter().find(|&i| !ct.has_item(i)) {
        return Err(QueryError::UnknownItem { item, database: ct.provenance.clone() });
    }
    if let Some(e) = ct.get(x) {
        return Ok(SupportEstimate { count: e.support, lower_bound: e.support, approximate: false });
    }
    let lower_bound: usize = ct.entries().iter().filter(|e| x.is_subset_of(&e.itemset)).map(|e| e.usage).sum();
    let independence = if n == 0 {
        0
    } else {
        let p: f64 =
            x.iter().map(|i| ct.get(&Itemset::singleton(i)).map_or(0, |e| e.support) as f64 / n as f64).product();
        (n as f64 * p).floor() as usize
    };
    Ok(SupportEstimate { count: lower_bound.max(independence), lower_bound, approximate: true })
}
