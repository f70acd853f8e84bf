use serde::{Deserialize, Serialize};

use crate::datamodel::{Itemset, TransactionDatabase};

use super::{mine_candidates, CodeTable, KrimpError};

/// Below this difference two description lengths are considered equal.
pub(crate) const SIZE_EPSILON: f64 = 1e-9;

/// One accept/reject decision of the compression loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressStep {
    pub candidate: Itemset,
    pub support: usize,
    pub size_before: f64,
    pub size_after: f64,
    pub accepted: bool,
}

pub fn krimp_compress(db: &TransactionDatabase, min_count: usize) -> Result<CodeTable, KrimpError> {
    krimp_compress_traced(db, min_count).map(|(ct, _)| ct)
}

/// Starts from the standard table and offers every candidate of size ≥ 2,
/// in candidate order, at its cover-order slot. A candidate stays iff the
/// total encoded size strictly decreases.
pub fn krimp_compress_traced(
    db: &TransactionDatabase,
    min_count: usize,
) -> Result<(CodeTable, Vec<CompressStep>), KrimpError> {
    let candidates = mine_candidates(db, min_count)?;
    let mut ct = CodeTable::singletons(db, "");
    let mut best = ct.encoded_size().total();
    let mut trace = Vec::new();
    for c in candidates.iter().filter(|c| c.itemset.len() >= 2) {
        let mut trial = ct.clone();
        let slot = trial.standard_slot(&c.itemset, c.support);
        trial.insert_pattern_at(slot, c.itemset.clone(), c.support)?;
        trial.recompute_usage(db);
        let size = trial.encoded_size().total();
        let accepted = size < best - SIZE_EPSILON;
        trace.push(CompressStep {
            candidate: c.itemset.clone(),
            support: c.support,
            size_before: best,
            size_after: size,
            accepted,
        });
        if accepted {
            ct = trial;
            best = size;
        }
    }
    Ok((ct, trace))
}

/// `l` copies of `ct`, copy `i` holding `f` at depth `i / l` of the
/// pattern region.
///
/// With `m` = pattern count + 1 slots, copy `i` puts `f` at the 1-based slot
/// `round(i/l · m)` (half rounds up), clamped to `[1, m]`. Every copy is
/// re-covered against `db`.
pub fn directed_placement(
    ct: &CodeTable,
    f: &Itemset,
    support: usize,
    l: usize,
    db: &TransactionDatabase,
) -> Result<Vec<CodeTable>, KrimpError> {
    if l == 0 {
        return Err(KrimpError::ZeroVariants);
    }
    placement_slots(ct.patterns().len() + 1, l)
        .into_iter()
        .map(|slot| {
            let mut variant = ct.clone();
            variant.insert_pattern_at(slot - 1, f.clone(), support)?;
            variant.recompute_usage(db);
            Ok(variant)
        })
        .collect()
}

/// 1-based insertion slots for depths `i/l`, `i = 1..=l`, over `m` slots.
pub(crate) fn placement_slots(m: usize, l: usize) -> Vec<usize> {
    (1..=l).map(|i| ((2 * i * m + l) / (2 * l)).clamp(1, m)).collect()
}
