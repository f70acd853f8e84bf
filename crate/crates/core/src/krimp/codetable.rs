use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Item, Itemset, TransactionDatabase};

use super::cover::cover_indices;
use super::mine::cover_order;
use super::KrimpError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeTableEntry {
    pub itemset: Itemset,
    /// Transactions containing the itemset.
    pub support: usize,
    /// Covers that use this entry.
    pub usage: usize,
    /// `None` for unused entries, which carry no code.
    pub code_length: Option<f64>,
}

/// Code table in cover order: the non-singleton region first, then every
/// singleton of the alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeTable {
    entries: Vec<CodeTableEntry>,
    /// Number of leading non-singleton entries.
    n_patterns: usize,
    /// Singleton code lengths of the standard code table, used to spell out
    /// itemsets in `L(CT)`.
    standard_lengths: BTreeMap<Item, f64>,
    n_transactions: usize,
    pub provenance: String,
}

/// Two-part description length in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedSize {
    pub data_bits: f64,
    pub model_bits: f64,
}

impl EncodedSize {
    pub fn total(&self) -> f64 {
        self.data_bits + self.model_bits
    }
}

impl CodeTable {
    /// The standard code table: singletons only, usages from `db`.
    pub fn singletons(db: &TransactionDatabase, provenance: impl Into<String>) -> Self {
        let mut counts: BTreeMap<Item, usize> = db.alphabet().iter().map(|&i| (i, 0)).collect();
        for t in db.transactions() {
            for i in t.iter() {
                *counts.entry(i).or_default() += 1;
            }
        }
        let total = db.item_occurrences() as f64;
        let standard_lengths = counts.iter().map(|(&i, &c)| (i, (total / c as f64).log2())).collect();
        let mut entries: Vec<CodeTableEntry> = counts
            .into_iter()
            .map(|(i, c)| CodeTableEntry { itemset: Itemset::singleton(i), support: c, usage: 0, code_length: None })
            .collect();
        entries.sort_by(|a, b| cover_order((&a.itemset, a.support), (&b.itemset, b.support)));
        let mut ct = CodeTable {
            entries,
            n_patterns: 0,
            standard_lengths,
            n_transactions: db.len(),
            provenance: provenance.into(),
        };
        ct.recompute_usage(db);
        ct
    }

    /// Standard table plus `patterns` (itemsets of size ≥ 2 with supports),
    /// placed in cover order and re-covered against `db`.
    pub fn with_patterns(
        db: &TransactionDatabase,
        patterns: impl IntoIterator<Item = (Itemset, usize)>,
        provenance: impl Into<String>,
    ) -> Self {
        let mut ct = Self::singletons(db, provenance);
        let mut patterns: Vec<(Itemset, usize)> = patterns.into_iter().filter(|(x, _)| x.len() >= 2).collect();
        patterns.sort_by(|a, b| cover_order((&a.0, a.1), (&b.0, b.1)));
        patterns.dedup_by(|a, b| a.0 == b.0);
        for (n, (itemset, support)) in patterns.into_iter().enumerate() {
            ct.entries.insert(n, CodeTableEntry { itemset, support, usage: 0, code_length: None });
        }
        ct.n_patterns = ct.entries.len() - ct.standard_lengths.len();
        ct.recompute_usage(db);
        ct
    }

    pub fn entries(&self) -> &[CodeTableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Non-singleton entries, in cover order.
    pub fn patterns(&self) -> &[CodeTableEntry] {
        &self.entries[..self.n_patterns]
    }

    pub fn singleton_entries(&self) -> &[CodeTableEntry] {
        &self.entries[self.n_patterns..]
    }

    pub fn n_transactions(&self) -> usize {
        self.n_transactions
    }

    pub fn has_item(&self, item: Item) -> bool {
        self.standard_lengths.contains_key(&item)
    }

    pub fn alphabet(&self) -> impl Iterator<Item = Item> + '_ {
        self.standard_lengths.keys().copied()
    }

    pub fn position(&self, x: &Itemset) -> Option<usize> {
        self.entries.iter().position(|e| &e.itemset == x)
    }

    pub fn get(&self, x: &Itemset) -> Option<&CodeTableEntry> {
        self.position(x).map(|p| &self.entries[p])
    }

    pub fn total_usage(&self) -> usize {
        self.entries.iter().map(|e| e.usage).sum()
    }

    pub fn standard_length(&self, item: Item) -> Option<f64> {
        self.standard_lengths.get(&item).copied()
    }

    /// Places a non-singleton at `slot` of the pattern region without
    /// re-covering. `slot` is clamped to the region.
    pub(crate) fn insert_pattern_at(
        &mut self,
        slot: usize,
        itemset: Itemset,
        support: usize,
    ) -> Result<(), KrimpError> {
        if self.position(&itemset).is_some() {
            return Err(KrimpError::AlreadyPresent(itemset));
        }
        if let Some(bad) = itemset.iter().find(|&i| !self.has_item(i)) {
            return Err(KrimpError::UnknownItem(bad));
        }
        let slot = slot.min(self.n_patterns);
        self.entries.insert(slot, CodeTableEntry { itemset, support, usage: 0, code_length: None });
        self.n_patterns += 1;
        Ok(())
    }

    /// Cover-order slot a new pattern would take.
    pub(crate) fn standard_slot(&self, itemset: &Itemset, support: usize) -> usize {
        self.patterns()
            .iter()
            .position(|e| cover_order((itemset, support), (&e.itemset, e.support)).is_lt())
            .unwrap_or(self.n_patterns)
    }

    /// Removes a non-singleton entry; singletons are never removed.
    pub(crate) fn remove_pattern(&mut self, x: &Itemset) -> Option<CodeTableEntry> {
        let p = self.position(x).filter(|&p| p < self.n_patterns)?;
        self.n_patterns -= 1;
        Some(self.entries.remove(p))
    }

    /// Covers every transaction of `db` and resets usages and code lengths.
    pub fn recompute_usage(&mut self, db: &TransactionDatabase) {
        for e in &mut self.entries {
            e.usage = 0;
        }
        for t in db.transactions() {
            // items outside the alphabet cannot occur: the table was built from db
            if let Ok(parts) = cover_indices(t, self) {
                for p in parts {
                    self.entries[p].usage += 1;
                }
            }
        }
        let total = self.total_usage() as f64;
        for e in &mut self.entries {
            e.code_length = (e.usage > 0).then(|| (total / e.usage as f64).log2());
        }
    }

    /// Σ over used entries of 2^(−code length).
    pub fn kraft_sum(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.code_length).map(|l| (-l).exp2()).sum()
    }

    /// One line per entry in cover order, `--` before the singleton region.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, e) in self.entries.iter().enumerate() {
            if n == self.n_patterns {
                out.push_str("--\n");
            }
            let bits = match e.code_length {
                Some(l) => format!("{l:.6}"),
                None => "-".to_string(),
            };
            let _ = writeln!(out, "{} | usage={} | bits={}", e.itemset, e.usage, bits);
        }
        out
    }
}

/// Code length of the entry for `x`, or `None` if `x` is absent or unused.
pub fn code_length(x: &Itemset, ct: &CodeTable) -> Option<f64> {
    ct.get(x).and_then(|e| e.code_length)
}

/// `L(D | CT) + L(CT)` with usages obtained by covering `db` afresh; the
/// usages stored in `ct` are ignored.
pub fn total_encoded_size(db: &TransactionDatabase, ct: &CodeTable) -> EncodedSize {
    let mut usage = vec![0usize; ct.len()];
    for t in db.transactions() {
        if let Ok(parts) = cover_indices(t, ct) {
            for p in parts {
                usage[p] += 1;
            }
        }
    }
    size_from_usage(ct, &usage)
}

fn size_from_usage(ct: &CodeTable, usage: &[usize]) -> EncodedSize {
    let total = usage.iter().sum::<usize>() as f64;
    let mut data_bits = 0.0;
    let mut model_bits = 0.0;
    for (e, &u) in ct.entries().iter().zip(usage) {
        if u == 0 {
            continue;
        }
        let len = (total / u as f64).log2();
        data_bits += u as f64 * len;
        let spelled: f64 = e.itemset.iter().filter_map(|i| ct.standard_length(i)).sum();
        model_bits += len + spelled;
    }
    EncodedSize { data_bits, model_bits }
}

impl CodeTable {
    /// Encoded size from the stored usages, i.e. of the database the table
    /// was last covered against.
    pub fn encoded_size(&self) -> EncodedSize {
        let usage: Vec<usize> = self.entries.iter().map(|e| e.usage).collect();
        size_from_usage(self, &usage)
    }
}
