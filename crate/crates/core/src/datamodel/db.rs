use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DataError, Item, Itemset, Tid};

/// Horizontal transaction database. Transaction `t` (1-based) is
/// `transactions[t - 1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDatabase {
    transactions: Vec<Itemset>,
    alphabet: BTreeSet<Item>,
}

impl TransactionDatabase {
    /// Parses the line-per-transaction integer format. Blank lines are empty
    /// transactions.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let mut row = Vec::new();
            for token in line.split_whitespace() {
                let item: Item =
                    token.parse().map_err(|_| DataError::Parse { line: line_no, token: token.to_string() })?;
                row.push(item);
            }
            rows.push((line_no, row));
        }
        Self::build(rows)
    }

    /// Builds a database from raw rows; rows must not repeat an item.
    pub fn from_rows<R, I>(rows: R) -> Result<Self, DataError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = Item>,
    {
        Self::build(rows.into_iter().enumerate().map(|(n, r)| (n + 1, r.into_iter().collect())))
    }

    fn build(rows: impl IntoIterator<Item = (usize, Vec<Item>)>) -> Result<Self, DataError> {
        let mut transactions = Vec::new();
        let mut alphabet = BTreeSet::new();
        for (line, row) in rows {
            let set = Itemset::new(row.iter().copied());
            if set.len() != row.len() {
                let mut seen = BTreeSet::new();
                let item = row.iter().copied().find(|i| !seen.insert(*i)).unwrap_or_default();
                return Err(DataError::DuplicateItem { line, item });
            }
            alphabet.extend(set.iter());
            transactions.push(set);
        }
        Ok(TransactionDatabase { transactions, alphabet })
    }

    /// Builds from already-validated itemsets.
    pub fn from_itemsets(transactions: Vec<Itemset>) -> Self {
        let alphabet = transactions.iter().flat_map(|t| t.iter()).collect();
        TransactionDatabase { transactions, alphabet }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn transactions(&self) -> &[Itemset] {
        &self.transactions
    }

    pub fn transaction(&self, tid: Tid) -> Option<&Itemset> {
        (tid as usize).checked_sub(1).and_then(|i| self.transactions.get(i))
    }

    pub fn alphabet(&self) -> &BTreeSet<Item> {
        &self.alphabet
    }

    /// Σ|t| over all transactions.
    pub fn item_occurrences(&self) -> usize {
        self.transactions.iter().map(Itemset::len).sum()
    }

    /// Number of transactions containing `x`.
    pub fn support(&self, x: &Itemset) -> usize {
        self.transactions.iter().filter(|t| x.is_subset_of(t)).count()
    }

    /// Every transaction restricted to `items`; tids are kept.
    pub fn project(&self, items: &BTreeSet<Item>) -> TransactionDatabase {
        let transactions = self.transactions.iter().map(|t| t.iter().filter(|i| items.contains(i)).collect()).collect();
        TransactionDatabase::from_itemsets(transactions)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.transactions {
            let _ = writeln!(out, "{t}");
        }
        out
    }
}
