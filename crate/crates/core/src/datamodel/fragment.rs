use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{intersect_sorted, DataError, Item, Itemset, PartyId, Tid};

/// Metadata checked alongside the content digest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentMeta {
    pub database: String,
    pub party: PartyId,
    /// Row count of the logical database the fragment was cut from.
    pub n_transactions: usize,
}

impl FragmentMeta {
    pub fn fragment_id(&self) -> String {
        format!("{}#{}", self.database, self.party.0)
    }
}

/// One party's vertical slice of a database.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub meta: FragmentMeta,
    pub items: BTreeSet<Item>,
    pub tidsets: BTreeMap<Item, Vec<Tid>>,
    /// Lowercase hex SHA-256 of the canonical serialization.
    pub digest: String,
}

impl Fragment {
    /// Builds a fragment and seals it with its digest. Items of `items`
    /// without a tidset get an empty one.
    pub fn new(meta: FragmentMeta, items: BTreeSet<Item>, mut tidsets: BTreeMap<Item, Vec<Tid>>) -> Self {
        tidsets.retain(|i, _| items.contains(i));
        for &i in &items {
            tidsets.entry(i).or_default();
        }
        for tids in tidsets.values_mut() {
            tids.sort_unstable();
            tids.dedup();
        }
        let mut f = Fragment { meta, items, tidsets, digest: String::new() };
        f.digest = fragment_digest(&f);
        f
    }

    pub fn id(&self) -> String {
        self.meta.fragment_id()
    }

    pub fn party(&self) -> PartyId {
        self.meta.party
    }

    pub fn holds(&self, item: Item) -> bool {
        self.items.contains(&item)
    }

    pub fn item_range(&self) -> Option<(Item, Item)> {
        Some((*self.items.first()?, *self.items.last()?))
    }

    /// Tids containing all of `x`; `x` must be held here. The empty itemset
    /// matches every row.
    pub fn local_tids(&self, x: &Itemset) -> Option<Vec<Tid>> {
        let mut iter = x.iter();
        let Some(first) = iter.next() else {
            return Some((1..=self.meta.n_transactions as Tid).collect());
        };
        let mut acc = self.tidsets.get(&first)?.clone();
        for item in iter {
            acc = intersect_sorted(&acc, self.tidsets.get(&item)?);
        }
        Some(acc)
    }

    /// Item occurrences held by this fragment.
    pub fn occurrences(&self) -> usize {
        self.tidsets.values().map(Vec::len).sum()
    }

    /// Canonical serialization without the digest line.
    fn canonical_body(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "fragment {} {}", self.meta.database, self.meta.party.0);
        for i in &self.items {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
        let _ = writeln!(out, "transactions {}", self.meta.n_transactions);
        out.push_str(&self.content_lines());
        out
    }

    fn content_lines(&self) -> String {
        let mut out = String::new();
        for (item, tids) in &self.tidsets {
            let _ = write!(out, "item {item}:");
            if !tids.is_empty() {
                out.push(' ');
            }
            let joined: Vec<String> = tids.iter().map(|t| t.to_string()).collect();
            out.push_str(&joined.join(","));
            out.push('\n');
        }
        out
    }

    /// Text form: header, row count, one `item` line per item, digest last.
    pub fn to_text(&self) -> String {
        let mut out = self.canonical_body();
        out.push_str(&self.digest);
        out.push('\n');
        out
    }

    /// Parses the text form. The stored digest is kept as read, so a tampered
    /// file parses fine and fails [`verify_digest`].
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let err = |line: usize, msg: &str| DataError::FragmentFormat { line, msg: msg.to_string() };
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 3 {
            return Err(err(lines.len(), "truncated fragment"));
        }
        let mut header = lines[0].split_whitespace();
        if header.next() != Some("fragment") {
            return Err(err(1, "expected `fragment <db> <party> <items...>`"));
        }
        let database = header.next().ok_or_else(|| err(1, "missing database name"))?.to_string();
        let party: u32 = header.next().and_then(|p| p.parse().ok()).ok_or_else(|| err(1, "missing or bad party id"))?;
        let items =
            header.map(|t| t.parse::<Item>().map_err(|_| err(1, "bad item id"))).collect::<Result<BTreeSet<_>, _>>()?;
        let n_transactions = lines[1]
            .strip_prefix("transactions ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| err(2, "expected `transactions <n>`"))?;

        let mut tidsets = BTreeMap::new();
        let last = lines.len() - 1;
        for (n, line) in lines.iter().enumerate().take(last).skip(2) {
            let rest = line.strip_prefix("item ").ok_or_else(|| err(n + 1, "expected `item <id>: <tids>`"))?;
            let (id, tids) = rest.split_once(':').ok_or_else(|| err(n + 1, "missing `:`"))?;
            let id: Item = id.trim().parse().map_err(|_| err(n + 1, "bad item id"))?;
            let tids = tids
                .trim()
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.trim().parse::<Tid>().map_err(|_| err(n + 1, "bad tid")))
                .collect::<Result<Vec<_>, _>>()?;
            tidsets.insert(id, tids);
        }
        let digest = lines[last].trim().to_string();
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err(last + 1, "expected 64 hex digit digest"));
        }
        Ok(Fragment { meta: FragmentMeta { database, party: PartyId(party), n_transactions }, items, tidsets, digest })
    }
}

/// Digest over the canonical serialization, binding database name, party and
/// row count together with the tidsets.
pub fn fragment_digest(f: &Fragment) -> String {
    hex::encode(Sha256::digest(f.canonical_body().as_bytes()))
}

/// Digest over the tidsets alone; equal for equal content held by different
/// parties.
pub fn content_digest(f: &Fragment) -> String {
    hex::encode(Sha256::digest(f.content_lines().as_bytes()))
}

pub fn verify_digest(f: &Fragment) -> bool {
    fragment_digest(f) == f.digest
}
