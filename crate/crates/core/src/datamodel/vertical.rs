use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DataError, Item, Itemset, Tid, TransactionDatabase};

/// Vertical layout: item → ascending tidset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerticalIndex {
    pub tidsets: BTreeMap<Item, Vec<Tid>>,
}

impl VerticalIndex {
    pub fn tidset(&self, item: Item) -> Option<&[Tid]> {
        self.tidsets.get(&item).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.tidsets.is_empty()
    }

    /// Tids containing every item of `x`; `None` if some item is absent.
    pub fn cover_tids(&self, x: &Itemset) -> Option<Vec<Tid>> {
        let mut iter = x.iter();
        let first = iter.next()?;
        let mut acc = self.tidsets.get(&first)?.clone();
        for item in iter {
            acc = intersect_sorted(&acc, self.tidsets.get(&item)?);
        }
        Some(acc)
    }
}

pub fn to_vertical(db: &TransactionDatabase) -> VerticalIndex {
    let mut tidsets: BTreeMap<Item, Vec<Tid>> = BTreeMap::new();
    for (n, t) in db.transactions().iter().enumerate() {
        let tid = (n + 1) as Tid;
        for item in t.iter() {
            tidsets.entry(item).or_default().push(tid);
        }
    }
    VerticalIndex { tidsets }
}

pub fn to_horizontal(v: &VerticalIndex, n_transactions: usize) -> Result<TransactionDatabase, DataError> {
    let mut rows: Vec<Vec<Item>> = vec![Vec::new(); n_transactions];
    for (&item, tids) in &v.tidsets {
        for &tid in tids {
            if tid == 0 || tid as usize > n_transactions {
                return Err(DataError::TidOutOfRange { tid, n: n_transactions });
            }
            rows[tid as usize - 1].push(item);
        }
    }
    Ok(TransactionDatabase::from_itemsets(rows.into_iter().map(Itemset::new).collect()))
}

/// Intersection of two ascending tid lists.
pub fn intersect_sorted(a: &[Tid], b: &[Tid]) -> Vec<Tid> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "2 1 5 3\n2 3\n1 4\n3 1 5\n2 1 3\n2 4";

    #[test]
    fn sample_vertical_layout() {
        let v = to_vertical(&TransactionDatabase::parse(SAMPLE).unwrap());
        assert_eq!(v.tidset(1).unwrap(), &[1, 3, 4, 5]);
        assert_eq!(v.tidset(2).unwrap(), &[1, 2, 5, 6]);
        assert_eq!(v.tidset(3).unwrap(), &[1, 2, 4, 5]);
        // t6 = {2,4} holds item 4 too
        assert_eq!(v.tidset(4).unwrap(), &[3, 6]);
        assert_eq!(v.tidset(5).unwrap(), &[1, 4]);
    }

    #[test]
    fn empty_db_gives_empty_index() {
        assert!(to_vertical(&TransactionDatabase::default()).is_empty());
    }

    #[test]
    fn horizontal_from_index() {
        let v = VerticalIndex { tidsets: BTreeMap::from([(1, vec![1])]) };
        let db = to_horizontal(&v, 2).unwrap();
        assert_eq!(db.transactions(), &[Itemset::new([1]), Itemset::empty()]);

        let bad = VerticalIndex { tidsets: BTreeMap::from([(1, vec![3])]) };
        assert_eq!(to_horizontal(&bad, 2), Err(DataError::TidOutOfRange { tid: 3, n: 2 }));
    }

    #[test]
    fn cover_tids_intersects() {
        let v = to_vertical(&TransactionDatabase::parse(SAMPLE).unwrap());
        assert_eq!(v.cover_tids(&Itemset::new([1, 3])).unwrap(), vec![1, 4, 5]);
        assert_eq!(v.cover_tids(&Itemset::new([1, 9])), None);
    }

    pub(crate) fn arb_db() -> impl Strategy<Value = TransactionDatabase> {
        prop::collection::vec(prop::collection::btree_set(0u32..12, 0..6), 0..30)
            .prop_map(|rows| TransactionDatabase::from_rows(rows).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip(db in arb_db()) {
            let v = to_vertical(&db);
            prop_assert_eq!(to_horizontal(&v, db.len()).unwrap(), db);
        }

        #[test]
        fn tidset_membership(db in arb_db()) {
            let v = to_vertical(&db);
            for (&item, tids) in &v.tidsets {
                for (n, t) in db.transactions().iter().enumerate() {
                    let tid = (n + 1) as Tid;
                    prop_assert_eq!(tids.binary_search(&tid).is_ok(), t.contains(item));
                }
            }
        }
    }
}
