use std::collections::{BTreeMap, BTreeSet};

use super::{to_vertical, DataError, Fragment, FragmentMeta, Item, PartyId, TransactionDatabase};

/// Splits `db` by items. One fragment per party named in `assignment`,
/// ascending by party id.
pub fn partition_vertical(
    db: &TransactionDatabase,
    database: &str,
    assignment: &BTreeMap<Item, PartyId>,
) -> Result<Vec<Fragment>, DataError> {
    if let Some(&missing) = db.alphabet().iter().find(|i| !assignment.contains_key(i)) {
        return Err(DataError::UnassignedItem(missing));
    }
    let vertical = to_vertical(db);
    let mut by_party: BTreeMap<PartyId, BTreeSet<Item>> = BTreeMap::new();
    for (&item, &party) in assignment {
        let items = by_party.entry(party).or_default();
        if db.alphabet().contains(&item) {
            items.insert(item);
        }
    }
    Ok(by_party
        .into_iter()
        .map(|(party, items)| {
            let tidsets = items.iter().map(|i| (*i, vertical.tidsets.get(i).cloned().unwrap_or_default())).collect();
            Fragment::new(
                FragmentMeta { database: database.to_string(), party, n_transactions: db.len() },
                items,
                tidsets,
            )
        })
        .collect())
}

/// Assigns the sorted alphabet to `n_parties` contiguous ranges, parties
/// numbered from 1. Earlier parties take the remainder.
pub fn contiguous_assignment(alphabet: &BTreeSet<Item>, n_parties: usize) -> BTreeMap<Item, PartyId> {
    let items: Vec<Item> = alphabet.iter().copied().collect();
    split_sizes(items.len(), n_parties.max(1))
        .into_iter()
        .enumerate()
        .scan(0usize, |start, (p, size)| {
            let range = *start..*start + size;
            *start += size;
            Some((p, range))
        })
        .flat_map(|(p, range)| items[range].iter().map(move |&i| (i, PartyId(p as u32 + 1))))
        .collect()
}

/// Contiguous tid ranges; sizes differ by at most one, earlier parts larger.
pub fn partition_horizontal(db: &TransactionDatabase, n_parts: usize) -> Result<Vec<TransactionDatabase>, DataError> {
    if n_parts == 0 {
        return Err(DataError::ZeroParts);
    }
    if n_parts == 1 {
        return Ok(vec![db.clone()]);
    }
    if n_parts > db.len() {
        return Err(DataError::TooManyParts { parts: n_parts, transactions: db.len() });
    }
    let mut start = 0;
    Ok(split_sizes(db.len(), n_parts)
        .into_iter()
        .map(|size| {
            let part = db.transactions()[start..start + size].to_vec();
            start += size;
            TransactionDatabase::from_itemsets(part)
        })
        .collect())
}

fn split_sizes(total: usize, parts: usize) -> Vec<usize> {
    let (base, extra) = (total / parts, total % parts);
    (0..parts).map(|p| base + usize::from(p < extra)).filter(|&s| s > 0 || total == 0).collect()
}
