use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::{
    to_horizontal, verify_digest, Fragment, Item, Itemset, PartyId, TransactionDatabase, VerticalIndex,
};
use crate::protocol::{collision_check, ring_intersection_count, ProtocolTranscript};

use super::FederatedError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountProvenance {
    Local(PartyId),
    CrossParty(Vec<PartyId>),
}

/// A candidate with its support. Carries no tids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCount {
    pub itemset: Itemset,
    pub count: usize,
    pub provenance: CountProvenance,
    /// The protocol saw collisions below the threshold; the count may be off.
    pub approximate: bool,
}

impl CandidateCount {
    pub fn is_local(&self) -> bool {
        matches!(self.provenance, CountProvenance::Local(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountOutcome {
    pub count: CandidateCount,
    pub transcript: Option<ProtocolTranscript>,
    pub attempts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    pub tau: f64,
    pub seed: u64,
    /// Runs with fresh keys before giving up on a rejected count.
    pub max_attempts: usize,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings { tau: 0.01, seed: 0, max_attempts: 3 }
    }
}

impl ProtocolSettings {
    /// Seed of one protocol run, a function of the base seed, the candidate
    /// and the attempt number only.
    pub fn run_seed(&self, c: &Itemset, attempt: usize) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for i in c.iter() {
            h.update(i.to_le_bytes());
        }
        h.update((attempt as u64).to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

/// Validated set of fragments forming one vertical partition.
#[derive(Clone, Debug)]
pub struct Federation {
    fragments: Vec<Fragment>,
    owner: BTreeMap<Item, usize>,
}

impl Federation {
    /// Checks digests, that all fragments come from one database and that
    /// their item sets are pairwise disjoint.
    pub fn new(mut fragments: Vec<Fragment>) -> Result<Self, FederatedError> {
        fragments.sort_by_key(Fragment::party);
        if let Some(bad) = fragments.iter().find(|f| !verify_digest(f)) {
            return Err(FederatedError::Integrity { fragment: bad.id() });
        }
        if let Some(first) = fragments.first() {
            let (db, n) = (&first.meta.database, first.meta.n_transactions);
            if let Some(f) = fragments.iter().find(|f| &f.meta.database != db || f.meta.n_transactions != n) {
                return Err(FederatedError::Inconsistent(format!("{} disagrees with {}", f.id(), first.id())));
            }
        }
        let mut seen = BTreeSet::new();
        for w in fragments.windows(2) {
            if w[0].party() == w[1].party() {
                return Err(FederatedError::Inconsistent(format!("party {} holds two fragments", w[0].party())));
            }
        }
        let mut owner = BTreeMap::new();
        for (n, f) in fragments.iter().enumerate() {
            for &i in &f.items {
                if !seen.insert(i) {
                    return Err(FederatedError::Inconsistent(format!("item {i} is held twice")));
                }
                owner.insert(i, n);
            }
        }
        Ok(Federation { fragments, owner })
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn database(&self) -> &str {
        self.fragments.first().map_or("", |f| f.meta.database.as_str())
    }

    pub fn n_transactions(&self) -> usize {
        self.fragments.first().map_or(0, |f| f.meta.n_transactions)
    }

    pub fn alphabet(&self) -> impl Iterator<Item = Item> + '_ {
        self.owner.keys().copied()
    }

    pub fn owner_of(&self, item: Item) -> Option<&Fragment> {
        self.owner.get(&item).map(|&n| &self.fragments[n])
    }

    /// Items of `c` grouped by owning party, from metadata alone.
    pub fn split(&self, c: &Itemset) -> Result<BTreeMap<PartyId, Itemset>, FederatedError> {
        let mut groups: BTreeMap<PartyId, Vec<Item>> = BTreeMap::new();
        for i in c.iter() {
            let f = self.owner_of(i).ok_or(FederatedError::UnknownItem(i))?;
            groups.entry(f.party()).or_default().push(i);
        }
        Ok(groups.into_iter().map(|(p, items)| (p, Itemset::new(items))).collect())
    }

    fn fragment(&self, party: PartyId) -> &Fragment {
        self.fragments.iter().find(|f| f.party() == party).expect("party from split()")
    }

    /// The joined plaintext database, as only the secure server may build it.
    pub fn joined_database(&self) -> TransactionDatabase {
        let tidsets = self.fragments.iter().flat_map(|f| f.tidsets.clone()).collect();
        to_horizontal(&VerticalIndex { tidsets }, self.n_transactions())
            .expect("fragment tids are bounded by their row count")
    }
}

/// `|⋂_{i∈c} tidset(i)|` computed entirely inside `party`.
pub fn local_count(party: &Fragment, c: &Itemset) -> Result<CandidateCount, FederatedError> {
    if let Some(item) = c.iter().find(|&i| !party.holds(i)) {
        return Err(FederatedError::ItemNotHeld { item, party: party.party() });
    }
    let tids = party.local_tids(c).expect("all items held");
    Ok(CandidateCount {
        itemset: c.clone(),
        count: tids.len(),
        provenance: CountProvenance::Local(party.party()),
        approximate: false,
    })
}

/// Counts a candidate spanning several parties with the masking ring.
///
/// Party `i` builds `S_i` by intersecting the tidsets of the `l_i` items of
/// `c` it holds; the ring returns `|⋂ S_i|`. A run the collision check
/// rejects is repeated with fresh keys up to `max_attempts` times.
pub fn cross_party_count(
    c: &Itemset,
    federation: &Federation,
    settings: &ProtocolSettings,
) -> Result<CountOutcome, FederatedError> {
    let groups = federation.split(c)?;
    if groups.len() < 2 {
        return Err(FederatedError::NotCrossParty(c.clone()));
    }
    debug_assert_eq!(groups.values().map(Itemset::len).sum::<usize>(), c.len());

    let segments: BTreeMap<PartyId, Vec<u64>> = groups
        .iter()
        .map(|(&p, share)| {
            let tids = federation.fragment(p).local_tids(share).expect("split() only names held items");
            (p, tids.into_iter().map(u64::from).collect())
        })
        .collect();
    let ring: Vec<PartyId> = segments.keys().copied().collect();

    for attempt in 1..=settings.max_attempts.max(1) {
        let (count, mut transcript) = ring_intersection_count(&segments, &ring, settings.run_seed(c, attempt))?;
        let verdict = collision_check(&mut transcript, settings.tau);
        if verdict.accepted {
            return Ok(CountOutcome {
                count: CandidateCount {
                    itemset: c.clone(),
                    count,
                    provenance: CountProvenance::CrossParty(ring),
                    approximate: !verdict.exact,
                },
                transcript: Some(transcript),
                attempts: attempt,
            });
        }
    }
    Err(FederatedError::Rejected { itemset: c.clone(), attempts: settings.max_attempts.max(1) })
}

/// Routes `c` to [`local_count`] or [`cross_party_count`] by looking up item
/// ownership in the fragment metadata.
pub fn count_candidate(
    c: &Itemset,
    federation: &Federation,
    settings: &ProtocolSettings,
) -> Result<CountOutcome, FederatedError> {
    let groups = federation.split(c)?;
    match groups.keys().next() {
        Some(&party) if groups.len() == 1 => {
            Ok(CountOutcome { count: local_count(federation.fragment(party), c)?, transcript: None, attempts: 0 })
        }
        None => Ok(CountOutcome {
            count: CandidateCount {
                itemset: c.clone(),
                count: federation.n_transactions(),
                provenance: CountProvenance::CrossParty(Vec::new()),
                approximate: false,
            },
            transcript: None,
            attempts: 0,
        }),
        _ => cross_party_count(c, federation, settings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::partition_vertical;

    const SAMPLE: &str = "2 1 5 3\n2 3\n1 4\n3 1 5\n2 1 3\n2 4";

    fn federation(groups: &[&[Item]]) -> Federation {
        let db = TransactionDatabase::parse(SAMPLE).unwrap();
        let assignment = groups
            .iter()
            .enumerate()
            .flat_map(|(p, items)| items.iter().map(move |&i| (i, PartyId(p as u32 + 1))))
            .collect();
        Federation::new(partition_vertical(&db, "d", &assignment).unwrap()).unwrap()
    }

    #[test]
    fn local_counts() {
        let fed = federation(&[&[1, 3], &[2, 4, 5]]);
        let p1 = &fed.fragments()[0];
        assert_eq!(local_count(p1, &Itemset::new([1, 3])).unwrap().count, 3);
        assert_eq!(local_count(p1, &Itemset::new([1])).unwrap().count, 4);
        assert!(matches!(local_count(p1, &Itemset::new([2])), Err(FederatedError::ItemNotHeld { item: 2, .. })));
    }

    #[test]
    fn cross_counts() {
        let fed = federation(&[&[1], &[2, 3, 4, 5]]);
        let s = ProtocolSettings::default();
        let out = cross_party_count(&Itemset::new([1, 2]), &fed, &s).unwrap();
        assert_eq!(out.count.count, 2);
        assert_eq!(out.attempts, 1);
        assert!(out.transcript.is_some());

        let fed = federation(&[&[1, 2], &[3, 4, 5]]);
        let out = cross_party_count(&Itemset::new([1, 3, 5]), &fed, &s).unwrap();
        assert_eq!(out.count.count, 2);
        assert_eq!(out.count.provenance, CountProvenance::CrossParty(vec![PartyId(1), PartyId(2)]));
    }

    #[test]
    fn routing() {
        let fed = federation(&[&[1, 2], &[3, 4, 5]]);
        let s = ProtocolSettings::default();
        let local = count_candidate(&Itemset::new([3, 5]), &fed, &s).unwrap();
        assert!(local.count.is_local());
        assert!(local.transcript.is_none());
        assert!(matches!(cross_party_count(&Itemset::new([3, 5]), &fed, &s), Err(FederatedError::NotCrossParty(_))));
        assert!(!count_candidate(&Itemset::new([2, 3]), &fed, &s).unwrap().count.is_local());
    }

    #[test]
    fn tampered_fragment_refused() {
        let db = TransactionDatabase::parse(SAMPLE).unwrap();
        let assignment = db.alphabet().iter().map(|&i| (i, PartyId(1 + i % 2))).collect();
        let mut frags = partition_vertical(&db, "d", &assignment).unwrap();
        frags[1].tidsets.get_mut(&1).unwrap().pop();
        assert!(matches!(Federation::new(frags), Err(FederatedError::Integrity { .. })));
    }

    #[test]
    fn joined_database_restores_source() {
        let fed = federation(&[&[1, 4], &[2], &[3, 5]]);
        assert_eq!(fed.joined_database(), TransactionDatabase::parse(SAMPLE).unwrap());
    }

    #[test]
    fn zero_threshold_always_rejects() {
        // every run reports its collisions; with a negative threshold even a
        // clean run is refused, which exercises the retry budget
        let fed = federation(&[&[1], &[2, 3, 4, 5]]);
        let s = ProtocolSettings { tau: -1.0, seed: 1, max_attempts: 3 };
        match cross_party_count(&Itemset::new([1, 2]), &fed, &s) {
            Err(FederatedError::Rejected { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
