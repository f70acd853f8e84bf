use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::PartyId;

use super::masking::{full_token, mask_set, remask, MaskedSet, PartyKey};
use super::ProtocolError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Largest tolerated fraction of colliding tokens.
    pub tau: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { tau: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: usize,
    pub from: PartyId,
    pub to: PartyId,
    pub payload: MaskedSet,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub ring: Vec<PartyId>,
    pub messages: Vec<Message>,
    pub count: usize,
    /// Distinct elements that share a fully masked token with another
    /// element. Filled in by the simulation harness, which sees all inputs.
    pub collisions: usize,
    /// Fully masked tokens over all parties.
    pub total_tokens: usize,
    pub accepted: Option<bool>,
}

impl ProtocolTranscript {
    /// Ring neighbor that position `r` sends to.
    pub fn left_neighbor(&self, party: PartyId) -> Option<PartyId> {
        let r = self.ring.iter().position(|&p| p == party)?;
        Some(self.ring[(r + 1) % self.ring.len()])
    }

    pub fn payload_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len() * 8).sum()
    }

    /// One `round=.. from=.. to=.. tokens=..` line per message, then the
    /// outcome line.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let tokens: Vec<String> = m.payload.tokens.iter().map(|t| format!("{t:016x}")).collect();
            let _ = writeln!(out, "round={} from={} to={} tokens={}", m.round, m.from.0, m.to.0, tokens.join(","));
        }
        let accepted = self.accepted.map_or("pending".to_string(), |a| a.to_string());
        let _ = writeln!(out, "count={} collisions={} accepted={}", self.count, self.collisions, accepted);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionVerdict {
    pub accepted: bool,
    /// No collision at all: the count is exact.
    pub exact: bool,
    pub rate: f64,
}

/// Accepts iff `collisions / total_tokens ≤ tau`.
pub fn collision_check(transcript: &mut ProtocolTranscript, tau: f64) -> CollisionVerdict {
    let rate =
        if transcript.total_tokens == 0 { 0.0 } else { transcript.collisions as f64 / transcript.total_tokens as f64 };
    let accepted = rate <= tau;
    transcript.accepted = Some(accepted);
    CollisionVerdict { accepted, exact: transcript.collisions == 0, rate }
}

/// One ring participant. Holds its key and whatever masked set it has been
/// handed; nothing else crosses party boundaries.
struct Party {
    id: PartyId,
    position: usize,
    key: PartyKey,
    own: Vec<u64>,
    held: Option<MaskedSet>,
}

/// Counts `|⋂ sets|` over the ring.
///
/// Ring position `r` always sends to position `r + 1` (wrapping), where
/// positions follow `ring`. Rounds `1..n` pass the sets around: each party
/// masks its own set, then re-masks and forwards whatever it receives, so
/// after round `n - 1` every party holds a neighbor's set masked by all keys
/// but its own, and adds its own layer locally. Rounds `n..2n-1` pass a
/// running intersection from position 0 forward; the last position reads off
/// the cardinality.
///
/// Keys and shuffles come from a generator seeded with `seed`.
pub fn ring_intersection_count(
    sets: &BTreeMap<PartyId, Vec<u64>>,
    ring: &[PartyId],
    seed: u64,
) -> Result<(usize, ProtocolTranscript), ProtocolError> {
    let n = ring.len();
    if n < 2 {
        return Err(ProtocolError::RingTooShort(n));
    }
    let mut seen = BTreeSet::new();
    if let Some(&dup) = ring.iter().find(|p| !seen.insert(**p)) {
        return Err(ProtocolError::DuplicateParty(dup));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parties = ring
        .iter()
        .enumerate()
        .map(|(position, &id)| {
            let own = sets.get(&id).ok_or(ProtocolError::MissingParty(id))?.clone();
            Ok(Party { id, position, key: PartyKey::generate(id, &mut rng), own, held: None })
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;

    let mut transcript = ProtocolTranscript { ring: ring.to_vec(), ..Default::default() };
    let left = |r: usize| (r + 1) % n;

    // masking rounds
    let mut in_flight: Vec<MaskedSet> =
        parties.iter().map(|p| mask_set(&p.own, &p.key, p.position, rng.random())).collect();
    for round in 1..n {
        let mut next = vec![None; n];
        for (r, payload) in in_flight.into_iter().enumerate() {
            let to = left(r);
            transcript.messages.push(Message {
                round,
                from: parties[r].id,
                to: parties[to].id,
                payload: payload.clone(),
            });
            next[to] = Some(payload);
        }
        in_flight = next
            .into_iter()
            .enumerate()
            .map(|(r, received)| remask(&received.expect("every position receives"), &parties[r].key, rng.random()))
            .collect();
    }
    // the last remask above was each holder's own layer
    for (p, full) in parties.iter_mut().zip(in_flight) {
        debug_assert_eq!(full.layers, n);
        p.held = Some(full);
    }

    // intersection rounds
    let mut running = parties[0].held.clone().expect("held after masking");
    for r in 0..n - 1 {
        let to = left(r);
        running.tokens.shuffle(&mut rng);
        transcript.messages.push(Message {
            round: n + r,
            from: parties[r].id,
            to: parties[to].id,
            payload: running.clone(),
        });
        let mine = parties[to].held.as_ref().expect("held after masking");
        running = MaskedSet {
            tokens: multiset_intersection(&running.tokens, &mine.tokens),
            origin: to,
            layers: n,
            permuted: true,
        };
    }
    transcript.count = running.tokens.len();

    // harness-side audit: needs every plaintext set and key
    let keys: Vec<PartyKey> = parties.iter().map(|p| p.key.clone()).collect();
    let universe: BTreeSet<u64> = parties.iter().flat_map(|p| p.own.iter().copied()).collect();
    let distinct_tokens: BTreeSet<u64> = universe.iter().map(|&e| full_token(e, &keys)).collect();
    transcript.collisions = universe.len() - distinct_tokens.len();
    transcript.total_tokens = parties.iter().map(|p| p.own.len()).sum();

    Ok((transcript.count, transcript))
}

fn multiset_intersection(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &t in b {
        *counts.entry(t).or_default() += 1;
    }
    let mut out = Vec::new();
    for &t in a {
        if let Some(c) = counts.get_mut(&t) {
            if *c > 0 {
                *c -= 1;
                out.push(t);
            }
        }
    }
    out
}
