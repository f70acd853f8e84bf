use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::PartyId;

/// Safe prime `p = 2q + 1` just below 2^64. Tokens live in the subgroup of
/// quadratic residues, which has prime order `q`.
pub const GROUP_MODULUS: u64 = 18_446_744_073_709_550_147;
const GROUP_ORDER: u64 = (GROUP_MODULUS - 1) / 2;

const HASH_DOMAIN: &[u8] = b"fedmdl/mask/v1";

/// A party's masking exponent, in `[1, q)`.
#[derive(Clone, PartialEq, Eq)]
pub struct PartyKey {
    pub party: PartyId,
    secret: u64,
}

impl PartyKey {
    pub fn generate(party: PartyId, rng: &mut impl Rng) -> Self {
        PartyKey { party, secret: rng.random_range(1..GROUP_ORDER) }
    }

    pub fn from_secret(party: PartyId, secret: u64) -> Self {
        PartyKey { party, secret: secret % (GROUP_ORDER - 1) + 1 }
    }

    fn apply(&self, token: u64) -> u64 {
        pow_mod(token, self.secret)
    }
}

impl fmt::Debug for PartyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartyKey").field("party", &self.party).finish_non_exhaustive()
    }
}

/// Shuffled tokens of one set, masked by `layers` keys so far.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSet {
    pub tokens: Vec<u64>,
    /// Ring position of the party whose set this is.
    pub origin: usize,
    pub layers: usize,
    pub permuted: bool,
}

impl MaskedSet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens sorted, for order-insensitive comparison.
    pub fn sorted_tokens(&self) -> Vec<u64> {
        let mut t = self.tokens.clone();
        t.sort_unstable();
        t
    }
}

/// Hashes every element into the group, applies `key` and shuffles with a
/// generator seeded by `seed`.
pub fn mask_set(elements: &[u64], key: &PartyKey, origin: usize, seed: u64) -> MaskedSet {
    let mut tokens: Vec<u64> = elements.iter().map(|&e| key.apply(hash_to_group(e))).collect();
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    MaskedSet { tokens, origin, layers: 1, permuted: true }
}

/// Adds one more key layer to an already masked set and reshuffles.
pub fn remask(set: &MaskedSet, key: &PartyKey, seed: u64) -> MaskedSet {
    let mut tokens: Vec<u64> = set.tokens.iter().map(|&t| key.apply(t)).collect();
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    MaskedSet { tokens, origin: set.origin, layers: set.layers + 1, permuted: true }
}

/// Full token of `element` under every key, independent of key order.
pub(crate) fn full_token(element: u64, keys: &[PartyKey]) -> u64 {
    keys.iter().fold(hash_to_group(element), |t, k| k.apply(t))
}

fn hash_to_group(element: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(HASH_DOMAIN);
    h.update(element.to_le_bytes());
    let bytes = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&bytes[..8]);
    let x = u64::from_le_bytes(word) % GROUP_MODULUS;
    // squaring lands in the prime-order subgroup
    mul_mod(x, x)
}

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % GROUP_MODULUS as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= GROUP_MODULUS;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}
