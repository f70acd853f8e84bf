//! Intersection cardinality over masked sets.
//!
//! Every party hashes its elements into a prime-order group and raises them
//! to its secret exponent. Exponentiation commutes, so once every set has
//! travelled the ring and been masked by every party, equal elements carry
//! equal tokens no matter which party started. Only masked, shuffled token
//! lists ever leave a party.

mod masking;
mod ring;

pub use masking::{mask_set, remask, MaskedSet, PartyKey, GROUP_MODULUS};
pub use ring::{
    collision_check, ring_intersection_count, CollisionVerdict, Message, ProtocolConfig, ProtocolTranscript,
};

use thiserror::Error;

use crate::datamodel::PartyId;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("a ring needs at least two parties, got {0}")]
    RingTooShort(usize),
    #[error("party {0} is in the ring but holds no set")]
    MissingParty(PartyId),
    #[error("party {0} appears twice in the ring")]
    DuplicateParty(PartyId),
    #[error("collision rate {rate} exceeds threshold {tau}")]
    Rejected { rate: f64, tau: f64 },
}
