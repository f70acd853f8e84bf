use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use rand::RngCore;
use ring::aead::{Aad, LessSafeKey, Nonce, UnboundKey, CHACHA20_POLY1305, NONCE_LEN};
use serde::{Deserialize, Serialize};

use super::execute::QueryOutput;
use super::QueryError;

const TAG_LEN: usize = 16;
const AAD: &[u8] = b"fedmdl/answer/v1";

/// The key holder's 256-bit symmetric key.
#[derive(Clone, PartialEq, Eq)]
pub struct UserKey([u8; 32]);

impl UserKey {
    pub fn generate(rng: &mut impl RngCore) -> Self {
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        UserKey(k)
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        UserKey(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, QueryError> {
        let bytes = hex::decode(text.trim()).map_err(|e| QueryError::BadKey(e.to_string()))?;
        let arr: [u8; 32] =
            bytes.try_into().map_err(|b: Vec<u8>| QueryError::BadKey(format!("{} bytes, need 32", b.len())))?;
        Ok(UserKey(arr))
    }

    fn aead(&self) -> LessSafeKey {
        LessSafeKey::new(UnboundKey::new(&CHACHA20_POLY1305, &self.0).expect("32-byte key"))
    }
}

impl fmt::Debug for UserKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("UserKey(..)")
    }
}

/// An encrypted answer: the result rows and their symbol table, sealed
/// with ChaCha20-Poly1305.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub nonce: [u8; NONCE_LEN],
    pub tag: [u8; TAG_LEN],
    pub ciphertext: Vec<u8>,
}

impl QueryAnswer {
    /// `nonce(12) || tag(16) || ciphertext`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NONCE_LEN + TAG_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.tag);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, QueryError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(QueryError::MalformedAnswer(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let (nonce, rest) = bytes.split_at(NONCE_LEN);
        let (tag, ciphertext) = rest.split_at(TAG_LEN);
        Ok(QueryAnswer {
            nonce: nonce.try_into().expect("split"),
            tag: tag.try_into().expect("split"),
            ciphertext: ciphertext.to_vec(),
        })
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(text: &str) -> Result<Self, QueryError> {
        let bytes = STANDARD.decode(text.trim()).map_err(|e| QueryError::MalformedAnswer(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

/// Seals `output` for the holder of `key` under a fresh nonce from `rng`.
pub fn encrypt_answer(output: &QueryOutput, key: &UserKey, rng: &mut impl RngCore) -> QueryAnswer {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut buf = serde_json::to_vec(output).expect("answers serialize");
    let tag = key
        .aead()
        .seal_in_place_separate_tag(Nonce::assume_unique_for_key(nonce), Aad::from(AAD), &mut buf)
        .expect("message length is within limits");
    QueryAnswer { nonce, tag: tag.as_ref().try_into().expect("16-byte tag"), ciphertext: buf }
}

/// Verifies the tag and recovers the output. Any failure yields no
/// plaintext at all.
pub fn decrypt_answer(answer: &QueryAnswer, key: &UserKey) -> Result<QueryOutput, QueryError> {
    let mut buf = answer.ciphertext.clone();
    buf.extend_from_slice(&answer.tag);
    let plain = key
        .aead()
        .open_in_place(Nonce::assume_unique_for_key(answer.nonce), Aad::from(AAD), &mut buf)
        .map_err(|_| QueryError::Authentication)?;
    serde_json::from_slice(plain).map_err(|e| QueryError::MalformedAnswer(e.to_string()))
}
