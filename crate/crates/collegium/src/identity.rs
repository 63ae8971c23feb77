//! Key pairs, signatures, and content hashing.
//!
//! A person is a public key; everything a person does is signed, and
//! every artifact (papers, reviews, events, journals) is identified by
//! the SHA-256 of its canonical bytes. The signature scheme is pluggable:
//! `ed25519` is the realistic binding, `hmac-sha256` is a deliberately
//! insecure but fast scheme for property tests and large simulations
//! (its "public" key equals the secret, so anyone can verify — and
//! anyone can forge; never use it outside tests and local scenarios).

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer as _, Verifier as _};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::{Canon, Writer};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),
    #[error("unknown signature scheme `{0}`")]
    UnknownScheme(String),
    #[error("malformed {0}")]
    Malformed(&'static str),
}

/// 32-byte digest of canonical bytes. Hex rendering is lowercase and
/// fixed-width.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub const ZERO: ContentHash = ContentHash([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, IdentityError> {
        let raw = hex::decode(s).map_err(|_| IdentityError::Malformed("hex digest"))?;
        let arr: [u8; 32] = raw
            .try_into()
            .map_err(|_| IdentityError::Malformed("digest length"))?;
        Ok(ContentHash(arr))
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({}..)", &self.to_hex()[..12])
    }
}

impl FromStr for ContentHash {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl Canon for ContentHash {
    fn encode(&self, w: &mut Writer) {
        w.raw32(&self.0);
    }
}

/// SHA-256 over raw bytes. The empty input hashes to the standard
/// `e3b0c442…` vector.
pub fn content_hash(bytes: &[u8]) -> ContentHash {
    ContentHash(Sha256::digest(bytes).into())
}

/// Fingerprint of a public key; the stable identity of a person.
/// Byte-lexicographic order on fingerprints is the tie-break order used
/// throughout the protocol.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PersonId(pub [u8; 32]);

impl PersonId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, IdentityError> {
        Ok(PersonId(ContentHash::from_hex(s)?.0))
    }

    /// Short prefix for human-facing listings.
    pub fn short(&self) -> String {
        self.to_hex()[..12].to_string()
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PersonId({}..)", self.short())
    }
}

impl Canon for PersonId {
    fn encode(&self, w: &mut Writer) {
        w.raw32(&self.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Ed25519,
    HmacSha256,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Ed25519 => "ed25519",
            Scheme::HmacSha256 => "hmac-sha256",
        }
    }
}

impl FromStr for Scheme {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed25519" => Ok(Scheme::Ed25519),
            "hmac-sha256" => Ok(Scheme::HmacSha256),
            other => Err(IdentityError::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone)]
pub struct KeyPair {
    pub scheme: Scheme,
    pub public: Vec<u8>,
    pub secret: Vec<u8>,
}

impl KeyPair {
    pub fn person_id(&self) -> PersonId {
        person_id_of(self.scheme, &self.public)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Secrets stay out of debug output.
        write!(f, "KeyPair({}, {})", self.scheme, self.person_id().short())
    }
}

/// Fingerprint derivation: a pure function of (scheme, public key).
pub fn person_id_of(scheme: Scheme, public: &[u8]) -> PersonId {
    let mut w = Writer::new();
    w.str("person");
    w.str(scheme.as_str());
    w.bytes(public);
    PersonId(content_hash(&w.into_bytes()).0)
}

/// Deterministic key generation: the same seed always yields the same
/// pair, distinct seeds yield distinct fingerprints.
pub fn keygen(scheme: Scheme, seed: [u8; 32]) -> KeyPair {
    match scheme {
        Scheme::Ed25519 => {
            let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
            KeyPair {
                scheme,
                public: sk.verifying_key().to_bytes().to_vec(),
                secret: seed.to_vec(),
            }
        }
        Scheme::HmacSha256 => KeyPair {
            scheme,
            // public == secret: verification recomputes the MAC.
            public: seed.to_vec(),
            secret: seed.to_vec(),
        },
    }
}

/// A detached signature: who signed, over what digest, and the raw
/// scheme-specific bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureRecord {
    pub signer: PersonId,
    pub payload_hash: ContentHash,
    pub bytes: Vec<u8>,
}

impl Canon for SignatureRecord {
    fn encode(&self, w: &mut Writer) {
        self.signer.encode(w);
        self.payload_hash.encode(w);
        w.bytes(&self.bytes);
    }
}

/// Hash-then-sign over the message's SHA-256.
pub fn sign(key: &KeyPair, message: &[u8]) -> Result<SignatureRecord, IdentityError> {
    let payload_hash = content_hash(message);
    let bytes = match key.scheme {
        Scheme::Ed25519 => {
            let seed: [u8; 32] = key
                .secret
                .as_slice()
                .try_into()
                .map_err(|_| IdentityError::InvalidKey("ed25519 secret must be 32 bytes"))?;
            let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
            sk.sign(payload_hash.as_bytes()).to_bytes().to_vec()
        }
        Scheme::HmacSha256 => hmac_tag(&key.secret, payload_hash.as_bytes())?,
    };
    Ok(SignatureRecord {
        signer: key.person_id(),
        payload_hash,
        bytes,
    })
}

/// Verify a signature against a public key. Returns `Ok(false)` for a
/// well-formed but non-matching signature; `Err` for malformed keys.
pub fn verify(
    scheme: Scheme,
    public: &[u8],
    message: &[u8],
    sig: &SignatureRecord,
) -> Result<bool, IdentityError> {
    if sig.signer != person_id_of(scheme, public) {
        return Ok(false);
    }
    let payload_hash = content_hash(message);
    if payload_hash != sig.payload_hash {
        return Ok(false);
    }
    verify_digest(scheme, public, &payload_hash, &sig.bytes)
}

/// Verify raw signature bytes over an already-computed digest.
pub fn verify_digest(
    scheme: Scheme,
    public: &[u8],
    digest: &ContentHash,
    sig_bytes: &[u8],
) -> Result<bool, IdentityError> {
    match scheme {
        Scheme::Ed25519 => {
            let pk_arr: [u8; 32] = public
                .try_into()
                .map_err(|_| IdentityError::InvalidKey("ed25519 public must be 32 bytes"))?;
            let vk = ed25519_dalek::VerifyingKey::from_bytes(&pk_arr)
                .map_err(|_| IdentityError::InvalidKey("not a valid ed25519 point"))?;
            let Ok(sig_arr) = <&[u8; 64]>::try_from(sig_bytes) else {
                return Ok(false);
            };
            let sig = ed25519_dalek::Signature::from_bytes(sig_arr);
            Ok(vk.verify(digest.as_bytes(), &sig).is_ok())
        }
        Scheme::HmacSha256 => Ok(hmac_tag(public, digest.as_bytes())? == sig_bytes),
    }
}

fn hmac_tag(key: &[u8], msg: &[u8]) -> Result<Vec<u8>, IdentityError> {
    let mut mac = Hmac::<Sha256>::new_from_slice(key)
        .map_err(|_| IdentityError::InvalidKey("hmac key"))?;
    mac.update(msg);
    Ok(mac.finalize().into_bytes().to_vec())
}

/// A registered public key plus its institutional attestation flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisteredKey {
    pub scheme: Scheme,
    pub public: Vec<u8>,
    pub validated: bool,
}

impl Canon for RegisteredKey {
    fn encode(&self, w: &mut Writer) {
        w.str(self.scheme.as_str());
        w.bytes(&self.public);
        w.bool(self.validated);
    }
}

/// The key registry: fingerprint → registered key. Whether a key is
/// "validated" is an attestation carried alongside it; who may attest
/// is a scenario-level choice, not enforced here.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyRegistry {
    keys: std::collections::BTreeMap<PersonId, RegisteredKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, person: &PersonId) -> bool {
        self.keys.contains_key(person)
    }

    pub fn get(&self, person: &PersonId) -> Option<&RegisteredKey> {
        self.keys.get(person)
    }

    pub fn insert(&mut self, person: PersonId, key: RegisteredKey) {
        self.keys.insert(person, key);
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PersonId, &RegisteredKey)> {
        self.keys.iter()
    }

    /// Verify a signature record against the signer's registered key.
    pub fn verify_record(&self, message: &[u8], sig: &SignatureRecord) -> bool {
        match self.keys.get(&sig.signer) {
            Some(reg) => verify(reg.scheme, &reg.public, message, sig).unwrap_or(false),
            None => false,
        }
    }

    /// One line per key: `fingerprint_hex scheme pubkey_hex validated`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (person, key) in &self.keys {
            out.push_str(&format!(
                "{} {} {} {}\n",
                person.to_hex(),
                key.scheme,
                hex::encode(&key.public),
                key.validated
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, IdentityError> {
        let mut reg = Self::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(fp), Some(scheme), Some(pk), Some(validated)) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(IdentityError::Malformed("registry line"));
            };
            let person = PersonId::from_hex(fp)?;
            let scheme: Scheme = scheme.parse()?;
            let public = hex::decode(pk).map_err(|_| IdentityError::Malformed("pubkey hex"))?;
            let validated = match validated {
                "true" => true,
                "false" => false,
                _ => return Err(IdentityError::Malformed("validated flag")),
            };
            if person != person_id_of(scheme, &public) {
                return Err(IdentityError::Malformed("fingerprint mismatch"));
            }
            reg.insert(
                person,
                RegisteredKey {
                    scheme,
                    public,
                    validated,
                },
            );
        }
        Ok(reg)
    }
}

impl Canon for KeyRegistry {
    fn encode(&self, w: &mut Writer) {
        w.seq(self.keys.len());
        for (person, key) in &self.keys {
            person.encode(w);
            key.encode(w);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seed(n: u8) -> [u8; 32] {
        let mut s = [0u8; 32];
        s[0] = n;
        s
    }

    #[test]
    fn keygen_is_deterministic_and_injective() {
        for scheme in [Scheme::Ed25519, Scheme::HmacSha256] {
            let a1 = keygen(scheme, seed(0));
            let a2 = keygen(scheme, seed(0));
            let b = keygen(scheme, seed(1));
            assert_eq!(a1.person_id(), a2.person_id());
            assert_ne!(a1.person_id(), b.person_id());
        }
    }

    #[test]
    fn sign_verify_round_trip() {
        for scheme in [Scheme::Ed25519, Scheme::HmacSha256] {
            let k = keygen(scheme, seed(3));
            let sig = sign(&k, b"x").unwrap();
            assert!(verify(scheme, &k.public, b"x", &sig).unwrap());
            assert!(!verify(scheme, &k.public, b"y", &sig).unwrap());
            let other = keygen(scheme, seed(4));
            assert!(!verify(scheme, &other.public, b"x", &sig).unwrap());
        }
    }

    #[test]
    fn malformed_ed25519_key_is_invalid() {
        let k = keygen(Scheme::Ed25519, seed(5));
        let sig = sign(&k, b"m").unwrap();
        let err = verify_digest(Scheme::Ed25519, &[1, 2, 3], &sig.payload_hash, &sig.bytes);
        assert!(matches!(err, Err(IdentityError::InvalidKey(_))));
    }

    #[test]
    fn empty_input_digest_matches_reference_vector() {
        // Published SHA-256 digest of the empty string.
        assert_eq!(
            content_hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hash_changes_with_any_extension() {
        let h = content_hash(b"paper");
        assert_eq!(h, content_hash(b"paper"));
        assert_ne!(h, content_hash(b"paper\0"));
    }

    #[test]
    fn registry_text_round_trips() {
        let mut reg = KeyRegistry::new();
        for (i, scheme) in [(1u8, Scheme::Ed25519), (2, Scheme::HmacSha256)] {
            let k = keygen(scheme, seed(i));
            reg.insert(
                k.person_id(),
                RegisteredKey {
                    scheme,
                    public: k.public.clone(),
                    validated: i == 1,
                },
            );
        }
        let text = reg.to_text();
        assert_eq!(KeyRegistry::from_text(&text).unwrap(), reg);
    }

    #[test]
    fn registry_rejects_tampered_fingerprint() {
        let k = keygen(Scheme::Ed25519, seed(7));
        let line = format!(
            "{} ed25519 {} true\n",
            PersonId([9u8; 32]).to_hex(),
            hex::encode(&k.public)
        );
        assert!(KeyRegistry::from_text(&line).is_err());
    }

    proptest! {
        #[test]
        fn any_message_round_trips_and_mutation_breaks(
            msg in proptest::collection::vec(any::<u8>(), 1..64),
            flip_byte in 0usize..64,
            flip_bit in 0u8..8,
        ) {
            let k = keygen(Scheme::HmacSha256, seed(9));
            let sig = sign(&k, &msg).unwrap();
            prop_assert!(verify(Scheme::HmacSha256, &k.public, &msg, &sig).unwrap());

            let mut mutated = msg.clone();
            let i = flip_byte % mutated.len();
            mutated[i] ^= 1 << flip_bit;
            prop_assert!(!verify(Scheme::HmacSha256, &k.public, &mutated, &sig).unwrap());
        }
    }
}
