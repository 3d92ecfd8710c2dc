//! 2HashDH oblivious PRF over ristretto255.
//!
//! `F_k(x) = H2(x, H1(x)^k)`. The client blinds `H1(x)` with a random
//! factor, the server raises the blinded element to its key, and the client
//! strips the factor before applying `H2`. `H2` is pluggable through
//! [`OutputHash`] so the rate-limiting back-ends can slot in without changing
//! the rest of the protocol.

use std::fmt;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar as DalekScalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;

/// Identifier of the blessed group, recorded in store headers.
pub const GROUP_ID: u8 = 1;
/// Human readable group name, echoed to clients.
pub const GROUP_NAME: &str = "ristretto255";
/// Domain-separation labels used by this deployment. They are recorded in the
/// store header; other deployments choosing different labels are not
/// interoperable with this one.
pub const DOMAIN_LABELS: &str = "MIGP-v1";

const H1_LABEL: &[u8] = b"MIGP-v1/H1";
const H2_LABEL: &[u8] = b"MIGP-v1/H2";
const H1_MAX_ATTEMPTS: u32 = 256;

/// Length of a canonical group element encoding.
pub const ELEMENT_LEN: usize = 32;
/// Length of a PRF output in bytes (128 bits).
pub const OUTPUT_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OprfError {
    #[error("PRF input must be nonempty")]
    EmptyInput,
    #[error("username is too long to frame ({0} bytes)")]
    InputTooLong(usize),
    #[error("hash to group did not produce a valid element")]
    HashToGroupExhausted,
    #[error("malformed group element encoding")]
    InvalidElement,
    #[error("scalar must be canonical and nonzero")]
    InvalidScalar,
    #[error("PRF output must be {OUTPUT_LEN} bytes, got {0}")]
    InvalidOutputLength(usize),
}

/// An element of the prime-order group, never the identity when produced by
/// [`hash_to_group`].
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(RistrettoPoint);

impl GroupElement {
    pub fn to_bytes(&self) -> [u8; ELEMENT_LEN] {
        self.0.compress().to_bytes()
    }

    /// Decodes a canonical compressed encoding. The identity is rejected
    /// since no honest party ever sends it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OprfError> {
        let compressed =
            CompressedRistretto::from_slice(bytes).map_err(|_| OprfError::InvalidElement)?;
        let point = compressed.decompress().ok_or(OprfError::InvalidElement)?;
        if point == RistrettoPoint::identity() {
            return Err(OprfError::InvalidElement);
        }
        Ok(GroupElement(point))
    }

    /// Exponentiation, written multiplicatively as in the protocol.
    pub fn pow(&self, exponent: &Scalar) -> GroupElement {
        GroupElement(self.0 * exponent.0)
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", hex::encode(self.to_bytes()))
    }
}

/// A nonzero scalar modulo the group order.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(DalekScalar);

impl Scalar {
    /// Samples uniformly from `[2, q-1]`. Zero would destroy invertibility and
    /// one would leave the element unblinded.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = DalekScalar::random(rng);
            if s != DalekScalar::ZERO && s != DalekScalar::ONE {
                return Scalar(s);
            }
        }
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, OprfError> {
        let s: Option<DalekScalar> = DalekScalar::from_canonical_bytes(*bytes).into();
        match s {
            Some(s) if s != DalekScalar::ZERO => Ok(Scalar(s)),
            _ => Err(OprfError::InvalidScalar),
        }
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn invert(&self) -> Scalar {
        Scalar(self.0.invert())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 * other.0)
    }

    /// Small scalars are only meaningful for test vectors (identity key, unit
    /// blinding factor). Production code samples with [`Scalar::random`].
    #[cfg(test)]
    pub(crate) fn from_u64(v: u64) -> Scalar {
        assert!(v != 0);
        Scalar(DalekScalar::from(v))
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// The server's OPRF key together with its rotation epoch.
#[derive(Clone, PartialEq, Eq)]
pub struct PrfKey {
    key: Scalar,
    epoch: u64,
}

impl PrfKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        PrfKey {
            key: Scalar::random(rng),
            epoch: 0,
        }
    }

    pub fn from_parts(key: Scalar, epoch: u64) -> Self {
        PrfKey { key, epoch }
    }

    /// A fresh key for the next epoch.
    pub fn rotate<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self {
        PrfKey {
            key: Scalar::random(rng),
            epoch: self.epoch + 1,
        }
    }

    pub fn scalar(&self) -> &Scalar {
        &self.key
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

impl fmt::Debug for PrfKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrfKey")
            .field("epoch", &self.epoch)
            .finish_non_exhaustive()
    }
}

/// A 128-bit PRF output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrfOutput([u8; OUTPUT_LEN]);

impl PrfOutput {
    pub fn new(bytes: [u8; OUTPUT_LEN]) -> Self {
        PrfOutput(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, OprfError> {
        let arr: [u8; OUTPUT_LEN] = bytes
            .try_into()
            .map_err(|_| OprfError::InvalidOutputLength(bytes.len()))?;
        Ok(PrfOutput(arr))
    }

    pub fn as_bytes(&self) -> &[u8; OUTPUT_LEN] {
        &self.0
    }

    /// First `OUTPUT_LEN` bytes of a longer digest.
    pub fn truncate(digest: &[u8]) -> Self {
        let mut out = [0u8; OUTPUT_LEN];
        out.copy_from_slice(&digest[..OUTPUT_LEN]);
        PrfOutput(out)
    }
}

impl fmt::Debug for PrfOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrfOutput({})", hex::encode(self.0))
    }
}

/// The `H2` slot of the PRF. Implementations must be deterministic functions
/// of the message.
pub trait OutputHash: Send + Sync {
    fn digest(&self, msg: &[u8]) -> PrfOutput;
}

/// SHA-256 with a domain label, truncated to 128 bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct FastHash;

impl OutputHash for FastHash {
    fn digest(&self, msg: &[u8]) -> PrfOutput {
        let d = Sha256::new().chain_update(H2_LABEL).chain_update(msg).finalize();
        PrfOutput::truncate(&d)
    }
}

/// Injective framing of a credential: `len(u) as u16 BE || u || w`.
pub fn frame_credential(username: &str, password: &str) -> Result<Vec<u8>, OprfError> {
    let ulen = u16::try_from(username.len()).map_err(|_| OprfError::InputTooLong(username.len()))?;
    let mut out = Vec::with_capacity(2 + username.len() + password.len());
    out.extend_from_slice(&ulen.to_be_bytes());
    out.extend_from_slice(username.as_bytes());
    out.extend_from_slice(password.as_bytes());
    Ok(out)
}

/// The byte string handed to `H2`: the input (length-prefixed) followed by the
/// canonical encoding of the unblinded element.
pub fn h2_message(input: &[u8], element: &GroupElement) -> Vec<u8> {
    let mut msg = Vec::with_capacity(4 + input.len() + ELEMENT_LEN);
    msg.extend_from_slice(&(input.len() as u32).to_be_bytes());
    msg.extend_from_slice(input);
    msg.extend_from_slice(&element.to_bytes());
    msg
}

/// `H1`: SHA-512 based map to ristretto255 with a retry counter. The map
/// practically never yields the identity, but the loop is bounded and fails
/// closed.
pub fn hash_to_group(input: &[u8]) -> Result<GroupElement, OprfError> {
    if input.is_empty() {
        return Err(OprfError::EmptyInput);
    }
    for attempt in 0..H1_MAX_ATTEMPTS {
        let hasher = Sha512::new()
            .chain_update(H1_LABEL)
            .chain_update((attempt as u8).to_be_bytes())
            .chain_update(input);
        let point = RistrettoPoint::from_hash(hasher);
        if point != RistrettoPoint::identity() {
            return Ok(GroupElement(point));
        }
    }
    Err(OprfError::HashToGroupExhausted)
}

pub fn blind<R: RngCore + CryptoRng>(
    input: &[u8],
    rng: &mut R,
) -> Result<(GroupElement, Scalar), OprfError> {
    let factor = Scalar::random(rng);
    Ok((blind_with_factor(input, &factor)?, factor))
}

pub fn blind_with_factor(input: &[u8], factor: &Scalar) -> Result<GroupElement, OprfError> {
    Ok(hash_to_group(input)?.pow(factor))
}

pub fn evaluate(key: &PrfKey, element: &GroupElement) -> GroupElement {
    element.pow(&key.key)
}

/// Decodes and evaluates a serialized element.
pub fn evaluate_bytes(key: &PrfKey, element: &[u8]) -> Result<GroupElement, OprfError> {
    Ok(evaluate(key, &GroupElement::from_bytes(element)?))
}

/// Removes the blinding factor: `evaluated^(1/factor)`.
pub fn unblind(evaluated: &GroupElement, factor: &Scalar) -> GroupElement {
    evaluated.pow(&factor.invert())
}

pub fn finalize(input: &[u8], evaluated: &GroupElement, factor: &Scalar) -> PrfOutput {
    finalize_with(&FastHash, input, evaluated, factor)
}

pub fn finalize_with<H: OutputHash + ?Sized>(
    h2: &H,
    input: &[u8],
    evaluated: &GroupElement,
    factor: &Scalar,
) -> PrfOutput {
    h2.digest(&h2_message(input, &unblind(evaluated, factor)))
}

/// `H1(x)^k`, the value kept in the rotation sidecar.
pub fn keyed_element(key: &PrfKey, input: &[u8]) -> Result<GroupElement, OprfError> {
    Ok(hash_to_group(input)?.pow(&key.key))
}

pub fn direct_prf(key: &PrfKey, input: &[u8]) -> Result<PrfOutput, OprfError> {
    direct_prf_with(&FastHash, key, input)
}

pub fn direct_prf_with<H: OutputHash + ?Sized>(
    h2: &H,
    key: &PrfKey,
    input: &[u8],
) -> Result<PrfOutput, OprfError> {
    let element = keyed_element(key, input)?;
    Ok(h2.digest(&h2_message(input, &element)))
}

/// Flips the final bit of the output, marking a stored variant.
pub fn variant_tag(out: &PrfOutput) -> PrfOutput {
    let mut bytes = out.0;
    bytes[OUTPUT_LEN - 1] ^= 1;
    PrfOutput(bytes)
}

/// Re-keys a stored `H1(x)^old` to `H1(x)^new` by raising it to `new/old`.
pub fn rotate_stored(old: &PrfKey, new: &PrfKey, stored: &GroupElement) -> GroupElement {
    stored.pow(&rotation_exponent(old, new))
}

/// `new * old^-1 mod q`, shared across a whole store rotation.
pub fn rotation_exponent(old: &PrfKey, new: &PrfKey) -> Scalar {
    new.key.mul(&old.key.invert())
}
