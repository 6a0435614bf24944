//! Simulated homomorphic evaluation backend.
//!
//! Ciphertexts are opaque handles around a hidden plaintext. Hiding is
//! enforced by API discipline, NOT by cryptography: the plaintext is a
//! private field that can only be recovered through [`decrypt`] with the
//! matching [`KeyPair`], and the evaluation API never exposes it. This gives
//! the functional semantics of an FHE scheme (additions and multiplications
//! over encrypted values, key isolation, SIMD slots with a multiplicative
//! depth budget) with fully deterministic, testable behavior.
//!
//! Nothing in this module provides confidentiality against an adversary with
//! memory access. A real FHE library could be substituted behind the same
//! surface; shipping such a binding is out of scope.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NEXT_KEY_ID: AtomicU64 = AtomicU64::new(1);
static NEXT_HANDLE: AtomicU64 = AtomicU64::new(1);

/// What a key (and the ciphertexts under it) carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyKind {
    /// Single bit slots. Plaintexts are encrypted from {0,1} but ring
    /// evaluation may leave that set (e.g. 1+1 = 2); the blind operators are
    /// responsible for staying Boolean.
    Bit,
    /// Word slots, arithmetic mod `modulus` (a power of two).
    Word { modulus: u64 },
    /// SIMD slots: a fixed-length vector of reals with a multiplicative
    /// depth budget standing in for rescaling levels.
    Simd { depth_budget: u32 },
}

/// Slot metadata carried by a ciphertext. Public: inspecting it reveals
/// layout, never values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Bit,
    Word { modulus: u64 },
    Simd { slots: usize, depth_left: u32 },
}

/// Hidden plaintext forms, reachable only through [`decrypt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Plaintext {
    Bit(i64),
    Word(u64),
    Simd(Vec<f64>),
}

/// Key material: `key_id` identifies the evaluation context, the secret half
/// is the decryption capability. [`KeyPair::public_ops`] hands out the
/// evaluation-only capability given to servers; it cannot decrypt and cannot
/// encrypt fresh values.
pub struct KeyPair {
    key_id: u64,
    kind: KeyKind,
}

/// Evaluation-only capability for one key context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicOps {
    pub key_id: u64,
}

impl KeyPair {
    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn public_ops(&self) -> PublicOps {
        PublicOps { key_id: self.key_id }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("key_id", &self.key_id)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Opaque handle to a hidden plaintext under one key.
///
/// Clone is cheap (the hidden value is shared); ciphertexts are immutable
/// values safe to hand between threads. The `Debug` form shows handle and
/// slot metadata only.
#[derive(Clone, Serialize, Deserialize)]
pub struct Ciphertext {
    handle: u64,
    key_id: u64,
    slot_kind: SlotKind,
    hidden: Arc<Plaintext>,
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ciphertext")
            .field("handle", &self.handle)
            .field("key_id", &self.key_id)
            .field("slot_kind", &self.slot_kind)
            .finish()
    }
}

impl Ciphertext {
    pub fn handle(&self) -> u64 {
        self.handle
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn slot_kind(&self) -> SlotKind {
        self.slot_kind
    }

    fn fresh(key_id: u64, slot_kind: SlotKind, hidden: Plaintext) -> Ciphertext {
        Ciphertext {
            handle: NEXT_HANDLE.fetch_add(1, Ordering::Relaxed),
            key_id,
            slot_kind,
            hidden: Arc::new(hidden),
        }
    }
}

/// Evaluation gates. `MulConst` is the only gate carrying cleartext data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalGate {
    Add,
    Sub,
    Mul,
    MulConst(i64),
}

/// Create a fresh key context.
///
/// Word keys require a power-of-two modulus of at least 4 so every layout's
/// encoded words fit; SIMD keys require a positive depth budget.
pub fn keygen(kind: KeyKind) -> Result<KeyPair> {
    match kind {
        KeyKind::Bit => {}
        KeyKind::Word { modulus } => {
            if modulus < 4 || !modulus.is_power_of_two() {
                return Err(Error::InvalidParams(format!(
                    "word modulus must be a power of two >= 4, got {modulus}"
                )));
            }
        }
        KeyKind::Simd { depth_budget } => {
            if depth_budget == 0 {
                return Err(Error::InvalidParams("simd depth budget must be >= 1".into()));
            }
        }
    }
    Ok(KeyPair {
        key_id: NEXT_KEY_ID.fetch_add(1, Ordering::Relaxed),
        kind,
    })
}

/// Encrypt a plaintext under `kp`. Distinct calls yield distinct handles even
/// for equal plaintexts.
pub fn encrypt(kp: &KeyPair, value: Plaintext) -> Result<Ciphertext> {
    let slot_kind = match (kp.kind, &value) {
        (KeyKind::Bit, Plaintext::Bit(b)) => {
            if *b != 0 && *b != 1 {
                return Err(Error::OutOfDomain(format!("bit plaintext must be 0 or 1, got {b}")));
            }
            SlotKind::Bit
        }
        (KeyKind::Word { modulus }, Plaintext::Word(w)) => {
            if *w >= modulus {
                return Err(Error::OutOfDomain(format!(
                    "word plaintext {w} out of range for modulus {modulus}"
                )));
            }
            SlotKind::Word { modulus }
        }
        (KeyKind::Simd { depth_budget }, Plaintext::Simd(v)) => {
            if v.is_empty() {
                return Err(Error::OutOfDomain("simd plaintext must be non-empty".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::OutOfDomain("simd plaintext values must be finite".into()));
            }
            SlotKind::Simd { slots: v.len(), depth_left: depth_budget }
        }
        _ => {
            return Err(Error::SlotMismatch(format!(
                "plaintext form does not match key kind {:?}",
                kp.kind
            )))
        }
    };
    Ok(Ciphertext::fresh(kp.key_id, slot_kind, value))
}

/// Decrypt a ciphertext. This is the single enforcement point of the access
/// discipline: the key ids must match.
pub fn decrypt(kp: &KeyPair, ct: &Ciphertext) -> Result<Plaintext> {
    if kp.key_id != ct.key_id {
        return Err(Error::KeyMismatch { ct_key: ct.key_id, op_key: kp.key_id });
    }
    Ok((*ct.hidden).clone())
}

fn check_same_context(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.key_id != b.key_id {
        return Err(Error::KeyMismatch { ct_key: b.key_id, op_key: a.key_id });
    }
    match (a.slot_kind, b.slot_kind) {
        (SlotKind::Bit, SlotKind::Bit) => Ok(()),
        (SlotKind::Word { modulus: ma }, SlotKind::Word { modulus: mb }) if ma == mb => Ok(()),
        (SlotKind::Simd { slots: sa, .. }, SlotKind::Simd { slots: sb, .. }) if sa == sb => Ok(()),
        (ka, kb) => Err(Error::SlotMismatch(format!("{ka:?} vs {kb:?}"))),
    }
}

fn word_mul_const(value: u64, c: i64, modulus: u64) -> u64 {
    let c = c.rem_euclid(modulus as i64) as u64;
    ((value as u128 * c as u128) % modulus as u128) as u64
}

/// Apply an evaluation gate. Binary gates require both operands under the
/// same key and slot kind; `MulConst` takes a single operand.
pub fn eval(gate: EvalGate, a: &Ciphertext, b: Option<&Ciphertext>) -> Result<Ciphertext> {
    match gate {
        EvalGate::MulConst(c) => {
            if b.is_some() {
                return Err(Error::SlotMismatch("mul_const takes one ciphertext".into()));
            }
            let hidden = match (&*a.hidden, a.slot_kind) {
                (Plaintext::Bit(x), SlotKind::Bit) => Plaintext::Bit(x.wrapping_mul(c)),
                (Plaintext::Word(x), SlotKind::Word { modulus }) => {
                    Plaintext::Word(word_mul_const(*x, c, modulus))
                }
                (Plaintext::Simd(v), SlotKind::Simd { .. }) => {
                    Plaintext::Simd(v.iter().map(|x| x * c as f64).collect())
                }
                _ => unreachable!("slot kind always matches hidden form"),
            };
            Ok(Ciphertext::fresh(a.key_id, a.slot_kind, hidden))
        }
        EvalGate::Add | EvalGate::Sub | EvalGate::Mul => {
            let b = b.ok_or_else(|| Error::SlotMismatch("binary gate needs two ciphertexts".into()))?;
            check_same_context(a, b)?;
            let (slot_kind, hidden) = match (&*a.hidden, &*b.hidden, a.slot_kind, b.slot_kind) {
                (Plaintext::Bit(x), Plaintext::Bit(y), SlotKind::Bit, _) => {
                    let r = match gate {
                        EvalGate::Add => x.wrapping_add(*y),
                        EvalGate::Sub => x.wrapping_sub(*y),
                        EvalGate::Mul => x.wrapping_mul(*y),
                        EvalGate::MulConst(_) => unreachable!(),
                    };
                    (SlotKind::Bit, Plaintext::Bit(r))
                }
                (Plaintext::Word(x), Plaintext::Word(y), SlotKind::Word { modulus }, _) => {
                    let m = modulus as u128;
                    let r = match gate {
                        EvalGate::Add => ((*x as u128 + *y as u128) % m) as u64,
                        EvalGate::Sub => ((*x as u128 + m - *y as u128 % m) % m) as u64,
                        EvalGate::Mul => ((*x as u128 * *y as u128) % m) as u64,
                        EvalGate::MulConst(_) => unreachable!(),
                    };
                    (SlotKind::Word { modulus }, Plaintext::Word(r))
                }
                (
                    Plaintext::Simd(x),
                    Plaintext::Simd(y),
                    SlotKind::Simd { slots, depth_left: da },
                    SlotKind::Simd { depth_left: db, .. },
                ) => {
                    let depth = da.min(db);
                    let depth_left = if gate == EvalGate::Mul {
                        if depth == 0 {
                            return Err(Error::DepthExhausted);
                        }
                        depth - 1
                    } else {
                        depth
                    };
                    let r: Vec<f64> = x
                        .iter()
                        .zip(y.iter())
                        .map(|(p, q)| match gate {
                            EvalGate::Add => p + q,
                            EvalGate::Sub => p - q,
                            EvalGate::Mul => p * q,
                            EvalGate::MulConst(_) => unreachable!(),
                        })
                        .collect();
                    (SlotKind::Simd { slots, depth_left }, Plaintext::Simd(r))
                }
                _ => unreachable!("check_same_context filtered mismatches"),
            };
            Ok(Ciphertext::fresh(a.key_id, slot_kind, hidden))
        }
    }
}

pub fn eval_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    eval(EvalGate::Add, a, Some(b))
}

pub fn eval_sub(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    eval(EvalGate::Sub, a, Some(b))
}

pub fn eval_mul(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    eval(EvalGate::Mul, a, Some(b))
}

pub fn eval_mul_const(a: &Ciphertext, c: i64) -> Result<Ciphertext> {
    eval(EvalGate::MulConst(c), a, None)
}

/// Trusted word-to-bits bridge.
///
/// Produces word-slot ciphertexts holding the 0/1 values of bits
/// `[lo, hi)` of the hidden word. This is the enclave capability: only the
/// trusted components (the addition blackbox and the LUT applicators) may
/// bridge word and bit views, and the crate never exports it.
pub(crate) fn trusted_word_bits(ct: &Ciphertext, lo: usize, hi: usize) -> Result<Vec<Ciphertext>> {
    let (value, modulus) = match (&*ct.hidden, ct.slot_kind) {
        (Plaintext::Word(w), SlotKind::Word { modulus }) => (*w, modulus),
        _ => return Err(Error::SlotMismatch("bit bridge requires a word ciphertext".into())),
    };
    (lo..hi)
        .map(|j| {
            let bit = (value >> j) & 1;
            Ok(Ciphertext::fresh(
                ct.key_id,
                SlotKind::Word { modulus },
                Plaintext::Word(bit),
            ))
        })
        .collect()
}

/// Decrypt helpers for the common slot kinds.
pub fn decrypt_word(kp: &KeyPair, ct: &Ciphertext) -> Result<u64> {
    match decrypt(kp, ct)? {
        Plaintext::Word(w) => Ok(w),
        other => Err(Error::SlotMismatch(format!("expected word plaintext, got {other:?}"))),
    }
}

pub fn decrypt_bit(kp: &KeyPair, ct: &Ciphertext) -> Result<i64> {
    match decrypt(kp, ct)? {
        Plaintext::Bit(b) => Ok(b),
        other => Err(Error::SlotMismatch(format!("expected bit plaintext, got {other:?}"))),
    }
}

pub fn decrypt_simd(kp: &KeyPair, ct: &Ciphertext) -> Result<Vec<f64>> {
    match decrypt(kp, ct)? {
        Plaintext::Simd(v) => Ok(v),
        other => Err(Error::SlotMismatch(format!("expected simd plaintext, got {other:?}"))),
    }
}
