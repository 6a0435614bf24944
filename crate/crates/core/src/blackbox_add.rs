//! The trusted addition blackbox: the only arithmetic primitive a restricted
//! server may invoke on fingerprinted words.
//!
//! The blackbox adds two encoded words and nullifies the result (replaces it
//! with an encryption of 0) when the addition produces carries the active
//! mode forbids: in `CompleteBinary` mode any carry inside the fingerprint
//! section or out of it, in `IntegerFp` mode only the carry out of the
//! section. A carry out of the top of the computation part nullifies in both
//! modes. Detection is computed homomorphically: section carries are
//! OR-folded, negated, and multiplied into the addition result.
//!
//! This module is a trust boundary. It (and the LUT applicator) may bridge
//! word and bit views through the crate-private enclave capability; the
//! untrusted server code only ever sees the word-level entry points.

use serde::{Deserialize, Serialize};

use crate::blind_ops::{blind_if, blind_or, extract_one};
use crate::error::{Error, Result};
use crate::fingerprint::{EncodedWord, WordLayout};
use crate::he_backend::{
    eval_add, eval_mul, eval_mul_const, eval_sub, trusted_word_bits, Ciphertext, SlotKind,
};

/// Carry policy of the blackbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlackboxMode {
    /// Binary or complete fingerprints: every addend owns private bit
    /// positions, so any carry inside the fingerprint section signals a
    /// manipulated addition. Nullify on all section carries and on overflow
    /// into the computation part.
    CompleteBinary,
    /// Integer fingerprints legitimately carry inside the section; nullify
    /// only when the section overflows into the computation part.
    IntegerFp,
}

/// Fixed configuration of one blackbox instance. The fingerprint width is
/// baked in at construction; the blackbox must be built for the layout it
/// serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlackboxConfig {
    pub layout: WordLayout,
    pub mode: BlackboxMode,
}

impl BlackboxConfig {
    pub fn new(layout: WordLayout, mode: BlackboxMode) -> BlackboxConfig {
        BlackboxConfig { layout, mode }
    }
}

fn check_operand(cfg: &BlackboxConfig, w: &EncodedWord) -> Result<()> {
    if w.layout != cfg.layout {
        return Err(Error::LayoutMismatch(format!(
            "word layout ({}, {}) does not match blackbox layout ({}, {})",
            w.layout.n, w.layout.m, cfg.layout.n, cfg.layout.m
        )));
    }
    // The bit decomposition is only faithful when the word wraps exactly at
    // the top of the layout.
    match w.ct.slot_kind() {
        SlotKind::Word { modulus } if modulus == cfg.layout.modulus() => Ok(()),
        other => Err(Error::LayoutMismatch(format!(
            "blackbox requires word modulus {}, ciphertext has {other:?}",
            cfg.layout.modulus()
        ))),
    }
}

/// Majority of three Boolean-valued ciphertexts: xy + c(x + y - 2xy).
fn carry_step(x: &Ciphertext, y: &Ciphertext, c_in: Option<&Ciphertext>) -> Result<Ciphertext> {
    let xy = eval_mul(x, y)?;
    match c_in {
        None => Ok(xy),
        Some(c) => {
            let x_plus_y = eval_add(x, y)?;
            let twice_xy = eval_mul_const(&xy, 2)?;
            let xor = eval_sub(&x_plus_y, &twice_xy)?;
            let propagated = eval_mul(c, &xor)?;
            eval_add(&xy, &propagated)
        }
    }
}

/// Shared core of the blackbox: the raw sum, the encrypted nullification
/// flag (1 when a forbidden carry occurred) and an encrypted 1 extracted
/// from the operand bits.
fn add_and_flag(
    cfg: &BlackboxConfig,
    a: &EncodedWord,
    b: &EncodedWord,
) -> Result<(Ciphertext, Ciphertext, Ciphertext)> {
    check_operand(cfg, a)?;
    check_operand(cfg, b)?;
    let total = cfg.layout.total_bits() as usize;
    let m = cfg.layout.m as usize;

    let sum = eval_add(&a.ct, &b.ct)?;
    let a_bits = trusted_word_bits(&a.ct, 0, total)?;
    let b_bits = trusted_word_bits(&b.ct, 0, total)?;

    // Ripple the carries over the whole word. carries[j] is the carry OUT of
    // bit position j.
    let mut carries: Vec<Ciphertext> = Vec::with_capacity(total);
    for j in 0..total {
        let c_in = if j == 0 { None } else { Some(&carries[j - 1]) };
        carries.push(carry_step(&a_bits[j], &b_bits[j], c_in)?);
    }

    let mut flagged: Vec<&Ciphertext> = Vec::new();
    match cfg.mode {
        BlackboxMode::CompleteBinary => flagged.extend(carries[..m].iter()),
        BlackboxMode::IntegerFp => flagged.push(&carries[m - 1]),
    }
    // Overflow out of the computation part nullifies in both modes.
    flagged.push(&carries[total - 1]);

    let mut flag = flagged[0].clone();
    for c in &flagged[1..] {
        flag = blind_or(&flag, c)?;
    }

    let mut all_bits = a_bits;
    all_bits.extend(b_bits);
    let one = extract_one(&all_bits)?;
    Ok((sum, flag, one))
}

/// Add two encoded words, nullifying on forbidden carries.
pub fn bb_add(cfg: &BlackboxConfig, a: &EncodedWord, b: &EncodedWord) -> Result<EncodedWord> {
    let (sum, flag, one) = add_and_flag(cfg, a, b)?;
    let not_flag = eval_sub(&one, &flag)?;
    let ct = eval_mul(&not_flag, &sum)?;
    Ok(EncodedWord { layout: cfg.layout, ct })
}

/// Left fold of blackbox additions with absorbing nullification: the chain
/// keeps an encrypted validity bit, so once any step is nullified every
/// later partial result stays an encryption of 0.
pub fn bb_add_chain(cfg: &BlackboxConfig, words: &[EncodedWord]) -> Result<EncodedWord> {
    let (first, rest) = words
        .split_first()
        .ok_or_else(|| Error::InvalidParams("chain needs at least one word".into()))?;
    check_operand(cfg, first)?;
    let mut acc = first.clone();
    let mut valid: Option<Ciphertext> = None;
    for word in rest {
        let (sum, flag, one) = add_and_flag(cfg, &acc, word)?;
        let not_flag = eval_sub(&one, &flag)?;
        let valid_now = match valid {
            None => not_flag,
            Some(v) => eval_mul(&v, &not_flag)?,
        };
        acc = EncodedWord { layout: cfg.layout, ct: eval_mul(&valid_now, &sum)? };
        valid = Some(valid_now);
    }
    Ok(acc)
}

/// Conditional modulus reduction: subtract the encrypted field modulus from
/// `w` exactly when the indicator bit is set. The modulus word's fingerprint
/// part is the delegator's choice; a zero fingerprint leaves the section
/// untouched.
pub fn field_reduce(
    w: &EncodedWord,
    enc_modulus: &EncodedWord,
    overflow_bit: &Ciphertext,
    one: &Ciphertext,
) -> Result<EncodedWord> {
    if w.layout != enc_modulus.layout {
        return Err(Error::LayoutMismatch("modulus word layout differs".into()));
    }
    let reduced = eval_sub(&w.ct, &enc_modulus.ct)?;
    let ct = blind_if(overflow_bit, &reduced, &w.ct, one)?;
    Ok(EncodedWord { layout: w.layout, ct })
}
