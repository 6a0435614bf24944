//! Word layouts and computation fingerprints.
//!
//! An encoded word packs a computation value of `n` bits above a fingerprint
//! value of `m` bits, fingerprint at the least significant end. The
//! fingerprint end is fixed: overflow of the computation part wanders off the
//! top of the word instead of corrupting the fingerprint, which is what the
//! whole verification story relies on.
//!
//! Three fingerprint schemes are supported. Binary gives every addend one
//! private bit position; Complete is the special case where the positions are
//! 0..i so the honest sum reads all-ones; Integer gives every addend a random
//! integer value of at least 2 whose honest combination the delegator
//! predicts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::he_backend::{decrypt_word, encrypt, Ciphertext, KeyKind, KeyPair, Plaintext};
use crate::log_mult::{ExecutionPlan, Operand, PlanStep};

/// Bit layout of an encoded word: `n` computation bits in `[m, m+n)`,
/// `m` fingerprint bits in `[0, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordLayout {
    pub n: u32,
    pub m: u32,
}

impl WordLayout {
    pub fn new(n: u32, m: u32) -> Result<WordLayout> {
        if n < 1 || m < 1 || n + m > 32 {
            return Err(Error::LayoutMismatch(format!(
                "layout requires n >= 1, m >= 1, n + m <= 32 (got n={n}, m={m})"
            )));
        }
        Ok(WordLayout { n, m })
    }

    pub fn total_bits(&self) -> u32 {
        self.n + self.m
    }

    /// The word modulus the fingerprint pipeline works under: exactly
    /// 2^(n+m), so full-word overflow wraps at the top of the word.
    pub fn modulus(&self) -> u64 {
        1u64 << self.total_bits()
    }

    pub fn fp_mask(&self) -> u64 {
        (1u64 << self.m) - 1
    }

    pub fn comp_max(&self) -> u64 {
        1u64 << self.n
    }

    /// Pack cleartext (comp, fp) into a raw word value.
    pub fn pack(&self, comp: u64, fp: u64) -> u64 {
        (comp << self.m) | fp
    }

    /// Split a raw word value into (comp, fp).
    pub fn split(&self, word: u64) -> (u64, u64) {
        (word >> self.m, word & self.fp_mask())
    }
}

/// Fingerprint assignment for the addends of one computation. Addends are
/// indexed in request order: encrypted inputs first, then encrypted
/// constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FingerprintScheme {
    /// One private bit position per addend.
    Binary { positions: Vec<u32> },
    /// Positions 0..i; the honest sum of all addends is 2^i - 1.
    Complete { num_inputs: usize },
    /// One integer value per addend, each at least 2.
    Integer { values: Vec<u64> },
}

impl FingerprintScheme {
    pub fn num_addends(&self) -> usize {
        match self {
            FingerprintScheme::Binary { positions } => positions.len(),
            FingerprintScheme::Complete { num_inputs } => *num_inputs,
            FingerprintScheme::Integer { values } => values.len(),
        }
    }

    /// Fingerprint value of one addend.
    pub fn value(&self, addend: usize) -> Result<u64> {
        match self {
            FingerprintScheme::Binary { positions } => positions
                .get(addend)
                .map(|p| 1u64 << p)
                .ok_or_else(|| Error::Scheme(format!("addend {addend} not covered by scheme"))),
            FingerprintScheme::Complete { num_inputs } => {
                if addend < *num_inputs {
                    Ok(1u64 << addend)
                } else {
                    Err(Error::Scheme(format!("addend {addend} not covered by scheme")))
                }
            }
            FingerprintScheme::Integer { values } => values
                .get(addend)
                .copied()
                .ok_or_else(|| Error::Scheme(format!("addend {addend} not covered by scheme"))),
        }
    }

    /// Check the scheme fits a fingerprint section of `m` bits.
    pub fn validate(&self, m: u32) -> Result<()> {
        match self {
            FingerprintScheme::Binary { positions } => {
                let mut seen = vec![false; m as usize];
                for &p in positions {
                    if p >= m {
                        return Err(Error::Scheme(format!("position {p} outside {m} bits")));
                    }
                    if seen[p as usize] {
                        return Err(Error::Scheme(format!("duplicate position {p}")));
                    }
                    seen[p as usize] = true;
                }
                Ok(())
            }
            FingerprintScheme::Complete { num_inputs } => {
                if *num_inputs > m as usize {
                    Err(Error::Scheme(format!("{num_inputs} inputs exceed {m} fingerprint bits")))
                } else {
                    Ok(())
                }
            }
            FingerprintScheme::Integer { values } => {
                let mut sum: u128 = 0;
                for &k in values {
                    if k < 2 {
                        return Err(Error::Scheme(format!(
                            "integer fingerprints must be >= 2, got {k}"
                        )));
                    }
                    sum += k as u128;
                }
                if sum >= 1u128 << m {
                    return Err(Error::Scheme(format!(
                        "fingerprint values sum to {sum}, overflowing {m} bits"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Shift every fingerprint value up by `m_c` bits, reserving the low
    /// bits for a LUT-use counter.
    pub fn shifted_for_split(self, m_c: u32) -> FingerprintScheme {
        match self {
            FingerprintScheme::Binary { positions } => FingerprintScheme::Binary {
                positions: positions.into_iter().map(|p| p + m_c).collect(),
            },
            FingerprintScheme::Complete { num_inputs } => FingerprintScheme::Binary {
                positions: (0..num_inputs as u32).map(|j| j + m_c).collect(),
            },
            FingerprintScheme::Integer { values } => FingerprintScheme::Integer {
                values: values.into_iter().map(|k| k << m_c).collect(),
            },
        }
    }
}

/// Complete scheme over `i` addends: addend j carries bit j, the honest sum
/// of everything is the all-ones pattern of width i.
pub fn assign_complete_fingerprints(i: usize, m: u32) -> Result<FingerprintScheme> {
    if i > m as usize {
        return Err(Error::Scheme(format!("{i} addends need more than {m} fingerprint bits")));
    }
    Ok(FingerprintScheme::Complete { num_inputs: i })
}

/// Integer scheme over `i` addends: each value drawn uniformly from
/// [2, (2^m - 1) / i], so the honest sum can never overflow the section.
pub fn sample_integer_fingerprints(
    rng: &mut impl Rng,
    i: usize,
    m: u32,
) -> Result<FingerprintScheme> {
    if i == 0 {
        return Err(Error::Scheme("need at least one addend".into()));
    }
    let hi = ((1u64 << m) - 1) / i as u64;
    if hi < 2 {
        return Err(Error::Scheme(format!(
            "fingerprint width {m} too small for {i} integer addends"
        )));
    }
    let values = (0..i).map(|_| rng.gen_range(2..=hi)).collect();
    Ok(FingerprintScheme::Integer { values })
}

/// A fingerprinted word under some key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodedWord {
    pub layout: WordLayout,
    pub ct: Ciphertext,
}

/// Encode and encrypt (comp, fp) under `kp`.
pub fn encode_word(
    kp: &KeyPair,
    layout: WordLayout,
    comp_value: u64,
    fp_value: u64,
) -> Result<EncodedWord> {
    if comp_value >= layout.comp_max() {
        return Err(Error::OutOfDomain(format!(
            "computation value {comp_value} exceeds {} bits",
            layout.n
        )));
    }
    if fp_value > layout.fp_mask() {
        return Err(Error::OutOfDomain(format!(
            "fingerprint value {fp_value} exceeds {} bits",
            layout.m
        )));
    }
    match kp.kind() {
        KeyKind::Word { modulus } if modulus >= layout.modulus() => {}
        other => {
            return Err(Error::LayoutMismatch(format!(
                "key kind {other:?} cannot carry layout ({}, {})",
                layout.n, layout.m
            )))
        }
    }
    let ct = encrypt(kp, Plaintext::Word(layout.pack(comp_value, fp_value)))?;
    Ok(EncodedWord { layout, ct })
}

/// Decrypt and split an encoded word into (comp, fp).
pub fn decode_split(kp: &KeyPair, w: &EncodedWord) -> Result<(u64, u64)> {
    let raw = decrypt_word(kp, &w.ct)?;
    Ok(w.layout.split(raw))
}

/// Verification outcome for one returned word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Fingerprint matched; the computation value is released.
    Accepted { comp_value: u64 },
    /// Fingerprint differed from the expected value.
    Rejected { fp_value: u64 },
    /// The word decrypted to exactly 0, the blackbox punishment value. This
    /// is reported distinctly from a wrong fingerprint; a computation whose
    /// honest result could be the zero word is the delegator's call to
    /// re-delegate.
    Nullified,
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }
}

/// Check a returned word against the expected fingerprint.
pub fn verify_result(kp: &KeyPair, w: &EncodedWord, expected_fp: u64) -> Result<Verdict> {
    let raw = decrypt_word(kp, &w.ct)?;
    if raw == 0 {
        return Ok(Verdict::Nullified);
    }
    let (comp, fp) = w.layout.split(raw);
    if fp == expected_fp {
        Ok(Verdict::Accepted { comp_value: comp })
    } else {
        Ok(Verdict::Rejected { fp_value: fp })
    }
}

/// Evaluate a plan's fingerprint semantics on cleartext fingerprint values:
/// additions add, multiplication by a cleartext constant multiplies, and
/// every LUT hop bumps the use counter in the low split bits. The result is
/// the fingerprint an honest server must produce; it is computed once per
/// (plan, scheme) and reusable across input sets and servers.
pub fn expected_fingerprint(scheme: &FingerprintScheme, plan: &ExecutionPlan) -> Result<u64> {
    match expected_fingerprint_trace(scheme, plan)?.last() {
        Some(&v) => Ok(v),
        // an empty plan echoes the first input
        None => scheme.value(0),
    }
}

/// The accumulator's expected fingerprint after every plan step; entry k-1
/// is the fingerprint state a table hop at step k sees on its input, which
/// is what the delegator keys hop rows to.
pub fn expected_fingerprint_trace(
    scheme: &FingerprintScheme,
    plan: &ExecutionPlan,
) -> Result<Vec<u64>> {
    let m = plan.layout.m;
    let bound = 1u128 << m;
    let operand_fp = |op: &Operand, saved: &[u128]| -> Result<u128> {
        match op {
            Operand::Input(j) => Ok(scheme.value(*j)? as u128),
            Operand::Const(k) => Ok(scheme.value(plan.inputs.len() + k)? as u128),
            Operand::Saved(s) => saved
                .get(*s)
                .copied()
                .ok_or_else(|| Error::Plan(format!("saved slot {s} not yet produced"))),
        }
    };

    let mut acc: Option<u128> = None;
    let mut saved: Vec<u128> = Vec::new();
    let mut trace: Vec<u64> = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        match step {
            PlanStep::Load(op) => {
                if let Some(prev) = acc.take() {
                    saved.push(prev);
                }
                acc = Some(operand_fp(op, &saved)?);
            }
            PlanStep::BBAdd(op) => {
                let cur = acc.ok_or_else(|| Error::Plan("addition before any load".into()))?;
                acc = Some(cur + operand_fp(op, &saved)?);
            }
            PlanStep::AddEncConst(k) => {
                let cur = acc.ok_or_else(|| Error::Plan("addition before any load".into()))?;
                let fp = scheme.value(plan.inputs.len() + k)? as u128;
                acc = Some(cur + fp);
            }
            PlanStep::MulClearConst(c) => {
                let cur = acc.ok_or_else(|| Error::Plan("multiplication before any load".into()))?;
                acc = Some(cur * *c as u128);
            }
            PlanStep::ApplyExpLUT | PlanStep::ApplyLogLUT => {
                let cur = acc.ok_or_else(|| Error::Plan("LUT hop before any load".into()))?;
                acc = Some(cur + 1);
            }
        }
        let v = acc.expect("every step leaves an accumulator");
        if v >= bound {
            return Err(Error::Scheme(format!(
                "expected fingerprint {v} overflows the {m}-bit section; pick smaller values"
            )));
        }
        trace.push(v as u64);
    }
    Ok(trace)
}
