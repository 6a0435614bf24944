//! Blind primitives over encrypted bits: OR, NOT, conditioning and lookup
//! table evaluation built purely from evaluation gates.
//!
//! These are used on both sides of the trust boundary. A malicious server
//! uses them to return consistent wrong results in the bit-granularity
//! setting; the defensive blackboxes reuse the same operators for carry
//! detection and blind table hops. None of them ever call `decrypt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::he_backend::{eval_add, eval_mul, eval_mul_const, eval_sub, Ciphertext};

/// A cleartext lookup table: for each of the `2^input_bits` input patterns,
/// one output bit-vector of width `output_bits`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearLUT {
    input_bits: usize,
    output_bits: usize,
    rows: Vec<u64>,
}

impl ClearLUT {
    pub fn new(input_bits: usize, output_bits: usize, rows: Vec<u64>) -> Result<ClearLUT> {
        if input_bits == 0 || input_bits > 16 {
            return Err(Error::InvalidParams(format!(
                "lookup table input width must be in 1..=16, got {input_bits}"
            )));
        }
        if output_bits == 0 || output_bits > 64 {
            return Err(Error::InvalidParams("lookup table output width must be in 1..=64".into()));
        }
        if rows.len() != 1 << input_bits {
            return Err(Error::InvalidParams(format!(
                "lookup table must have exactly {} rows, got {}",
                1u64 << input_bits,
                rows.len()
            )));
        }
        if output_bits < 64 {
            if let Some(bad) = rows.iter().find(|r| **r >> output_bits != 0) {
                return Err(Error::InvalidParams(format!(
                    "row value {bad:#b} exceeds output width {output_bits}"
                )));
            }
        }
        Ok(ClearLUT { input_bits, output_bits, rows })
    }

    /// Table with output alternating 0/1 by input value (row r maps to r & 1).
    pub fn alternating(input_bits: usize) -> ClearLUT {
        let rows = (0..1u64 << input_bits).map(|r| r & 1).collect();
        ClearLUT::new(input_bits, 1, rows).expect("alternating table is well formed")
    }

    /// Identity table mapping every input pattern to itself.
    pub fn identity(input_bits: usize) -> ClearLUT {
        let rows = (0..1u64 << input_bits).collect();
        ClearLUT::new(input_bits, input_bits, rows).expect("identity table is well formed")
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_bits(&self) -> usize {
        self.output_bits
    }

    pub fn lookup(&self, input: u64) -> u64 {
        self.rows[input as usize]
    }
}

/// Bitwise OR of two Boolean-valued ciphertexts: (x + y) - (x * y).
pub fn blind_or(x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext> {
    let sum = eval_add(x, y)?;
    let prod = eval_mul(x, y)?;
    eval_sub(&sum, &prod)
}

/// Negation of a Boolean-valued ciphertext given an encryption of 1.
pub fn blind_not(x: &Ciphertext, one: &Ciphertext) -> Result<Ciphertext> {
    eval_sub(one, x)
}

/// Blind conditioning: bit * f + (1 - bit) * g, without seeing the bit.
pub fn blind_if(
    bit: &Ciphertext,
    f_val: &Ciphertext,
    g_val: &Ciphertext,
    one: &Ciphertext,
) -> Result<Ciphertext> {
    let then_branch = eval_mul(bit, f_val)?;
    let not_bit = blind_not(bit, one)?;
    let else_branch = eval_mul(&not_bit, g_val)?;
    eval_add(&then_branch, &else_branch)
}

/// OR-fold of a non-empty list of Boolean-valued bits. Decrypts to 1 unless
/// every input bit is 0; this is how an encrypted 1 is obtained without the
/// public key.
pub fn extract_one(bits: &[Ciphertext]) -> Result<Ciphertext> {
    let (first, rest) = bits
        .split_first()
        .ok_or_else(|| Error::InvalidParams("extract_one needs at least one bit".into()))?;
    let mut acc = first.clone();
    for bit in rest {
        acc = blind_or(&acc, bit)?;
    }
    Ok(acc)
}

/// Per-row indicator: the product of matched or negated input bits, equal to
/// 1 exactly when the hidden input matches `row`. Folded from the most
/// significant bit down so intermediate traces are reproducible.
pub(crate) fn row_indicator(
    input_bits: &[Ciphertext],
    negated: &[Ciphertext],
    row: u64,
) -> Result<Ciphertext> {
    let n = input_bits.len();
    let pick = |i: usize| {
        if (row >> i) & 1 == 1 {
            &input_bits[i]
        } else {
            &negated[i]
        }
    };
    let mut acc = pick(n - 1).clone();
    for i in (0..n - 1).rev() {
        acc = eval_mul(&acc, pick(i))?;
    }
    Ok(acc)
}

/// Evaluate a cleartext lookup table over encrypted input bits
/// (least-significant bit first), returning one encrypted bit per output bit.
///
/// The encrypted 1 needed for negation is OR-extracted from the input
/// itself. When the input is all-zero no encrypted 1 exists, every row
/// argument collapses to 0 and the outputs decrypt to 0, which is exactly
/// the required behaviour for tables whose zero row is zero.
pub fn blind_lut_eval(input_bits: &[Ciphertext], lut: &ClearLUT) -> Result<Vec<Ciphertext>> {
    if input_bits.len() != lut.input_bits {
        return Err(Error::InvalidParams(format!(
            "lookup table expects {} input bits, got {}",
            lut.input_bits,
            input_bits.len()
        )));
    }
    let one = extract_one(input_bits)?;
    let negated: Vec<Ciphertext> = input_bits
        .iter()
        .map(|b| blind_not(b, &one))
        .collect::<Result<_>>()?;

    let indicators: Vec<Ciphertext> = (0..1u64 << lut.input_bits)
        .map(|row| row_indicator(input_bits, &negated, row))
        .collect::<Result<_>>()?;

    (0..lut.output_bits)
        .map(|j| {
            let mut acc: Option<Ciphertext> = None;
            for (row, ind) in indicators.iter().enumerate() {
                let out_bit = (lut.rows[row] >> j) & 1;
                let term = eval_mul_const(ind, out_bit as i64)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => eval_add(&a, &term)?,
                });
            }
            Ok(acc.expect("lookup table has at least one row"))
        })
        .collect()
}
