//! Randomized invariants over wider domains than the exhaustive unit tests
//! cover.

use proptest::prelude::*;

use fpdel_core::blackbox_add::{bb_add, BlackboxConfig, BlackboxMode};
use fpdel_core::fingerprint::{decode_split, encode_word, WordLayout};
use fpdel_core::he_backend::{
    decrypt_word, encrypt, eval_add, eval_mul, eval_sub, keygen, KeyKind, Plaintext,
};

/// Plaintext carry model mirrored from the blackbox contract.
fn oracle_bb_add(layout: WordLayout, mode: BlackboxMode, a: u64, b: u64) -> u64 {
    let total = layout.total_bits() as usize;
    let m = layout.m as usize;
    let mut carry = 0u64;
    let mut carries = vec![false; total];
    for (j, c) in carries.iter_mut().enumerate() {
        let s = ((a >> j) & 1) + ((b >> j) & 1) + carry;
        carry = s >> 1;
        *c = carry == 1;
    }
    let forbidden = match mode {
        BlackboxMode::CompleteBinary => carries[..m].iter().any(|&c| c),
        BlackboxMode::IntegerFp => carries[m - 1],
    } || carries[total - 1];
    if forbidden {
        0
    } else {
        (a + b) % layout.modulus()
    }
}

proptest! {
    #[test]
    fn word_homomorphism_above_exhaustive_range(
        p_bits in 9u32..32,
        a in any::<u64>(),
        b in any::<u64>(),
    ) {
        let p = 1u64 << p_bits;
        let (a, b) = (a % p, b % p);
        let kp = keygen(KeyKind::Word { modulus: p }).unwrap();
        let ca = encrypt(&kp, Plaintext::Word(a)).unwrap();
        let cb = encrypt(&kp, Plaintext::Word(b)).unwrap();
        prop_assert_eq!(decrypt_word(&kp, &eval_add(&ca, &cb).unwrap()).unwrap(), (a + b) % p);
        prop_assert_eq!(
            decrypt_word(&kp, &eval_sub(&ca, &cb).unwrap()).unwrap(),
            (a + p - b) % p
        );
        prop_assert_eq!(
            decrypt_word(&kp, &eval_mul(&ca, &cb).unwrap()).unwrap(),
            ((a as u128 * b as u128) % p as u128) as u64
        );
    }

    #[test]
    fn encode_decode_round_trip(
        n in 1u32..12,
        m in 1u32..12,
        comp_seed in any::<u64>(),
        fp_seed in any::<u64>(),
    ) {
        let layout = WordLayout::new(n, m).unwrap();
        let comp = comp_seed % layout.comp_max();
        let fp = fp_seed & layout.fp_mask();
        let kp = keygen(KeyKind::Word { modulus: layout.modulus() }).unwrap();
        let w = encode_word(&kp, layout, comp, fp).unwrap();
        prop_assert_eq!(decode_split(&kp, &w).unwrap(), (comp, fp));
    }

    #[test]
    fn blackbox_addition_agrees_with_the_carry_oracle(
        n in 2u32..8,
        m in 2u32..8,
        a_seed in any::<u64>(),
        b_seed in any::<u64>(),
        integer_mode in any::<bool>(),
    ) {
        let layout = WordLayout::new(n, m).unwrap();
        let mode = if integer_mode {
            BlackboxMode::IntegerFp
        } else {
            BlackboxMode::CompleteBinary
        };
        let cfg = BlackboxConfig::new(layout, mode);
        let kp = keygen(KeyKind::Word { modulus: layout.modulus() }).unwrap();
        let (pa, pb) = (a_seed % layout.modulus(), b_seed % layout.modulus());
        let a = encode_word(&kp, layout, pa >> m, pa & layout.fp_mask()).unwrap();
        let b = encode_word(&kp, layout, pb >> m, pb & layout.fp_mask()).unwrap();
        let got = decrypt_word(&kp, &bb_add(&cfg, &a, &b).unwrap().ct).unwrap();
        prop_assert_eq!(got, oracle_bb_add(layout, mode, pa, pb));
    }
}
