//! Full-pipeline properties: random polynomials through
//! prepare -> serve -> verify, with plaintext circuit evaluation as the
//! oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fpdel_core::fingerprint::{
    sample_integer_fingerprints, verify_result, FingerprintScheme, Verdict, WordLayout,
};
use fpdel_core::he_backend::{keygen, KeyKind};
use fpdel_core::log_mult::{Circuit, CircuitBuilder, FpSplit};
use fpdel_core::protocol::{self, serve_honest, verify_response, ResponseVerdict};

/// Random polynomial of degree <= 3 over <= 3 variables: a sum of up to
/// three monomials (power-of-two coefficients, variable products) plus an
/// optional constant term.
fn random_polynomial(rng: &mut ChaCha8Rng) -> (Circuit, usize) {
    let num_vars = rng.gen_range(1..=3usize);
    let mut b = CircuitBuilder::new(num_vars);
    let num_monomials = rng.gen_range(1..=3usize);
    let mut terms = Vec::new();
    for _ in 0..num_monomials {
        let degree = rng.gen_range(1..=3usize);
        let mut factor_ids: Vec<usize> =
            (0..degree).map(|_| b.input(rng.gen_range(0..num_vars))).collect();
        if rng.gen_bool(0.5) {
            let coeff = 1u64 << rng.gen_range(0..2u32); // 1 or 2
            factor_ids.push(b.constant(coeff as f64));
        }
        let mut acc = factor_ids[0];
        for &f in &factor_ids[1..] {
            acc = b.mul(acc, f);
        }
        terms.push(acc);
    }
    if rng.gen_bool(0.5) {
        terms.push(b.constant(rng.gen_range(1..16u32) as f64));
    }
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = b.add(acc, t);
    }
    (b.finish(acc).unwrap(), num_vars)
}

#[test]
fn random_polynomials_verify_and_match_plaintext_evaluation() {
    let layout = WordLayout::new(8, 8).unwrap();
    let split = FpSplit::new(layout, 5, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut accepted = 0u32;
    let mut attempted = 0u32;

    while accepted < 60 {
        let (circuit, num_vars) = random_polynomial(&mut rng);
        // power-of-two inputs keep the log encoding exact
        let inputs: Vec<u64> = (0..num_vars).map(|_| 1u64 << rng.gen_range(0..3u32)).collect();
        let honest = circuit.eval_u128(&inputs).unwrap()[circuit.output()];
        if honest >= layout.comp_max() as u128 {
            continue; // out of range for this layout; resample
        }
        attempted += 1;

        // compile once to learn the addend count, then draw a scheme that
        // leaves the counter bits alone
        let plan = match fpdel_core::log_mult::compile_circuit(&circuit, layout, Some(split)) {
            Ok(p) => p,
            Err(_) => continue, // counter budget exceeded; resample
        };
        let base = match sample_integer_fingerprints(&mut rng, plan.num_addends(), split.m_a) {
            Ok(s) => s,
            Err(_) => continue, // too many addends for the width; resample
        };
        let scheme = base.shifted_for_split(split.m_c);

        let mut delegator = protocol::Delegator::new();
        let prep = match delegator.delegate(&circuit, &inputs, &scheme, layout, Some(split)) {
            Ok(p) => p,
            Err(_) => continue, // expected fingerprint overflowed; resample
        };
        let response = serve_honest(&prep.request).unwrap();
        let verified =
            verify_response(&prep.kp, &prep.request, &response, prep.expected_fp as i64).unwrap();
        assert_eq!(
            verified.verdict,
            ResponseVerdict::Accepted { comp_value: honest as u64 },
            "honest execution must verify and yield the plaintext value\ncircuit: {circuit:?}\ninputs: {inputs:?}"
        );
        accepted += 1;
    }
    assert!(attempted >= accepted);
}

#[test]
fn honest_addition_sums_verify_for_every_scheme() {
    // addition-only plans accept with the expected fingerprint under all
    // three schemes, exhaustively over small instances
    let layout = WordLayout::new(6, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 1..=4usize {
        let circuit = Circuit::sum_of_inputs(i);
        let schemes = vec![
            FingerprintScheme::Complete { num_inputs: i },
            FingerprintScheme::Binary {
                positions: (0..i as u32).map(|j| layout.m - 1 - j).collect(),
            },
            sample_integer_fingerprints(&mut rng, i, layout.m).unwrap(),
        ];
        for scheme in schemes {
            for _ in 0..10 {
                let inputs: Vec<u64> =
                    (0..i).map(|_| rng.gen_range(0..layout.comp_max() / 4)).collect();
                let mut delegator = protocol::Delegator::new();
                let prep = delegator.delegate(&circuit, &inputs, &scheme, layout, None).unwrap();
                let response = serve_honest(&prep.request).unwrap();
                let verified =
                    verify_response(&prep.kp, &prep.request, &response, prep.expected_fp as i64)
                        .unwrap();
                let want: u64 = inputs.iter().sum();
                assert_eq!(verified.verdict, ResponseVerdict::Accepted { comp_value: want });
            }
        }
    }
}

#[test]
fn omitting_any_single_addend_is_always_rejected() {
    // under the bit-per-addend schemes a missing addend leaves its bit
    // unset; rejection is certain, exhaustively over every omission
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in 2..=4u32 {
        for n in 2..=4u32 {
            let layout = WordLayout::new(n, m).unwrap();
            for i in 2..=(m as usize) {
                let scheme = FingerprintScheme::Complete { num_inputs: i };
                let expected = (1u64 << i) - 1;
                let kp = keygen(KeyKind::Word { modulus: layout.modulus() }).unwrap();
                let words: Vec<_> = (0..i)
                    .map(|j| {
                        let comp = rng.gen_range(0..layout.comp_max() / i as u64);
                        fpdel_core::fingerprint::encode_word(
                            &kp,
                            layout,
                            comp,
                            scheme.value(j).unwrap(),
                        )
                        .unwrap()
                    })
                    .collect();
                let cfg = fpdel_core::blackbox_add::BlackboxConfig::new(
                    layout,
                    fpdel_core::blackbox_add::BlackboxMode::CompleteBinary,
                );
                for omit in 0..i {
                    let kept: Vec<_> = words
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != omit)
                        .map(|(_, w)| w.clone())
                        .collect();
                    let sum = fpdel_core::blackbox_add::bb_add_chain(&cfg, &kept).unwrap();
                    let verdict = verify_result(&kp, &sum, expected).unwrap();
                    assert!(
                        !matches!(verdict, Verdict::Accepted { .. }),
                        "omission of addend {omit} must be detected (n={n}, m={m}, i={i})"
                    );
                }
            }
        }
    }
}

#[test]
fn uniform_fingerprint_guess_collides_at_the_expected_rate() {
    // a uniformly random m-bit fingerprint hits a uniform target with
    // probability 1/2^m; statistical check at m = 8
    let m = 8u32;
    let trials = 200_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut hits = 0u64;
    for _ in 0..trials {
        let target = rng.gen_range(0..1u64 << m);
        let guess = rng.gen_range(0..1u64 << m);
        if guess == target {
            hits += 1;
        }
    }
    let p = 1.0 / 2f64.powi(m as i32);
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let rate = hits as f64 / trials as f64;
    assert!(
        (rate - p).abs() <= 4.0 * sigma,
        "collision rate {rate} strays from {p} by more than 4 sigma"
    );
}
