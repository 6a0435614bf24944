//! Acceptance suite: one test per shipping criterion, every tolerance pinned
//! in code. Each test prints a PASS line on success (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::collections::HashSet;
use std::time::Instant;

use fpdel_core::adversary::{
    attack_consistent_lut, masking_guess_enumeration, monte_carlo, AttackStrategy, Outcome,
    WordScenario,
};
use fpdel_core::blackbox_add::{bb_add, BlackboxConfig, BlackboxMode};
use fpdel_core::blind_ops::ClearLUT;
use fpdel_core::fingerprint::{
    encode_word, verify_result, EncodedWord, FingerprintScheme, Verdict, WordLayout,
};
use fpdel_core::he_backend::{decrypt_word, keygen, KeyKind, KeyPair};
use fpdel_core::log_mult::{
    apply_lut, Circuit, CircuitBuilder, FpSplit, LutDirection, PlanStep,
};
use fpdel_core::protocol::{
    self, execute_word_plan, execute_word_plan_traced, serve_honest, verify_response,
    DelegationRequest, ResponseVerdict, ServerResponse,
};
use fpdel_core::simd_fp::{
    encode_simd, expected_simd_fingerprint, lint_program, simd_execute, verify_simd,
    SimdOperand, SimdProgram, SimdStep, SimdVerdict, Violation,
};

fn pass(name: &str) {
    println!("PASS {name}");
}

fn word_key(layout: WordLayout) -> KeyPair {
    keygen(KeyKind::Word { modulus: layout.modulus() }).unwrap()
}

// ---------------------------------------------------------------------------
// independent plaintext oracles (test-side reimplementations)
// ---------------------------------------------------------------------------

/// Plaintext model of the addition blackbox.
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

/// Plaintext model of a blind table hop: all-zero words, missing rows and
/// fingerprint states outside the delegator's row set yield 0, otherwise
/// the row output with the counter bumped.
fn oracle_lut(
    layout: WordLayout,
    split: FpSplit,
    direction: LutDirection,
    row_fps: &[u64],
    input: u64,
) -> u64 {
    if input == 0 {
        return 0;
    }
    let (comp, fp) = layout.split(input);
    if (fp & split.counter_mask()) > split.counter_input_max() || !row_fps.contains(&fp) {
        return 0;
    }
    let comp_out = match direction {
        LutDirection::Exp => {
            if comp >= layout.n as u64 {
                return 0;
            }
            1u64 << comp
        }
        LutDirection::Log => {
            if !comp.is_power_of_two() || comp >= layout.comp_max() {
                return 0;
            }
            comp.trailing_zeros() as u64
        }
    };
    layout.pack(comp_out, fp + 1)
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn a01_consistency_attack_returns_table_rows_under_every_key() {
    let started = Instant::now();
    let lut = ClearLUT::alternating(3);
    let (runs, _) = attack_consistent_lut(&lut, 2).unwrap();
    assert_eq!(runs.len(), 16, "8 inputs under 2 keys");
    for run in &runs {
        assert_eq!(
            run.output,
            lut.lookup(run.input),
            "input {} under key {} must decrypt to the table row",
            run.input,
            run.key_index
        );
        if run.input == 0 {
            assert_eq!(run.output, 0, "the all-zero input must yield 0");
        }
    }
    // consistency across keys for equal plaintext inputs
    for input in 0..8u64 {
        let outs: Vec<u64> = runs.iter().filter(|r| r.input == input).map(|r| r.output).collect();
        assert!(outs.windows(2).all(|w| w[0] == w[1]), "inconsistent outputs for {input}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass("consistency-attack: 16/16 runs equal the cleartext table under independent keys");
}

#[test]
fn a02_binary_fingerprint_addition_example() {
    let layout = WordLayout::new(3, 4).unwrap();
    let kp = word_key(layout);
    let cfg = BlackboxConfig::new(layout, BlackboxMode::CompleteBinary);
    let a = encode_word(&kp, layout, 0b001, 0b0010).unwrap();
    let b = encode_word(&kp, layout, 0b110, 0b0100).unwrap();
    let sum = bb_add(&cfg, &a, &b).unwrap();
    assert_eq!(decrypt_word(&kp, &sum.ct).unwrap(), 0b1110110);
    let verdict = verify_result(&kp, &sum, 0b0110).unwrap();
    assert_eq!(verdict, Verdict::Accepted { comp_value: 0b111 });
    pass("binary-addition: 0010010 + 1100100 = 1110110, fingerprint 0110 accepted, value 111");
}

#[test]
fn a03_word_pipeline_end_to_end_example() {
    let layout = WordLayout::new(6, 6).unwrap();
    let scheme = FingerprintScheme::Integer { values: vec![3, 2, 3] };
    let mut delegator = protocol::Delegator::new();
    let prep = delegator
        .delegate(&Circuit::shift_example(), &[4, 7], &scheme, layout, None)
        .unwrap();
    let response = serve_honest(&prep.request).unwrap();
    let ServerResponse::Word { result, .. } = &response else { panic!("word response") };
    assert_eq!(decrypt_word(&prep.kp, result).unwrap(), 1163);
    assert_eq!(prep.expected_fp, 11);
    let verified =
        verify_response(&prep.kp, &prep.request, &response, prep.expected_fp as i64).unwrap();
    assert_eq!(verified.verdict, ResponseVerdict::Accepted { comp_value: 18 });
    pass("word-pipeline: (2x)+y+3 at (4,7) decrypts to 1163, fingerprint 11, value 18");
}

#[test]
fn a04_log_table_trace_is_bit_exact() {
    let layout = WordLayout::new(8, 8).unwrap();
    let split = FpSplit::new(layout, 5, 3).unwrap();
    let scheme = FingerprintScheme::Binary { positions: vec![3, 4, 5, 6] };
    let kp = word_key(layout);
    let (request, expected_fp) = protocol::prepare_request(
        &kp,
        &Circuit::log_trace_example(),
        &[4, 8],
        &scheme,
        layout,
        Some(split),
    )
    .unwrap();
    let DelegationRequest::Word(word) = &request else { panic!("word request") };
    let (result, trace) = execute_word_plan_traced(word, &word.plan).unwrap();

    let got: Vec<u64> = trace.iter().map(|w| decrypt_word(&kp, &w.ct).unwrap()).collect();
    // after: load x', add y', exp, add 32-const, log, add 1-const, exp
    let want = vec![
        0b00000010_00001000u64,
        0b00000101_00011000,
        0b00100000_00011001,
        0b01000000_00111001,
        0b00000110_00111010,
        0b00000111_01111010,
        0b10000000_01111011,
    ];
    assert_eq!(got, want, "intermediate trace mismatch");
    let verdict = verify_result(&kp, &result, expected_fp).unwrap();
    assert_eq!(verdict, Verdict::Accepted { comp_value: 128 });
    pass("log-trace: all five table-hop intermediates match bit for bit");
}

#[test]
fn a05_complete_fingerprint_addition_soundness_sweep() {
    let started = Instant::now();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1005);

    let mut accepted_wrong = 0u64;
    let mut accepted_correct = 0u64;
    let mut checked = 0u64;

    for n in 1..=4u32 {
        for m in 1..=4u32 {
            let layout = WordLayout::new(n, m).unwrap();
            let cfg = BlackboxConfig::new(layout, BlackboxMode::CompleteBinary);
            for i in 1..=(m.min(4) as usize) {
                let scheme = FingerprintScheme::Complete { num_inputs: i };
                let expected_fp = (1u64 << i) - 1;
                for _assignment in 0..3 {
                    let kp = word_key(layout);
                    let comps: Vec<u64> =
                        (0..i).map(|_| rng.gen_range(0..layout.comp_max())).collect();
                    let honest: u64 = comps.iter().sum();
                    let words: Vec<EncodedWord> = (0..i)
                        .map(|j| encode_word(&kp, layout, comps[j], scheme.value(j).unwrap()))
                        .collect::<Result<_, _>>()
                        .unwrap();
                    let plain: Vec<u64> =
                        (0..i).map(|j| layout.pack(comps[j], 1 << j)).collect();

                    // depth-first enumeration of every addition sequence of
                    // up to 5 blackbox additions drawn from the inputs
                    struct Sweep<'a> {
                        layout: WordLayout,
                        cfg: &'a BlackboxConfig,
                        kp: &'a KeyPair,
                        words: &'a [EncodedWord],
                        plain: &'a [u64],
                        expected_fp: u64,
                        honest: u64,
                        accepted_wrong: u64,
                        accepted_correct: u64,
                        checked: u64,
                    }
                    impl Sweep<'_> {
                        fn dfs(&mut self, acc: &EncodedWord, acc_plain: u64, adds_left: u32) {
                            self.checked += 1;
                            let got = decrypt_word(self.kp, &acc.ct).unwrap();
                            assert_eq!(got, acc_plain, "homomorphic route deviates from oracle");
                            if let Verdict::Accepted { comp_value } =
                                verify_result(self.kp, acc, self.expected_fp).unwrap()
                            {
                                if comp_value == self.honest % self.layout.comp_max()
                                    && acc_plain == self.layout.pack(self.honest, self.expected_fp)
                                {
                                    self.accepted_correct += 1;
                                } else {
                                    self.accepted_wrong += 1;
                                }
                            }
                            if adds_left == 0 {
                                return;
                            }
                            for j in 0..self.words.len() {
                                let next = bb_add(self.cfg, acc, &self.words[j]).unwrap();
                                let next_plain = oracle_bb_add(
                                    self.layout,
                                    self.cfg.mode,
                                    acc_plain,
                                    self.plain[j],
                                );
                                self.dfs(&next, next_plain, adds_left - 1);
                            }
                        }
                    }

                    let mut sweep = Sweep {
                        layout,
                        cfg: &cfg,
                        kp: &kp,
                        words: &words,
                        plain: &plain,
                        expected_fp,
                        honest,
                        accepted_wrong: 0,
                        accepted_correct: 0,
                        checked: 0,
                    };
                    for start in 0..i {
                        sweep.dfs(&words[start], plain[start], 5);
                    }
                    accepted_wrong += sweep.accepted_wrong;
                    accepted_correct += sweep.accepted_correct;
                    checked += sweep.checked;
                }
            }
        }
    }

    assert_eq!(accepted_wrong, 0, "a sequence of blackbox additions forged an accepted value");
    assert!(accepted_correct > 0, "the honest sequences must appear in the sweep");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2 min");
    pass(&format!(
        "addition-soundness: {checked} sequences over n,m <= 4, zero forged acceptances"
    ));
}

#[test]
fn a06_masking_probability_matches_the_analysis() {
    let started = Instant::now();
    let m = 8u32;

    // exact enumeration of the guess space
    let (hits, total) = masking_guess_enumeration(m);
    assert_eq!(
        hits * (2 * m as u64 - 2),
        total,
        "guess enumeration must equal exactly 1/(2m-2)"
    );

    // Monte Carlo at a fixed seed
    let scenario = WordScenario { layout: WordLayout::new(8, 8).unwrap(), num_inputs: 4 };
    let (stats, reports) =
        monte_carlo(&AttackStrategy::OmitAndMask, &scenario, 20_000, 42).unwrap();
    let target = 1.0 / 14.0;
    assert!(
        stats.ci_low <= target && target <= stats.ci_high,
        "Wilson 95% interval [{}, {}] must contain {target}",
        stats.ci_low,
        stats.ci_high
    );
    assert_eq!(stats.trials, 20_000);
    assert!(reports.iter().all(|r| r.transcript.iter().all(|op| op.legal_in(r.scenario))));
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 1 min");
    pass(&format!(
        "masking-probability: enumeration exact at 1/{}, Monte Carlo rate {:.4} brackets 1/14",
        2 * m - 2,
        stats.success_rate
    ));
}

#[test]
fn a07_overflow_attack_defended_and_weakened() {
    let m = 8u32;
    let scenario = WordScenario { layout: WordLayout::new(8, 8).unwrap(), num_inputs: 1 };

    for reps in [1u64 << m, (1u64 << m) + 1] {
        let (stats, reports) = monte_carlo(
            &AttackStrategy::OverflowClear { reps, defended: true },
            &scenario,
            200,
            7,
        )
        .unwrap();
        assert_eq!(stats.successes, 0, "defended blackbox must never admit the overflow");
        assert!(
            reports.iter().all(|r| r.outcome == Outcome::Nullified),
            "every defended trial at reps={reps} must nullify"
        );
    }

    let (stats_weak, reports_weak) = monte_carlo(
        &AttackStrategy::OverflowClear { reps: (1u64 << m) + 1, defended: false },
        &scenario,
        200,
        7,
    )
    .unwrap();
    assert_eq!(
        stats_weak.successes, 200,
        "with nullification disabled the wrap-around forgery always lands"
    );
    assert!(reports_weak.iter().all(|r| r.outcome == Outcome::AcceptedWrong));
    pass("overflow-attack: defended blackbox nullifies 100%, weakened blackbox forged 100%");
}

#[test]
fn a08_blind_subset_sum_bound() {
    let started = Instant::now();
    let scenario = WordScenario { layout: WordLayout::new(8, 8).unwrap(), num_inputs: 2 };
    let trials = 100_000u64;
    let (stats, _) = monte_carlo(
        &AttackStrategy::BlindSubsetSum { bound: 3 },
        &scenario,
        trials,
        2024,
    )
    .unwrap();
    let p = 1.0 / 256.0;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let bound = p + 3.0 * sigma;
    assert!(
        stats.success_rate <= bound,
        "success rate {} exceeds 2^-8 + 3 sigma = {bound}",
        stats.success_rate
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2 min");
    pass(&format!(
        "blind-subset-sum: rate {:.5} <= {:.5} over {trials} deviant multisets",
        stats.success_rate, bound
    ));
}

#[test]
fn a09_log_pipeline_soundness_sweep_and_skipped_hop_detection() {
    let started = Instant::now();

    // scenario: the 2-input multiplication plan x*y at (6,6), counter in the
    // low 2 fingerprint bits, addend bits at positions 2 and 3
    let layout = WordLayout::new(6, 6).unwrap();
    let split = FpSplit::new(layout, 4, 2).unwrap();
    let scheme = FingerprintScheme::Binary { positions: vec![2, 3] };
    let kp = word_key(layout);
    let circuit = {
        let mut b = CircuitBuilder::new(2);
        let x = b.input(0);
        let y = b.input(1);
        let xy = b.mul(x, y);
        b.finish(xy).unwrap()
    };
    let (request, expected_fp) =
        protocol::prepare_request(&kp, &circuit, &[4, 8], &scheme, layout, Some(split)).unwrap();
    let DelegationRequest::Word(word) = &request else { panic!("word request") };
    let honest_comp = 32u64;

    // honest run sanity
    let honest = execute_word_plan(word, &word.plan).unwrap();
    assert_eq!(
        verify_result(&kp, &honest, expected_fp).unwrap(),
        Verdict::Accepted { comp_value: honest_comp }
    );

    // breadth-first sweep over every server op sequence of length <= 5 drawn
    // from {bb_add, apply_lut}, deduplicating states by their plaintext
    // multiset (transitions depend only on plaintexts)
    let (exp_lut, log_lut) = word.luts.as_deref().unwrap();
    let cfg = &word.blackbox;
    let mut accepted_wrong = 0u64;
    let mut values_checked = 0u64;

    type State = Vec<(EncodedWord, u64)>;
    let initial: State = word
        .inputs
        .iter()
        .map(|w| {
            let v = decrypt_word(&kp, &w.ct).unwrap();
            (w.clone(), v)
        })
        .collect();

    let mut classify = |ct: &EncodedWord, plain: u64| {
        values_checked += 1;
        assert_eq!(
            decrypt_word(&kp, &ct.ct).unwrap(),
            plain,
            "homomorphic route deviates from the plaintext oracle"
        );
        if let Verdict::Accepted { comp_value } = verify_result(&kp, ct, expected_fp).unwrap() {
            if comp_value != honest_comp {
                accepted_wrong += 1;
            }
        }
    };
    for (ct, plain) in &initial {
        classify(ct, *plain);
    }

    let state_key = |s: &State| {
        let mut vals: Vec<u64> = s.iter().map(|(_, v)| *v).collect();
        vals.sort_unstable();
        vals
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(state_key(&initial));
    let mut frontier: Vec<State> = vec![initial];

    for _level in 0..5 {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            let v = state.len();
            // every bb_add over an unordered pair (with repetition), and
            // every table hop over a single value
            let mut expansions: Vec<(EncodedWord, u64)> = Vec::new();
            for a in 0..v {
                for b in a..v {
                    let ct = bb_add(cfg, &state[a].0, &state[b].0).unwrap();
                    let plain = oracle_bb_add(layout, cfg.mode, state[a].1, state[b].1);
                    expansions.push((ct, plain));
                }
            }
            for (value, plain_value) in state {
                // the honest pre-hop fingerprint state of this plan is
                // 4 + 8 = 12 before the single exponentiation; the log table
                // has no reachable states at all
                for (lut, dir, row_fps) in [
                    (exp_lut, LutDirection::Exp, &[12u64][..]),
                    (log_lut, LutDirection::Log, &[][..]),
                ] {
                    let ct = apply_lut(lut, value).unwrap();
                    let plain = oracle_lut(layout, split, dir, row_fps, *plain_value);
                    expansions.push((ct, plain));
                }
            }
            for (ct, plain) in expansions {
                classify(&ct, plain);
                let mut new_state = state.clone();
                new_state.push((ct, plain));
                let key = state_key(&new_state);
                if seen.insert(key) {
                    next_frontier.push(new_state);
                }
            }
        }
        frontier = next_frontier;
    }

    assert_eq!(accepted_wrong, 0, "a server op sequence forged an accepted value");

    // removing any single exponentiation hop from an honest plan is caught,
    // as is dropping an addition
    let mut skip_rejections = 0;
    let mut skip_cases = 0;
    for scenario_plan in [&word.plan] {
        for (idx, step) in scenario_plan.steps.iter().enumerate() {
            let mutated: Vec<PlanStep> = scenario_plan
                .steps
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != idx)
                .map(|(_, s)| *s)
                .collect();
            if mutated.is_empty() || matches!(scenario_plan.steps[0], PlanStep::Load(_)) && idx == 0
            {
                continue; // dropping the initial load leaves no executable plan
            }
            let mut plan = scenario_plan.clone();
            plan.steps = mutated;
            let result = execute_word_plan(word, &plan).unwrap();
            let verdict = verify_result(&kp, &result, expected_fp).unwrap();
            skip_cases += 1;
            if !matches!(verdict, Verdict::Accepted { .. }) {
                skip_rejections += 1;
            }
            let _ = step;
        }
    }
    assert_eq!(
        skip_rejections, skip_cases,
        "every single-step omission must be rejected"
    );

    // the richer worked-example plan: dropping any of its three table hops
    // or any addition is rejected
    let layout8 = WordLayout::new(8, 8).unwrap();
    let split8 = FpSplit::new(layout8, 5, 3).unwrap();
    let scheme8 = FingerprintScheme::Binary { positions: vec![3, 4, 5, 6] };
    let kp8 = word_key(layout8);
    let (request8, expected8) = protocol::prepare_request(
        &kp8,
        &Circuit::log_trace_example(),
        &[4, 8],
        &scheme8,
        layout8,
        Some(split8),
    )
    .unwrap();
    let DelegationRequest::Word(word8) = &request8 else { panic!() };
    let mut skip8 = 0;
    let mut cases8 = 0;
    for idx in 1..word8.plan.steps.len() {
        let mut plan = word8.plan.clone();
        plan.steps.remove(idx);
        let result = execute_word_plan(word8, &plan).unwrap();
        cases8 += 1;
        if !matches!(
            verify_result(&kp8, &result, expected8).unwrap(),
            Verdict::Accepted { .. }
        ) {
            skip8 += 1;
        }
    }
    assert_eq!(skip8, cases8, "every omission in the worked plan must be rejected");

    let elapsed = started.elapsed();
    pass(&format!(
        "log-pipeline-soundness: {values_checked} values over sequences of length <= 5, zero \
         forged acceptances; {skip_cases}+{cases8} single-step omissions all rejected \
         ({elapsed:?})"
    ));
}

#[test]
fn a10_simd_polynomial_restriction_and_hazard() {
    // (((2x)+1.5)*(y*3))+0.1 with integer fingerprints in the hidden slot
    let comp_tolerance = 1e-6;
    let kp = keygen(KeyKind::Simd { depth_budget: 8 }).unwrap();

    let circuit = {
        let mut b = CircuitBuilder::new(2);
        let x = b.input(0);
        let two = b.constant(2.0);
        let tx = b.mul(two, x);
        let c15 = b.constant(1.5);
        let left = b.add(tx, c15);
        let y = b.input(1);
        let three = b.constant(3.0);
        let right = b.mul(y, three);
        let prod = b.mul(left, right);
        let c01 = b.constant(0.1);
        let out = b.add(prod, c01);
        b.finish(out).unwrap()
    };
    let (program, const_values) = fpdel_core::simd_fp::compile_simd_program(&circuit).unwrap();
    let const_fps = [2u64, 2, 3, 4];
    let fp_slot = 2usize;
    let xs = [4.0, 0.5];
    let ys = [8.0, 2.5];
    let x = encode_simd(&kp, &xs, 3, fp_slot).unwrap();
    let y = encode_simd(&kp, &ys, 5, fp_slot).unwrap();
    let consts: Vec<_> = const_values
        .iter()
        .zip(const_fps)
        .map(|(&v, fp)| encode_simd(&kp, &vec![v; xs.len()], fp, fp_slot).unwrap())
        .collect();

    // lint passes for the honest program
    assert!(lint_program(
        &program,
        &const_fps.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        8
    )
    .is_empty());

    // honest run: accepted, comp slots elementwise within tolerance
    let expected_fp = expected_simd_fingerprint(
        &program,
        &[3, 5],
        &const_fps.iter().map(|&v| v as i64).collect::<Vec<_>>(),
    )
    .unwrap();
    let (result, trace) = simd_execute(&program, &[x.clone(), y.clone()], &consts).unwrap();
    let verdict = verify_simd(&kp, &result, expected_fp, Some(&trace), &program).unwrap();
    let SimdVerdict::Accepted { comp_values } = verdict else {
        panic!("honest run rejected: {verdict:?}")
    };
    for (slot, (&xv, &yv)) in xs.iter().zip(ys.iter()).enumerate() {
        let want = (((2.0 * xv) + 1.5) * (yv * 3.0)) + 0.1;
        assert!(
            (comp_values[slot] - want).abs() < comp_tolerance,
            "slot {slot}: {} vs {want}",
            comp_values[slot]
        );
    }

    // an extra step is rejected
    let mut extra = program.clone();
    extra.steps.push(SimdStep::Mul(SimdOperand::Const(0)));
    let (r_extra, t_extra) = simd_execute(&extra, &[x.clone(), y.clone()], &consts).unwrap();
    assert!(
        !verify_simd(&kp, &r_extra, expected_fp, Some(&t_extra), &program).unwrap().is_accepted(),
        "extra step must be rejected"
    );

    // a permuted program is rejected
    let mut permuted = program.clone();
    permuted.steps.swap(2, 6);
    let (r_perm, t_perm) = simd_execute(&permuted, &[x.clone(), y.clone()], &consts).unwrap();
    assert!(
        !verify_simd(&kp, &r_perm, expected_fp, Some(&t_perm), &program).unwrap().is_accepted(),
        "permuted step order must be rejected"
    );

    // the float hazard: linted out, and demonstrably dangerous when forced
    let hazard = SimdProgram {
        steps: vec![
            SimdStep::Load(SimdOperand::Input(0)),
            SimdStep::Add(SimdOperand::Const(0)),
            SimdStep::Sub(SimdOperand::Const(0)),
        ],
    };
    let findings = lint_program(&hazard, &[4.0], 8);
    assert!(
        findings.iter().any(|v| matches!(v, Violation::SubtractionStep { .. })),
        "the linter must flag the subtraction"
    );

    let hx = encode_simd(&kp, &[0.0001], 7, 1).unwrap();
    let big = encode_simd(&kp, &[1e13], 4, 1).unwrap();
    let (hz, _) = simd_execute(&hazard, &[hx], &[big]).unwrap();
    let slots = fpdel_core::he_backend::decrypt_simd(&kp, &hz.ct).unwrap();
    assert_eq!(slots[1], 7.0, "fingerprint slot returns to its original value");
    assert!(slots[0].abs() < comp_tolerance, "computation slot collapsed to ~0");
    assert_ne!(slots[0], 0.0001, "the small addend was genuinely lost");

    pass("simd-restrictions: honest poly accepted, tampering rejected, float hazard linted");
}
