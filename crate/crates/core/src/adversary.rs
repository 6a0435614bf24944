//! Attack strategies against the fingerprint schemes, with per-trial reports
//! and aggregated detection statistics.
//!
//! Every strategy confines itself to the API its scenario legally grants the
//! server: raw evaluation gates in the bit-granularity setting, the addition
//! blackbox (and tables) in the restricted word settings, and program steps
//! in the SIMD setting. Trial transcripts record the operations used so the
//! confinement is checkable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blackbox_add::{bb_add, bb_add_chain, BlackboxConfig, BlackboxMode};
use crate::blind_ops::{blind_lut_eval, ClearLUT};
use crate::error::{Error, Result};
use crate::fingerprint::{
    encode_word, sample_integer_fingerprints, verify_result, EncodedWord, FingerprintScheme,
    Verdict, WordLayout,
};
use crate::he_backend::{
    decrypt_bit, encrypt, eval_add, keygen, KeyKind, Plaintext,
};
use crate::log_mult::LutDirection;

/// Which server-facing API a scenario grants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Bit granularity, full evaluation gates (including subtraction).
    BitGranularity,
    /// Word granularity, blackbox additions only.
    RestrictedAddition,
    /// Word granularity, blackbox additions plus table hops.
    LogMult,
    /// SIMD vectors, program steps only.
    Simd,
}

/// One operation of an attack transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranscriptOp {
    EvalGate { gate: String },
    BbAdd { left: usize, right: usize },
    ApplyLut { direction: LutDirection },
    SimdStep { step: String },
}

impl TranscriptOp {
    pub fn legal_in(&self, scenario: Scenario) -> bool {
        match self {
            TranscriptOp::EvalGate { .. } => scenario == Scenario::BitGranularity,
            TranscriptOp::BbAdd { .. } => {
                matches!(scenario, Scenario::RestrictedAddition | Scenario::LogMult)
            }
            TranscriptOp::ApplyLut { .. } => scenario == Scenario::LogMult,
            TranscriptOp::SimdStep { .. } => scenario == Scenario::Simd,
        }
    }
}

/// Outcome of one adversarial run. `AcceptedWrong` is the only attack
/// success: verification passed while the decrypted computation value
/// deviates from the honest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    AcceptedWrong,
    AcceptedCorrect,
    Rejected,
    Nullified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub strategy: String,
    pub scenario: Scenario,
    pub m: u32,
    pub n: u32,
    pub i: usize,
    pub scheme: String,
    pub outcome: Outcome,
    pub transcript: Vec<TranscriptOp>,
}

/// Aggregated Monte Carlo statistics with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const WILSON_Z95: f64 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl DetectionStats {
    pub fn from_counts(successes: u64, trials: u64) -> DetectionStats {
        let (ci_low, ci_high) = wilson_interval(successes, trials, WILSON_Z95);
        DetectionStats {
            trials,
            successes,
            success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
        }
    }
}

/// Attack families. Fields fix the adversary's choices where the scenario
/// does not sample them per trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AttackStrategy {
    /// Return consistent wrong outputs chosen from a cleartext table,
    /// whatever key the inputs arrive under.
    ConsistentLut { lut: ClearLUT },
    /// Omit one addend and mask the missing fingerprint bit by repeatedly
    /// adding another addend; the bit distance is guessed per trial.
    OmitAndMask,
    /// Self-add one input until its fingerprint wraps around.
    OverflowClear { reps: u64, defended: bool },
    /// Replace the requested multiset of addends with a random one.
    BlindSubsetSum { bound: u64 },
    /// Execute a multiplication plan with one exponentiation hop removed.
    SkipExpLut,
    /// Execute a permuted SIMD program.
    ReorderSimd,
}

impl AttackStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::ConsistentLut { .. } => "consistent-lut",
            AttackStrategy::OmitAndMask => "omit-and-mask",
            AttackStrategy::OverflowClear { .. } => "overflow-clear",
            AttackStrategy::BlindSubsetSum { .. } => "blind-subset-sum",
            AttackStrategy::SkipExpLut => "skip-exp-lut",
            AttackStrategy::ReorderSimd => "reorder-simd",
        }
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            AttackStrategy::ConsistentLut { .. } => Scenario::BitGranularity,
            AttackStrategy::OmitAndMask
            | AttackStrategy::OverflowClear { .. }
            | AttackStrategy::BlindSubsetSum { .. } => Scenario::RestrictedAddition,
            AttackStrategy::SkipExpLut => Scenario::LogMult,
            AttackStrategy::ReorderSimd => Scenario::Simd,
        }
    }
}

/// Scenario parameters for the word-granularity attacks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WordScenario {
    pub layout: WordLayout,
    pub num_inputs: usize,
}

/// One consistency-attack run: for every key and every input value the
/// malicious server blindly evaluates its cleartext table and returns the
/// chosen output, consistently across keys.
pub struct ConsistencyRun {
    pub input: u64,
    pub key_index: usize,
    pub output: u64,
    pub expected_row: u64,
    pub matches_row: bool,
}

pub fn attack_consistent_lut(
    lut: &ClearLUT,
    num_keys: usize,
) -> Result<(Vec<ConsistencyRun>, Vec<TrialReport>)> {
    let n = lut.input_bits();
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for key_index in 0..num_keys {
        let kp = keygen(KeyKind::Bit)?;
        for input in 0..1u64 << n {
            let bits: Vec<_> = (0..n)
                .map(|j| encrypt(&kp, Plaintext::Bit(((input >> j) & 1) as i64)))
                .collect::<Result<_>>()?;
            let out_bits = blind_lut_eval(&bits, lut)?;
            let output = out_bits
                .iter()
                .enumerate()
                .map(|(j, ct)| Ok((decrypt_bit(&kp, ct)? as u64) << j))
                .sum::<Result<u64>>()?;
            let expected_row = lut.lookup(input);
            let transcript = vec![
                TranscriptOp::EvalGate { gate: "or-fold".into() },
                TranscriptOp::EvalGate { gate: "row-products".into() },
                TranscriptOp::EvalGate { gate: "row-sum".into() },
            ];
            // the requested computation is the input itself; returning the
            // table row is the attack
            let outcome = if output == expected_row {
                if expected_row == input {
                    Outcome::AcceptedCorrect
                } else {
                    Outcome::AcceptedWrong
                }
            } else {
                Outcome::Rejected
            };
            runs.push(ConsistencyRun {
                input,
                key_index,
                output,
                expected_row,
                matches_row: output == expected_row,
            });
            reports.push(TrialReport {
                strategy: "consistent-lut".into(),
                scenario: Scenario::BitGranularity,
                m: 0,
                n: n as u32,
                i: 1,
                scheme: "none".into(),
                outcome,
                transcript,
            });
        }
    }
    Ok((runs, reports))
}

/// Exact enumeration of the masking attack's guess space: all ordered
/// distinct position pairs (target, helper) against all distance guesses.
/// Returns (successful guesses, total guesses); the ratio is 1/(2m-2).
pub fn masking_guess_enumeration(m: u32) -> (u64, u64) {
    let mut successes = 0u64;
    let mut total = 0u64;
    for px in 0..m {
        for py in 0..m {
            if px == py {
                continue;
            }
            for d in 1..m {
                total += 1;
                if py + d == px {
                    successes += 1;
                }
            }
        }
    }
    (successes, total)
}

/// One masking trial: random distinct fingerprint positions, the server
/// omits one addend and adds another 2^d extra times (built by doubling, so
/// the transcript stays within blackbox additions), guessing d uniformly.
pub fn attack_omit_and_mask(scenario: &WordScenario, rng: &mut impl Rng) -> Result<TrialReport> {
    let layout = scenario.layout;
    let i = scenario.num_inputs;
    let m = layout.m;
    if i < 2 || (i as u64) > m as u64 {
        return Err(Error::InvalidParams("masking needs 2 <= i <= m inputs".into()));
    }
    // random distinct positions
    let mut positions: Vec<u32> = (0..m).collect();
    for idx in 0..i {
        let swap = rng.gen_range(idx..positions.len());
        positions.swap(idx, swap);
    }
    positions.truncate(i);
    let scheme = FingerprintScheme::Binary { positions: positions.clone() };

    let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;
    // unit computation values keep the computation section far from overflow
    let words: Vec<EncodedWord> = (0..i)
        .map(|j| encode_word(&kp, layout, 1, scheme.value(j).unwrap()))
        .collect::<Result<_>>()?;
    let expected_fp: u64 = (0..i).map(|j| scheme.value(j).unwrap()).sum();
    let honest_comp = i as u64;

    let omitted = rng.gen_range(0..i);
    let helper = loop {
        let h = rng.gen_range(0..i);
        if h != omitted {
            break h;
        }
    };
    let distance = rng.gen_range(1..m);

    // the binary-fingerprint era blackbox nullifies only on overflow out of
    // the fingerprint section
    let cfg = BlackboxConfig::new(layout, BlackboxMode::IntegerFp);
    let mut transcript = Vec::new();

    // sum everything except the omitted addend
    let mut acc: Option<EncodedWord> = None;
    for (j, w) in words.iter().enumerate() {
        if j == omitted {
            continue;
        }
        acc = Some(match acc {
            None => w.clone(),
            Some(a) => {
                transcript.push(TranscriptOp::BbAdd { left: usize::MAX, right: j });
                bb_add(&cfg, &a, w)?
            }
        });
    }
    let mut acc = acc.expect("at least one addend remains");

    // build helper * 2^d by doubling, then add it once
    let mut boosted = words[helper].clone();
    for _ in 0..distance {
        transcript.push(TranscriptOp::BbAdd { left: helper, right: helper });
        boosted = bb_add(&cfg, &boosted, &boosted)?;
    }
    transcript.push(TranscriptOp::BbAdd { left: usize::MAX, right: helper });
    acc = bb_add(&cfg, &acc, &boosted)?;

    let outcome = classify(&kp, &acc, expected_fp, honest_comp)?;
    Ok(TrialReport {
        strategy: "omit-and-mask".into(),
        scenario: Scenario::RestrictedAddition,
        m,
        n: layout.n,
        i,
        scheme: "binary".into(),
        outcome,
        transcript,
    })
}

fn classify(
    kp: &crate::he_backend::KeyPair,
    result: &EncodedWord,
    expected_fp: u64,
    honest_comp: u64,
) -> Result<Outcome> {
    Ok(match verify_result(kp, result, expected_fp)? {
        Verdict::Nullified => Outcome::Nullified,
        Verdict::Rejected { .. } => Outcome::Rejected,
        Verdict::Accepted { comp_value } => {
            if comp_value == honest_comp {
                Outcome::AcceptedCorrect
            } else {
                Outcome::AcceptedWrong
            }
        }
    })
}

/// One overflow-clearing trial: the requested computation is the identity on
/// a single input; the server self-adds it `reps` times. Against the
/// defended blackbox chain the result collapses to 0; with nullification
/// disabled, 2^m + 1 repetitions restore the original fingerprint over a
/// corrupted computation value.
pub fn attack_overflow_clear(
    scenario: &WordScenario,
    reps: u64,
    defended: bool,
    rng: &mut impl Rng,
) -> Result<TrialReport> {
    let layout = scenario.layout;
    let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;
    let comp = rng.gen_range(1..layout.comp_max() / 2);
    let fp = rng.gen_range(2..=layout.fp_mask() / 2);
    let x = encode_word(&kp, layout, comp, fp)?;
    let mut transcript = Vec::new();

    let result = if defended {
        let cfg = BlackboxConfig::new(layout, BlackboxMode::IntegerFp);
        let words = vec![x.clone(); reps as usize];
        for k in 1..reps as usize {
            transcript.push(TranscriptOp::BbAdd { left: 0, right: k });
        }
        if reps == 1 {
            x.clone()
        } else {
            bb_add_chain(&cfg, &words)?
        }
    } else {
        // weakened blackbox: plain ring additions, no carry inspection
        let mut acc = x.clone();
        for k in 1..reps {
            transcript.push(TranscriptOp::BbAdd { left: 0, right: k as usize });
            acc = EncodedWord { layout, ct: eval_add(&acc.ct, &x.ct)? };
        }
        acc
    };

    let outcome = classify(&kp, &result, fp, comp)?;
    Ok(TrialReport {
        strategy: "overflow-clear".into(),
        scenario: Scenario::RestrictedAddition,
        m: layout.m,
        n: layout.n,
        i: 1,
        scheme: "integer".into(),
        outcome,
        transcript,
    })
}

/// One blind-subset-sum trial: integer fingerprints, the server replaces the
/// requested "each addend exactly once" multiset with a random multiset
/// (at most `bound` copies of each addend).
pub fn attack_blind_subset(
    scenario: &WordScenario,
    bound: u64,
    rng: &mut impl Rng,
) -> Result<TrialReport> {
    let layout = scenario.layout;
    let i = scenario.num_inputs;
    let scheme = sample_integer_fingerprints(rng, i, layout.m)?;
    let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;

    let comp_cap = (layout.comp_max() / (i as u64 * bound.max(1))).max(2);
    let comps: Vec<u64> = (0..i).map(|_| rng.gen_range(0..comp_cap)).collect();
    let words: Vec<EncodedWord> = (0..i)
        .map(|j| encode_word(&kp, layout, comps[j], scheme.value(j).unwrap()))
        .collect::<Result<_>>()?;
    let expected_fp: u64 = (0..i).map(|j| scheme.value(j).unwrap()).sum();
    let honest_comp: u64 = comps.iter().sum();

    // a deviant multiset, rejecting the honest one and the empty one
    let counts: Vec<u64> = loop {
        let c: Vec<u64> = (0..i).map(|_| rng.gen_range(0..=bound)).collect();
        if c.iter().any(|&x| x != 1) && c.iter().sum::<u64>() > 0 {
            break c;
        }
    };

    let mut multiset = Vec::new();
    let mut transcript = Vec::new();
    for (j, &cnt) in counts.iter().enumerate() {
        for _ in 0..cnt {
            if !multiset.is_empty() {
                transcript.push(TranscriptOp::BbAdd { left: usize::MAX, right: j });
            }
            multiset.push(words[j].clone());
        }
    }
    let cfg = BlackboxConfig::new(layout, BlackboxMode::IntegerFp);
    let result = bb_add_chain(&cfg, &multiset)?;

    let outcome = classify(&kp, &result, expected_fp, honest_comp)?;
    Ok(TrialReport {
        strategy: "blind-subset-sum".into(),
        scenario: Scenario::RestrictedAddition,
        m: layout.m,
        n: layout.n,
        i,
        scheme: "integer".into(),
        outcome,
        transcript,
    })
}

/// Skipped-hop attacks against a multiplication plan: execute the request's
/// plan unmodified, minus its final exponentiation hop, and minus its first
/// blackbox addition. The unmodified run is accepted; both omissions must be
/// caught (short counter, or wrong addition fingerprint).
pub fn attack_skip_exp(
    kp: &crate::he_backend::KeyPair,
    request: &crate::protocol::WordRequest,
    expected_fp: u64,
    honest_comp: u64,
) -> Result<Vec<TrialReport>> {
    use crate::log_mult::PlanStep;
    let layout = request.plan.layout;
    let mut variants: Vec<(&str, Option<usize>)> = vec![("unmodified", None)];
    if let Some(idx) =
        request.plan.steps.iter().rposition(|s| matches!(s, PlanStep::ApplyExpLUT))
    {
        variants.push(("skip-final-exp", Some(idx)));
    }
    if let Some(idx) = request.plan.steps.iter().position(|s| matches!(s, PlanStep::BBAdd(_))) {
        variants.push(("skip-addition", Some(idx)));
    }

    let mut reports = Vec::new();
    for (label, skip) in variants {
        let mut plan = request.plan.clone();
        if let Some(idx) = skip {
            plan.steps.remove(idx);
        }
        let transcript = plan
            .steps
            .iter()
            .filter_map(|s| match s {
                PlanStep::BBAdd(_) | PlanStep::AddEncConst(_) => {
                    Some(TranscriptOp::BbAdd { left: usize::MAX, right: usize::MAX })
                }
                PlanStep::ApplyExpLUT => {
                    Some(TranscriptOp::ApplyLut { direction: LutDirection::Exp })
                }
                PlanStep::ApplyLogLUT => {
                    Some(TranscriptOp::ApplyLut { direction: LutDirection::Log })
                }
                _ => None,
            })
            .collect();
        let result = crate::protocol::execute_word_plan(request, &plan)?;
        reports.push(TrialReport {
            strategy: format!("skip-exp-lut/{label}"),
            scenario: Scenario::LogMult,
            m: layout.m,
            n: layout.n,
            i: request.inputs.len(),
            scheme: "binary".into(),
            outcome: classify(kp, &result, expected_fp, honest_comp)?,
            transcript,
        });
    }
    Ok(reports)
}

/// Reordered-program attack against a SIMD request: swap the last two steps
/// and return the genuinely executed trace. The trace or fingerprint check
/// must reject it.
pub fn attack_reorder_simd(
    kp: &crate::he_backend::KeyPair,
    request: &crate::protocol::SimdRequest,
    expected_fp: i64,
) -> Result<TrialReport> {
    use crate::simd_fp::{simd_execute, verify_simd, SimdVerdict};
    if request.program.steps.len() < 2 {
        return Err(Error::InvalidParams("program too short to reorder".into()));
    }
    let mut permuted = request.program.clone();
    let last = permuted.steps.len() - 1;
    permuted.steps.swap(last - 1, last);
    let (result, trace) = simd_execute(&permuted, &request.inputs, &request.consts)?;
    let verdict = verify_simd(kp, &result, expected_fp, Some(&trace), &request.program)?;
    let outcome = match verdict {
        // unreachable while the trace check is on: the executed trace can
        // never match the requested program after a permutation
        SimdVerdict::Accepted { .. } => Outcome::AcceptedWrong,
        _ => Outcome::Rejected,
    };
    let transcript = trace
        .steps
        .iter()
        .map(|s| TranscriptOp::SimdStep { step: format!("{s:?}") })
        .collect();
    Ok(TrialReport {
        strategy: "reorder-simd".into(),
        scenario: Scenario::Simd,
        m: 0,
        n: 0,
        i: request.inputs.len(),
        scheme: "simd-integer".into(),
        outcome,
        transcript,
    })
}

/// Aggregate a randomized strategy over `trials` runs with per-trial rng
/// streams split deterministically from the seed. Success means
/// `AcceptedWrong`.
pub fn monte_carlo(
    strategy: &AttackStrategy,
    scenario: &WordScenario,
    trials: u64,
    seed: u64,
) -> Result<(DetectionStats, Vec<TrialReport>)> {
    if trials == 0 {
        return Err(Error::InvalidParams("monte carlo needs at least one trial".into()));
    }
    let mut reports = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial + 1);
        let report = match strategy {
            AttackStrategy::OmitAndMask => attack_omit_and_mask(scenario, &mut rng)?,
            AttackStrategy::OverflowClear { reps, defended } => {
                attack_overflow_clear(scenario, *reps, *defended, &mut rng)?
            }
            AttackStrategy::BlindSubsetSum { bound } => {
                attack_blind_subset(scenario, *bound, &mut rng)?
            }
            other => {
                return Err(Error::InvalidParams(format!(
                    "{} is a deterministic demonstration, not a Monte Carlo strategy",
                    other.name()
                )))
            }
        };
        reports.push(report);
    }
    let successes = reports.iter().filter(|r| r.outcome == Outcome::AcceptedWrong).count() as u64;
    Ok((DetectionStats::from_counts(successes, trials), reports))
}
