//! Built-in demonstrations, each printing a JSON report to stdout.

use anyhow::Result;
use serde_json::json;

use fpdel_core::adversary::attack_consistent_lut;
use fpdel_core::blackbox_add::{bb_add, BlackboxConfig, BlackboxMode};
use fpdel_core::blind_ops::ClearLUT;
use fpdel_core::fingerprint::{
    encode_word, verify_result, FingerprintScheme, Verdict, WordLayout,
};
use fpdel_core::he_backend::{decrypt_simd, decrypt_word, keygen, KeyKind};
use fpdel_core::log_mult::{Circuit, FpSplit};
use fpdel_core::protocol::{
    self, execute_word_plan_traced, serve_honest, verify_response, DelegationRequest,
    ResponseVerdict, ServerResponse,
};
use fpdel_core::simd_fp::{
    encode_simd, expected_simd_fingerprint, lint_program, simd_execute, verify_simd,
    SimdOperand, SimdProgram, SimdStep,
};

pub const DEMO_NAMES: &[&str] = &[
    "lut-attack",
    "add-fingerprint",
    "logmult-trace",
    "seal-example",
    "simd-poly",
    "float-hazard",
];

pub fn run(name: &str) -> Result<Option<serde_json::Value>> {
    let report = match name {
        "lut-attack" => lut_attack()?,
        "add-fingerprint" => add_fingerprint()?,
        "logmult-trace" => logmult_trace()?,
        "seal-example" => seal_example()?,
        "simd-poly" => simd_poly()?,
        "float-hazard" => float_hazard()?,
        _ => return Ok(None),
    };
    Ok(Some(report))
}

/// Bit-granularity consistency attack: a 3-bit table with outputs
/// alternating 0/1, blindly evaluated under two independent keys.
fn lut_attack() -> Result<serde_json::Value> {
    let lut = ClearLUT::alternating(3);
    let keys = 2;
    let (runs, _) = attack_consistent_lut(&lut, keys)?;
    let table: Vec<_> = (0..8u64)
        .map(|input| {
            let outputs: Vec<u64> =
                runs.iter().filter(|r| r.input == input).map(|r| r.output).collect();
            let consistent = outputs.windows(2).all(|w| w[0] == w[1]);
            json!({
                "input": input,
                "outputs": outputs,
                "chosen_row": lut.lookup(input),
                "consistent": consistent,
            })
        })
        .collect();
    let all_match = runs.iter().all(|r| r.matches_row);
    Ok(json!({
        "demo": "lut-attack",
        "keys": keys,
        "inputs": 8,
        "table": table,
        "all_outputs_equal_table_rows": all_match,
    }))
}

/// Word-granularity fingerprinted addition: 0010010 + 1100100 through the
/// carry-detecting blackbox.
fn add_fingerprint() -> Result<serde_json::Value> {
    let layout = WordLayout::new(3, 4)?;
    let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;
    let cfg = BlackboxConfig::new(layout, BlackboxMode::CompleteBinary);
    let a = encode_word(&kp, layout, 0b001, 0b0010)?;
    let b = encode_word(&kp, layout, 0b110, 0b0100)?;
    let sum = bb_add(&cfg, &a, &b)?;
    let raw = decrypt_word(&kp, &sum.ct)?;
    let verdict = verify_result(&kp, &sum, 0b0110)?;
    Ok(json!({
        "demo": "add-fingerprint",
        "a": format!("{:07b}", layout.pack(0b001, 0b0010)),
        "b": format!("{:07b}", layout.pack(0b110, 0b0100)),
        "sum": format!("{raw:07b}"),
        "expected_fp": "0110",
        "verdict": verdict_str(&verdict),
        "comp": match verdict { Verdict::Accepted { comp_value } => format!("{comp_value:03b}"), _ => String::new() },
    }))
}

/// The log-table multiplication trace for 2*(x*y + 32) at x=4, y=8,
/// printing every intermediate word.
fn logmult_trace() -> Result<serde_json::Value> {
    let layout = WordLayout::new(8, 8)?;
    let split = FpSplit::new(layout, 5, 3)?;
    let scheme = FingerprintScheme::Binary { positions: vec![3, 4, 5, 6] };
    let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;
    let (request, expected_fp) = protocol::prepare_request(
        &kp,
        &Circuit::log_trace_example(),
        &[4, 8],
        &scheme,
        layout,
        Some(split),
    )?;
    let DelegationRequest::Word(word) = &request else { unreachable!() };
    let (result, trace) = execute_word_plan_traced(word, &word.plan)?;
    let fmt = |v: u64| format!("{:08b} {:08b}", v >> 8, v & 0xff);
    let steps: Vec<String> = word.plan.steps.iter().map(|s| format!("{s:?}")).collect();
    let trace_words: Vec<String> = trace
        .iter()
        .map(|w| Ok(fmt(decrypt_word(&kp, &w.ct)?)))
        .collect::<Result<_>>()?;
    let verdict = verify_result(&kp, &result, expected_fp)?;
    Ok(json!({
        "demo": "logmult-trace",
        "circuit": "2*(x*y + 32), x=4, y=8",
        "steps": steps,
        "trace": trace_words,
        "expected_fp": format!("{expected_fp:08b}"),
        "verdict": verdict_str(&verdict),
        "comp": match verdict { Verdict::Accepted { comp_value } => comp_value, _ => 0 },
    }))
}

/// The full word pipeline for F(x, y) = (2x) + y + 3 with fingerprints
/// (3, 2) and inputs (4, 7): encode, delegate, verify.
fn seal_example() -> Result<serde_json::Value> {
    let layout = WordLayout::new(6, 6)?;
    let scheme = FingerprintScheme::Integer { values: vec![3, 2, 3] };
    let mut delegator = protocol::Delegator::new();
    let prep = delegator.delegate(&Circuit::shift_example(), &[4, 7], &scheme, layout, None)?;
    let DelegationRequest::Word(word) = &prep.request else { unreachable!() };
    let encoded: Vec<u64> = word
        .inputs
        .iter()
        .chain(word.consts.iter())
        .map(|w| decrypt_word(&prep.kp, &w.ct))
        .collect::<fpdel_core::Result<_>>()?;
    let response = serve_honest(&prep.request)?;
    let ServerResponse::Word { result, .. } = &response else { unreachable!() };
    let raw = decrypt_word(&prep.kp, result)?;
    let verified = verify_response(&prep.kp, &prep.request, &response, prep.expected_fp as i64)?;
    let (verdict, comp) = match verified.verdict {
        ResponseVerdict::Accepted { comp_value } => ("accepted", comp_value),
        ResponseVerdict::Rejected => ("rejected", 0),
        ResponseVerdict::Nullified { .. } => ("nullified", 0),
        ResponseVerdict::AcceptedSimd { .. } => unreachable!(),
    };
    Ok(json!({
        "demo": "seal-example",
        "circuit": "(2*x) + y + 3",
        "encoded_inputs": { "x": encoded[0], "y": encoded[1], "const": encoded[2] },
        "result": raw,
        "fp": prep.expected_fp,
        "comp": comp,
        "verdict": verdict,
    }))
}

/// The restricted SIMD polynomial (((2x)+1.5)*(y*3))+0.1 over float
/// computation slots with an integer fingerprint slot.
fn simd_poly() -> Result<serde_json::Value> {
    let kp = keygen(KeyKind::Simd { depth_budget: 4 })?;
    let circuit = simd_poly_circuit();
    let (program, const_values) = fpdel_core::simd_fp::compile_simd_program(&circuit)?;
    let const_fps = [2u64, 2, 3, 4];
    let xs = [4.0, 0.5];
    let ys = [8.0, 2.5];
    let fp_slot = xs.len();
    let x = encode_simd(&kp, &xs, 3, fp_slot)?;
    let y = encode_simd(&kp, &ys, 5, fp_slot)?;
    let consts: Vec<_> = const_values
        .iter()
        .zip(const_fps)
        .map(|(&v, fp)| encode_simd(&kp, &vec![v; xs.len()], fp, fp_slot))
        .collect::<fpdel_core::Result<_>>()?;
    let lint = lint_program(
        &program,
        &const_fps.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        4,
    );
    let expected = expected_simd_fingerprint(
        &program,
        &[3, 5],
        &const_fps.iter().map(|&v| v as i64).collect::<Vec<_>>(),
    )?;
    let (result, trace) = simd_execute(&program, &[x, y], &consts)?;
    let verdict = verify_simd(&kp, &result, expected, Some(&trace), &program)?;
    let accepted = verdict.is_accepted();
    let comp_values = match verdict {
        fpdel_core::simd_fp::SimdVerdict::Accepted { comp_values } => comp_values,
        _ => vec![],
    };
    Ok(json!({
        "demo": "simd-poly",
        "circuit": "(((2*x) + 1.5) * (y*3)) + 0.1",
        "lint_findings": lint.len(),
        "expected_fp": expected,
        "comp_results": comp_values,
        "verdict": if accepted { "accepted" } else { "rejected" },
    }))
}

/// The floating point rounding hazard: the linter rejects the subtraction,
/// and forcing the execution anyway shows why.
fn float_hazard() -> Result<serde_json::Value> {
    let kp = keygen(KeyKind::Simd { depth_budget: 4 })?;
    let hazard = SimdProgram {
        steps: vec![
            SimdStep::Load(SimdOperand::Input(0)),
            SimdStep::Add(SimdOperand::Const(0)),
            SimdStep::Sub(SimdOperand::Const(0)),
        ],
    };
    let findings = lint_program(&hazard, &[4.0], 4);
    let x = encode_simd(&kp, &[0.0001], 7, 1)?;
    let big = encode_simd(&kp, &[1e13], 4, 1)?;
    let (result, _) = simd_execute(&hazard, &[x], &[big])?;
    let slots = decrypt_simd(&kp, &result.ct)?;
    Ok(json!({
        "demo": "float-hazard",
        "program": "x + 1e13 - 1e13 over comp slot 0.0001, fp slots 7 +4 -4",
        "lint_findings": findings.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>(),
        "rejected_by_linter": !findings.is_empty(),
        "bypass": {
            "comp_slot": slots[0],
            "fp_slot": slots[1],
            "note": "the fingerprint returns to 7 while the computation slot lost its value",
        },
    }))
}

fn simd_poly_circuit() -> Circuit {
    use fpdel_core::log_mult::CircuitBuilder;
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
    b.finish(out).expect("demo circuit is well formed")
}

fn verdict_str(v: &Verdict) -> &'static str {
    match v {
        Verdict::Accepted { .. } => "accepted",
        Verdict::Rejected { .. } => "rejected",
        Verdict::Nullified => "nullified",
    }
}
