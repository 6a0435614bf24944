//! One-process delegate/serve/verify round trip over a circuit file, with
//! optional malicious server behaviour.

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use fpdel_core::fingerprint::FingerprintScheme;
use fpdel_core::log_mult::{compile_circuit, PlanStep};
use fpdel_core::protocol::{
    self, serve_honest, verify_response, DelegationRequest, ResponseVerdict, ServerResponse,
};
use fpdel_core::simd_fp::simd_execute;

use crate::circuit_file::CircuitFile;

pub struct VerifyRun {
    pub report: serde_json::Value,
    pub accepted: bool,
}

pub fn run(
    file: &CircuitFile,
    inputs_arg: &str,
    seed: Option<u64>,
    malicious: Option<&str>,
) -> Result<VerifyRun> {
    if file.simd {
        run_simd(file, inputs_arg, seed, malicious)
    } else {
        run_word(file, inputs_arg, seed, malicious)
    }
}

fn run_word(
    file: &CircuitFile,
    inputs_arg: &str,
    seed: Option<u64>,
    malicious: Option<&str>,
) -> Result<VerifyRun> {
    let circuit = file.to_circuit()?;
    let layout = file.layout()?;
    let split = file.split(layout)?;
    let inputs: Vec<u64> = inputs_arg
        .split(',')
        .map(|s| s.trim().parse::<u64>().context("inputs must be integers"))
        .collect::<Result<_>>()?;
    if inputs.len() != circuit.num_vars() {
        bail!("circuit declares {} inputs, {} supplied", circuit.num_vars(), inputs.len());
    }

    // assemble per-addend fingerprints: annotations first, sampling for the
    // rest (seed required when anything is sampled)
    let plan = compile_circuit(&circuit, layout, split)?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let m_eff = split.map(|s| s.m_a).unwrap_or(layout.m);
    let shift = split.map(|s| s.m_c).unwrap_or(0);
    let mut sample = |hint: &str| -> Result<u64> {
        let rng = rng
            .as_mut()
            .ok_or_else(|| anyhow!("{hint} has no fingerprint annotation; provide --seed"))?;
        let s = fpdel_core::fingerprint::sample_integer_fingerprints(rng, 1, m_eff)?;
        Ok(s.value(0)? << shift)
    };
    let mut values = Vec::new();
    for spec in &plan.inputs {
        match file.input_fp(spec.var) {
            Some(fp) => values.push(fp),
            None => values.push(sample(&format!("input {}", spec.var))?),
        }
    }
    for (k, spec) in plan.consts.iter().enumerate() {
        match file.const_fps.get(k) {
            Some(&fp) => values.push(fp),
            None => {
                // word-mode default: a constant fingerprints itself
                let v = spec.original as u64;
                if split.is_none() && v >= 2 && v <= layout.fp_mask() {
                    values.push(v);
                } else {
                    values.push(sample(&format!("constant {k}"))?);
                }
            }
        }
    }
    let scheme = FingerprintScheme::Integer { values };

    let kp = fpdel_core::he_backend::keygen(fpdel_core::he_backend::KeyKind::Word {
        modulus: layout.modulus(),
    })?;
    let (request, expected_fp) =
        protocol::prepare_request(&kp, &circuit, &inputs, &scheme, layout, split)?;

    let response = match malicious {
        None => serve_honest(&request)?,
        Some(strategy) => serve_malicious_word(&request, strategy)?,
    };
    let verified = verify_response(&kp, &request, &response, expected_fp as i64)?;
    let (verdict, value) = match &verified.verdict {
        ResponseVerdict::Accepted { comp_value } => ("accepted", json!(comp_value)),
        ResponseVerdict::Rejected => ("rejected", json!(null)),
        ResponseVerdict::Nullified { .. } => ("nullified", json!(null)),
        ResponseVerdict::AcceptedSimd { .. } => unreachable!(),
    };
    Ok(VerifyRun {
        accepted: verified.is_accepted(),
        report: json!({
            "mode": if plan.lut_steps() > 0 { "logmult" } else { "word" },
            "inputs": inputs,
            "expected_fp": expected_fp,
            "malicious": malicious,
            "verdict": verdict,
            "value": value,
        }),
    })
}

fn serve_malicious_word(req: &DelegationRequest, strategy: &str) -> Result<ServerResponse> {
    let DelegationRequest::Word(word) = req else { bail!("word strategies need a word request") };
    let mut plan = word.plan.clone();
    match strategy {
        // drop the step that brings in the first input, then repair the
        // accumulator flow: whatever would have extended the dropped value
        // starts the chain instead
        "omit-x" => {
            use fpdel_core::log_mult::Operand;
            let idx = plan
                .steps
                .iter()
                .position(|s| {
                    matches!(
                        s,
                        PlanStep::Load(Operand::Input(0)) | PlanStep::BBAdd(Operand::Input(0))
                    )
                })
                .ok_or_else(|| anyhow!("plan never adds input 0"))?;
            plan.steps.remove(idx);
            let mut repaired = Vec::with_capacity(plan.steps.len());
            let mut acc_occupied = false;
            for step in plan.steps {
                let step = match (step, acc_occupied) {
                    (PlanStep::BBAdd(op), false) => PlanStep::Load(op),
                    (PlanStep::AddEncConst(k), false) => PlanStep::Load(Operand::Const(k)),
                    // nothing to scale or hop yet; the omission swallows it
                    (
                        PlanStep::MulClearConst(_)
                        | PlanStep::ApplyExpLUT
                        | PlanStep::ApplyLogLUT,
                        false,
                    ) => continue,
                    (s, _) => s,
                };
                acc_occupied = true;
                repaired.push(step);
            }
            plan.steps = repaired;
        }
        "skip-exp" => {
            let idx = plan
                .steps
                .iter()
                .rposition(|s| matches!(s, PlanStep::ApplyExpLUT))
                .ok_or_else(|| anyhow!("plan has no exponentiation hop to skip"))?;
            plan.steps.remove(idx);
        }
        other => bail!("unknown word-mode strategy {other:?} (try omit-x or skip-exp)"),
    }
    let result = protocol::execute_word_plan(word, &plan)?;
    Ok(ServerResponse::Word { result: result.ct, steps_executed: plan.steps.len() })
}

fn run_simd(
    file: &CircuitFile,
    inputs_arg: &str,
    seed: Option<u64>,
    malicious: Option<&str>,
) -> Result<VerifyRun> {
    let circuit = file.to_circuit()?;
    let comp_inputs: Vec<Vec<f64>> = inputs_arg
        .split(';')
        .map(|var| {
            var.split(',')
                .map(|s| s.trim().parse::<f64>().context("simd inputs must be numbers"))
                .collect()
        })
        .collect::<Result<_>>()?;
    if comp_inputs.len() != circuit.num_vars() {
        bail!(
            "circuit declares {} inputs, {} supplied (separate vectors with ';')",
            circuit.num_vars(),
            comp_inputs.len()
        );
    }
    let width = comp_inputs[0].len();
    if comp_inputs.iter().any(|v| v.len() != width) {
        bail!("all input vectors must have the same slot count");
    }

    let (program, const_values) = fpdel_core::simd_fp::compile_simd_program(&circuit)?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut sample = |hint: &str| -> Result<u64> {
        use rand::Rng;
        rng.as_mut()
            .map(|r| r.gen_range(2..64u64))
            .ok_or_else(|| anyhow!("{hint} has no fingerprint annotation; provide --seed"))
    };
    let mut input_fps = Vec::new();
    for var in 0..circuit.num_vars() {
        match file.input_fp(var) {
            Some(fp) => input_fps.push(fp),
            None => input_fps.push(sample(&format!("input {var}"))?),
        }
    }
    let mut const_fps = Vec::new();
    for k in 0..const_values.len() {
        match file.const_fps.get(k) {
            Some(&fp) => const_fps.push(fp),
            None => const_fps.push(sample(&format!("constant {k}"))?),
        }
    }
    let fp_slot = file.fp_slot.unwrap_or(width);
    let depth_budget = file.depth_budget.unwrap_or_else(|| program.depth_cost().max(1));

    let kp = fpdel_core::he_backend::keygen(fpdel_core::he_backend::KeyKind::Simd {
        depth_budget,
    })?;
    let (request, expected_fp) = protocol::prepare_simd_request(
        &kp,
        &circuit,
        &comp_inputs,
        &input_fps,
        &const_fps,
        fp_slot,
        depth_budget,
    )?;

    let response = match malicious {
        None => serve_honest(&request)?,
        Some("reorder-simd") => {
            let DelegationRequest::Simd(simd) = &request else { unreachable!() };
            let mut program = simd.program.clone();
            if program.steps.len() < 2 {
                bail!("program too short to reorder");
            }
            let last = program.steps.len() - 1;
            program.steps.swap(last - 1, last);
            let (result, trace) = simd_execute(&program, &simd.inputs, &simd.consts)?;
            ServerResponse::Simd { result, trace, steps_executed: program.steps.len() }
        }
        Some(other) => bail!("unknown simd strategy {other:?} (try reorder-simd)"),
    };
    let verified = verify_response(&kp, &request, &response, expected_fp)?;
    let (verdict, values) = match &verified.verdict {
        ResponseVerdict::AcceptedSimd { comp_values } => ("accepted", json!(comp_values)),
        ResponseVerdict::Rejected => ("rejected", json!(null)),
        _ => unreachable!(),
    };
    Ok(VerifyRun {
        accepted: verified.is_accepted(),
        report: json!({
            "mode": "simd",
            "expected_fp": expected_fp,
            "malicious": malicious,
            "verdict": verdict,
            "value": values,
        }),
    })
}
