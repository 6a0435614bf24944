//! Delegator and server runtimes: request construction, expected-fingerprint
//! bookkeeping, restricted execution and end-to-end verification.
//!
//! One request is one evaluation context: the delegator generates a fresh
//! key per request, encodes inputs and constants with their fingerprints,
//! compiles the circuit, and computes the expected fingerprint once. The
//! server side executes the plan through the trusted primitives only and
//! never holds a key. The expected fingerprint for a fixed circuit and
//! scheme is cached and reused across input sets and servers.

use std::collections::HashMap;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::blackbox_add::{bb_add, BlackboxConfig, BlackboxMode};
use crate::error::{Error, Result};
use crate::fingerprint::{
    encode_word, expected_fingerprint_trace, verify_result, EncodedWord, FingerprintScheme,
    Verdict, WordLayout,
};
use crate::he_backend::{
    eval_mul_const, keygen, Ciphertext, KeyKind, KeyPair,
};
use crate::log_mult::{
    apply_lut, build_luts_with_fps, compile_circuit, to_log_encoding, Circuit, Domain,
    EncryptedLut, ExecutionPlan, FpSplit, Operand, PlanStep,
};
use crate::simd_fp::{
    encode_simd, expected_simd_fingerprint, lint_program, simd_execute, verify_simd,
    SimdProgram, SimdVector, SimdVerdict, TraceCircuit,
};

/// Word-granularity request: the compiled plan, the encoded addends, the
/// tables (when the plan hops domains) and the blackbox the server must use.
/// The server receives no key, no fingerprint values and no positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordRequest {
    pub plan: ExecutionPlan,
    pub inputs: Vec<EncodedWord>,
    pub consts: Vec<EncodedWord>,
    pub luts: Option<Box<(EncryptedLut, EncryptedLut)>>,
    pub blackbox: BlackboxConfig,
    /// Set when the honest result could legitimately be the zero word, so a
    /// nullified verdict is escalated for re-delegation instead of treated
    /// as an attack signal.
    pub zero_flagged: bool,
}

/// SIMD request: the program, the input vectors and the encrypted constant
/// vectors (integer stand-ins in their fingerprint slots).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimdRequest {
    pub program: SimdProgram,
    pub inputs: Vec<SimdVector>,
    pub consts: Vec<SimdVector>,
    pub depth_budget: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DelegationRequest {
    Word(WordRequest),
    Simd(SimdRequest),
}

/// Server output: the result ciphertext, plus the executed-step trace for
/// SIMD requests (produced by the tracing blackbox).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ServerResponse {
    Word { result: Ciphertext, steps_executed: usize },
    Simd { result: SimdVector, trace: TraceCircuit, steps_executed: usize },
}

/// Delegator-side verdict over a server response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResponseVerdict {
    Accepted { comp_value: u64 },
    AcceptedSimd { comp_values: Vec<f64> },
    Rejected,
    Nullified { escalate: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedResult {
    pub verdict: ResponseVerdict,
    pub steps_executed: usize,
}

impl VerifiedResult {
    pub fn is_accepted(&self) -> bool {
        matches!(
            self.verdict,
            ResponseVerdict::Accepted { .. } | ResponseVerdict::AcceptedSimd { .. }
        )
    }
}

fn blackbox_mode_for(scheme: &FingerprintScheme) -> BlackboxMode {
    match scheme {
        FingerprintScheme::Binary { .. } | FingerprintScheme::Complete { .. } => {
            BlackboxMode::CompleteBinary
        }
        FingerprintScheme::Integer { .. } => BlackboxMode::IntegerFp,
    }
}

/// Compile, encode and package one word-granularity request under `kp`,
/// returning the request and the expected fingerprint.
pub fn prepare_request(
    kp: &KeyPair,
    circuit: &Circuit,
    inputs: &[u64],
    scheme: &FingerprintScheme,
    layout: WordLayout,
    split: Option<FpSplit>,
) -> Result<(DelegationRequest, u64)> {
    let (request, expected_fp, _) =
        prepare_request_cached(kp, circuit, inputs, scheme, layout, split, None)?;
    Ok((request, expected_fp))
}

/// The cached artefact of the one-time fingerprint computation: the
/// accumulator's expected fingerprint after every plan step.
type FpTrace = Vec<u64>;

fn prepare_request_cached(
    kp: &KeyPair,
    circuit: &Circuit,
    inputs: &[u64],
    scheme: &FingerprintScheme,
    layout: WordLayout,
    split: Option<FpSplit>,
    cached_trace: Option<&FpTrace>,
) -> Result<(DelegationRequest, u64, FpTrace)> {
    match kp.kind() {
        KeyKind::Word { modulus } if modulus == layout.modulus() => {}
        other => {
            return Err(Error::LayoutMismatch(format!(
                "request requires a word key of modulus {}, got {other:?}",
                layout.modulus()
            )))
        }
    }
    if inputs.len() != circuit.num_vars() {
        return Err(Error::Request(format!(
            "circuit declares {} inputs, {} supplied",
            circuit.num_vars(),
            inputs.len()
        )));
    }
    let plan = compile_circuit(circuit, layout, split)?;
    scheme.validate(layout.m)?;
    if scheme.num_addends() < plan.num_addends() {
        return Err(Error::Scheme(format!(
            "plan has {} addends, scheme covers {}",
            plan.num_addends(),
            scheme.num_addends()
        )));
    }

    let mut encoded_inputs = Vec::with_capacity(plan.inputs.len());
    for (slot, spec) in plan.inputs.iter().enumerate() {
        let value = inputs[spec.var];
        let comp = match spec.domain {
            Domain::Value => value,
            Domain::Log => to_log_encoding(value)? as u64,
        };
        encoded_inputs.push(encode_word(kp, layout, comp, scheme.value(slot)?)?);
    }
    let mut encoded_consts = Vec::with_capacity(plan.consts.len());
    for (k, spec) in plan.consts.iter().enumerate() {
        let fp = scheme.value(plan.inputs.len() + k)?;
        encoded_consts.push(encode_word(kp, layout, spec.encoded_comp, fp)?);
    }

    // the one-time fingerprint walk, reused from the cache on re-delegation
    let fp_trace: FpTrace = match cached_trace {
        Some(t) => t.clone(),
        None => expected_fingerprint_trace(scheme, &plan)?,
    };
    let expected_fp = match fp_trace.last() {
        Some(&v) => v,
        // an empty plan echoes the first input
        None => scheme.value(0)?,
    };

    // tables carry rows only for the fingerprint states an honest execution
    // reaches before each hop; anything else blindly evaluates to 0
    let luts = if plan.lut_steps() > 0 {
        let split = plan.split.expect("compile enforced a split for table hops");
        let mut exp_fps = Vec::new();
        let mut log_fps = Vec::new();
        for (idx, step) in plan.steps.iter().enumerate() {
            if !matches!(step, PlanStep::ApplyExpLUT | PlanStep::ApplyLogLUT) {
                continue;
            }
            let before = fp_trace[idx
                .checked_sub(1)
                .ok_or_else(|| Error::Plan("table hop cannot be the first step".into()))?];
            match step {
                PlanStep::ApplyExpLUT => exp_fps.push(before),
                PlanStep::ApplyLogLUT => log_fps.push(before),
                _ => unreachable!(),
            }
        }
        exp_fps.sort_unstable();
        exp_fps.dedup();
        log_fps.sort_unstable();
        log_fps.dedup();
        Some(Box::new(build_luts_with_fps(kp, layout, split, &exp_fps, &log_fps)?))
    } else {
        None
    };

    let zero_flagged = plan
        .inputs
        .iter()
        .any(|spec| inputs[spec.var] == 0 && spec.domain == Domain::Value);

    let request = DelegationRequest::Word(WordRequest {
        plan,
        inputs: encoded_inputs,
        consts: encoded_consts,
        luts,
        blackbox: BlackboxConfig::new(layout, blackbox_mode_for(scheme)),
        zero_flagged,
    });
    Ok((request, expected_fp, fp_trace))
}

/// Package one SIMD request: compile the circuit to a program, encode the
/// inputs (comp slices plus integer fingerprints) and the constant vectors
/// (value replicated across comp slots, integer stand-in in the fingerprint
/// slot), lint, and compute the expected fingerprint.
pub fn prepare_simd_request(
    kp: &KeyPair,
    circuit: &Circuit,
    comp_inputs: &[Vec<f64>],
    input_fps: &[u64],
    const_fps: &[u64],
    fp_slot: usize,
    depth_budget: u32,
) -> Result<(DelegationRequest, i64)> {
    let (program, const_values) = crate::simd_fp::compile_simd_program(circuit)?;
    if comp_inputs.len() != circuit.num_vars() || input_fps.len() != circuit.num_vars() {
        return Err(Error::Request("one comp slice and one fingerprint per input".into()));
    }
    if const_fps.len() != const_values.len() {
        return Err(Error::Request(format!(
            "program references {} constants, {} fingerprint stand-ins supplied",
            const_values.len(),
            const_fps.len()
        )));
    }
    let width = comp_inputs.first().map(|v| v.len()).unwrap_or(0);
    let findings = lint_program(
        &program,
        &const_fps.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        depth_budget,
    );
    if !findings.is_empty() {
        return Err(Error::LintRejected(findings));
    }

    let inputs: Vec<SimdVector> = comp_inputs
        .iter()
        .zip(input_fps)
        .map(|(comp, &fp)| encode_simd(kp, comp, fp, fp_slot))
        .collect::<Result<_>>()?;
    let consts: Vec<SimdVector> = const_values
        .iter()
        .zip(const_fps)
        .map(|(&v, &fp)| encode_simd(kp, &vec![v; width], fp, fp_slot))
        .collect::<Result<_>>()?;

    let expected = expected_simd_fingerprint(
        &program,
        &input_fps.iter().map(|&v| v as i64).collect::<Vec<_>>(),
        &const_fps.iter().map(|&v| v as i64).collect::<Vec<_>>(),
    )?;
    Ok((
        DelegationRequest::Simd(SimdRequest {
            program,
            inputs,
            consts,
            depth_budget,
        }),
        expected,
    ))
}

/// Execute a word plan through the trusted primitives. Exposed so the
/// adversary harness can run modified plans through the identical machinery.
pub fn execute_word_plan(req: &WordRequest, plan: &ExecutionPlan) -> Result<EncodedWord> {
    Ok(execute_word_plan_traced(req, plan)?.0)
}

/// Like [`execute_word_plan`], additionally returning the accumulator after
/// every step. The intermediates are ciphertexts; only a key holder can read
/// the actual trace values.
pub fn execute_word_plan_traced(
    req: &WordRequest,
    plan: &ExecutionPlan,
) -> Result<(EncodedWord, Vec<EncodedWord>)> {
    if plan.steps.is_empty() {
        return req
            .inputs
            .first()
            .cloned()
            .map(|w| (w, Vec::new()))
            .ok_or_else(|| Error::Request("empty plan with no inputs".into()));
    }
    let operand = |op: &Operand, saved: &Vec<EncodedWord>| -> Result<EncodedWord> {
        match op {
            Operand::Input(j) => req
                .inputs
                .get(*j)
                .cloned()
                .ok_or_else(|| Error::Request(format!("input {j} missing from request"))),
            Operand::Const(k) => req
                .consts
                .get(*k)
                .cloned()
                .ok_or_else(|| Error::Request(format!("constant {k} missing from request"))),
            Operand::Saved(s) => saved
                .get(*s)
                .cloned()
                .ok_or_else(|| Error::Plan(format!("saved slot {s} not yet produced"))),
        }
    };
    let luts = req.luts.as_deref();
    let mut acc: Option<EncodedWord> = None;
    let mut saved: Vec<EncodedWord> = Vec::new();
    let mut trace: Vec<EncodedWord> = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        match step {
            PlanStep::Load(op) => {
                let v = operand(op, &saved)?;
                if let Some(prev) = acc.take() {
                    saved.push(prev);
                }
                acc = Some(v);
            }
            PlanStep::BBAdd(op) => {
                let cur = acc.take().ok_or_else(|| Error::Plan("add before any load".into()))?;
                let rhs = operand(op, &saved)?;
                acc = Some(bb_add(&req.blackbox, &cur, &rhs)?);
            }
            PlanStep::AddEncConst(k) => {
                let cur = acc.take().ok_or_else(|| Error::Plan("add before any load".into()))?;
                let rhs = operand(&Operand::Const(*k), &saved)?;
                acc = Some(bb_add(&req.blackbox, &cur, &rhs)?);
            }
            PlanStep::MulClearConst(c) => {
                let cur = acc.take().ok_or_else(|| Error::Plan("mul before any load".into()))?;
                acc = Some(EncodedWord {
                    layout: cur.layout,
                    ct: eval_mul_const(&cur.ct, *c as i64)?,
                });
            }
            PlanStep::ApplyExpLUT | PlanStep::ApplyLogLUT => {
                let cur = acc.take().ok_or_else(|| Error::Plan("hop before any load".into()))?;
                let (exp, log) = luts
                    .ok_or_else(|| Error::Request("plan hops domains but no tables supplied".into()))?;
                let lut = if matches!(step, PlanStep::ApplyExpLUT) { exp } else { log };
                acc = Some(apply_lut(lut, &cur)?);
            }
        }
        trace.push(acc.clone().expect("every step leaves an accumulator"));
    }
    let result = acc.ok_or_else(|| Error::Plan("plan produced no result".into()))?;
    Ok((result, trace))
}

/// The honest server: executes the request exactly as instructed, through
/// the blackbox, the tables and the SIMD gates only.
pub fn serve_honest(req: &DelegationRequest) -> Result<ServerResponse> {
    match req {
        DelegationRequest::Word(word) => {
            let result = execute_word_plan(word, &word.plan)?;
            Ok(ServerResponse::Word {
                result: result.ct,
                steps_executed: word.plan.steps.len(),
            })
        }
        DelegationRequest::Simd(simd) => {
            let findings = lint_program(
                &simd.program,
                // the server cannot see fingerprint stand-ins; it lints the
                // program shape and depth only
                &[],
                simd.depth_budget,
            );
            if !findings.is_empty() {
                return Err(Error::LintRejected(findings));
            }
            let (result, trace) = simd_execute(&simd.program, &simd.inputs, &simd.consts)?;
            Ok(ServerResponse::Simd {
                result,
                trace,
                steps_executed: simd.program.steps.len(),
            })
        }
    }
}

/// Delegator-side verification of a server response.
pub fn verify_response(
    kp: &KeyPair,
    req: &DelegationRequest,
    response: &ServerResponse,
    expected_fp: i64,
) -> Result<VerifiedResult> {
    match (req, response) {
        (DelegationRequest::Word(word), ServerResponse::Word { result, steps_executed }) => {
            let encoded = EncodedWord { layout: word.plan.layout, ct: result.clone() };
            let verdict = match verify_result(kp, &encoded, expected_fp as u64)? {
                Verdict::Accepted { comp_value } => ResponseVerdict::Accepted { comp_value },
                Verdict::Rejected { .. } => ResponseVerdict::Rejected,
                Verdict::Nullified => ResponseVerdict::Nullified { escalate: word.zero_flagged },
            };
            Ok(VerifiedResult { verdict, steps_executed: *steps_executed })
        }
        (DelegationRequest::Simd(simd), ServerResponse::Simd { result, trace, steps_executed }) => {
            let verdict =
                match verify_simd(kp, result, expected_fp, Some(trace), &simd.program)? {
                    SimdVerdict::Accepted { comp_values } => {
                        ResponseVerdict::AcceptedSimd { comp_values }
                    }
                    _ => ResponseVerdict::Rejected,
                };
            Ok(VerifiedResult { verdict, steps_executed: *steps_executed })
        }
        _ => Err(Error::Request("response mode does not match request mode".into())),
    }
}

/// Delegator runtime with the one-time expected-fingerprint cache. A fresh
/// key pair is generated for every request.
#[derive(Default)]
pub struct Delegator {
    expected_cache: HashMap<String, FpTrace>,
    pub cache_hits: usize,
}

pub struct PreparedDelegation {
    pub kp: KeyPair,
    pub request: DelegationRequest,
    pub expected_fp: u64,
}

impl Delegator {
    pub fn new() -> Delegator {
        Delegator::default()
    }

    /// Prepare a word-granularity delegation; the expected fingerprint is
    /// computed once per (circuit, scheme, layout, split) and reused for any
    /// further input sets.
    pub fn delegate(
        &mut self,
        circuit: &Circuit,
        inputs: &[u64],
        scheme: &FingerprintScheme,
        layout: WordLayout,
        split: Option<FpSplit>,
    ) -> Result<PreparedDelegation> {
        let kp = keygen(KeyKind::Word { modulus: layout.modulus() })?;
        let cache_key = serde_json::to_string(&(circuit, scheme, &layout, &split))
            .map_err(|e| Error::Serialize(e.to_string()))?;
        let cached = self.expected_cache.get(&cache_key);
        let hit = cached.is_some();
        let (request, expected_fp, fp_trace) =
            prepare_request_cached(&kp, circuit, inputs, scheme, layout, split, cached)?;
        if hit {
            self.cache_hits += 1;
        } else {
            self.expected_cache.insert(cache_key, fp_trace);
        }
        Ok(PreparedDelegation { kp, request, expected_fp })
    }
}

// ---------------------------------------------------------------------------
// Wire envelope
// ---------------------------------------------------------------------------

/// Request/response envelope with fixed field names. Ciphertext payloads
/// travel as base64 sealed handles; unsealing them outside this process
/// keeps the simulation's access discipline only by convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    pub mode: String,
    pub plan: serde_json::Value,
    pub inputs: Vec<String>,
    pub meta: serde_json::Value,
}

pub const ENVELOPE_VERSION: u32 = 1;

pub fn seal_ciphertext(ct: &Ciphertext) -> Result<String> {
    let bytes = bincode::serialize(ct).map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
}

pub fn unseal_ciphertext(sealed: &str) -> Result<Ciphertext> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(sealed)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    bincode::deserialize(&bytes).map_err(|e| Error::Serialize(e.to_string()))
}

impl Envelope {
    pub fn from_request(req: &DelegationRequest) -> Result<Envelope> {
        match req {
            DelegationRequest::Word(word) => {
                let mode = if word.plan.lut_steps() > 0 { "logmult" } else { "word" };
                let inputs = word
                    .inputs
                    .iter()
                    .map(|w| seal_ciphertext(&w.ct))
                    .collect::<Result<Vec<_>>>()?;
                let meta = serde_json::json!({
                    "layout": word.plan.layout,
                    "blackbox": word.blackbox,
                    "consts": word
                        .consts
                        .iter()
                        .map(|w| seal_ciphertext(&w.ct))
                        .collect::<Result<Vec<_>>>()?,
                    "luts": match &word.luts {
                        Some(luts) => serde_json::to_value(luts.as_ref())
                            .map_err(|e| Error::Serialize(e.to_string()))?,
                        None => serde_json::Value::Null,
                    },
                    "zero_flagged": word.zero_flagged,
                });
                Ok(Envelope {
                    version: ENVELOPE_VERSION,
                    mode: mode.into(),
                    plan: serde_json::to_value(&word.plan)
                        .map_err(|e| Error::Serialize(e.to_string()))?,
                    inputs,
                    meta,
                })
            }
            DelegationRequest::Simd(simd) => {
                let inputs = simd
                    .inputs
                    .iter()
                    .map(|v| seal_ciphertext(&v.ct))
                    .collect::<Result<Vec<_>>>()?;
                let meta = serde_json::json!({
                    "fp_slot": simd.inputs.first().map(|v| v.fp_slot),
                    "depth_budget": simd.depth_budget,
                    "consts": simd
                        .consts
                        .iter()
                        .map(|v| seal_ciphertext(&v.ct))
                        .collect::<Result<Vec<_>>>()?,
                });
                Ok(Envelope {
                    version: ENVELOPE_VERSION,
                    mode: "simd".into(),
                    plan: serde_json::to_value(&simd.program)
                        .map_err(|e| Error::Serialize(e.to_string()))?,
                    inputs,
                    meta,
                })
            }
        }
    }

    pub fn to_request(&self) -> Result<DelegationRequest> {
        if self.version != ENVELOPE_VERSION {
            return Err(Error::Request(format!("unsupported envelope version {}", self.version)));
        }
        let meta_consts = |meta: &serde_json::Value| -> Result<Vec<Ciphertext>> {
            meta.get("consts")
                .and_then(|c| c.as_array())
                .map(|arr| {
                    arr.iter()
                        .map(|s| {
                            s.as_str()
                                .ok_or_else(|| Error::Request("const handle must be a string".into()))
                                .and_then(unseal_ciphertext)
                        })
                        .collect()
                })
                .unwrap_or_else(|| Ok(Vec::new()))
        };
        match self.mode.as_str() {
            "word" | "logmult" => {
                let plan: ExecutionPlan = serde_json::from_value(self.plan.clone())
                    .map_err(|e| Error::Request(e.to_string()))?;
                let layout = plan.layout;
                let inputs = self
                    .inputs
                    .iter()
                    .map(|s| unseal_ciphertext(s).map(|ct| EncodedWord { layout, ct }))
                    .collect::<Result<Vec<_>>>()?;
                let consts = meta_consts(&self.meta)?
                    .into_iter()
                    .map(|ct| EncodedWord { layout, ct })
                    .collect();
                let blackbox: BlackboxConfig =
                    serde_json::from_value(self.meta["blackbox"].clone())
                        .map_err(|e| Error::Request(e.to_string()))?;
                let luts = match &self.meta["luts"] {
                    serde_json::Value::Null => None,
                    v => Some(Box::new(
                        serde_json::from_value::<(EncryptedLut, EncryptedLut)>(v.clone())
                            .map_err(|e| Error::Request(e.to_string()))?,
                    )),
                };
                let zero_flagged = self.meta["zero_flagged"].as_bool().unwrap_or(false);
                Ok(DelegationRequest::Word(WordRequest {
                    plan,
                    inputs,
                    consts,
                    luts,
                    blackbox,
                    zero_flagged,
                }))
            }
            "simd" => {
                let program: SimdProgram = serde_json::from_value(self.plan.clone())
                    .map_err(|e| Error::Request(e.to_string()))?;
                let fp_slot = self.meta["fp_slot"]
                    .as_u64()
                    .ok_or_else(|| Error::Request("simd envelope missing fp_slot".into()))?
                    as usize;
                let depth_budget = self.meta["depth_budget"]
                    .as_u64()
                    .ok_or_else(|| Error::Request("simd envelope missing depth_budget".into()))?
                    as u32;
                let inputs = self
                    .inputs
                    .iter()
                    .map(|s| unseal_ciphertext(s).map(|ct| SimdVector { ct, fp_slot }))
                    .collect::<Result<Vec<_>>>()?;
                let consts = meta_consts(&self.meta)?
                    .into_iter()
                    .map(|ct| SimdVector { ct, fp_slot })
                    .collect();
                Ok(DelegationRequest::Simd(SimdRequest {
                    program,
                    inputs,
                    consts,
                    depth_budget,
                }))
            }
            other => Err(Error::Request(format!("unknown envelope mode {other:?}"))),
        }
    }
}
