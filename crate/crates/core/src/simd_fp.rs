//! SIMD-vector fingerprints: one hidden slot of every vector carries an
//! integer fingerprint value, the remaining slots carry arbitrary (including
//! floating point) computation values, and every program step acts on all
//! slots identically.
//!
//! The defense rests on restrictions rather than carry detection: programs
//! may only add and multiply, fingerprint values are integers of at least 2,
//! and the multiplicative depth is bounded by the backend's budget. The
//! linter enforces exactly those restrictions. Subtraction and division
//! steps are representable so that adversarial programs can be expressed,
//! linted and demonstrated; the honest pipeline refuses to execute them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::he_backend::{
    decrypt_simd, encrypt, eval_add, eval_mul, eval_sub, Ciphertext, KeyPair, Plaintext, SlotKind,
};
use crate::log_mult::{Circuit, CircuitNode};

/// A vector ciphertext with a designated fingerprint slot. The slot index is
/// delegator-chosen, identical across all vectors of one computation, and
/// never sent to the server.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimdVector {
    pub ct: Ciphertext,
    pub fp_slot: usize,
}

impl SimdVector {
    pub fn slot_count(&self) -> usize {
        match self.ct.slot_kind() {
            SlotKind::Simd { slots, .. } => slots,
            _ => 0,
        }
    }
}

/// Reference to a vector: an input, an encrypted constant vector, or a
/// stashed intermediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimdOperand {
    Input(usize),
    Const(usize),
    Saved(usize),
}

/// One step of a SIMD program. Every step is applied to all slots of the
/// accumulator identically; per-slot programs are not representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimdStep {
    /// Stash the accumulator (if any) and start from this vector.
    Load(SimdOperand),
    Add(SimdOperand),
    Mul(SimdOperand),
    /// Representable for adversarial demonstrations; rejected by the lint.
    Sub(SimdOperand),
    /// Representable for adversarial demonstrations; rejected by the lint
    /// and not executable.
    Div(SimdOperand),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimdProgram {
    pub steps: Vec<SimdStep>,
}

impl SimdProgram {
    /// Multiplications the program performs, each of which consumes depth.
    pub fn depth_cost(&self) -> u32 {
        self.steps.iter().filter(|s| matches!(s, SimdStep::Mul(_))).count() as u32
    }
}

/// Lint findings over a SIMD program and the fingerprint-slot values of its
/// constant vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    SubtractionStep { step: usize },
    DivisionStep { step: usize },
    NegativeFpConst { index: usize, value: f64 },
    FractionalFpConst { index: usize, value: f64 },
    FpConstBelowTwo { index: usize, value: f64 },
    DepthBudgetExceeded { cost: u32, budget: u32 },
}

/// Check a program against the scheme restrictions: no subtraction or
/// division, integer fingerprint constants of at least 2, and the
/// multiplicative depth within budget. Returns every finding.
pub fn lint_program(p: &SimdProgram, fp_consts: &[f64], depth_budget: u32) -> Vec<Violation> {
    let mut found = Vec::new();
    for (i, step) in p.steps.iter().enumerate() {
        match step {
            SimdStep::Sub(_) => found.push(Violation::SubtractionStep { step: i }),
            SimdStep::Div(_) => found.push(Violation::DivisionStep { step: i }),
            _ => {}
        }
    }
    for (index, &value) in fp_consts.iter().enumerate() {
        if value < 0.0 {
            found.push(Violation::NegativeFpConst { index, value });
        }
        if value.fract() != 0.0 {
            found.push(Violation::FractionalFpConst { index, value });
        }
        if value >= 0.0 && value.fract() == 0.0 && value < 2.0 {
            found.push(Violation::FpConstBelowTwo { index, value });
        }
    }
    let cost = p.depth_cost();
    if cost > depth_budget {
        found.push(Violation::DepthBudgetExceeded { cost, budget: depth_budget });
    }
    found
}

/// Encode computation values plus one integer fingerprint into a vector,
/// fingerprint at `fp_slot`.
pub fn encode_simd(
    kp: &KeyPair,
    comp_values: &[f64],
    fp_value: u64,
    fp_slot: usize,
) -> Result<SimdVector> {
    if fp_value < 2 {
        return Err(Error::Scheme(format!(
            "fingerprint slot values must be at least 2 (0/1 are identity values), got {fp_value}"
        )));
    }
    if fp_slot > comp_values.len() {
        return Err(Error::OutOfDomain(format!(
            "fingerprint slot {fp_slot} out of range for {} computation values",
            comp_values.len()
        )));
    }
    let mut slots: Vec<f64> = Vec::with_capacity(comp_values.len() + 1);
    slots.extend_from_slice(&comp_values[..fp_slot]);
    slots.push(fp_value as f64);
    slots.extend_from_slice(&comp_values[fp_slot..]);
    let ct = encrypt(kp, Plaintext::Simd(slots))?;
    Ok(SimdVector { ct, fp_slot })
}

/// Symbolic record of the operations actually executed, reconstructable into
/// the executed program step for step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceCircuit {
    pub steps: Vec<SimdStep>,
}

/// Execute a program elementwise over the inputs and encrypted constant
/// vectors. Does not lint; the honest pipeline lints first, and the
/// restriction demos deliberately bypass it.
pub fn simd_execute(
    p: &SimdProgram,
    inputs: &[SimdVector],
    consts: &[SimdVector],
) -> Result<(SimdVector, TraceCircuit)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidParams("need at least one input vector".into()))?;
    let fp_slot = first.fp_slot;
    let slots = first.slot_count();
    for v in inputs.iter().chain(consts.iter()) {
        if v.fp_slot != fp_slot || v.slot_count() != slots {
            return Err(Error::SlotMismatch(
                "all vectors of one computation must share slot layout".into(),
            ));
        }
    }

    if p.steps.is_empty() {
        return Ok((first.clone(), TraceCircuit::default()));
    }

    let operand = |op: &SimdOperand, saved: &Vec<SimdVector>| -> Result<SimdVector> {
        match op {
            SimdOperand::Input(j) => inputs
                .get(*j)
                .cloned()
                .ok_or_else(|| Error::Plan(format!("input {j} not supplied"))),
            SimdOperand::Const(k) => consts
                .get(*k)
                .cloned()
                .ok_or_else(|| Error::Plan(format!("constant {k} not supplied"))),
            SimdOperand::Saved(s) => saved
                .get(*s)
                .cloned()
                .ok_or_else(|| Error::Plan(format!("saved slot {s} not yet produced"))),
        }
    };

    let mut acc: Option<SimdVector> = None;
    let mut saved: Vec<SimdVector> = Vec::new();
    let mut trace = TraceCircuit::default();
    for step in &p.steps {
        trace.steps.push(*step);
        match step {
            SimdStep::Load(op) => {
                let v = operand(op, &saved)?;
                if let Some(prev) = acc.take() {
                    saved.push(prev);
                }
                acc = Some(v);
            }
            SimdStep::Add(op) | SimdStep::Mul(op) | SimdStep::Sub(op) => {
                let cur = acc
                    .take()
                    .ok_or_else(|| Error::Plan("operation before any load".into()))?;
                let rhs = operand(op, &saved)?;
                let ct = match step {
                    SimdStep::Add(_) => eval_add(&cur.ct, &rhs.ct)?,
                    SimdStep::Mul(_) => eval_mul(&cur.ct, &rhs.ct)?,
                    SimdStep::Sub(_) => eval_sub(&cur.ct, &rhs.ct)?,
                    _ => unreachable!(),
                };
                acc = Some(SimdVector { ct, fp_slot });
            }
            SimdStep::Div(_) => {
                return Err(Error::UnsupportedStep(
                    "division is not an evaluation gate; the backend cannot execute it".into(),
                ))
            }
        }
    }
    Ok((acc.expect("non-empty program leaves a result"), trace))
}

/// Verification outcome for a SIMD result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SimdVerdict {
    Accepted { comp_values: Vec<f64> },
    /// Fingerprint slot is not within the rounding guard of any integer.
    NonIntegerFp { got: f64 },
    FpMismatch { got: i64 },
    TraceMismatch,
}

impl SimdVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, SimdVerdict::Accepted { .. })
    }
}

/// Tolerance for reading an integer out of a (possibly approximate)
/// fingerprint slot.
pub const FP_ROUNDING_GUARD: f64 = 1e-6;

/// Check a returned vector: the fingerprint slot must round to exactly the
/// expected integer, and when a trace is supplied it must match the
/// requested program step for step.
pub fn verify_simd(
    kp: &KeyPair,
    result: &SimdVector,
    expected_fp: i64,
    trace: Option<&TraceCircuit>,
    plan: &SimdProgram,
) -> Result<SimdVerdict> {
    let slots = decrypt_simd(kp, &result.ct)?;
    let raw = *slots
        .get(result.fp_slot)
        .ok_or_else(|| Error::OutOfDomain("fingerprint slot out of range".into()))?;
    let rounded = raw.round();
    if !raw.is_finite() || (raw - rounded).abs() >= FP_ROUNDING_GUARD {
        return Ok(SimdVerdict::NonIntegerFp { got: raw });
    }
    if rounded as i64 != expected_fp {
        return Ok(SimdVerdict::FpMismatch { got: rounded as i64 });
    }
    if let Some(t) = trace {
        if t.steps != plan.steps {
            return Ok(SimdVerdict::TraceMismatch);
        }
    }
    let comp_values = slots
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != result.fp_slot)
        .map(|(_, v)| *v)
        .collect();
    Ok(SimdVerdict::Accepted { comp_values })
}

/// Cleartext evaluation of the program on fingerprint-slot values: the
/// delegator's oracle for the expected fingerprint, computed once per
/// program.
pub fn expected_simd_fingerprint(
    p: &SimdProgram,
    input_fps: &[i64],
    const_fps: &[i64],
) -> Result<i64> {
    if p.steps.is_empty() {
        return input_fps
            .first()
            .copied()
            .ok_or_else(|| Error::InvalidParams("need at least one input".into()));
    }
    let operand = |op: &SimdOperand, saved: &Vec<i64>| -> Result<i64> {
        match op {
            SimdOperand::Input(j) => input_fps
                .get(*j)
                .copied()
                .ok_or_else(|| Error::Plan(format!("input {j} not supplied"))),
            SimdOperand::Const(k) => const_fps
                .get(*k)
                .copied()
                .ok_or_else(|| Error::Plan(format!("constant {k} not supplied"))),
            SimdOperand::Saved(s) => saved
                .get(*s)
                .copied()
                .ok_or_else(|| Error::Plan(format!("saved slot {s} not yet produced"))),
        }
    };
    let mut acc: Option<i64> = None;
    let mut saved: Vec<i64> = Vec::new();
    for step in &p.steps {
        match step {
            SimdStep::Load(op) => {
                let v = operand(op, &saved)?;
                if let Some(prev) = acc.take() {
                    saved.push(prev);
                }
                acc = Some(v);
            }
            SimdStep::Add(op) => {
                let cur = acc.ok_or_else(|| Error::Plan("operation before any load".into()))?;
                acc = Some(cur.checked_add(operand(op, &saved)?).ok_or_else(|| {
                    Error::Scheme("expected fingerprint overflows i64".into())
                })?);
            }
            SimdStep::Mul(op) => {
                let cur = acc.ok_or_else(|| Error::Plan("operation before any load".into()))?;
                acc = Some(cur.checked_mul(operand(op, &saved)?).ok_or_else(|| {
                    Error::Scheme("expected fingerprint overflows i64".into())
                })?);
            }
            SimdStep::Sub(op) => {
                let cur = acc.ok_or_else(|| Error::Plan("operation before any load".into()))?;
                acc = Some(cur - operand(op, &saved)?);
            }
            SimdStep::Div(_) => {
                return Err(Error::UnsupportedStep("division has no fingerprint semantics".into()))
            }
        }
    }
    Ok(acc.expect("non-empty program leaves a result"))
}

/// Compile an arithmetic circuit into a SIMD program plus the computation
/// values of the constant vectors it references (the delegator picks the
/// fingerprint stand-ins separately).
pub fn compile_simd_program(circuit: &Circuit) -> Result<(SimdProgram, Vec<f64>)> {
    struct C<'a> {
        circuit: &'a Circuit,
        steps: Vec<SimdStep>,
        consts: Vec<f64>,
        inputs_seen: Vec<usize>,
        acc_occupied: bool,
        saved_count: usize,
    }
    impl<'a> C<'a> {
        fn is_leaf(&self, id: usize) -> bool {
            matches!(self.circuit.nodes()[id], CircuitNode::Input(_) | CircuitNode::Const(_))
        }
        fn leaf_operand(&mut self, id: usize) -> SimdOperand {
            match self.circuit.nodes()[id] {
                CircuitNode::Input(v) => {
                    self.inputs_seen.push(v);
                    SimdOperand::Input(v)
                }
                CircuitNode::Const(c) => {
                    self.consts.push(c);
                    SimdOperand::Const(self.consts.len() - 1)
                }
                _ => unreachable!(),
            }
        }
        fn load(&mut self, op: SimdOperand) {
            if self.acc_occupied {
                self.saved_count += 1;
            }
            self.steps.push(SimdStep::Load(op));
            self.acc_occupied = true;
        }
        fn emit(&mut self, id: usize) -> Result<()> {
            if self.is_leaf(id) {
                let op = self.leaf_operand(id);
                self.load(op);
                return Ok(());
            }
            let (a, b, mul) = match self.circuit.nodes()[id] {
                CircuitNode::Add(a, b) => (a, b, false),
                CircuitNode::Mul(a, b) => (a, b, true),
                _ => unreachable!(),
            };
            let push_op = |steps: &mut Vec<SimdStep>, op: SimdOperand| {
                steps.push(if mul { SimdStep::Mul(op) } else { SimdStep::Add(op) });
            };
            match (self.is_leaf(a), self.is_leaf(b)) {
                (false, true) => {
                    self.emit(a)?;
                    let op = self.leaf_operand(b);
                    push_op(&mut self.steps, op);
                }
                (true, false) => {
                    self.emit(b)?;
                    let op = self.leaf_operand(a);
                    push_op(&mut self.steps, op);
                }
                (true, true) => {
                    // lead with an input when one exists
                    let (first, second) =
                        if matches!(self.circuit.nodes()[a], CircuitNode::Const(_)) {
                            (b, a)
                        } else {
                            (a, b)
                        };
                    let op1 = self.leaf_operand(first);
                    self.load(op1);
                    let op2 = self.leaf_operand(second);
                    push_op(&mut self.steps, op2);
                }
                (false, false) => {
                    self.emit(a)?;
                    let stash = self.saved_count;
                    self.emit(b)?;
                    push_op(&mut self.steps, SimdOperand::Saved(stash));
                }
            }
            Ok(())
        }
    }

    let mut c = C {
        circuit,
        steps: Vec::new(),
        consts: Vec::new(),
        inputs_seen: Vec::new(),
        acc_occupied: false,
        saved_count: 0,
    };
    if let CircuitNode::Input(_) = circuit.nodes()[circuit.output()] {
        return Ok((SimdProgram::default(), Vec::new()));
    }
    c.emit(circuit.output())?;
    Ok((SimdProgram { steps: c.steps }, c.consts))
}
