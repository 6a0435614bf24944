//! The on-disk circuit format: a JSON object with declared inputs (optional
//! fingerprint annotations), a node list `{id, op, args}` with ops
//! `input | const | add | mul`, an output id, and an optional `simd` flag.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use fpdel_core::fingerprint::WordLayout;
use fpdel_core::log_mult::{Circuit, CircuitNode, FpSplit};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    #[serde(default)]
    pub simd: bool,
    pub layout: Option<LayoutSpec>,
    pub split: Option<SplitSpec>,
    pub inputs: InputsSpec,
    /// Fingerprint stand-ins for constants, in occurrence order. Defaults to
    /// the constant's own value in word mode.
    #[serde(default)]
    pub const_fps: Vec<u64>,
    pub nodes: Vec<NodeSpec>,
    pub output: usize,
    /// SIMD only: which slot hides the fingerprint (defaults to the last).
    pub fp_slot: Option<usize>,
    /// SIMD only: multiplicative depth budget (defaults to the program cost).
    pub depth_budget: Option<u32>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct LayoutSpec {
    pub n: u32,
    pub m: u32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct SplitSpec {
    pub m_a: u32,
    pub m_c: u32,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum InputsSpec {
    Count(usize),
    Annotated(Vec<InputAnnotation>),
}

#[derive(Debug, Deserialize)]
pub struct InputAnnotation {
    #[serde(default)]
    pub fp: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    pub op: String,
    pub args: Vec<serde_json::Value>,
}

impl CircuitFile {
    pub fn parse(text: &str) -> Result<CircuitFile> {
        let file: CircuitFile = serde_json::from_str(text).context("circuit file is not valid")?;
        if file.nodes.is_empty() {
            bail!("circuit file declares no nodes");
        }
        Ok(file)
    }

    pub fn num_inputs(&self) -> usize {
        match &self.inputs {
            InputsSpec::Count(k) => *k,
            InputsSpec::Annotated(a) => a.len(),
        }
    }

    pub fn input_fp(&self, var: usize) -> Option<u64> {
        match &self.inputs {
            InputsSpec::Count(_) => None,
            InputsSpec::Annotated(a) => a.get(var).and_then(|ann| ann.fp),
        }
    }

    pub fn layout(&self) -> Result<WordLayout> {
        let spec = self.layout.unwrap_or(LayoutSpec { n: 6, m: 6 });
        Ok(WordLayout::new(spec.n, spec.m)?)
    }

    pub fn split(&self, layout: WordLayout) -> Result<Option<FpSplit>> {
        match self.split {
            Some(s) => Ok(Some(FpSplit::new(layout, s.m_a, s.m_c)?)),
            None => Ok(None),
        }
    }

    pub fn to_circuit(&self) -> Result<Circuit> {
        let num_inputs = self.num_inputs();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (pos, spec) in self.nodes.iter().enumerate() {
            if spec.id != pos {
                bail!("node ids must be consecutive from 0; node at position {pos} has id {}",
                    spec.id);
            }
            let int_arg = |i: usize| -> Result<usize> {
                spec.args
                    .get(i)
                    .and_then(|v| v.as_u64())
                    .map(|v| v as usize)
                    .ok_or_else(|| anyhow!("node {}: argument {i} must be an integer", spec.id))
            };
            let node = match spec.op.as_str() {
                "input" => CircuitNode::Input(int_arg(0)?),
                "const" => {
                    let v = spec
                        .args
                        .first()
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| anyhow!("node {}: const needs a numeric value", spec.id))?;
                    CircuitNode::Const(v)
                }
                "add" => CircuitNode::Add(int_arg(0)?, int_arg(1)?),
                "mul" => CircuitNode::Mul(int_arg(0)?, int_arg(1)?),
                other => bail!("node {}: unknown op {other:?}", spec.id),
            };
            nodes.push(node);
        }
        Ok(Circuit::new(num_inputs, nodes, self.output)?)
    }
}
