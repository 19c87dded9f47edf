//! Workload graphs: standalone GEMMs and ViT inference split into GEMM and
//! Non-GEMM operations, plus the host-CPU cost model for Non-GEMM work.

use std::fmt;
use std::str::FromStr;

use crate::accel::{GemmOp, ELEMENT_BYTES};
use crate::error::{Error, Result};
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residency {
    Host,
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NonGemmKind {
    Softmax,
    LayerNorm,
    Gelu,
    ResidualAdd,
}

impl NonGemmKind {
    /// Full passes over the tensor's elements (reads plus writes).
    pub fn passes(self) -> u64 {
        match self {
            NonGemmKind::Softmax => 3,
            NonGemmKind::LayerNorm => 3,
            NonGemmKind::Gelu => 2,
            NonGemmKind::ResidualAdd => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NonGemmKind::Softmax => "softmax",
            NonGemmKind::LayerNorm => "layernorm",
            NonGemmKind::Gelu => "gelu",
            NonGemmKind::ResidualAdd => "residual_add",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonGemmOp {
    pub kind: NonGemmKind,
    pub element_count: u64,
    pub bytes_touched: u64,
}

impl NonGemmOp {
    pub fn new(kind: NonGemmKind, element_count: u64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::InvalidArgument(format!("{} over zero elements", kind.name())));
        }
        Ok(NonGemmOp {
            kind,
            element_count,
            bytes_touched: element_count * ELEMENT_BYTES * kind.passes(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub bytes: u64,
    pub residency: Residency,
    /// Index of the producing op; `None` for weights and the network input.
    pub producer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Gemm(GemmOp),
    NonGemm(NonGemmOp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpNode {
    pub label: String,
    pub kind: OpKind,
    pub inputs: Vec<TensorId>,
    pub output: TensorId,
}

impl OpNode {
    pub fn is_gemm(&self) -> bool {
        matches!(self.kind, OpKind::Gemm(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkloadGraph {
    pub ops: Vec<OpNode>,
    pub tensors: Vec<Tensor>,
}

impl WorkloadGraph {
    fn tensor(&mut self, name: impl Into<String>, bytes: u64, residency: Residency) -> TensorId {
        self.tensors.push(Tensor {
            name: name.into(),
            bytes,
            residency,
            producer: None,
        });
        TensorId(self.tensors.len() - 1)
    }

    fn push(&mut self, label: String, kind: OpKind, inputs: Vec<TensorId>, residency: Residency) -> TensorId {
        let bytes = match &kind {
            OpKind::Gemm(g) => g.c_bytes(),
            OpKind::NonGemm(n) => n.element_count * ELEMENT_BYTES,
        };
        let out = self.tensor(format!("{label}.out"), bytes, residency);
        self.tensors[out.0].producer = Some(self.ops.len());
        self.ops.push(OpNode {
            label,
            kind,
            inputs,
            output: out,
        });
        out
    }

    /// Every op input must be a parameter or produced by an earlier op.
    pub fn validate(&self) -> Result<()> {
        for (i, op) in self.ops.iter().enumerate() {
            for t in &op.inputs {
                let tensor = self.tensors.get(t.0).ok_or_else(|| {
                    Error::InvalidArgument(format!("op {} reads unknown tensor {}", op.label, t.0))
                })?;
                if let Some(p) = tensor.producer {
                    if p >= i {
                        return Err(Error::InvalidArgument(format!(
                            "op {} reads {} before it is produced",
                            op.label, tensor.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn gemm_ops(&self) -> impl Iterator<Item = &GemmOp> {
        self.ops.iter().filter_map(|o| match &o.kind {
            OpKind::Gemm(g) => Some(g),
            _ => None,
        })
    }

    pub fn nongemm_ops(&self) -> impl Iterator<Item = &NonGemmOp> {
        self.ops.iter().filter_map(|o| match &o.kind {
            OpKind::NonGemm(n) => Some(n),
            _ => None,
        })
    }

    /// Multiply-accumulates counted as two operations each.
    pub fn gemm_flops(&self) -> u64 {
        self.gemm_ops().map(|g| 2 * g.m * g.n * g.k).sum()
    }
}

pub fn build_gemm(n: u64, residency: Residency) -> Result<WorkloadGraph> {
    let op = GemmOp::square(n)?;
    let mut g = WorkloadGraph::default();
    let a = g.tensor("A", op.a_bytes(), residency);
    let b = g.tensor("B", op.b_bytes(), residency);
    g.push(format!("gemm{n}"), OpKind::Gemm(op), vec![a, b], residency);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VitSpec {
    pub name: String,
    pub layers: u64,
    pub hidden: u64,
    pub heads: u64,
    pub seq_len: u64,
}

pub const VIT_NAMES: [&str; 3] = ["base", "large", "huge"];
pub const DEFAULT_SEQ_LEN: u64 = 197;

impl VitSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let (layers, hidden, heads) = match name {
            "base" => (12, 768, 12),
            "large" => (24, 1024, 16),
            "huge" => (32, 1280, 16),
            _ => return Err(Error::config("workload.vit", format!("unknown ViT model '{name}'"))),
        };
        Ok(VitSpec {
            name: name.to_string(),
            layers,
            hidden,
            heads,
            seq_len: DEFAULT_SEQ_LEN,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.seq_len == 0 {
            return Err(Error::config("workload.vit", "ViT dimensions must be positive"));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::config(
                "workload.vit",
                format!("hidden {} not divisible by {} heads", self.hidden, self.heads),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> u64 {
        self.hidden / self.heads
    }
}

pub fn build_vit(spec: &VitSpec, residency: Residency) -> Result<WorkloadGraph> {
    spec.validate()?;
    let s = spec.seq_len;
    let d = spec.hidden;
    let h = spec.heads;
    let dh = spec.head_dim();
    let r = residency;
    let gemm = |m, n, k| GemmOp::new(m, n, k).map(OpKind::Gemm);
    let ng = |kind, e| NonGemmOp::new(kind, e).map(OpKind::NonGemm);

    let mut g = WorkloadGraph::default();
    let mut x = g.tensor("input", s * d * ELEMENT_BYTES, r);
    for l in 0..spec.layers {
        let w_qkv = g.tensor(format!("l{l}.w_qkv"), d * 3 * d * ELEMENT_BYTES, r);
        let w_o = g.tensor(format!("l{l}.w_o"), d * d * ELEMENT_BYTES, r);
        let w_fc1 = g.tensor(format!("l{l}.w_fc1"), d * 4 * d * ELEMENT_BYTES, r);
        let w_fc2 = g.tensor(format!("l{l}.w_fc2"), 4 * d * d * ELEMENT_BYTES, r);

        let ln1 = g.push(format!("l{l}.ln1"), ng(NonGemmKind::LayerNorm, s * d)?, vec![x], r);
        let qkv = g.push(format!("l{l}.qkv"), gemm(s, 3 * d, d)?, vec![ln1, w_qkv], r);
        let mut heads_out = Vec::with_capacity(h as usize);
        for hd in 0..h {
            let score = g.push(format!("l{l}.h{hd}.score"), gemm(s, s, dh)?, vec![qkv, qkv], r);
            let prob = g.push(format!("l{l}.h{hd}.softmax"), ng(NonGemmKind::Softmax, s * s)?, vec![score], r);
            heads_out.push(g.push(format!("l{l}.h{hd}.av"), gemm(s, dh, s)?, vec![prob, qkv], r));
        }
        let proj = g.push(format!("l{l}.proj"), gemm(s, d, d)?, {
            let mut v = heads_out;
            v.push(w_o);
            v
        }, r);
        let res1 = g.push(format!("l{l}.res1"), ng(NonGemmKind::ResidualAdd, s * d)?, vec![x, proj], r);
        let ln2 = g.push(format!("l{l}.ln2"), ng(NonGemmKind::LayerNorm, s * d)?, vec![res1], r);
        let fc1 = g.push(format!("l{l}.fc1"), gemm(s, 4 * d, d)?, vec![ln2, w_fc1], r);
        let act = g.push(format!("l{l}.gelu"), ng(NonGemmKind::Gelu, s * 4 * d)?, vec![fc1], r);
        let fc2 = g.push(format!("l{l}.fc2"), gemm(s, d, 4 * d)?, vec![act, w_fc2], r);
        x = g.push(format!("l{l}.res2"), ng(NonGemmKind::ResidualAdd, s * d)?, vec![res1, fc2], r);
    }
    g.validate()?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    Gemm,
    Vit,
}

impl FromStr for WorkloadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gemm" => Ok(WorkloadKind::Gemm),
            "vit" => Ok(WorkloadKind::Vit),
            _ => Err(Error::config("workload.kind", format!("unknown workload '{s}'"))),
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkloadKind::Gemm => "gemm",
            WorkloadKind::Vit => "vit",
        })
    }
}

/// Per-element CPU costs and memory-side parameters for Non-GEMM ops.
#[derive(Debug, Clone, PartialEq)]
pub struct NonGemmCost {
    pub softmax_ns: f64,
    pub layernorm_ns: f64,
    pub gelu_ns: f64,
    pub residual_ns: f64,
    /// CPU streaming bandwidth to host DRAM, bytes/ns.
    pub host_bandwidth: f64,
    /// Bandwidth of CPU loads that cross into device memory, bytes/ns.
    pub numa_bandwidth: f64,
    /// Round-trip latency of one remote cache-line access.
    pub numa_latency_ns: f64,
    /// Remote line accesses the CPU keeps in flight.
    pub numa_parallelism: f64,
}

impl Default for NonGemmCost {
    fn default() -> Self {
        NonGemmCost {
            softmax_ns: 4.0,
            layernorm_ns: 3.0,
            gelu_ns: 2.0,
            residual_ns: 1.0,
            host_bandwidth: 12.8,
            numa_bandwidth: 2.0,
            numa_latency_ns: 400.0,
            numa_parallelism: 4.0,
        }
    }
}

impl NonGemmCost {
    pub fn per_element_ns(&self, kind: NonGemmKind) -> f64 {
        match kind {
            NonGemmKind::Softmax => self.softmax_ns,
            NonGemmKind::LayerNorm => self.layernorm_ns,
            NonGemmKind::Gelu => self.gelu_ns,
            NonGemmKind::ResidualAdd => self.residual_ns,
        }
    }
}

/// Exact Non-GEMM duration in ns.
pub fn nongemm_time_ns(op: &NonGemmOp, residency: Residency, cost: &NonGemmCost) -> f64 {
    let compute = op.element_count as f64 * cost.per_element_ns(op.kind);
    let bytes = op.bytes_touched as f64;
    match residency {
        Residency::Host => compute + bytes / cost.host_bandwidth,
        Residency::Device => {
            let bw = cost.host_bandwidth.min(cost.numa_bandwidth);
            let lines = (op.bytes_touched as f64 / 64.0).ceil();
            compute + bytes / bw + lines * cost.numa_latency_ns / cost.numa_parallelism.max(1.0)
        }
    }
}

pub fn nongemm_time(op: &NonGemmOp, residency: Residency, cost: &NonGemmCost) -> SimTime {
    SimTime::from_ns_ceil(nongemm_time_ns(op, residency, cost))
}
