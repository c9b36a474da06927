//! Symbolic computation graphs decoded from architecture codes.
//!
//! Node ids: input `0`, blocks `1..=k` in code order, fusion `k+1` when
//! present, output last. Nodes carry operator tags only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{
    self, ArchitectureCode, BlockConfig, InvalidInput, ParameterCatalog, Param, StructuredConfig,
    BATCH_SIZES, INITIAL_LRS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSignature {
    pub history_len: u32,
    pub horizon: u32,
    pub node_count: u32,
    pub feature_count: u32,
}

impl Default for ProblemSignature {
    fn default() -> Self {
        Self {
            history_len: 12,
            horizon: 12,
            node_count: 358,
            feature_count: 1,
        }
    }
}

impl ProblemSignature {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.history_len == 0 || self.horizon == 0 || self.node_count == 0 || self.feature_count == 0
        {
            return Err(GraphError::Invalid("signature fields must be positive".into()));
        }
        Ok(())
    }
}

/// Training settings in physical units where they are numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSpec {
    /// LF ordinal.
    pub loss: u8,
    pub batch_size: u32,
    pub initial_lr: f64,
    /// OF ordinal.
    pub optimizer: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Input,
    StBlock,
    Fusion,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Add,
    Concat,
}

impl Fusion {
    pub fn from_ordinal(o: u8) -> Option<Self> {
        match o {
            1 => Some(Fusion::Add),
            2 => Some(Fusion::Concat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub kind: NodeKind,
    pub sipm: Option<u8>,
    pub tipm: Option<u8>,
    pub fes: Option<u8>,
    pub filter_size: Option<u16>,
}

impl GraphNode {
    fn plain(id: usize, kind: NodeKind) -> Self {
        Self {
            id,
            kind,
            sipm: None,
            tipm: None,
            fes: None,
            filter_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGraph {
    pub signature: ProblemSignature,
    pub training: TrainingSpec,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
    pub fusion: Option<Fusion>,
    pub input_structure: u8,
    pub output_structure: u8,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    InvalidCode(#[from] InvalidInput),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn build_graph(
    code: &ArchitectureCode,
    catalog: &ParameterCatalog,
    signature: ProblemSignature,
) -> Result<ModelGraph, GraphError> {
    let cfg = search_space::decode(code, catalog)?;
    Ok(graph_from_config(&cfg, signature))
}

/// Wires a decoded configuration. The caller guarantees `cfg` is valid.
pub fn graph_from_config(cfg: &StructuredConfig, signature: ProblemSignature) -> ModelGraph {
    let k = cfg.blocks.len();
    let mut nodes = vec![GraphNode::plain(0, NodeKind::Input)];
    let mut edges = Vec::new();
    let mut has_succ = vec![false; k + 1];
    for (i, b) in cfg.blocks.iter().enumerate() {
        let id = i + 1;
        nodes.push(GraphNode {
            id,
            kind: NodeKind::StBlock,
            sipm: Some(b.sipm),
            tipm: Some(b.tipm),
            fes: Some(b.fes),
            filter_size: Some(cfg.global.filter_size),
        });
        edges.push((b.pred_index, id));
        has_succ[b.pred_index] = true;
    }
    let sinks: Vec<usize> = (1..=k).filter(|&id| !has_succ[id]).collect();
    let fusion = if sinks.len() >= 2 {
        let fid = k + 1;
        nodes.push(GraphNode::plain(fid, NodeKind::Fusion));
        edges.extend(sinks.iter().map(|&s| (s, fid)));
        let out = fid + 1;
        nodes.push(GraphNode::plain(out, NodeKind::Output));
        edges.push((fid, out));
        Fusion::from_ordinal(cfg.global.fusion_method)
    } else {
        let out = k + 1;
        nodes.push(GraphNode::plain(out, NodeKind::Output));
        edges.extend(sinks.iter().map(|&s| (s, out)));
        None
    };
    let t = cfg.training;
    ModelGraph {
        signature,
        training: TrainingSpec {
            loss: t.loss,
            batch_size: BATCH_SIZES[usize::from(t.batch_size) - 1],
            initial_lr: INITIAL_LRS[usize::from(t.initial_lr) - 1],
            optimizer: t.optimizer,
        },
        nodes,
        edges,
        fusion,
        input_structure: cfg.global.input_structure,
        output_structure: cfg.global.output_structure,
    }
}

impl ModelGraph {
    pub fn blocks(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::StBlock)
    }

    pub fn block_count(&self) -> usize {
        self.blocks().count()
    }

    fn kind_of(&self, id: usize) -> Option<NodeKind> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.kind)
    }

    /// Nodes in topological order, or `None` if the edges contain a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let pos = |id: usize| self.nodes.iter().position(|x| x.id == id);
        let mut indeg = vec![0usize; n];
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            let (pa, pb) = (pos(a)?, pos(b)?);
            adj[pa].push(pb);
            indeg[pb] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(self.nodes[i].id);
            for &j in &adj[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Checks every structural invariant of a decoded model.
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::Invalid(m.to_string()));
        self.signature.validate()?;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad("node ids must be 0..n in order");
            }
        }
        let count = |k: NodeKind| self.nodes.iter().filter(|n| n.kind == k).count();
        if count(NodeKind::Input) != 1 || self.kind_of(0) != Some(NodeKind::Input) {
            return bad("exactly one input node with id 0 required");
        }
        if count(NodeKind::Output) != 1
            || self.nodes.last().map(|n| n.kind) != Some(NodeKind::Output)
        {
            return bad("exactly one output node, last, required");
        }
        if self.block_count() == 0 {
            return bad("model has no ST-blocks");
        }
        if self.edges.is_empty() {
            return bad("graph has no edges");
        }
        for b in self.blocks() {
            let tags = [
                (Param::Sipm, b.sipm),
                (Param::Tipm, b.tipm),
                (Param::Fes, b.fes),
            ];
            for (p, v) in tags {
                match v {
                    Some(o) if p.label(i32::from(o)).is_some() => {}
                    _ => return bad("ST-block missing operator tag"),
                }
            }
            if b.filter_size.and_then(search_space::fsc_ordinal).is_none() {
                return bad("ST-block missing filter size");
            }
        }
        if self.topological_order().is_none() {
            return bad("graph contains a cycle or dangling edge");
        }
        let sinks = sinks(self);
        let fusions = count(NodeKind::Fusion);
        if (sinks.len() >= 2) != (fusions == 1) || fusions > 1 {
            return bad("fusion node must exist iff multiple sink blocks");
        }
        if (fusions == 1) != self.fusion.is_some() {
            return bad("fusion tag must match fusion node");
        }
        let out = self.nodes.len() - 1;
        for b in self.blocks() {
            if !self.reaches(0, b.id) || !self.reaches(b.id, out) {
                return bad("every ST-block must lie on an input-to-output path");
            }
        }
        Ok(())
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            if std::mem::replace(&mut seen[x], true) {
                continue;
            }
            stack.extend(self.edges.iter().filter(|e| e.0 == x).map(|e| e.1));
        }
        false
    }
}

/// Block ids with no block successor, ascending.
pub fn sinks(g: &ModelGraph) -> Vec<usize> {
    let block_ids: Vec<usize> = g.blocks().map(|b| b.id).collect();
    block_ids
        .iter()
        .copied()
        .filter(|id| {
            !g.edges
                .iter()
                .any(|&(a, b)| a == *id && block_ids.contains(&b))
        })
        .collect()
}

/// Canonical JSON: sorted keys, compact, no trailing newline.
pub fn to_json(g: &ModelGraph) -> Vec<u8> {
    let value = serde_json::to_value(g).expect("graph serializes");
    serde_json::to_vec(&value).expect("value serializes")
}

pub fn from_json(bytes: &[u8]) -> Result<ModelGraph, GraphError> {
    let g: ModelGraph = serde_json::from_slice(bytes)?;
    g.validate()?;
    Ok(g)
}

/// A (SIPM, TIPM, FES) operator triple applied to every block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockOps {
    pub sipm: u8,
    pub tipm: u8,
    pub fes: u8,
}

impl std::str::FromStr for BlockOps {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|t| t.trim().parse::<u8>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad operator triple {s:?}: {e}"))?;
        match parts[..] {
            [sipm, tipm, fes] => Ok(Self { sipm, tipm, fes }),
            _ => Err(format!("operator triple needs 3 values, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Every block gets the same operators.
    UniformBlocks(BlockOps),
    /// Blocks are chained 1 → 2 → … → k.
    Linearize,
    Both(BlockOps),
}

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    InvalidCode(#[from] InvalidInput),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

pub fn apply_ablation(
    code: &ArchitectureCode,
    kind: Ablation,
    catalog: &ParameterCatalog,
) -> Result<ArchitectureCode, AblationError> {
    let mut cfg = search_space::decode(code, catalog)?;
    let ops = match kind {
        Ablation::UniformBlocks(o) | Ablation::Both(o) => Some(o),
        Ablation::Linearize => None,
    };
    if let Some(o) = ops {
        for (p, v) in [(Param::Sipm, o.sipm), (Param::Tipm, o.tipm), (Param::Fes, o.fes)] {
            if !catalog.allows(p, i32::from(v)) {
                return Err(AblationError::InvalidSpec(format!(
                    "{} option {v} not in catalog",
                    p.name()
                )));
            }
        }
    }
    for (i, b) in cfg.blocks.iter_mut().enumerate() {
        if let Some(o) = ops {
            *b = BlockConfig {
                sipm: o.sipm,
                tipm: o.tipm,
                fes: o.fes,
                pred_index: b.pred_index,
            };
        }
        if matches!(kind, Ablation::Linearize | Ablation::Both(_)) {
            b.pred_index = i;
        }
    }
    Ok(search_space::encode(&cfg, catalog)?)
}
