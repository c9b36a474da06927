//! Parameter catalogs and the state-vector encoding of candidate models.
//!
//! A model is described by a trajectory of 5-integer state vectors:
//!
//! | index      | slots                                   |
//! |------------|-----------------------------------------|
//! | `-2`       | start, all `-1`                         |
//! | `-1`       | training: LF, BS, ILR, OF               |
//! | `0`        | global: IS, OS, FSC, MBOF               |
//! | `1..=N`    | block `i`: SIPM, TIPM, FES, PBIndex     |
//! | `2..=N`    | terminal `[i,-1,-1,-1,-1]`              |
//!
//! Slots hold 1-based ordinals into the full option tables below, never raw
//! values, so codes stay stable when a catalog is reduced. PBIndex `0` means
//! the block reads the input-stage output.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub const SENTINEL: i32 = -1;
pub const START_INDEX: i32 = -2;
pub const TRAINING_INDEX: i32 = -1;
pub const GLOBAL_INDEX: i32 = 0;

/// Filter sizes addressed by FSC ordinals 1, 2, 3.
pub const FILTER_SIZES: [u16; 3] = [16, 32, 64];
/// Batch sizes addressed by BS ordinals 1, 2, 3.
pub const BATCH_SIZES: [u32; 3] = [32, 50, 64];
/// Initial learning rates addressed by ILR ordinals 1, 2, 3.
pub const INITIAL_LRS: [f64; 3] = [1e-3, 7e-4, 1e-4];

/// The tunable parameters with their full option tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Lf,
    Bs,
    Ilr,
    Of,
    Is,
    Os,
    Fsc,
    Mbof,
    Sipm,
    Tipm,
    Fes,
}

impl Param {
    pub const ALL: [Param; 11] = [
        Param::Lf,
        Param::Bs,
        Param::Ilr,
        Param::Of,
        Param::Is,
        Param::Os,
        Param::Fsc,
        Param::Mbof,
        Param::Sipm,
        Param::Tipm,
        Param::Fes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Lf => "LF",
            Param::Bs => "BS",
            Param::Ilr => "ILR",
            Param::Of => "OF",
            Param::Is => "IS",
            Param::Os => "OS",
            Param::Fsc => "FSC",
            Param::Mbof => "MBOF",
            Param::Sipm => "SIPM",
            Param::Tipm => "TIPM",
            Param::Fes => "FES",
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Param::Lf => &["MSE loss", "Huber loss"],
            Param::Bs => &["32", "50", "64"],
            Param::Ilr => &["1e-3", "7e-4", "1e-4"],
            Param::Of => &["RMSprop + StepDecay", "Adam", "Adam + PolyScheduler"],
            Param::Is => &["Fully connected input transform", "None"],
            Param::Os => &[
                "LSTM encoder + LSTM decoder",
                "One fully connected layer",
                "Resize + multi-output fully connected",
            ],
            Param::Fsc => &["16", "32", "64"],
            Param::Mbof => &["Add aggregation", "Concatenation aggregation"],
            Param::Sipm => &[
                "Pearson-coefficient adjacency",
                "Spatial attention",
                "Masked adjacency",
                "None",
            ],
            Param::Tipm => &[
                "Temporal attention",
                "Learnable spatial-temporal embedding",
                "None",
            ],
            Param::Fes => &[
                "TST-Sandwich",
                "GCN layer",
                "ST-Linear",
                "TS-Sliding window",
            ],
        }
    }

    /// Number of options in the full table.
    pub fn full_count(self) -> usize {
        self.labels().len()
    }

    pub fn label(self, ordinal: i32) -> Option<&'static str> {
        usize::try_from(ordinal - 1)
            .ok()
            .and_then(|i| self.labels().get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("max_blocks must be >= 1")]
    NoBlocks,
    #[error("{0} option list is empty")]
    Empty(&'static str),
    #[error("{0} option list contains a duplicate")]
    Duplicate(&'static str),
    #[error("{param} option {value} is not in the full catalog")]
    Unknown { param: &'static str, value: i64 },
}

/// The option subsets a search may choose from.
///
/// All lists hold ordinals except `fsc_options`, which holds raw filter
/// sizes (16, 32, 64).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterCatalog {
    pub max_blocks: usize,
    pub sipm_options: Vec<u8>,
    pub tipm_options: Vec<u8>,
    pub fes_options: Vec<u8>,
    pub is_options: Vec<u8>,
    pub os_options: Vec<u8>,
    pub fsc_options: Vec<u16>,
    pub mbof_options: Vec<u8>,
    pub lf_options: Vec<u8>,
    pub bs_options: Vec<u8>,
    pub ilr_options: Vec<u8>,
    pub of_options: Vec<u8>,
}

impl Default for ParameterCatalog {
    fn default() -> Self {
        Self::full(4)
    }
}

fn range(n: usize) -> Vec<u8> {
    (1..=n as u8).collect()
}

impl ParameterCatalog {
    /// Every option of every parameter, with `max_blocks` ST-blocks.
    pub fn full(max_blocks: usize) -> Self {
        Self {
            max_blocks,
            sipm_options: range(4),
            tipm_options: range(3),
            fes_options: range(4),
            is_options: range(2),
            os_options: range(3),
            fsc_options: FILTER_SIZES.to_vec(),
            mbof_options: range(2),
            lf_options: range(2),
            bs_options: range(3),
            ilr_options: range(3),
            of_options: range(3),
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.max_blocks == 0 {
            return Err(CatalogError::NoBlocks);
        }
        for p in Param::ALL {
            let mut raw: Vec<u16> = if p == Param::Fsc {
                self.fsc_options.clone()
            } else {
                self.raw_list(p).iter().map(|&o| u16::from(o)).collect()
            };
            if raw.is_empty() {
                return Err(CatalogError::Empty(p.name()));
            }
            let n = raw.len();
            raw.sort_unstable();
            raw.dedup();
            if raw.len() != n {
                return Err(CatalogError::Duplicate(p.name()));
            }
        }
        for p in Param::ALL {
            if p == Param::Fsc {
                continue;
            }
            let raw = self.raw_list(p);
            if let Some(&v) = raw.iter().find(|&&v| v == 0 || usize::from(v) > p.full_count()) {
                return Err(CatalogError::Unknown {
                    param: p.name(),
                    value: i64::from(v),
                });
            }
        }
        if let Some(&v) = self.fsc_options.iter().find(|v| !FILTER_SIZES.contains(v)) {
            return Err(CatalogError::Unknown {
                param: "FSC",
                value: i64::from(v),
            });
        }
        Ok(())
    }

    fn raw_list(&self, p: Param) -> &[u8] {
        match p {
            Param::Lf => &self.lf_options,
            Param::Bs => &self.bs_options,
            Param::Ilr => &self.ilr_options,
            Param::Of => &self.of_options,
            Param::Is => &self.is_options,
            Param::Os => &self.os_options,
            Param::Mbof => &self.mbof_options,
            Param::Sipm => &self.sipm_options,
            Param::Tipm => &self.tipm_options,
            Param::Fes => &self.fes_options,
            Param::Fsc => &[],
        }
    }

    /// Allowed ordinals for `p`, ascending.
    pub fn options(&self, p: Param) -> Vec<i32> {
        let mut v: Vec<i32> = if p == Param::Fsc {
            self.fsc_options
                .iter()
                .filter_map(|&s| fsc_ordinal(s))
                .collect()
        } else {
            self.raw_list(p).iter().map(|&o| i32::from(o)).collect()
        };
        v.sort_unstable();
        v
    }

    pub fn allows(&self, p: Param, ordinal: i32) -> bool {
        if p == Param::Fsc {
            return filter_size(ordinal).is_some_and(|s| self.fsc_options.contains(&s));
        }
        u8::try_from(ordinal).is_ok_and(|o| self.raw_list(p).contains(&o))
    }

    pub fn count(&self, p: Param) -> usize {
        if p == Param::Fsc {
            self.fsc_options.len()
        } else {
            self.raw_list(p).len()
        }
    }

    /// Number of distinct training states.
    pub fn training_count(&self) -> usize {
        self.count(Param::Lf) * self.count(Param::Bs) * self.count(Param::Ilr) * self.count(Param::Of)
    }

    /// Number of distinct global states.
    pub fn global_count(&self) -> usize {
        self.count(Param::Is) * self.count(Param::Os) * self.count(Param::Fsc) * self.count(Param::Mbof)
    }

    /// Number of (SIPM, TIPM, FES) combinations available to one block.
    pub fn block_op_count(&self) -> usize {
        self.count(Param::Sipm) * self.count(Param::Tipm) * self.count(Param::Fes)
    }
}

pub fn fsc_ordinal(size: u16) -> Option<i32> {
    FILTER_SIZES
        .iter()
        .position(|&s| s == size)
        .map(|i| i as i32 + 1)
}

pub fn filter_size(ordinal: i32) -> Option<u16> {
    usize::try_from(ordinal - 1)
        .ok()
        .and_then(|i| FILTER_SIZES.get(i).copied())
}

/// One row of a trajectory. Ordering is lexicographic on `(index, slots)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateVector {
    pub index: i32,
    pub slots: [i32; 4],
}

impl StateVector {
    pub const fn new(index: i32, slots: [i32; 4]) -> Self {
        Self { index, slots }
    }

    pub const fn terminal(index: i32) -> Self {
        Self::new(index, [SENTINEL; 4])
    }

    pub fn is_start(&self) -> bool {
        self.index == START_INDEX && self.slots == [SENTINEL; 4]
    }

    pub fn is_terminal(&self) -> bool {
        self.index >= 1 && self.slots == [SENTINEL; 4]
    }

    pub fn is_block(&self) -> bool {
        self.index >= 1 && !self.is_terminal()
    }
}

/// The start state `[-2,-1,-1,-1,-1]`.
pub const fn start_state() -> StateVector {
    StateVector::terminal(START_INDEX)
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.slots;
        write!(f, "{}:{a},{b},{c},{d}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {what} from {text:?}")]
pub struct ParseCodeError {
    pub what: &'static str,
    pub text: String,
}

impl FromStr for StateVector {
    type Err = ParseCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseCodeError {
            what: "state vector",
            text: s.to_string(),
        };
        let (idx, rest) = s.trim().split_once(':').ok_or_else(err)?;
        let index = idx.trim().parse::<i32>().map_err(|_| err())?;
        let vals = rest
            .split(',')
            .map(|t| t.trim().parse::<i32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err())?;
        let slots: [i32; 4] = vals.try_into().map_err(|_| err())?;
        Ok(Self { index, slots })
    }
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Slot layout for each kind of state, used for validation messages.
fn slot_params(index: i32) -> [Param; 4] {
    match index {
        TRAINING_INDEX => [Param::Lf, Param::Bs, Param::Ilr, Param::Of],
        GLOBAL_INDEX => [Param::Is, Param::Os, Param::Fsc, Param::Mbof],
        _ => [Param::Sipm, Param::Tipm, Param::Fes, Param::Fes],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("state {0} is terminal")]
    TerminalState(StateVector),
    #[error("state {state} has index at or beyond max_blocks {max_blocks}")]
    IndexOutOfRange { state: StateVector, max_blocks: usize },
    #[error("state {0} is not valid under the catalog")]
    InvalidState(StateVector),
}

/// Checks one state vector in isolation. Returns the rule it breaks.
pub fn check_state(s: &StateVector, catalog: &ParameterCatalog) -> Result<(), String> {
    match s.index {
        START_INDEX => {
            if s.is_start() {
                Ok(())
            } else {
                Err("start state must have all slots -1".into())
            }
        }
        TRAINING_INDEX | GLOBAL_INDEX => {
            let params = slot_params(s.index);
            for (p, &v) in params.iter().zip(&s.slots) {
                if !catalog.allows(*p, v) {
                    return Err(format!("{} option {v} not in catalog", p.name()));
                }
            }
            Ok(())
        }
        i if i >= 1 => {
            if i as usize > catalog.max_blocks {
                return Err(format!("index {i} exceeds max_blocks {}", catalog.max_blocks));
            }
            if s.is_terminal() {
                return Ok(());
            }
            let [sipm, tipm, fes, pb] = s.slots;
            for (p, v) in [(Param::Sipm, sipm), (Param::Tipm, tipm), (Param::Fes, fes)] {
                if !catalog.allows(p, v) {
                    return Err(format!("{} option {v} not in catalog", p.name()));
                }
            }
            if pb < 0 {
                return Err("PBIndex must be >= 0".into());
            }
            if pb >= i {
                return Err(format!("PBIndex must be < {i}"));
            }
            Ok(())
        }
        i => Err(format!("index {i} is below the start index")),
    }
}

pub fn validate_state(s: &StateVector, catalog: &ParameterCatalog) -> bool {
    check_state(s, catalog).is_ok()
}

/// Every valid successor of `s`, in lexicographic order.
pub fn action_space(
    s: &StateVector,
    catalog: &ParameterCatalog,
) -> Result<Vec<StateVector>, StateError> {
    if s.is_terminal() {
        return Err(StateError::TerminalState(*s));
    }
    if check_state(s, catalog).is_err() {
        return Err(StateError::InvalidState(*s));
    }
    if s.index >= catalog.max_blocks as i32 {
        return Err(StateError::IndexOutOfRange {
            state: *s,
            max_blocks: catalog.max_blocks,
        });
    }
    let next = s.index + 1;
    let product = |params: [Param; 4], last: &[i32]| -> Vec<StateVector> {
        let a = catalog.options(params[0]);
        let b = catalog.options(params[1]);
        let c = catalog.options(params[2]);
        let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * last.len());
        for &x in &a {
            for &y in &b {
                for &z in &c {
                    for &w in last {
                        out.push(StateVector::new(next, [x, y, z, w]));
                    }
                }
            }
        }
        out
    };
    let actions = match s.index {
        START_INDEX => {
            let params = slot_params(TRAINING_INDEX);
            product(params, &catalog.options(params[3]))
        }
        TRAINING_INDEX => {
            let params = slot_params(GLOBAL_INDEX);
            product(params, &catalog.options(params[3]))
        }
        _ => {
            let preds: Vec<i32> = (0..next).collect();
            let mut v = Vec::new();
            // A terminal at index 1 would close a model with no blocks.
            if next >= 2 {
                v.push(StateVector::terminal(next));
            }
            v.extend(product(slot_params(next), &preds));
            v
        }
    };
    Ok(actions)
}

/// An ordered trajectory from the start state to a terminal (or index N).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArchitectureCode {
    pub states: Vec<StateVector>,
}

impl ArchitectureCode {
    pub fn new(states: Vec<StateVector>) -> Self {
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of actions taken along the trajectory.
    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &StateVector> {
        self.states.iter().filter(|s| s.is_block())
    }

    pub fn block_count(&self) -> usize {
        self.blocks().count()
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Structural decode that ignores catalog membership. Fails only on
    /// malformed layout; ordinals are copied as-is.
    pub fn to_config(&self) -> Result<StructuredConfig, ParseCodeError> {
        let err = || ParseCodeError {
            what: "structured config",
            text: self.to_string(),
        };
        let training = self.states.get(1).filter(|s| s.index == TRAINING_INDEX).ok_or_else(err)?;
        let global = self.states.get(2).filter(|s| s.index == GLOBAL_INDEX).ok_or_else(err)?;
        let ord = |v: i32| u8::try_from(v).map_err(|_| err());
        let [lf, bs, ilr, of] = training.slots;
        let [is, os, fsc, mbof] = global.slots;
        let blocks = self
            .blocks()
            .map(|b| {
                let [sipm, tipm, fes, pb] = b.slots;
                Ok(BlockConfig {
                    sipm: ord(sipm)?,
                    tipm: ord(tipm)?,
                    fes: ord(fes)?,
                    pred_index: usize::try_from(pb).map_err(|_| err())?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StructuredConfig {
            training: TrainingConfig {
                loss: ord(lf)?,
                batch_size: ord(bs)?,
                initial_lr: ord(ilr)?,
                optimizer: ord(of)?,
            },
            global: GlobalConfig {
                input_structure: ord(is)?,
                output_structure: ord(os)?,
                filter_size: filter_size(fsc).ok_or_else(err)?,
                fusion_method: ord(mbof)?,
            },
            blocks,
        })
    }
}

impl fmt::Display for ArchitectureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ArchitectureCode {
    type Err = ParseCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseCodeError {
                what: "architecture code",
                text: s.to_string(),
            });
        }
        let states = s
            .split(';')
            .map(str::parse)
            .collect::<Result<Vec<StateVector>, _>>()?;
        Ok(Self { states })
    }
}

impl Serialize for ArchitectureCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArchitectureCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A broken rule, tagged with the index of the state that breaks it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub state_index: i32,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state {}: {}", self.state_index, self.rule)
    }
}

/// All rule violations in `code`; empty iff the code is valid.
pub fn validate_code(code: &ArchitectureCode, catalog: &ParameterCatalog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |state_index: i32, rule: String| out.push(Violation { state_index, rule });

    let Some(first) = code.states.first() else {
        push(START_INDEX, "code is empty".into());
        return out;
    };
    if !first.is_start() {
        push(first.index, "code must begin with the start state".into());
    }
    let last_pos = code.states.len() - 1;
    for (pos, s) in code.states.iter().enumerate() {
        let expected = pos as i32 + START_INDEX;
        if s.index != expected {
            push(s.index, format!("expected state index {expected}"));
            continue;
        }
        if pos == 0 {
            continue;
        }
        if let Err(rule) = check_state(s, catalog) {
            push(s.index, rule);
        }
        if s.is_terminal() {
            if pos != last_pos {
                push(s.index, "terminal state must be last".into());
            }
            if s.index == 1 {
                push(s.index, "empty model".into());
            }
        }
    }
    let last = code.states[last_pos];
    let has_block = code.states.iter().any(StateVector::is_block);
    if !has_block && !(last.is_terminal() && last.index == 1) {
        push(last.index, "empty model".into());
    }
    if !last.is_terminal() && last.index != catalog.max_blocks as i32 && has_block {
        push(
            last.index,
            format!("code ends without terminal before max_blocks {}", catalog.max_blocks),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub loss: u8,
    pub batch_size: u8,
    pub initial_lr: u8,
    pub optimizer: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub input_structure: u8,
    pub output_structure: u8,
    /// Raw filter size (16, 32 or 64).
    pub filter_size: u16,
    pub fusion_method: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockConfig {
    pub sipm: u8,
    pub tipm: u8,
    pub fes: u8,
    /// 0 reads the input-stage output; `j` reads block `j`.
    pub pred_index: usize,
}

/// The 8 + 4·k parameters of a model with k blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuredConfig {
    pub training: TrainingConfig,
    pub global: GlobalConfig,
    pub blocks: Vec<BlockConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid input: {rule}")]
pub struct InvalidInput {
    pub rule: String,
}

impl From<Vec<Violation>> for InvalidInput {
    fn from(v: Vec<Violation>) -> Self {
        let rule = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Self { rule }
    }
}

pub fn encode(
    cfg: &StructuredConfig,
    catalog: &ParameterCatalog,
) -> Result<ArchitectureCode, InvalidInput> {
    let fsc = fsc_ordinal(cfg.global.filter_size).ok_or_else(|| InvalidInput {
        rule: format!("filter size {} not in catalog", cfg.global.filter_size),
    })?;
    let t = cfg.training;
    let g = cfg.global;
    let mut states = vec![
        start_state(),
        StateVector::new(
            TRAINING_INDEX,
            [t.loss, t.batch_size, t.initial_lr, t.optimizer].map(i32::from),
        ),
        StateVector::new(
            GLOBAL_INDEX,
            [
                i32::from(g.input_structure),
                i32::from(g.output_structure),
                fsc,
                i32::from(g.fusion_method),
            ],
        ),
    ];
    for (i, b) in cfg.blocks.iter().enumerate() {
        let pb = i32::try_from(b.pred_index).unwrap_or(i32::MAX);
        states.push(StateVector::new(
            i as i32 + 1,
            [i32::from(b.sipm), i32::from(b.tipm), i32::from(b.fes), pb],
        ));
    }
    if cfg.blocks.len() < catalog.max_blocks {
        states.push(StateVector::terminal(cfg.blocks.len() as i32 + 1));
    }
    let code = ArchitectureCode::new(states);
    let violations = validate_code(&code, catalog);
    if violations.is_empty() {
        Ok(code)
    } else {
        Err(violations.into())
    }
}

pub fn decode(
    code: &ArchitectureCode,
    catalog: &ParameterCatalog,
) -> Result<StructuredConfig, InvalidInput> {
    let violations = validate_code(code, catalog);
    if !violations.is_empty() {
        return Err(violations.into());
    }
    code.to_config().map_err(|e| InvalidInput { rule: e.to_string() })
}

fn pick<R: Rng + ?Sized>(rng: &mut R, opts: &[i32]) -> i32 {
    opts[rng.gen_range(0..opts.len())]
}

/// Uniform block count, then uniform options per slot.
pub fn random_code_with<R: Rng + ?Sized>(catalog: &ParameterCatalog, rng: &mut R) -> ArchitectureCode {
    let k = rng.gen_range(1..=catalog.max_blocks);
    let mut states = vec![start_state()];
    for index in [TRAINING_INDEX, GLOBAL_INDEX] {
        let slots = slot_params(index).map(|p| pick(rng, &catalog.options(p)));
        states.push(StateVector::new(index, slots));
    }
    let (sipm, tipm, fes) = (
        catalog.options(Param::Sipm),
        catalog.options(Param::Tipm),
        catalog.options(Param::Fes),
    );
    for i in 1..=k as i32 {
        let slots = [
            pick(rng, &sipm),
            pick(rng, &tipm),
            pick(rng, &fes),
            rng.gen_range(0..i),
        ];
        states.push(StateVector::new(i, slots));
    }
    if k < catalog.max_blocks {
        states.push(StateVector::terminal(k as i32 + 1));
    }
    ArchitectureCode::new(states)
}

pub fn random_code(catalog: &ParameterCatalog, rng_seed: u64) -> ArchitectureCode {
    let mut rng = seed::stream_rng(rng_seed, "random_code", 0);
    random_code_with(catalog, &mut rng)
}

/// Exact number of distinct codes under `catalog`.
pub fn space_size(catalog: &ParameterCatalog) -> BigUint {
    let ops = BigUint::from(catalog.block_op_count());
    let mut sum = BigUint::from(0u32);
    let mut prod = BigUint::from(1u32);
    for i in 1..=catalog.max_blocks {
        prod *= &ops * BigUint::from(i);
        sum += &prod;
    }
    BigUint::from(catalog.training_count()) * BigUint::from(catalog.global_count()) * sum
}
