//! Deterministic additive surrogate standing in for short training runs.
//!
//! MAE is `base` plus one utility per chosen option (block-level tables are
//! summed over blocks), a diversity term per extra distinct FES, a bonus when
//! any block skips its immediate predecessor, and a depth penalty by block
//! count. Inference time is `time_base` plus a per-block cost that grows with
//! filter size and depends on FES.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Evaluator, EvaluatorError};
use crate::objective::EvaluationResult;
use crate::scalar::Scalar;
use crate::search_space::{ArchitectureCode, Param, ParameterCatalog, StructuredConfig};

/// Utility tables are indexed by ordinal − 1; `fsc` is indexed by filter-size ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct SurrogateWeights<T> {
    pub base: T,
    pub is: Vec<T>,
    pub os: Vec<T>,
    pub fsc: Vec<T>,
    pub mbof: Vec<T>,
    pub sipm: Vec<T>,
    pub tipm: Vec<T>,
    pub fes: Vec<T>,
    pub lf: Vec<T>,
    pub bs: Vec<T>,
    pub ilr: Vec<T>,
    pub of: Vec<T>,
    pub diversity_coeff: T,
    pub nonseq_bonus: T,
    pub depth_penalty: BTreeMap<usize, T>,
    pub time_base: T,
    pub time_per_block: T,
    pub time_fsc_coeff: T,
    pub fes_time: Vec<T>,
}

fn lits<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Scalar> Default for SurrogateWeights<T> {
    fn default() -> Self {
        Self {
            base: T::lit(30.0),
            is: lits(&[-0.8, 0.0]),
            os: lits(&[-0.4, 0.0, -0.6]),
            fsc: lits(&[0.0, -0.3, -0.5]),
            mbof: lits(&[0.0, -0.1]),
            sipm: lits(&[-0.5, -1.0, -0.7, 0.0]),
            tipm: lits(&[-0.6, -0.8, 0.0]),
            fes: lits(&[-1.6, -0.4, -1.2, -2.0]),
            lf: lits(&[0.0, -0.2]),
            bs: lits(&[-0.1, 0.0, -0.05]),
            ilr: lits(&[-0.15, -0.05, 0.0]),
            of: lits(&[0.0, -0.1, -0.2]),
            diversity_coeff: T::lit(-0.5),
            nonseq_bonus: T::lit(-0.3),
            depth_penalty: [(1, T::lit(0.6)), (4, T::lit(0.4))].into_iter().collect(),
            time_base: T::lit(2.0),
            time_per_block: T::lit(1.0),
            time_fsc_coeff: T::lit(0.5),
            fes_time: lits(&[1.2, 0.4, 0.8, 1.5]),
        }
    }
}

impl<T: Scalar> SurrogateWeights<T> {
    /// Every utility zero, no depth penalty: MAE is `base` for any model.
    pub fn flat(base: T) -> Self {
        let zeros = |n: usize| vec![T::zero(); n];
        Self {
            base,
            is: zeros(2),
            os: zeros(3),
            fsc: zeros(3),
            mbof: zeros(2),
            sipm: zeros(4),
            tipm: zeros(3),
            fes: zeros(4),
            lf: zeros(2),
            bs: zeros(3),
            ilr: zeros(3),
            of: zeros(3),
            diversity_coeff: T::zero(),
            nonseq_bonus: T::zero(),
            depth_penalty: BTreeMap::new(),
            ..Self::default()
        }
    }

    fn table(&self, p: Param) -> &[T] {
        match p {
            Param::Lf => &self.lf,
            Param::Bs => &self.bs,
            Param::Ilr => &self.ilr,
            Param::Of => &self.of,
            Param::Is => &self.is,
            Param::Os => &self.os,
            Param::Fsc => &self.fsc,
            Param::Mbof => &self.mbof,
            Param::Sipm => &self.sipm,
            Param::Tipm => &self.tipm,
            Param::Fes => &self.fes,
        }
    }

    fn utility(&self, p: Param, ordinal: impl Into<i64>) -> T {
        let i = ordinal.into() - 1;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.table(p).get(i).copied())
            .unwrap_or_else(T::zero)
    }

    pub fn validate(&self) -> Result<(), String> {
        for p in Param::ALL {
            if self.table(p).len() != p.full_count() {
                return Err(format!(
                    "{} table needs {} entries",
                    p.name().to_lowercase(),
                    p.full_count()
                ));
            }
        }
        if self.fes_time.len() != Param::Fes.full_count() {
            return Err("fes_time table needs 4 entries".into());
        }
        Ok(())
    }

    /// Smallest MAE any model in `catalog` can reach, from the additive bound:
    /// best option per table, best depth, full diversity and the wiring bonus
    /// wherever they help.
    pub fn mae_lower_bound(&self, catalog: &ParameterCatalog) -> T {
        let best = |p: Param| {
            catalog
                .options(p)
                .into_iter()
                .map(|o| self.utility(p, o))
                .fold(T::infinity(), T::min)
        };
        let fixed = [Param::Lf, Param::Bs, Param::Ilr, Param::Of, Param::Is, Param::Os, Param::Fsc, Param::Mbof]
            .into_iter()
            .fold(self.base, |acc, p| acc + best(p));
        let per_block = best(Param::Sipm) + best(Param::Tipm) + best(Param::Fes);
        let fes_kinds = catalog.count(Param::Fes);
        (1..=catalog.max_blocks)
            .map(|k| {
                let n = T::from_usize(k).expect("block count");
                let distinct = k.min(fes_kinds);
                let div = self.diversity_coeff.min(T::zero())
                    * T::from_usize(distinct - 1).expect("count");
                let nonseq = if k >= 2 { self.nonseq_bonus.min(T::zero()) } else { T::zero() };
                let depth = self.depth_penalty.get(&k).copied().unwrap_or_else(T::zero);
                fixed + n * per_block + div + nonseq + depth
            })
            .fold(T::infinity(), T::min)
    }

    pub fn score(&self, cfg: &StructuredConfig) -> EvaluationResult<T> {
        let t = cfg.training;
        let g = cfg.global;
        let fsc_ordinal = crate::search_space::fsc_ordinal(g.filter_size).unwrap_or(0);
        let mut mae = self.base
            + self.utility(Param::Lf, t.loss)
            + self.utility(Param::Bs, t.batch_size)
            + self.utility(Param::Ilr, t.initial_lr)
            + self.utility(Param::Of, t.optimizer)
            + self.utility(Param::Is, g.input_structure)
            + self.utility(Param::Os, g.output_structure)
            + self.utility(Param::Fsc, fsc_ordinal)
            + self.utility(Param::Mbof, g.fusion_method);
        let filter_units = T::from_u16(g.filter_size).expect("filter size") / T::lit(16.0) - T::one();
        let mut time = self.time_base;
        let mut fes_seen = [false; 4];
        for b in &cfg.blocks {
            mae = mae
                + self.utility(Param::Sipm, b.sipm)
                + self.utility(Param::Tipm, b.tipm)
                + self.utility(Param::Fes, b.fes);
            if let Some(seen) = fes_seen.get_mut(usize::from(b.fes).wrapping_sub(1)) {
                *seen = true;
            }
            let fes_time = usize::from(b.fes)
                .checked_sub(1)
                .and_then(|i| self.fes_time.get(i).copied())
                .unwrap_or_else(T::zero);
            time = time + self.time_per_block + self.time_fsc_coeff * filter_units + fes_time;
        }
        let distinct = fes_seen.iter().filter(|&&s| s).count();
        if distinct > 1 {
            mae = mae + self.diversity_coeff * T::from_usize(distinct - 1).expect("count");
        }
        if cfg.blocks.iter().enumerate().any(|(i, b)| b.pred_index != i) {
            mae = mae + self.nonseq_bonus;
        }
        if let Some(&d) = self.depth_penalty.get(&cfg.blocks.len()) {
            mae = mae + d;
        }
        EvaluationResult::ok(mae, time)
    }
}

/// Scores a code with the additive surrogate. Malformed codes fail.
pub fn surrogate_evaluate<T: Scalar>(
    code: &ArchitectureCode,
    weights: &SurrogateWeights<T>,
) -> EvaluationResult<T> {
    match code.to_config() {
        Ok(cfg) if !cfg.blocks.is_empty() => weights.score(&cfg),
        Ok(_) => EvaluationResult::failed("model has no ST-blocks"),
        Err(e) => EvaluationResult::failed(e.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateEvaluator<T> {
    pub weights: SurrogateWeights<T>,
}

impl<T: Scalar> Default for SurrogateEvaluator<T> {
    fn default() -> Self {
        Self::new(SurrogateWeights::default())
    }
}

impl<T: Scalar> SurrogateEvaluator<T> {
    pub fn new(weights: SurrogateWeights<T>) -> Self {
        Self { weights }
    }
}

impl<T: Scalar> Evaluator<T> for SurrogateEvaluator<T> {
    fn evaluate(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError> {
        Ok(surrogate_evaluate(code, &self.weights))
    }
}
