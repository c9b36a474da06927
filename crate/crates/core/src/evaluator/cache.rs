use std::collections::HashMap;

use super::{Evaluator, EvaluatorError};
use crate::objective::EvaluationResult;
use crate::scalar::Scalar;
use crate::search_space::ArchitectureCode;

/// Memoizes an evaluator by the canonical text of the full code.
/// Failed results are not stored, so they are retried.
#[derive(Debug)]
pub struct Cached<T, E> {
    inner: E,
    store: HashMap<String, EvaluationResult<T>>,
    hits: u64,
    misses: u64,
}

impl<T: Scalar, E: Evaluator<T>> Cached<T, E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            store: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    /// Returns the result and whether it came from the cache.
    pub fn lookup(
        &mut self,
        code: &ArchitectureCode,
    ) -> Result<(EvaluationResult<T>, bool), EvaluatorError> {
        let key = code.canonical();
        if let Some(r) = self.store.get(&key) {
            self.hits += 1;
            return Ok((r.clone(), true));
        }
        self.misses += 1;
        let r = self.inner.evaluate(code)?;
        if r.is_ok() {
            self.store.insert(key, r.clone());
        }
        Ok((r, false))
    }

    /// Seeds the cache without touching the counters (used when resuming).
    pub fn preload(&mut self, code: &ArchitectureCode, result: EvaluationResult<T>) {
        if result.is_ok() {
            self.store.insert(code.canonical(), result);
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<T: Scalar, E: Evaluator<T>> Evaluator<T> for Cached<T, E> {
    fn evaluate(&mut self, code: &ArchitectureCode) -> Result<EvaluationResult<T>, EvaluatorError> {
        self.lookup(code).map(|(r, _)| r)
    }

    fn measures_wall_time(&self) -> bool {
        self.inner.measures_wall_time()
    }
}
