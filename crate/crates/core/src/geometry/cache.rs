use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};

use super::manifold::{Frame, Point};

pub const DEFAULT_FIRST_STEP: f64 = 1e-5;
pub const DEFAULT_SECOND_STEP: f64 = 1e-4;

/// Finite-difference step sizes plus an optional read-through memo of the
/// connection table `nabla_{X_j} X_k`, keyed by the exact bits of the point.
#[derive(Debug)]
pub struct GeometryCache<const D: usize, const N: usize> {
    first_step: f64,
    second_step: f64,
    memo: Option<Mutex<HashMap<[u64; D], [Frame<D, N>; N]>>>,
}

impl<const D: usize, const N: usize> Default for GeometryCache<D, N> {
    fn default() -> Self {
        Self {
            first_step: DEFAULT_FIRST_STEP,
            second_step: DEFAULT_SECOND_STEP,
            memo: None,
        }
    }
}

impl<const D: usize, const N: usize> GeometryCache<D, N> {
    pub fn new(first_step: f64, second_step: f64, memoize: bool) -> Result<Self> {
        for (name, h) in [("first-order", first_step), ("second-order", second_step)] {
            // Below ~1e-8 central differences lose every significant digit.
            if !(h.is_finite() && (1e-8..=1e-1).contains(&h)) {
                return Err(Error::FiniteDifference(format!(
                    "{name} step {h:e} outside [1e-8, 1e-1]"
                )));
            }
        }
        Ok(Self {
            first_step,
            second_step,
            memo: memoize.then(|| Mutex::new(HashMap::new())),
        })
    }

    pub fn first_step(&self) -> f64 {
        self.first_step
    }

    pub fn second_step(&self) -> f64 {
        self.second_step
    }

    pub fn is_memoizing(&self) -> bool {
        self.memo.is_some()
    }

    pub fn len(&self) -> usize {
        self.memo
            .as_ref()
            .map_or(0, |m| m.lock().expect("geometry memo poisoned").len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn connection_or_insert(
        &self,
        x: &Point<D>,
        compute: impl FnOnce() -> [Frame<D, N>; N],
    ) -> [Frame<D, N>; N] {
        let Some(memo) = &self.memo else {
            return compute();
        };
        let key: [u64; D] = std::array::from_fn(|i| x[i].to_bits());
        if let Some(hit) = memo.lock().expect("geometry memo poisoned").get(&key) {
            return *hit;
        }
        let value = compute();
        memo.lock()
            .expect("geometry memo poisoned")
            .insert(key, value);
        value
    }
}
