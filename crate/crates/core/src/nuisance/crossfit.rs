//! Fold plans and cross-fitted nuisance pairs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::NuisancePair;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::{stream_rng, STREAM_FOLDS};

/// Assignment of observations to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

/// Near-equal random folds; sizes differ by at most one.
pub fn make_fold_plan(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::arg("need at least 2 folds"));
    }
    if k > n {
        return Err(Error::arg(format!("cannot split {n} rows into {k} folds")));
    }
    let mut rng = stream_rng(seed, STREAM_FOLDS);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (crate::seed::uniform_open(&mut rng) * (i + 1) as f64) as usize;
        perm.swap(i, j.min(i));
    }
    let mut assignment = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { k, assignment })
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }

    /// Indices outside fold `j`, ascending.
    pub fn training_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != j).collect()
    }

    /// Training subsets, one per fold.
    pub fn training_sets(&self, data: &Dataset) -> Vec<Dataset> {
        (0..self.k).map(|j| data.subset(&self.training_rows(j))).collect()
    }
}

/// Cross-fitted pairs with bookkeeping of which rows each pair was trained on.
#[derive(Clone)]
pub struct CrossFit {
    plan: FoldPlan,
    pairs: Vec<NuisancePair>,
    trained_on: Vec<Vec<bool>>,
}

impl CrossFit {
    /// Wraps per-fold pairs; `pairs[j]` must have been trained without fold `j`.
    pub fn from_pairs(plan: FoldPlan, pairs: Vec<NuisancePair>) -> Result<Self> {
        if pairs.len() != plan.k() {
            return Err(Error::Shape(format!("{} pairs for {} folds", pairs.len(), plan.k())));
        }
        let trained_on = (0..plan.k())
            .map(|j| plan.assignment.iter().map(|&f| f != j).collect())
            .collect();
        Ok(Self { plan, pairs, trained_on })
    }

    pub fn plan(&self) -> &FoldPlan {
        &self.plan
    }

    pub fn pairs(&self) -> &[NuisancePair] {
        &self.pairs
    }

    /// Pair used to evaluate observation `i`.
    ///
    /// # Panics
    /// If the selected pair was trained on row `i`.
    pub fn pair_for(&self, i: usize) -> &NuisancePair {
        let j = self.plan.fold_of(i);
        assert!(!self.trained_on[j][i], "row {i} would be evaluated by a pair trained on it");
        &self.pairs[j]
    }
}

/// Fits `fitter` on every training complement, in fold order.
pub fn crossfit(data: &Dataset, plan: FoldPlan, fitter: &dyn super::NuisanceFitter) -> Result<CrossFit> {
    if plan.n() != data.n() {
        return Err(Error::Shape(format!("fold plan has {} rows, data {}", plan.n(), data.n())));
    }
    let mut pairs = Vec::with_capacity(plan.k());
    for (j, train) in plan.training_sets(data).iter().enumerate() {
        let pair = fitter
            .fit(train)
            .map_err(|e| Error::Fold { fold: j, source: alloc::boxed::Box::new(e) })?;
        pairs.push(pair);
    }
    CrossFit::from_pairs(plan, pairs)
}
