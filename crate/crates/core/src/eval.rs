//! Full-ranking evaluation, the popularity and MF-BPR baselines.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::data::{EntityLayout, InteractionDataset};
use crate::error::{Error, Result};
use crate::graph::{ItemId, UserId};
use crate::metrics::{auc, ndcg_at_k, recall_at_k};
use crate::real::Real;
use crate::train::TrainedModel;

/// Anything that can score every item for a user.
pub trait Scorer {
    /// Writes ŷ(u, i) for every item id into `out` (length = item count).
    fn score_items(&self, user: UserId, out: &mut [f64]);
}

/// Which held-out set plays the relevant role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEval {
    pub user: UserId,
    /// One entry per K.
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// `None` when every candidate is relevant.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub users: Vec<UserEval>,
    pub mean_recall: Vec<f64>,
    pub mean_ndcg: Vec<f64>,
    pub mean_auc: f64,
    pub user_count: usize,
}

impl EvalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean_recall[i])
    }
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean_ndcg[i])
    }
}

/// Items not in `train_pos(u)`, sorted by descending score, ties by id.
pub fn rank_candidates(data: &InteractionDataset, user: UserId, scores: &[f64]) -> Vec<ItemId> {
    let mut cands: Vec<ItemId> = (0..data.item_count() as u32)
        .map(ItemId)
        .filter(|&i| !data.is_train_pos(user, i))
        .collect();
    cands.sort_by(|a, b| {
        scores[b.index()]
            .total_cmp(&scores[a.index()])
            .then(a.cmp(b))
    });
    cands
}

/// Metrics for one user, or `None` when the user has no relevant items.
pub fn evaluate_user<S: Scorer + ?Sized>(
    scorer: &S,
    data: &InteractionDataset,
    user: UserId,
    split: Split,
    ks: &[usize],
    scratch: &mut Vec<f64>,
) -> Option<UserEval> {
    let relevant = match split {
        Split::Validation => data.val_pos(user),
        Split::Test => data.test_pos(user),
    };
    if relevant.is_empty() {
        return None;
    }
    scratch.clear();
    scratch.resize(data.item_count(), 0.0);
    scorer.score_items(user, scratch);
    let ranked = rank_candidates(data, user, scratch);
    assert!(
        ranked.iter().all(|&i| !data.is_train_pos(user, i)),
        "train positive leaked into the candidate list"
    );
    let recall = ks.iter().map(|&k| recall_at_k(&ranked, relevant, k).unwrap_or(0.0)).collect();
    let ndcg = ks.iter().map(|&k| ndcg_at_k(&ranked, relevant, k).unwrap_or(0.0)).collect();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &i in &ranked {
        if relevant.binary_search(&i).is_ok() {
            pos.push(scratch[i.index()]);
        } else {
            neg.push(scratch[i.index()]);
        }
    }
    Some(UserEval {
        user,
        recall,
        ndcg,
        auc: auc(&pos, &neg).ok(),
    })
}

/// Means over users in ascending id order.
pub fn summarize(ks: &[usize], users: Vec<UserEval>) -> Result<EvalReport> {
    if users.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    let n = users.len() as f64;
    let mut mean_recall = vec![0.0; ks.len()];
    let mut mean_ndcg = vec![0.0; ks.len()];
    let (mut auc_sum, mut auc_n) = (0.0, 0usize);
    for u in &users {
        for k in 0..ks.len() {
            mean_recall[k] += u.recall[k];
            mean_ndcg[k] += u.ndcg[k];
        }
        if let Some(a) = u.auc {
            auc_sum += a;
            auc_n += 1;
        }
    }
    mean_recall.iter_mut().for_each(|x| *x /= n);
    mean_ndcg.iter_mut().for_each(|x| *x /= n);
    Ok(EvalReport {
        ks: ks.to_vec(),
        user_count: users.len(),
        users,
        mean_recall,
        mean_ndcg,
        mean_auc: if auc_n == 0 { 0.0 } else { auc_sum / auc_n as f64 },
    })
}

/// Single-threaded evaluation over every user with held-out positives.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    data: &InteractionDataset,
    split: Split,
    ks: &[usize],
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::config("k", "K values must be ≥ 1"));
    }
    let mut scratch = Vec::new();
    let users = (0..data.user_count() as u32)
        .filter_map(|u| evaluate_user(scorer, data, UserId(u), split, ks, &mut scratch))
        .collect();
    summarize(ks, users)
}

/// Scores items by their number of training interactions.
#[derive(Debug, Clone)]
pub struct Popularity {
    counts: Vec<f64>,
}

impl Popularity {
    pub fn fit(data: &InteractionDataset) -> Self {
        let mut counts = vec![0.0; data.item_count()];
        for (_, i) in data.train_pairs() {
            counts[i.index()] += 1.0;
        }
        Self { counts }
    }
}

impl Scorer for Popularity {
    fn score_items(&self, _user: UserId, out: &mut [f64]) {
        out.copy_from_slice(&self.counts);
    }
}

/// Plain matrix factorization trained with the same BPR loss, Adam, sampling
/// and early stopping as the full model, without graph, propagation or fusion.
pub fn mf_baseline_train<T: Real>(
    data: &InteractionDataset,
    layout: &EntityLayout,
    config: &ModelConfig,
) -> Result<(TrainedModel<T>, Vec<crate::train::EpochLog>)> {
    crate::train::train_mf(data, layout, config)
}
