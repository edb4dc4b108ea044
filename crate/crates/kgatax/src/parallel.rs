//! Evaluation fanned out over users. Per-user results are collected in user
//! order before averaging, so the report does not depend on thread count.

use kgatax_core::eval::{evaluate_user, summarize, EvalReport, Scorer, Split};
use kgatax_core::{InteractionDataset, UserId};
use rayon::prelude::*;

use crate::error::{AppError, Result};

/// `threads = None` uses the global rayon pool.
pub fn evaluate_parallel<S: Scorer + Sync + ?Sized>(
    scorer: &S,
    data: &InteractionDataset,
    split: Split,
    ks: &[usize],
    threads: Option<usize>,
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(AppError::Config("K values must be ≥ 1".into()));
    }
    let run = || {
        (0..data.user_count() as u32)
            .into_par_iter()
            .map_init(Vec::new, |scratch, u| evaluate_user(scorer, data, UserId(u), split, ks, scratch))
            .collect::<Vec<_>>()
    };
    let per_user = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AppError::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(summarize(ks, per_user.into_iter().flatten().collect())?)
}
