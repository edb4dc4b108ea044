//! Alternating optimization: recommendation (BPR) batches through the
//! propagated representations, then one TransR pass over the graph, with
//! validation Recall@20 driving early stopping.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::adam::{Adam, Block};
use crate::config::ModelConfig;
use crate::data::{AuxiliaryMap, EntityLayout, InteractionDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Scorer, Split};
use crate::graph::{CollaborativeKG, ItemId, UserId};
use crate::kernel::{axpy, dot_unchecked, xavier_init, Matrix};
use crate::model::{bpr_step_loss, forward, BprSample, ModelInputs, ModelParameters};
use crate::propagation::{Dropout, Neighborhoods};
use crate::real::{neg_log_sigmoid, sigmoid, Real};
use crate::rng::{stream, Stream};
use crate::transr::{kg_adam, kg_epoch};

/// Cutoff of the validation metric used for early stopping.
pub const VALIDATION_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub rec_loss: f64,
    pub kg_loss: f64,
    /// NaN when no user has validation positives.
    pub val_recall: f64,
}

/// Tracks the best validation score and counts epochs without improvement.
/// `patience == 0` never stops early.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch's metric; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        match self.best {
            Some((_, b)) if metric <= b || metric.is_nan() => {
                self.stale += 1;
                false
            }
            _ if metric.is_nan() => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, metric));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience > 0 && self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Parameters plus cached e* for every entity.
#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    pub config: ModelConfig,
    pub params: ModelParameters<T>,
    pub layout: EntityLayout,
    star: Matrix<T>,
}

/// Neighborhoods used for every evaluation-mode forward pass.
pub fn eval_neighborhoods(g: &CollaborativeKG, config: &ModelConfig) -> Neighborhoods {
    Neighborhoods::sample(g, config.neighbor_cap, config.seed, Stream::EvalNeighbors, &[])
}

impl<T: Real> TrainedModel<T> {
    /// Computes e* with dropout off.
    pub fn new(
        config: ModelConfig,
        params: ModelParameters<T>,
        layout: EntityLayout,
        graph: &CollaborativeKG,
        aux: &AuxiliaryMap,
    ) -> Result<Self> {
        let inputs = ModelInputs {
            graph,
            aux,
            layout: &layout,
            config: &config,
        };
        let star = forward(&params, inputs, &eval_neighborhoods(graph, &config), None)?.star;
        Ok(Self {
            config,
            params,
            layout,
            star,
        })
    }

    pub fn star(&self) -> &Matrix<T> {
        &self.star
    }

    pub fn user_repr(&self, u: UserId) -> &[T] {
        self.star.row(self.layout.user_entity(u).index())
    }

    pub fn item_repr(&self, i: ItemId) -> &[T] {
        self.star.row(self.layout.item_entity(i).index())
    }

    pub fn score(&self, u: UserId, i: ItemId) -> T {
        dot_unchecked(self.user_repr(u), self.item_repr(i))
    }

    /// Top-K unseen items for `u`, by descending score then ascending id.
    pub fn recommend_topk(&self, data: &InteractionDataset, u: UserId, k: usize) -> Result<Vec<(ItemId, T)>> {
        if u.index() >= data.user_count() || u.index() >= self.layout.user_count() {
            return Err(Error::UnknownUser(u.0));
        }
        if k == 0 {
            return Err(Error::config("k", "must be ≥ 1"));
        }
        let mut scored: Vec<(ItemId, T)> = (0..data.item_count() as u32)
            .map(ItemId)
            .filter(|&i| !data.is_train_pos(u, i))
            .map(|i| (i, self.score(u, i)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored)
    }
}

impl<T: Real> Scorer for TrainedModel<T> {
    fn score_items(&self, user: UserId, out: &mut [f64]) {
        let eu = self.user_repr(user);
        for (i, s) in out.iter_mut().enumerate() {
            *s = dot_unchecked(eu, self.item_repr(ItemId(i as u32))).to_f64();
        }
    }
}

struct StarScorer<'a, T> {
    star: &'a Matrix<T>,
    layout: &'a EntityLayout,
}

impl<T: Real> Scorer for StarScorer<'_, T> {
    fn score_items(&self, user: UserId, out: &mut [f64]) {
        let eu = self.star.row(self.layout.user_entity(user).index());
        for (i, s) in out.iter_mut().enumerate() {
            let ei = self.star.row(self.layout.item_entity(ItemId(i as u32)).index());
            *s = dot_unchecked(eu, ei).to_f64();
        }
    }
}

fn validation_recall<T: Real>(star: &Matrix<T>, layout: &EntityLayout, data: &InteractionDataset) -> Result<f64> {
    let scorer = StarScorer { star, layout };
    Ok(evaluate(&scorer, data, Split::Validation, &[VALIDATION_K])?.mean_recall[0])
}

fn has_validation(data: &InteractionDataset) -> bool {
    (0..data.user_count() as u32).any(|u| !data.val_pos(UserId(u)).is_empty())
}

/// Shuffled training pairs, each with a fresh negative.
fn epoch_samples(data: &InteractionDataset, seed: u64, epoch: usize) -> Result<Vec<BprSample>> {
    let mut rng = stream(seed, Stream::RecBatches, &[epoch as u64]);
    let mut pairs: Vec<(UserId, ItemId)> = data.train_pairs().collect();
    pairs.shuffle(&mut rng);
    pairs
        .into_iter()
        .map(|(user, pos)| {
            Ok(BprSample {
                user,
                pos,
                neg: data.sample_rec_negative(user, &mut rng)?,
            })
        })
        .collect()
}

fn diverged(epoch: usize, phase: &'static str, batch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) => Error::Diverged { epoch, phase, batch },
        other => other,
    }
}

/// Trains the full model. `on_epoch` sees each epoch's log as it completes.
pub fn train<T: Real>(
    data: &InteractionDataset,
    graph: &CollaborativeKG,
    aux: &AuxiliaryMap,
    layout: &EntityLayout,
    config: &ModelConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(TrainedModel<T>, Vec<EpochLog>)> {
    config.validate()?;
    if data.train_len() == 0 {
        return Err(Error::Data("empty training split".into()));
    }
    if graph.entity_count() != layout.entity_count() {
        return Err(Error::Data("graph and layout disagree on entity count".into()));
    }
    let inputs = ModelInputs {
        graph,
        aux,
        layout,
        config,
    };
    let seed = config.seed;
    let mut params: ModelParameters<T> = ModelParameters::init(
        config,
        graph.entity_count(),
        graph.relation_count(),
        &mut stream(seed, Stream::Init, &[]),
    )?;
    let mut rec_adam = params.adam();
    let mut kg_opt = kg_adam(&params.embed);

    if config.pretrain_kg {
        for p in 0..config.pretrain_epochs {
            kg_epoch(
                &mut params.embed,
                &mut kg_opt,
                graph,
                config.batch_size,
                config.lr,
                config.kg_margin,
                0,
                &mut stream(seed, Stream::Pretrain, &[p as u64]),
            )?;
        }
    }

    let eval_hood = eval_neighborhoods(graph, config);
    let validate = has_validation(data);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut grads = params.zeros_like();
    let mut logs = Vec::new();

    for epoch in 0..config.epochs {
        let ep = epoch + 1;
        let hood = Neighborhoods::sample(graph, config.neighbor_cap, seed, Stream::Neighbors, &[epoch as u64]);
        let samples = epoch_samples(data, seed, epoch)?;
        let mut rec_sum = 0.0;
        let mut rec_batches = 0usize;
        for (b, chunk) in samples.chunks(config.batch_size).enumerate() {
            grads.fill_zero();
            let drop = (config.dropout > 0.0).then_some(Dropout {
                p: config.dropout,
                seed,
                epoch: epoch as u64,
                batch: b as u64,
            });
            let loss = bpr_step_loss(&params, inputs, &hood, drop.as_ref(), chunk, Some(&mut grads))
                .map_err(diverged(ep, "rec", b))?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: ep,
                    phase: "rec",
                    batch: b,
                });
            }
            params
                .adam_step(&mut rec_adam, &grads, config.lr)
                .map_err(diverged(ep, "rec", b))?;
            rec_sum += loss.to_f64();
            rec_batches += 1;
        }
        let kg_loss = if config.kg_alternate {
            kg_epoch(
                &mut params.embed,
                &mut kg_opt,
                graph,
                config.batch_size,
                config.lr,
                config.kg_margin,
                ep,
                &mut stream(seed, Stream::KgEpoch, &[epoch as u64]),
            )?
            .mean_loss
        } else {
            0.0
        };
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch: ep,
                phase: "kg",
                batch: 0,
            });
        }
        let val_recall = if validate {
            let star = forward(&params, inputs, &eval_hood, None)?.star;
            validation_recall(&star, layout, data)?
        } else {
            f64::NAN
        };
        let log = EpochLog {
            epoch: ep,
            rec_loss: rec_sum / rec_batches.max(1) as f64,
            kg_loss,
            val_recall,
        };
        on_epoch(&log);
        logs.push(log);
        if validate {
            if stopper.observe(ep, val_recall) {
                best = params.clone();
            }
            if stopper.should_stop() {
                break;
            }
        }
    }
    if !validate {
        best = params;
    }
    let model = TrainedModel::new(config.clone(), best, layout.clone(), graph, aux)?;
    Ok((model, logs))
}

/// Matrix-factorization BPR over the entity table only. Consumes the same
/// random streams as [`train`], so with depth 0, fusion off and no KG phases
/// both produce identical scores.
pub fn train_mf<T: Real>(
    data: &InteractionDataset,
    layout: &EntityLayout,
    config: &ModelConfig,
) -> Result<(TrainedModel<T>, Vec<EpochLog>)> {
    config.validate()?;
    if data.train_len() == 0 {
        return Err(Error::Data("empty training split".into()));
    }
    let seed = config.seed;
    let mut table: Matrix<T> = xavier_init(layout.entity_count(), config.dim, &mut stream(seed, Stream::Init, &[]))?;
    let mut adam = Adam::<T>::new(&[table.as_slice().len()]);
    let mut grad = Matrix::zeros_like(&table);
    let lam = T::of(config.l2);
    let validate = has_validation(data);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = table.clone();
    let mut logs = Vec::new();

    for epoch in 0..config.epochs {
        let ep = epoch + 1;
        let samples = epoch_samples(data, seed, epoch)?;
        let mut rec_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in samples.chunks(config.batch_size).enumerate() {
            grad.fill_zero();
            let scale = T::one() / T::of(chunk.len() as f64);
            let mut rank = T::zero();
            for s in chunk {
                let u = layout.user_entity(s.user).index();
                let i = layout.item_entity(s.pos).index();
                let j = layout.item_entity(s.neg).index();
                let (eu, ei, ej) = (table.row(u).to_vec(), table.row(i).to_vec(), table.row(j).to_vec());
                let x = dot_unchecked(&eu, &ei) - dot_unchecked(&eu, &ej);
                rank += neg_log_sigmoid(x);
                let c = -sigmoid(-x) * scale;
                axpy(c, &ei, grad.row_mut(u));
                axpy(-c, &ej, grad.row_mut(u));
                axpy(c, &eu, grad.row_mut(i));
                axpy(-c, &eu, grad.row_mut(j));
            }
            let mut rows: Vec<usize> = chunk
                .iter()
                .flat_map(|s| {
                    [
                        layout.user_entity(s.user).index(),
                        layout.item_entity(s.pos).index(),
                        layout.item_entity(s.neg).index(),
                    ]
                })
                .collect();
            rows.sort_unstable();
            rows.dedup();
            let mut reg = T::zero();
            for &r in &rows {
                let row = table.row(r).to_vec();
                reg += row.iter().map(|&v| v * v).sum::<T>();
                if lam != T::zero() {
                    axpy(T::of(2.0) * lam, &row, grad.row_mut(r));
                }
            }
            let loss = rank * scale + lam * reg;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: ep,
                    phase: "rec",
                    batch: b,
                });
            }
            adam.step(
                config.lr,
                &mut [Block {
                    name: "entity",
                    param: table.as_mut_slice(),
                    grad: grad.as_slice(),
                }],
            )
            .map_err(diverged(ep, "rec", b))?;
            rec_sum += loss.to_f64();
            batches += 1;
        }
        let val_recall = if validate {
            validation_recall(&table, layout, data)?
        } else {
            f64::NAN
        };
        logs.push(EpochLog {
            epoch: ep,
            rec_loss: rec_sum / batches.max(1) as f64,
            kg_loss: 0.0,
            val_recall,
        });
        if validate {
            if stopper.observe(ep, val_recall) {
                best = table.clone();
            }
            if stopper.should_stop() {
                break;
            }
        }
    }
    if !validate {
        best = table;
    }
    let mut cfg = config.clone();
    cfg.layer_dims = vec![];
    cfg.fusion = false;
    cfg.pretrain_kg = false;
    cfg.kg_alternate = false;
    let params = ModelParameters {
        embed: crate::transr::TransRParameters {
            entity: best.clone(),
            relation: Matrix::zeros(0, cfg.dim),
            projection: Matrix::zeros(0, cfg.dim * cfg.dim),
        },
        layers: Vec::new(),
    };
    Ok((
        TrainedModel {
            config: cfg,
            params,
            layout: layout.clone(),
            star: best,
        },
        logs,
    ))
}
