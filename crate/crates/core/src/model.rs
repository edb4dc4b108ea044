//! Parameters of the full model and its forward/backward passes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::adam::{Adam, Block};
use crate::config::ModelConfig;
use crate::data::{AuxiliaryMap, EntityLayout};
use crate::error::{Error, Result};
use crate::fusion::{fused_base, fused_base_backward};
use crate::graph::{CollaborativeKG, EntityId, ItemId, UserId};
use crate::kernel::{axpy, dot_unchecked, Matrix};
use crate::propagation::{
    concat_layers, propagate_layer, propagate_layer_backward, split_concat_grad, Dropout, LayerCache, LayerParams,
    Neighborhoods,
};
use crate::real::{neg_log_sigmoid, sigmoid, Real};
use crate::transr::TransRParameters;

/// Every learnable array. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    pub embed: TransRParameters<T>,
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Real> ModelParameters<T> {
    /// Draws, in order: entity table, relation table, projections, then each
    /// layer's W1, W2, W_agg.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, entities: usize, relations: usize, rng: &mut R) -> Result<Self> {
        let embed = TransRParameters::init(entities, relations, config.dim, rng)?;
        let mut layers = Vec::with_capacity(config.depth());
        for l in 1..=config.depth() {
            layers.push(LayerParams::init(
                config.layer_width(l - 1),
                config.layer_width(l),
                config.dim,
                rng,
            )?);
        }
        Ok(Self { embed, layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            embed: self.embed.zeros_like(),
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    /// Named arrays in persistence order.
    pub fn blocks(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::with_capacity(3 + 3 * self.layers.len());
        out.push((String::from("entity"), &self.embed.entity));
        out.push((String::from("relation"), &self.embed.relation));
        out.push((String::from("projection"), &self.embed.projection));
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{}.w1", l + 1), &layer.w1));
            out.push((format!("layer{}.w2", l + 1), &layer.w2));
            out.push((format!("layer{}.w_agg", l + 1), &layer.w_agg));
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = Vec::with_capacity(3 + 3 * self.layers.len());
        out.push(&mut self.embed.entity);
        out.push(&mut self.embed.relation);
        out.push(&mut self.embed.projection);
        for layer in &mut self.layers {
            out.push(&mut layer.w1);
            out.push(&mut layer.w2);
            out.push(&mut layer.w_agg);
        }
        out
    }

    /// Rebuilds parameters from arrays in [`Self::blocks`] order, checking
    /// their shapes against `config`.
    pub fn from_blocks(config: &ModelConfig, blocks: Vec<Matrix<T>>) -> Result<Self> {
        let want = 3 + 3 * config.depth();
        if blocks.len() != want {
            return Err(Error::Shape {
                op: "ModelParameters::from_blocks",
                expected: want,
                got: blocks.len(),
            });
        }
        let mut it = blocks.into_iter();
        let entity = it.next().unwrap();
        let relation = it.next().unwrap();
        let projection = it.next().unwrap();
        let d = config.dim;
        let rels = relation.rows();
        let expect = |m: &Matrix<T>, rows: usize, cols: usize, what: &'static str| {
            if m.shape() == (rows, cols) {
                Ok(())
            } else {
                Err(Error::Shape {
                    op: what,
                    expected: rows * cols,
                    got: m.rows() * m.cols(),
                })
            }
        };
        expect(&entity, entity.rows(), d, "entity table")?;
        expect(&relation, rels, d, "relation table")?;
        expect(&projection, rels, d * d, "projection stack")?;
        let mut layers = Vec::new();
        for l in 1..=config.depth() {
            let (din, dout) = (config.layer_width(l - 1), config.layer_width(l));
            let (w1, w2, w_agg) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
            expect(&w1, din, 2 * din + d, "layer w1")?;
            expect(&w2, 1, din, "layer w2")?;
            expect(&w_agg, dout, 2 * din, "layer w_agg")?;
            layers.push(LayerParams { w1, w2, w_agg });
        }
        Ok(Self {
            embed: TransRParameters {
                entity,
                relation,
                projection,
            },
            layers,
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.blocks()
            .iter()
            .flat_map(|(_, m)| m.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let mut off = 0;
        for m in self.blocks_mut() {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }

    pub fn fill_zero(&mut self) {
        for m in self.blocks_mut() {
            m.fill_zero();
        }
    }

    pub fn adam(&self) -> Adam<T> {
        let lens: Vec<usize> = self.blocks().iter().map(|(_, m)| m.as_slice().len()).collect();
        Adam::new(&lens)
    }

    /// Adam step over every block.
    pub fn adam_step(&mut self, adam: &mut Adam<T>, grads: &Self, lr: f64) -> Result<()> {
        let names: Vec<String> = grads.blocks().into_iter().map(|(n, _)| n).collect();
        let gblocks: Vec<&Matrix<T>> = grads.blocks().into_iter().map(|(_, m)| m).collect();
        let mut blocks: Vec<Block<'_, T>> = self
            .blocks_mut()
            .into_iter()
            .zip(&gblocks)
            .zip(&names)
            .map(|((p, g), name)| Block {
                name,
                param: p.as_mut_slice(),
                grad: g.as_slice(),
            })
            .collect();
        adam.step(lr, &mut blocks)
    }
}

/// Read-only structures a forward pass needs.
#[derive(Clone, Copy)]
pub struct ModelInputs<'a> {
    pub graph: &'a CollaborativeKG,
    pub aux: &'a AuxiliaryMap,
    pub layout: &'a EntityLayout,
    pub config: &'a ModelConfig,
}

/// Representations of every layer plus what backward needs.
pub struct Forward<T> {
    /// Layer 0 (fused base) through layer L.
    pub reps: Vec<Matrix<T>>,
    pub caches: Vec<LayerCache<T>>,
    /// Concatenated e*, one row per entity.
    pub star: Matrix<T>,
}

pub fn forward<T: Real>(
    params: &ModelParameters<T>,
    inputs: ModelInputs<'_>,
    hood: &Neighborhoods,
    dropout: Option<&Dropout>,
) -> Result<Forward<T>> {
    let cfg = inputs.config;
    let slope = T::of(cfg.leaky_slope);
    let mut reps = Vec::with_capacity(params.layers.len() + 1);
    reps.push(fused_base(&params.embed.entity, inputs.aux, cfg.fusion));
    let mut caches = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let (out, cache) = propagate_layer(
            layer,
            &params.embed.relation,
            &reps[l],
            inputs.graph,
            hood,
            cfg.attention,
            slope,
            dropout.map(|d| (d, l + 1)),
        )?;
        reps.push(out);
        caches.push(cache);
    }
    let star = concat_layers(&reps)?;
    Ok(Forward { reps, caches, star })
}

/// Backpropagates `d_star` (gradient w.r.t. e*) into `grads`.
pub fn backward<T: Real>(
    params: &ModelParameters<T>,
    inputs: ModelInputs<'_>,
    hood: &Neighborhoods,
    fwd: &Forward<T>,
    d_star: &Matrix<T>,
    grads: &mut ModelParameters<T>,
) {
    let cfg = inputs.config;
    let slope = T::of(cfg.leaky_slope);
    let widths: Vec<usize> = fwd.reps.iter().map(Matrix::cols).collect();
    let mut d_reps = split_concat_grad(d_star, &widths);
    for l in (0..params.layers.len()).rev() {
        let d_out = core::mem::replace(&mut d_reps[l + 1], Matrix::zeros(0, 0));
        let d_in = propagate_layer_backward(
            &params.layers[l],
            &params.embed.relation,
            &fwd.reps[l],
            inputs.graph,
            hood,
            &fwd.caches[l],
            cfg.attention,
            slope,
            &d_out,
            &mut grads.layers[l],
            &mut grads.embed.relation,
        );
        axpy(T::one(), d_in.as_slice(), d_reps[l].as_mut_slice());
    }
    fused_base_backward(
        &params.embed.entity,
        inputs.aux,
        cfg.fusion,
        &d_reps[0],
        &mut grads.embed.entity,
    );
}

/// ŷ(u, i) = e*_uᵀ e*_i.
pub fn predict_score<T: Real>(user_star: &[T], item_star: &[T]) -> Result<T> {
    crate::kernel::dot(user_star, item_star)
}

/// −ln σ(ŷ_pos − ŷ_neg) + λ‖Θ‖².
pub fn bpr_pair_loss<T: Real>(pos: T, neg: T, l2: T, param_sq_norm: T) -> T {
    neg_log_sigmoid(pos - neg) + l2 * param_sq_norm
}

/// A (user, positive item, negative item) training triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BprSample {
    pub user: UserId,
    pub pos: ItemId,
    pub neg: ItemId,
}

/// Squared norm of the regularized parameters for a batch: base embedding
/// rows of the distinct users and items involved plus all layer matrices.
fn batch_entities(layout: &EntityLayout, batch: &[BprSample]) -> Vec<EntityId> {
    let mut ents: Vec<EntityId> = batch
        .iter()
        .flat_map(|s| {
            [
                layout.user_entity(s.user),
                layout.item_entity(s.pos),
                layout.item_entity(s.neg),
            ]
        })
        .collect();
    ents.sort_unstable();
    ents.dedup();
    ents
}

/// Mean BPR loss over the batch from precomputed e*, plus λ‖Θ_batch‖².
/// With `grads`, the regularizer gradient goes into `grads` and the ranking
/// gradient into `d_star`.
pub fn bpr_batch_loss<T: Real>(
    params: &ModelParameters<T>,
    layout: &EntityLayout,
    l2: f64,
    star: &Matrix<T>,
    batch: &[BprSample],
    mut grad_out: Option<(&mut Matrix<T>, &mut ModelParameters<T>)>,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("bpr_batch_loss"));
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let mut rank_loss = T::zero();
    for s in batch {
        let (u, i, j) = (
            layout.user_entity(s.user).index(),
            layout.item_entity(s.pos).index(),
            layout.item_entity(s.neg).index(),
        );
        let diff = dot_unchecked(star.row(u), star.row(i)) - dot_unchecked(star.row(u), star.row(j));
        rank_loss += neg_log_sigmoid(diff);
        if let Some((d_star, _)) = grad_out.as_mut() {
            let c = -sigmoid(-diff) * scale;
            let eu: Vec<T> = star.row(u).to_vec();
            let ei: Vec<T> = star.row(i).to_vec();
            let ej: Vec<T> = star.row(j).to_vec();
            axpy(c, &ei, d_star.row_mut(u));
            axpy(-c, &ej, d_star.row_mut(u));
            axpy(c, &eu, d_star.row_mut(i));
            axpy(-c, &eu, d_star.row_mut(j));
        }
    }
    let lam = T::of(l2);
    let mut reg = T::zero();
    let ents = batch_entities(layout, batch);
    for &e in &ents {
        reg += params.embed.entity.row(e.index()).iter().map(|&x| x * x).sum::<T>();
    }
    for layer in &params.layers {
        reg += layer.sq_norm();
    }
    if let Some((_, grads)) = grad_out.as_mut() {
        if lam != T::zero() {
            let two_lam = T::of(2.0) * lam;
            for &e in &ents {
                let row: Vec<T> = params.embed.entity.row(e.index()).to_vec();
                axpy(two_lam, &row, grads.embed.entity.row_mut(e.index()));
            }
            for (g, p) in grads.layers.iter_mut().zip(&params.layers) {
                axpy(two_lam, p.w1.as_slice(), g.w1.as_mut_slice());
                axpy(two_lam, p.w2.as_slice(), g.w2.as_mut_slice());
                axpy(two_lam, p.w_agg.as_slice(), g.w_agg.as_mut_slice());
            }
        }
    }
    Ok(rank_loss * scale + lam * reg)
}

/// Forward, BPR loss and (optionally) full backward for one batch.
pub fn bpr_step_loss<T: Real>(
    params: &ModelParameters<T>,
    inputs: ModelInputs<'_>,
    hood: &Neighborhoods,
    dropout: Option<&Dropout>,
    batch: &[BprSample],
    grads: Option<&mut ModelParameters<T>>,
) -> Result<T> {
    let fwd = forward(params, inputs, hood, dropout)?;
    match grads {
        None => bpr_batch_loss(params, inputs.layout, inputs.config.l2, &fwd.star, batch, None),
        Some(grads) => {
            let mut d_star = Matrix::zeros_like(&fwd.star);
            let loss = bpr_batch_loss(
                params,
                inputs.layout,
                inputs.config.l2,
                &fwd.star,
                batch,
                Some((&mut d_star, grads)),
            )?;
            backward(params, inputs, hood, &fwd, &d_star, grads);
            Ok(loss)
        }
    }
}
