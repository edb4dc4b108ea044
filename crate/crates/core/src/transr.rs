//! TransR plausibility scores and the pairwise KG ranking loss.
//!
//! g(h, r, t) = ‖W_r e_h + e_r − W_r e_t‖²; lower is more plausible.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::adam::{Adam, Block};
use crate::error::{Error, Result};
use crate::graph::{CollaborativeKG, EntityId, RelationId, Triple};
use crate::kernel::{axpy, xavier_init, Matrix};
use crate::real::{neg_log_sigmoid, sigmoid, Real};

/// Entity table, relation table and per-relation projections (row r of
/// `projection` is W_r stored row-major as d × d).
#[derive(Debug, Clone, PartialEq)]
pub struct TransRParameters<T> {
    pub entity: Matrix<T>,
    pub relation: Matrix<T>,
    pub projection: Matrix<T>,
}

/// A valid triple and its corrupted tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KgQuad {
    pub triple: Triple,
    pub corrupt_tail: EntityId,
}

impl<T: Real> TransRParameters<T> {
    /// Xavier tables; W_r = I + 0.1·Xavier(d × d).
    pub fn init<R: Rng + ?Sized>(entities: usize, relations: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let entity = xavier_init(entities, dim, rng)?;
        let relation = xavier_init(relations, dim, rng)?;
        let mut projection = Matrix::zeros(relations, dim * dim);
        for r in 0..relations {
            let noise: Matrix<T> = xavier_init(dim, dim, rng)?;
            let row = projection.row_mut(r);
            for (k, (w, &n)) in row.iter_mut().zip(noise.as_slice()).enumerate() {
                let eye = if k / dim == k % dim { T::one() } else { T::zero() };
                *w = eye + T::of(0.1) * n;
            }
        }
        Ok(Self {
            entity,
            relation,
            projection,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entity: Matrix::zeros_like(&self.entity),
            relation: Matrix::zeros_like(&self.relation),
            projection: Matrix::zeros_like(&self.projection),
        }
    }

    pub fn dim(&self) -> usize {
        self.entity.cols()
    }

    /// `v = W_r (e_h − e_t) + e_r`.
    fn residual(&self, h: EntityId, r: RelationId, t: EntityId) -> (Vec<T>, Vec<T>) {
        let d = self.dim();
        let diff: Vec<T> = self
            .entity
            .row(h.index())
            .iter()
            .zip(self.entity.row(t.index()))
            .map(|(&a, &b)| a - b)
            .collect();
        let w = self.projection.row(r.index());
        let er = self.relation.row(r.index());
        let v = (0..d)
            .map(|i| {
                let mut s = er[i];
                for (&wij, &dj) in w[i * d..(i + 1) * d].iter().zip(&diff) {
                    s += wij * dj;
                }
                s
            })
            .collect();
        (v, diff)
    }

    pub fn score(&self, h: EntityId, r: RelationId, t: EntityId) -> T {
        let (v, _) = self.residual(h, r, t);
        v.iter().map(|&x| x * x).sum()
    }

    /// Adds `upstream · ∂g/∂θ` into `grads`.
    pub fn score_backward(&self, h: EntityId, r: RelationId, t: EntityId, upstream: T, grads: &mut Self) {
        let d = self.dim();
        let (v, diff) = self.residual(h, r, t);
        let two = T::of(2.0);
        let gv: Vec<T> = v.iter().map(|&x| two * upstream * x).collect();
        axpy(T::one(), &gv, grads.relation.row_mut(r.index()));
        let dw = grads.projection.row_mut(r.index());
        for i in 0..d {
            axpy(gv[i], &diff, &mut dw[i * d..(i + 1) * d]);
        }
        // Wᵀ gv
        let w = self.projection.row(r.index());
        let mut back = vec![T::zero(); d];
        for i in 0..d {
            axpy(gv[i], &w[i * d..(i + 1) * d], &mut back);
        }
        axpy(T::one(), &back, grads.entity.row_mut(h.index()));
        axpy(-T::one(), &back, grads.entity.row_mut(t.index()));
    }
}

pub fn transr_score<T: Real>(p: &TransRParameters<T>, t: Triple) -> T {
    p.score(t.head, t.relation, t.tail)
}

/// Mean over the batch of −ln σ(g(h,r,t′) − g(h,r,t) − margin). With
/// `grads`, the gradient of that mean is added into it.
pub fn kg_pair_loss<T: Real>(
    p: &TransRParameters<T>,
    batch: &[KgQuad],
    margin: T,
    mut grads: Option<&mut TransRParameters<T>>,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("kg_pair_loss"));
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let mut total = T::zero();
    for q in batch {
        let Triple { head, relation, tail } = q.triple;
        let valid = p.score(head, relation, tail);
        let corrupt = p.score(head, relation, q.corrupt_tail);
        let x = corrupt - valid - margin;
        total += neg_log_sigmoid(x);
        if let Some(g) = grads.as_deref_mut() {
            // d/dx [−ln σ(x)] = −σ(−x)
            let dx = -sigmoid(-x) * scale;
            p.score_backward(head, relation, q.corrupt_tail, dx, g);
            p.score_backward(head, relation, tail, -dx, g);
        }
    }
    Ok(total * scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgEpochStats {
    pub mean_loss: f64,
    pub quads: usize,
    pub batches: usize,
}

pub fn kg_adam<T: Real>(p: &TransRParameters<T>) -> Adam<T> {
    Adam::new(&[
        p.entity.as_slice().len(),
        p.relation.as_slice().len(),
        p.projection.as_slice().len(),
    ])
}

/// One pass over every graph triple in shuffled order, corrupting each tail
/// and taking an Adam step per batch. `epoch` is used for error context only.
pub fn kg_epoch<T: Real, R: Rng + ?Sized>(
    p: &mut TransRParameters<T>,
    adam: &mut Adam<T>,
    g: &CollaborativeKG,
    batch_size: usize,
    lr: f64,
    margin: f64,
    epoch: usize,
    rng: &mut R,
) -> Result<KgEpochStats> {
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be ≥ 1"));
    }
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.shuffle(rng);
    let mut grads = p.zeros_like();
    let mut loss_sum = 0.0;
    let mut batches = 0;
    let mut quads = 0;
    let mut batch = Vec::with_capacity(batch_size);
    for (b, chunk) in order.chunks(batch_size).enumerate() {
        batch.clear();
        for &i in chunk {
            let t = g.triple(i);
            let c = g.sample_kg_negative(t, rng)?;
            batch.push(KgQuad {
                triple: t,
                corrupt_tail: c.tail,
            });
        }
        grads.entity.fill_zero();
        grads.relation.fill_zero();
        grads.projection.fill_zero();
        let loss = kg_pair_loss(p, &batch, T::of(margin), Some(&mut grads))?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                phase: "kg",
                batch: b,
            });
        }
        adam.step(
            lr,
            &mut [
                Block {
                    name: "entity",
                    param: p.entity.as_mut_slice(),
                    grad: grads.entity.as_slice(),
                },
                Block {
                    name: "relation",
                    param: p.relation.as_mut_slice(),
                    grad: grads.relation.as_slice(),
                },
                Block {
                    name: "projection",
                    param: p.projection.as_mut_slice(),
                    grad: grads.projection.as_slice(),
                },
            ],
        )
        .map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged {
                epoch,
                phase: "kg",
                batch: b,
            },
            other => other,
        })?;
        loss_sum += loss.to_f64();
        batches += 1;
        quads += batch.len();
    }
    Ok(KgEpochStats {
        mean_loss: if batches == 0 { 0.0 } else { loss_sum / batches as f64 },
        quads,
        batches,
    })
}
