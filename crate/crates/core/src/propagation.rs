//! Attentive embedding propagation over the collaborative graph.
//!
//! For a layer with input widths d_in (entities) and d (relations):
//!
//! ```text
//! z(h,r,t)  = W1 (x_h ∥ e_r ∥ x_t)                    triple embedding, length d_in
//! s(h,r,t)  = LeakyReLU(W2 · z)                       attention logit
//! π(h,r,t)  = softmax over the sampled N_h of s       (1/|N_h| in uniform mode)
//! a_h       = Σ π z                                   zero when N_h is empty
//! x'_h      = LeakyReLU(W_agg (x_h ∥ mask_h · a_h))   mask_h is message dropout
//! ```
//!
//! `W1` is applied as three column blocks so every entity and relation is
//! projected once per layer instead of once per triple.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::AttentionMode;
use crate::error::{Error, Result};
use crate::graph::{CollaborativeKG, EntityId};
use crate::kernel::{affine, axpy, dot_unchecked, leaky, leaky_grad, softmax_in_place, xavier_init, Matrix};
use crate::real::Real;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// d_in × (2·d_in + d): blocks act on head, relation, tail.
    pub w1: Matrix<T>,
    /// 1 × d_in.
    pub w2: Matrix<T>,
    /// d_out × 2·d_in: acts on (self ∥ aggregate).
    pub w_agg: Matrix<T>,
}

impl<T: Real> LayerParams<T> {
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rel_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            w1: xavier_init(d_in, 2 * d_in + rel_dim, rng)?,
            w2: xavier_init(1, d_in, rng)?,
            w_agg: xavier_init(d_out, 2 * d_in, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Matrix::zeros_like(&self.w1),
            w2: Matrix::zeros_like(&self.w2),
            w_agg: Matrix::zeros_like(&self.w_agg),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w_agg.rows()
    }

    pub fn rel_dim(&self) -> usize {
        self.w1.cols() - 2 * self.d_in()
    }

    pub fn sq_norm(&self) -> T {
        self.w1.sq_norm() + self.w2.sq_norm() + self.w_agg.sq_norm()
    }
}

/// `y = W[:, off..off+len(x)] x`.
fn block_matvec<T: Real>(w: &Matrix<T>, off: usize, x: &[T], y: &mut [T]) {
    for (r, out) in y.iter_mut().enumerate() {
        *out = dot_unchecked(&w.row(r)[off..off + x.len()], x);
    }
}

/// `y += W[:, off..off+len(y)]ᵀ g`.
fn block_matvec_t_acc<T: Real>(w: &Matrix<T>, off: usize, g: &[T], y: &mut [T]) {
    let n = y.len();
    for (r, &gr) in g.iter().enumerate() {
        if gr != T::zero() {
            axpy(gr, &w.row(r)[off..off + n], y);
        }
    }
}

/// `W[:, off..off+len(x)] += g xᵀ`.
fn block_outer_acc<T: Real>(w: &mut Matrix<T>, off: usize, g: &[T], x: &[T]) {
    for (r, &gr) in g.iter().enumerate() {
        if gr != T::zero() {
            axpy(gr, x, &mut w.row_mut(r)[off..off + x.len()]);
        }
    }
}

/// `e(h,r,t) = W1 (e_h ∥ e_r ∥ e_t)`.
pub fn triple_embedding<T: Real>(layer: &LayerParams<T>, e_h: &[T], e_r: &[T], e_t: &[T]) -> Result<Vec<T>> {
    let mut cat = Vec::with_capacity(e_h.len() + e_r.len() + e_t.len());
    cat.extend_from_slice(e_h);
    cat.extend_from_slice(e_r);
    cat.extend_from_slice(e_t);
    affine(&layer.w1, &cat)
}

/// Attention over one neighborhood: raw logits and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord<T> {
    pub logits: Vec<T>,
    pub weights: Vec<T>,
}

/// Rows of `embeddings` are the triple embeddings of one neighborhood.
pub fn attention_weights<T: Real>(
    layer: &LayerParams<T>,
    embeddings: &Matrix<T>,
    mode: AttentionMode,
    slope: T,
) -> Result<AttentionRecord<T>> {
    let n = embeddings.rows();
    if n == 0 {
        return Err(Error::Empty("attention_weights"));
    }
    if embeddings.cols() != layer.w2.cols() {
        return Err(Error::Shape {
            op: "attention_weights",
            expected: layer.w2.cols(),
            got: embeddings.cols(),
        });
    }
    let logits: Vec<T> = (0..n)
        .map(|k| leaky(dot_unchecked(layer.w2.row(0), embeddings.row(k)), slope))
        .collect();
    let weights = match mode {
        AttentionMode::Learned => {
            let mut w = logits.clone();
            softmax_in_place(&mut w)?;
            w
        }
        AttentionMode::Uniform => vec![T::one() / T::of(n as f64); n],
    };
    Ok(AttentionRecord { logits, weights })
}

/// `Σ π_k z_k`; a zero vector of length `width` for an empty neighborhood.
pub fn aggregate_neighborhood<T: Real>(weights: &[T], embeddings: &Matrix<T>, width: usize) -> Result<Vec<T>> {
    if weights.len() != embeddings.rows() {
        return Err(Error::Shape {
            op: "aggregate_neighborhood",
            expected: embeddings.rows(),
            got: weights.len(),
        });
    }
    let mut out = vec![T::zero(); width];
    for (k, &p) in weights.iter().enumerate() {
        axpy(p, embeddings.row(k), &mut out);
    }
    Ok(out)
}

/// Sampled neighborhoods for every entity, as CSR over graph triple indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    triples: Vec<usize>,
}

impl Neighborhoods {
    /// Every entity keeps its full neighborhood.
    pub fn full(g: &CollaborativeKG) -> Self {
        Self::sample(g, usize::MAX, 0, Stream::Neighbors, &[])
    }

    /// Caps each N_h at `cap`, with an independent stream per entity keyed by
    /// `(seed, purpose, counters..., h)`.
    pub fn sample(g: &CollaborativeKG, cap: usize, seed: u64, purpose: Stream, counters: &[u64]) -> Self {
        let n = g.entity_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut triples = Vec::new();
        offsets.push(0);
        let mut key: Vec<u64> = counters.to_vec();
        key.push(0);
        for h in 0..n {
            let id = EntityId(h as u32);
            if g.degree(id) <= cap {
                triples.extend(g.neighbor_range(id));
            } else {
                *key.last_mut().unwrap() = h as u64;
                let mut r = rng::stream(seed, purpose, &key);
                triples.extend(g.sample_neighbor_indices(id, cap, &mut r));
            }
            offsets.push(triples.len());
        }
        Self { offsets, triples }
    }

    #[inline]
    pub fn range(&self, h: usize) -> core::ops::Range<usize> {
        self.offsets[h]..self.offsets[h + 1]
    }

    /// Graph triple indices sampled for `h`.
    pub fn of(&self, h: usize) -> &[usize] {
        &self.triples[self.range(h)]
    }

    pub fn total(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Message dropout keyed by run seed and position, so masks do not depend on
/// evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub p: f64,
    pub seed: u64,
    pub epoch: u64,
    pub batch: u64,
}

impl Dropout {
    /// Scale applied to entity `h`'s aggregate in layer `l`: 0 or 1/(1−p).
    pub fn mask<T: Real>(&self, l: usize, h: usize) -> T {
        if self.p <= 0.0 {
            return T::one();
        }
        let u = rng::unit(self.seed, Stream::Dropout, &[self.epoch, self.batch, l as u64, h as u64]);
        if u < self.p {
            T::zero()
        } else {
            T::of(1.0 / (1.0 - self.p))
        }
    }
}

/// Intermediate values of one layer kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    /// Triple embeddings, one row per sampled triple in `Neighborhoods` order.
    pub z: Matrix<T>,
    /// W2 · z before LeakyReLU.
    pub score: Vec<T>,
    pub pi: Vec<T>,
    /// Aggregates before dropout.
    pub agg: Matrix<T>,
    pub mask: Vec<T>,
    /// W_agg (x ∥ mask·agg) before LeakyReLU.
    pub pre: Matrix<T>,
}

impl<T: Real> LayerCache<T> {
    /// Attention weights of `h`'s sampled neighborhood.
    pub fn attention<'a>(&'a self, hood: &Neighborhoods, h: usize) -> &'a [T] {
        &self.pi[hood.range(h)]
    }
}

#[allow(clippy::too_many_arguments)]
pub fn propagate_layer<T: Real>(
    layer: &LayerParams<T>,
    relation: &Matrix<T>,
    input: &Matrix<T>,
    g: &CollaborativeKG,
    hood: &Neighborhoods,
    mode: AttentionMode,
    slope: T,
    dropout: Option<(&Dropout, usize)>,
) -> Result<(Matrix<T>, LayerCache<T>)> {
    let n = input.rows();
    let d_in = layer.d_in();
    let d_rel = layer.rel_dim();
    let d_out = layer.d_out();
    if input.cols() != d_in || relation.cols() != d_rel || n != hood.entity_count() {
        return Err(Error::Shape {
            op: "propagate_layer",
            expected: d_in,
            got: input.cols(),
        });
    }
    let mut ph = Matrix::zeros(n, d_in);
    let mut pt = Matrix::zeros(n, d_in);
    for h in 0..n {
        block_matvec(&layer.w1, 0, input.row(h), ph.row_mut(h));
        block_matvec(&layer.w1, d_in + d_rel, input.row(h), pt.row_mut(h));
    }
    let mut pr = Matrix::zeros(relation.rows(), d_in);
    for r in 0..relation.rows() {
        block_matvec(&layer.w1, d_in, relation.row(r), pr.row_mut(r));
    }

    let s_total = hood.total();
    let mut z = Matrix::zeros(s_total, d_in);
    let mut score = vec![T::zero(); s_total];
    let mut pi = vec![T::zero(); s_total];
    let mut agg = Matrix::zeros(n, d_in);
    let mut mask = vec![T::one(); n];
    let mut pre = Matrix::zeros(n, d_out);
    let mut out = Matrix::zeros(n, d_out);
    let mut cat = vec![T::zero(); 2 * d_in];
    let w2 = layer.w2.row(0);

    for h in 0..n {
        let range = hood.range(h);
        for k in range.clone() {
            let t = g.triple(hood.triples[k]);
            let zk = z.row_mut(k);
            for (((o, &a), &b), &c) in zk.iter_mut().zip(ph.row(h)).zip(pr.row(t.relation.index())).zip(pt.row(t.tail.index())) {
                *o = a + b + c;
            }
            score[k] = dot_unchecked(w2, z.row(k));
        }
        if !range.is_empty() {
            let p = &mut pi[range.clone()];
            match mode {
                AttentionMode::Learned => {
                    for (pk, &sk) in p.iter_mut().zip(&score[range.clone()]) {
                        *pk = leaky(sk, slope);
                    }
                    softmax_in_place(p)?;
                }
                AttentionMode::Uniform => {
                    let w = T::one() / T::of(range.len() as f64);
                    p.iter_mut().for_each(|x| *x = w);
                }
            }
            let a = agg.row_mut(h);
            for k in range.clone() {
                axpy(pi[k], z.row(k), a);
            }
        }
        if let Some((drop, l)) = dropout {
            mask[h] = drop.mask(l, h);
        }
        cat[..d_in].copy_from_slice(input.row(h));
        for (c, &a) in cat[d_in..].iter_mut().zip(agg.row(h)) {
            *c = mask[h] * a;
        }
        layer.w_agg.matvec(&cat, pre.row_mut(h));
        for (o, &p) in out.row_mut(h).iter_mut().zip(pre.row(h)) {
            *o = leaky(p, slope);
        }
    }
    Ok((
        out,
        LayerCache {
            z,
            score,
            pi,
            agg,
            mask,
            pre,
        },
    ))
}

/// Backward pass of [`propagate_layer`]. Adds parameter gradients into
/// `grads` and `d_relation` and returns the gradient w.r.t. `input`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_layer_backward<T: Real>(
    layer: &LayerParams<T>,
    relation: &Matrix<T>,
    input: &Matrix<T>,
    g: &CollaborativeKG,
    hood: &Neighborhoods,
    cache: &LayerCache<T>,
    mode: AttentionMode,
    slope: T,
    d_out: &Matrix<T>,
    grads: &mut LayerParams<T>,
    d_relation: &mut Matrix<T>,
) -> Matrix<T> {
    let n = input.rows();
    let d_in = layer.d_in();
    let d_rel = layer.rel_dim();
    let mut d_input = Matrix::zeros(n, d_in);
    let mut d_head = Matrix::zeros(n, d_in);
    let mut d_tail = Matrix::zeros(n, d_in);
    let mut d_rel_proj = Matrix::zeros(relation.rows(), d_in);
    let mut dpre = vec![T::zero(); layer.d_out()];
    let mut cat = vec![T::zero(); 2 * d_in];
    let mut dcat = vec![T::zero(); 2 * d_in];
    let mut dagg = vec![T::zero(); d_in];
    let mut dz = vec![T::zero(); d_in];
    let mut dpi: Vec<T> = Vec::new();
    let w2 = layer.w2.row(0);

    for h in 0..n {
        let mut any = false;
        for ((dp, &go), &p) in dpre.iter_mut().zip(d_out.row(h)).zip(cache.pre.row(h)) {
            *dp = go * leaky_grad(p, slope);
            any |= *dp != T::zero();
        }
        if !any {
            continue;
        }
        cat[..d_in].copy_from_slice(input.row(h));
        for (c, &a) in cat[d_in..].iter_mut().zip(cache.agg.row(h)) {
            *c = cache.mask[h] * a;
        }
        grads.w_agg.outer_acc(&dpre, &cat);
        dcat.iter_mut().for_each(|x| *x = T::zero());
        layer.w_agg.matvec_t_acc(&dpre, &mut dcat);
        axpy(T::one(), &dcat[..d_in], d_input.row_mut(h));

        let range = hood.range(h);
        if range.is_empty() || cache.mask[h] == T::zero() {
            continue;
        }
        for (da, &dm) in dagg.iter_mut().zip(&dcat[d_in..]) {
            *da = cache.mask[h] * dm;
        }
        let pi = &cache.pi[range.clone()];
        let learned = mode == AttentionMode::Learned;
        if learned {
            dpi.clear();
            dpi.extend(range.clone().map(|k| dot_unchecked(&dagg, cache.z.row(k))));
        }
        let inner = if learned { dot_unchecked(pi, &dpi) } else { T::zero() };
        for (j, k) in range.clone().enumerate() {
            for (d, &a) in dz.iter_mut().zip(&dagg) {
                *d = pi[j] * a;
            }
            if learned {
                let dlogit = pi[j] * (dpi[j] - inner);
                let dscore = dlogit * leaky_grad(cache.score[k], slope);
                if dscore != T::zero() {
                    axpy(dscore, cache.z.row(k), grads.w2.row_mut(0));
                    axpy(dscore, w2, &mut dz);
                }
            }
            let t = g.triple(hood.triples[k]);
            axpy(T::one(), &dz, d_head.row_mut(h));
            axpy(T::one(), &dz, d_tail.row_mut(t.tail.index()));
            axpy(T::one(), &dz, d_rel_proj.row_mut(t.relation.index()));
        }
    }

    for e in 0..n {
        let dh = d_head.row(e);
        if dh.iter().any(|&x| x != T::zero()) {
            block_outer_acc(&mut grads.w1, 0, dh, input.row(e));
            block_matvec_t_acc(&layer.w1, 0, dh, d_input.row_mut(e));
        }
        let dt = d_tail.row(e);
        if dt.iter().any(|&x| x != T::zero()) {
            block_outer_acc(&mut grads.w1, d_in + d_rel, dt, input.row(e));
            block_matvec_t_acc(&layer.w1, d_in + d_rel, dt, d_input.row_mut(e));
        }
    }
    for r in 0..relation.rows() {
        let dr = d_rel_proj.row(r);
        if dr.iter().any(|&x| x != T::zero()) {
            block_outer_acc(&mut grads.w1, d_in, dr, relation.row(r));
            block_matvec_t_acc(&layer.w1, d_in, dr, d_relation.row_mut(r));
        }
    }
    d_input
}

/// `e* = e⁽⁰⁾ ∥ … ∥ e⁽ᴸ⁾` for every entity.
pub fn concat_layers<T: Real>(reps: &[Matrix<T>]) -> Result<Matrix<T>> {
    let first = reps.first().ok_or(Error::Empty("concat_layers"))?;
    let n = first.rows();
    if let Some(bad) = reps.iter().find(|m| m.rows() != n) {
        return Err(Error::Shape {
            op: "concat_layers",
            expected: n,
            got: bad.rows(),
        });
    }
    let width: usize = reps.iter().map(Matrix::cols).sum();
    let mut out = Matrix::zeros(n, width);
    for h in 0..n {
        let row = out.row_mut(h);
        let mut off = 0;
        for m in reps {
            row[off..off + m.cols()].copy_from_slice(m.row(h));
            off += m.cols();
        }
    }
    Ok(out)
}

/// Splits a gradient w.r.t. e* into per-layer gradients.
pub fn split_concat_grad<T: Real>(d_star: &Matrix<T>, widths: &[usize]) -> Vec<Matrix<T>> {
    let n = d_star.rows();
    let mut out: Vec<Matrix<T>> = widths.iter().map(|&w| Matrix::zeros(n, w)).collect();
    for h in 0..n {
        let row = d_star.row(h);
        let mut off = 0;
        for m in out.iter_mut() {
            let w = m.cols();
            m.row_mut(h).copy_from_slice(&row[off..off + w]);
            off += w;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_embedding_hand_cases() {
        let layer = LayerParams {
            w1: Matrix::from_vec(1, 3, vec![1.0f64, 1.0, 1.0]).unwrap(),
            w2: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            w_agg: Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
        };
        assert_eq!(triple_embedding(&layer, &[2.0], &[3.0], &[4.0]).unwrap(), vec![9.0]);
        let zero = LayerParams {
            w1: Matrix::<f64>::zeros(2, 6),
            ..layer.clone()
        };
        assert_eq!(triple_embedding(&zero, &[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]).unwrap(), vec![0.0, 0.0]);
    }

    fn unit_layer(d_in: usize) -> LayerParams<f64> {
        LayerParams {
            w1: Matrix::zeros(d_in, 3 * d_in),
            w2: Matrix::from_vec(1, d_in, vec![1.0; d_in]).unwrap(),
            w_agg: Matrix::zeros(d_in, 2 * d_in),
        }
    }

    #[test]
    fn attention_hand_cases() {
        let layer = unit_layer(1);
        let eq = Matrix::from_vec(4, 1, vec![0.7f64; 4]).unwrap();
        let a = attention_weights(&layer, &eq, AttentionMode::Learned, 0.2).unwrap();
        assert!(a.weights.iter().all(|&w| (w - 0.25).abs() < 1e-15));

        let l = Matrix::from_vec(2, 1, vec![1.0f64.ln(), 3.0f64.ln()]).unwrap();
        let a = attention_weights(&layer, &l, AttentionMode::Learned, 0.2).unwrap();
        assert!((a.weights[0] - 0.25).abs() < 1e-15 && (a.weights[1] - 0.75).abs() < 1e-15);

        let five = Matrix::from_vec(5, 1, vec![-3.0f64, 0.1, 9.0, 2.0, -0.5]).unwrap();
        let a = attention_weights(&layer, &five, AttentionMode::Uniform, 0.2).unwrap();
        assert!(a.weights.iter().all(|&w| w == 0.2));

        assert!(attention_weights(&layer, &Matrix::<f64>::zeros(0, 1), AttentionMode::Learned, 0.2).is_err());
    }

    #[test]
    fn aggregate_hand_cases() {
        let e = Matrix::from_vec(2, 1, vec![2.0f64, 4.0]).unwrap();
        assert_eq!(aggregate_neighborhood(&[0.25, 0.75], &e, 1).unwrap(), vec![3.5]);
        let single = Matrix::from_vec(1, 2, vec![1.5f64, -2.0]).unwrap();
        assert_eq!(aggregate_neighborhood(&[1.0], &single, 2).unwrap(), vec![1.5, -2.0]);
        assert_eq!(aggregate_neighborhood::<f64>(&[], &Matrix::zeros(0, 3), 3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn concat_shapes() {
        let reps = vec![Matrix::<f64>::zeros(3, 4), Matrix::zeros(3, 4), Matrix::zeros(3, 4)];
        assert_eq!(concat_layers(&reps).unwrap().cols(), 12);
        let base = Matrix::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(concat_layers(core::slice::from_ref(&base)).unwrap(), base);
        assert!(concat_layers::<f64>(&[]).is_err());
    }

    #[test]
    fn concat_is_row_equivariant() {
        let a = Matrix::from_vec(3, 2, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 1, vec![7.0f64, 8.0, 9.0]).unwrap();
        let perm = [2usize, 0, 1];
        let permute = |m: &Matrix<f64>| {
            let mut data = Vec::new();
            for &p in &perm {
                data.extend_from_slice(m.row(p));
            }
            Matrix::from_vec(m.rows(), m.cols(), data).unwrap()
        };
        let star = concat_layers(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(concat_layers(&[permute(&a), permute(&b)]).unwrap(), permute(&star));
    }

    #[test]
    fn split_inverts_concat() {
        let a = Matrix::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![5.0f64, 6.0]).unwrap();
        let star = concat_layers(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(split_concat_grad(&star, &[2, 1]), vec![a, b]);
    }
}
