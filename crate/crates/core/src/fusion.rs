//! Auxiliary-information fusion: each entity's base embedding is multiplied
//! elementwise by the mean embedding of its auxiliary tokens, and every
//! (entity, token) pair becomes a `has_aux` triple in the graph.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::AuxiliaryMap;
use crate::error::{Error, Result};
use crate::graph::{RelationId, Triple};
use crate::kernel::{hadamard, Matrix};
use crate::real::Real;

/// `e ⊙ mean(aux)`, or `e` when `aux` is empty.
pub fn fuse_entity_embedding<T: Real>(e: &[T], aux: &[&[T]]) -> Result<Vec<T>> {
    if aux.is_empty() {
        return Ok(e.to_vec());
    }
    let mean = mean_of(e.len(), aux)?;
    hadamard(e, &mean)
}

fn mean_of<T: Real>(d: usize, rows: &[&[T]]) -> Result<Vec<T>> {
    let mut mean = vec![T::zero(); d];
    for row in rows {
        if row.len() != d {
            return Err(Error::Shape {
                op: "fuse_entity_embedding",
                expected: d,
                got: row.len(),
            });
        }
        for (m, &x) in mean.iter_mut().zip(row.iter()) {
            *m += x;
        }
    }
    let n = T::of(rows.len() as f64);
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Gradients of [`fuse_entity_embedding`] w.r.t. `e` and each aux vector.
pub fn fuse_entity_embedding_backward<T: Real>(e: &[T], aux: &[&[T]], g: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    if aux.is_empty() {
        return Ok((g.to_vec(), Vec::new()));
    }
    let mean = mean_of(e.len(), aux)?;
    let de = hadamard(g, &mean)?;
    let n = T::of(aux.len() as f64);
    let share: Vec<T> = g.iter().zip(e).map(|(&gi, &ei)| gi * ei / n).collect();
    Ok((de, vec![share; aux.len()]))
}

/// Layer-0 table: fused rows for entities with tokens, raw rows otherwise.
pub fn fused_base<T: Real>(entity: &Matrix<T>, aux: &AuxiliaryMap, enabled: bool) -> Matrix<T> {
    let mut out = entity.clone();
    if !enabled {
        return out;
    }
    let d = entity.cols();
    let mut mean = vec![T::zero(); d];
    for (e, tokens) in aux.iter() {
        if tokens.is_empty() {
            continue;
        }
        mean.iter_mut().for_each(|m| *m = T::zero());
        for t in tokens {
            for (m, &x) in mean.iter_mut().zip(entity.row(t.index())) {
                *m += x;
            }
        }
        let n = T::of(tokens.len() as f64);
        let src = entity.row(e.index());
        for ((o, &x), &m) in out.row_mut(e.index()).iter_mut().zip(src).zip(&mean) {
            *o = x * (m / n);
        }
    }
    out
}

/// Adds the entity-table gradient implied by `d_fused` into `d_entity`.
pub fn fused_base_backward<T: Real>(
    entity: &Matrix<T>,
    aux: &AuxiliaryMap,
    enabled: bool,
    d_fused: &Matrix<T>,
    d_entity: &mut Matrix<T>,
) {
    let d = entity.cols();
    let mut plain = vec![true; entity.rows()];
    if enabled {
        let mut mean = vec![T::zero(); d];
        for (e, tokens) in aux.iter() {
            if tokens.is_empty() {
                continue;
            }
            plain[e.index()] = false;
            mean.iter_mut().for_each(|m| *m = T::zero());
            for t in tokens {
                for (m, &x) in mean.iter_mut().zip(entity.row(t.index())) {
                    *m += x;
                }
            }
            let n = T::of(tokens.len() as f64);
            let g = d_fused.row(e.index());
            for ((de, &gi), &m) in d_entity.row_mut(e.index()).iter_mut().zip(g).zip(&mean) {
                *de += gi * (m / n);
            }
            let src: Vec<T> = entity.row(e.index()).to_vec();
            for t in tokens {
                for ((dt, &gi), &ei) in d_entity.row_mut(t.index()).iter_mut().zip(g).zip(&src) {
                    *dt += gi * ei / n;
                }
            }
        }
    }
    for (r, &p) in plain.iter().enumerate() {
        if p {
            for (de, &gi) in d_entity.row_mut(r).iter_mut().zip(d_fused.row(r)) {
                *de += gi;
            }
        }
    }
}

/// One `(entity, has_aux, token)` triple per auxiliary pair.
pub fn build_augmented_triples(aux: &AuxiliaryMap) -> Vec<Triple> {
    aux.iter()
        .flat_map(|(e, tokens)| {
            tokens.iter().map(move |&t| Triple {
                head: e,
                relation: RelationId::HAS_AUX,
                tail: t,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EntityId;

    #[test]
    fn identity_without_tokens() {
        assert_eq!(fuse_entity_embedding(&[1.0f64, 2.0], &[]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn single_and_mean_tokens() {
        let a = [2.0f64, 0.5];
        assert_eq!(fuse_entity_embedding(&[1.0, 2.0], &[&a]).unwrap(), vec![2.0, 1.0]);
        let (x, y) = ([1.0f64, 1.0], [3.0, 3.0]);
        assert_eq!(fuse_entity_embedding(&[1.0, 1.0], &[&x, &y]).unwrap(), vec![2.0, 2.0]);
        assert!(fuse_entity_embedding(&[1.0f64, 1.0], &[&[1.0][..]]).is_err());
    }

    #[test]
    fn all_ones_token_is_identity() {
        let ones = [1.0f64; 3];
        let e = [0.3, -1.7, 2.2];
        assert_eq!(fuse_entity_embedding(&e, &[&ones]).unwrap(), e.to_vec());
    }

    #[test]
    fn augmented_triples() {
        let mut m = AuxiliaryMap::new();
        assert!(build_augmented_triples(&m).is_empty());
        m.insert(EntityId(0), EntityId(9));
        m.insert(EntityId(0), EntityId(8));
        m.insert(EntityId(1), EntityId(9));
        let t = build_augmented_triples(&m);
        assert_eq!(t.len(), 3);
        assert_eq!(t.iter().filter(|t| t.tail == EntityId(9)).count(), 2);
        assert!(t.iter().all(|t| t.relation == RelationId::HAS_AUX));
    }

    #[test]
    fn table_rows_without_tokens_untouched() {
        let e = Matrix::from_vec(3, 2, vec![1.0f64, 2.0, 3.0, 4.0, 0.5, 2.0]).unwrap();
        let mut m = AuxiliaryMap::new();
        m.insert(EntityId(0), EntityId(2));
        let f = fused_base(&e, &m, true);
        assert_eq!(f.row(0), &[0.5, 4.0]);
        assert_eq!(f.row(1), e.row(1));
        assert_eq!(f.row(2), e.row(2));
        assert_eq!(fused_base(&e, &m, false), e);
        assert_eq!(fused_base(&e, &AuxiliaryMap::new(), true), e);
    }
}
