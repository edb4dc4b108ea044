//! Collaborative knowledge graph: interactions, KG facts and auxiliary
//! triples in one sorted triple store with a CSR neighbor index.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::config::ModelConfig;
use crate::data::{AuxiliaryMap, EntityLayout, InteractionDataset};
use crate::error::{Error, Result};
use crate::fusion::build_augmented_triples;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(
    /// Index into the global entity table (users, items, KG entities, aux tokens).
    EntityId
);
id_type!(RelationId);
id_type!(UserId);
id_type!(ItemId);

impl RelationId {
    /// User → item edges built from training positives.
    pub const INTERACT: RelationId = RelationId(0);
    /// Entity → auxiliary token edges.
    pub const HAS_AUX: RelationId = RelationId(1);
    /// First relation id handed out to relations read from the KG file.
    pub const FIRST_KG: u32 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

/// Immutable triple store. Triples are sorted by (head, relation, tail), so
/// the neighborhood N_h of an entity is one contiguous run.
#[derive(Debug, Clone, PartialEq)]
pub struct CollaborativeKG {
    triples: Vec<Triple>,
    offsets: Vec<usize>,
    entity_count: usize,
    relation_count: usize,
    forward_relations: usize,
    inverse_relations: bool,
}

impl CollaborativeKG {
    /// Builds a graph from forward triples, adding inverses when requested.
    ///
    /// `forward_relations` counts relation ids usable by forward triples;
    /// inverse of `r` is `r + forward_relations`.
    pub fn from_triples(
        forward: impl IntoIterator<Item = Triple>,
        entity_count: usize,
        forward_relations: usize,
        inverse_relations: bool,
    ) -> Result<Self> {
        let relation_count = if inverse_relations {
            forward_relations * 2
        } else {
            forward_relations
        };
        if entity_count > u32::MAX as usize || relation_count > u32::MAX as usize {
            return Err(Error::Data("entity or relation count exceeds u32 range".into()));
        }
        let mut triples = Vec::new();
        for t in forward {
            if t.head.index() >= entity_count || t.tail.index() >= entity_count {
                return Err(Error::Data(alloc::format!(
                    "triple ({}, {}, {}) references an entity outside 0..{entity_count}",
                    t.head,
                    t.relation,
                    t.tail
                )));
            }
            if t.relation.index() >= forward_relations {
                return Err(Error::Data(alloc::format!(
                    "relation {} outside 0..{forward_relations}",
                    t.relation
                )));
            }
            triples.push(t);
            if inverse_relations {
                triples.push(Triple {
                    head: t.tail,
                    relation: RelationId(t.relation.0 + forward_relations as u32),
                    tail: t.head,
                });
            }
        }
        triples.sort_unstable();
        triples.dedup();
        let mut offsets = alloc::vec![0usize; entity_count + 1];
        for t in &triples {
            offsets[t.head.index() + 1] += 1;
        }
        for i in 0..entity_count {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            triples,
            offsets,
            entity_count,
            relation_count,
            forward_relations,
            inverse_relations,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, index: usize) -> Triple {
        self.triples[index]
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn forward_relations(&self) -> usize {
        self.forward_relations
    }

    pub fn has_inverse_relations(&self) -> bool {
        self.inverse_relations
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.binary_search(t).is_ok()
    }

    /// Range of triple indices whose head is `h`.
    pub fn neighbor_range(&self, h: EntityId) -> core::ops::Range<usize> {
        self.offsets[h.index()]..self.offsets[h.index() + 1]
    }

    /// All triples with head `h` (N_h).
    pub fn neighborhood(&self, h: EntityId) -> &[Triple] {
        &self.triples[self.neighbor_range(h)]
    }

    pub fn degree(&self, h: EntityId) -> usize {
        let r = self.neighbor_range(h);
        r.end - r.start
    }

    /// Indices of at most `cap` triples from N_h, sampled uniformly without
    /// replacement when the neighborhood is larger than `cap`. Returned in
    /// ascending index order.
    pub fn sample_neighbor_indices<R: Rng + ?Sized>(&self, h: EntityId, cap: usize, rng: &mut R) -> Vec<usize> {
        let range = self.neighbor_range(h);
        let deg = range.end - range.start;
        if deg <= cap {
            return range.collect();
        }
        let mut pool: Vec<usize> = range.collect();
        for i in 0..cap {
            let j = rng.gen_range(i..deg);
            pool.swap(i, j);
        }
        pool.truncate(cap);
        pool.sort_unstable();
        pool
    }

    /// Sampled neighborhood as triples.
    pub fn neighbors<R: Rng + ?Sized>(&self, h: EntityId, cap: usize, rng: &mut R) -> Vec<Triple> {
        self.sample_neighbor_indices(h, cap, rng)
            .into_iter()
            .map(|i| self.triples[i])
            .collect()
    }

    /// Replaces the tail with a uniformly drawn entity such that the result is
    /// not in the graph. Gives up after 100 draws.
    pub fn sample_kg_negative<R: Rng + ?Sized>(&self, t: Triple, rng: &mut R) -> Result<Triple> {
        const ATTEMPTS: usize = 100;
        if self.entity_count < 2 {
            return Err(Error::Data("corruption needs at least two entities".into()));
        }
        for _ in 0..ATTEMPTS {
            let tail = EntityId(rng.gen_range(0..self.entity_count as u32));
            let cand = Triple { tail, ..t };
            if !self.contains(&cand) {
                return Ok(cand);
            }
        }
        Err(Error::CorruptionExhausted {
            head: t.head.0,
            relation: t.relation.0,
            tail: t.tail.0,
            attempts: ATTEMPTS,
        })
    }
}

/// Merges KG facts, training interactions and (when fusion is on) auxiliary
/// triples into one collaborative graph.
pub fn build_ckg(
    kg: &[Triple],
    train: &InteractionDataset,
    aux: &AuxiliaryMap,
    layout: &EntityLayout,
    config: &ModelConfig,
) -> Result<CollaborativeKG> {
    let mut forward: Vec<Triple> = kg.to_vec();
    for u in 0..train.user_count() {
        let user = UserId(u as u32);
        let ue = layout.user_entity(user);
        for &i in train.train_pos(user) {
            forward.push(Triple {
                head: ue,
                relation: RelationId::INTERACT,
                tail: layout.item_entity(i),
            });
        }
    }
    if config.fusion {
        forward.extend(build_augmented_triples(aux));
    }
    CollaborativeKG::from_triples(
        forward,
        layout.entity_count(),
        layout.forward_relations(),
        config.inverse_relations,
    )
}
