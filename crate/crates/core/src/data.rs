//! Interaction splits, auxiliary maps, and the user/item → entity layout.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, ItemId, RelationId, UserId};
use crate::rng::{stream, Stream};

/// Placement of users and items in the global entity table, plus the number
/// of forward relations (reserved `interact` and `has_aux` included).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityLayout {
    entity_count: usize,
    user_entity: Vec<EntityId>,
    item_entity: Vec<EntityId>,
    forward_relations: usize,
}

impl EntityLayout {
    pub fn new(
        entity_count: usize,
        user_entity: Vec<EntityId>,
        item_entity: Vec<EntityId>,
        kg_relations: usize,
    ) -> Result<Self> {
        let in_range = |e: &EntityId| e.index() < entity_count;
        if !user_entity.iter().all(in_range) || !item_entity.iter().all(in_range) {
            return Err(Error::Data("user or item entity outside the entity table".into()));
        }
        Ok(Self {
            entity_count,
            user_entity,
            item_entity,
            forward_relations: RelationId::FIRST_KG as usize + kg_relations,
        })
    }

    /// Users take entities `0..users`, items the next `items` slots.
    pub fn sequential(users: usize, items: usize, extra_entities: usize, kg_relations: usize) -> Self {
        Self {
            entity_count: users + items + extra_entities,
            user_entity: (0..users as u32).map(EntityId).collect(),
            item_entity: (users as u32..(users + items) as u32).map(EntityId).collect(),
            forward_relations: RelationId::FIRST_KG as usize + kg_relations,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }
    pub fn forward_relations(&self) -> usize {
        self.forward_relations
    }
    pub fn user_count(&self) -> usize {
        self.user_entity.len()
    }
    pub fn item_count(&self) -> usize {
        self.item_entity.len()
    }
    #[inline]
    pub fn user_entity(&self, u: UserId) -> EntityId {
        self.user_entity[u.index()]
    }
    #[inline]
    pub fn item_entity(&self, i: ItemId) -> EntityId {
        self.item_entity[i.index()]
    }
    pub fn item_entities(&self) -> &[EntityId] {
        &self.item_entity
    }
    pub fn user_entities(&self) -> &[EntityId] {
        &self.user_entity
    }
}

/// Per-user positive item sets. All lists are sorted and pairwise disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    item_count: usize,
    train: Vec<Vec<ItemId>>,
    val: Vec<Vec<ItemId>>,
    test: Vec<Vec<ItemId>>,
}

impl InteractionDataset {
    /// Assembles a dataset from explicit splits, checking the invariants.
    pub fn from_splits(
        item_count: usize,
        mut train: Vec<Vec<ItemId>>,
        mut val: Vec<Vec<ItemId>>,
        mut test: Vec<Vec<ItemId>>,
    ) -> Result<Self> {
        let users = train.len();
        if val.len() != users || test.len() != users {
            return Err(Error::Data("split lists disagree on user count".into()));
        }
        for u in 0..users {
            for list in [&mut train[u], &mut val[u], &mut test[u]] {
                list.sort_unstable();
                list.dedup();
                if list.iter().any(|i| i.index() >= item_count) {
                    return Err(Error::Data(alloc::format!("user {u} references an unknown item")));
                }
            }
            if train[u].is_empty() {
                return Err(Error::Data(alloc::format!("user {u} has no training positives")));
            }
            let overlap = |a: &[ItemId], b: &[ItemId]| a.iter().any(|x| b.binary_search(x).is_ok());
            if overlap(&train[u], &val[u]) || overlap(&train[u], &test[u]) || overlap(&val[u], &test[u]) {
                return Err(Error::Data(alloc::format!("user {u} has overlapping splits")));
            }
        }
        Ok(Self {
            item_count,
            train,
            val,
            test,
        })
    }

    pub fn user_count(&self) -> usize {
        self.train.len()
    }
    /// Size of the item universe; item ids are `0..item_count`.
    pub fn item_count(&self) -> usize {
        self.item_count
    }
    pub fn train_pos(&self, u: UserId) -> &[ItemId] {
        &self.train[u.index()]
    }
    pub fn val_pos(&self, u: UserId) -> &[ItemId] {
        &self.val[u.index()]
    }
    pub fn test_pos(&self, u: UserId) -> &[ItemId] {
        &self.test[u.index()]
    }
    pub fn is_train_pos(&self, u: UserId, i: ItemId) -> bool {
        self.train[u.index()].binary_search(&i).is_ok()
    }
    pub fn train_pairs(&self) -> impl Iterator<Item = (UserId, ItemId)> + '_ {
        self.train
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (UserId(u as u32), i)))
    }
    pub fn train_len(&self) -> usize {
        self.train.iter().map(Vec::len).sum()
    }

    /// Uniform draw from items the user has no training interaction with.
    pub fn sample_rec_negative<R: Rng + ?Sized>(&self, u: UserId, rng: &mut R) -> Result<ItemId> {
        let pos = self.train_pos(u);
        let free = self.item_count - pos.len();
        if free == 0 {
            return Err(Error::NoNegativeItem(u.0));
        }
        // k-th item (0-based) not in the sorted positive list.
        let mut j = rng.gen_range(0..free as u32);
        for p in pos {
            if p.0 <= j {
                j += 1;
            } else {
                break;
            }
        }
        Ok(ItemId(j))
    }
}

/// Splits each user's interactions: ⌈0.8n⌉ into a training pool, the rest to
/// test; then max(1, round(0.1·pool)) of the pool to validation when the pool
/// has at least two items.
pub fn split_interactions(
    pairs: &[(UserId, ItemId)],
    user_count: usize,
    item_count: usize,
    seed: u64,
) -> Result<InteractionDataset> {
    let mut per_user: Vec<Vec<ItemId>> = alloc::vec![Vec::new(); user_count];
    for &(u, i) in pairs {
        if u.index() >= user_count || i.index() >= item_count {
            return Err(Error::Data(alloc::format!("pair ({u}, {i}) out of range")));
        }
        if !per_user[u.index()].contains(&i) {
            per_user[u.index()].push(i);
        }
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (u, mut items) in per_user.into_iter().enumerate() {
        let n = items.len();
        if n == 0 {
            return Err(Error::Data(alloc::format!("user {u} has no interactions")));
        }
        items.shuffle(&mut stream(seed, Stream::Split, &[u as u64]));
        let pool = train_pool_size(n);
        let t = items.split_off(pool);
        let nval = validation_size(pool);
        let v = items.split_off(pool - nval);
        train.push(items);
        val.push(v);
        test.push(t);
    }
    InteractionDataset::from_splits(item_count, train, val, test)
}

pub fn train_pool_size(n: usize) -> usize {
    (n * 8).div_ceil(10)
}

pub fn validation_size(pool: usize) -> usize {
    if pool < 2 {
        0
    } else {
        // round(0.1·pool), halves away from zero.
        ((pool + 5) / 10).max(1)
    }
}

/// Entity → auxiliary tokens, deduplicated, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxiliaryMap {
    tokens: BTreeMap<EntityId, Vec<EntityId>>,
}

impl AuxiliaryMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: EntityId, token: EntityId) {
        let list = self.tokens.entry(entity).or_default();
        if !list.contains(&token) {
            list.push(token);
        }
    }

    pub fn tokens(&self, entity: EntityId) -> &[EntityId] {
        self.tokens.get(&entity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, &[EntityId])> {
        self.tokens.iter().map(|(&e, t)| (e, t.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of (entity, token) pairs.
    pub fn pair_count(&self) -> usize {
        self.tokens.values().map(Vec::len).sum()
    }

    pub fn max_entity(&self) -> Option<EntityId> {
        self.tokens
            .iter()
            .flat_map(|(&e, t)| core::iter::once(e).chain(t.iter().copied()))
            .max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn user_pairs(n: u32) -> Vec<(UserId, ItemId)> {
        (0..n).map(|i| (UserId(0), ItemId(i))).collect()
    }

    #[test]
    fn ten_interactions_split_7_1_2() {
        let d = split_interactions(&user_pairs(10), 1, 10, 3).unwrap();
        let u = UserId(0);
        assert_eq!((d.train_pos(u).len(), d.val_pos(u).len(), d.test_pos(u).len()), (7, 1, 2));
    }

    #[test]
    fn single_interaction_goes_to_train() {
        let d = split_interactions(&user_pairs(1), 1, 1, 3).unwrap();
        let u = UserId(0);
        assert_eq!((d.train_pos(u).len(), d.val_pos(u).len(), d.test_pos(u).len()), (1, 0, 0));
    }

    #[test]
    fn split_is_seeded() {
        let pairs: Vec<_> = (0..40).map(|i| (UserId(i % 4), ItemId(i))).collect();
        let a = split_interactions(&pairs, 4, 40, 17).unwrap();
        let b = split_interactions(&pairs, 4, 40, 17).unwrap();
        let c = split_interactions(&pairs, 4, 40, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn user_without_interactions_is_an_error() {
        assert!(split_interactions(&user_pairs(3), 2, 3, 0).is_err());
    }

    #[test]
    fn forced_negative() {
        let d = InteractionDataset::from_splits(2, vec![vec![ItemId(0)]], vec![vec![]], vec![vec![]]).unwrap();
        let mut rng = stream(1, Stream::RecBatches, &[]);
        for _ in 0..100 {
            assert_eq!(d.sample_rec_negative(UserId(0), &mut rng).unwrap(), ItemId(1));
        }
    }

    #[test]
    fn exhausted_negative() {
        let d = InteractionDataset::from_splits(2, vec![vec![ItemId(0), ItemId(1)]], vec![vec![]], vec![vec![]])
            .unwrap();
        let mut rng = stream(1, Stream::RecBatches, &[]);
        assert_eq!(d.sample_rec_negative(UserId(0), &mut rng), Err(Error::NoNegativeItem(0)));
    }

    #[test]
    fn negative_sampler_uniform() {
        let d = InteractionDataset::from_splits(10, vec![vec![ItemId(2), ItemId(7)]], vec![vec![]], vec![vec![]])
            .unwrap();
        let mut rng = stream(5, Stream::RecBatches, &[]);
        let mut counts = [0usize; 10];
        let draws = 8000;
        for _ in 0..draws {
            counts[d.sample_rec_negative(UserId(0), &mut rng).unwrap().index()] += 1;
        }
        assert_eq!(counts[2] + counts[7], 0);
        for (i, &c) in counts.iter().enumerate() {
            if i != 2 && i != 7 {
                let f = c as f64 / draws as f64;
                assert!((0.10..=0.15).contains(&f), "item {i}: {f}");
            }
        }
    }

    #[test]
    fn overlapping_splits_rejected() {
        assert!(InteractionDataset::from_splits(3, vec![vec![ItemId(0)]], vec![vec![ItemId(0)]], vec![vec![]]).is_err());
        assert!(InteractionDataset::from_splits(3, vec![vec![]], vec![vec![]], vec![vec![]]).is_err());
    }

    #[test]
    fn aux_map_dedups() {
        let mut m = AuxiliaryMap::new();
        m.insert(EntityId(1), EntityId(5));
        m.insert(EntityId(1), EntityId(6));
        m.insert(EntityId(1), EntityId(5));
        assert_eq!(m.tokens(EntityId(1)), &[EntityId(5), EntityId(6)]);
        assert_eq!(m.tokens(EntityId(2)), &[]);
        assert_eq!(m.pair_count(), 2);
    }

    proptest! {
        #[test]
        fn split_partitions_each_user(sizes in prop::collection::vec(1usize..40, 1..8), seed in any::<u64>()) {
            let mut pairs = Vec::new();
            let mut item = 0u32;
            for (u, &n) in sizes.iter().enumerate() {
                for _ in 0..n {
                    pairs.push((UserId(u as u32), ItemId(item)));
                    item += 1;
                }
            }
            let d = split_interactions(&pairs, sizes.len(), item as usize, seed).unwrap();
            for (u, &n) in sizes.iter().enumerate() {
                let u = UserId(u as u32);
                let mut all: Vec<ItemId> = d.train_pos(u).iter().chain(d.val_pos(u)).chain(d.test_pos(u)).copied().collect();
                all.sort();
                let mut want: Vec<ItemId> = pairs.iter().filter(|p| p.0 == u).map(|p| p.1).collect();
                want.sort();
                prop_assert_eq!(all, want);
                prop_assert_eq!(d.test_pos(u).len(), n - train_pool_size(n));
                prop_assert!(!d.train_pos(u).is_empty());
            }
        }

        #[test]
        fn negatives_never_positive(pos in prop::collection::btree_set(0u32..20, 1..19), seed in any::<u64>()) {
            let train = vec![pos.iter().map(|&i| ItemId(i)).collect()];
            let d = InteractionDataset::from_splits(20, train, vec![vec![]], vec![vec![]]).unwrap();
            let mut rng = stream(seed, Stream::RecBatches, &[]);
            for _ in 0..50 {
                let j = d.sample_rec_negative(UserId(0), &mut rng).unwrap();
                prop_assert!(!pos.contains(&j.0));
                prop_assert!(j.index() < 20);
            }
        }
    }
}
