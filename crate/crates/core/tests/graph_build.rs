use std::collections::BTreeSet;

use kgatax_core::graph::build_ckg;
use kgatax_core::rng::{stream, Stream};
use kgatax_core::train::train;
use kgatax_core::{AuxiliaryMap, EntityId, EntityLayout, InteractionDataset, ItemId, ModelConfig, Precision, Triple};
use proptest::prelude::*;

fn dataset(items: usize, train: Vec<Vec<u32>>) -> InteractionDataset {
    let n = train.len();
    InteractionDataset::from_splits(
        items,
        train.into_iter().map(|v| v.into_iter().map(ItemId).collect()).collect(),
        vec![vec![]; n],
        vec![vec![]; n],
    )
    .unwrap()
}

fn cfg(inverse: bool, fusion: bool) -> ModelConfig {
    ModelConfig {
        inverse_relations: inverse,
        fusion,
        ..ModelConfig::default()
    }
}

#[test]
fn five_kg_plus_three_interactions_with_inverses() {
    let layout = EntityLayout::sequential(2, 3, 4, 2);
    let data = dataset(3, vec![vec![0, 1], vec![2]]);
    let kg: Vec<Triple> = [(2, 2, 5), (3, 2, 6), (4, 3, 7), (5, 3, 8), (6, 2, 8)]
        .iter()
        .map(|&(h, r, t)| Triple::new(h, r, t))
        .collect();
    let g = build_ckg(&kg, &data, &AuxiliaryMap::new(), &layout, &cfg(true, false)).unwrap();
    assert_eq!(g.len(), 16);
}

#[test]
fn single_interaction_without_inverses() {
    let layout = EntityLayout::sequential(1, 1, 0, 0);
    let data = dataset(1, vec![vec![0]]);
    let g = build_ckg(&[], &data, &AuxiliaryMap::new(), &layout, &cfg(false, false)).unwrap();
    assert_eq!(g.len(), 1);
    assert_eq!(g.neighborhood(EntityId(0)), &[Triple::new(0, 0, 1)]);
}

#[test]
fn two_aux_tokens_add_four_triples() {
    let layout = EntityLayout::sequential(1, 1, 2, 0);
    let data = dataset(1, vec![vec![0]]);
    let mut aux = AuxiliaryMap::new();
    aux.insert(EntityId(1), EntityId(2));
    aux.insert(EntityId(1), EntityId(3));
    let on = build_ckg(&[], &data, &aux, &layout, &cfg(true, true)).unwrap();
    let off = build_ckg(&[], &data, &aux, &layout, &cfg(true, false)).unwrap();
    assert_eq!(on.len(), off.len() + 4);
}

#[test]
fn fusion_off_equals_empty_aux_map() {
    let (users, items, extra) = (6usize, 5usize, 3usize);
    let layout = EntityLayout::sequential(users, items, extra, 1);
    let data = dataset(items, (0..users as u32).map(|u| vec![u % 5, (u + 2) % 5]).collect());
    let kg: Vec<Triple> = (0..items as u32).map(|i| Triple::new(6 + i, 2, 11 + i % 3)).collect();
    let mut aux = AuxiliaryMap::new();
    for i in 0..items as u32 {
        aux.insert(EntityId(6 + i), EntityId(11 + (i + 1) % 3));
    }
    let config = ModelConfig {
        dim: 4,
        layer_dims: vec![3],
        epochs: 3,
        batch_size: 4,
        pretrain_epochs: 1,
        fusion: false,
        precision: Precision::F64,
        ..ModelConfig::default()
    };
    let empty = AuxiliaryMap::new();
    let ga = build_ckg(&kg, &data, &aux, &layout, &config).unwrap();
    let gb = build_ckg(&kg, &data, &empty, &layout, &config).unwrap();
    assert_eq!(ga.triples(), gb.triples());
    let (a, la) = train::<f64>(&data, &ga, &aux, &layout, &config, &mut |_| {}).unwrap();
    let (b, lb) = train::<f64>(&data, &gb, &empty, &layout, &config, &mut |_| {}).unwrap();
    let bits = |l: &[kgatax_core::train::EpochLog]| -> Vec<[u64; 3]> {
        l.iter().map(|e| [e.rec_loss.to_bits(), e.kg_loss.to_bits(), e.val_recall.to_bits()]).collect()
    };
    assert_eq!(bits(&la), bits(&lb));
    assert_eq!(a.star().as_slice(), b.star().as_slice());
}

proptest! {
    #[test]
    fn triple_count_matches_set_union(
        kg in prop::collection::vec((0u32..12, 0u32..2, 0u32..12), 0..30),
        inter in prop::collection::vec(prop::collection::btree_set(0u32..4, 1..4), 1..4),
        aux_pairs in prop::collection::vec((0u32..12, 9u32..12), 0..6),
        inverse in any::<bool>(),
        fusion in any::<bool>(),
    ) {
        let users = inter.len();
        // users, 4 items, then KG-only entities up to 12 + users
        let layout = EntityLayout::sequential(users, 4, 8, 2);
        let off = users as u32;
        let kg: Vec<Triple> = kg.iter().map(|&(h, r, t)| Triple::new(h + off, 2 + r, t + off)).collect();
        let data = dataset(4, inter.iter().map(|s| s.iter().copied().collect()).collect());
        let mut aux = AuxiliaryMap::new();
        for &(e, t) in &aux_pairs {
            aux.insert(EntityId(e + off), EntityId(t + off));
        }
        let g = build_ckg(&kg, &data, &aux, &layout, &cfg(inverse, fusion)).unwrap();

        let mut oracle: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
        let mut forward: Vec<(u32, u32, u32)> = kg.iter().map(|t| (t.head.0, t.relation.0, t.tail.0)).collect();
        for (u, items) in inter.iter().enumerate() {
            for &i in items {
                forward.push((u as u32, 0, off + i));
            }
        }
        if fusion {
            for (e, toks) in aux.iter() {
                for t in toks {
                    forward.push((e.0, 1, t.0));
                }
            }
        }
        for &(h, r, t) in &forward {
            oracle.insert((h, r, t));
            if inverse {
                oracle.insert((t, r + 4, h));
            }
        }
        prop_assert_eq!(g.len(), oracle.len());
        for t in g.triples() {
            prop_assert!(oracle.contains(&(t.head.0, t.relation.0, t.tail.0)));
        }
    }
}

#[test]
fn init_stream_is_reproducible() {
    let a: f64 = rand::Rng::gen(&mut stream(1, Stream::Init, &[]));
    let b: f64 = rand::Rng::gen(&mut stream(1, Stream::Init, &[]));
    assert_eq!(a, b);
}
