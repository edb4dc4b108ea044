use kgatax_core::config::AttentionMode;
use kgatax_core::data::split_interactions;
use kgatax_core::graph::build_ckg;
use kgatax_core::rng::{stream, Stream};
use kgatax_core::train::{train, train_mf};
use kgatax_core::transr::{kg_adam, kg_epoch, TransRParameters};
use kgatax_core::{
    AuxiliaryMap, CollaborativeKG, EntityId, EntityLayout, InteractionDataset, ItemId, ModelConfig, Precision, Triple,
    UserId,
};
use rand::Rng;

/// Users like items sharing one of two hidden tastes; items carry a taste
/// attribute as both a KG fact and an auxiliary token.
struct Toy {
    data: InteractionDataset,
    layout: EntityLayout,
    kg: Vec<Triple>,
    aux: AuxiliaryMap,
}

fn toy(seed: u64) -> Toy {
    let (users, items, attrs) = (24usize, 16usize, 4usize);
    let layout = EntityLayout::sequential(users, items, attrs, 1);
    let attr_of = |i: usize| i % attrs;
    let mut rng = stream(seed, Stream::GridCell, &[]);
    let mut pairs = Vec::new();
    for u in 0..users {
        let taste = u % attrs;
        for i in 0..items {
            let p = if attr_of(i) == taste { 0.8 } else { 0.05 };
            if rng.gen::<f64>() < p {
                pairs.push((UserId(u as u32), ItemId(i as u32)));
            }
        }
        if !pairs.iter().any(|&(pu, _)| pu.index() == u) {
            pairs.push((UserId(u as u32), ItemId(taste as u32)));
        }
    }
    let data = split_interactions(&pairs, users, items, seed).unwrap();
    let attr_entity = |a: usize| (users + items + a) as u32;
    let mut kg = Vec::new();
    let mut aux = AuxiliaryMap::new();
    for i in 0..items {
        let e = layout.item_entity(ItemId(i as u32));
        kg.push(Triple::new(e.0, 2, attr_entity(attr_of(i))));
        aux.insert(e, EntityId(attr_entity(attr_of(i))));
    }
    Toy { data, layout, kg, aux }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        dim: 8,
        layer_dims: vec![8, 4],
        neighbor_cap: 10,
        lr: 0.01,
        l2: 1e-4,
        dropout: 0.1,
        batch_size: 32,
        epochs: 6,
        patience: 0,
        pretrain_epochs: 2,
        precision: Precision::F64,
        seed: 5,
        ..ModelConfig::default()
    }
}

fn graph(t: &Toy, cfg: &ModelConfig) -> CollaborativeKG {
    build_ckg(&t.kg, &t.data, &t.aux, &t.layout, cfg).unwrap()
}

#[test]
fn depth_zero_reduces_to_mf() {
    let t = toy(3);
    let cfg = ModelConfig {
        layer_dims: vec![],
        attention: AttentionMode::Uniform,
        fusion: false,
        pretrain_kg: false,
        kg_alternate: false,
        patience: 2,
        epochs: 8,
        ..small_config()
    };
    let g = graph(&t, &cfg);
    let (full, full_log) = train::<f64>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |_| {}).unwrap();
    let (mf, mf_log) = train_mf::<f64>(&t.data, &t.layout, &cfg).unwrap();
    assert_eq!(full_log, mf_log);
    for u in 0..t.data.user_count() as u32 {
        for i in 0..t.data.item_count() as u32 {
            let (a, b) = (full.score(UserId(u), ItemId(i)), mf.score(UserId(u), ItemId(i)));
            assert_eq!(a.to_bits(), b.to_bits(), "u{u} i{i}");
        }
    }
}

#[test]
fn same_seed_same_logs_and_scores() {
    let t = toy(4);
    let cfg = small_config();
    let g = graph(&t, &cfg);
    let (m1, l1) = train::<f64>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |_| {}).unwrap();
    let (m2, l2) = train::<f64>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |_| {}).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(m1.star().as_slice(), m2.star().as_slice());
}

#[test]
fn training_reduces_bpr_loss() {
    let t = toy(6);
    let cfg = ModelConfig {
        epochs: 15,
        ..small_config()
    };
    let g = graph(&t, &cfg);
    let (_, logs) = train::<f64>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |_| {}).unwrap();
    let (first, last) = (logs[0].rec_loss, logs.last().unwrap().rec_loss);
    assert!(last < 0.8 * first, "first {first}, last {last}");
}

#[test]
fn observer_sees_every_epoch() {
    let t = toy(7);
    let cfg = small_config();
    let g = graph(&t, &cfg);
    let mut seen = Vec::new();
    let (_, logs) = train::<f32>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |l| seen.push(l.epoch)).unwrap();
    assert_eq!(seen, (1..=logs.len()).collect::<Vec<_>>());
}

#[test]
fn topk_excludes_train_and_orders() {
    let t = toy(8);
    let cfg = small_config();
    let g = graph(&t, &cfg);
    let (m, _) = train::<f64>(&t.data, &g, &t.aux, &t.layout, &cfg, &mut |_| {}).unwrap();
    for u in 0..t.data.user_count() as u32 {
        let top = m.recommend_topk(&t.data, UserId(u), 5).unwrap();
        assert!(top.iter().all(|&(i, _)| !t.data.is_train_pos(UserId(u), i)));
        assert!(top.windows(2).all(|w| w[0].1 >= w[1].1));
    }
    assert!(m.recommend_topk(&t.data, UserId(999), 5).is_err());
}

#[test]
fn mf_separates_single_positive() {
    let layout = EntityLayout::sequential(1, 2, 0, 0);
    let data = InteractionDataset::from_splits(2, vec![vec![ItemId(0)]], vec![vec![]], vec![vec![]]).unwrap();
    let cfg = ModelConfig {
        dim: 4,
        layer_dims: vec![],
        l2: 0.0,
        lr: 0.05,
        epochs: 50,
        batch_size: 1,
        precision: Precision::F64,
        ..ModelConfig::default()
    };
    let (m, _) = train_mf::<f64>(&data, &layout, &cfg).unwrap();
    assert!(m.score(UserId(0), ItemId(0)) > m.score(UserId(0), ItemId(1)));
}

fn chain_kg() -> CollaborativeKG {
    let triples: Vec<Triple> = (0..20u32).map(|k| Triple::new(k % 10, k % 2, (k * 3 + 1) % 12)).collect();
    CollaborativeKG::from_triples(triples, 12, 2, false).unwrap()
}

#[test]
fn kg_epochs_deterministic_and_converge() {
    let g = chain_kg();
    assert_eq!(g.len(), 20);
    let run = || {
        let mut p: TransRParameters<f64> =
            TransRParameters::init(12, g.relation_count(), 8, &mut stream(1, Stream::Init, &[])).unwrap();
        let mut adam = kg_adam(&p);
        (0..50)
            .map(|e| {
                kg_epoch(&mut p, &mut adam, &g, 5, 0.05, 0.0, e, &mut stream(1, Stream::KgEpoch, &[e as u64]))
                    .unwrap()
                    .mean_loss
            })
            .collect::<Vec<f64>>()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a[49] < 0.5 * a[0], "first {}, last {}", a[0], a[49]);
}
