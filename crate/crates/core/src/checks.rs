//! Gradient checks of the full objective on a small fixed graph.

use alloc::string::ToString;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{AttentionMode, ModelConfig, Precision};
use crate::data::{AuxiliaryMap, EntityLayout, InteractionDataset};
use crate::error::Result;
use crate::gradcheck::{finite_diff_gradcheck, GradCheckReport, Segment};
use crate::graph::{build_ckg, CollaborativeKG, EntityId, ItemId, Triple, UserId};
use crate::model::{bpr_step_loss, BprSample, ModelInputs, ModelParameters};
use crate::propagation::Neighborhoods;
use crate::rng::{stream, Stream};
use crate::transr::{kg_pair_loss, KgQuad};

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Two users, three items, one attribute token (6 entities) and two KG
/// relations.
pub struct Fixture {
    pub config: ModelConfig,
    pub layout: EntityLayout,
    pub data: InteractionDataset,
    pub aux: AuxiliaryMap,
    pub kg: Vec<Triple>,
}

impl Fixture {
    pub fn new() -> Self {
        let config = ModelConfig {
            dim: 3,
            layer_dims: vec![3, 2],
            neighbor_cap: 64,
            l2: 0.01,
            dropout: 0.0,
            batch_size: 4,
            leaky_slope: 0.2,
            attention: AttentionMode::Learned,
            fusion: true,
            precision: Precision::F64,
            seed: 7,
            ..ModelConfig::default()
        };
        let layout = EntityLayout::sequential(2, 3, 1, 2);
        let item = |i: u32| layout.item_entity(ItemId(i)).0;
        let kg = vec![Triple::new(item(0), 2, item(1)), Triple::new(item(1), 3, item(2))];
        let data = InteractionDataset::from_splits(
            3,
            vec![vec![ItemId(0), ItemId(1)], vec![ItemId(1), ItemId(2)]],
            vec![vec![], vec![]],
            vec![vec![], vec![]],
        )
        .expect("fixture splits are valid");
        let mut aux = AuxiliaryMap::new();
        aux.insert(EntityId(item(0)), EntityId(5));
        aux.insert(EntityId(item(2)), EntityId(5));
        Self {
            config,
            layout,
            data,
            aux,
            kg,
        }
    }

    pub fn graph(&self, config: &ModelConfig) -> Result<CollaborativeKG> {
        build_ckg(&self.kg, &self.data, &self.aux, &self.layout, config)
    }

    pub fn bpr_batch(&self) -> Vec<BprSample> {
        vec![
            BprSample {
                user: UserId(0),
                pos: ItemId(0),
                neg: ItemId(2),
            },
            BprSample {
                user: UserId(1),
                pos: ItemId(2),
                neg: ItemId(0),
            },
            BprSample {
                user: UserId(0),
                pos: ItemId(1),
                neg: ItemId(2),
            },
        ]
    }

    pub fn kg_batch(&self, g: &CollaborativeKG) -> Vec<KgQuad> {
        g.triples()
            .iter()
            .map(|&t| KgQuad {
                triple: t,
                corrupt_tail: EntityId((t.tail.0 + 1) % self.layout.entity_count() as u32),
            })
            .filter(|q| q.corrupt_tail != q.triple.tail)
            .collect()
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}

/// Which terms of the objective a check includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Kg,
    Bpr,
    Joint,
}

fn segments(params: &ModelParameters<f64>) -> Vec<Segment> {
    let mut off = 0;
    params
        .blocks()
        .into_iter()
        .map(|(name, m)| {
            let len = m.as_slice().len();
            let s = Segment { name, offset: off, len };
            off += len;
            s
        })
        .collect()
}

/// Finite-difference check of `objective` under `config` on the fixture.
pub fn check_objective(
    fx: &Fixture,
    config: &ModelConfig,
    objective: Objective,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    config.validate()?;
    let g = fx.graph(config)?;
    let hood = Neighborhoods::full(&g);
    let params: ModelParameters<f64> = ModelParameters::init(
        config,
        g.entity_count(),
        g.relation_count(),
        &mut stream(config.seed, Stream::Init, &[]),
    )?;
    let inputs = ModelInputs {
        graph: &g,
        aux: &fx.aux,
        layout: &fx.layout,
        config,
    };
    let batch = fx.bpr_batch();
    let quads = fx.kg_batch(&g);
    let margin = config.kg_margin;
    let use_kg = objective != Objective::Bpr;
    let use_bpr = objective != Objective::Kg;

    let loss_of = |p: &ModelParameters<f64>, grads: Option<&mut ModelParameters<f64>>| -> Result<f64> {
        let mut total = 0.0;
        match grads {
            Some(grads) => {
                if use_kg {
                    total += kg_pair_loss(&p.embed, &quads, margin, Some(&mut grads.embed))?;
                }
                if use_bpr {
                    total += bpr_step_loss(p, inputs, &hood, None, &batch, Some(grads))?;
                }
            }
            None => {
                if use_kg {
                    total += kg_pair_loss(&p.embed, &quads, margin, None)?;
                }
                if use_bpr {
                    total += bpr_step_loss(p, inputs, &hood, None, &batch, None)?;
                }
            }
        }
        Ok(total)
    };

    let mut grads = params.zeros_like();
    loss_of(&params, Some(&mut grads))?;
    let point = params.to_flat();
    let analytic = grads.to_flat();
    let mut probe = params.clone();
    finite_diff_gradcheck(
        |theta| {
            probe.set_flat(theta);
            loss_of(&probe, None).unwrap_or(f64::NAN)
        },
        &point,
        &analytic,
        &segments(&params),
        h,
        tol,
    )
}

/// The standard suite: each objective term alone and jointly, with learned
/// and uniform attention and with fusion off.
pub fn gradcheck_suite(h: f64, tol: f64) -> Result<Vec<(String, GradCheckReport)>> {
    let fx = Fixture::new();
    let base = fx.config.clone();
    let variants: Vec<(&str, ModelConfig, Objective)> = vec![
        ("transr", base.clone(), Objective::Kg),
        ("bpr_learned_attention", base.clone(), Objective::Bpr),
        (
            "bpr_uniform_attention",
            ModelConfig {
                attention: AttentionMode::Uniform,
                ..base.clone()
            },
            Objective::Bpr,
        ),
        (
            "bpr_fusion_off",
            ModelConfig {
                fusion: false,
                ..base.clone()
            },
            Objective::Bpr,
        ),
        (
            "bpr_single_layer",
            ModelConfig {
                layer_dims: vec![4],
                ..base.clone()
            },
            Objective::Bpr,
        ),
        ("joint", base.clone(), Objective::Joint),
    ];
    let mut out = Vec::with_capacity(variants.len());
    for (name, cfg, obj) in variants {
        out.push((name.to_string(), check_objective(&fx, &cfg, obj, h, tol)?));
    }
    Ok(out)
}
