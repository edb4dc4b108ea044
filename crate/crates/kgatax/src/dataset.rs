//! Remapping raw identifiers into one global entity space.
//!
//! Users take entities `0..U`, items `U..U+I`, then KG entities not aligned
//! to an item, then auxiliary tokens, each in first-seen order.

use std::path::Path;

use kgatax_core::data::split_interactions;
use kgatax_core::graph::build_ckg;
use kgatax_core::{
    AuxiliaryMap, CollaborativeKG, EntityId, EntityLayout, InteractionDataset, ItemId, ModelConfig, RelationId, Triple,
    UserId,
};

use crate::error::{AppError, Result};
use crate::io::{self, DataFiles, Interner, RawInteractions, RawKg};

/// Display names for every id space.
#[derive(Debug, Clone, Default)]
pub struct Names {
    pub users: Interner,
    pub items: Interner,
    /// Indexed by global entity id.
    pub entities: Vec<String>,
    /// KG relations only, indexed from the first KG relation id.
    pub relations: Vec<String>,
}

/// Everything a run needs, in global ids.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub names: Names,
    pub layout: EntityLayout,
    pub data: InteractionDataset,
    pub kg: Vec<Triple>,
    pub aux: AuxiliaryMap,
}

/// Raw inputs before remapping.
#[derive(Debug, Clone, Default)]
pub struct RawData {
    pub interactions: RawInteractions,
    pub kg: RawKg,
    /// (line, entity name, token name).
    pub aux: Vec<(usize, String, String)>,
    /// (line, item name, KG entity name).
    pub item_map: Vec<(usize, String, String)>,
}

impl RawData {
    /// `kg.tsv`, `aux.tsv` and `item_map.tsv` are optional; a missing file
    /// reads as empty.
    pub fn load(dir: &Path) -> Result<Self> {
        let files = DataFiles::in_dir(dir);
        Ok(Self {
            interactions: io::load_interactions(&files.interactions)?,
            kg: if files.kg.exists() {
                io::load_kg_triples(&files.kg)?
            } else {
                RawKg::default()
            },
            aux: if files.aux.exists() {
                io::load_auxiliary_pairs(&files.aux)?
            } else {
                Vec::new()
            },
            item_map: if files.item_map.exists() {
                io::load_item_map(&files.item_map)?
            } else {
                Vec::new()
            },
        })
    }
}

impl DataBundle {
    pub fn load(dir: &Path, seed: u64) -> Result<Self> {
        Self::assemble(RawData::load(dir)?, seed)
    }

    /// Remaps ids, resolves auxiliary entity names (items first, then KG
    /// entities) and splits interactions with `seed`.
    pub fn assemble(raw: RawData, seed: u64) -> Result<Self> {
        let RawData {
            interactions,
            kg,
            aux,
            item_map,
        } = raw;
        let (users, items) = (interactions.users.len(), interactions.items.len());
        let mut entities: Vec<String> = interactions.users.names().to_vec();
        entities.extend(interactions.items.names().iter().cloned());

        let mut kg_to_global: Vec<Option<u32>> = vec![None; kg.entities.len()];
        let mut item_claimed: Vec<bool> = vec![false; items];
        for (line, item, entity) in &item_map {
            let i = interactions
                .items
                .get(item)
                .ok_or_else(|| AppError::Data(format!("item_map line {line}: unknown item `{item}`")))?;
            let Some(e) = kg.entities.get(entity) else {
                return Err(AppError::Data(format!("item_map line {line}: unknown KG entity `{entity}`")));
            };
            if item_claimed[i as usize] || kg_to_global[e as usize].is_some() {
                return Err(AppError::Data(format!(
                    "item_map line {line}: `{item}` or `{entity}` is mapped twice"
                )));
            }
            item_claimed[i as usize] = true;
            kg_to_global[e as usize] = Some((users + i as usize) as u32);
        }
        for (e, slot) in kg_to_global.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = Some(entities.len() as u32);
                entities.push(kg.entities.name(e as u32).to_owned());
            }
        }
        let kg_global = |e: u32| kg_to_global[e as usize].unwrap();

        let mut tokens = Interner::default();
        let mut aux_pairs = Vec::with_capacity(aux.len());
        for (line, entity, token) in &aux {
            let e = if let Some(i) = interactions.items.get(entity) {
                users as u32 + i
            } else if let Some(k) = kg.entities.get(entity) {
                kg_global(k)
            } else {
                return Err(AppError::Data(format!("aux.tsv line {line}: unknown entity `{entity}`")));
            };
            aux_pairs.push((e, tokens.intern(token)));
        }
        let token_base = entities.len() as u32;
        entities.extend(tokens.names().iter().map(|t| t.to_owned()));
        let mut aux_map = AuxiliaryMap::new();
        for (e, t) in aux_pairs {
            aux_map.insert(EntityId(e), EntityId(token_base + t));
        }

        let triples: Vec<Triple> = kg
            .triples
            .iter()
            .map(|&(h, r, t)| Triple::new(kg_global(h), RelationId::FIRST_KG + r, kg_global(t)))
            .collect();
        let layout = EntityLayout::sequential(users, items, entities.len() - users - items, kg.relations.len());
        let pairs: Vec<(UserId, ItemId)> = interactions
            .pairs
            .iter()
            .map(|&(u, i)| (UserId(u), ItemId(i)))
            .collect();
        let data = split_interactions(&pairs, users, items, seed)?;
        Ok(Self {
            names: Names {
                users: interactions.users,
                items: interactions.items,
                entities,
                relations: kg.relations.names().to_vec(),
            },
            layout,
            data,
            kg: triples,
            aux: aux_map,
        })
    }

    pub fn graph(&self, config: &ModelConfig) -> Result<CollaborativeKG> {
        Ok(build_ckg(&self.kg, &self.data, &self.aux, &self.layout, config)?)
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.names.users.get(name).map(UserId)
    }

    pub fn item_name(&self, i: ItemId) -> &str {
        self.names.items.name(i.0)
    }

    pub fn user_name(&self, u: UserId) -> &str {
        self.names.users.name(u.0)
    }
}

/// Entity, relation and triple counts of a built graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats {
    pub users: usize,
    pub items: usize,
    pub entities: usize,
    pub relations: usize,
    pub kg_triples: usize,
    pub aux_pairs: usize,
    pub train_interactions: usize,
    pub ckg_triples: usize,
}

impl GraphStats {
    pub fn of(bundle: &DataBundle, g: &CollaborativeKG) -> Self {
        Self {
            users: bundle.data.user_count(),
            items: bundle.data.item_count(),
            entities: g.entity_count(),
            relations: g.relation_count(),
            kg_triples: bundle.kg.len(),
            aux_pairs: bundle.aux.pair_count(),
            train_interactions: bundle.data.train_len(),
            ckg_triples: g.len(),
        }
    }

    pub fn lines(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("users", self.users),
            ("items", self.items),
            ("entities", self.entities),
            ("relations", self.relations),
            ("kg_triples", self.kg_triples),
            ("aux_pairs", self.aux_pairs),
            ("train_interactions", self.train_interactions),
            ("ckg_triples", self.ckg_triples),
        ]
    }
}
