//! Synthetic attribute-driven data: each item carries a few attributes, each
//! user likes a few attributes, and a user interacts with an item mostly when
//! they share one. Attributes appear both as KG facts and as auxiliary
//! tokens.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::RawData;
use crate::error::Result;
use crate::io::{parse_records, RawInteractions, RawKg};
use crate::report::write_text;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub attributes: usize,
    pub attrs_per_item: usize,
    pub liked_per_user: usize,
    /// Interaction probability for an item sharing a liked attribute.
    pub p_match: f64,
    /// Interaction probability otherwise.
    pub p_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            attributes: 20,
            attrs_per_item: 2,
            liked_per_user: 2,
            p_match: 0.5,
            p_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub interactions: Vec<(String, String)>,
    pub kg: Vec<(String, String, String)>,
    pub aux: Vec<(String, String)>,
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let item_attrs: Vec<Vec<usize>> = (0..spec.items)
        .map(|_| sample(&mut rng, spec.attributes, spec.attrs_per_item).into_vec())
        .collect();
    let mut interactions = Vec::new();
    for u in 0..spec.users {
        let liked = sample(&mut rng, spec.attributes, spec.liked_per_user).into_vec();
        let matches: Vec<usize> = (0..spec.items)
            .filter(|&i| item_attrs[i].iter().any(|a| liked.contains(a)))
            .collect();
        let before = interactions.len();
        for i in 0..spec.items {
            let p = if matches.binary_search(&i).is_ok() {
                spec.p_match
            } else {
                spec.p_noise
            };
            if rng.gen::<f64>() < p {
                interactions.push((format!("u{u}"), format!("i{i}")));
            }
        }
        if interactions.len() == before {
            let pool = if matches.is_empty() { (0..spec.items).collect() } else { matches };
            interactions.push((format!("u{u}"), format!("i{}", pool[rng.gen_range(0..pool.len())])));
        }
    }
    let mut kg = Vec::new();
    let mut aux = Vec::new();
    for (i, attrs) in item_attrs.iter().enumerate() {
        for a in attrs {
            kg.push((format!("i{i}"), "has_attr".to_owned(), format!("attr{a}")));
            aux.push((format!("i{i}"), format!("tag{a}")));
        }
    }
    Synthetic { interactions, kg, aux }
}

impl Synthetic {
    fn tsv<const N: usize>(rows: impl Iterator<Item = [String; N]>) -> String {
        let mut s = String::new();
        for r in rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        s
    }

    pub fn interactions_tsv(&self) -> String {
        Self::tsv(self.interactions.iter().map(|(u, i)| [u.clone(), i.clone()]))
    }

    pub fn kg_tsv(&self) -> String {
        Self::tsv(self.kg.iter().map(|(h, r, t)| [h.clone(), r.clone(), t.clone()]))
    }

    pub fn aux_tsv(&self) -> String {
        Self::tsv(self.aux.iter().map(|(e, t)| [e.clone(), t.clone()]))
    }

    /// Writes `interactions.tsv`, `kg.tsv`, `aux.tsv` and `item_map.tsv`
    /// into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(crate::error::AppError::io(format!("creating {}", dir.display())))?;
        write_text(&dir.join("interactions.tsv"), &self.interactions_tsv())?;
        write_text(&dir.join("kg.tsv"), &self.kg_tsv())?;
        write_text(&dir.join("aux.tsv"), &self.aux_tsv())?;
        write_text(&dir.join("item_map.tsv"), &self.item_map_tsv())?;
        Ok(())
    }

    /// Aligns every item with the KG node of the same name.
    pub fn item_map_tsv(&self) -> String {
        let mut items: Vec<&str> = self.kg.iter().map(|(h, _, _)| h.as_str()).collect();
        items.dedup();
        let seen: std::collections::HashSet<&str> = self.interactions.iter().map(|(_, i)| i.as_str()).collect();
        Self::tsv(
            items
                .into_iter()
                .filter(|i| seen.contains(i))
                .map(|i| [i.to_owned(), i.to_owned()]),
        )
    }

    /// The same records the files would hold, without touching disk.
    pub fn raw(&self) -> Result<RawData> {
        let p = Path::new("<synthetic>");
        let mut interactions = RawInteractions::default();
        let mut seen = std::collections::HashSet::new();
        for (u, i) in &self.interactions {
            let pair = (interactions.users.intern(u), interactions.items.intern(i));
            if seen.insert(pair) {
                interactions.pairs.push(pair);
            }
        }
        let mut kg = RawKg::default();
        for (h, r, t) in &self.kg {
            kg.triples
                .push((kg.entities.intern(h), kg.relations.intern(r), kg.entities.intern(t)));
        }
        let aux = self
            .aux
            .iter()
            .enumerate()
            .map(|(n, (e, t))| (n + 1, e.clone(), t.clone()))
            .collect();
        let item_map = parse_records(p, &self.item_map_tsv(), 2)?
            .into_iter()
            .map(|(n, mut c)| {
                let e = c.pop().unwrap();
                (n, c.pop().unwrap(), e)
            })
            .collect();
        Ok(RawData {
            interactions,
            kg,
            aux,
            item_map,
        })
    }
}
