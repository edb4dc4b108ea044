//! Tab-separated input files. Blank lines and lines starting with `#` are
//! skipped; duplicate records are dropped, keeping the first.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{AppError, Result};

/// Dense ids for raw string identifiers, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(name.to_owned(), id);
        self.names.push(name.to_owned());
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Reads records of exactly `fields` tab-separated columns, tagged with
/// their 1-based line number.
pub fn read_records(path: &Path, fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(AppError::io(format!("reading {}", path.display())))?;
    parse_records(path, &text, fields)
}

pub fn parse_records(path: &Path, text: &str, fields: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<String> = line.split('\t').map(|c| c.trim().to_owned()).collect();
        if cols.len() != fields || cols.iter().any(String::is_empty) {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: format!("expected {fields} non-empty tab-separated fields, found {}", cols.len()),
            });
        }
        out.push((n + 1, cols));
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RawInteractions {
    pub pairs: Vec<(u32, u32)>,
    pub users: Interner,
    pub items: Interner,
}

pub fn load_interactions(path: &Path) -> Result<RawInteractions> {
    let records = read_records(path, 2)?;
    if records.is_empty() {
        return Err(AppError::Data(format!("{} has no interactions", path.display())));
    }
    let mut raw = RawInteractions::default();
    let mut seen = HashSet::new();
    for (_, cols) in records {
        let pair = (raw.users.intern(&cols[0]), raw.items.intern(&cols[1]));
        if seen.insert(pair) {
            raw.pairs.push(pair);
        }
    }
    Ok(raw)
}

#[derive(Debug, Clone, Default)]
pub struct RawKg {
    pub triples: Vec<(u32, u32, u32)>,
    pub entities: Interner,
    pub relations: Interner,
}

pub fn load_kg_triples(path: &Path) -> Result<RawKg> {
    let mut raw = RawKg::default();
    let mut seen = HashSet::new();
    for (_, cols) in read_records(path, 3)? {
        let t = (
            raw.entities.intern(&cols[0]),
            raw.relations.intern(&cols[1]),
            raw.entities.intern(&cols[2]),
        );
        if seen.insert(t) {
            raw.triples.push(t);
        }
    }
    Ok(raw)
}

/// `entity<TAB>token` rows with line numbers, deduplicated. Entity names are
/// resolved later against the global index.
pub fn load_auxiliary_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, mut cols) in read_records(path, 2)? {
        let token = cols.pop().unwrap();
        let entity = cols.pop().unwrap();
        if seen.insert((entity.clone(), token.clone())) {
            out.push((line, entity, token));
        }
    }
    Ok(out)
}

/// `item<TAB>entity` rows.
pub fn load_item_map(path: &Path) -> Result<Vec<(usize, String, String)>> {
    Ok(read_records(path, 2)?
        .into_iter()
        .map(|(line, mut cols)| {
            let entity = cols.pop().unwrap();
            (line, cols.pop().unwrap(), entity)
        })
        .collect())
}

/// The fixed input file names inside a data directory.
#[derive(Debug, Clone)]
pub struct DataFiles {
    pub interactions: PathBuf,
    pub kg: PathBuf,
    pub aux: PathBuf,
    pub item_map: PathBuf,
}

impl DataFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            interactions: dir.join("interactions.tsv"),
            kg: dir.join("kg.tsv"),
            aux: dir.join("aux.tsv"),
            item_map: dir.join("item_map.tsv"),
        }
    }
}
