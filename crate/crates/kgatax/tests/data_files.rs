use std::fs;
use std::path::Path;

use kgatax::dataset::DataBundle;
use kgatax::io::{load_interactions, load_kg_triples};
use kgatax::AppError;
use kgatax_core::{EntityId, ItemId, ModelConfig};

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn interactions_count_and_dedup() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.tsv", "u1\ti1\nu1\ti2\n");
    let raw = load_interactions(&dir.path().join("a.tsv")).unwrap();
    assert_eq!((raw.pairs.len(), raw.users.len(), raw.items.len()), (2, 1, 2));
    write(dir.path(), "b.tsv", "u1\ti1\nu1\ti1\n");
    assert_eq!(load_interactions(&dir.path().join("b.tsv")).unwrap().pairs.len(), 1);
}

#[test]
fn malformed_interaction_line_reports_line_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.tsv", "u1\n");
    match load_interactions(&dir.path().join("a.tsv")).unwrap_err() {
        AppError::Parse { line, .. } => assert_eq!(line, 1),
        e => panic!("{e}"),
    }
}

#[test]
fn empty_interactions_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.tsv", "# nothing\n");
    assert!(matches!(load_interactions(&dir.path().join("a.tsv")), Err(AppError::Data(_))));
}

#[test]
fn kg_counts_dedup_and_arity() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "kg.tsv", "a\tr\tb\nb\tr\tc\nc\tr\td\nd\ts\ta\na\ts\tc\na\tr\tb\n");
    assert_eq!(load_kg_triples(&dir.path().join("kg.tsv")).unwrap().triples.len(), 5);
    write(dir.path(), "bad.tsv", "a\tb\n");
    assert!(matches!(
        load_kg_triples(&dir.path().join("bad.tsv")),
        Err(AppError::Parse { line: 1, .. })
    ));
}

fn data_dir(aux: &str, item_map: Option<&str>) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "interactions.tsv", "# user\titem\nu1\ti1\nu1\ti2\nu2\ti2\n");
    write(dir.path(), "kg.tsv", "m1\tgenre\twar\nm2\tgenre\tdrama\n");
    write(dir.path(), "aux.tsv", aux);
    if let Some(m) = item_map {
        write(dir.path(), "item_map.tsv", m);
    }
    dir
}

#[test]
fn global_remap_is_a_bijection() {
    let dir = data_dir("e1\tgenre:war\n", None);
    let err = DataBundle::load(dir.path(), 1).unwrap_err();
    assert!(err.to_string().contains("e1"), "{err}");

    let dir = data_dir("i1\tgenre:war\ni1\tyear:1970\nm2\tgenre:war\n", Some("i1\tm1\n"));
    let b = DataBundle::load(dir.path(), 1).unwrap();
    // 2 users, 2 items (i1 absorbs m1), war, m2, drama, 2 tokens
    assert_eq!(b.layout.entity_count(), 9);
    let names: std::collections::HashSet<&String> = b.names.entities.iter().collect();
    assert_eq!(names.len(), 9);
    let i1 = b.layout.item_entity(ItemId(0));
    assert_eq!(b.kg[0].head, i1);
    assert_eq!(b.aux.tokens(i1).len(), 2);
    let tok_war = b.aux.tokens(i1)[0];
    let m2 = EntityId(b.names.entities.iter().position(|n| n == "m2").unwrap() as u32);
    assert_eq!(b.aux.tokens(m2), &[tok_war]);
}

#[test]
fn empty_aux_file_is_identity_fusion() {
    let dir = data_dir("", None);
    let b = DataBundle::load(dir.path(), 1).unwrap();
    assert!(b.aux.is_empty());
    let g = b.graph(&ModelConfig::default()).unwrap();
    // KG facts and training interactions, each with an inverse
    assert_eq!(g.len(), 2 * (2 + b.data.train_len()));
}

#[test]
fn item_map_rejects_unknowns_and_duplicates() {
    for bad in ["i9\tm1\n", "i1\tzz\n", "i1\tm1\ni2\tm1\n"] {
        let dir = data_dir("", Some(bad));
        assert!(matches!(DataBundle::load(dir.path(), 1), Err(AppError::Data(_))), "{bad}");
    }
}
