//! CSV and JSON artifacts. Each one carries the resolved config: CSV files as
//! leading `# key=value` comment lines, JSON under a `config` object.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kgatax_core::eval::EvalReport;
use kgatax_core::train::EpochLog;
use kgatax_core::ModelConfig;
use serde_json::{json, Map, Value};

use crate::dataset::DataBundle;
use crate::error::{AppError, Result};

pub const MODEL_FILE: &str = "model.kgax";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const GRID_FILE: &str = "grid.csv";

pub const EPOCH_HEADER: &str = "epoch,rec_loss,kg_loss,val_recall@20,elapsed_ms";

pub fn config_comment(config: &ModelConfig) -> String {
    config.to_kv_text().lines().map(|l| format!("# {l}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub log: EpochLog,
    pub elapsed_ms: u128,
}

pub fn epochs_csv(config: &ModelConfig, rows: &[EpochRow]) -> String {
    let mut s = config_comment(config);
    s.push_str(EPOCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.log.epoch, r.log.rec_loss, r.log.kg_loss, r.log.val_recall, r.elapsed_ms
        );
    }
    s
}

/// Per-user rows: user name, recall and NDCG at each K, AUC (empty when
/// undefined).
pub fn eval_csv(config: &ModelConfig, report: &EvalReport, bundle: &DataBundle) -> String {
    let mut s = config_comment(config);
    s.push_str("user");
    for k in &report.ks {
        let _ = write!(s, ",recall@{k}");
    }
    for k in &report.ks {
        let _ = write!(s, ",ndcg@{k}");
    }
    s.push_str(",auc\n");
    for u in &report.users {
        s.push_str(bundle.user_name(u.user));
        for v in u.recall.iter().chain(&u.ndcg) {
            let _ = write!(s, ",{v}");
        }
        match u.auc {
            Some(a) => {
                let _ = writeln!(s, ",{a}");
            }
            None => s.push_str(",\n"),
        }
    }
    s
}

pub fn config_json(config: &ModelConfig) -> Value {
    let map: Map<String, Value> = kgatax_core::config::MODEL_KEYS
        .iter()
        .map(|&k| (k.to_owned(), Value::String(config.get(k).unwrap_or_default())))
        .collect();
    Value::Object(map)
}

pub fn eval_json(config: &ModelConfig, report: &EvalReport, split: &str) -> Value {
    let per_k = |vals: &[f64]| -> Value {
        Value::Object(
            report
                .ks
                .iter()
                .zip(vals)
                .map(|(k, v)| (format!("@{k}"), json!(v)))
                .collect(),
        )
    };
    json!({
        "seed": config.seed,
        "config": config_json(config),
        "split": split,
        "ks": report.ks,
        "users": report.user_count,
        "recall": per_k(&report.mean_recall),
        "ndcg": per_k(&report.mean_ndcg),
        "auc": report.mean_auc,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(AppError::io(format!("writing {}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Drops the `elapsed_ms` column, the only wall-clock field in the epoch log.
pub fn strip_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            if l.starts_with('#') {
                l.to_owned()
            } else {
                l.rsplit_once(',').map_or(l, |(head, _)| head).to_owned()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
