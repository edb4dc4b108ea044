//! Model hyperparameters and their `key=value` text form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionMode {
    /// Softmax over LeakyReLU(W2 · e(h,r,t)).
    Learned,
    /// π = 1/|N_h|; W2 is unused.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionOp {
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    /// Output width of each propagation layer; its length is the depth L.
    pub layer_dims: Vec<usize>,
    pub neighbor_cap: usize,
    pub lr: f64,
    /// L2 coefficient λ.
    pub l2: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub leaky_slope: f64,
    pub attention: AttentionMode,
    pub fusion: bool,
    pub fusion_op: FusionOp,
    pub pretrain_kg: bool,
    pub pretrain_epochs: usize,
    /// Run one KG pass after the recommendation batches of every epoch.
    pub kg_alternate: bool,
    pub kg_margin: f64,
    pub inverse_relations: bool,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            layer_dims: alloc::vec![32, 16],
            neighbor_cap: 20,
            lr: 0.001,
            l2: 1e-5,
            dropout: 0.1,
            batch_size: 1024,
            epochs: 100,
            patience: 10,
            leaky_slope: 0.2,
            attention: AttentionMode::Learned,
            fusion: true,
            fusion_op: FusionOp::Hadamard,
            pretrain_kg: true,
            pretrain_epochs: 5,
            kg_alternate: true,
            kg_margin: 0.0,
            inverse_relations: true,
            seed: 42,
            precision: Precision::F32,
        }
    }
}

/// Every key understood by [`ModelConfig::set`], in serialization order.
pub const MODEL_KEYS: &[&str] = &[
    "dim",
    "layer_dims",
    "neighbor_cap",
    "lr",
    "l2",
    "dropout",
    "batch_size",
    "epochs",
    "patience",
    "leaky_slope",
    "attention",
    "fusion",
    "fusion_op",
    "pretrain_kg",
    "pretrain_epochs",
    "kg_alternate",
    "kg_margin",
    "inverse_relations",
    "seed",
    "precision",
];

fn num<T: FromStr>(key: &str, value: &str, legal: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`; expected {legal}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::config(key, format!("`{other}` is not one of on|off"))),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = value.trim();
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|p| num::<usize>(key, p, "a comma-separated list of positive integers"))
        .collect()
}

impl ModelConfig {
    /// Depth L.
    pub fn depth(&self) -> usize {
        self.layer_dims.len()
    }

    /// Width of layer `l` (0 = base embeddings).
    pub fn layer_width(&self, l: usize) -> usize {
        if l == 0 {
            self.dim
        } else {
            self.layer_dims[l - 1]
        }
    }

    /// Length of the concatenated representation e*.
    pub fn concat_width(&self) -> usize {
        self.dim + self.layer_dims.iter().sum::<usize>()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dim" => self.dim = num(key, v, "an integer ≥ 1")?,
            "layer_dims" => self.layer_dims = parse_usize_list(key, v)?,
            "neighbor_cap" => self.neighbor_cap = num(key, v, "an integer ≥ 1")?,
            "lr" => self.lr = num(key, v, "a real > 0")?,
            "l2" => self.l2 = num(key, v, "a real ≥ 0")?,
            "dropout" => self.dropout = num(key, v, "a real in [0, 1)")?,
            "batch_size" => self.batch_size = num(key, v, "an integer ≥ 1")?,
            "epochs" => self.epochs = num(key, v, "an integer ≥ 1")?,
            "patience" => self.patience = num(key, v, "an integer ≥ 0")?,
            "leaky_slope" => self.leaky_slope = num(key, v, "a real in (0, 1)")?,
            "attention" => {
                self.attention = match v {
                    "learned" => AttentionMode::Learned,
                    "uniform" => AttentionMode::Uniform,
                    _ => return Err(Error::config(key, format!("`{v}` is not one of learned|uniform"))),
                }
            }
            "fusion" => self.fusion = flag(key, v)?,
            "fusion_op" => {
                self.fusion_op = match v {
                    "hadamard" => FusionOp::Hadamard,
                    _ => return Err(Error::config(key, format!("`{v}` is not supported; legal: hadamard"))),
                }
            }
            "pretrain_kg" => self.pretrain_kg = flag(key, v)?,
            "pretrain_epochs" => self.pretrain_epochs = num(key, v, "an integer ≥ 0")?,
            "kg_alternate" => self.kg_alternate = flag(key, v)?,
            "kg_margin" => self.kg_margin = num(key, v, "a finite real")?,
            "inverse_relations" => self.inverse_relations = flag(key, v)?,
            "seed" => self.seed = num(key, v, "an unsigned 64-bit integer")?,
            "precision" => {
                self.precision = match v {
                    "32" => Precision::F32,
                    "64" => Precision::F64,
                    _ => return Err(Error::config(key, format!("`{v}` is not one of 32|64"))),
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dim" => self.dim.to_string(),
            "layer_dims" => {
                if self.layer_dims.is_empty() {
                    "none".into()
                } else {
                    let parts: Vec<String> = self.layer_dims.iter().map(ToString::to_string).collect();
                    parts.join(",")
                }
            }
            "neighbor_cap" => self.neighbor_cap.to_string(),
            "lr" => self.lr.to_string(),
            "l2" => self.l2.to_string(),
            "dropout" => self.dropout.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "patience" => self.patience.to_string(),
            "leaky_slope" => self.leaky_slope.to_string(),
            "attention" => match self.attention {
                AttentionMode::Learned => "learned".into(),
                AttentionMode::Uniform => "uniform".into(),
            },
            "fusion" => on_off(self.fusion).into(),
            "fusion_op" => "hadamard".into(),
            "pretrain_kg" => on_off(self.pretrain_kg).into(),
            "pretrain_epochs" => self.pretrain_epochs.to_string(),
            "kg_alternate" => on_off(self.kg_alternate).into(),
            "kg_margin" => self.kg_margin.to_string(),
            "inverse_relations" => on_off(self.inverse_relations).into(),
            "seed" => self.seed.to_string(),
            "precision" => match self.precision {
                Precision::F32 => "32".into(),
                Precision::F64 => "64".into(),
            },
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, legal: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, format!("{} out of range; legal: {legal}", self.get(key).unwrap_or_default())))
            }
        };
        check(self.dim >= 1, "dim", "≥ 1")?;
        check(self.layer_dims.len() <= 3, "layer_dims", "0 to 3 entries")?;
        check(self.layer_dims.iter().all(|&d| d >= 1), "layer_dims", "entries ≥ 1")?;
        check(self.neighbor_cap >= 1, "neighbor_cap", "≥ 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", "> 0")?;
        check(self.l2 >= 0.0 && self.l2.is_finite(), "l2", "≥ 0")?;
        check((0.0..1.0).contains(&self.dropout), "dropout", "[0, 1)")?;
        check(self.batch_size >= 1, "batch_size", "≥ 1")?;
        check(self.epochs >= 1, "epochs", "≥ 1")?;
        check(self.leaky_slope > 0.0 && self.leaky_slope < 1.0, "leaky_slope", "(0, 1)")?;
        check(self.kg_margin.is_finite(), "kg_margin", "finite")?;
        Ok(())
    }

    /// Fully resolved config as `key=value` lines.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for key in MODEL_KEYS {
            let _ = writeln!(s, "{key}={}", self.get(key).unwrap_or_default());
        }
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped. The result is validated.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in kv_lines(text)? {
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn kv_lines(text: &str) -> Result<Vec<(&str, &str)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("line {} is not key=value", n + 1)))?;
        out.push((k.trim(), v.trim()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dim_and_lr() {
        let c = ModelConfig::from_kv_text("dim=64\nlr=0.001").unwrap();
        assert_eq!(c.dim, 64);
        assert_eq!(c.lr, 0.001);
    }

    #[test]
    fn bad_value_names_key() {
        let err = ModelConfig::from_kv_text("dim=banana").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "dim"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            ModelConfig::from_kv_text("dimension=4"),
            Err(Error::Config { key, .. }) if key == "dimension"
        ));
    }

    #[test]
    fn range_errors_name_key() {
        for (text, key) in [
            ("dropout=1.0", "dropout"),
            ("layer_dims=4,4,4,4", "layer_dims"),
            ("lr=0", "lr"),
            ("leaky_slope=1.5", "leaky_slope"),
            ("precision=16", "precision"),
        ] {
            match ModelConfig::from_kv_text(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = ModelConfig::default();
        c.lr = 0.1 + 0.2;
        c.layer_dims = alloc::vec![];
        c.attention = AttentionMode::Uniform;
        c.precision = Precision::F64;
        c.seed = u64::MAX;
        let back = ModelConfig::from_kv_text(&c.to_kv_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.lr.to_bits(), c.lr.to_bits());
    }

    #[test]
    fn widths() {
        let c = ModelConfig {
            dim: 4,
            layer_dims: alloc::vec![4, 4],
            ..Default::default()
        };
        assert_eq!(c.concat_width(), 12);
        assert_eq!(c.layer_width(0), 4);
        assert_eq!(c.depth(), 2);
    }
}
