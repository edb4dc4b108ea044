//! Flat `key=value` run configuration: every model key plus paths, K values
//! and grid axes. Later sources override earlier ones.

use std::path::{Path, PathBuf};

use kgatax_core::config::{kv_lines, parse_usize_list, MODEL_KEYS};
use kgatax_core::ModelConfig;

use crate::error::{AppError, Result};
use crate::report::MODEL_FILE;

pub const RUN_KEYS: &[&str] = &[
    "data_dir",
    "out",
    "model",
    "k",
    "eval_threads",
    "max_cells",
    "grid.batch_size",
    "grid.dim",
    "grid.lr",
    "grid.neighbor_cap",
    "grid.depth",
];

pub const DEFAULT_KS: &[usize] = &[10, 20];
pub const DEFAULT_MAX_CELLS: usize = 64;

/// Swept values per hyperparameter; `None` means "not swept".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridAxes {
    pub batch_size: Option<Vec<usize>>,
    pub dim: Option<Vec<usize>>,
    pub lr: Option<Vec<f64>>,
    pub neighbor_cap: Option<Vec<usize>>,
    /// Propagation depth H.
    pub depth: Option<Vec<usize>>,
}

impl GridAxes {
    /// The default search ranges.
    pub fn full() -> Self {
        Self {
            batch_size: Some(vec![128, 256, 512, 1024]),
            dim: Some(vec![8, 16, 32, 64]),
            lr: Some(vec![1e-6, 1e-5, 1e-4, 1e-3]),
            neighbor_cap: Some(vec![10, 20, 25, 50]),
            depth: Some(vec![1, 2, 3]),
        }
    }

    pub fn is_unset(&self) -> bool {
        *self == Self::default()
    }

    /// With no axis configured, all default ranges; otherwise only the
    /// configured axes.
    pub fn effective(&self) -> Self {
        if self.is_unset() {
            Self::full()
        } else {
            self.clone()
        }
    }

    pub fn cell_count(&self) -> usize {
        fn len<T>(a: &Option<Vec<T>>) -> usize {
            a.as_ref().map_or(1, Vec::len)
        }
        len(&self.batch_size) * len(&self.dim) * len(&self.lr) * len(&self.neighbor_cap) * len(&self.depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub data_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub model_path: Option<PathBuf>,
    pub ks: Vec<usize>,
    pub eval_threads: Option<usize>,
    pub max_cells: usize,
    pub grid: GridAxes,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            data_dir: None,
            out: PathBuf::from("out"),
            model_path: None,
            ks: DEFAULT_KS.to_vec(),
            eval_threads: None,
            max_cells: DEFAULT_MAX_CELLS,
            grid: GridAxes::default(),
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> AppError {
    AppError::Config(format!("`{key}`: {msg}"))
}

fn positive_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = parse_usize_list(key, value)?;
    if v.is_empty() || v.contains(&0) {
        return Err(bad(key, "expected a non-empty list of integers ≥ 1"));
    }
    Ok(v)
}

fn real_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = value
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad(key, format!("cannot parse `{p}` as a real"))))
        .collect::<Result<_>>()?;
    if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(bad(key, "expected a non-empty list of reals > 0"));
    }
    Ok(v)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "model" => self.model_path = Some(PathBuf::from(v)),
            "k" => self.ks = positive_list(key, v)?,
            "eval_threads" => {
                let n: usize = v.parse().map_err(|_| bad(key, "expected an integer ≥ 1"))?;
                if n == 0 {
                    return Err(bad(key, "expected an integer ≥ 1"));
                }
                self.eval_threads = Some(n);
            }
            "max_cells" => {
                self.max_cells = v.parse().map_err(|_| bad(key, "expected an integer ≥ 1"))?;
                if self.max_cells == 0 {
                    return Err(bad(key, "expected an integer ≥ 1"));
                }
            }
            "grid.batch_size" => self.grid.batch_size = Some(positive_list(key, v)?),
            "grid.dim" => self.grid.dim = Some(positive_list(key, v)?),
            "grid.lr" => self.grid.lr = Some(real_list(key, v)?),
            "grid.neighbor_cap" => self.grid.neighbor_cap = Some(positive_list(key, v)?),
            "grid.depth" => {
                let d = parse_usize_list(key, v)?;
                if d.is_empty() || d.iter().any(|&h| h > 3) {
                    return Err(bad(key, "expected a non-empty list of depths in 0..=3"));
                }
                self.grid.depth = Some(d);
            }
            _ if MODEL_KEYS.contains(&key) => self.model.set(key, v)?,
            _ => {
                return Err(AppError::Config(format!(
                    "unknown key `{key}`; known keys: {}, {}",
                    MODEL_KEYS.join(", "),
                    RUN_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies the config file text, then each override in order, then
    /// validates.
    pub fn parse(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut rc = Self::default();
        if let Some(text) = file_text {
            for (k, v) in kv_lines(text)? {
                rc.set(k, v)?;
            }
        }
        for (k, v) in overrides {
            rc.set(k, v)?;
        }
        rc.model.validate()?;
        Ok(rc)
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| AppError::Config("missing required path `data_dir` (use --data-dir)".into()))
    }

    pub fn model_file(&self) -> PathBuf {
        self.model_path.clone().unwrap_or_else(|| self.out.join(MODEL_FILE))
    }
}

/// Splits `key=value` for command-line overrides.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| AppError::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}
