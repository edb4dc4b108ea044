//! Cartesian hyperparameter sweep scored by validation Recall@20.

use std::fmt::Write as _;

use kgatax_core::rng::{derive, Stream};
use kgatax_core::ModelConfig;
use rayon::prelude::*;

use crate::dataset::DataBundle;
use crate::error::{AppError, Result};
use crate::pipeline::train_any;
use crate::report::config_comment;
use crate::run_config::GridAxes;

/// Layer widths for depth `h` starting from `dim`: halving per layer, at
/// least 1.
pub fn depth_dims(dim: usize, h: usize) -> Vec<usize> {
    (1..=h).map(|l| (dim >> l).max(1)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub config: ModelConfig,
}

/// Cells in row-major order over (batch_size, dim, lr, neighbor_cap, depth).
/// Each cell trains with its own seed derived from the base seed and its
/// index.
pub fn grid_cells(base: &ModelConfig, axes: &GridAxes) -> Vec<GridCell> {
    let or = |a: &Option<Vec<usize>>, v: usize| a.clone().unwrap_or_else(|| vec![v]);
    let batches = or(&axes.batch_size, base.batch_size);
    let dims = or(&axes.dim, base.dim);
    let lrs = axes.lr.clone().unwrap_or_else(|| vec![base.lr]);
    let caps = or(&axes.neighbor_cap, base.neighbor_cap);
    let depths: Vec<Option<usize>> = match &axes.depth {
        Some(d) => d.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &batch_size in &batches {
        for &dim in &dims {
            for &lr in &lrs {
                for &neighbor_cap in &caps {
                    for &depth in &depths {
                        let index = cells.len();
                        let layer_dims = match depth {
                            Some(h) => depth_dims(dim, h),
                            None if axes.dim.is_some() => depth_dims(dim, base.depth()),
                            None => base.layer_dims.clone(),
                        };
                        cells.push(GridCell {
                            index,
                            config: ModelConfig {
                                batch_size,
                                dim,
                                lr,
                                neighbor_cap,
                                layer_dims,
                                seed: derive(base.seed, Stream::GridCell, &[index as u64]),
                                ..base.clone()
                            },
                        });
                    }
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cell: GridCell,
    /// Best validation Recall@20 over the cell's epochs; NaN if the cell
    /// failed or had no validation users.
    pub val_recall: f64,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best: Option<usize>,
}

/// Argmax of validation recall; ties go to the lower learning rate, then the
/// lower cell index.
pub fn best_cell(rows: &[GridRow]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.val_recall.is_finite())
        .min_by(|(_, a), (_, b)| {
            b.val_recall
                .total_cmp(&a.val_recall)
                .then(a.cell.config.lr.total_cmp(&b.cell.config.lr))
                .then(a.cell.index.cmp(&b.cell.index))
        })
        .map(|(i, _)| i)
}

fn run_cell(bundle: &DataBundle, cell: GridCell) -> GridRow {
    match train_any(bundle, &cell.config, &mut |_| {}) {
        Ok((_, logs)) => {
            let best = logs
                .iter()
                .filter(|l| l.val_recall.is_finite())
                .min_by(|a, b| b.val_recall.total_cmp(&a.val_recall).then(a.epoch.cmp(&b.epoch)));
            GridRow {
                val_recall: best.map_or(f64::NAN, |l| l.val_recall),
                best_epoch: best.map(|l| l.epoch),
                epochs_run: logs.len(),
                status: "ok".into(),
                cell,
            }
        }
        Err(e) => GridRow {
            val_recall: f64::NAN,
            best_epoch: None,
            epochs_run: 0,
            status: format!("error: {e}").replace(',', ";"),
            cell,
        },
    }
}

/// Runs every cell, in parallel across cells. Refuses sweeps larger than
/// `max_cells`.
pub fn run_grid(bundle: &DataBundle, base: &ModelConfig, axes: &GridAxes, max_cells: usize) -> Result<GridResult> {
    let count = axes.cell_count();
    if count > max_cells {
        return Err(AppError::Config(format!(
            "grid has {count} cells, more than max_cells={max_cells}; narrow the grid.* axes or raise --max-cells"
        )));
    }
    let rows: Vec<GridRow> = grid_cells(base, axes)
        .into_par_iter()
        .map(|cell| run_cell(bundle, cell))
        .collect();
    let best = best_cell(&rows);
    Ok(GridResult { rows, best })
}

pub const GRID_HEADER: &str =
    "cell,seed,batch_size,dim,lr,neighbor_cap,layer_dims,val_recall@20,best_epoch,epochs_run,status,best";

pub fn grid_csv(base: &ModelConfig, result: &GridResult) -> String {
    let mut s = config_comment(base);
    s.push_str(GRID_HEADER);
    s.push('\n');
    for (i, r) in result.rows.iter().enumerate() {
        let c = &r.cell.config;
        let dims: Vec<String> = c.layer_dims.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell.index,
            c.seed,
            c.batch_size,
            c.dim,
            c.lr,
            c.neighbor_cap,
            if dims.is_empty() { "none".into() } else { dims.join(";") },
            r.val_recall,
            r.best_epoch.map_or(String::new(), |e| e.to_string()),
            r.epochs_run,
            r.status,
            if result.best == Some(i) { "*" } else { "" },
        );
    }
    s
}
