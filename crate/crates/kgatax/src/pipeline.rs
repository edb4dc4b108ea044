//! Precision dispatch around the core training entry points.

use kgatax_core::eval::mf_baseline_train;
use kgatax_core::train::{train, EpochLog};
use kgatax_core::{ModelConfig, Precision};

use crate::dataset::DataBundle;
use crate::error::Result;
use crate::persist::AnyModel;

pub fn train_any(
    bundle: &DataBundle,
    config: &ModelConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(AnyModel, Vec<EpochLog>)> {
    let g = bundle.graph(config)?;
    Ok(match config.precision {
        Precision::F32 => {
            let (m, logs) = train::<f32>(&bundle.data, &g, &bundle.aux, &bundle.layout, config, on_epoch)?;
            (AnyModel::F32(m), logs)
        }
        Precision::F64 => {
            let (m, logs) = train::<f64>(&bundle.data, &g, &bundle.aux, &bundle.layout, config, on_epoch)?;
            (AnyModel::F64(m), logs)
        }
    })
}

pub fn mf_any(bundle: &DataBundle, config: &ModelConfig) -> Result<(AnyModel, Vec<EpochLog>)> {
    Ok(match config.precision {
        Precision::F32 => {
            let (m, logs) = mf_baseline_train::<f32>(&bundle.data, &bundle.layout, config)?;
            (AnyModel::F32(m), logs)
        }
        Precision::F64 => {
            let (m, logs) = mf_baseline_train::<f64>(&bundle.data, &bundle.layout, config)?;
            (AnyModel::F64(m), logs)
        }
    })
}
