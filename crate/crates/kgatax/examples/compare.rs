//! Full model vs. MF-BPR vs. popularity on the synthetic attribute dataset.
//!
//! ```text
//! cargo run --release -p kgatax --example compare -- [key=value ...]
//! ```

use kgatax::dataset::DataBundle;
use kgatax::parallel::evaluate_parallel;
use kgatax::pipeline::{mf_any, train_any};
use kgatax::run_config::{parse_override, RunConfig};
use kgatax::synth::{generate, SynthSpec};
use kgatax_core::eval::{Popularity, Split};

fn main() -> kgatax::Result<()> {
    let overrides = std::env::args()
        .skip(1)
        .map(|a| parse_override(&a))
        .collect::<kgatax::Result<Vec<_>>>()?;
    let rc = RunConfig::parse(None, &overrides)?;
    let ks = [10, 20];
    let mut sums = [0.0f64; 6];
    let seeds = [1u64, 2, 3];
    for &seed in &seeds {
        let cfg = kgatax_core::ModelConfig { seed, ..rc.model.clone() };
        let bundle = DataBundle::assemble(generate(&SynthSpec::default(), seed).raw()?, seed)?;
        let (full, _) = train_any(&bundle, &cfg, &mut |_| {})?;
        let (mf, _) = mf_any(&bundle, &cfg)?;
        let pop = Popularity::fit(&bundle.data);
        let r_full = evaluate_parallel(&full, &bundle.data, Split::Test, &ks, None)?;
        let r_mf = evaluate_parallel(&mf, &bundle.data, Split::Test, &ks, None)?;
        let r_pop = evaluate_parallel(&pop, &bundle.data, Split::Test, &ks, None)?;
        println!(
            "seed {seed}: recall@10 full {:.4} mf {:.4} pop {:.4} | auc full {:.4} mf {:.4} pop {:.4}",
            r_full.mean_recall[0], r_mf.mean_recall[0], r_pop.mean_recall[0], r_full.mean_auc, r_mf.mean_auc, r_pop.mean_auc
        );
        for (s, v) in sums.iter_mut().zip([
            r_full.mean_recall[0],
            r_mf.mean_recall[0],
            r_pop.mean_recall[0],
            r_full.mean_auc,
            r_mf.mean_auc,
            r_pop.mean_auc,
        ]) {
            *s += v / seeds.len() as f64;
        }
    }
    println!(
        "mean: recall@10 full {:.4} mf {:.4} pop {:.4} (+{:.1}% over MF) | auc full {:.4} mf {:.4} pop {:.4}",
        sums[0],
        sums[1],
        sums[2],
        100.0 * (sums[0] / sums[1] - 1.0),
        sums[3],
        sums[4],
        sums[5]
    );
    Ok(())
}
