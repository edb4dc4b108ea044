// Loop-by-loop propagation used as an independent oracle: every product is
// written out over full matrices, softmax is computed directly from exp.

use kgatax_core::config::AttentionMode;
use kgatax_core::{CollaborativeKG, EntityId, ModelParameters};

pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), rows * cols);
    assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| (0..cols).map(|c| w[r * cols + c] * x[c]).sum())
        .collect()
}

/// Layer-0 rows: entity ⊙ mean(token rows) where tokens exist.
pub fn base(params: &ModelParameters<f64>, tokens: &[(usize, Vec<usize>)]) -> Vec<Vec<f64>> {
    let e = &params.embed.entity;
    let mut out: Vec<Vec<f64>> = (0..e.rows()).map(|r| e.row(r).to_vec()).collect();
    for (h, toks) in tokens {
        if toks.is_empty() {
            continue;
        }
        for c in 0..e.cols() {
            let mean = toks.iter().map(|&t| e.get(t, c)).sum::<f64>() / toks.len() as f64;
            out[*h][c] = e.get(*h, c) * mean;
        }
    }
    out
}

/// All layers 0..L for full neighborhoods, no dropout.
pub fn propagate(
    params: &ModelParameters<f64>,
    g: &CollaborativeKG,
    layer0: Vec<Vec<f64>>,
    mode: AttentionMode,
    slope: f64,
) -> Vec<Vec<Vec<f64>>> {
    let rel = &params.embed.relation;
    let mut reps = vec![layer0];
    for layer in &params.layers {
        let x = reps.last().unwrap();
        let d_in = layer.w1.rows();
        let w1_cols = layer.w1.cols();
        let mut next = Vec::new();
        for h in 0..g.entity_count() {
            let hood = g.neighborhood(EntityId(h as u32));
            let zs: Vec<Vec<f64>> = hood
                .iter()
                .map(|t| {
                    let mut cat = x[t.head.index()].clone();
                    cat.extend_from_slice(rel.row(t.relation.index()));
                    cat.extend_from_slice(&x[t.tail.index()]);
                    matvec(layer.w1.as_slice(), d_in, w1_cols, &cat)
                })
                .collect();
            let mut agg = vec![0.0; d_in];
            if !zs.is_empty() {
                let weights: Vec<f64> = match mode {
                    AttentionMode::Uniform => vec![1.0 / zs.len() as f64; zs.len()],
                    AttentionMode::Learned => {
                        let logits: Vec<f64> = zs
                            .iter()
                            .map(|z| leaky(matvec(layer.w2.as_slice(), 1, d_in, z)[0], slope))
                            .collect();
                        let denom: f64 = logits.iter().map(|l| l.exp()).sum();
                        logits.iter().map(|l| l.exp() / denom).collect()
                    }
                };
                for (w, z) in weights.iter().zip(&zs) {
                    for c in 0..d_in {
                        agg[c] += w * z[c];
                    }
                }
            }
            let mut cat = x[h].clone();
            cat.extend_from_slice(&agg);
            let pre = matvec(layer.w_agg.as_slice(), layer.w_agg.rows(), layer.w_agg.cols(), &cat);
            next.push(pre.into_iter().map(|v| leaky(v, slope)).collect());
        }
        reps.push(next);
    }
    reps
}
