//! Token-level parameter mixing: every text token gates its own mixture of
//! experts, which updates the motion frames it attends to.

use motion_forge::generation::{generator_balance_loss, tpmoe_apply, tpmoe_gate, AttentionPool, TpMoeParams};
use motion_forge::router::softmax;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> motion_forge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (frames, words, d, k) = (24, 5, 16, 6);
    let params = TpMoeParams::random(k, d, 32, d, 24, &mut rng)?;
    let pool = AttentionPool::random(d, 4, &mut rng)?;

    let text = Array2::from_shape_fn((words, d), |(w, c)| ((w * d + c) as f64 * 0.41).cos());
    let memory = pool.forward(text.view())?.memory;
    let x = Array2::from_shape_fn((frames, d), |(t, c)| ((t * d + c) as f64 * 0.21).sin());

    // scaled dot-product attention of motion frames over the memory tokens
    let scores = x.dot(&memory.t()) / (d as f64).sqrt();
    let mut attention = Array2::zeros(scores.dim());
    for (t, row) in scores.outer_iter().enumerate() {
        for (j, p) in softmax(&row.to_vec(), 1.0).into_iter().enumerate() {
            attention[[t, j]] = p;
        }
    }
    let (dx, _) = tpmoe_apply(x.view(), memory.view(), attention.view(), &params)?;
    println!("update {:?}, max |dx| {:.3}", dx.dim(), dx.iter().map(|v| v.abs()).fold(0.0, f64::max));

    let mut means = vec![0.0; k];
    for (j, tok) in memory.outer_iter().enumerate() {
        let g = tpmoe_gate(&tok.to_vec(), &params)?;
        let top = g.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        println!("token {j}: top expert {top} ({:.2})", g[top]);
        means.iter_mut().zip(&g).for_each(|(m, v)| *m += v / memory.nrows() as f64);
    }
    println!("balance loss {:.4}", generator_balance_loss(&means));
    Ok(())
}
