//! Route random latents through a growing expert pool, then add an expert
//! once every slot is unlocked.

use motion_forge::router::{load_balance_loss, ExpertPool, RouterConfig, RouterState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> motion_forge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let latent = 16;
    let mut pool = ExpertPool::random(&[latent, 32, 29], 4, 6, &mut rng)?;
    let mut router = RouterState::linear_gate(latent, 4, RouterConfig::default(), &mut rng)?;

    let mut history = Vec::new();
    for level in 1..=4 {
        while pool.unlocked_count() < level {
            pool.promote()?;
        }
        for _ in 0..200 {
            let z: Vec<f64> = (0..latent).map(|_| rng.sample(StandardNormal)).collect();
            let logits = router.step(&z, &pool)?;
            let out = router.hard_bias_route(&z, &logits, level, level, &mut rng, &pool)?;
            history.push(out.weights[..4].to_vec());
        }
        println!("level {level}: {} experts unlocked, candidates {:?}", pool.unlocked_count(), router.candidates);
    }
    println!("load-balance loss {:.3}", load_balance_loss(&history)?);

    let source = pool.unlocked_count() - 1;
    let j = router.add_expert(&mut pool, source)?;
    println!("added expert {j}; pool now {} / {}", pool.len(), pool.capacity());
    Ok(())
}
