//! Oversample rare action tags and mirror part of the extra copies.

use motion_forge::generation::{asfo_multipliers, build_epoch_plan, TagCatalog, TaggedSample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> motion_forge::Result<()> {
    let mut samples = Vec::new();
    for i in 0..40 {
        samples.push(TaggedSample { id: format!("walk{i}"), tags: vec!["walk".into()] });
    }
    for i in 0..3 {
        samples.push(TaggedSample { id: format!("kick{i}"), tags: vec!["left_kick".into(), "walk".into()] });
    }
    samples.push(TaggedSample { id: "flip".into(), tags: vec!["backflip".into()] });

    let catalog = TagCatalog::from_samples(&samples);
    for (tag, r) in asfo_multipliers(&catalog)? {
        println!("{tag:<10} x{r}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let plan = build_epoch_plan(&samples, &catalog, &mut rng)?;
    let mirrored = plan.iter().filter(|e| e.mirrored).count();
    println!("{} samples -> {} plan entries, {mirrored} mirrored", samples.len(), plan.len());
    if let Some(e) = plan.iter().find(|e| e.mirrored) {
        println!("mirrored {} tags {:?}", e.sample_id, e.tags);
    }
    Ok(())
}
