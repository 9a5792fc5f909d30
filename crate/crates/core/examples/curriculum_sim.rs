//! Run the adaptive curriculum on a synthetic corpus with one file that never
//! improves, and print the events it triggers.

use motion_forge::curriculum::{run_curriculum_sim, SamplerConfig, SynthFile, SyntheticCorpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> motion_forge::Result<()> {
    let mut files: Vec<SynthFile> = (0..30)
        .map(|k| SynthFile {
            id: format!("clip{k:02}"),
            level: 1 + (k % 5) as u8,
            initial_error: 0.12,
            final_error: 0.02,
            decay_exposures: 800.0,
        })
        .collect();
    files.push(SynthFile { id: "stuck".into(), level: 1, initial_error: 0.4, final_error: 0.4, decay_exposures: 1.0 });
    let mut corpus = SyntheticCorpus::new(files)?;
    let records = corpus.records()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = run_curriculum_sim(records, &mut corpus, &SamplerConfig::default(), 40_000, 32, &mut rng)?;

    for e in &trace.events {
        println!("{e:?}");
    }
    println!("final level {}", trace.final_level);
    let last = trace.rows.last().expect("at least one row");
    println!("active {} frozen {} dropped {}", last.active, last.frozen, last.dropped);
    Ok(())
}
