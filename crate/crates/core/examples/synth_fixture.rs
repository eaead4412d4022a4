//! Writes a synthetic reference corpus and one model's hypotheses.
//!
//! ```text
//! cargo run -p fairaudit-core --example synth_fixture -- <out-dir> [seed] [male-error-multiplier]
//! ```

use std::path::PathBuf;

use fairaudit_core::synth::{simulate_asr, AsrSimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().ok_or("usage: synth_fixture <out-dir> [seed] [multiplier]")?);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let multiplier: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1.0);

    let mut config = AsrSimConfig::default();
    if multiplier != 1.0 {
        config = config.with_gender_disparity("male", multiplier);
    }
    let sim = simulate_asr(&config, seed);
    std::fs::create_dir_all(&out)?;
    sim.corpus.save_csv(out.join("corpus.csv"))?;
    sim.transcripts.save(out.join("transcripts.csv"))?;
    println!("wrote {} utterances to {}", sim.corpus.len(), out.display());
    Ok(())
}
