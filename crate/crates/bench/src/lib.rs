//! Shared inputs for the criterion benchmarks.

use fairaudit_core::glmm::{build_design, Design, DesignSpec};
use fairaudit_core::synth::{simulate_glmm, GlmmSimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reference of `len` words over a 50-word vocabulary and a hypothesis
/// with roughly `error_rate` of its tokens edited.
pub fn token_pair(len: usize, error_rate: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference: Vec<u32> = (0..len).map(|_| rng.random_range(0..50)).collect();
    let mut hyp = Vec::with_capacity(len);
    for &t in &reference {
        if rng.random::<f64>() >= error_rate {
            hyp.push(t);
            continue;
        }
        match rng.random_range(0..3) {
            0 => hyp.push(rng.random_range(0..50)),
            1 => {}
            _ => {
                hyp.push(t);
                hyp.push(rng.random_range(0..50));
            }
        }
    }
    (reference, hyp)
}

/// The simulated two-level design used for GLMM timing.
pub fn glmm_design(n_speakers: usize, seed: u64) -> Design {
    let rows = simulate_glmm(
        &GlmmSimConfig {
            n_speakers,
            ..Default::default()
        },
        seed,
    );
    build_design(&rows, &DesignSpec::new("attr")).expect("simulated design is valid")
}
