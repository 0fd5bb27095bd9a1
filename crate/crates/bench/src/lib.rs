//! Shared inputs for the benchmarks.

use tiediv::experiments::{synth_generate, SynthConfig, SynthData};

/// Deterministic count vectors shaped like hourly encounter vectors.
pub fn count_vectors(n: usize, bins: usize) -> Vec<Vec<u64>> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    (0..n)
        .map(|_| {
            (0..bins)
                .map(|_| {
                    // xorshift64
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    if state.is_multiple_of(3) {
                        state % 20
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn synthetic(pairs_per_archetype: usize) -> SynthData {
    synth_generate(&SynthConfig {
        pairs_per_archetype,
        ..Default::default()
    })
    .expect("valid config")
}
