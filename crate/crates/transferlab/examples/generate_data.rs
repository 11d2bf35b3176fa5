//! Regenerate the shipped data assets (corpus, lexicons, embeddings)
//! under `data/`. The generator is fully seeded, so running this twice
//! produces identical bytes.

use std::path::PathBuf;

use transferlab::synth::{write_assets, SynthConfig};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    let cfg = SynthConfig::default();
    write_assets(&cfg, &out).expect("asset generation failed");
    println!("assets written to {}", out.display());
}
