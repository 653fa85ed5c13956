//! Regenerate the bundled demonstration corpus.
//!
//! Usage: make_synthetic <output-dir> [seed]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/synthetic".into()));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(&dir)?;
    let (train, target) = stylo::synth::demo_corpora(seed);
    train.write_manifest(BufWriter::new(File::create(dir.join("manifest.jsonl"))?))?;
    target.write_manifest(BufWriter::new(File::create(dir.join("target.jsonl"))?))?;
    Ok(())
}
