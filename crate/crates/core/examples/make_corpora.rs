//! Regenerates the example corpora under `corpora/`.
//!
//! `cargo run -p familia --example make_corpora -- <output dir>`

use std::fs;
use std::path::PathBuf;

use familia::synth::{generate, Organization, SynthConfig};

fn main() -> std::io::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpora".into()));
    let base = SynthConfig { blobs_per_doc: 40, ..SynthConfig::new(200, 5, 200, 1) };
    let sets = [
        ("lda", base.clone(), Organization::Lda),
        ("sentence_lda", SynthConfig { blobs_per_doc: 10, items_per_blob: 5, seed: 2, ..base.clone() }, Organization::SentenceLda),
        (
            "tot",
            SynthConfig { seed: 3, ..base.clone() },
            Organization::Tot { time_params: vec![(2.0, 18.0), (6.0, 14.0), (10.0, 10.0), (14.0, 6.0), (18.0, 2.0)] },
        ),
        (
            "slda",
            SynthConfig { seed: 4, num_docs: 300, ..base },
            Organization::Slda { eta: vec![1.0, -1.0, 0.0, 0.0, 0.0], noise_sd: 0.1 },
        ),
    ];
    for (name, cfg, org) in sets {
        let dir = root.join(name);
        fs::create_dir_all(&dir)?;
        let synth = generate(&cfg, &org);
        fs::write(dir.join("schema.txt"), &synth.schema_text)?;
        fs::write(dir.join("corpus.txt"), &synth.corpus_text)?;
        println!("{}: {} documents", dir.display(), cfg.num_docs);
    }
    Ok(())
}
