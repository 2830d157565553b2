//! Writes a small synthetic fixture set for trying out the CLI.
//!
//! ```text
//! cargo run -p refocus --example make_fixtures -- /tmp/refocus-demo
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refocus::io::docs::{PolicyDoc, TraceDoc, TraceStepDoc, TRACE_SCHEMA};
use refocus::io::{write_emb1, DistributionDoc, OutcomesDoc};
use refocus::{ChainOutcome, EmbeddingMatrix};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> EmbeddingMatrix<f32> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(rows, cols, data).expect("finite data")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()).into();
    let trace_dir = out.join("trace");
    std::fs::create_dir_all(&trace_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let (n, d, t) = (64, 32, 12);
    write_emb1(out.join("visual.emb"), &random_matrix(&mut rng, n, d))?;
    write_emb1(out.join("text.emb"), &random_matrix(&mut rng, t, d))?;

    write_emb1(trace_dir.join("visual.emb"), &random_matrix(&mut rng, n, d))?;
    let mut steps = Vec::new();
    for (k, h) in [1.2, 0.8, 0.1].into_iter().enumerate() {
        let name = format!("step{}.emb", k + 1);
        write_emb1(trace_dir.join(&name), &random_matrix(&mut rng, t, d))?;
        steps.push(TraceStepDoc {
            text: name,
            selected: Vec::new(),
            entropy: h,
            distribution: None,
        });
    }
    TraceDoc {
        schema_id: TRACE_SCHEMA.into(),
        visual: "visual.emb".into(),
        steps,
        final_answer: "B".into(),
    }
    .save_dir(&trace_dir)?;
    PolicyDoc::default().save(out.join("policy.json"))?;

    let probs = BTreeMap::from([("A".to_string(), 0.7), ("B".to_string(), 0.2), ("C".to_string(), 0.1)]);
    DistributionDoc::exact(probs).save(out.join("dist.json"))?;

    let outcomes: Vec<ChainOutcome> = (0..16)
        .map(|i| {
            let answer = ["A", "B", "B", "C"][rng.random_range(0..4)];
            ChainOutcome::new(i, answer, rng.random_range(200..900))
        })
        .collect();
    OutcomesDoc::new(&outcomes).save(out.join("outcomes.json"))?;

    println!("wrote fixtures to {}", out.display());
    Ok(())
}
