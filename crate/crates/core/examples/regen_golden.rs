//! Rewrites the constractd golden plan and transcript under fixtures/golden.
//!
//! Run with `cargo run -p inquiry-core --example regen_golden`, then audit
//! the diff by hand.

use std::path::Path;
use std::sync::Arc;

use inquiry_core::codec::canonical_pretty;
use inquiry_core::detection::AttemptContext;
use inquiry_core::runtime::policy::Scripted;
use inquiry_core::runtime::{run_headless, transcript_jsonl};
use inquiry_core::Engine;

fn main() -> inquiry_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden");
    let engine = Engine::offline();
    let ctx = AttemptContext::new("constractd", "constructed", "I like how the art of constractd.");
    let plan = Arc::new(engine.plan(&ctx)?);
    let mut script = Scripted::load(&dir.join("constractd.script.jsonl"))?;
    let session = run_headless(plan.clone(), &mut script, &engine.provider, "scenario")?;
    std::fs::write(dir.join("constractd.plan.json"), canonical_pretty(&*plan)).unwrap();
    std::fs::write(dir.join("constractd.transcript.jsonl"), transcript_jsonl(&session.transcript)).unwrap();
    println!("plan {} with {} events", plan.plan_id, session.transcript.len());
    Ok(())
}
