//! Survey run against a live OpenAI-compatible endpoint, recording every
//! reply so the run can be replayed offline with `--backend replay`.
//!
//! Needs USERDRIFT_BASE_URL (e.g. http://localhost:8000/v1) and
//! USERDRIFT_MODEL; the API key, if any, is read from OPENAI_API_KEY.
//!
//!     USERDRIFT_BASE_URL=... USERDRIFT_MODEL=... cargo run --release --example llm_survey

use std::path::PathBuf;

use userdrift::harness::{self, LoadedConfig};

fn main() -> userdrift::Result<()> {
    let (Ok(url), Ok(model)) = (std::env::var("USERDRIFT_BASE_URL"), std::env::var("USERDRIFT_MODEL")) else {
        eprintln!("set USERDRIFT_BASE_URL and USERDRIFT_MODEL to run against a live endpoint");
        return Ok(());
    };
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/opinionqa_llm.json");
    let mut loaded = LoadedConfig::load(&path)?;
    if let Some(llm) = loaded.config.llm.as_mut() {
        llm.user.base_url = url;
        llm.user.model = model;
    }
    let out = loaded.output_dir();
    let summary = harness::run(loaded, false)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("records and replay store in {}", out.display());
    Ok(())
}
