//! Record every model reply to a JSONL store, then answer the same calls from
//! the store alone. A call the store has never seen is an error, not a silent
//! fallback.
//!
//!     cargo run --example record_replay

use std::sync::Arc;

use userdrift::respondent::{CallKey, ChatModel, Message, ReplayModel, ReplayStore, TrialSeed};
use userdrift::{Arm, Result};

/// Stand-in for a real endpoint: echoes how long the prompt was.
struct Echo;

impl ChatModel for Echo {
    fn complete(&self, messages: &[Message], _: &CallKey) -> Result<String> {
        Ok(format!("reply to {} chars", messages.iter().map(|m| m.content.len()).sum::<usize>()))
    }
}

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("userdrift-record-replay");
    let path = dir.join("replies.jsonl");
    let _ = std::fs::remove_file(&path);

    let call = |persona: &str, trial| CallKey::new(TrialSeed::cell(7, persona, 0, Arm::Treatment, trial).with_question("Y"), "answer");
    let prompt = [Message::system("You are a survey respondent."), Message::user("Is this a priority?")];

    let recorder = ReplayModel::recording(Arc::new(ReplayStore::open(&path)?), Arc::new(Echo));
    for t in 0..3 {
        println!("live   trial {t}: {}", recorder.complete(&prompt, &call("p0", t))?);
    }
    recorder.store().compact()?;
    println!("stored {} replies in {}", recorder.store().len(), path.display());

    let replay = ReplayModel::replay_only(Arc::new(ReplayStore::open(&path)?));
    for t in 0..3 {
        println!("replay trial {t}: {}", replay.complete(&prompt, &call("p0", t))?);
    }
    match replay.complete(&prompt, &call("p1", 0)) {
        Ok(_) => println!("unexpected hit"),
        Err(e) => println!("unseen call -> {} (exit code {})", e, e.exit_code()),
    }
    Ok(())
}
