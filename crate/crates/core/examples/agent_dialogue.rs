//! Agent-dialogue scenario: a book recommender biased per arm talks with the
//! simulated user for a few rounds, then each post-dialogue question is asked
//! on its own branch of that shared transcript.
//!
//!     cargo run --example agent_dialogue

use std::sync::Arc;

use userdrift::population::{AugmentedPersona, Persona, QuestionBank};
use userdrift::respondent::{CallKey, ChatModel, LlmRespondent, Message, Respondent, Scenario, TrialSeed};
use userdrift::{assets, Arm, Result};

/// Scripted stand-in for both sides of the conversation.
struct Scripted;

impl ChatModel for Scripted {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        let last = &messages.last().expect("non-empty").content;
        Ok(match call.label.as_str() {
            l if l.starts_with("dialogue/agent") => format!("(agent, arm {}) Let me tell you about this book.", call.seed.arm),
            l if l.starts_with("dialogue/user") => "Interesting, tell me more.".into(),
            _ if last.contains("Answer with one of") => "3".into(),
            _ => "Yes".into(),
        })
    }
}

fn main() -> Result<()> {
    let bank = QuestionBank::from_json(assets::BOOK_BANK)?.with_title("There There");
    let scenario = Scenario::book("There There", "Tommy Orange");
    let chat: Arc<dyn ChatModel> = Arc::new(Scripted);
    let respondent = LlmRespondent::new(chat.clone(), Some(chat));
    let persona = AugmentedPersona::new(Persona::new("reader", [("age", "34"), ("sex", "Female")])?);

    for arm in Arm::BOTH {
        let session = respondent.open_session(&persona, arm, &scenario, TrialSeed::cell(1, "reader", 0, arm, 0))?;
        println!("=== arm {arm:?} ===");
        if let Some(t) = &session.transcript {
            println!("user : {}", t.opening);
            for turn in &t.turns {
                println!("{:<5}: {}", format!("{:?}", turn.speaker).to_lowercase(), turn.text);
            }
        }
        for q in std::iter::once(&bank.outcome).chain(bank.negative_controls.iter().take(2)) {
            let raw = respondent.ask(&session, q)?;
            println!("  [{}] -> {raw}", q.id);
        }
    }
    Ok(())
}
