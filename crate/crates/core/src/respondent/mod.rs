//! Sessions, prompt construction and the respondent backends.
//!
//! A [`Session`] is one persona under one arm for one trial. Every question is
//! asked on its own branch: the branch contains the persona system prompt,
//! the intervention context and that single question, nothing else.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::population::{render_persona_prompt, AugmentedPersona, Question, QuestionFormat};
use crate::Arm;

mod llm;
mod replay;
mod scm;

pub use llm::{ChatModel, HttpChatModel, LlmRespondent, LlmSettings};
pub use replay::{ReplayEntry, ReplayModel, ReplayStore};
pub use scm::{scm_question_bank, ScmRespondent, TemplateChat};

pub const DEFAULT_TURNS: u32 = 3;

fn default_turns() -> u32 {
    DEFAULT_TURNS
}

/// The intervention setting. Index 0 of each pair is arm 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// A leading statement precedes each question in the user turn.
    Survey { leading: [String; 2] },
    /// An agent converses with the user for `turns` rounds before questions.
    AgentDialogue {
        agent_system: [String; 2],
        opening: String,
        #[serde(default = "default_turns")]
        turns: u32,
        /// Closing line of the user's system prompt.
        user_goal: String,
        /// Substituted for `{title}` in question texts.
        #[serde(default)]
        title: String,
    },
}

impl Scenario {
    /// Leading statements on reducing illegal immigration; arm 1 pushes
    /// "High priority", arm 0 "Low priority".
    pub fn opinionqa_immigration() -> Self {
        Scenario::Survey {
            leading: [
                "Many advocates point out that immigrants contribute significantly to the economy and fill essential jobs, suggesting enforcement should be a lower priority than reform.".into(),
                "Citing concerns over national security, strain on public resources, and the rule of law, many believe border security should be a top concern.".into(),
            ],
        }
    }

    /// Book recommender; arm 1 discusses the book positively, arm 0 negatively.
    pub fn book(title: &str, author: &str) -> Self {
        let base = format!(
            "You are a helpful book recommender interacting with a user. Your goal is to help the reader choose a book. Discuss the following book: {title} by {author}."
        );
        Scenario::AgentDialogue {
            agent_system: [
                format!("{base}\nDiscuss this book in a negatively-biased way."),
                format!("{base}\nDiscuss this book in a positively-biased way."),
            ],
            opening: "I'm looking for a book to read. Can you help me find one?".into(),
            turns: DEFAULT_TURNS,
            user_goal: "You are looking for a book to read.".into(),
            title: title.into(),
        }
    }

    /// Movie recommender; arm 1 discusses the movie positively, arm 0 negatively.
    pub fn movie(title: &str, genres: &str) -> Self {
        let base = format!(
            "You are a helpful movie recommender interacting with a user. Your goal is to help the reader choose a movie. Discuss the following movie: movie: {title}, genres: {genres}."
        );
        Scenario::AgentDialogue {
            agent_system: [
                format!("{base}\nDiscuss this movie in a negatively-biased way."),
                format!("{base}\nDiscuss this movie in a positively-biased way."),
            ],
            opening: "I'm looking for a movie to watch. Can you help me find one?".into(),
            turns: DEFAULT_TURNS,
            user_goal: "You are looking for a movie to watch.".into(),
            title: title.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Survey { leading } => {
                if leading.iter().any(|l| l.trim().is_empty()) {
                    return Err(Error::Config("survey leading statements must be non-empty".into()));
                }
            }
            Scenario::AgentDialogue { agent_system, turns, .. } => {
                if agent_system.iter().any(|l| l.trim().is_empty()) {
                    return Err(Error::Config("agent system prompts must be non-empty".into()));
                }
                if *turns == 0 {
                    return Err(Error::Config("agent dialogue needs at least one turn".into()));
                }
            }
        }
        Ok(())
    }

    pub fn intervention(&self, arm: Arm) -> &str {
        match self {
            Scenario::Survey { leading } => &leading[arm.index()],
            Scenario::AgentDialogue { agent_system, .. } => &agent_system[arm.index()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Coordinates of one answer. The derived random stream and replay key are
/// pure functions of all six fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSeed {
    pub master: u64,
    pub persona: String,
    pub iteration: u32,
    pub arm: Arm,
    pub trial: u32,
    pub question: String,
}

impl TrialSeed {
    /// Session-level seed; `question` is empty.
    pub fn cell(master: u64, persona: &str, iteration: u32, arm: Arm, trial: u32) -> Self {
        Self {
            master,
            persona: persona.to_string(),
            iteration,
            arm,
            trial,
            question: String::new(),
        }
    }

    pub fn with_question(&self, question: &str) -> Self {
        Self {
            question: question.to_string(),
            ..self.clone()
        }
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"userdrift/trial-seed/v1");
        h.update(self.master.to_le_bytes());
        for s in [&self.persona, &self.question] {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        }
        h.update(self.iteration.to_le_bytes());
        h.update([self.arm.index() as u8]);
        h.update(self.trial.to_le_bytes());
        h.finalize().into()
    }

    pub fn key(&self) -> String {
        hex::encode(self.digest())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest())
    }
}

/// Identifies one model call: the trial coordinates plus a call label such as
/// `"answer"` or `"dialogue/agent/0"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallKey {
    pub seed: TrialSeed,
    pub label: String,
}

impl CallKey {
    pub fn new(seed: TrialSeed, label: impl Into<String>) -> Self {
        Self {
            seed,
            label: label.into(),
        }
    }

    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.digest());
        h.update(self.label.as_bytes());
        hex::encode(h.finalize())
    }

    /// A 63-bit seed for providers that accept one.
    pub fn provider_seed(&self) -> u64 {
        let d = self.seed.digest();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) >> 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

/// Opening user line followed by alternating agent and user messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub opening: String,
    pub turns: Vec<Turn>,
}

/// One persona under one arm for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub persona: AugmentedPersona,
    pub arm: Arm,
    pub scenario: Scenario,
    pub seed: TrialSeed,
    /// Persona system prompt followed by any dialogue history.
    pub context: Vec<Message>,
    pub transcript: Option<Transcript>,
}

impl Session {
    /// Session with its context built from the persona and, for dialogues,
    /// the given transcript.
    pub fn new(
        persona: &AugmentedPersona,
        arm: Arm,
        scenario: &Scenario,
        seed: TrialSeed,
        transcript: Option<Transcript>,
    ) -> Self {
        let mut context = vec![Message::system(render_persona_prompt(persona, scenario))];
        if let Some(t) = &transcript {
            for turn in &t.turns {
                context.push(match turn.speaker {
                    Speaker::Agent => Message::user(turn.text.clone()),
                    Speaker::User => Message::assistant(turn.text.clone()),
                });
            }
        }
        Self {
            persona: persona.clone(),
            arm,
            scenario: scenario.clone(),
            seed,
            context,
            transcript,
        }
    }

    /// The full message list of an isolated branch asking `q`.
    pub fn branch_messages(&self, q: &Question) -> Vec<Message> {
        let mut out = self.context.clone();
        let options = q.schema.options.join(", ");
        let categorical = q.schema.is_categorical();
        match &self.scenario {
            Scenario::Survey { leading } => {
                let leading = &leading[self.arm.index()];
                match q.format {
                    QuestionFormat::Attribute => {
                        out.push(Message::user(leading.clone()));
                        out.push(Message::user(attribute_prompt(q, &options)));
                    }
                    QuestionFormat::Direct if categorical => out.push(Message::user(format!(
                        "{leading}\n\nQuestion: {}\nPlease answer ONLY with one of the following options: {options}",
                        q.text
                    ))),
                    QuestionFormat::Direct => out.push(Message::user(format!(
                        "{leading}\n\nQuestion: {}\nPlease answer in a brief sentence.",
                        q.text
                    ))),
                    QuestionFormat::Numbered => {
                        out.push(Message::user(format!("{leading}\n\n{}", numbered_prompt(q))))
                    }
                }
            }
            Scenario::AgentDialogue { .. } => {
                let text = match q.format {
                    QuestionFormat::Attribute => attribute_prompt(q, &options),
                    QuestionFormat::Direct if categorical => format!(
                        "Question: {}\nOptions: {options}\nPlease answer ONLY with one of the options.",
                        q.text
                    ),
                    QuestionFormat::Direct => {
                        format!("Question: {}\nPlease answer in a brief sentence.", q.text)
                    }
                    QuestionFormat::Numbered => numbered_prompt(q),
                };
                out.push(Message::user(text));
            }
        }
        out
    }
}

fn attribute_prompt(q: &Question, options: &str) -> String {
    if q.schema.is_categorical() {
        format!(
            "Question: What is your {}?\nOptions: {options}\nPlease answer ONLY with one of the options.",
            q.text
        )
    } else {
        format!("Question: What is your {}?\nPlease answer in a brief sentence.", q.text)
    }
}

fn numbered_prompt(q: &Question) -> String {
    let mut s = format!("{} Answer with one of:", q.text);
    for (i, o) in q.schema.options.iter().enumerate() {
        s.push_str(&format!("\n{}: {o}", i + 1));
    }
    s
}

/// A simulated respondent. Implementations must be safe to share across
/// threads; each call depends only on its arguments.
pub trait Respondent: Send + Sync {
    fn open_session(&self, persona: &AugmentedPersona, arm: Arm, scenario: &Scenario, seed: TrialSeed) -> Result<Session>;

    /// Answers `q` on a fresh branch of `session`.
    fn ask(&self, session: &Session, q: &Question) -> Result<String>;
}

/// Lets the agent and the simulated user converse for the scenario's number of
/// rounds, starting from the opening user line.
pub fn run_dialogue(
    user: &dyn ChatModel,
    agent: &dyn ChatModel,
    persona: &AugmentedPersona,
    arm: Arm,
    scenario: &Scenario,
    seed: &TrialSeed,
) -> Result<Transcript> {
    let Scenario::AgentDialogue {
        agent_system,
        opening,
        turns,
        ..
    } = scenario
    else {
        return Err(Error::Config("run_dialogue needs an agent-dialogue scenario".into()));
    };
    let mut agent_view = vec![Message::system(agent_system[arm.index()].clone()), Message::user(opening.clone())];
    let mut user_view = vec![Message::system(render_persona_prompt(persona, scenario))];
    let mut out = Vec::with_capacity(2 * *turns as usize);
    for round in 0..*turns {
        let a = agent.complete(&agent_view, &CallKey::new(seed.clone(), format!("dialogue/agent/{round}")))?;
        agent_view.push(Message::assistant(a.clone()));
        user_view.push(Message::user(a.clone()));
        out.push(Turn {
            speaker: Speaker::Agent,
            text: a,
        });
        let u = user.complete(&user_view, &CallKey::new(seed.clone(), format!("dialogue/user/{round}")))?;
        agent_view.push(Message::user(u.clone()));
        user_view.push(Message::assistant(u.clone()));
        out.push(Turn {
            speaker: Speaker::User,
            text: u,
        });
    }
    Ok(Transcript {
        opening: opening.clone(),
        turns: out,
    })
}
