mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::fakes::{personas, FakeChat};
use userdrift::adjust::{AdjustConfig, Experiment, RunState};
use userdrift::estimate::{BootstrapConfig, RecordCounts, TrialRecord};
use userdrift::population::{Persona, QuestionBank, QuestionKind, UNKNOWN};
use userdrift::respondent::{
    scm_question_bank, ChatModel, LlmRespondent, Message, Respondent, Scenario, ScmRespondent,
};
use userdrift::scm::{RespondentMode, Scm};
use userdrift::{assets, Error, Result};

fn experiment<'a>(
    respondent: &'a dyn Respondent,
    scenario: &'a Scenario,
    bank: &'a QuestionBank,
    config: &'a AdjustConfig,
) -> Experiment<'a> {
    Experiment {
        respondent,
        scenario,
        bank,
        config,
        bootstrap: BootstrapConfig::default(),
        seed: 5,
        persona_schemas: &[],
        oracle: None,
    }
}

#[test]
fn full_design_record_counts() {
    let bank = QuestionBank::from_json(assets::OPINIONQA_BANK).unwrap();
    let chat: Arc<dyn ChatModel> = Arc::new(FakeChat::default());
    let respondent = LlmRespondent::new(chat, None);
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(30, 0.0);
    let exp = experiment(&respondent, &scenario, &bank, &config);
    let state = RunState::new("counts", personas(100)).unwrap();
    let sim = exp.simulate_iteration(&state);
    assert!(sim.failures.is_empty());
    let c = RecordCounts::of(&sim.records);
    // 100 personas x 30 trials x 2 arms = 6000 sessions.
    assert_eq!(c.outcome, 6000);
    assert_eq!(c.negative_control, 6000 * 9);
    assert_eq!(c.confounder, 6000 * 2);
    assert_eq!(c.total, 6000 * 12);
    assert_eq!(bank.confounder_groups.len(), 13);
}

#[test]
fn question_order_does_not_change_answers() {
    let bank = QuestionBank::from_json(assets::OPINIONQA_BANK).unwrap();
    let mut permuted = bank.clone();
    permuted.negative_controls.reverse();
    permuted.confounder_groups[0].reverse();
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(3, 0.0);
    let run = |b: &QuestionBank| {
        let respondent = LlmRespondent::new(Arc::new(FakeChat::default()), None);
        let exp = experiment(&respondent, &scenario, b, &config);
        exp.simulate_iteration(&RunState::new("iso", personas(4)).unwrap()).records
    };
    assert_eq!(run(&bank), run(&permuted));
}

fn dialogue_run(chat: Arc<FakeChat>) -> (Vec<TrialRecord>, RunState) {
    let bank = QuestionBank::from_json(assets::BOOK_BANK).unwrap().with_title("There There");
    let scenario = Scenario::book("There There", "Tommy Orange");
    let respondent = LlmRespondent::new(chat.clone(), Some(chat));
    let mut config = AdjustConfig::new(2, 0.0);
    config.max_iterations = Some(3);
    let exp = experiment(&respondent, &scenario, &bank, &config);
    let mut state = RunState::new("fresh", personas(3)).unwrap();
    let mut records = Vec::new();
    exp.step(&mut state, &mut records).unwrap();
    (records, state)
}

#[test]
fn iterations_start_from_fresh_context() {
    let chat = Arc::new(FakeChat::default());
    let (_, after_first) = dialogue_run(chat.clone());
    let bank = QuestionBank::from_json(assets::BOOK_BANK).unwrap().with_title("There There");
    let scenario = Scenario::book("There There", "Tommy Orange");
    let mut config = AdjustConfig::new(2, 0.0);
    config.max_iterations = Some(3);

    // Continue once with the live state, and once from a copy that keeps only
    // the personas (every record and transcript of iteration 0 deleted).
    let simulate = |state: &RunState| {
        let c = Arc::new(FakeChat::default());
        let respondent = LlmRespondent::new(c.clone(), Some(c.clone()));
        let exp = experiment(&respondent, &scenario, &bank, &config);
        (exp.simulate_iteration(state).records, c)
    };
    let (live, live_chat) = simulate(&after_first);
    let mut stripped = RunState::new("fresh", Vec::new()).unwrap();
    stripped.personas = after_first.personas.clone();
    stripped.next_iteration = after_first.next_iteration;
    let (fresh, _) = simulate(&stripped);
    assert_eq!(live, fresh);

    for (key, messages) in live_chat.calls.lock().unwrap().iter() {
        assert_eq!(key.seed.iteration, 1);
        assert!(messages.iter().all(|m| !m.content.contains("[it0]")), "iteration-0 text leaked");
    }
    assert!(after_first.personas.iter().all(|p| p.pairs().count() == 2));
}

#[test]
fn dialogue_branches_share_one_transcript() {
    let chat = Arc::new(FakeChat::default());
    dialogue_run(chat.clone());
    let calls = chat.calls.lock().unwrap();
    let mut contexts: BTreeMap<String, Vec<&[Message]>> = BTreeMap::new();
    for (key, messages) in calls.iter().filter(|(k, _)| k.label == "answer") {
        let cell = format!("{}/{}/{}", key.seed.persona, key.seed.arm, key.seed.trial);
        contexts.entry(cell).or_default().push(&messages[..messages.len() - 1]);
    }
    for (cell, ctxs) in contexts {
        // Survey-style branches add one user turn; every branch of a cell
        // sees the same persona prompt and dialogue.
        let first = ctxs[0];
        assert!(first.len() > 2 * 3, "{cell}: dialogue missing");
        assert!(ctxs.iter().all(|c| *c == first), "{cell}: branches diverged");
    }
}

#[test]
fn off_option_answers_become_unknown() {
    let bank = QuestionBank::from_json(assets::OPINIONQA_BANK).unwrap();
    let chat: Arc<dyn ChatModel> = Arc::new(FakeChat {
        off_option: true,
        ..FakeChat::default()
    });
    let respondent = LlmRespondent::new(chat, None);
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(2, 0.0);
    let exp = experiment(&respondent, &scenario, &bank, &config);
    let sim = exp.simulate_iteration(&RunState::new("unk", personas(2)).unwrap());
    assert!(sim
        .records
        .iter()
        .filter(|r| r.kind != QuestionKind::Confounder)
        .all(|r| r.mapped == UNKNOWN));
}

#[test]
fn treatment_uniform_elicitation_on_the_toy_model() {
    let scm = Arc::new(Scm::toy_drift_v1());
    let (bank, map) = scm_question_bank(&scm, 1).unwrap();
    let respondent = ScmRespondent::new(scm, RespondentMode::Abductive, &bank, &map).unwrap();
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(10, 0.0);
    let exp = experiment(&respondent, &scenario, &bank, &config);
    let n = 1000;
    let people: Vec<Persona> = (0..n).map(|i| Persona::new(format!("p{i}"), [("sex", "female")]).unwrap()).collect();
    let mut state = RunState::new("mix", people).unwrap();
    exp.step(&mut state, &mut Vec::new()).unwrap();
    let fit = state.selections.iter().filter(|s| s.answers[0].answer == "fit").count();
    let freq = fit as f64 / n as f64;
    // Mixture 0.5 * 0.74 + 0.5 * 0.26 = 0.5 per selection.
    assert!((freq - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{freq}");
}

struct Broken;

impl Respondent for Broken {
    fn open_session(
        &self,
        _: &userdrift::population::AugmentedPersona,
        _: userdrift::Arm,
        _: &Scenario,
        _: userdrift::respondent::TrialSeed,
    ) -> Result<userdrift::respondent::Session> {
        Err(Error::Backend {
            attempts: 4,
            message: "endpoint down".into(),
            log: vec![],
        })
    }

    fn ask(&self, _: &userdrift::respondent::Session, _: &userdrift::population::Question) -> Result<String> {
        unreachable!()
    }
}

#[test]
fn failing_backend_aborts_the_iteration() {
    let bank = QuestionBank::from_json(assets::OPINIONQA_BANK).unwrap();
    let scenario = Scenario::opinionqa_immigration();
    let config = AdjustConfig::new(2, 0.0);
    let exp = experiment(&Broken, &scenario, &bank, &config);
    let mut state = RunState::new("down", personas(2)).unwrap();
    let err = exp.step(&mut state, &mut Vec::new()).unwrap_err();
    assert!(matches!(err, Error::Backend { .. }));
    assert_eq!(err.exit_code(), 3);
    assert_eq!(state.next_iteration, 0);
}
