use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::{run_dialogue, CallKey, ChatModel, Message, Respondent, Scenario, Session, TrialSeed};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::population::{AttributeSchema, AugmentedPersona, Question, QuestionBank, RETENTION_PREFIX};
use crate::scm::{Assignment, RespondentMode, Scm, Target};
use crate::Arm;

/// Deterministic filler text standing in for dialogue turns when the world is
/// an SCM; only the arm label matters to the oracle.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateChat;

impl ChatModel for TemplateChat {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        Ok(format!(
            "[{} after {} message(s), arm {}]",
            call.label,
            messages.len(),
            call.seed.arm
        ))
    }
}

/// Respondent that samples answers from an SCM.
///
/// Questions are bound to SCM variables by id. The persona's base attributes
/// supply the observed variables and its elicited answers, matched back to
/// confounder variables through the question text, supply the assignment.
#[derive(Debug, Clone)]
pub struct ScmRespondent {
    scm: Arc<Scm>,
    mode: RespondentMode,
    bindings: BTreeMap<String, Target>,
    persona_text: BTreeMap<String, usize>,
}

impl ScmRespondent {
    pub fn new(scm: Arc<Scm>, mode: RespondentMode, bank: &QuestionBank, map: &BTreeMap<String, String>) -> Result<Self> {
        let mut bindings = BTreeMap::new();
        let mut persona_text = BTreeMap::new();
        for (q, _) in bank.questions() {
            let var = map
                .get(&q.id)
                .ok_or_else(|| Error::Config(format!("question `{}` is not mapped to an SCM variable", q.id)))?;
            let target = scm
                .target(var)
                .map_err(|e| Error::Config(format!("question `{}`: {e}", q.id)))?;
            let states = scm.target_states(target);
            let mut opts = q.schema.options.clone();
            let mut st = states.to_vec();
            opts.sort();
            st.sort();
            if opts != st {
                return Err(Error::Config(format!(
                    "question `{}` options {:?} differ from the states of `{var}` {:?}",
                    q.id, q.schema.options, states
                )));
            }
            if let Target::Confounder(k) = target {
                persona_text.insert(q.persona_text(), k);
            }
            bindings.insert(q.id.clone(), target);
        }
        Ok(Self {
            scm,
            mode,
            bindings,
            persona_text,
        })
    }

    pub fn scm(&self) -> &Scm {
        &self.scm
    }

    pub fn mode(&self) -> RespondentMode {
        self.mode
    }

    /// Observed SCM variables taken from the persona's base attributes.
    pub fn observed(&self, persona: &AugmentedPersona) -> Result<Assignment> {
        self.scm
            .spec()
            .l_vars
            .iter()
            .map(|v| {
                persona
                    .base
                    .get(&v.name)
                    .map(|val| (v.name.clone(), val.to_string()))
                    .ok_or_else(|| {
                        Error::Config(format!("persona `{}` has no attribute `{}`", persona.id(), v.name))
                    })
            })
            .collect()
    }

    /// Confounder values fixed into the persona. Answers that are not a state
    /// of the variable carry no evidence and are skipped.
    pub fn assigned(&self, persona: &AugmentedPersona) -> Assignment {
        let vars = &self.scm.spec().lprime_vars;
        persona
            .pairs()
            .filter_map(|pair| {
                let k = *self.persona_text.get(&pair.question)?;
                let var = &vars[k];
                var.states
                    .contains(&pair.answer)
                    .then(|| (var.name.clone(), pair.answer.clone()))
            })
            .collect()
    }

    pub fn binding(&self, question_id: &str) -> Option<Target> {
        self.bindings.get(question_id).copied()
    }

    /// Exact answer distribution for a bound question.
    pub fn distribution(&self, persona: &AugmentedPersona, arm: Arm, question_id: &str) -> Result<DiscreteDistribution> {
        let target = self
            .binding(question_id)
            .ok_or_else(|| Error::Config(format!("question `{question_id}` is not mapped to an SCM variable")))?;
        self.scm
            .answer_distribution_for(&self.observed(persona)?, arm, target, &self.assigned(persona), self.mode)
    }
}

fn sample(dist: &DiscreteDistribution, seed: &TrialSeed) -> String {
    let u: f64 = seed.rng().random();
    let mut acc = 0.0;
    for (s, p) in dist.support().iter().zip(dist.probs()) {
        acc += p;
        if u < acc {
            return s.clone();
        }
    }
    // u landed in the rounding slack above the cumulative sum.
    let last = dist.probs().iter().rposition(|p| *p > 0.0).unwrap_or(0);
    dist.support()[last].clone()
}

impl Respondent for ScmRespondent {
    fn open_session(&self, persona: &AugmentedPersona, arm: Arm, scenario: &Scenario, seed: TrialSeed) -> Result<Session> {
        scenario.validate()?;
        let transcript = match scenario {
            Scenario::Survey { .. } => None,
            Scenario::AgentDialogue { .. } => Some(run_dialogue(&TemplateChat, &TemplateChat, persona, arm, scenario, &seed)?),
        };
        Ok(Session::new(persona, arm, scenario, seed, transcript))
    }

    fn ask(&self, session: &Session, q: &Question) -> Result<String> {
        if let Some(attr) = q.id.strip_prefix(RETENTION_PREFIX) {
            return session
                .persona
                .base
                .get(attr)
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("retention check for unknown attribute `{attr}`")));
        }
        let dist = self.distribution(&session.persona, session.arm, &q.id)?;
        Ok(sample(&dist, &session.seed.with_question(&q.id)))
    }
}

/// Question bank mirroring an SCM: the outcome, one question per negative
/// control, and confounders in declared order split into groups. Returns the
/// bank and its question-id → variable map.
pub fn scm_question_bank(scm: &Scm, group_size: usize) -> Result<(QuestionBank, BTreeMap<String, String>)> {
    if group_size == 0 {
        return Err(Error::Config("confounder group size must be at least 1".into()));
    }
    let spec = scm.spec();
    let mut map = BTreeMap::new();
    let outcome_schema = AttributeSchema::categorical(spec.outcome.name.clone(), spec.outcome.states.clone())?
        .with_encoding(&spec.outcome.encoding())?;
    let outcome = Question::direct(spec.outcome.name.clone(), spec.outcome.name.clone(), outcome_schema);
    map.insert(outcome.id.clone(), spec.outcome.name.clone());
    let mut negative_controls = Vec::new();
    for z in &spec.z_vars {
        let q = Question::attribute(z.name.clone(), AttributeSchema::categorical(z.name.clone(), z.states.clone())?);
        map.insert(q.id.clone(), z.name.clone());
        negative_controls.push(q);
    }
    let mut confounder_groups = Vec::new();
    for chunk in spec.lprime_vars.chunks(group_size) {
        let mut group = Vec::new();
        for v in chunk {
            let q = Question::attribute(v.name.clone(), AttributeSchema::categorical(v.name.clone(), v.states.clone())?);
            map.insert(q.id.clone(), v.name.clone());
            group.push(q);
        }
        confounder_groups.push(group);
    }
    let bank = QuestionBank {
        outcome,
        negative_controls,
        confounder_groups,
    };
    bank.validate()?;
    Ok((bank, map))
}
