//! The iterative loop: simulate both arms, measure negative-control drift,
//! and while drift exceeds the threshold elicit the next confounder group and
//! fix one sampled answer set into each persona.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::estimate::{
    iteration_report, persona_tvd, ArmSource, BootstrapConfig, ExactSummary, IterationReport, ReportContext,
    TrialRecord,
};
use crate::population::{
    augment_persona, map_answer, retention_question, AttributeSchema, AugmentedPersona, Persona, QaPair, Question,
    QuestionBank, QuestionKind, UNKNOWN,
};
use crate::respondent::{Respondent, ScmRespondent, Scenario, TrialSeed};
use crate::{derive_seed, Arm};

fn default_epsilon() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustConfig {
    /// Trials per persona per arm.
    pub trials: u32,
    /// Stop once the mean TVD is at or below this value.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Total simulated iterations; defaults to one more than the number of
    /// confounder groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u32>,
    /// Seed for assignment selection; derived from the master seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_seed: Option<u64>,
    /// Only augment personas whose own TVD exceeds epsilon.
    #[serde(default)]
    pub per_persona_gating: bool,
    /// Re-ask each base persona attribute after the intervention.
    #[serde(default)]
    pub retention_checks: bool,
}

impl AdjustConfig {
    pub fn new(trials: u32, epsilon: f64) -> Self {
        Self {
            trials,
            epsilon,
            max_iterations: None,
            selection_seed: None,
            per_persona_gating: false,
            retention_checks: false,
        }
    }

    pub fn validate(&self, schedule_len: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be a nonnegative number, got {}", self.epsilon)));
        }
        if schedule_len == 0 {
            return Err(Error::Config("the confounder schedule is empty".into()));
        }
        if let Some(m) = self.max_iterations {
            if m == 0 || m as usize > schedule_len + 1 {
                return Err(Error::Config(format!(
                    "max_iterations must lie in 1..={} for a schedule of {schedule_len} group(s)",
                    schedule_len + 1
                )));
            }
        }
        Ok(())
    }

    pub fn max_iterations(&self, schedule_len: usize) -> u32 {
        self.max_iterations.unwrap_or(schedule_len as u32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    ScheduleExhausted,
    MaxIterations,
}

/// The (trial, arm) cell whose answers were fixed into a persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Iteration in which the answers were elicited.
    pub iteration: u32,
    pub persona: String,
    pub arm: Arm,
    pub trial: u32,
    pub answers: Vec<QaPair>,
}

/// Resumable state of a run, checkpointed after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub next_iteration: u32,
    pub personas: Vec<AugmentedPersona>,
    pub reports: Vec<IterationReport>,
    pub selections: Vec<Selection>,
    pub stop: Option<StopReason>,
}

impl RunState {
    pub fn new(run_id: impl Into<String>, personas: Vec<Persona>) -> Result<Self> {
        for (i, p) in personas.iter().enumerate() {
            if personas[..i].iter().any(|o| o.id == p.id) {
                return Err(Error::Data(format!("duplicate persona id `{}`", p.id)));
            }
        }
        Ok(Self {
            run_id: run_id.into(),
            next_iteration: 0,
            personas: personas.into_iter().map(AugmentedPersona::new).collect(),
            reports: Vec::new(),
            selections: Vec::new(),
            stop: None,
        })
    }

    pub fn base_personas(&self) -> Vec<Persona> {
        self.personas.iter().map(|p| p.base.clone()).collect()
    }
}

/// A (persona, arm, trial) cell that could not be simulated at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub persona: String,
    pub arm: Arm,
    pub trial: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Simulated {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<CellFailure>,
}

/// Everything fixed for the duration of a run.
pub struct Experiment<'a> {
    pub respondent: &'a dyn Respondent,
    pub scenario: &'a Scenario,
    pub bank: &'a QuestionBank,
    pub config: &'a AdjustConfig,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    /// Schemas of base persona attributes, used to phrase retention checks.
    pub persona_schemas: &'a [AttributeSchema],
    /// When set, each report carries the exact oracle summary.
    pub oracle: Option<&'a ScmRespondent>,
}

/// Answers a stored confounder takes: the mapped option, or the raw text when
/// the answer is free text or matched no option.
fn stored_answer(q: &Question, raw: &str, mapped: &str) -> String {
    if q.schema.is_categorical() && mapped != UNKNOWN {
        mapped.to_string()
    } else {
        raw.trim().to_string()
    }
}

fn ask_cell(
    respondent: &dyn Respondent,
    scenario: &Scenario,
    persona: &AugmentedPersona,
    seed: TrialSeed,
    questions: &[(Question, QuestionKind)],
) -> std::result::Result<Vec<TrialRecord>, String> {
    let (iteration, arm, trial) = (seed.iteration, seed.arm, seed.trial);
    let session = respondent
        .open_session(persona, arm, scenario, seed)
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(questions.len());
    let mut last_error = None;
    for (q, kind) in questions {
        let (raw, mapped, error) = match respondent.ask(&session, q) {
            Ok(raw) => {
                let mapped = map_answer(&raw, &q.schema);
                (raw, mapped, None)
            }
            Err(e) => {
                last_error = Some(e.to_string());
                (String::new(), UNKNOWN.to_string(), Some(e.to_string()))
            }
        };
        out.push(TrialRecord {
            persona: persona.id().to_string(),
            iteration,
            arm,
            trial,
            question: q.id.clone(),
            kind: *kind,
            raw,
            mapped,
            error,
        });
    }
    if out.iter().all(|r| r.error.is_some()) {
        return Err(last_error.unwrap_or_else(|| "no questions".into()));
    }
    Ok(out)
}

impl Experiment<'_> {
    fn schedule(&self) -> &[Vec<Question>] {
        &self.bank.confounder_groups
    }

    fn selection_seed(&self) -> u64 {
        self.config
            .selection_seed
            .unwrap_or_else(|| derive_seed(self.seed, "selection", 0))
    }

    /// Questions asked in every session of `iteration`, in asking order.
    pub fn questions_for(&self, iteration: u32, persona: &AugmentedPersona) -> Vec<(Question, QuestionKind)> {
        let mut qs: Vec<(Question, QuestionKind)> = vec![(self.bank.outcome.clone(), QuestionKind::Outcome)];
        qs.extend(
            self.bank
                .negative_controls
                .iter()
                .map(|q| (q.clone(), QuestionKind::NegativeControl)),
        );
        if let Some(group) = self.schedule().get(iteration as usize) {
            qs.extend(group.iter().map(|q| (q.clone(), QuestionKind::Confounder)));
        }
        if self.config.retention_checks {
            for a in &persona.base.attributes {
                let schema = self.persona_schemas.iter().find(|s| s.name == a.name);
                qs.push((retention_question(&a.name, schema), QuestionKind::RetentionCheck));
            }
        }
        qs
    }

    /// Opens a fresh session for every (persona, arm, trial) cell of the
    /// state's next iteration and asks each question on its own branch.
    pub fn simulate_iteration(&self, state: &RunState) -> Simulated {
        let k = state.next_iteration;
        let cells: Vec<(usize, Arm, u32)> = (0..state.personas.len())
            .flat_map(|i| Arm::BOTH.into_iter().flat_map(move |a| (0..self.config.trials).map(move |t| (i, a, t))))
            .collect();
        let results: Vec<_> = cells
            .par_iter()
            .map(|&(i, arm, t)| {
                let p = &state.personas[i];
                let seed = TrialSeed::cell(self.seed, p.id(), k, arm, t);
                let qs = self.questions_for(k, p);
                ask_cell(self.respondent, self.scenario, p, seed, &qs).map_err(|error| CellFailure {
                    persona: p.id().to_string(),
                    arm,
                    trial: t,
                    error,
                })
            })
            .collect();
        let mut out = Simulated::default();
        for r in results {
            match r {
                Ok(mut recs) => out.records.append(&mut recs),
                Err(f) => out.failures.push(f),
            }
        }
        crate::estimate::sort_records(&mut out.records);
        out
    }

    /// Exact oracle summary for the state's current personas.
    pub fn exact_summary(&self, state: &RunState) -> Result<Option<ExactSummary>> {
        let Some(oracle) = self.oracle else { return Ok(None) };
        let source = ExactSource::new(oracle, &state.personas);
        let n = state.personas.len() as f64;
        let mut s = ExactSummary {
            mean_tvd: 0.0,
            tau_obs: 0.0,
            tau_ate_mix: 0.0,
            tau_ate_prior: 0.0,
            sb: 0.0,
        };
        for p in &state.personas {
            s.mean_tvd += persona_tvd(&source, p.id(), &self.bank.negative_controls)?.tvd / n;
            let est = oracle
                .scm()
                .exact_estimands(&oracle.observed(p)?, &oracle.assigned(p), oracle.mode())?;
            s.tau_obs += est.tau_obs / n;
            s.tau_ate_mix += est.tau_ate_mix / n;
            s.tau_ate_prior += est.tau_ate_prior / n;
            s.sb += est.sb / n;
        }
        Ok(Some(s))
    }

    pub fn report(&self, state: &RunState, records: &[TrialRecord], iteration: u32) -> Result<IterationReport> {
        let personas = state.base_personas();
        let ctx = ReportContext {
            run_id: &state.run_id,
            outcome: &self.bank.outcome,
            negative_controls: &self.bank.negative_controls,
            personas: &personas,
            bootstrap: self.bootstrap,
            seed: self.seed,
        };
        iteration_report(records, iteration, &ctx, self.exact_summary(state)?)
    }

    /// Runs one iteration: simulate, report, and either stop or augment.
    /// Records produced are appended to `sink` even when the step fails.
    pub fn step(&self, state: &mut RunState, sink: &mut Vec<TrialRecord>) -> Result<IterationReport> {
        if state.stop.is_some() {
            return Err(Error::Config("the run has already stopped".into()));
        }
        let schedule_len = self.schedule().len();
        self.config.validate(schedule_len)?;
        let k = state.next_iteration;
        let sim = self.simulate_iteration(state);
        sink.extend(sim.records.iter().cloned());
        if let Some(f) = sim.failures.first() {
            return Err(Error::Backend {
                attempts: 0,
                message: format!(
                    "{} cell(s) failed in iteration {k}; first: persona `{}` arm {} trial {}: {}",
                    sim.failures.len(),
                    f.persona,
                    f.arm,
                    f.trial,
                    f.error
                ),
                log: sim
                    .failures
                    .iter()
                    .map(|f| format!("{}/{}/{}: {}", f.persona, f.arm, f.trial, f.error))
                    .collect(),
            });
        }
        self.advance(state, &sim.records)
    }

    /// Reports on the records of the state's next iteration, then stops or
    /// augments the personas with the elicited confounder group.
    pub fn advance(&self, state: &mut RunState, records: &[TrialRecord]) -> Result<IterationReport> {
        let schedule_len = self.schedule().len();
        let k = state.next_iteration;
        let report = self.report(state, records, k)?;

        let eps = self.config.epsilon;
        let stop = if report.mean_tvd <= eps {
            Some(StopReason::Converged)
        } else if k as usize >= schedule_len {
            Some(StopReason::ScheduleExhausted)
        } else if k + 1 >= self.config.max_iterations(schedule_len) {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if stop.is_none() {
            let group = &self.schedule()[k as usize];
            let tvds: HashMap<&str, f64> = report.personas.iter().map(|p| (p.persona.as_str(), p.tvd)).collect();
            let mut next = Vec::with_capacity(state.personas.len());
            for p in &state.personas {
                if self.config.per_persona_gating && tvds.get(p.id()).is_none_or(|t| *t <= eps) {
                    next.push(p.clone());
                    continue;
                }
                let elicited = elicitations_from_records(records, p.id(), k, group);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.selection_seed(), p.id(), k as u64));
                let (arm, trial, answers) = select_confounder_assignment(&elicited, &mut rng)?;
                next.push(augment_persona(p, k + 1, answers.clone())?);
                state.selections.push(Selection {
                    iteration: k,
                    persona: p.id().to_string(),
                    arm,
                    trial,
                    answers,
                });
            }
            state.personas = next;
        }
        state.next_iteration = k + 1;
        state.stop = stop;
        state.reports.push(report.clone());
        Ok(report)
    }

    /// Runs to completion from `state`, calling `on_step` after every
    /// iteration with the new records (for checkpointing).
    pub fn run(
        &self,
        state: &mut RunState,
        mut on_step: impl FnMut(&RunState, &[TrialRecord]) -> Result<()>,
    ) -> Result<Vec<IterationReport>> {
        while state.stop.is_none() {
            let mut sink = Vec::new();
            let res = self.step(state, &mut sink);
            on_step(state, &sink)?;
            res?;
        }
        Ok(state.reports.clone())
    }
}

/// Draws from P(L' | A = a, L~) for every trial and arm: one answer per group
/// question per cell, each on its own branch after the intervention.
pub fn elicit_confounders(
    respondent: &dyn Respondent,
    scenario: &Scenario,
    persona: &AugmentedPersona,
    iteration: u32,
    group: &[Question],
    trials: u32,
    master_seed: u64,
) -> Result<Elicitations> {
    let mut cells = BTreeMap::new();
    for arm in Arm::BOTH {
        for t in 0..trials {
            let seed = TrialSeed::cell(master_seed, persona.id(), iteration, arm, t);
            let session = respondent.open_session(persona, arm, scenario, seed)?;
            let mut answers = Vec::with_capacity(group.len());
            for q in group {
                let raw = respondent.ask(&session, q)?;
                let mapped = map_answer(&raw, &q.schema);
                answers.push(QaPair {
                    question: q.persona_text(),
                    answer: stored_answer(q, &raw, &mapped),
                });
            }
            cells.insert((arm, t), answers);
        }
    }
    Ok(Elicitations { cells })
}

/// Elicited group answers indexed by (arm, trial).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Elicitations {
    pub cells: BTreeMap<(Arm, u32), Vec<QaPair>>,
}

/// Rebuilds a persona's elicitations from the confounder records of the
/// sessions that also answered the outcome and negative controls.
pub fn elicitations_from_records(records: &[TrialRecord], persona: &str, iteration: u32, group: &[Question]) -> Elicitations {
    let mut by_cell: BTreeMap<(Arm, u32), BTreeMap<&str, &TrialRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| {
        r.persona == persona && r.iteration == iteration && r.kind == QuestionKind::Confounder
    }) {
        by_cell.entry((r.arm, r.trial)).or_default().insert(&r.question, r);
    }
    let cells = by_cell
        .into_iter()
        .filter_map(|(cell, answers)| {
            let pairs: Option<Vec<QaPair>> = group
                .iter()
                .map(|q| {
                    answers.get(q.id.as_str()).map(|r| QaPair {
                        question: q.persona_text(),
                        answer: stored_answer(q, &r.raw, &r.mapped),
                    })
                })
                .collect();
            pairs.map(|p| (cell, p))
        })
        .collect();
    Elicitations { cells }
}

/// Picks one (trial, arm) cell uniformly and returns its whole answer set.
/// With equal trial counts per arm this is a draw from the 50/50 arm mixture.
pub fn select_confounder_assignment(
    elicitations: &Elicitations,
    rng: &mut impl Rng,
) -> Result<(Arm, u32, Vec<QaPair>)> {
    let per_arm = Arm::BOTH.map(|a| elicitations.cells.keys().filter(|(arm, _)| *arm == a).count());
    if per_arm[0] == 0 || per_arm[0] != per_arm[1] {
        return Err(Error::Data(format!(
            "elicitations need equal, nonzero trial counts per arm; got {} and {}",
            per_arm[0], per_arm[1]
        )));
    }
    let idx = rng.random_range(0..elicitations.cells.len());
    let (&(arm, trial), answers) = elicitations.cells.iter().nth(idx).expect("index in range");
    Ok((arm, trial, answers.clone()))
}

/// Exact per-persona answer distributions from an SCM respondent, padded with
/// a zero-probability `Unknown` so they line up with empirical ones.
pub struct ExactSource<'a> {
    respondent: &'a ScmRespondent,
    personas: HashMap<&'a str, &'a AugmentedPersona>,
}

impl<'a> ExactSource<'a> {
    pub fn new(respondent: &'a ScmRespondent, personas: &'a [AugmentedPersona]) -> Self {
        Self {
            respondent,
            personas: personas.iter().map(|p| (p.id(), p)).collect(),
        }
    }
}

impl ArmSource for ExactSource<'_> {
    fn distribution(&self, persona: &str, question: &Question, arm: Arm) -> Result<DiscreteDistribution> {
        let p = self
            .personas
            .get(persona)
            .ok_or_else(|| Error::Data(format!("unknown persona `{persona}`")))?;
        let d = self.respondent.distribution(p, arm, &question.id)?;
        let probs: Vec<f64> = question
            .schema
            .support_with_unknown()
            .iter()
            .map(|o| d.prob_of(o).unwrap_or(0.0))
            .collect();
        DiscreteDistribution::new(question.schema.support_with_unknown(), probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(answer: &str) -> Vec<QaPair> {
        vec![QaPair {
            question: "What is your fitness?".into(),
            answer: answer.into(),
        }]
    }

    #[test]
    fn unanimous_cells_select_that_answer() {
        let mut e = Elicitations::default();
        for a in Arm::BOTH {
            for t in 0..5 {
                e.cells.insert((a, t), pairs("fit"));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(select_confounder_assignment(&e, &mut rng).unwrap().2, pairs("fit"));
    }

    #[test]
    fn balanced_cells_select_each_arm_half_the_time() {
        let mut e = Elicitations::default();
        for t in 0..30 {
            e.cells.insert((Arm::Treatment, t), pairs("fit"));
            e.cells.insert((Arm::Control, t), pairs("unfit"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let fit = (0..n)
            .filter(|_| select_confounder_assignment(&e, &mut rng).unwrap().2 == pairs("fit"))
            .count();
        let freq = fit as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{freq}");
    }

    #[test]
    fn unequal_arm_counts_are_rejected() {
        let mut e = Elicitations::default();
        e.cells.insert((Arm::Treatment, 0), pairs("fit"));
        e.cells.insert((Arm::Treatment, 1), pairs("fit"));
        e.cells.insert((Arm::Control, 0), pairs("fit"));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(select_confounder_assignment(&e, &mut rng).is_err());
    }

    #[test]
    fn config_bounds() {
        let mut c = AdjustConfig::new(30, 0.05);
        assert!(c.validate(13).is_ok());
        assert_eq!(c.max_iterations(13), 14);
        c.max_iterations = Some(15);
        assert!(c.validate(13).is_err());
        c.max_iterations = None;
        c.trials = 0;
        assert!(c.validate(13).is_err());
    }
}
