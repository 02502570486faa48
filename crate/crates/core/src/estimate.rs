//! Trial records and the empirical quantities computed from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{abs_gap, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::population::{AttributeSchema, Persona, Question, QuestionKind, RETENTION_PREFIX, UNKNOWN};
use crate::{derive_seed, Arm};

/// One answer to one question on one branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub persona: String,
    pub iteration: u32,
    pub arm: Arm,
    pub trial: u32,
    pub question: String,
    pub kind: QuestionKind,
    pub raw: String,
    pub mapped: String,
    /// Backend failure for this question; the answer is then `Unknown`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    fn sort_key(&self) -> (&str, u32, Arm, u32, &str) {
        (&self.persona, self.iteration, self.arm, self.trial, &self.question)
    }
}

/// Sorts by (persona, iteration, arm, trial, question).
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSONL record file. Malformed lines are reported with their
/// 1-based line number; a file with no records is an error.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no records", path.display())));
    }
    Ok(out)
}

/// Source of per-persona, per-arm answer distributions: empirical counts or
/// an exact oracle. Supports are the schema options followed by `Unknown`.
pub trait ArmSource {
    fn distribution(&self, persona: &str, question: &Question, arm: Arm) -> Result<DiscreteDistribution>;
}

fn category_index(schema: &AttributeSchema, mapped: &str) -> usize {
    schema
        .options
        .iter()
        .position(|o| o == mapped)
        .unwrap_or(schema.options.len())
}

fn counts_to_distribution(schema: &AttributeSchema, counts: &[u64]) -> Result<DiscreteDistribution> {
    DiscreteDistribution::from_counts(schema.support_with_unknown(), counts)
}

/// Answer counts keyed by (persona, question) and arm.
#[derive(Debug, Default, Clone)]
pub struct RecordIndex {
    cells: HashMap<(String, String), [BTreeMap<String, u64>; 2]>,
}

impl RecordIndex {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut cells: HashMap<(String, String), [BTreeMap<String, u64>; 2]> = HashMap::new();
        for r in records {
            let cell = cells.entry((r.persona.clone(), r.question.clone())).or_default();
            *cell[r.arm.index()].entry(r.mapped.clone()).or_default() += 1;
        }
        Self { cells }
    }
}

impl ArmSource for RecordIndex {
    fn distribution(&self, persona: &str, question: &Question, arm: Arm) -> Result<DiscreteDistribution> {
        let empty = || Error::EmptyCell {
            persona: persona.to_string(),
            arm: arm.index() as u8,
            question: question.id.clone(),
        };
        let cell = self
            .cells
            .get(&(persona.to_string(), question.id.clone()))
            .map(|c| &c[arm.index()])
            .filter(|c| !c.is_empty())
            .ok_or_else(empty)?;
        let mut counts = vec![0u64; question.schema.options.len() + 1];
        for (mapped, n) in cell {
            counts[category_index(&question.schema, mapped)] += n;
        }
        counts_to_distribution(&question.schema, &counts)
    }
}

/// Category frequencies for one question and arm, optionally restricted to
/// one persona.
pub fn empirical_distribution(
    records: &[TrialRecord],
    schema: &AttributeSchema,
    question: &str,
    arm: Arm,
    persona: Option<&str>,
) -> Result<DiscreteDistribution> {
    let mut counts = vec![0u64; schema.options.len() + 1];
    for r in records {
        if r.question == question && r.arm == arm && persona.is_none_or(|p| p == r.persona) {
            counts[category_index(schema, &r.mapped)] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyCell {
            persona: persona.unwrap_or("*").to_string(),
            arm: arm.index() as u8,
            question: question.to_string(),
        });
    }
    counts_to_distribution(schema, &counts)
}

/// Pooled and per-variable arm TVDs for one persona.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaTvd {
    pub persona: String,
    pub tvd: f64,
    pub per_variable: Vec<f64>,
}

pub fn persona_tvd(source: &dyn ArmSource, persona: &str, negative_controls: &[Question]) -> Result<PersonaTvd> {
    let mut per_variable = Vec::with_capacity(negative_controls.len());
    for q in negative_controls {
        let p1 = source.distribution(persona, q, Arm::Treatment)?;
        let p0 = source.distribution(persona, q, Arm::Control)?;
        per_variable.push(abs_gap(&p1, &p0)?);
    }
    let tvd = 0.5 * per_variable.iter().sum::<f64>();
    per_variable.iter_mut().for_each(|g| *g *= 0.5);
    Ok(PersonaTvd {
        persona: persona.to_string(),
        tvd,
        per_variable,
    })
}

/// Unweighted mean of pooled persona TVDs.
pub fn mean_tvd(source: &dyn ArmSource, personas: &[String], negative_controls: &[Question]) -> Result<f64> {
    if personas.is_empty() {
        return Err(Error::Data("no personas".into()));
    }
    let mut total = 0.0;
    for p in personas {
        total += persona_tvd(source, p, negative_controls)?.tvd;
    }
    Ok(total / personas.len() as f64)
}

/// Mean encoded outcome of one persona-arm cell with `Unknown` excluded;
/// `None` when every answer was `Unknown`.
pub fn encoded_mean(dist: &DiscreteDistribution, schema: &AttributeSchema) -> Result<Option<f64>> {
    let mut mass = 0.0;
    let mut total = 0.0;
    for (s, p) in dist.support().iter().zip(dist.probs()) {
        if s == UNKNOWN {
            continue;
        }
        let v = schema
            .encode(s)
            .ok_or_else(|| Error::Schema(format!("`{}` has no encoding for `{s}`", schema.name)))?;
        mass += p;
        total += p * v;
    }
    Ok((mass > 0.0).then(|| total / mass))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaOutcome {
    pub persona: String,
    /// Indexed by arm.
    pub means: [Option<f64>; 2],
}

pub fn persona_outcomes(source: &dyn ArmSource, personas: &[String], outcome: &Question) -> Result<Vec<PersonaOutcome>> {
    personas
        .iter()
        .map(|p| {
            let m0 = encoded_mean(&source.distribution(p, outcome, Arm::Control)?, &outcome.schema)?;
            let m1 = encoded_mean(&source.distribution(p, outcome, Arm::Treatment)?, &outcome.schema)?;
            Ok(PersonaOutcome {
                persona: p.clone(),
                means: [m0, m1],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub effect: f64,
    pub arm_means: [f64; 2],
    /// Personas left out of each arm's mean because every outcome was Unknown.
    pub excluded: [usize; 2],
}

fn effect_of(units: &[&PersonaOutcome]) -> Option<EffectEstimate> {
    let mut arm_means = [0.0; 2];
    let mut excluded = [0usize; 2];
    for a in 0..2 {
        let vals: Vec<f64> = units.iter().filter_map(|u| u.means[a]).collect();
        excluded[a] = units.len() - vals.len();
        if vals.is_empty() {
            return None;
        }
        arm_means[a] = vals.iter().sum::<f64>() / vals.len() as f64;
    }
    Some(EffectEstimate {
        effect: arm_means[1] - arm_means[0],
        arm_means,
        excluded,
    })
}

/// Arm-1 minus arm-0 mean of per-persona mean outcomes, personas weighted
/// equally.
pub fn observed_effect(source: &dyn ArmSource, personas: &[String], outcome: &Question) -> Result<EffectEstimate> {
    let units = persona_outcomes(source, personas, outcome)?;
    let refs: Vec<&PersonaOutcome> = units.iter().collect();
    effect_of(&refs).ok_or_else(|| Error::Data("an arm has no persona with a known outcome".into()))
}

fn default_resamples() -> usize {
    1000
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: default_resamples(),
            level: default_level(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < 100 {
            return Err(Error::Config(format!("bootstrap needs at least 100 resamples, got {}", self.resamples)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Widens the interval just enough to contain `x`.
    pub fn including(self, x: f64) -> Self {
        Self {
            lo: self.lo.min(x),
            hi: self.hi.max(x),
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over units (personas): each resample draws units with
/// replacement, so all records of a persona move together. Resamples for which
/// the statistic is undefined are skipped.
pub fn bootstrap_ci<T>(
    units: &[T],
    statistic: impl Fn(&[&T]) -> Option<f64>,
    config: BootstrapConfig,
    seed: u64,
) -> Result<Interval> {
    config.validate()?;
    if units.len() < 2 {
        return Err(Error::Data(format!(
            "degenerate confidence interval: {} persona(s), need at least 2",
            units.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(config.resamples);
    let mut sample: Vec<&T> = Vec::with_capacity(units.len());
    for _ in 0..config.resamples {
        sample.clear();
        sample.extend((0..units.len()).map(|_| &units[rng.random_range(0..units.len())]));
        if let Some(s) = statistic(&sample) {
            stats.push(s);
        }
    }
    if stats.is_empty() {
        return Err(Error::Data("statistic undefined on every bootstrap resample".into()));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - config.level) / 2.0;
    Ok(Interval {
        lo: quantile(&stats, alpha),
        hi: quantile(&stats, 1.0 - alpha),
    })
}

pub fn mean(values: &[&f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().copied().sum::<f64>() / values.len() as f64)
}

pub const NULL_SPLITS: usize = 10;

/// trial -> (question index, category index) per answer
type TrialAnswers = BTreeMap<u32, Vec<(usize, usize)>>;

/// Sampling floor of the TVD: for each persona and arm, the trials are split
/// at random into two halves and the pooled TVD between the halves is taken;
/// this is averaged over arms and `NULL_SPLITS` splits, then over personas.
/// Halves hold about T/2 trials, so each split TVD is rescaled by
/// `sqrt((1/n0 + 1/n1) / (1/h0 + 1/h1))` (the 1/sqrt(n) scaling of sampling
/// noise) to match an arm comparison with `n0` and `n1` trials.
pub fn null_tvd_reference(
    records: &[TrialRecord],
    iteration: u32,
    negative_controls: &[Question],
    seed: u64,
) -> Result<f64> {
    let q_index: HashMap<&str, usize> = negative_controls
        .iter()
        .enumerate()
        .map(|(i, q)| (q.id.as_str(), i))
        .collect();
    // persona -> arm -> trial -> (question, category)
    let mut cells: BTreeMap<&str, [TrialAnswers; 2]> = BTreeMap::new();
    for r in records.iter().filter(|r| r.iteration == iteration) {
        if let Some(&qi) = q_index.get(r.question.as_str()) {
            let cat = category_index(&negative_controls[qi].schema, &r.mapped);
            cells.entry(&r.persona).or_default()[r.arm.index()]
                .entry(r.trial)
                .or_default()
                .push((qi, cat));
        }
    }
    if cells.is_empty() {
        return Err(Error::Data(format!("no negative-control records in iteration {iteration}")));
    }
    let widths: Vec<usize> = negative_controls.iter().map(|q| q.schema.options.len() + 1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "null-tvd", iteration as u64));
    let mut persona_total = 0.0;
    for (persona, arms) in &cells {
        let mut acc = 0.0;
        let arm_scale = 1.0 / arms[0].len().max(1) as f64 + 1.0 / arms[1].len().max(1) as f64;
        for (a, trials) in arms.iter().enumerate() {
            if trials.len() < 2 {
                return Err(Error::Data(format!(
                    "null TVD needs at least 2 trials per arm; persona `{persona}` arm {a} has {}",
                    trials.len()
                )));
            }
            let keys: Vec<u32> = trials.keys().copied().collect();
            for _ in 0..NULL_SPLITS {
                let mut order = keys.clone();
                order.shuffle(&mut rng);
                let half = order.len() / 2;
                let split_scale = 1.0 / half as f64 + 1.0 / (order.len() - half) as f64;
                let mut counts = [
                    widths.iter().map(|&w| vec![0u64; w]).collect::<Vec<_>>(),
                    widths.iter().map(|&w| vec![0u64; w]).collect::<Vec<_>>(),
                ];
                for (pos, t) in order.iter().enumerate() {
                    let side = usize::from(pos >= half);
                    for &(qi, cat) in &trials[t] {
                        counts[side][qi][cat] += 1;
                    }
                }
                let mut gap = 0.0;
                for (c0, c1) in counts[0].iter().zip(&counts[1]) {
                    let (n0, n1) = (c0.iter().sum::<u64>(), c1.iter().sum::<u64>());
                    if n0 == 0 || n1 == 0 {
                        continue;
                    }
                    gap += c0
                        .iter()
                        .zip(c1)
                        .map(|(x, y)| (*x as f64 / n0 as f64 - *y as f64 / n1 as f64).abs())
                        .sum::<f64>();
                }
                acc += 0.5 * gap * (arm_scale / split_scale).sqrt();
            }
        }
        persona_total += acc / (2 * NULL_SPLITS) as f64;
    }
    Ok(persona_total / cells.len() as f64)
}

/// Distribution of one question pooled over both arms and all personas.
pub fn marginal_nc_distribution(
    records: &[TrialRecord],
    iteration: u32,
    question: &Question,
) -> Result<DiscreteDistribution> {
    let mut counts = vec![0u64; question.schema.options.len() + 1];
    for r in records.iter().filter(|r| r.iteration == iteration && r.question == question.id) {
        counts[category_index(&question.schema, &r.mapped)] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Data(format!(
            "no records for `{}` in iteration {iteration}",
            question.id
        )));
    }
    counts_to_distribution(&question.schema, &counts)
}

/// Share of retention-check answers equal to the persona's specified value;
/// `None` when the iteration has no retention checks.
pub fn retention_rate(records: &[TrialRecord], iteration: u32, personas: &[Persona]) -> Option<f64> {
    let by_id: HashMap<&str, &Persona> = personas.iter().map(|p| (p.id.as_str(), p)).collect();
    let norm = |s: &str| s.trim().to_lowercase();
    let mut hits = 0usize;
    let mut total = 0usize;
    for r in records
        .iter()
        .filter(|r| r.iteration == iteration && r.kind == QuestionKind::RetentionCheck)
    {
        total += 1;
        let attr = r.question.strip_prefix(RETENTION_PREFIX).unwrap_or(&r.question);
        let expected = by_id.get(r.persona.as_str()).and_then(|p| p.get(attr));
        if expected.is_some_and(|v| norm(v) == norm(&r.mapped)) {
            hits += 1;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub outcome: u64,
    pub negative_control: u64,
    pub confounder: u64,
    pub retention_check: u64,
    pub errors: u64,
    pub total: u64,
}

impl RecordCounts {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut c = Self::default();
        for r in records {
            match r.kind {
                QuestionKind::Outcome => c.outcome += 1,
                QuestionKind::NegativeControl => c.negative_control += 1,
                QuestionKind::Confounder => c.confounder += 1,
                QuestionKind::RetentionCheck => c.retention_check += 1,
            }
            c.errors += u64::from(r.error.is_some());
            c.total += 1;
        }
        c
    }
}

/// Persona-averaged answer distributions for one question under each arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDistributions {
    pub question: String,
    pub kind: QuestionKind,
    pub support: Vec<String>,
    /// Indexed by arm.
    pub probs: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub question: String,
    pub support: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableTvd {
    pub question: String,
    pub tvd: f64,
}

/// Oracle values for the iteration's personas and assignments, averaged over
/// personas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub mean_tvd: f64,
    pub tau_obs: f64,
    pub tau_ate_mix: f64,
    pub tau_ate_prior: f64,
    pub sb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub ci_method: String,
    pub resamples: usize,
    pub level: f64,
    pub tvd_pooling: String,
    pub unknown_outcome_policy: String,
    pub null_splits: usize,
}

impl ReportMetadata {
    fn new(b: BootstrapConfig) -> Self {
        Self {
            ci_method: "percentile bootstrap over personas (cluster); intervals widened to contain the point estimate".into(),
            resamples: b.resamples,
            level: b.level,
            tvd_pooling: "half the summed absolute gaps over all categories of all negative controls".into(),
            unknown_outcome_policy: "Unknown outcomes excluded from means; personas with only Unknown in an arm excluded from that arm".into(),
            null_splits: NULL_SPLITS,
        }
    }
}

/// Everything estimated for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub run_id: String,
    pub iteration: u32,
    pub personas: Vec<PersonaTvd>,
    pub mean_tvd: f64,
    pub mean_tvd_ci: Interval,
    /// Pooled mean TVD divided by the number of negative controls; in [0, 1].
    pub mean_tvd_normalized: f64,
    pub mean_tvd_per_variable: Vec<VariableTvd>,
    pub observed_effect: f64,
    pub effect_ci: Interval,
    pub arm_outcome_means: [f64; 2],
    pub unknown_outcomes: [u64; 2],
    pub excluded_personas: [usize; 2],
    pub null_tvd: Option<f64>,
    pub distributions: Vec<ArmDistributions>,
    pub marginals: Vec<Marginal>,
    pub retention_rate: Option<f64>,
    pub counts: RecordCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSummary>,
    pub metadata: ReportMetadata,
}

/// Inputs shared by every report of a run.
pub struct ReportContext<'a> {
    pub run_id: &'a str,
    pub outcome: &'a Question,
    pub negative_controls: &'a [Question],
    pub personas: &'a [Persona],
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
}

/// Builds the report for `iteration` from that iteration's records.
pub fn iteration_report(
    records: &[TrialRecord],
    iteration: u32,
    ctx: &ReportContext<'_>,
    exact: Option<ExactSummary>,
) -> Result<IterationReport> {
    let own: Vec<&TrialRecord> = records.iter().filter(|r| r.iteration == iteration).collect();
    let index = RecordIndex::new(own.iter().copied());
    let ids: Vec<String> = ctx.personas.iter().map(|p| p.id.clone()).collect();

    let personas = ids
        .iter()
        .map(|p| persona_tvd(&index, p, ctx.negative_controls))
        .collect::<Result<Vec<_>>>()?;
    let tvds: Vec<f64> = personas.iter().map(|p| p.tvd).collect();
    let mean_tvd = tvds.iter().sum::<f64>() / tvds.len().max(1) as f64;
    let tvd_seed = derive_seed(ctx.seed, "bootstrap/tvd", iteration as u64);
    let mean_tvd_ci = bootstrap_ci(&tvds, mean, ctx.bootstrap, tvd_seed)?.including(mean_tvd);
    let m = ctx.negative_controls.len().max(1) as f64;
    let mean_tvd_per_variable = ctx
        .negative_controls
        .iter()
        .enumerate()
        .map(|(j, q)| VariableTvd {
            question: q.id.clone(),
            tvd: personas.iter().map(|p| p.per_variable[j]).sum::<f64>() / personas.len().max(1) as f64,
        })
        .collect();

    let outcomes = persona_outcomes(&index, &ids, ctx.outcome)?;
    let refs: Vec<&PersonaOutcome> = outcomes.iter().collect();
    let effect = effect_of(&refs).ok_or_else(|| Error::Data("an arm has no persona with a known outcome".into()))?;
    let effect_seed = derive_seed(ctx.seed, "bootstrap/effect", iteration as u64);
    let effect_ci = bootstrap_ci(&outcomes, |u| effect_of(u).map(|e| e.effect), ctx.bootstrap, effect_seed)?
        .including(effect.effect);
    let mut unknown_outcomes = [0u64; 2];
    for r in own
        .iter()
        .filter(|r| r.kind == QuestionKind::Outcome && r.mapped == UNKNOWN)
    {
        unknown_outcomes[r.arm.index()] += 1;
    }

    let owned: Vec<TrialRecord> = own.iter().map(|r| (*r).clone()).collect();
    let null_tvd = null_tvd_reference(&owned, iteration, ctx.negative_controls, ctx.seed).ok();

    let mut distributions = Vec::new();
    let mut marginals = Vec::new();
    let listed = std::iter::once((ctx.outcome, QuestionKind::Outcome))
        .chain(ctx.negative_controls.iter().map(|q| (q, QuestionKind::NegativeControl)));
    for (q, kind) in listed {
        let width = q.schema.options.len() + 1;
        let mut probs = [vec![0.0; width], vec![0.0; width]];
        for arm in Arm::BOTH {
            for p in &ids {
                let d = index.distribution(p, q, arm)?;
                for (acc, v) in probs[arm.index()].iter_mut().zip(d.probs()) {
                    *acc += v / ids.len() as f64;
                }
            }
        }
        distributions.push(ArmDistributions {
            question: q.id.clone(),
            kind,
            support: q.schema.support_with_unknown(),
            probs,
        });
        if kind == QuestionKind::NegativeControl {
            let d = marginal_nc_distribution(&owned, iteration, q)?;
            marginals.push(Marginal {
                question: q.id.clone(),
                support: d.support().to_vec(),
                probs: d.probs().to_vec(),
            });
        }
    }

    Ok(IterationReport {
        run_id: ctx.run_id.to_string(),
        iteration,
        personas,
        mean_tvd,
        mean_tvd_ci,
        mean_tvd_normalized: mean_tvd / m,
        mean_tvd_per_variable,
        observed_effect: effect.effect,
        effect_ci,
        arm_outcome_means: effect.arm_means,
        unknown_outcomes,
        excluded_personas: effect.excluded,
        null_tvd,
        distributions,
        marginals,
        retention_rate: retention_rate(&owned, iteration, ctx.personas),
        counts: RecordCounts::of(own.iter().copied()),
        exact,
        metadata: ReportMetadata::new(ctx.bootstrap),
    })
}

pub const SUMMARY_COLUMNS: &str = "iteration,mean_tvd,tvd_lo,tvd_hi,effect,effect_lo,effect_hi,null_tvd";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per report. Fails if the reports come from different runs.
pub fn summary_csv(reports: &[IterationReport]) -> Result<String> {
    let runs: BTreeSet<&str> = reports.iter().map(|r| r.run_id.as_str()).collect();
    if runs.len() > 1 {
        return Err(Error::Data(format!("reports come from several runs: {runs:?}")));
    }
    if reports.is_empty() {
        return Err(Error::Data("no reports".into()));
    }
    let mut out = String::from(
        "# columns: iteration, pooled mean TVD over personas, its CI bounds, observed effect, its CI bounds, null TVD reference (empty if unavailable)\n",
    );
    out.push_str(SUMMARY_COLUMNS);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.mean_tvd,
            r.mean_tvd_ci.lo,
            r.mean_tvd_ci.hi,
            r.observed_effect,
            r.effect_ci.lo,
            r.effect_ci.hi,
            opt(r.null_tvd)
        ));
    }
    Ok(out)
}
