//! Experiment configuration, orchestration and output files.
//!
//! A run directory holds `records.jsonl` (sorted trial records),
//! `report_<k>.json` per iteration, `summary.json`, `checkpoint.json` (the
//! resumable [`RunState`]) and `run_meta.json` (wall-clock timing, the only
//! file that differs between identical runs).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::adjust::{AdjustConfig, Experiment, RunState, StopReason};
use crate::error::{Error, Result};
use crate::estimate::{read_records, sort_records, summary_csv, write_records, BootstrapConfig, IterationReport, TrialRecord};
use crate::population::{load_personas, AttributeSchema, Persona, QuestionBank};
use crate::respondent::{
    scm_question_bank, ChatModel, HttpChatModel, LlmRespondent, LlmSettings, ReplayModel, ReplayStore, Respondent,
    Scenario, ScmRespondent,
};
use crate::scm::{validate_spec, Assignment, RespondentMode, Scm, ScmSpec};
use crate::{assets, derive_seed, Arm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scm,
    Llm,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmBackend {
    pub scm: PathBuf,
    #[serde(default)]
    pub mode: RespondentMode,
    /// Question id → SCM variable; not needed when the bank comes from the SCM.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub question_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBackend {
    pub user: LlmSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<LlmSettings>,
    /// Record every reply into this replay store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_to: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBackend {
    pub store: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PersonaConfig {
    /// CSV or TSV file with one column per schema.
    File {
        path: PathBuf,
        n: usize,
        schemas: Vec<AttributeSchema>,
    },
    /// Observed SCM variables drawn uniformly at random.
    ScmUniform { n: usize },
}

fn default_group_size() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BankConfig {
    File {
        path: PathBuf,
    },
    /// One of `opinionqa`, `book_opinions`, `movielens`.
    Bundled {
        name: String,
    },
    /// Mirror the SCM's variables, confounders split into groups.
    Scm {
        #[serde(default = "default_group_size")]
        group_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scm: Option<ScmBackend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmBackend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplayBackend>,
    pub personas: PersonaConfig,
    pub question_bank: BankConfig,
    pub adjust: AdjustConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Identifier shared by every output of a run with this exact config.
    /// Hash of the experiment settings. Where the outputs go does not count.
    pub fn run_id(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

/// A config plus the directory its relative paths are resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            config: ExperimentConfig::from_json(&text)?,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            // Already relative to the working directory, not the config.
            self.config.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(seed) = o.seed {
            self.config.seed = seed;
        }
        if let Some(b) = o.backend {
            self.config.backend = b;
        }
        if let Some(m) = o.max_iterations {
            self.config.adjust.max_iterations = Some(m);
        }
    }
}

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub max_iterations: Option<u32>,
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("file not found: {}", p.display())))
    }
}

/// Uniformly drawn observed SCM values, ids `p000`, `p001`, ...
pub fn scm_personas(scm: &Scm, n: usize, seed: u64) -> Result<Vec<Persona>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "personas", 0));
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n)
        .map(|i| {
            let attrs: Vec<(String, String)> = scm
                .spec()
                .l_vars
                .iter()
                .map(|v| (v.name.clone(), v.states[rng.random_range(0..v.states.len())].clone()))
                .collect();
            Persona::new(format!("p{i:0width$}"), attrs)
        })
        .collect()
}

/// Everything a run needs, built from a config.
pub struct Prepared {
    pub loaded: LoadedConfig,
    pub run_id: String,
    pub bank: QuestionBank,
    pub personas: Vec<Persona>,
    pub with_replacement: bool,
    pub respondent: Arc<dyn Respondent>,
    pub oracle: Option<Arc<ScmRespondent>>,
    pub replay_store: Option<Arc<ReplayStore>>,
}

impl Prepared {
    pub fn new(loaded: LoadedConfig) -> Result<Self> {
        let cfg = &loaded.config;
        cfg.scenario.validate()?;
        cfg.bootstrap.validate()?;
        let title = match &cfg.scenario {
            Scenario::AgentDialogue { title, .. } => title.clone(),
            Scenario::Survey { .. } => String::new(),
        };

        let scm = match (&cfg.scm, cfg.backend) {
            (Some(s), _) => {
                let path = loaded.resolve(&s.scm);
                require_file(&path)?;
                Some(Arc::new(Scm::load(&path)?))
            }
            (None, BackendKind::Scm) => return Err(Error::Config("backend `scm` selected but no `scm` section".into())),
            (None, _) => None,
        };

        let (bank, generated_map) = match &cfg.question_bank {
            BankConfig::File { path } => {
                let path = loaded.resolve(path);
                require_file(&path)?;
                (QuestionBank::load(&path)?, None)
            }
            BankConfig::Bundled { name } => {
                let text = match name.as_str() {
                    "opinionqa" => assets::OPINIONQA_BANK,
                    "book_opinions" => assets::BOOK_BANK,
                    "movielens" => assets::MOVIE_BANK,
                    other => return Err(Error::Config(format!("no bundled question bank `{other}`"))),
                };
                (QuestionBank::from_json(text)?, None)
            }
            BankConfig::Scm { group_size } => {
                let scm = scm
                    .as_ref()
                    .ok_or_else(|| Error::Config("question bank from SCM needs an `scm` section".into()))?;
                let (b, m) = scm_question_bank(scm, *group_size)?;
                (b, Some(m))
            }
        };
        let bank = if title.is_empty() { bank } else { bank.with_title(&title) };
        cfg.adjust.validate(bank.confounder_groups.len())?;

        let (personas, with_replacement) = match &cfg.personas {
            PersonaConfig::File { path, n, schemas } => {
                let path = loaded.resolve(path);
                require_file(&path)?;
                let s = load_personas(&path, schemas, *n, derive_seed(cfg.seed, "personas", 0))?;
                (s.personas, s.with_replacement)
            }
            PersonaConfig::ScmUniform { n } => {
                let scm = scm
                    .as_ref()
                    .ok_or_else(|| Error::Config("scm_uniform personas need an `scm` section".into()))?;
                (scm_personas(scm, *n, cfg.seed)?, false)
            }
        };
        if personas.len() < 2 {
            return Err(Error::Config("at least two personas are needed for interval estimates".into()));
        }

        let mut oracle = None;
        let mut replay_store = None;
        let respondent: Arc<dyn Respondent> = match cfg.backend {
            BackendKind::Scm => {
                let s = cfg.scm.as_ref().expect("checked above");
                let map = generated_map.clone().unwrap_or_else(|| s.question_map.clone());
                let r = Arc::new(ScmRespondent::new(scm.clone().expect("checked above"), s.mode, &bank, &map)?);
                oracle = Some(r.clone());
                r
            }
            BackendKind::Llm => {
                let l = cfg
                    .llm
                    .as_ref()
                    .ok_or_else(|| Error::Config("backend `llm` selected but no `llm` section".into()))?;
                let mut user: Arc<dyn ChatModel> = Arc::new(HttpChatModel::new(l.user.clone())?);
                let mut agent: Option<Arc<dyn ChatModel>> = match &l.agent {
                    Some(a) => Some(Arc::new(HttpChatModel::new(a.clone())?)),
                    None => None,
                };
                if let Some(p) = &l.record_to {
                    let store = Arc::new(ReplayStore::open(&loaded.resolve(p))?);
                    user = Arc::new(ReplayModel::recording(store.clone(), user));
                    agent = agent.map(|a| Arc::new(ReplayModel::recording(store.clone(), a)) as Arc<dyn ChatModel>);
                    replay_store = Some(store);
                }
                Arc::new(LlmRespondent::new(user, agent))
            }
            BackendKind::Replay => {
                let r = cfg
                    .replay
                    .as_ref()
                    .ok_or_else(|| Error::Config("backend `replay` selected but no `replay` section".into()))?;
                let path = loaded.resolve(&r.store);
                require_file(&path)?;
                let store = Arc::new(ReplayStore::open(&path)?);
                let model: Arc<dyn ChatModel> = Arc::new(ReplayModel::replay_only(store));
                Arc::new(LlmRespondent::new(model.clone(), Some(model)))
            }
        };

        Ok(Self {
            run_id: cfg.run_id(),
            loaded,
            bank,
            personas,
            with_replacement,
            respondent,
            oracle,
            replay_store,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }

    fn persona_schemas(&self) -> Vec<AttributeSchema> {
        match &self.config().personas {
            PersonaConfig::File { schemas, .. } => schemas.clone(),
            PersonaConfig::ScmUniform { .. } => Vec::new(),
        }
    }

    pub fn new_state(&self) -> Result<RunState> {
        RunState::new(self.run_id.clone(), self.personas.clone())
    }

    /// Calls `f` with the experiment described by this config.
    pub fn with_experiment<T>(&self, f: impl FnOnce(&Experiment<'_>) -> T) -> T {
        let schemas = self.persona_schemas();
        let cfg = self.config();
        let exp = Experiment {
            respondent: self.respondent.as_ref(),
            scenario: &cfg.scenario,
            bank: &self.bank,
            config: &cfg.adjust,
            bootstrap: cfg.bootstrap,
            seed: cfg.seed,
            persona_schemas: &schemas,
            oracle: self.oracle.as_deref(),
        };
        f(&exp)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub stop_reason: Option<StopReason>,
    pub iterations: u32,
    pub personas: usize,
    pub personas_sampled_with_replacement: bool,
    pub trials: u32,
    pub mean_tvd: Vec<f64>,
    pub observed_effect: Vec<f64>,
    pub null_tvd: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exact_mean_tvd: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exact_tau_ate_mix: Vec<f64>,
    pub total_records: usize,
}

pub fn report_file_name(iteration: u32) -> String {
    format!("report_{iteration}.json")
}

/// Runs (or resumes) the experiment, writing all outputs into the output
/// directory. On a backend abort the records gathered so far and a
/// `partial_manifest.json` are written before the error is returned.
pub fn run(loaded: LoadedConfig, resume: bool) -> Result<RunSummary> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let prepared = Prepared::new(loaded)?;
    let out = prepared.loaded.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let records_path = out.join("records.jsonl");
    let checkpoint_path = out.join("checkpoint.json");

    let (mut state, mut records) = if resume && checkpoint_path.exists() {
        let state: RunState = read_json(&checkpoint_path)?;
        if state.run_id != prepared.run_id {
            return Err(Error::Config(format!(
                "checkpoint belongs to run {} but the config is run {}",
                state.run_id, prepared.run_id
            )));
        }
        let recs = if records_path.exists() { read_records(&records_path)? } else { Vec::new() };
        let recs = recs.into_iter().filter(|r| r.iteration < state.next_iteration).collect();
        (state, recs)
    } else {
        (prepared.new_state()?, Vec::new())
    };

    let result = prepared.with_experiment(|exp| {
        exp.run(&mut state, |st, new| {
            records.extend_from_slice(new);
            sort_records(&mut records);
            write_records(&records_path, &records)?;
            if let Some(r) = st.reports.last().filter(|r| r.iteration + 1 == st.next_iteration) {
                write_json(&out.join(report_file_name(r.iteration)), r)?;
            }
            write_json(&checkpoint_path, st)
        })
    });
    if let Some(store) = &prepared.replay_store {
        store.compact()?;
    }
    if let Err(e) = result {
        let (message, log) = match &e {
            Error::Backend { message, log, .. } => (message.clone(), log.clone()),
            other => (other.to_string(), Vec::new()),
        };
        write_json(
            &out.join("partial_manifest.json"),
            &json!({
                "run_id": prepared.run_id,
                "failed_iteration": state.next_iteration,
                "records_written": records.len(),
                "error": message,
                "failures": log,
            }),
        )?;
        return Err(e);
    }

    let summary = summarize(&prepared, &state, records.len());
    write_json(&out.join("summary.json"), &summary)?;
    let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    write_json(
        &out.join("run_meta.json"),
        &json!({
            "run_id": prepared.run_id,
            "started_unix": secs(started),
            "finished_unix": secs(SystemTime::now()),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    Ok(summary)
}

fn summarize(prepared: &Prepared, state: &RunState, total_records: usize) -> RunSummary {
    let reports = &state.reports;
    RunSummary {
        run_id: state.run_id.clone(),
        stop_reason: state.stop,
        iterations: state.next_iteration,
        personas: state.personas.len(),
        personas_sampled_with_replacement: prepared.with_replacement,
        trials: prepared.config().adjust.trials,
        mean_tvd: reports.iter().map(|r| r.mean_tvd).collect(),
        observed_effect: reports.iter().map(|r| r.observed_effect).collect(),
        null_tvd: reports.iter().map(|r| r.null_tvd).collect(),
        exact_mean_tvd: reports.iter().filter_map(|r| r.exact.map(|e| e.mean_tvd)).collect(),
        exact_tau_ate_mix: reports.iter().filter_map(|r| r.exact.map(|e| e.tau_ate_mix)).collect(),
        total_records,
    }
}

/// Recomputes reports from a record file by replaying the run's gating and
/// assignment selection. With `only`, returns just that iteration's report.
pub fn recompute_reports(loaded: LoadedConfig, records_path: &Path, only: Option<u32>) -> Result<Vec<IterationReport>> {
    let records = read_records(records_path)?;
    let prepared = Prepared::new(loaded)?;
    let mut state = prepared.new_state()?;
    let mut by_iteration: BTreeMap<u32, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        by_iteration.entry(r.iteration).or_default().push(r);
    }
    let mut out = Vec::new();
    prepared.with_experiment(|exp| -> Result<()> {
        for (k, recs) in &by_iteration {
            if *k != state.next_iteration {
                return Err(Error::Data(format!(
                    "records jump to iteration {k}; expected {}",
                    state.next_iteration
                )));
            }
            if state.stop.is_some() {
                return Err(Error::Data(format!("records continue past the stop at iteration {}", k - 1)));
            }
            let report = exp.advance(&mut state, recs)?;
            if only.is_none_or(|i| i == *k) {
                out.push(report);
            }
        }
        Ok(())
    })?;
    if let Some(i) = only {
        if out.is_empty() {
            return Err(Error::Data(format!("no records for iteration {i}")));
        }
    }
    Ok(out)
}

/// Writes `summary.csv`, `nc_distributions.csv` and `nc_marginals.csv`.
pub fn write_plotdata(reports: &[IterationReport], out: &Path) -> Result<()> {
    let summary = summary_csv(reports)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let p = out.join("summary.csv");
    std::fs::write(&p, summary).map_err(|e| Error::io(&p, e))?;

    let mut dist = String::from("# columns: iteration, negative-control question, arm, answer category, persona-averaged probability\niteration,question,arm,category,probability\n");
    let mut marg = String::from("# columns: iteration, negative-control question, answer category, probability pooled over arms and personas\niteration,question,category,probability\n");
    let field = |s: &str| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    for r in reports {
        for d in r.distributions.iter().filter(|d| d.kind == crate::population::QuestionKind::NegativeControl) {
            for arm in Arm::BOTH {
                for (c, p) in d.support.iter().zip(&d.probs[arm.index()]) {
                    dist.push_str(&format!("{},{},{},{},{}\n", r.iteration, field(&d.question), arm, field(c), p));
                }
            }
        }
        for m in &r.marginals {
            for (c, p) in m.support.iter().zip(&m.probs) {
                marg.push_str(&format!("{},{},{},{}\n", r.iteration, field(&m.question), field(c), p));
            }
        }
    }
    for (name, text) in [("nc_distributions.csv", dist), ("nc_marginals.csv", marg)] {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<IterationReport>> {
    if paths.is_empty() {
        return Err(Error::Data("no report files given".into()));
    }
    let mut reports: Vec<IterationReport> = paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    reports.sort_by_key(|r| r.iteration);
    Ok(reports)
}

/// `report_<k>.json` files of a run directory in iteration order.
pub fn report_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("report_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u32>().ok())
        {
            found.push((k, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Exact quantities for one persona and assignment, as printed by `oracle`.
pub fn oracle_json(scm: &Scm, persona: &Assignment, assigned: &Assignment, mode: RespondentMode) -> Result<serde_json::Value> {
    let est = scm.exact_estimands(persona, assigned, mode)?;
    let z = scm.z_names();
    let tvd = scm.exact_tvd(persona, &z, assigned, mode)?;
    let per_var = scm.exact_tvd_per_variable(persona, &z, assigned, mode)?;
    let posterior = |arm: Option<Arm>, m: RespondentMode| -> Result<BTreeMap<String, f64>> {
        let d = scm.latent_posterior(persona, arm, assigned, m)?;
        Ok(d.support().iter().cloned().zip(d.probs().iter().copied()).collect())
    };
    Ok(json!({
        "scm": scm.spec().name,
        "mode": mode,
        "persona": persona,
        "assigned": assigned,
        "tau_obs": est.tau_obs,
        "sb": est.sb,
        "sbt": est.sbt,
        "sbc": est.sbc,
        "att": est.att,
        "atc": est.atc,
        "tau_ate_mix": est.tau_ate_mix,
        "tau_ate_prior": est.tau_ate_prior,
        "mu": { "11": est.mu_11, "10": est.mu_10, "01": est.mu_01, "00": est.mu_00 },
        "tvd": tvd,
        "tvd_per_variable": z.iter().map(|s| s.to_string()).zip(per_var).collect::<BTreeMap<_, _>>(),
        "implied_treatment_rate": scm.implied_treatment_rate(persona, assigned)?,
        "posterior": {
            "prior": posterior(None, RespondentMode::Randomized)?,
            "arm0": posterior(Some(Arm::Control), mode)?,
            "arm1": posterior(Some(Arm::Treatment), mode)?,
        },
    }))
}

/// Checks an SCM file, returning its violations as an error.
pub fn validate_scm_file(path: &Path) -> Result<ScmSpec> {
    let spec = ScmSpec::load(path)?;
    validate_spec(&spec).map_err(Error::InvalidScm)?;
    Ok(spec)
}

/// Parses `name=value` pairs.
pub fn parse_assignments(pairs: &[String]) -> Result<Assignment> {
    pairs
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected name=value, got `{s}`")))
        })
        .collect()
}

/// Machine-readable error document for standard error.
pub fn error_json(e: &Error) -> serde_json::Value {
    let mut v = json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
            "exit_code": e.exit_code(),
        }
    });
    match e {
        Error::InvalidScm(violations) => v["error"]["violations"] = json!(violations),
        Error::Backend { log, attempts, .. } => {
            v["error"]["attempts"] = json!(attempts);
            v["error"]["log"] = json!(log);
        }
        Error::Io { path, .. } | Error::MalformedLine { path, .. } => v["error"]["path"] = json!(path),
        _ => {}
    }
    v
}
