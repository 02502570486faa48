//! Discrete structural causal models used as the simulated respondent world.
//!
//! The graph is fixed: observed persona attributes `L` generate latent
//! attributes `X`; `(X, L)` generate the treatment `A`; `(A, X, L)` generate
//! the outcome `Y`; negative controls `Z_j` and elicitable confounders `L'_k`
//! are children of `(X, L)` only. Every conditional probability table is a
//! list of rows, one per joint configuration of its parents enumerated in
//! row-major order of the declared parent list (first parent varies slowest),
//! each row a distribution over the child's states.
//!
//! The latent posterior seen by an *abductive* respondent includes the
//! observational treatment likelihood `P(A = arm | X, L)`; a *randomized*
//! respondent omits it, so its latent population is the same under both arms.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::distribution::{pooled_tvd, DiscreteDistribution, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::Arm;

pub const DEFAULT_STATE_SPACE_CAP: u64 = 1_000_000;

/// Variable name → state name.
pub type Assignment = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, states: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    fn state_index(&self, state: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| Error::UnknownVariable(format!("`{state}` is not a state of `{}`", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeVariable {
    pub name: String,
    pub states: Vec<String>,
    /// Numeric value per state; defaults to `1..=k` in state order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<Vec<f64>>,
}

impl OutcomeVariable {
    pub fn encoding(&self) -> Vec<f64> {
        self.encoding
            .clone()
            .unwrap_or_else(|| (1..=self.states.len()).map(|v| v as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    pub parents: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpts {
    /// `P(X | L)`, joint over all latent variables.
    pub latent: Cpt,
    /// `P(A | X, L)` with rows `[P(A=0), P(A=1)]`.
    pub treatment: Cpt,
    /// `P(Y | A, X, L)`.
    pub outcome: Cpt,
    #[serde(default)]
    pub negative_controls: Vec<Cpt>,
    #[serde(default)]
    pub confounders: Vec<Cpt>,
}

/// Serialized form of a discrete SCM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub name: String,
    pub l_vars: Vec<Variable>,
    pub x_vars: Vec<Variable>,
    #[serde(default = "default_treatment")]
    pub treatment: String,
    pub outcome: OutcomeVariable,
    #[serde(default)]
    pub z_vars: Vec<Variable>,
    #[serde(default)]
    pub lprime_vars: Vec<Variable>,
    pub cpts: Cpts,
    #[serde(default = "default_cap")]
    pub state_space_cap: u64,
}

fn default_treatment() -> String {
    "A".into()
}

fn default_cap() -> u64 {
    DEFAULT_STATE_SPACE_CAP
}

/// Which latent posterior a respondent uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RespondentMode {
    /// The posterior over latents conditions on the treatment context.
    #[default]
    Abductive,
    /// The posterior over latents ignores the treatment (a fixed population).
    Randomized,
}

fn joint_card(vars: &[Variable]) -> u64 {
    vars.iter().map(|v| v.states.len() as u64).product()
}

fn joint_names(vars: &[Variable]) -> Vec<String> {
    let mut names = vec![String::new()];
    for (i, v) in vars.iter().enumerate() {
        let mut next = Vec::with_capacity(names.len() * v.states.len());
        for prefix in &names {
            for s in &v.states {
                next.push(if i == 0 { s.clone() } else { format!("{prefix}|{s}") });
            }
        }
        names = next;
    }
    names
}

/// Checks every structural and numerical invariant, returning all violations.
pub fn validate_spec(spec: &ScmSpec) -> std::result::Result<(), Vec<String>> {
    let mut v = Vec::new();

    let mut names: Vec<&str> = Vec::new();
    let all_vars = spec
        .l_vars
        .iter()
        .chain(&spec.x_vars)
        .chain(&spec.z_vars)
        .chain(&spec.lprime_vars);
    for var in all_vars.clone() {
        names.push(&var.name);
    }
    names.push(&spec.treatment);
    names.push(&spec.outcome.name);
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() {
            v.push("variable with empty name".to_string());
        } else if names[..i].contains(n) {
            v.push(format!("duplicate variable name `{n}`"));
        }
    }
    let check_states = |name: &str, states: &[String], v: &mut Vec<String>| {
        if states.len() < 2 {
            v.push(format!("variable `{name}` needs at least two states"));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                v.push(format!("variable `{name}` repeats state `{s}`"));
            }
        }
    };
    for var in all_vars {
        check_states(&var.name, &var.states, &mut v);
    }
    check_states(&spec.outcome.name, &spec.outcome.states, &mut v);
    if let Some(enc) = &spec.outcome.encoding {
        if enc.len() != spec.outcome.states.len() {
            v.push(format!(
                "outcome encoding has {} values for {} states",
                enc.len(),
                spec.outcome.states.len()
            ));
        }
        if enc.iter().any(|e| !e.is_finite()) {
            v.push("outcome encoding has a non-finite value".into());
        }
    }
    if spec.l_vars.is_empty() {
        v.push("at least one observed persona variable is required".into());
    }
    if spec.x_vars.is_empty() {
        v.push("at least one latent variable is required".into());
    }

    let nl = joint_card(&spec.l_vars);
    let nx = joint_card(&spec.x_vars);
    if nl.saturating_mul(nx) > spec.state_space_cap {
        v.push(format!(
            "state space |X|x|L| = {} exceeds cap {}",
            nl.saturating_mul(nx),
            spec.state_space_cap
        ));
        return Err(v);
    }

    let card_of = |name: &str| -> Option<u64> {
        if name == spec.treatment {
            return Some(2);
        }
        spec.l_vars
            .iter()
            .chain(&spec.x_vars)
            .find(|var| var.name == name)
            .map(|var| var.states.len() as u64)
    };
    let lnames: Vec<String> = spec.l_vars.iter().map(|x| x.name.clone()).collect();
    let xnames: Vec<String> = spec.x_vars.iter().map(|x| x.name.clone()).collect();
    let lx: Vec<String> = lnames.iter().chain(&xnames).cloned().collect();
    let alx: Vec<String> = std::iter::once(spec.treatment.clone()).chain(lx.iter().cloned()).collect();

    let check_cpt = |label: &str, cpt: &Cpt, expected: &[String], child_card: u64, v: &mut Vec<String>| {
        let mut structural_ok = true;
        for p in &cpt.parents {
            if card_of(p).is_none() {
                v.push(format!("cpt `{label}` references undeclared parent `{p}`"));
                structural_ok = false;
            }
        }
        if structural_ok && cpt.parents != expected {
            v.push(format!("cpt `{label}` must have parents {expected:?}, found {:?}", cpt.parents));
            structural_ok = false;
        }
        if !structural_ok {
            return;
        }
        let rows: u64 = cpt.parents.iter().filter_map(|p| card_of(p)).product();
        if cpt.table.len() as u64 != rows {
            v.push(format!("cpt `{label}` has {} rows, expected {rows}", cpt.table.len()));
        }
        for (r, row) in cpt.table.iter().enumerate() {
            if row.len() as u64 != child_card {
                v.push(format!("cpt `{label}` row {r} has {} entries, expected {child_card}", row.len()));
                continue;
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                v.push(format!("cpt `{label}` row {r} has a negative or non-finite entry"));
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                v.push(format!("cpt `{label}` row {r} sums to {sum}"));
            }
        }
    };

    check_cpt("X", &spec.cpts.latent, &lnames, nx, &mut v);
    check_cpt(&spec.treatment, &spec.cpts.treatment, &lx, 2, &mut v);
    check_cpt(
        &spec.outcome.name,
        &spec.cpts.outcome,
        &alx,
        spec.outcome.states.len() as u64,
        &mut v,
    );
    for (group, vars, cpts) in [
        ("negative control", &spec.z_vars, &spec.cpts.negative_controls),
        ("confounder", &spec.lprime_vars, &spec.cpts.confounders),
    ] {
        if vars.len() != cpts.len() {
            v.push(format!("{} {group} variables but {} tables", vars.len(), cpts.len()));
            continue;
        }
        for (var, cpt) in vars.iter().zip(cpts) {
            if cpt.variable.as_deref() != Some(var.name.as_str()) {
                v.push(format!(
                    "{group} table for `{}` is labelled {:?}",
                    var.name, cpt.variable
                ));
            }
            check_cpt(&var.name, cpt, &lx, var.states.len() as u64, &mut v);
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

impl ScmSpec {
    /// Malformed specs are reported as [`Error::InvalidScm`], like failed checks.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScm(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// A validated SCM with flattened tables, ready for exact queries.
#[derive(Debug, Clone)]
pub struct Scm {
    spec: ScmSpec,
    nl: usize,
    nx: usize,
    x_names: Vec<String>,
    // [l][x]
    p_x: Vec<f64>,
    // [l][x] -> P(A=1)
    p_a1: Vec<f64>,
    // [a][l][x][y]
    p_y: Vec<f64>,
    // [a][l][x] -> E[Y]
    e_y: Vec<f64>,
    // per variable: [l][x][state]
    p_z: Vec<Vec<f64>>,
    p_lprime: Vec<Vec<f64>>,
}

/// Exact causal quantities for one persona and confounder assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimands {
    pub mu_11: f64,
    pub mu_10: f64,
    pub mu_01: f64,
    pub mu_00: f64,
    pub tau_obs: f64,
    pub tau_ate_prior: f64,
    pub tau_ate_mix: f64,
    pub att: f64,
    pub atc: f64,
    pub sbt: f64,
    pub sbc: f64,
    pub sb: f64,
}

/// Selects a respondent-facing variable of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Outcome,
    NegativeControl(usize),
    Confounder(usize),
}

impl Scm {
    pub fn new(spec: ScmSpec) -> Result<Self> {
        validate_spec(&spec).map_err(Error::InvalidScm)?;
        let nl = joint_card(&spec.l_vars) as usize;
        let nx = joint_card(&spec.x_vars) as usize;
        let ny = spec.outcome.states.len();
        let flat = |t: &[Vec<f64>]| t.iter().flatten().copied().collect::<Vec<f64>>();
        let p_x = flat(&spec.cpts.latent.table);
        let p_a1 = spec.cpts.treatment.table.iter().map(|r| r[1]).collect();
        let p_y = flat(&spec.cpts.outcome.table);
        let enc = spec.outcome.encoding();
        let e_y = spec
            .cpts
            .outcome
            .table
            .iter()
            .map(|row| row.iter().zip(&enc).map(|(p, e)| p * e).sum())
            .collect();
        debug_assert_eq!(p_y.len(), 2 * nl * nx * ny);
        let p_z = spec.cpts.negative_controls.iter().map(|c| flat(&c.table)).collect();
        let p_lprime = spec.cpts.confounders.iter().map(|c| flat(&c.table)).collect();
        Ok(Self {
            x_names: joint_names(&spec.x_vars),
            spec,
            nl,
            nx,
            p_x,
            p_a1,
            p_y,
            e_y,
            p_z,
            p_lprime,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ScmSpec::load(path)?)
    }

    /// The toy model with one binary latent (athlete/casual) that drives
    /// treatment uptake, the negative control and the fitness confounder.
    pub fn toy_drift_v1() -> Self {
        let spec = ScmSpec::from_json(crate::assets::TOY_DRIFT_V1).expect("bundled asset parses");
        Self::new(spec).expect("bundled asset is valid")
    }

    /// Three independent binary latents, each with its own negative control
    /// and a pair of near-deterministic confounder readouts.
    pub fn drift3() -> Self {
        let spec = ScmSpec::from_json(crate::assets::DRIFT3).expect("bundled asset parses");
        Self::new(spec).expect("bundled asset is valid")
    }

    pub fn spec(&self) -> &ScmSpec {
        &self.spec
    }

    pub fn latent_states(&self) -> &[String] {
        &self.x_names
    }

    pub fn latent_card(&self) -> usize {
        self.nx
    }

    /// Joint index of the persona's observed attributes.
    pub fn l_index(&self, l: &Assignment) -> Result<usize> {
        let mut idx = 0;
        for var in &self.spec.l_vars {
            let state = l
                .get(&var.name)
                .ok_or_else(|| Error::UnknownVariable(format!("persona is missing `{}`", var.name)))?;
            idx = idx * var.states.len() + var.state_index(state)?;
        }
        Ok(idx)
    }

    fn assigned_indices(&self, assigned: &Assignment) -> Result<Vec<(usize, usize)>> {
        assigned
            .iter()
            .map(|(name, state)| {
                let k = self
                    .spec
                    .lprime_vars
                    .iter()
                    .position(|v| &v.name == name)
                    .ok_or_else(|| Error::UnknownVariable(format!("`{name}` is not an elicitable confounder")))?;
                Ok((k, self.spec.lprime_vars[k].state_index(state)?))
            })
            .collect()
    }

    pub fn target(&self, name: &str) -> Result<Target> {
        if name == self.spec.outcome.name {
            return Ok(Target::Outcome);
        }
        if let Some(j) = self.spec.z_vars.iter().position(|v| v.name == name) {
            return Ok(Target::NegativeControl(j));
        }
        if let Some(k) = self.spec.lprime_vars.iter().position(|v| v.name == name) {
            return Ok(Target::Confounder(k));
        }
        Err(Error::UnknownVariable(format!("`{name}` is not an outcome, negative control or confounder")))
    }

    pub fn target_states(&self, target: Target) -> &[String] {
        match target {
            Target::Outcome => &self.spec.outcome.states,
            Target::NegativeControl(j) => &self.spec.z_vars[j].states,
            Target::Confounder(k) => &self.spec.lprime_vars[k].states,
        }
    }

    /// Unnormalized posterior weights over joint latent states.
    fn posterior_weights(
        &self,
        li: usize,
        arm: Option<Arm>,
        assigned: &[(usize, usize)],
        mode: RespondentMode,
    ) -> Result<Vec<f64>> {
        let mut w = self.p_x[li * self.nx..(li + 1) * self.nx].to_vec();
        for (x, wx) in w.iter_mut().enumerate() {
            let cell = li * self.nx + x;
            if let (RespondentMode::Abductive, Some(arm)) = (mode, arm) {
                let p1 = self.p_a1[cell];
                *wx *= if arm == Arm::Treatment { p1 } else { 1.0 - p1 };
            }
            for &(k, s) in assigned {
                let card = self.spec.lprime_vars[k].states.len();
                *wx *= self.p_lprime[k][cell * card + s];
            }
        }
        let total: f64 = w.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::DegenerateEvidence(
                "assigned values have zero probability under the model".into(),
            ));
        }
        w.iter_mut().for_each(|v| *v /= total);
        Ok(w)
    }

    /// `q(x) ∝ P(x | l) · [P(A = arm | x, l)] · Π_k P(L'_k = assigned_k | x, l)`.
    pub fn latent_posterior(
        &self,
        l: &Assignment,
        arm: Option<Arm>,
        assigned: &Assignment,
        mode: RespondentMode,
    ) -> Result<DiscreteDistribution> {
        let q = self.posterior_weights(self.l_index(l)?, arm, &self.assigned_indices(assigned)?, mode)?;
        DiscreteDistribution::from_weights(self.x_names.clone(), &q)
    }

    fn answer_probs(&self, li: usize, arm: Arm, target: Target, q: &[f64]) -> Vec<f64> {
        let states = self.target_states(target).len();
        let mut out = vec![0.0; states];
        for (x, qx) in q.iter().enumerate() {
            let cell = li * self.nx + x;
            let row = match target {
                Target::Outcome => {
                    let base = ((arm.index() * self.nl + li) * self.nx + x) * states;
                    &self.p_y[base..base + states]
                }
                Target::NegativeControl(j) => &self.p_z[j][cell * states..(cell + 1) * states],
                Target::Confounder(k) => &self.p_lprime[k][cell * states..(cell + 1) * states],
            };
            for (o, p) in out.iter_mut().zip(row) {
                *o += qx * p;
            }
        }
        out
    }

    /// Distribution of a respondent's answer for one variable under an arm.
    pub fn answer_distribution(
        &self,
        l: &Assignment,
        arm: Arm,
        variable: &str,
        assigned: &Assignment,
        mode: RespondentMode,
    ) -> Result<DiscreteDistribution> {
        let target = self.target(variable)?;
        self.answer_distribution_for(l, arm, target, assigned, mode)
    }

    pub fn answer_distribution_for(
        &self,
        l: &Assignment,
        arm: Arm,
        target: Target,
        assigned: &Assignment,
        mode: RespondentMode,
    ) -> Result<DiscreteDistribution> {
        let li = self.l_index(l)?;
        let q = self.posterior_weights(li, Some(arm), &self.assigned_indices(assigned)?, mode)?;
        let probs = self.answer_probs(li, arm, target, &q);
        DiscreteDistribution::from_weights(self.target_states(target).to_vec(), &probs)
    }

    /// `μ_{a,a'} = Σ_x E[Y | A=a, x, l] · P(x | A=a', l, assigned)`.
    pub fn exact_mu(
        &self,
        l: &Assignment,
        a: Arm,
        conditioning: Arm,
        assigned: &Assignment,
        mode: RespondentMode,
    ) -> Result<f64> {
        let li = self.l_index(l)?;
        let q = self.posterior_weights(li, Some(conditioning), &self.assigned_indices(assigned)?, mode)?;
        Ok(self.mu_from(li, a, &q))
    }

    fn mu_from(&self, li: usize, a: Arm, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(x, qx)| self.e_y[(a.index() * self.nl + li) * self.nx + x] * qx)
            .sum()
    }

    pub fn exact_estimands(&self, l: &Assignment, assigned: &Assignment, mode: RespondentMode) -> Result<Estimands> {
        let li = self.l_index(l)?;
        let asg = self.assigned_indices(assigned)?;
        let q1 = self.posterior_weights(li, Some(Arm::Treatment), &asg, mode)?;
        let q0 = self.posterior_weights(li, Some(Arm::Control), &asg, mode)?;
        let prior = self.posterior_weights(li, None, &asg, RespondentMode::Randomized)?;
        let mu_11 = self.mu_from(li, Arm::Treatment, &q1);
        let mu_10 = self.mu_from(li, Arm::Treatment, &q0);
        let mu_01 = self.mu_from(li, Arm::Control, &q1);
        let mu_00 = self.mu_from(li, Arm::Control, &q0);
        let tau_ate_prior = self.mu_from(li, Arm::Treatment, &prior) - self.mu_from(li, Arm::Control, &prior);
        let att = mu_11 - mu_01;
        let atc = mu_10 - mu_00;
        let sbt = mu_11 - mu_10;
        let sbc = mu_01 - mu_00;
        Ok(Estimands {
            mu_11,
            mu_10,
            mu_01,
            mu_00,
            tau_obs: mu_11 - mu_00,
            tau_ate_prior,
            tau_ate_mix: (att + atc) / 2.0,
            att,
            atc,
            sbt,
            sbc,
            sb: (sbt + sbc) / 2.0,
        })
    }

    /// Implied `P(A = 1 | l, assigned)` under the observational model.
    pub fn implied_treatment_rate(&self, l: &Assignment, assigned: &Assignment) -> Result<f64> {
        let li = self.l_index(l)?;
        let prior = self.posterior_weights(li, None, &self.assigned_indices(assigned)?, RespondentMode::Randomized)?;
        Ok(prior
            .iter()
            .enumerate()
            .map(|(x, q)| q * self.p_a1[li * self.nx + x])
            .sum())
    }

    /// Per-variable TVD between arms for the listed negative controls.
    pub fn exact_tvd_per_variable(
        &self,
        l: &Assignment,
        z_subset: &[&str],
        assigned: &Assignment,
        mode: RespondentMode,
    ) -> Result<Vec<f64>> {
        let li = self.l_index(l)?;
        let asg = self.assigned_indices(assigned)?;
        let q1 = self.posterior_weights(li, Some(Arm::Treatment), &asg, mode)?;
        let q0 = self.posterior_weights(li, Some(Arm::Control), &asg, mode)?;
        z_subset
            .iter()
            .map(|name| {
                let target = match self.target(name)? {
                    t @ Target::NegativeControl(_) => t,
                    _ => return Err(Error::UnknownVariable(format!("`{name}` is not a negative control"))),
                };
                let p1 = self.answer_probs(li, Arm::Treatment, target, &q1);
                let p0 = self.answer_probs(li, Arm::Control, target, &q0);
                Ok(0.5 * p1.iter().zip(&p0).map(|(a, b)| (a - b).abs()).sum::<f64>())
            })
            .collect()
    }

    /// Pooled TVD: half the summed absolute arm gaps over every category of
    /// every listed negative control.
    pub fn exact_tvd(&self, l: &Assignment, z_subset: &[&str], assigned: &Assignment, mode: RespondentMode) -> Result<f64> {
        let mut pairs = Vec::with_capacity(z_subset.len());
        for name in z_subset {
            let p1 = self.answer_distribution(l, Arm::Treatment, name, assigned, mode)?;
            let p0 = self.answer_distribution(l, Arm::Control, name, assigned, mode)?;
            pairs.push((p1, p0));
        }
        pooled_tvd(pairs.iter().map(|(a, b)| (a, b)))
    }

    pub fn z_names(&self) -> Vec<&str> {
        self.spec.z_vars.iter().map(|v| v.name.as_str()).collect()
    }
}

/// Sizes for [`generate_random_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDims {
    pub n_l: usize,
    pub n_x: usize,
    pub card: usize,
    pub n_z: usize,
    pub n_lprime: usize,
}

const BALANCE_RETRIES: usize = 1000;

fn dirichlet_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

fn dirichlet_table(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| dirichlet_row(rng, k)).collect()
}

/// Random SCM with CPT rows drawn from a flat Dirichlet. When `balanced`, each
/// persona's treatment propensities are shifted so that the implied
/// `P(A = 1 | l)` is exactly one half.
pub fn generate_random_spec(seed: u64, dims: SpecDims, balanced: bool) -> Result<ScmSpec> {
    if dims.n_l == 0 || dims.n_x == 0 || dims.card < 2 {
        return Err(Error::Config("random spec needs n_l ≥ 1, n_x ≥ 1, card ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<String> = (0..dims.card).map(|i| format!("s{i}")).collect();
    let vars = |prefix: &str, n: usize| -> Vec<Variable> {
        (0..n).map(|i| Variable::new(format!("{prefix}{i}"), states.clone())).collect()
    };
    let l_vars = vars("l", dims.n_l);
    let x_vars = vars("x", dims.n_x);
    let z_vars = vars("z", dims.n_z);
    let lprime_vars = vars("lp", dims.n_lprime);
    let nl = joint_card(&l_vars);
    let nx = joint_card(&x_vars);
    if nl.saturating_mul(nx) > DEFAULT_STATE_SPACE_CAP {
        return Err(Error::Config(format!("random spec state space {} exceeds cap", nl * nx)));
    }
    let (nl, nx) = (nl as usize, nx as usize);

    let latent = dirichlet_table(&mut rng, nl, nx);
    let mut a1 = vec![0.0; nl * nx];
    for li in 0..nl {
        let mut ok = false;
        for _ in 0..BALANCE_RETRIES {
            let row: Vec<f64> = (0..nx).map(|_| rng.random::<f64>()).collect();
            if !balanced {
                a1[li * nx..(li + 1) * nx].copy_from_slice(&row);
                ok = true;
                break;
            }
            let m: f64 = row.iter().zip(&latent[li]).map(|(p, w)| p * w).sum();
            let shift = 0.5 - m;
            let shifted: Vec<f64> = row.iter().map(|p| p + shift).collect();
            if shifted.iter().all(|p| *p > 0.0 && *p < 1.0) {
                a1[li * nx..(li + 1) * nx].copy_from_slice(&shifted);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Config(format!(
                "could not balance treatment propensities for persona row {li} after {BALANCE_RETRIES} tries"
            )));
        }
    }
    let lnames: Vec<String> = l_vars.iter().map(|v| v.name.clone()).collect();
    let lx: Vec<String> = l_vars.iter().chain(&x_vars).map(|v| v.name.clone()).collect();
    let alx: Vec<String> = std::iter::once("A".to_string()).chain(lx.iter().cloned()).collect();
    let outcome = Cpt {
        variable: Some("Y".into()),
        parents: alx,
        table: dirichlet_table(&mut rng, 2 * nl * nx, dims.card),
    };
    let child = |rng: &mut ChaCha8Rng, var: &Variable| Cpt {
        variable: Some(var.name.clone()),
        parents: lx.clone(),
        table: dirichlet_table(rng, nl * nx, var.states.len()),
    };
    let negative_controls = z_vars.iter().map(|v| child(&mut rng, v)).collect();
    let confounders = lprime_vars.iter().map(|v| child(&mut rng, v)).collect();
    let spec = ScmSpec {
        name: format!("random-{seed}{}", if balanced { "-balanced" } else { "" }),
        l_vars,
        x_vars,
        treatment: "A".into(),
        outcome: OutcomeVariable {
            name: "Y".into(),
            states: states.clone(),
            encoding: None,
        },
        z_vars,
        lprime_vars,
        cpts: Cpts {
            latent: Cpt {
                variable: Some("X".into()),
                parents: lnames,
                table: latent,
            },
            treatment: Cpt {
                variable: Some("A".into()),
                parents: lx.clone(),
                table: a1.iter().map(|p| vec![1.0 - p, *p]).collect(),
            },
            outcome,
            negative_controls,
            confounders,
        },
        state_space_cap: DEFAULT_STATE_SPACE_CAP,
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l() -> Assignment {
        [("sex".to_string(), "female".to_string())].into()
    }

    fn fit() -> Assignment {
        [("fitness".to_string(), "fit".to_string())].into()
    }

    #[test]
    fn toy_posterior() {
        let scm = Scm::toy_drift_v1();
        let q = scm
            .latent_posterior(&l(), Some(Arm::Treatment), &Assignment::new(), RespondentMode::Abductive)
            .unwrap();
        assert!((q.prob_of("athlete").unwrap() - 0.8).abs() < 1e-12);
        let q = scm
            .latent_posterior(&l(), Some(Arm::Treatment), &Assignment::new(), RespondentMode::Randomized)
            .unwrap();
        assert!((q.prob_of("athlete").unwrap() - 0.5).abs() < 1e-12);
        let q = scm
            .latent_posterior(&l(), Some(Arm::Treatment), &fit(), RespondentMode::Abductive)
            .unwrap();
        assert!((q.prob_of("athlete").unwrap() - 36.0 / 37.0).abs() < 1e-12);
    }

    #[test]
    fn toy_answer_distribution() {
        let scm = Scm::toy_drift_v1();
        let none = Assignment::new();
        let z1 = scm
            .answer_distribution(&l(), Arm::Treatment, "Z", &none, RespondentMode::Abductive)
            .unwrap();
        let z0 = scm
            .answer_distribution(&l(), Arm::Control, "Z", &none, RespondentMode::Abductive)
            .unwrap();
        assert!((z1.prob_of("yes").unwrap() - 0.74).abs() < 1e-12);
        assert!((z0.prob_of("yes").unwrap() - 0.26).abs() < 1e-12);
    }

    #[test]
    fn toy_mu_values() {
        let scm = Scm::toy_drift_v1();
        let none = Assignment::new();
        let mu = |a, b| scm.exact_mu(&l(), a, b, &none, RespondentMode::Abductive).unwrap();
        assert!((mu(Arm::Treatment, Arm::Treatment) - 0.82).abs() < 1e-12);
        assert!((mu(Arm::Control, Arm::Control) - 0.44).abs() < 1e-12);
        assert!((mu(Arm::Control, Arm::Treatment) - 0.56).abs() < 1e-12);
        assert!((mu(Arm::Treatment, Arm::Control) - 0.58).abs() < 1e-12);
    }

    #[test]
    fn toy_tvd_values() {
        let scm = Scm::toy_drift_v1();
        let tvd = scm
            .exact_tvd(&l(), &["Z"], &Assignment::new(), RespondentMode::Abductive)
            .unwrap();
        assert!((tvd - 0.48).abs() < 1e-12);
        let tvd = scm.exact_tvd(&l(), &["Z"], &fit(), RespondentMode::Abductive).unwrap();
        assert!((tvd - 108.0 / 481.0).abs() < 1e-12);
        let tvd = scm.exact_tvd(&l(), &["Z"], &fit(), RespondentMode::Randomized).unwrap();
        assert_eq!(tvd, 0.0);
    }

    #[test]
    fn row_sum_violation_names_the_row() {
        let mut spec = Scm::toy_drift_v1().spec().clone();
        spec.cpts.negative_controls[0].table[1] = vec![0.5, 0.48];
        let v = validate_spec(&spec).unwrap_err();
        assert!(v.iter().any(|m| m.contains("row 1") && m.contains("`Z`")), "{v:?}");
    }

    #[test]
    fn undeclared_parent_is_reported() {
        let mut spec = Scm::toy_drift_v1().spec().clone();
        spec.cpts.treatment.parents.push("weather".into());
        let v = validate_spec(&spec).unwrap_err();
        assert!(v.iter().any(|m| m.contains("undeclared parent `weather`")), "{v:?}");
    }

    #[test]
    fn impossible_evidence_is_degenerate() {
        let mut spec = Scm::toy_drift_v1().spec().clone();
        spec.cpts.confounders[0].table = vec![vec![1.0, 0.0]; 4];
        let scm = Scm::new(spec).unwrap();
        let err = scm
            .latent_posterior(&l(), None, &fit(), RespondentMode::Abductive)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateEvidence(_)));
    }

    #[test]
    fn random_specs_are_valid_and_deterministic() {
        let dims = SpecDims {
            n_l: 1,
            n_x: 2,
            card: 2,
            n_z: 2,
            n_lprime: 1,
        };
        let a = generate_random_spec(2, dims, false).unwrap();
        assert!(validate_spec(&a).is_ok());
        assert_eq!(a, generate_random_spec(2, dims, false).unwrap());

        let b = Scm::new(generate_random_spec(1, dims, true).unwrap()).unwrap();
        for s in ["s0", "s1"] {
            let l: Assignment = [("l0".to_string(), s.to_string())].into();
            let rate = b.implied_treatment_rate(&l, &Assignment::new()).unwrap();
            assert!((rate - 0.5).abs() < 1e-12);
        }
    }
}
