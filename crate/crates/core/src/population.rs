//! Attribute schemas, personas, answer normalization and persona augmentation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::respondent::Scenario;

/// Implicit extra category for answers that match none of a schema's options.
pub const UNKNOWN: &str = "Unknown";

/// Case-insensitive, whitespace-collapsed form with leading/trailing
/// whitespace and punctuation removed.
fn normalize(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    Categorical,
    FreeText,
}

/// A named attribute with either an ordered option list or free-text answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<BTreeMap<String, f64>>,
}

impl AttributeSchema {
    pub fn categorical<S: Into<String>>(name: impl Into<String>, options: impl IntoIterator<Item = S>) -> Result<Self> {
        let schema = Self {
            name: name.into(),
            options: options.into_iter().map(Into::into).collect(),
            encoding: None,
        };
        if schema.options.is_empty() {
            return Err(Error::Schema(format!("`{}` has no options", schema.name)));
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn free_text(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            options: Vec::new(),
            encoding: None,
        }
    }

    pub fn with_encoding(mut self, values: &[f64]) -> Result<Self> {
        if values.len() != self.options.len() {
            return Err(Error::Schema(format!(
                "`{}`: encoding has {} values for {} options",
                self.name,
                values.len(),
                self.options.len()
            )));
        }
        self.encoding = Some(self.options.iter().cloned().zip(values.iter().copied()).collect());
        self.validate()?;
        Ok(self)
    }

    /// Same schema with the default ordinal encoding `1..=k` in option order.
    pub fn with_ordinal_encoding(self) -> Result<Self> {
        let values: Vec<f64> = (1..=self.options.len()).map(|v| v as f64).collect();
        self.with_encoding(&values)
    }

    pub fn kind(&self) -> SchemaKind {
        if self.options.is_empty() {
            SchemaKind::FreeText
        } else {
            SchemaKind::Categorical
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind() == SchemaKind::Categorical
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Schema("attribute name is empty".into()));
        }
        match self.kind() {
            SchemaKind::FreeText => {
                if self.encoding.is_some() {
                    return Err(Error::Schema(format!("`{}`: free-text attribute cannot have an encoding", self.name)));
                }
            }
            SchemaKind::Categorical => {
                if self.options.len() < 2 {
                    return Err(Error::Schema(format!("`{}` needs at least two options", self.name)));
                }
                let mut seen = Vec::with_capacity(self.options.len());
                for opt in &self.options {
                    let norm = normalize(opt);
                    if norm == normalize(UNKNOWN) {
                        return Err(Error::Schema(format!("`{}`: `Unknown` is reserved", self.name)));
                    }
                    if norm.is_empty() {
                        return Err(Error::Schema(format!("`{}` has an empty option", self.name)));
                    }
                    if seen.contains(&norm) {
                        return Err(Error::Schema(format!("`{}`: duplicate option `{opt}`", self.name)));
                    }
                    seen.push(norm);
                }
                if let Some(enc) = &self.encoding {
                    for key in enc.keys() {
                        if !self.options.contains(key) {
                            return Err(Error::Schema(format!("`{}`: encoding for unknown option `{key}`", self.name)));
                        }
                    }
                    for opt in &self.options {
                        if !enc.contains_key(opt) {
                            return Err(Error::Schema(format!("`{}`: no encoding for option `{opt}`", self.name)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Options followed by the `Unknown` category, the support used at analysis time.
    pub fn support_with_unknown(&self) -> Vec<String> {
        let mut s = self.options.clone();
        s.push(UNKNOWN.to_string());
        s
    }

    /// Numeric value of an option; `None` for `Unknown`, free text, or a missing encoding.
    pub fn encode(&self, option: &str) -> Option<f64> {
        self.encoding.as_ref()?.get(option).copied()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.options.iter().any(|o| o == value)
    }
}

/// Occurrences of `needle` in `hay` bounded by non-alphanumeric characters.
fn word_occurrences(hay: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let mut start = 0;
    while let Some(pos) = hay[start..].find(needle) {
        let s = start + pos;
        let e = s + needle.len();
        let before_ok = hay[..s].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[e..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            out.push((s, e));
        }
        start = s + hay[s..].chars().next().map_or(1, char::len_utf8);
    }
    out
}

/// Maps a raw answer onto a schema option or `Unknown`.
///
/// First hit wins: a normalized exact match; then an answer containing exactly
/// one option as a whole-word, case-insensitive substring (an option whose only
/// occurrences sit inside a longer matching option, like "likely" inside
/// "very likely", does not count); otherwise `Unknown`. Free-text schemas
/// return the answer verbatim.
pub fn map_answer(raw: &str, schema: &AttributeSchema) -> String {
    if !schema.is_categorical() {
        return raw.to_string();
    }
    let norm = normalize(raw);
    if let Some(opt) = schema.options.iter().find(|o| normalize(o) == norm) {
        return opt.clone();
    }

    let hay = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let spans: Vec<Vec<(usize, usize)>> = schema
        .options
        .iter()
        .map(|o| word_occurrences(&hay, &normalize(o)))
        .collect();
    let mut hits = Vec::new();
    for (i, own) in spans.iter().enumerate() {
        let maximal = own.iter().any(|&(s, e)| {
            !spans.iter().enumerate().any(|(j, other)| {
                j != i && other.iter().any(|&(os, oe)| os <= s && e <= oe && (oe - os) > (e - s))
            })
        });
        if maximal {
            hits.push(i);
        }
    }
    match hits.as_slice() {
        [only] => schema.options[*only].clone(),
        _ => UNKNOWN.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
}

/// The observed attribute set of one simulated user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub attributes: Vec<Attribute>,
}

impl Persona {
    pub fn new<K: Into<String>, V: Into<String>>(
        id: impl Into<String>,
        attributes: impl IntoIterator<Item = (K, V)>,
    ) -> Result<Self> {
        let attributes: Vec<Attribute> = attributes
            .into_iter()
            .map(|(k, v)| Attribute {
                name: k.into(),
                value: v.into(),
            })
            .collect();
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", a.name)));
            }
        }
        Ok(Self {
            id: id.into(),
            attributes,
        })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElicitedGroup {
    pub iteration: u32,
    pub pairs: Vec<QaPair>,
}

/// A base persona plus the confounder answers fixed into it over iterations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedPersona {
    pub base: Persona,
    #[serde(default)]
    pub elicited: Vec<ElicitedGroup>,
}

impl AugmentedPersona {
    pub fn new(base: Persona) -> Self {
        Self {
            base,
            elicited: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.base.id
    }

    pub fn last_iteration(&self) -> Option<u32> {
        self.elicited.last().map(|g| g.iteration)
    }

    pub fn pairs(&self) -> impl Iterator<Item = &QaPair> {
        self.elicited.iter().flat_map(|g| g.pairs.iter())
    }

    pub fn answer_for(&self, question: &str) -> Option<&str> {
        self.pairs()
            .find(|p| p.question == question)
            .map(|p| p.answer.as_str())
    }

    pub fn elicited_len(&self) -> usize {
        self.pairs().count()
    }
}

/// Appends one iteration's elicited answers. The base persona is untouched and
/// earlier groups are preserved as a prefix.
pub fn augment_persona(p: &AugmentedPersona, iteration: u32, qa: Vec<QaPair>) -> Result<AugmentedPersona> {
    if let Some(last) = p.last_iteration() {
        if iteration <= last {
            return Err(Error::IterationOrder { given: iteration, last });
        }
    }
    for (i, pair) in qa.iter().enumerate() {
        if p.answer_for(&pair.question).is_some() || qa[..i].iter().any(|o| o.question == pair.question) {
            return Err(Error::DuplicateQuestion(pair.question.clone()));
        }
    }
    let mut out = p.clone();
    out.elicited.push(ElicitedGroup { iteration, pairs: qa });
    Ok(out)
}

fn label(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Renders the persona system prompt for a scenario.
pub fn render_persona_prompt(p: &AugmentedPersona, scenario: &Scenario) -> String {
    let mut out = String::new();
    match scenario {
        Scenario::Survey { .. } => out.push_str("You are acting as the following person: Persona:\n"),
        Scenario::AgentDialogue { .. } => out.push_str("You are acting as the following person:\n"),
    }
    for a in &p.base.attributes {
        out.push_str(&label(&a.name));
        out.push_str(": ");
        out.push_str(&a.value);
        out.push('\n');
    }
    if p.elicited_len() > 0 {
        out.push_str("Additional information about you:\n");
        for pair in p.pairs() {
            out.push_str(&pair.question);
            out.push(' ');
            out.push_str(&pair.answer);
            out.push('\n');
        }
    }
    if let Scenario::AgentDialogue { user_goal, .. } = scenario {
        out.push_str(user_goal);
        out.push('\n');
    }
    out.trim_end().to_string()
}

/// How a question is phrased to the respondent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFormat {
    /// "What is your <characteristic>?" with an options line.
    Attribute,
    /// The question text verbatim.
    #[default]
    Direct,
    /// The question text followed by a numbered option list ("1: ...").
    Numbered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub format: QuestionFormat,
    pub schema: AttributeSchema,
}

impl Question {
    pub fn attribute(id: impl Into<String>, schema: AttributeSchema) -> Self {
        Self {
            id: id.into(),
            text: schema.name.clone(),
            format: QuestionFormat::Attribute,
            schema,
        }
    }

    pub fn direct(id: impl Into<String>, text: impl Into<String>, schema: AttributeSchema) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            format: QuestionFormat::Direct,
            schema,
        }
    }

    /// The sentence stored in an augmented persona when this question's answer is fixed.
    pub fn persona_text(&self) -> String {
        match self.format {
            QuestionFormat::Attribute => format!("What is your {}?", self.text),
            QuestionFormat::Direct | QuestionFormat::Numbered => self.text.clone(),
        }
    }
}

/// Prefix of question ids that re-ask a base persona attribute.
pub const RETENTION_PREFIX: &str = "retention:";

/// A question re-asking a specified persona attribute after the intervention.
/// Without a schema the answer is free text.
pub fn retention_question(attribute: &str, schema: Option<&AttributeSchema>) -> Question {
    let schema = match schema {
        Some(s) => AttributeSchema {
            name: attribute.to_string(),
            options: s.options.clone(),
            encoding: None,
        },
        None => AttributeSchema::free_text(attribute),
    };
    Question {
        id: format!("{RETENTION_PREFIX}{attribute}"),
        text: attribute.to_lowercase(),
        format: QuestionFormat::Attribute,
        schema,
    }
}

/// Outcome, negative-control and confounder questions for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub outcome: Question,
    pub negative_controls: Vec<Question>,
    pub confounder_groups: Vec<Vec<Question>>,
}

/// Role of a question within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Outcome,
    NegativeControl,
    Confounder,
    RetentionCheck,
}

impl QuestionBank {
    pub fn validate(&self) -> Result<()> {
        self.outcome.schema.validate()?;
        if !self.outcome.schema.is_categorical() || self.outcome.schema.encoding.is_none() {
            return Err(Error::Schema(format!(
                "outcome `{}` must be categorical with an encoding",
                self.outcome.id
            )));
        }
        let mut ids = vec![self.outcome.id.as_str()];
        for q in &self.negative_controls {
            q.schema.validate()?;
            if !q.schema.is_categorical() {
                return Err(Error::Schema(format!("negative control `{}` must be categorical", q.id)));
            }
            ids.push(&q.id);
        }
        for (g, group) in self.confounder_groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Schema(format!("confounder group {g} is empty")));
            }
            for q in group {
                q.schema.validate()?;
                ids.push(&q.id);
            }
        }
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(Error::Schema(format!("duplicate question id `{id}`")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: QuestionBank = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn find(&self, id: &str) -> Option<(&Question, QuestionKind)> {
        if self.outcome.id == id {
            return Some((&self.outcome, QuestionKind::Outcome));
        }
        if let Some(q) = self.negative_controls.iter().find(|q| q.id == id) {
            return Some((q, QuestionKind::NegativeControl));
        }
        self.confounder_groups
            .iter()
            .flatten()
            .find(|q| q.id == id)
            .map(|q| (q, QuestionKind::Confounder))
    }

    pub fn confounder_count(&self) -> usize {
        self.confounder_groups.iter().map(Vec::len).sum()
    }

    /// Same bank with every `{title}` placeholder replaced.
    pub fn with_title(&self, title: &str) -> Self {
        let mut out = self.clone();
        let fill = |q: &mut Question| q.text = q.text.replace("{title}", title);
        fill(&mut out.outcome);
        out.negative_controls.iter_mut().for_each(fill);
        out.confounder_groups.iter_mut().flatten().for_each(fill);
        out
    }

    /// All questions in asking order: outcome, negative controls, confounders.
    pub fn questions(&self) -> impl Iterator<Item = (&Question, QuestionKind)> {
        std::iter::once((&self.outcome, QuestionKind::Outcome))
            .chain(self.negative_controls.iter().map(|q| (q, QuestionKind::NegativeControl)))
            .chain(self.confounder_groups.iter().flatten().map(|q| (q, QuestionKind::Confounder)))
    }
}

/// Result of sampling personas from a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSample {
    pub personas: Vec<Persona>,
    /// True when `n` exceeded the rows available and rows were reused.
    pub with_replacement: bool,
}

/// Samples `n` personas from a CSV or TSV file (tab-separated when the
/// extension is `.tsv`). An `id` column, when present, supplies persona ids.
pub fn load_personas(source: &Path, schemas: &[AttributeSchema], n: usize, seed: u64) -> Result<PersonaSample> {
    let delimiter = match source.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("tsv") => b'\t',
        _ => b',',
    };
    let file = std::fs::File::open(source).map_err(|e| Error::io(source, e))?;
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(file);
    let headers = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(schemas.len());
    for s in schemas {
        s.validate()?;
        let idx = headers
            .iter()
            .position(|h| h.trim() == s.name)
            .ok_or_else(|| Error::MissingColumn { column: s.name.clone() })?;
        columns.push(idx);
    }
    let id_col = headers.iter().position(|h| h.trim() == "id");

    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut attrs = Vec::with_capacity(schemas.len());
        for (s, &c) in schemas.iter().zip(&columns) {
            let value = record.get(c).unwrap_or("").trim().to_string();
            if s.is_categorical() && !s.contains(&value) {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("`{value}` is not an option of `{}`", s.name),
                });
            }
            attrs.push((s.name.clone(), value));
        }
        let id = match id_col.and_then(|c| record.get(c)) {
            Some(id) if !id.trim().is_empty() => id.trim().to_string(),
            _ => format!("row-{row}"),
        };
        rows.push((id, attrs));
    }
    sample_rows(rows, n, seed)
}

fn sample_rows(rows: Vec<(String, Vec<(String, String)>)>, n: usize, seed: u64) -> Result<PersonaSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_replacement = n > rows.len();
    if with_replacement && rows.is_empty() {
        return Err(Error::Data("persona source has no rows".into()));
    }
    let picks: Vec<usize> = if with_replacement {
        (0..n).map(|_| rng.random_range(0..rows.len())).collect()
    } else {
        index::sample(&mut rng, rows.len(), n).into_vec()
    };
    let mut uses = vec![0usize; rows.len()];
    let mut personas = Vec::with_capacity(n);
    for i in picks {
        let (id, attrs) = &rows[i];
        let id = if uses[i] == 0 { id.clone() } else { format!("{id}#{}", uses[i]) };
        uses[i] += 1;
        personas.push(Persona::new(id, attrs.iter().cloned())?);
    }
    Ok(PersonaSample {
        personas,
        with_replacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priority() -> AttributeSchema {
        AttributeSchema::categorical("priority", ["High priority", "Low priority"]).unwrap()
    }

    #[test]
    fn exact_match() {
        assert_eq!(map_answer("High priority", &priority()), "High priority");
        assert_eq!(map_answer("  high PRIORITY. ", &priority()), "High priority");
    }

    #[test]
    fn unique_substring_match() {
        assert_eq!(
            map_answer("I'd say it's definitely a high priority.", &priority()),
            "High priority"
        );
    }

    #[test]
    fn unmatched_maps_to_unknown() {
        assert_eq!(map_answer("It depends on the year.", &priority()), UNKNOWN);
        assert_eq!(map_answer("high priority or low priority", &priority()), UNKNOWN);
    }

    #[test]
    fn nested_options_resolve_to_the_longest() {
        let s = AttributeSchema::categorical("likely", ["Very unlikely", "Unlikely", "Likely", "Very likely"]).unwrap();
        assert_eq!(map_answer("4: Very likely", &s), "Very likely");
        assert_eq!(map_answer("I'm unlikely to read it", &s), "Unlikely");
        assert_eq!(map_answer("Honestly, likely.", &s), "Likely");
    }

    #[test]
    fn substring_needs_word_boundaries() {
        let s = AttributeSchema::categorical("heard", ["Yes", "No"]).unwrap();
        assert_eq!(map_answer("I don't know", &s), UNKNOWN);
        assert_eq!(map_answer("No, never heard of it", &s), "No");
    }

    #[test]
    fn schema_invariants() {
        assert!(AttributeSchema::categorical("x", ["a"]).is_err());
        assert!(AttributeSchema::categorical("x", ["a", " A "]).is_err());
        assert!(AttributeSchema::categorical("x", ["a", "Unknown"]).is_err());
        let s = AttributeSchema::categorical("x", ["a", "b"]).unwrap();
        assert!(s.clone().with_encoding(&[1.0]).is_err());
        let s = s.with_ordinal_encoding().unwrap();
        assert_eq!(s.encode("b"), Some(2.0));
        assert_eq!(s.encode(UNKNOWN), None);
    }

    #[test]
    fn augment_appends_and_rejects_duplicates() {
        let base = Persona::new("p0", [("age", "30-49"), ("sex", "Male")]).unwrap();
        let p = AugmentedPersona::new(base);
        let qa = vec![QaPair {
            question: "What is your income?".into(),
            answer: "$50,000-$75,000".into(),
        }];
        let p1 = augment_persona(&p, 1, qa.clone()).unwrap();
        assert_eq!(p1.elicited_len(), 1);
        assert_eq!(p1.base, p.base);
        assert!(matches!(augment_persona(&p1, 2, qa), Err(Error::DuplicateQuestion(_))));
        assert!(matches!(augment_persona(&p1, 1, vec![]), Err(Error::IterationOrder { .. })));
    }

    #[test]
    fn thirteen_groups_of_two() {
        let mut p = AugmentedPersona::new(Persona::new("p0", [("sex", "Female")]).unwrap());
        for it in 1..=13u32 {
            let qa = (0..2)
                .map(|j| QaPair {
                    question: format!("q{it}-{j}"),
                    answer: "a".into(),
                })
                .collect();
            p = augment_persona(&p, it, qa).unwrap();
        }
        let qs: Vec<_> = p.pairs().map(|q| q.question.clone()).collect();
        assert_eq!(qs.len(), 26);
        assert_eq!(qs[0], "q1-0");
        assert_eq!(qs[25], "q13-1");
    }

    #[test]
    fn survey_prompt_template() {
        let s = Scenario::opinionqa_immigration();
        let p = AugmentedPersona::new(Persona::new("p0", [("age", "30"), ("sex", "Male")]).unwrap());
        assert_eq!(
            render_persona_prompt(&p, &s),
            "You are acting as the following person: Persona:\nAge: 30\nSex: Male"
        );
        let p = augment_persona(
            &p,
            1,
            vec![QaPair {
                question: "What is your income?".into(),
                answer: "$30,000-$50,000".into(),
            }],
        )
        .unwrap();
        let text = render_persona_prompt(&p, &s);
        assert!(text.ends_with("Additional information about you:\nWhat is your income? $30,000-$50,000"));
        assert_eq!(text, render_persona_prompt(&p, &s));
    }

    #[test]
    fn sampling_with_replacement_keeps_ids_distinct() {
        let rows = vec![("a".to_string(), vec![("sex".to_string(), "Male".to_string())])];
        let s = sample_rows(rows, 3, 1).unwrap();
        assert!(s.with_replacement);
        let ids: Vec<_> = s.personas.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "a#1", "a#2"]);
    }
}
