//! Per-language question templates and rendering.
//!
//! Template files are JSON maps `{kind: {lang: {field: template}}}`.
//! Copa entries carry `cause` and `effect`, WiC entries carry `template`.
//! Placeholders are written `{name}`; `{{` and `}}` produce literal braces.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{CopaRelation, CorpusError, Datapoint, LanguageCode, TaskKind};

const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates_en.json");

const COPA_FIELDS: [&str; 3] = ["premise", "choice1", "choice2"];
const WIC_FIELDS: [&str; 3] = ["example1", "example2", "target_word"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Field(String),
}

/// A parsed template string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = source.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    literal.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    literal.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                            _ => {
                                return Err(CorpusError::Template(format!(
                                    "malformed placeholder in `{source}`"
                                )))
                            }
                        }
                    }
                    if name.is_empty() {
                        return Err(CorpusError::Template(format!("empty placeholder in `{source}`")));
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Field(name));
                }
                '}' => {
                    return Err(CorpusError::Template(format!("unmatched `}}` in `{source}`")))
                }
                _ => literal.push(c),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template {
            source: source.to_string(),
            segments,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Field(name) => Some(name.as_str()),
            Segment::Literal(_) => None,
        })
    }

    fn check_fields(&self, allowed: &[&str], required: &[&str]) -> Result<(), CorpusError> {
        if let Some(unknown) = self.placeholders().find(|p| !allowed.contains(p)) {
            return Err(CorpusError::Template(format!(
                "unknown placeholder `{{{unknown}}}` in `{}`",
                self.source
            )));
        }
        if let Some(missing) = required
            .iter()
            .find(|r| !self.placeholders().any(|p| p == **r))
        {
            return Err(CorpusError::Template(format!(
                "template `{}` lacks `{{{missing}}}`",
                self.source
            )));
        }
        Ok(())
    }

    /// Fills every placeholder; a placeholder without a value is an error.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, CorpusError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Field(name) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| {
                            CorpusError::Template(format!("no value for `{{{name}}}`"))
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LangTemplates {
    Copa { cause: Template, effect: Template },
    Wic { template: Template },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCopa {
    cause: String,
    effect: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWic {
    template: String,
}

/// Templates keyed by (kind, language) plus one English system prompt per kind.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    entries: BTreeMap<(TaskKind, LanguageCode), LangTemplates>,
    system_prompts: BTreeMap<TaskKind, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::english_defaults()
    }
}

fn default_system_prompt(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::MathCot => {
            "You are an expert at solving grade-school math word problems. Reason step by step \
             in English, then finish with \"The answer is\" followed by the final number."
        }
        TaskKind::CopaChoice => {
            "You are given a premise and two hypotheses. Pick the hypothesis that is the more \
             plausible cause or result of the premise, as asked. Answer only with \"1\" or \"2\"."
        }
        TaskKind::WicBinary => {
            "You are given two sentences that share a target word marked with asterisks. Decide \
             whether the word has the same meaning in both sentences. Answer only with \"Yes\" \
             or \"No\"."
        }
    }
}

impl TemplateSet {
    /// The shipped English templates and system prompts.
    pub fn english_defaults() -> Self {
        let mut set = TemplateSet {
            entries: BTreeMap::new(),
            system_prompts: TaskKind::ALL
                .iter()
                .map(|&k| (k, default_system_prompt(k).to_string()))
                .collect(),
        };
        set.merge_json(DEFAULT_TEMPLATES)
            .expect("shipped templates are valid");
        set
    }

    /// English defaults overlaid with the entries of a template file.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut set = Self::english_defaults();
        set.merge_json(&text)?;
        Ok(set)
    }

    pub fn merge_json(&mut self, text: &str) -> Result<(), CorpusError> {
        let raw: BTreeMap<TaskKind, BTreeMap<LanguageCode, serde_json::Value>> =
            serde_json::from_str(text)
                .map_err(|e| CorpusError::Template(format!("template file: {e}")))?;
        for (kind, langs) in raw {
            for (lang, value) in langs {
                let entry = match kind {
                    TaskKind::CopaChoice => {
                        let r: RawCopa = serde_json::from_value(value)
                            .map_err(|e| CorpusError::Template(format!("{kind:?}/{lang}: {e}")))?;
                        let cause = Template::parse(&r.cause)?;
                        let effect = Template::parse(&r.effect)?;
                        cause.check_fields(&COPA_FIELDS, &COPA_FIELDS)?;
                        effect.check_fields(&COPA_FIELDS, &COPA_FIELDS)?;
                        LangTemplates::Copa { cause, effect }
                    }
                    TaskKind::WicBinary => {
                        let r: RawWic = serde_json::from_value(value)
                            .map_err(|e| CorpusError::Template(format!("{kind:?}/{lang}: {e}")))?;
                        let template = Template::parse(&r.template)?;
                        template.check_fields(&WIC_FIELDS, &WIC_FIELDS[..2])?;
                        LangTemplates::Wic { template }
                    }
                    TaskKind::MathCot => {
                        return Err(CorpusError::Template(
                            "math questions are used verbatim and take no template".into(),
                        ))
                    }
                };
                self.entries.insert((kind, lang), entry);
            }
        }
        Ok(())
    }

    pub fn set_system_prompt(&mut self, kind: TaskKind, text: impl Into<String>) {
        self.system_prompts.insert(kind, text.into());
    }

    pub fn system_prompt(&self, kind: TaskKind) -> &str {
        self.system_prompts
            .get(&kind)
            .map(String::as_str)
            .unwrap_or_else(|| default_system_prompt(kind))
    }

    pub fn has(&self, kind: TaskKind, lang: LanguageCode) -> bool {
        kind == TaskKind::MathCot || self.entries.contains_key(&(kind, lang))
    }

    fn get(&self, kind: TaskKind, lang: LanguageCode) -> Result<&LangTemplates, CorpusError> {
        self.entries
            .get(&(kind, lang))
            .ok_or(CorpusError::MissingTemplate { kind, lang })
    }
}

/// Scripts written without spaces between words; word-boundary checks are
/// skipped next to these characters.
fn is_scriptio_continua(c: char) -> bool {
    matches!(c as u32,
        0x0E00..=0x0E7F       // Thai
        | 0x1100..=0x11FF     // Hangul Jamo
        | 0x3040..=0x30FF     // Hiragana, Katakana
        | 0x3130..=0x318F     // Hangul compatibility Jamo
        | 0x3400..=0x4DBF     // CJK extension A
        | 0x4E00..=0x9FFF     // CJK unified
        | 0xAC00..=0xD7AF     // Hangul syllables
        | 0xF900..=0xFAFF     // CJK compatibility
        | 0x20000..=0x2FA1F)
}

fn boundary_ok(neighbor: Option<char>, edge: char) -> bool {
    match neighbor {
        None => true,
        Some(n) => !n.is_alphanumeric() || is_scriptio_continua(n) || is_scriptio_continua(edge),
    }
}

/// Wraps every whole-word, case-sensitive occurrence of `word` in asterisks.
pub fn mark_target_word(sentence: &str, word: &str) -> Result<String, CorpusError> {
    let absent = || CorpusError::TargetWordAbsent {
        word: word.to_string(),
        sentence: sentence.to_string(),
    };
    let first = word.chars().next().ok_or_else(absent)?;
    let last = word.chars().next_back().expect("non-empty");

    let mut out = String::with_capacity(sentence.len() + 4);
    let mut cursor = 0;
    let mut hits = 0;
    let mut search_from = 0;
    while let Some(rel) = sentence[search_from..].find(word) {
        let start = search_from + rel;
        let end = start + word.len();
        let before = sentence[..start].chars().next_back();
        let after = sentence[end..].chars().next();
        if boundary_ok(before, first) && boundary_ok(after, last) {
            out.push_str(&sentence[cursor..start]);
            out.push('*');
            out.push_str(word);
            out.push('*');
            cursor = end;
            search_from = end;
            hits += 1;
        } else {
            search_from = start + first.len_utf8();
        }
    }
    if hits == 0 {
        return Err(absent());
    }
    out.push_str(&sentence[cursor..]);
    Ok(out)
}

/// Renders the user-facing question text for one datapoint in `lang`.
pub fn render_question(
    dp: &Datapoint,
    lang: LanguageCode,
    templates: &TemplateSet,
) -> Result<String, CorpusError> {
    match dp {
        Datapoint::MathCot(m) => Ok(m.question.clone()),
        Datapoint::CopaChoice(c) => {
            let LangTemplates::Copa { cause, effect } = templates.get(TaskKind::CopaChoice, lang)?
            else {
                unreachable!("copa entries hold copa templates")
            };
            let template = match c.relation {
                CopaRelation::Cause => cause,
                CopaRelation::Effect => effect,
            };
            template.render(&[
                ("premise", &c.premise),
                ("choice1", &c.choice1),
                ("choice2", &c.choice2),
            ])
        }
        Datapoint::WicBinary(w) => {
            let LangTemplates::Wic { template } = templates.get(TaskKind::WicBinary, lang)? else {
                unreachable!("wic entries hold wic templates")
            };
            let s1 = mark_target_word(&w.example1, &w.target_word)?;
            let s2 = mark_target_word(&w.example2, &w.target_word)?;
            template.render(&[
                ("example1", &s1),
                ("example2", &s2),
                ("target_word", &w.target_word),
            ])
        }
    }
}
