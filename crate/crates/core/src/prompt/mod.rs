//! ICL prompt assembly.
//!
//! A prompt is a chat transcript: the English system prompt, then K
//! (user question, assistant answer) demonstration turns, then the test
//! question as the final user turn. Turn boundaries stand in for the
//! end-of-turn delimiter between prompt components.

mod mode;
mod translate;

use serde::{Deserialize, Serialize};

use crate::corpus::{render_question, CisPool, CorpusError, Datapoint, Dataset, LanguageCode, TemplateSet};
use crate::sampling::{DemoSpec, SamplingError, SamplingPlan};

pub use mode::{CisMode, IclMode, ModeDescriptor, ModeParseError, TranslationStrategy};
pub use translate::{LookupTranslator, TranslateError, TranslationTable, Translator};

/// Separator between a CIS sentence and the demonstration question.
pub const CIS_SEPARATOR: &str = "\n\n";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("mode {0} needs a CIS pool")]
    MissingCisPool(CisMode),
    #[error("plan has no CIS tables")]
    MissingCisTable,
    #[error("CIS pool has no sentence {index} in `{lang}`")]
    MissingCisSentence { lang: LanguageCode, index: usize },
    #[error("dataset has no `{0}` split")]
    MissingSplit(LanguageCode),
    #[error("plan was drawn for a different dataset shape ({0})")]
    PlanMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    fn new(role: Role, content: String) -> Self {
        debug_assert!(!content.is_empty());
        ChatMessage { role, content }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptMeta {
    pub dataset_id: String,
    pub test_lang: LanguageCode,
    pub test_index: usize,
    pub icl_mode: IclMode,
    pub cis_mode: CisMode,
    pub translation_strategy: TranslationStrategy,
}

impl PromptMeta {
    pub fn mode(&self) -> ModeDescriptor {
        ModeDescriptor {
            icl: self.icl_mode,
            cis: self.cis_mode,
            translation: self.translation_strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub messages: Vec<ChatMessage>,
    pub meta: PromptMeta,
}

impl ChatPrompt {
    /// System first, then alternating user/assistant, ending on user;
    /// all contents non-empty.
    pub fn is_well_formed(&self) -> bool {
        let m = &self.messages;
        if m.len() < 2 || m.len() % 2 != 0 || m[0].role != Role::System {
            return false;
        }
        m[1..].iter().enumerate().all(|(i, msg)| {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            msg.role == expected && !msg.content.is_empty()
        }) && !m[0].content.is_empty()
    }

    /// Demonstration (question, answer) turns.
    pub fn demonstrations(&self) -> impl Iterator<Item = (&str, &str)> {
        let body = &self.messages[1..self.messages.len() - 1];
        body.chunks(2)
            .map(|pair| (pair[0].content.as_str(), pair[1].content.as_str()))
    }

    pub fn test_question(&self) -> &str {
        &self.messages.last().expect("non-empty prompt").content
    }
}

/// Textual form of a gold answer: English CoT for math, the label digit
/// for Copa, Yes/No for WiC.
pub fn verbalize(dp: &Datapoint) -> String {
    match dp {
        Datapoint::MathCot(m) => m.answer_cot.clone().unwrap_or_else(|| m.answer_number.clone()),
        Datapoint::CopaChoice(c) => c.label.to_string(),
        Datapoint::WicBinary(w) => if w.label == 1 { "Yes" } else { "No" }.to_string(),
    }
}

/// Everything needed to build prompts for one dataset.
#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    pub dataset: &'a Dataset,
    pub templates: &'a TemplateSet,
    pub plan: &'a SamplingPlan,
    pub cis_pool: Option<&'a CisPool>,
}

impl<'a> PromptContext<'a> {
    pub fn new(dataset: &'a Dataset, templates: &'a TemplateSet, plan: &'a SamplingPlan) -> Self {
        PromptContext {
            dataset,
            templates,
            plan,
            cis_pool: None,
        }
    }

    pub fn with_cis_pool(mut self, pool: &'a CisPool) -> Self {
        self.cis_pool = Some(pool);
        self
    }

    fn check_plan(&self) -> Result<(), PromptError> {
        let (n, m) = (self.dataset.test_size(), self.dataset.train_size());
        if self.plan.n != n || self.plan.m != m {
            return Err(PromptError::PlanMismatch(format!(
                "plan N={} M={}, dataset N={n} M={m}",
                self.plan.n, self.plan.m
            )));
        }
        Ok(())
    }

    fn train_item(&self, demo: &DemoSpec) -> Result<&'a Datapoint, PromptError> {
        let split = self
            .dataset
            .splits
            .get(&demo.lang)
            .ok_or(PromptError::MissingSplit(demo.lang))?;
        split
            .train
            .get(demo.train_index)
            .ok_or_else(|| PromptError::PlanMismatch(format!("train index {}", demo.train_index)))
    }

    fn test_item(&self, lang: LanguageCode, row: usize) -> Result<&'a Datapoint, PromptError> {
        let split = self
            .dataset
            .splits
            .get(&lang)
            .ok_or(PromptError::MissingSplit(lang))?;
        split.test.get(row).ok_or(PromptError::Sampling(SamplingError::RowOutOfRange {
            row,
            n: split.test.len(),
        }))
    }

    fn cis_sentences(&self, row: usize, cis: CisMode) -> Result<Option<Vec<&'a str>>, PromptError> {
        if cis == CisMode::NoCis {
            return Ok(None);
        }
        let pool = self.cis_pool.ok_or(PromptError::MissingCisPool(cis))?;
        let indices = self
            .plan
            .cis_index_lists
            .as_ref()
            .ok_or(PromptError::MissingCisTable)?
            .get(row)
            .ok_or(SamplingError::RowOutOfRange { row, n: self.plan.n })?;
        let langs: Vec<LanguageCode> = match cis {
            CisMode::CisMono(l) => vec![l; indices.len()],
            CisMode::CisMulti => self
                .plan
                .cis_lang_lists
                .as_ref()
                .ok_or(PromptError::MissingCisTable)?
                .get(row)
                .ok_or(SamplingError::RowOutOfRange { row, n: self.plan.n })?
                .clone(),
            CisMode::NoCis => unreachable!(),
        };
        indices
            .iter()
            .zip(langs)
            .map(|(&index, lang)| {
                pool.sentence(lang, index)
                    .ok_or(PromptError::MissingCisSentence { lang, index })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn meta(&self, row: usize, test_lang: LanguageCode, mode: ModeDescriptor) -> PromptMeta {
        PromptMeta {
            dataset_id: self.dataset.dataset_id.clone(),
            test_lang,
            test_index: row,
            icl_mode: mode.icl,
            cis_mode: mode.cis,
            translation_strategy: mode.translation,
        }
    }

    fn assemble(
        &self,
        demos: Vec<(String, String)>,
        test_question: String,
        meta: PromptMeta,
    ) -> ChatPrompt {
        let mut messages = Vec::with_capacity(2 * demos.len() + 2);
        messages.push(ChatMessage::new(
            Role::System,
            self.templates.system_prompt(self.dataset.kind).to_string(),
        ));
        for (q, a) in demos {
            messages.push(ChatMessage::new(Role::User, q));
            messages.push(ChatMessage::new(Role::Assistant, a));
        }
        messages.push(ChatMessage::new(Role::User, test_question));
        ChatPrompt { messages, meta }
    }

    /// Prompt for test row `row` in `test_lang` under an ICL and CIS mode.
    pub fn build_prompt(
        &self,
        row: usize,
        test_lang: LanguageCode,
        icl: IclMode,
        cis: CisMode,
    ) -> Result<ChatPrompt, PromptError> {
        self.check_plan()?;
        let specs = self.plan.assign_demos(row, &icl, test_lang)?;
        let cis_sentences = self.cis_sentences(row, cis)?;
        let mut demos = Vec::with_capacity(specs.len());
        for (j, spec) in specs.iter().enumerate() {
            let dp = self.train_item(spec)?;
            let question = render_question(dp, spec.lang, self.templates)?;
            let user = match &cis_sentences {
                Some(s) => format!("{}{CIS_SEPARATOR}{question}", s[j]),
                None => question,
            };
            demos.push((user, verbalize(dp)));
        }
        let test_question = render_question(self.test_item(test_lang, row)?, test_lang, self.templates)?;
        let mode = ModeDescriptor {
            icl,
            cis,
            translation: TranslationStrategy::NoTranslation,
        };
        Ok(self.assemble(demos, test_question, self.meta(row, test_lang, mode)))
    }

    /// Translation baselines over the English-mode prompt.
    pub fn apply_translation(
        &self,
        strategy: TranslationStrategy,
        row: usize,
        test_lang: LanguageCode,
        translator: &dyn Translator,
    ) -> Result<ChatPrompt, PromptError> {
        let mut prompt = self.build_prompt(row, test_lang, IclMode::English, CisMode::NoCis)?;
        prompt.meta.translation_strategy = strategy;
        let en = LanguageCode::EN;
        match strategy {
            TranslationStrategy::NoTranslation => {}
            TranslationStrategy::ToEnglish => {
                let last = prompt.messages.last_mut().expect("non-empty");
                last.content = translator.translate(&last.content, test_lang, en)?;
            }
            TranslationStrategy::FromEnglish => {
                let n = prompt.messages.len();
                for msg in &mut prompt.messages[1..n - 1] {
                    if msg.role == Role::User {
                        msg.content = translator.translate(&msg.content, en, test_lang)?;
                    }
                }
            }
        }
        Ok(prompt)
    }

    /// Dispatches on a full mode descriptor.
    pub fn build_for_mode(
        &self,
        row: usize,
        test_lang: LanguageCode,
        mode: ModeDescriptor,
        translator: Option<&dyn Translator>,
    ) -> Result<ChatPrompt, PromptError> {
        match mode.translation {
            TranslationStrategy::NoTranslation => self.build_prompt(row, test_lang, mode.icl, mode.cis),
            strategy => {
                let translator = translator.ok_or_else(|| {
                    PromptError::Translate(TranslateError::Load(format!(
                        "mode {mode} needs translation tables"
                    )))
                })?;
                self.apply_translation(strategy, row, test_lang, translator)
            }
        }
    }

    /// Every (language, row) prompt of one mode, languages in code order.
    pub fn build_all(
        &self,
        mode: ModeDescriptor,
        translator: Option<&dyn Translator>,
    ) -> Result<Vec<ChatPrompt>, PromptError> {
        let mut out = Vec::with_capacity(self.dataset.splits.len() * self.dataset.test_size());
        for lang in self.dataset.languages() {
            for row in 0..self.dataset.test_size() {
                out.push(self.build_for_mode(row, lang, mode, translator)?);
            }
        }
        Ok(out)
    }
}
