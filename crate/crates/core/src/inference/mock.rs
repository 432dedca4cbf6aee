use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;

use super::{ClientError, GenerationConfig, ModelClient};
use crate::prompt::ChatMessage;

type Script = dyn Fn(&[ChatMessage]) -> Result<String, ClientError> + Send + Sync;

/// Deterministic client driven by a closure over the messages.
pub struct ScriptedMock {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedMock {
    pub fn new<F>(script: F) -> Self
    where
        F: Fn(&[ChatMessage]) -> Result<String, ClientError> + Send + Sync + 'static,
    {
        ScriptedMock {
            script: Box::new(script),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_| Ok(text.clone()))
    }

    /// Number of `chat` calls so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ModelClient for ScriptedMock {
    async fn chat(
        &self,
        messages: &[ChatMessage],
        _gen: &GenerationConfig,
    ) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.script)(messages)
    }
}
