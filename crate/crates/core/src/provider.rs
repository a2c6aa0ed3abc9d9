//! Text-completion provider interface.
//!
//! Every reasoning step that would call a language model goes through
//! [`CompletionProvider`]; concrete backends (HTTP, fixture replay) live in
//! the std companion crate.

use alloc::string::String;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_length: usize,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.7,
            max_length: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no fixture for key {0}")]
    FixtureMissing(String),
}

pub trait CompletionProvider {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for &P {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ProviderError> {
        (**self).complete(prompt, params)
    }
}
