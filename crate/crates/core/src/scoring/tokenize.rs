use thiserror::Error;

use crate::types::Passage;

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyConfig {
    pub max_length: usize,
    pub special_token_overhead: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            max_length: 512,
            special_token_overhead: 2,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("question has {question} tokens but only {available} fit the budget")]
    QuestionTooLong { question: usize, available: usize },
    #[error("at least one passage is required")]
    NoPassages,
    #[error("max_length {max_length} must exceed the special token overhead {overhead}")]
    InvalidConfig { max_length: usize, overhead: usize },
}

/// Builds `[CLS] question passage... [SEP]` within `config.max_length`.
///
/// When passages overflow, every passage longer than the per-passage share
/// of the remaining budget is cut to that share; shorter ones stay whole.
pub fn assemble_sequence(
    question: &str,
    passages: &[&Passage],
    config: AssemblyConfig,
) -> Result<Vec<String>, AssemblyError> {
    if config.max_length <= config.special_token_overhead {
        return Err(AssemblyError::InvalidConfig {
            max_length: config.max_length,
            overhead: config.special_token_overhead,
        });
    }
    if passages.is_empty() {
        return Err(AssemblyError::NoPassages);
    }
    let question_tokens = tokenize(question);
    let budget = config.max_length - config.special_token_overhead;
    let available =
        budget
            .checked_sub(question_tokens.len())
            .ok_or(AssemblyError::QuestionTooLong {
                question: question_tokens.len(),
                available: budget,
            })?;

    let passage_tokens: Vec<Vec<String>> = passages
        .iter()
        .map(|p| {
            let mut t = tokenize(&p.title);
            t.extend(tokenize(&p.body));
            t
        })
        .collect();
    let total: usize = passage_tokens.iter().map(Vec::len).sum();
    let cap = if total > available {
        available / passages.len()
    } else {
        usize::MAX
    };

    let mut out = Vec::with_capacity(config.max_length.min(total + question_tokens.len() + 2));
    out.push(CLS_TOKEN.to_string());
    out.extend(question_tokens);
    for tokens in passage_tokens {
        out.extend(tokens.into_iter().take(cap));
    }
    out.push(SEP_TOKEN.to_string());
    Ok(out)
}
