use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub programme_id: String,
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn new(programme_id: impl Into<String>, text: &str) -> Self {
        TokenizedDoc {
            programme_id: programme_id.into(),
            tokens: tokenize(text),
        }
    }
}

/// Lowercases, splits on whitespace and trims non-alphanumeric characters
/// from both ends of each token. Inner punctuation ("it's", "a-ok") stays.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}
