use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Exact,
    Partial,
    Incorrect,
}

impl Verdict {
    pub fn is_correct(self) -> bool {
        self != Verdict::Incorrect
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Exact => "exact",
            Verdict::Partial => "partial",
            Verdict::Incorrect => "incorrect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub verdict: Verdict,
    pub generated: String,
}

/// Where the attribute may sit for each verdict, and which verdicts a filter
/// keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeRules {
    /// Generated words allowed before the attribute for an exact verdict.
    pub exact_offset: usize,
    /// Keep partial matches when filtering.
    pub keep_partial: bool,
}

impl Default for JudgeRules {
    fn default() -> Self {
        Self { exact_offset: 0, keep_partial: true }
    }
}

impl JudgeRules {
    pub fn keeps(&self, verdict: Verdict) -> bool {
        match verdict {
            Verdict::Exact => true,
            Verdict::Partial => self.keep_partial,
            Verdict::Incorrect => false,
        }
    }
}

/// Lowercased words with punctuation removed.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// Exact when the generation starts with the attribute, partial when the
/// attribute occurs anywhere as a run of whole words.
pub fn judge(generated: &str, attribute: &str) -> Judgment {
    judge_with(generated, attribute, &JudgeRules::default())
}

/// As [`judge`], with the attribute allowed to start up to
/// `rules.exact_offset` words in for an exact verdict.
pub fn judge_with(generated: &str, attribute: &str, rules: &JudgeRules) -> Judgment {
    let gen = normalize_words(generated);
    let attr = normalize_words(attribute);
    let first = if attr.is_empty() { None } else { gen.windows(attr.len()).position(|w| w == attr.as_slice()) };
    let verdict = match first {
        None => Verdict::Incorrect,
        Some(i) if i <= rules.exact_offset => Verdict::Exact,
        Some(_) => Verdict::Partial,
    };
    Judgment { verdict, generated: generated.to_string() }
}
