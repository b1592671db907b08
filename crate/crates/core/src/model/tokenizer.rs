//! Synthetic bimodal tokenizer.
//!
//! Text is split into lowercase words (runs of alphanumerics and
//! apostrophes); each word maps to one text token through a [`Lexicon`].
//! Speech is a rule-based stand-in for a discrete speech unit encoder: each
//! word expands into `max(1, ceil(chars / 2))` speech units whose ids are
//! FNV-1a hashes of `(word, unit index)` folded into the speech range.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use super::{Modality, ModelError, TokenId, TokenSequence, VocabLayout};
use crate::seed::fnv1a;

/// Word list mapping `words[i]` to text token `text_tokens.start + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    words: Vec<String>,
    index: HashMap<String, usize>,
    text_tokens: Range<TokenId>,
}

/// A text prompt as `[T] w0 w1 ...` with the byte span of every word.
#[derive(Debug, Clone, PartialEq)]
pub struct TextPrompt {
    pub seq: TokenSequence,
    /// Byte range in the source string for each word; word `i` sits at
    /// sequence position `i + 1`.
    pub word_spans: Vec<Range<usize>>,
}

/// A speech prompt as `[S] units... [T]` plus the word each unit came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechPrompt {
    pub seq: TokenSequence,
    /// `None` at marker positions, otherwise the source word index.
    pub text_token_map: Vec<Option<usize>>,
    pub word_spans: Vec<Range<usize>>,
}

/// Lowercased words with their byte spans in `text`.
pub fn split_words(text: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        let word_char = ch.is_alphanumeric() || ch == '\'';
        match (word_char, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((text[s..i].to_lowercase(), s..i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((text[s..].to_lowercase(), s..text.len()));
    }
    out
}

pub fn speech_units_for_word(word: &str, vocab: &VocabLayout) -> Vec<TokenId> {
    let n_speech = vocab.speech_tokens.len() as u64;
    if n_speech == 0 {
        return Vec::new();
    }
    let n_units = word.chars().count().div_ceil(2).max(1);
    (0..n_units)
        .map(|k| {
            let mut bytes = word.as_bytes().to_vec();
            bytes.push(0xff);
            bytes.extend_from_slice(&(k as u32).to_le_bytes());
            vocab.speech_tokens.start + (fnv1a(&bytes) % n_speech) as usize
        })
        .collect()
}

impl Lexicon {
    pub fn new(words: Vec<String>, vocab: &VocabLayout) -> Result<Self, ModelError> {
        if words.len() > vocab.text_tokens.len() {
            return Err(ModelError::InvalidConfig(format!(
                "lexicon has {} words but only {} text tokens exist",
                words.len(),
                vocab.text_tokens.len()
            )));
        }
        let mut index = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.to_lowercase(), i).is_some() {
                return Err(ModelError::InvalidConfig(format!("duplicate lexicon word {w:?}")));
            }
        }
        Ok(Self { words, index, text_tokens: vocab.text_tokens.clone() })
    }

    /// One word per line.
    pub fn load(path: impl AsRef<Path>, vocab: &VocabLayout) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))?;
        let words = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        Self::new(words, vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut s = self.words.join("\n");
        s.push('\n');
        std::fs::write(path.as_ref(), s).map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Unknown words hash into the text range.
    pub fn encode_word(&self, word: &str) -> TokenId {
        let w = word.to_lowercase();
        match self.index.get(&w) {
            Some(&i) => self.text_tokens.start + i,
            None => self.text_tokens.start + (fnv1a(w.as_bytes()) % self.text_tokens.len() as u64) as usize,
        }
    }

    pub fn lookup(&self, word: &str) -> Option<TokenId> {
        self.index.get(&word.to_lowercase()).map(|i| self.text_tokens.start + i)
    }

    pub fn decode_token(&self, id: TokenId) -> String {
        id.checked_sub(self.text_tokens.start)
            .and_then(|i| self.words.get(i))
            .cloned()
            .unwrap_or_else(|| format!("<t{id}>"))
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&t| self.decode_token(t)).collect::<Vec<_>>().join(" ")
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        split_words(text).iter().map(|(w, _)| self.encode_word(w)).collect()
    }

    pub fn text_prompt(&self, text: &str, vocab: &VocabLayout) -> TextPrompt {
        let words = split_words(text);
        let ids: Vec<TokenId> = words.iter().map(|(w, _)| self.encode_word(w)).collect();
        TextPrompt { seq: TokenSequence::text(&ids, vocab), word_spans: words.into_iter().map(|(_, r)| r).collect() }
    }

    pub fn speech_prompt(&self, text: &str, vocab: &VocabLayout) -> SpeechPrompt {
        let words = split_words(text);
        let mut units = Vec::new();
        let mut map = vec![None];
        for (i, (w, _)) in words.iter().enumerate() {
            for u in speech_units_for_word(w, vocab) {
                units.push(u);
                map.push(Some(i));
            }
        }
        map.push(None);
        SpeechPrompt {
            seq: TokenSequence::from_segments(&[(Modality::Speech, &units), (Modality::Text, &[])], vocab),
            text_token_map: map,
            word_spans: words.into_iter().map(|(_, r)| r).collect(),
        }
    }
}

/// Indices of the words overlapping the byte range `span`.
pub fn words_covering(word_spans: &[Range<usize>], span: &Range<usize>) -> Range<usize> {
    let hits: Vec<usize> = word_spans
        .iter()
        .enumerate()
        .filter(|(_, w)| w.start < span.end && span.start < w.end)
        .map(|(i, _)| i)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&a), Some(&b)) => a..b + 1,
        _ => 0..0,
    }
}
