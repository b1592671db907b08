//! Transcript normalisation for CTC alignment.
//!
//! Rules, applied left to right:
//!
//! | input                           | spoken tokens                       |
//! |---------------------------------|-------------------------------------|
//! | run of letters / apostrophes    | one token                           |
//! | integer `0..=999_999_999`       | English cardinal, one token per word ("100" -> ONE HUNDRED, "2024" -> TWO THOUSAND TWENTY FOUR) |
//! | integer with a leading zero or ≥ 10⁹ | one word per digit             |
//! | `d.d` (digits around a dot)     | integer part, POINT, then one word per fractional digit |
//! | `%`                             | PERCENT                             |
//! | `&`                             | AND                                 |
//! | `+`                             | PLUS                                |
//! | `@`                             | AT                                  |
//! | `=`                             | EQUALS                              |
//! | `$`                             | DOLLAR                              |
//! | `#`                             | NUMBER                              |
//! | anything else                   | token separator                     |
//!
//! Tokens are then case-folded to the case of the label vocabulary and any
//! character the vocabulary lacks is dropped; tokens left empty disappear.

use super::{AlignError, LabelVocab};

const ONES: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn symbol_word(c: char) -> Option<&'static str> {
    Some(match c {
        '%' => "percent",
        '&' => "and",
        '+' => "plus",
        '@' => "at",
        '=' => "equals",
        '$' => "dollar",
        '#' => "number",
        _ => return None,
    })
}

fn below_thousand(n: u64, out: &mut Vec<String>) {
    debug_assert!(n < 1000);
    if n >= 100 {
        out.push(ONES[(n / 100) as usize].into());
        out.push("hundred".into());
    }
    let rest = n % 100;
    if rest == 0 {
        return;
    }
    if rest < 20 {
        out.push(ONES[rest as usize].into());
    } else {
        out.push(TENS[(rest / 10) as usize].into());
        if !rest.is_multiple_of(10) {
            out.push(ONES[(rest % 10) as usize].into());
        }
    }
}

/// English cardinal words for `n < 10^9`.
pub fn number_words(n: u64) -> Vec<String> {
    assert!(n < 1_000_000_000, "number_words handles values below one billion");
    if n == 0 {
        return vec!["zero".into()];
    }
    let mut out = Vec::new();
    for (scale, name) in [(1_000_000, "million"), (1_000, "thousand")] {
        if !(n / scale).is_multiple_of(1000) {
            below_thousand(n / scale % 1000, &mut out);
            out.push(name.into());
        }
    }
    below_thousand(n % 1000, &mut out);
    out
}

fn digit_words(digits: &str) -> Vec<String> {
    digits.chars().filter_map(|c| c.to_digit(10)).map(|d| ONES[d as usize].to_string()).collect()
}

fn integer_words(digits: &str) -> Vec<String> {
    let leading_zero = digits.len() > 1 && digits.starts_with('0');
    match digits.parse::<u64>() {
        Ok(n) if !leading_zero && n < 1_000_000_000 => number_words(n),
        _ => digit_words(digits),
    }
}

/// Preprocessed transcript: spoken tokens and their boundary-joined form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub joined: String,
    pub tokens: Vec<String>,
}

/// Splits `raw` into spoken tokens before vocabulary filtering.
fn spoken_words(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<String>| {
        if !word.is_empty() {
            out.push(std::mem::take(word));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            flush(&mut word, &mut out);
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int: String = chars[start..i].iter().collect();
            out.extend(integer_words(&int));
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                let fstart = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                out.push("point".into());
                let frac: String = chars[fstart..i].iter().collect();
                out.extend(digit_words(&frac));
            }
            continue;
        }
        if c.is_alphabetic() || c == '\'' {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            if let Some(w) = symbol_word(c) {
                out.push(w.into());
            }
        }
        i += 1;
    }
    flush(&mut word, &mut out);
    out
}

pub fn preprocess_transcript(raw: &str, vocab: &LabelVocab) -> Result<Transcript, AlignError> {
    let upper = vocab.is_uppercase();
    let tokens: Vec<String> = spoken_words(raw)
        .into_iter()
        .map(|w| {
            let folded = if upper { w.to_uppercase() } else { w.to_lowercase() };
            folded
                .chars()
                .filter(|c| *c != vocab.blank && *c != vocab.boundary && vocab.index(*c).is_some())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(AlignError::EmptyTranscript(raw.to_string()));
    }
    let joined = tokens.join(&vocab.boundary.to_string());
    Ok(Transcript { joined, tokens })
}
