use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const MASK: usize = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[MASK]"];

/// Lowercases, deletes punctuation and splits on whitespace.
pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, specials first.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::invalid("vocabulary file lacks the special-token header"));
        }
        Self::from_tokens(tokens)
    }
}

/// Keeps tokens seen at least `min_freq` times, most frequent first (ties
/// broken lexicographically). `max_size` bounds the total including the
/// four special tokens.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_freq: usize, max_size: usize) -> Result<Vocab> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in corpus {
        for tok in normalize(text.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::invalid("corpus is empty after normalization"));
    }
    if max_size < SPECIALS.len() {
        return Err(Error::invalid("max_size must leave room for the special tokens"));
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq.max(1) && !SPECIALS.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().take(max_size - SPECIALS.len()).map(|(t, _)| t));
    Vocab::from_tokens(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub mask: Vec<u8>,
    /// Number of real positions, CLS included.
    pub len: usize,
}

impl TokenSequence {
    /// The unpadded prefix.
    pub fn trimmed(&self) -> &[usize] {
        &self.ids[..self.len]
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// Builds a padded sequence from raw ids (CLS expected at position 0).
    pub fn from_ids(ids: &[usize], max_len: usize) -> Result<Self> {
        if ids.is_empty() || ids.len() > max_len {
            return Err(Error::invalid("sequence length must lie in 1..=max_len"));
        }
        let mut padded = ids.to_vec();
        padded.resize(max_len, PAD);
        let mut mask = vec![1u8; ids.len()];
        mask.resize(max_len, 0);
        Ok(Self {
            ids: padded,
            mask,
            len: ids.len(),
        })
    }
}

pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSequence> {
    if max_len < 2 {
        return Err(Error::invalid("max_len must be at least 2"));
    }
    let mut ids = vec![CLS];
    ids.extend(
        normalize(text)
            .iter()
            .take(max_len - 1)
            .map(|t| vocab.id(t).unwrap_or(UNK)),
    );
    TokenSequence::from_ids(&ids, max_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_examples() {
        let v = build_vocab(&["up up down"], 1, 5000).unwrap();
        assert_eq!(v.tokens(), &["[PAD]", "[UNK]", "[CLS]", "[MASK]", "up", "down"]);
        let v = build_vocab(&["up up down"], 2, 5000).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("up"), Some(4));
        assert_eq!(v.id("down"), None);
    }

    #[test]
    fn vocab_is_deterministic_and_ordered() {
        let corpus = ["b a c", "c b", "a! A? zeta"];
        let v1 = build_vocab(&corpus, 1, 100).unwrap();
        let v2 = build_vocab(&corpus, 1, 100).unwrap();
        assert_eq!(v1, v2);
        // a:3, b:2, c:2, zeta:1
        assert_eq!(&v1.tokens()[4..], &["a", "b", "c", "zeta"]);
        let capped = build_vocab(&corpus, 1, 6).unwrap();
        assert_eq!(&capped.tokens()[4..], &["a", "b"]);
    }

    #[test]
    fn vocab_errors() {
        let empty: [&str; 0] = [];
        assert!(build_vocab(&empty, 1, 10).is_err());
        assert!(build_vocab(&["!!! ..."], 1, 10).is_err());
        assert!(build_vocab(&["a"], 1, 3).is_err());
    }

    #[test]
    fn vocab_text_round_trip() {
        let v = build_vocab(&["stocks rally, stocks fall"], 1, 100).unwrap();
        let text = v.to_text();
        assert!(text.starts_with("[PAD]\n[UNK]\n[CLS]\n[MASK]\n"));
        assert_eq!(Vocab::from_text(&text).unwrap(), v);
        assert!(Vocab::from_text("up\ndown\n").is_err());
    }

    #[test]
    fn tokenize_examples() {
        let v = build_vocab(&["stocks up"], 1, 100).unwrap();
        let s = tokenize("Stocks UP!", &v, 8).unwrap();
        assert_eq!(&s.ids[..3], &[CLS, v.id("stocks").unwrap(), v.id("up").unwrap()]);
        assert!(s.ids[3..].iter().all(|i| *i == PAD));
        assert_eq!(s.mask, vec![1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(s.trimmed().len(), 3);

        let long = vec!["up"; 500].join(" ");
        let s = tokenize(&long, &v, 64).unwrap();
        assert_eq!(s.ids.len(), 64);
        assert!(s.mask.iter().all(|m| *m == 1));

        let s = tokenize("", &v, 4).unwrap();
        assert_eq!(s.ids, vec![CLS, PAD, PAD, PAD]);
        assert_eq!(s.mask, vec![1, 0, 0, 0]);

        let s = tokenize("unseen words", &v, 4).unwrap();
        assert_eq!(s.trimmed(), &[CLS, UNK, UNK]);
        assert!(tokenize("x", &v, 1).is_err());
    }
}
