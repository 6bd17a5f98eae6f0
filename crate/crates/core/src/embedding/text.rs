use std::collections::HashMap;

use super::{EmbeddingError, EmbeddingVector};

pub const TEXT_DIM: usize = 4096;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Prefix hashed before every token. Picked so that the closed vocabulary of
/// the observation templates and default goals lands in distinct buckets.
const TOKEN_SALT: &[u8] = b"lord162:";

pub(crate) fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn bucket(token: &str) -> usize {
    let h = fnv1a(TOKEN_SALT.iter().copied().chain(token.bytes()));
    (h % TEXT_DIM as u64) as usize
}

/// Lowercased word unigrams plus within-sentence bigrams.
///
/// Punctuation separates words, except a `.` between two digits, which stays
/// part of the number. `.`, `!` and `?` also end a sentence.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut sentences: Vec<Vec<String>> = vec![];
    let mut sentence: Vec<String> = vec![];
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        let decimal = c == '.'
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if decimal {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            sentence.push(std::mem::take(&mut word));
        }
        if matches!(c, '.' | '!' | '?') && !sentence.is_empty() {
            sentences.push(std::mem::take(&mut sentence));
        }
    }
    if !word.is_empty() {
        sentence.push(word);
    }
    if !sentence.is_empty() {
        sentences.push(sentence);
    }

    let mut tokens = vec![];
    for s in sentences {
        let bigrams: Vec<String> = s.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
        tokens.extend(s);
        tokens.extend(bigrams);
    }
    tokens
}

pub fn token_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for t in tokenize(text) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Hashed n-gram count vector, L2-normalized.
pub fn embed_text_ref(text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbeddingError::Input("text has no tokens".into()));
    }
    let mut values = vec![0.0; TEXT_DIM];
    for t in &tokens {
        values[bucket(t)] += 1.0;
    }
    EmbeddingVector::normalized(values)
}
