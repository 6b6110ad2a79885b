use std::collections::HashMap;

const MAX_ORDER: usize = 4;

/// Lowercased tokens; every punctuation character is its own token.
pub fn gleu_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.to_lowercase().split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace()) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn ngram_counts(tokens: &[String]) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for n in 1..=MAX_ORDER {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level GLEU: clipped n-gram matches for orders 1 to 4 pooled
/// together, then `min(precision, recall)`. Two empty sentences score 1; an
/// empty side against a non-empty one scores 0.
pub fn gleu(pred: &str, gold: &str) -> f64 {
    let p = gleu_tokens(pred);
    let g = gleu_tokens(gold);
    if p.is_empty() || g.is_empty() {
        return if p.is_empty() && g.is_empty() { 1.0 } else { 0.0 };
    }
    let pc = ngram_counts(&p);
    let gc = ngram_counts(&g);
    let matches: usize = pc
        .iter()
        .map(|(gram, n)| (*n).min(gc.get(gram).copied().unwrap_or(0)))
        .sum();
    let total_p: usize = pc.values().sum();
    let total_g: usize = gc.values().sum();
    (matches as f64 / total_p as f64).min(matches as f64 / total_g as f64)
}
