//! Sentence-level chrF++ compatible with SacreBLEU's `CHRF(word_order=2)`
//! defaults: whitespace-stripped character n-grams, punctuation-split word
//! n-grams, effective-order averaging of precision and recall, β = 2.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{MbrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
        }
    }
}

impl ChrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.char_order < 1 {
            return Err(MbrError::validation("chrF char order must be >= 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(MbrError::validation("chrF beta must be positive"));
        }
        Ok(())
    }
}

/// Python's `str.isspace`, which is what `str.split()` splits on. It is
/// `char::is_whitespace` plus the ASCII information separators.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

fn py_split(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_py_space).filter(|w| !w.is_empty())
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Split a leading or trailing punctuation mark off each word (at most one
/// per word, trailing preferred).
fn split_punctuation(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for w in py_split(s) {
        let mut chars = w.char_indices();
        let (_, first) = chars.next().expect("non-empty word");
        let Some((last_at, last)) = w.char_indices().next_back() else {
            unreachable!()
        };
        if last_at == 0 {
            out.push(w);
        } else if is_punct(last) {
            out.push(&w[..last_at]);
            out.push(&w[last_at..]);
        } else if is_punct(first) {
            let cut = first.len_utf8();
            out.push(&w[..cut]);
            out.push(&w[cut..]);
        } else {
            out.push(w);
        }
    }
    out
}

/// Maps n-grams to dense ids. Profiles built with one interner can be
/// compared by id.
#[derive(Debug, Default)]
pub struct NgramInterner {
    ids: HashMap<String, u32>,
    key: String,
}

impl NgramInterner {
    fn id(&mut self, kind: char, gram: &str) -> u32 {
        self.key.clear();
        self.key.push(kind);
        self.key.push_str(gram);
        if let Some(&id) = self.ids.get(self.key.as_str()) {
            return id;
        }
        let next = self.ids.len() as u32;
        self.ids.insert(self.key.clone(), next);
        next
    }
}

/// Per-order n-gram counts of one string: `char_order` character orders
/// followed by `word_order` word orders, each sorted by id.
#[derive(Debug, Clone)]
pub struct ChrfProfile {
    orders: Vec<Vec<(u32, u32)>>,
    totals: Vec<u32>,
}

fn tally(ids: Vec<u32>) -> Vec<(u32, u32)> {
    let mut ids = ids;
    ids.sort_unstable();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for id in ids {
        match out.last_mut() {
            Some((last, c)) if *last == id => *c += 1,
            _ => out.push((id, 1)),
        }
    }
    out
}

impl ChrfProfile {
    pub fn new(text: &str, params: &ChrfParams, interner: &mut NgramInterner) -> Self {
        let stripped: String = text.chars().filter(|&c| !is_py_space(c)).collect();
        let mut bounds: Vec<usize> = stripped.char_indices().map(|(i, _)| i).collect();
        bounds.push(stripped.len());
        let n_chars = bounds.len() - 1;
        let words = split_punctuation(text);

        let mut orders = Vec::with_capacity(params.char_order + params.word_order);
        for n in 1..=params.char_order {
            let ids = (0..(n_chars + 1).saturating_sub(n))
                .map(|i| interner.id(char::from(b'0' + n as u8), &stripped[bounds[i]..bounds[i + n]]))
                .collect();
            orders.push(tally(ids));
        }
        for n in 1..=params.word_order {
            let ids = words
                .windows(n)
                .map(|w| interner.id(char::from(b'a' + n as u8), &w.join(" ")))
                .collect();
            orders.push(tally(ids));
        }
        let totals = orders.iter().map(|o| o.iter().map(|&(_, c)| c).sum()).collect();
        ChrfProfile { orders, totals }
    }
}

/// (hyp count, ref count, matches) for one order.
fn match_stats(hyp: &[(u32, u32)], hyp_total: u32, rf: &[(u32, u32)], ref_total: u32) -> [usize; 3] {
    let (mut i, mut j, mut matches) = (0, 0, 0u32);
    while i < hyp.len() && j < rf.len() {
        match hyp[i].0.cmp(&rf[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                matches += hyp[i].1.min(rf[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    // No hypothesis n-grams are counted for an order the reference lacks.
    let hyp_count = if rf.is_empty() { 0 } else { hyp_total };
    [hyp_count as usize, ref_total as usize, matches as usize]
}

fn f_score(stats: &[[usize; 3]], beta: f64) -> f64 {
    let factor = beta * beta;
    let mut avg_prec = 0.0;
    let mut avg_rec = 0.0;
    let mut effective = 0usize;
    for &[n_hyp, n_ref, n_match] in stats {
        if n_hyp > 0 && n_ref > 0 {
            avg_prec += n_match as f64 / n_hyp as f64;
            avg_rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    avg_prec /= effective as f64;
    avg_rec /= effective as f64;
    if avg_prec + avg_rec == 0.0 {
        return 0.0;
    }
    let score = (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
    100.0 * score
}

/// chrF++ between two profiles built with the same interner and params.
pub fn chrf_profiles(hyp: &ChrfProfile, reference: &ChrfProfile, params: &ChrfParams) -> f64 {
    let stats: Vec<[usize; 3]> = (0..hyp.orders.len())
        .map(|k| match_stats(&hyp.orders[k], hyp.totals[k], &reference.orders[k], reference.totals[k]))
        .collect();
    f_score(&stats, params.beta)
}

/// Sentence-level chrF++ of `hypothesis` against a single `reference`, in [0, 100].
pub fn chrf_pp(hypothesis: &str, reference: &str, params: &ChrfParams) -> f64 {
    let mut interner = NgramInterner::default();
    let h = ChrfProfile::new(hypothesis, params, &mut interner);
    let r = ChrfProfile::new(reference, params, &mut interner);
    chrf_profiles(&h, &r, params)
}

/// Corpus score as the mean of sentence-level scores.
pub fn corpus_score<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    references: &[T],
    params: &ChrfParams,
) -> Result<f64> {
    if predictions.len() != references.len() {
        return Err(MbrError::validation(format!(
            "{} predictions but {} references",
            predictions.len(),
            references.len()
        )));
    }
    if predictions.is_empty() {
        return Err(MbrError::validation("corpus score needs at least one sentence"));
    }
    let scores: Vec<f64> = predictions
        .iter()
        .zip(references)
        .map(|(p, r)| chrf_pp(p.as_ref(), r.as_ref(), params))
        .collect();
    Ok(crate::stats::mean(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(h: &str, r: &str) -> f64 {
        chrf_pp(h, r, &ChrfParams::default())
    }

    #[test]
    fn identity_and_empty() {
        assert_eq!(pp("the cat sat", "the cat sat"), 100.0);
        assert_eq!(pp("", "the cat sat"), 0.0);
        assert_eq!(pp("", ""), 0.0);
    }

    #[test]
    fn punctuation_split() {
        assert_eq!(split_punctuation("(hi) a x. ,y z"), vec!["(hi", ")", "a", "x", ".", ",", "y", "z"]);
        assert_eq!(split_punctuation(". ab"), vec![".", "ab"]);
        assert_eq!(split_punctuation("über."), vec!["über", "."]);
    }

    #[test]
    fn python_whitespace() {
        assert_eq!(py_split("a\u{1f}b\u{a0}c").collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn not_symmetric() {
        assert_ne!(pp("ab", "abc"), pp("abc", "ab"));
    }

    #[test]
    fn corpus_mean_and_errors() {
        let p = ChrfParams::default();
        assert_eq!(corpus_score(&["a b", "c"], &["a b", "c"], &p).unwrap(), 100.0);
        assert_eq!(corpus_score(&["the cat", ""], &["the cat", "dog"], &p).unwrap(), 50.0);
        assert!(corpus_score(&["a"], &["a", "b"], &p).is_err());
        assert!(corpus_score::<&str, &str>(&[], &[], &p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ChrfParams { char_order: 0, ..Default::default() }.validate().is_err());
        assert!(ChrfParams { beta: 0.0, ..Default::default() }.validate().is_err());
        assert!(ChrfParams { word_order: 0, ..Default::default() }.validate().is_ok());
    }

    proptest! {
        #[test]
        fn score_in_range(h in "[a-c .,!éx]{0,30}", r in "[a-c .,!éx]{0,30}") {
            let s = pp(&h, &r);
            prop_assert!((0.0..=100.0).contains(&s));
        }

        #[test]
        fn identity_when_any_char(s in "[a-z .,]{0,20}[a-z][a-z .,]{0,20}") {
            prop_assert!((pp(&s, &s) - 100.0).abs() < 1e-9);
        }

        #[test]
        fn corpus_permutation_invariant(
            pairs in proptest::collection::vec(("[a-d ]{0,12}", "[a-d ]{0,12}"), 1..12),
            rot in 0usize..12,
        ) {
            let p = ChrfParams::default();
            let (h, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
            let k = rot % h.len();
            let mut h2 = h.clone();
            let mut r2 = r.clone();
            h2.rotate_left(k);
            r2.rotate_left(k);
            let a = corpus_score(&h, &r, &p).unwrap();
            let b = corpus_score(&h2, &r2, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
