//! Turns g2p labels into the phoneme, word and word-membership sequences the
//! prosody network consumes.

use crate::corpus::SILENCE;
use crate::g2p::{is_punctuation, JOIN, VOID};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TextAnalysis {
    pub phonemes: Vec<String>,
    pub word_of_phoneme: Vec<Option<usize>>,
    /// Written form of each word that produced at least one phoneme.
    pub words: Vec<String>,
}

/// Spaces separate words. Other punctuation also separates words and
/// becomes a single silence phoneme outside any word. Words whose letters
/// are all silent are dropped.
pub fn analyze_labels<S: AsRef<str>>(graphemes: &[char], labels: &[S]) -> TextAnalysis {
    let mut out = TextAnalysis::default();
    let mut word = String::new();
    let mut word_phonemes: Vec<String> = Vec::new();

    fn flush(out: &mut TextAnalysis, word: &mut String, ph: &mut Vec<String>) {
        if !ph.is_empty() {
            let w = out.words.len();
            out.words.push(std::mem::take(word));
            for p in ph.drain(..) {
                out.phonemes.push(p);
                out.word_of_phoneme.push(Some(w));
            }
        }
        word.clear();
    }

    for (&g, l) in graphemes.iter().zip(labels) {
        let l = l.as_ref();
        let literal = l.chars().count() == 1 && l.chars().all(is_punctuation);
        if literal {
            flush(&mut out, &mut word, &mut word_phonemes);
            if !g.is_whitespace() && out.phonemes.last().map(String::as_str) != Some(SILENCE) {
                out.phonemes.push(SILENCE.to_string());
                out.word_of_phoneme.push(None);
            }
            continue;
        }
        word.push(g);
        if l != VOID {
            word_phonemes.extend(l.split(JOIN).map(str::to_string));
        }
    }
    flush(&mut out, &mut word, &mut word_phonemes);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence() {
        let g: Vec<char> = "taxi he, beau!".chars().collect();
        let l = ["t", "a", "k+s", "i", " ", "-", "-", ",", " ", "b", "o", "-", "-", "!"];
        let a = analyze_labels(&g, &l);
        assert_eq!(a.phonemes, ["t", "a", "k", "s", "i", "sil", "b", "o", "sil"]);
        assert_eq!(a.words, ["taxi", "beau"]);
        assert_eq!(
            a.word_of_phoneme,
            [Some(0), Some(0), Some(0), Some(0), Some(0), None, Some(1), Some(1), None]
        );
    }
}
