//! 1:1 grapheme labelling: every grapheme gets exactly one label, which is
//! a phoneme, several phonemes joined by `+`, the void token `-`, or a
//! literal punctuation/space token.

use std::path::Path;

use super::G2pError;
use crate::io::{read_file, write_file};

pub const VOID: &str = "-";
pub const JOIN: char = '+';
/// How a space label is written in TSV files and decoded output.
pub const SPACE_TOKEN: &str = "␣";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSequence {
    pub graphemes: Vec<char>,
    pub labels: Vec<String>,
}

impl LabelSequence {
    pub fn new(graphemes: Vec<char>, labels: Vec<String>) -> Result<Self, G2pError> {
        if graphemes.len() != labels.len() {
            return Err(G2pError::Mismatch {
                graphemes: graphemes.len(),
                labels: labels.len(),
            });
        }
        Ok(LabelSequence { graphemes, labels })
    }

    pub fn len(&self) -> usize {
        self.graphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphemes.is_empty()
    }

    pub fn text(&self) -> String {
        self.graphemes.iter().collect()
    }
}

/// Whitespace and sentence punctuation, kept as literal tokens when they
/// carry no phonemes. Symbols such as `@` are left out because phoneme
/// sets use them, and `-`/`+` double as the void token and join character.
pub fn is_punctuation(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\'' | '(' | ')' | '[' | ']' | '{' | '}'
                | '«' | '»' | '…' | '¿' | '¡' | '\u{2014}' | '\u{2013}' | '‘' | '’' | '“' | '”' | '„'
        )
}

fn check_phoneme(p: &str) -> Result<(), G2pError> {
    // a lone punctuation phoneme would decode as a literal token
    if p.is_empty() || p == VOID || p.contains(JOIN) || p.chars().any(char::is_whitespace) || is_literal(p) {
        return Err(G2pError::InvalidPhoneme(p.to_string()));
    }
    Ok(())
}

/// Builds the label sequence from per-grapheme phoneme lists.
pub fn encode_alignment(graphemes: &[char], spans: &[Vec<String>]) -> Result<LabelSequence, G2pError> {
    if graphemes.len() != spans.len() {
        return Err(G2pError::Mismatch {
            graphemes: graphemes.len(),
            labels: spans.len(),
        });
    }
    let mut labels = Vec::with_capacity(graphemes.len());
    for (&g, ps) in graphemes.iter().zip(spans) {
        for p in ps {
            check_phoneme(p)?;
        }
        labels.push(match ps.len() {
            0 if is_punctuation(g) => g.to_string(),
            0 => VOID.to_string(),
            _ => ps.join(&JOIN.to_string()),
        });
    }
    Ok(LabelSequence {
        graphemes: graphemes.to_vec(),
        labels,
    })
}

fn is_literal(label: &str) -> bool {
    let mut cs = label.chars();
    matches!((cs.next(), cs.next()), (Some(c), None) if is_punctuation(c))
}

/// Expands labels into the hybrid phoneme + punctuation sequence.
pub fn decode_labels<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    for l in labels {
        let l = l.as_ref();
        if l == VOID {
            continue;
        }
        if is_literal(l) {
            out.push(if l == " " { SPACE_TOKEN.to_string() } else { l.to_string() });
        } else {
            out.extend(l.split(JOIN).map(str::to_string));
        }
    }
    out
}

/// Number of phonemes a label contributes (literals count as tokens, not
/// phonemes).
pub fn phoneme_count(label: &str) -> usize {
    if label == VOID || is_literal(label) {
        0
    } else {
        label.split(JOIN).count()
    }
}

fn tsv_label(l: &str) -> &str {
    if l == " " {
        SPACE_TOKEN
    } else {
        l
    }
}

/// One sentence per line: `graphemes<TAB>space-separated labels`.
pub fn format_tsv(data: &[LabelSequence]) -> String {
    let mut s = String::new();
    for seq in data {
        s.push_str(&seq.text());
        s.push('\t');
        let labels: Vec<&str> = seq.labels.iter().map(|l| tsv_label(l)).collect();
        s.push_str(&labels.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_tsv(text: &str, label: &str) -> Result<Vec<LabelSequence>, G2pError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| G2pError::Tsv {
            path: label.to_string(),
            line: i + 1,
            msg,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (g, l) = line
            .split_once('\t')
            .ok_or_else(|| err("expected graphemes<TAB>labels".into()))?;
        let graphemes: Vec<char> = g.chars().collect();
        let labels: Vec<String> = l
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| if s == SPACE_TOKEN { " ".to_string() } else { s.to_string() })
            .collect();
        if graphemes.len() != labels.len() {
            return Err(err(format!(
                "{} graphemes but {} labels",
                graphemes.len(),
                labels.len()
            )));
        }
        out.push(LabelSequence { graphemes, labels });
    }
    Ok(out)
}

pub fn read_tsv(path: &Path) -> Result<Vec<LabelSequence>, G2pError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| G2pError::Tsv {
        path: path.display().to_string(),
        line: 0,
        msg: "not valid UTF-8".into(),
    })?;
    parse_tsv(&text, &path.display().to_string())
}

pub fn write_tsv(path: &Path, data: &[LabelSequence]) -> Result<(), G2pError> {
    Ok(write_file(path, format_tsv(data).as_bytes())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|s| s.iter().map(|p| p.to_string()).collect()).collect()
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn taxi_beau_punct() {
        let s = encode_alignment(&chars("taxi"), &spans(&[&["t"], &["a"], &["k", "s"], &["i"]])).unwrap();
        assert_eq!(s.labels, ["t", "a", "k+s", "i"]);
        assert_eq!(decode_labels(&s.labels), ["t", "a", "k", "s", "i"]);
        let s = encode_alignment(&chars("beau"), &spans(&[&["b"], &["o"], &[], &[]])).unwrap();
        assert_eq!(s.labels, ["b", "o", "-", "-"]);
        assert_eq!(decode_labels(&s.labels), ["b", "o"]);
        let s = encode_alignment(&chars("a,"), &spans(&[&["a"], &[]])).unwrap();
        assert_eq!(s.labels, ["a", ","]);
        assert_eq!(decode_labels(&["a", ",", " "]), ["a", ",", "␣"]);
    }

    #[test]
    fn mismatch_and_bad_phoneme() {
        assert!(matches!(
            encode_alignment(&chars("ab"), &spans(&[&["a"]])),
            Err(G2pError::Mismatch { .. })
        ));
        assert!(matches!(
            encode_alignment(&chars("a"), &spans(&[&["x+y"]])),
            Err(G2pError::InvalidPhoneme(_))
        ));
    }

    #[test]
    fn hyphen_without_phonemes_is_void() {
        let s = encode_alignment(&chars("a-b"), &spans(&[&["a"], &[], &["b"]])).unwrap();
        assert_eq!(s.labels, ["a", "-", "b"]);
    }

    #[test]
    fn tsv_round_trip() {
        let s = encode_alignment(&chars("a b."), &spans(&[&["a"], &[], &["b", "e"], &[]])).unwrap();
        let text = format_tsv(&[s.clone()]);
        assert_eq!(text, "a b.\ta ␣ b+e .\n");
        assert_eq!(parse_tsv(&text, "x").unwrap(), vec![s]);
        assert!(matches!(parse_tsv("ab\ta\n", "x"), Err(G2pError::Tsv { line: 1, .. })));
    }

    fn grapheme() -> impl Strategy<Value = char> {
        prop_oneof![
            proptest::char::range('a', 'z'),
            Just(' '),
            Just(','),
            Just('.'),
            Just('?'),
            Just('-'),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(items in proptest::collection::vec(
            (grapheme(), proptest::collection::vec("[a-zA-Z@][a-z:]?", 0..4)), 0..30)) {
            let g: Vec<char> = items.iter().map(|(c, _)| *c).collect();
            let sp: Vec<Vec<String>> = items.iter().map(|(_, p)| p.clone()).collect();
            let seq = encode_alignment(&g, &sp).unwrap();
            prop_assert_eq!(seq.labels.len(), seq.graphemes.len());
            let mut want = Vec::new();
            for (c, ps) in &items {
                if ps.is_empty() && is_punctuation(*c) {
                    want.push(if *c == ' ' { SPACE_TOKEN.to_string() } else { c.to_string() });
                } else {
                    want.extend(ps.iter().cloned());
                }
            }
            prop_assert_eq!(decode_labels(&seq.labels), want);
            let m: usize = seq.labels.iter().map(|l| phoneme_count(l)).sum();
            prop_assert_eq!(m, sp.iter().map(Vec::len).sum::<usize>());
        }
    }
}
