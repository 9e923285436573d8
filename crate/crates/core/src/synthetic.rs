//! Seeded synthetic data for tests, benchmarks and smoke runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::{Path, PathBuf};

use crate::corpus::{to_long_text, write_wav_mono16, Interval, TextGrid, Tier, SILENCE};
use crate::g2p::{encode_alignment, LabelSequence};
use crate::prosody::{analyze_labels, static_word_vectors, write_web, TextAnalysis, WORDS_EXT};
use crate::Result;

/// Sine of amplitude `amp` sampled at `sample_rate`.
pub fn sine(f0: f64, amp: f64, secs: f64, sample_rate: u32) -> Vec<f32> {
    let n = (secs * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| (amp * (2.0 * std::f64::consts::PI * f0 * i as f64 / sample_rate as f64).sin()) as f32)
        .collect()
}

const CONSONANTS: &[char] = &['b', 'd', 'f', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z', 'x', 'h'];
const VOWELS: &[&str] = &["a", "i", "o", "u", "e", "ou"];

/// Letter-to-sound rules of a toy orthography. They exercise every label
/// kind: `x` is two phonemes, `h` and final `e` are silent, `ou` is a
/// digraph whose second letter is void.
fn phonemes_of_word(word: &[char]) -> Vec<Vec<String>> {
    let p = |s: &str| vec![s.to_string()];
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        let c = word[i];
        let last = i + 1 == word.len();
        match c {
            'x' => out.push(vec!["k".to_string(), "s".to_string()]),
            'h' => out.push(Vec::new()),
            'e' if last => out.push(Vec::new()),
            'e' => out.push(p("@")),
            'u' => out.push(p("y")),
            'o' if word.get(i + 1) == Some(&'u') => {
                out.push(p("u"));
                out.push(Vec::new());
                i += 1;
            }
            c => out.push(p(&c.to_string())),
        }
        i += 1;
    }
    out
}

fn random_word<R: Rng>(rng: &mut R) -> Vec<char> {
    let mut w = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        w.push(*CONSONANTS.choose(rng).expect("non-empty"));
        w.extend(VOWELS.choose(rng).expect("non-empty").chars());
    }
    w
}

/// Sentences of 2–5 toy words with spaces, commas and a final `.`, `?` or
/// `!`, labelled by the toy rules.
pub fn lexicon(n_sentences: usize, seed: u64) -> Vec<LabelSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            let mut g: Vec<char> = Vec::new();
            let mut spans: Vec<Vec<String>> = Vec::new();
            let n_words = rng.gen_range(2..=5);
            for k in 0..n_words {
                if k > 0 {
                    if rng.gen_bool(0.2) {
                        g.push(',');
                        spans.push(Vec::new());
                    }
                    g.push(' ');
                    spans.push(Vec::new());
                }
                let w = random_word(&mut rng);
                spans.extend(phonemes_of_word(&w));
                g.extend(w);
            }
            g.push(*['.', '?', '!'].choose(&mut rng).expect("non-empty"));
            spans.push(Vec::new());
            encode_alignment(&g, &spans).expect("toy rules produce valid phonemes")
        })
        .collect()
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

const UNVOICED: &[&str] = &["p", "t", "k", "f", "s"];

/// Frames each phoneme lasts in the synthetic corpus: 4 to 10, fixed per
/// symbol; silence lasts 8.
pub fn table_duration(phoneme: &str) -> usize {
    if phoneme == SILENCE {
        8
    } else {
        4 + (fnv1a(phoneme) % 7) as usize
    }
}

/// Fixed f0 per voiced phoneme (100 to 210 Hz); `None` for unvoiced ones.
pub fn table_f0(phoneme: &str) -> Option<f64> {
    if phoneme == SILENCE || UNVOICED.contains(&phoneme) {
        None
    } else {
        Some(100.0 + 10.0 * (fnv1a(phoneme) % 12) as f64)
    }
}

#[derive(Clone, Debug)]
pub struct CorpusSpec {
    pub n_utterances: usize,
    pub speaker: String,
    pub word_dim: usize,
    pub sample_rate: u32,
    pub hop: usize,
    /// Minimum phonemes per utterance.
    pub min_phonemes: usize,
    /// Sentences are drawn from `lexicon(pool, seed)` (then later seeds if
    /// too few qualify).
    pub pool: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_utterances: 3,
            speaker: "neb".into(),
            word_dim: 768,
            sample_rate: 24_000,
            hop: 240,
            min_phonemes: 16,
            pool: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub manifest: PathBuf,
    pub words_dir: PathBuf,
    pub sentences: Vec<LabelSequence>,
    pub analyses: Vec<TextAnalysis>,
}

fn render(a: &TextAnalysis, spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> (Vec<f32>, TextGrid) {
    let sr = spec.sample_rate as f64;
    let mut audio = Vec::new();
    let mut phones = Vec::new();
    let mut phase = 0.0f64;
    for p in &a.phonemes {
        let n = table_duration(p) * spec.hop;
        let start = audio.len() as f64 / sr;
        match table_f0(p) {
            Some(f0) => {
                for _ in 0..n {
                    phase = (phase + 2.0 * std::f64::consts::PI * f0 / sr) % (2.0 * std::f64::consts::PI);
                    audio.push((0.4 * phase.sin()) as f32);
                }
            }
            None if p == SILENCE => audio.extend(std::iter::repeat_n(0.0, n)),
            None => audio.extend((0..n).map(|_| rng.gen_range(-0.02f32..0.02))),
        }
        phones.push(Interval {
            start_s: start,
            end_s: audio.len() as f64 / sr,
            label: if p == SILENCE { String::new() } else { p.clone() },
        });
    }
    let end = audio.len() as f64 / sr;
    let mut words = Vec::new();
    let mut cursor = 0.0;
    for w in 0..a.words.len() {
        let idx: Vec<usize> = (0..a.phonemes.len()).filter(|&i| a.word_of_phoneme[i] == Some(w)).collect();
        let (s, e) = (phones[idx[0]].start_s, phones[*idx.last().expect("word has phonemes")].end_s);
        if s > cursor {
            words.push(Interval { start_s: cursor, end_s: s, label: String::new() });
        }
        words.push(Interval { start_s: s, end_s: e, label: a.words[w].clone() });
        cursor = e;
    }
    if end > cursor {
        words.push(Interval { start_s: cursor, end_s: end, label: String::new() });
    }
    let tier = |name: &str, intervals| Tier { name: name.into(), xmin: 0.0, xmax: end, intervals };
    let tg = TextGrid {
        xmin: 0.0,
        xmax: end,
        tiers: vec![tier("words", words), tier("phones", phones)],
    };
    (audio, tg)
}

/// Writes an aligned corpus into `dir`: `wav/`, `textgrid/`, `words/`
/// (WEB1 vectors from [`static_word_vectors`]) and `manifest.tsv`.
/// Sentences come from [`lexicon`], so a g2p model trained on them can
/// transcribe the corpus text. Durations follow [`table_duration`] and
/// voiced phonemes are sines at [`table_f0`].
pub fn write_prosody_corpus(dir: &Path, spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xa11);
    let mut sentences = Vec::new();
    let mut analyses = Vec::new();
    let mut pool_seed = spec.seed;
    while sentences.len() < spec.n_utterances {
        for s in lexicon(spec.pool.max(1), pool_seed) {
            let a = analyze_labels(&s.graphemes, &s.labels);
            if a.phonemes.len() >= spec.min_phonemes && sentences.len() < spec.n_utterances {
                sentences.push(s);
                analyses.push(a);
            }
        }
        pool_seed += 1;
    }
    let words_dir = dir.join("words");
    let mut manifest = String::new();
    for (k, a) in analyses.iter().enumerate() {
        let id = format!("utt{:03}", k + 1);
        let (audio, tg) = render(a, spec, &mut rng);
        write_wav_mono16(&dir.join("wav").join(format!("{id}.wav")), spec.sample_rate, &audio)?;
        crate::io::write_file(&dir.join("textgrid").join(format!("{id}.TextGrid")), to_long_text(&tg).as_bytes())?;
        let vecs = static_word_vectors(&a.words, spec.word_dim);
        write_web(&crate::io::cache_path(&words_dir, &id, WORDS_EXT), &vecs.vectors)?;
        manifest.push_str(&format!(
            "{id}\t{}\ttextgrid/{id}.TextGrid\twav/{id}.wav\n",
            spec.speaker
        ));
    }
    let manifest_path = dir.join("manifest.tsv");
    crate::io::write_file(&manifest_path, manifest.as_bytes())?;
    Ok(SyntheticCorpus {
        manifest: manifest_path,
        words_dir,
        sentences,
        analyses,
    })
}


#[cfg(test)]
mod corpus_tests {
    use super::*;
    use crate::corpus::{durations_in_frames, load_corpus};

    #[test]
    fn written_corpus_loads_with_table_durations() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec { word_dim: 4, ..Default::default() };
        let sc = write_prosody_corpus(dir.path(), &spec).unwrap();
        let corpus = load_corpus(&sc.manifest).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.speakers, ["neb"]);
        for (u, a) in corpus.utterances.iter().zip(&sc.analyses) {
            let d = durations_in_frames(u, 0.01).unwrap();
            let want: Vec<usize> = a.phonemes.iter().map(|p| table_duration(p)).collect();
            assert_eq!(d, want);
            assert_eq!(u.word_of_phoneme(), a.word_of_phoneme);
            assert_eq!(u.n_samples, want.iter().sum::<usize>() * 240);
        }
    }
}
