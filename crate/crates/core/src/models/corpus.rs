//! Training/evaluation token corpora.
//!
//! The built-in generator is a seeded order-2 Markov source: each (previous
//! two tokens) state owns a small candidate set with fixed decaying weights,
//! which gives the sequences enough structure for distillation contexts to
//! resemble evaluation contexts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Token;

/// Candidate successors per Markov state.
const BRANCHING: usize = 6;
/// Selection weights over the candidate set, most likely first.
const WEIGHTS: [f64; BRANCHING] = [0.35, 0.25, 0.17, 0.11, 0.07, 0.05];

fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut x = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ c.wrapping_mul(0x94D0_49BB_1331_11EB);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A list of token sequences over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sequences: Vec<Vec<Token>>,
    vocab: usize,
    pub seed: u64,
}

impl Corpus {
    /// Generates `n_sequences` sequences of `len` tokens from a seeded
    /// order-2 Markov source over `vocab` tokens.
    pub fn markov(vocab: usize, n_sequences: usize, len: usize, seed: u64) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::Config(format!("vocab must be >= 2, got {vocab}")));
        }
        if n_sequences == 0 || len < 2 {
            return Err(Error::Config(
                "corpus needs at least one sequence of length >= 2".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sequences = Vec::with_capacity(n_sequences);
        for _ in 0..n_sequences {
            let mut seq: Vec<Token> = Vec::with_capacity(len);
            seq.push(rng.gen_range(0..vocab) as Token);
            seq.push(rng.gen_range(0..vocab) as Token);
            while seq.len() < len {
                let a = seq[seq.len() - 2] as u64;
                let b = seq[seq.len() - 1] as u64;
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = BRANCHING - 1;
                for (i, w) in WEIGHTS.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let next = mix(seed, a, b, pick as u64) % vocab as u64;
                seq.push(next as Token);
            }
            sequences.push(seq);
        }
        Ok(Self { sequences, vocab, seed })
    }

    /// Parses the corpus text format: one space-separated token-index
    /// sequence per line; `#` comment lines and blank lines are skipped.
    pub fn parse(text: &str, vocab: usize) -> Result<Self> {
        let mut sequences = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut seq = Vec::new();
            for field in trimmed.split_whitespace() {
                let t: usize = field
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("invalid token index {field:?}") })?;
                if t >= vocab {
                    return Err(Error::Parse {
                        line,
                        msg: format!("token {t} out of vocabulary of size {vocab}"),
                    });
                }
                seq.push(t as Token);
            }
            if seq.is_empty() {
                return Err(Error::Parse { line, msg: "empty sequence".into() });
            }
            sequences.push(seq);
        }
        if sequences.is_empty() {
            return Err(Error::Config("corpus file contains no sequences".into()));
        }
        Ok(Self { sequences, vocab, seed: 0 })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for seq in &self.sequences {
            let line: Vec<String> = seq.iter().map(|t| t.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn sequences(&self) -> &[Vec<Token>] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_is_deterministic_and_in_vocab() {
        let a = Corpus::markov(64, 20, 32, 5).unwrap();
        let b = Corpus::markov(64, 20, 32, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.sequences().iter().all(|s| s.len() == 32));
        assert!(a.sequences().iter().flatten().all(|t| (*t as usize) < 64));
        let c = Corpus::markov(64, 20, 32, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn markov_has_structure() {
        // The same 2-token state always allows at most BRANCHING successors.
        let corpus = Corpus::markov(64, 200, 32, 5).unwrap();
        let mut seen: std::collections::HashMap<(Token, Token), std::collections::HashSet<Token>> =
            std::collections::HashMap::new();
        for seq in corpus.sequences() {
            for w in seq.windows(3) {
                seen.entry((w[0], w[1])).or_default().insert(w[2]);
            }
        }
        assert!(seen.values().all(|s| s.len() <= BRANCHING));
    }

    #[test]
    fn text_round_trip() {
        let corpus = Corpus::markov(64, 5, 8, 9).unwrap();
        let text = corpus.to_text();
        let parsed = Corpus::parse(&text, 64).unwrap();
        assert_eq!(parsed.sequences(), corpus.sequences());
    }

    #[test]
    fn parse_rejects_out_of_vocab_with_line_number() {
        match Corpus::parse("1 2 3\n4 99 5", 64) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(Corpus::parse("1 two 3", 64), Err(Error::Parse { line: 1, .. })));
        assert!(Corpus::parse("", 64).is_err());
    }
}
