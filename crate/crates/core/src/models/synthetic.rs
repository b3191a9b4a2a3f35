//! Synthetic model pairs with a controlled agreement rate.
//!
//! The synthetic target is a deterministic hash chain over the context; the
//! paired draft reproduces the target's next token with independent
//! probability `p` and otherwise proposes something else. This gives the
//! policy and simulator tests a dialable ground-truth acceptance rate
//! without any training.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::protocol::{Drafter, TargetOracle};
use crate::scalar::Scalar;
use crate::Token;

fn fnv1a(seed: u64, ctx: &[Token]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for &t in ctx {
        h ^= t as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    // final avalanche so nearby contexts decorrelate
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^ (h >> 33)
}

/// Deterministic pseudorandom next-token function of the full context.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticTarget {
    seed: u64,
    vocab: usize,
}

impl SyntheticTarget {
    pub fn new(vocab: usize, seed: u64) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::Config(format!("vocab must be >= 2, got {vocab}")));
        }
        Ok(Self { seed, vocab })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token(&self, ctx: &[Token]) -> Token {
        (fnv1a(self.seed, ctx) % self.vocab as u64) as Token
    }
}

impl<T: Scalar> TargetOracle<T> for SyntheticTarget {
    fn greedy_next(&self, ctx: &[Token]) -> Result<Token> {
        Ok(self.next_token(ctx))
    }

    fn kv_feature(&self, ctx: &[Token]) -> Result<Vec<T>> {
        // One deterministic value per position stands in for the KV entry.
        let h = fnv1a(self.seed ^ 0xFEA7, ctx);
        Ok(vec![T::cast(h as f64 / u64::MAX as f64)])
    }
}

/// Draft that matches the paired target's argmax with probability `p`.
#[derive(Debug, Clone)]
pub struct BernoulliDraft {
    target: SyntheticTarget,
    p: f64,
    rng: ChaCha8Rng,
}

impl Drafter for BernoulliDraft {
    fn propose_next(&mut self, ctx: &[Token]) -> Result<Token> {
        let truth = self.target.next_token(ctx);
        if self.rng.gen::<f64>() < self.p {
            Ok(truth)
        } else {
            // Any other token; offset by a nonzero amount modulo the vocab.
            let vocab = self.target.vocab as u64;
            let shift = 1 + self.rng.gen_range(0..vocab - 1);
            Ok(((truth as u64 + shift) % vocab) as Token)
        }
    }
}

/// Builds a draft/target pair whose per-position agreement rate is `p`.
pub fn bernoulli_pair(p: f64, vocab: usize, seed: u64) -> Result<(BernoulliDraft, SyntheticTarget)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("agreement probability must be in [0, 1], got {p}")));
    }
    let target = SyntheticTarget::new(vocab, seed)?;
    let draft = BernoulliDraft { target, p, rng: ChaCha8Rng::seed_from_u64(seed ^ 0xD4AF) };
    Ok((draft, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_is_deterministic() {
        let t = SyntheticTarget::new(64, 5).unwrap();
        let a = t.next_token(&[1, 2, 3]);
        assert_eq!(a, t.next_token(&[1, 2, 3]));
        assert!((a as usize) < 64);
    }

    #[test]
    fn p_one_always_matches() {
        let (mut d, t) = bernoulli_pair(1.0, 64, 7).unwrap();
        let mut ctx = vec![3, 1];
        for _ in 0..200 {
            let proposed = d.propose_next(&ctx).unwrap();
            assert_eq!(proposed, t.next_token(&ctx));
            ctx.push(proposed);
        }
    }

    #[test]
    fn p_zero_never_matches() {
        let (mut d, t) = bernoulli_pair(0.0, 64, 7).unwrap();
        let mut ctx = vec![3, 1];
        for _ in 0..200 {
            let proposed = d.propose_next(&ctx).unwrap();
            assert_ne!(proposed, t.next_token(&ctx));
            ctx.push(t.next_token(&ctx));
        }
    }

    #[test]
    fn match_rate_converges_to_p() {
        let (mut d, t) = bernoulli_pair(0.7, 64, 42).unwrap();
        let mut ctx: Vec<Token> = vec![0];
        let n = 100_000;
        let mut matches = 0usize;
        for i in 0..n {
            let proposed = d.propose_next(&ctx).unwrap();
            if proposed == t.next_token(&ctx) {
                matches += 1;
            }
            // extend with the true continuation to keep contexts fresh
            ctx.push(t.next_token(&ctx));
            if ctx.len() > 16 {
                ctx.remove(0);
            }
            let _ = i;
        }
        let rate = matches as f64 / n as f64;
        assert!((rate - 0.7).abs() < 0.01, "match rate {rate}");
    }

    #[test]
    fn rejects_bad_p() {
        assert!(bernoulli_pair(1.2, 64, 0).is_err());
        assert!(bernoulli_pair(-0.1, 64, 0).is_err());
    }
}
