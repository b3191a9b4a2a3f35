//! Deterministic context features.
//!
//! Both models embed the trailing window of the context as a sum of
//! per-(token, offset) pseudorandom vectors with a recency-decaying weight.
//! The vectors are derived from the family seed alone, so the target's
//! window-4 basis and the draft's window-2 proxy agree exactly on the two
//! most recent offsets. The draft therefore sees a correlated but genuinely
//! poorer view of the context: it is blind to everything past the last two
//! tokens.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Token;

/// Weight multiplier per step away from the newest token.
pub const RECENCY_DECAY: f64 = 0.35;

/// Context window of the target backbone.
pub const TARGET_WINDOW: usize = 4;
/// Context window of the draft's proxy features.
pub const DRAFT_WINDOW: usize = 2;

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded windowed embedding of a token context into a `dim`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis<T> {
    window: usize,
    dim: usize,
    vocab: usize,
    /// `[vocab][window][dim]`, recency weights baked in.
    table: Vec<T>,
    /// Normalizer so a full window yields roughly unit-variance components.
    inv_norm: T,
}

impl<T: Scalar> FeatureBasis<T> {
    /// Builds the table from the family seed. The entry for `(token, offset)`
    /// depends only on `(seed, token, offset)`, never on the window size.
    pub fn new(seed: u64, vocab: usize, window: usize, dim: usize) -> Self {
        assert!(window >= 1 && dim >= 1 && vocab >= 2);
        let mut table = vec![T::zero(); vocab * window * dim];
        for token in 0..vocab {
            for offset in 0..window {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, token as u64, offset as u64));
                let w = RECENCY_DECAY.powi(offset as i32);
                let base = (token * window + offset) * dim;
                for d in 0..dim {
                    table[base + d] = T::cast(w * rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
        let norm_sq: f64 = (0..window).map(|o| RECENCY_DECAY.powi(2 * o as i32)).sum();
        Self {
            window,
            dim,
            vocab,
            table,
            inv_norm: T::cast(1.0 / norm_sq.sqrt()),
        }
    }

    /// Rebuilds a basis from checkpointed raw parts.
    pub fn from_parts(vocab: usize, window: usize, dim: usize, table: Vec<T>) -> Result<Self> {
        if table.len() != vocab * window * dim {
            return Err(Error::Codec(format!(
                "feature table of {} values does not match [{vocab}][{window}][{dim}]",
                table.len()
            )));
        }
        let norm_sq: f64 = (0..window).map(|o| RECENCY_DECAY.powi(2 * o as i32)).sum();
        Ok(Self { window, dim, vocab, table, inv_norm: T::cast(1.0 / norm_sq.sqrt()) })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    /// Embeds the trailing window of `ctx`. Contexts shorter than the window
    /// simply contribute fewer terms.
    pub fn features(&self, ctx: &[Token]) -> Result<Vec<T>> {
        if ctx.is_empty() {
            return Err(Error::Contract("context must be non-empty".into()));
        }
        let mut out = vec![T::zero(); self.dim];
        let take = self.window.min(ctx.len());
        for offset in 0..take {
            let token = ctx[ctx.len() - 1 - offset] as usize;
            if token >= self.vocab {
                return Err(Error::Domain(format!(
                    "token {token} out of vocabulary of size {}",
                    self.vocab
                )));
            }
            let base = (token * self.window + offset) * self.dim;
            for d in 0..self.dim {
                out[d] += self.table[base + d];
            }
        }
        for v in &mut out {
            *v *= self.inv_norm;
        }
        Ok(out)
    }
}
