//! Edge-side draft models.
//!
//! The anchored draft reuses the target family's frozen anchor block and
//! vocabulary head; only its two-layer perceptron is trainable. The
//! unanchored variant drops the sharing and owns every stage - it exists as
//! the experimental control for measuring what anchor sharing buys under
//! target evolution.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::Token;

use super::embed::{FeatureBasis, DRAFT_WINDOW};
use super::family::{AnchorBlock, TargetModel};
use super::loss::softmax;
use super::math::{argmax, Mat};

/// Two-layer perceptron mapping the anchor output back into head space:
/// `g = w2 * tanh(w1 * a + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DraftHead<T> {
    pub w1: Mat<T>,
    pub b1: Vec<T>,
    pub w2: Mat<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> DraftHead<T> {
    /// Random initialization. The output layer starts near zero so an
    /// untrained draft produces near-uniform logits.
    pub fn random(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD4AF_7EAD);
        Self {
            w1: Mat::random(hidden, dim, 1.0 / (dim as f64).sqrt(), &mut rng),
            b1: vec![T::zero(); hidden],
            w2: Mat::random(dim, hidden, 0.01 / (hidden as f64).sqrt(), &mut rng),
            b2: vec![T::zero(); dim],
        }
    }

    /// Forward pass returning the hidden activation and the output.
    pub fn forward(&self, a: &[T]) -> (Vec<T>, Vec<T>) {
        let mut r = self.w1.matvec(a);
        for (v, b) in r.iter_mut().zip(&self.b1) {
            *v = (*v + *b).tanh();
        }
        let mut g = self.w2.matvec(&r);
        for (v, b) in g.iter_mut().zip(&self.b2) {
            *v += *b;
        }
        (r, g)
    }

    pub fn param_count(&self) -> usize {
        self.w1.rows() * self.w1.cols() + self.b1.len() + self.w2.rows() * self.w2.cols() + self.b2.len()
    }
}

/// Static edge draft sharing the target family's anchor and vocabulary head.
#[derive(Debug, Clone)]
pub struct DraftModel<T> {
    proxy: FeatureBasis<T>,
    anchor: Arc<AnchorBlock<T>>,
    head: DraftHead<T>,
    lm_head: Arc<Mat<T>>,
    param_count: usize,
}

impl<T: Scalar> DraftModel<T> {
    /// Assembles a draft with a freshly initialized (untrained) head.
    pub fn untrained(base: &TargetModel<T>, head_seed: u64) -> Self {
        let cfg = base.config();
        let proxy = FeatureBasis::new(cfg.seed, cfg.vocab, DRAFT_WINDOW, cfg.dim);
        let head = DraftHead::random(cfg.dim, cfg.hidden, head_seed);
        Self::from_parts(proxy, Arc::clone(base.anchor()), head, Arc::clone(base.lm_head()))
    }

    pub fn from_parts(
        proxy: FeatureBasis<T>,
        anchor: Arc<AnchorBlock<T>>,
        head: DraftHead<T>,
        lm_head: Arc<Mat<T>>,
    ) -> Self {
        let param_count =
            proxy.table().len() + head.param_count() /* anchor + lm_head are shared, not owned */;
        Self { proxy, anchor, head, lm_head, param_count }
    }

    /// Forward pass: the post-anchor feature and the vocabulary logits.
    pub fn forward(&self, ctx: &[Token]) -> Result<(Vec<T>, Vec<T>)> {
        let v = self.proxy.features(ctx)?;
        let a = self.anchor.apply(&v);
        let (_, g) = self.head.forward(&a);
        let z = self.lm_head.matvec(&g);
        Ok((a, z))
    }

    pub fn greedy(&self, ctx: &[Token]) -> Result<Token> {
        let (_, z) = self.forward(ctx)?;
        Ok(argmax(&z) as Token)
    }

    pub fn proxy(&self) -> &FeatureBasis<T> {
        &self.proxy
    }

    pub fn anchor(&self) -> &Arc<AnchorBlock<T>> {
        &self.anchor
    }

    pub fn head(&self) -> &DraftHead<T> {
        &self.head
    }

    pub fn lm_head(&self) -> &Arc<Mat<T>> {
        &self.lm_head
    }

    pub fn vocab_size(&self) -> usize {
        self.lm_head.rows()
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }
}

/// Control draft with no shared structure: its own context block and its own
/// vocabulary projection, all trainable.
#[derive(Debug, Clone)]
pub struct UnanchoredDraft<T> {
    pub(crate) proxy: FeatureBasis<T>,
    pub(crate) block_w: Mat<T>,
    pub(crate) block_b: Vec<T>,
    pub(crate) head: DraftHead<T>,
    pub(crate) lm_head: Mat<T>,
}

impl<T: Scalar> UnanchoredDraft<T> {
    pub fn untrained(base: &TargetModel<T>, seed: u64) -> Self {
        let cfg = base.config();
        let d = cfg.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB10C_0000);
        let block_w = Mat::random(d, d, 1.0 / (d as f64).sqrt(), &mut rng);
        let block_b: Vec<T> = (0..d)
            .map(|_| T::cast(0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            .collect();
        let lm_head = Mat::random(cfg.vocab, d, 1.0 / (d as f64).sqrt(), &mut rng);
        Self {
            proxy: FeatureBasis::new(cfg.seed, cfg.vocab, DRAFT_WINDOW, d),
            block_w,
            block_b,
            head: DraftHead::random(d, cfg.hidden, seed ^ 0x5107),
            lm_head,
        }
    }

    pub fn forward(&self, ctx: &[Token]) -> Result<(Vec<T>, Vec<T>)> {
        let v = self.proxy.features(ctx)?;
        let mut a = self.block_w.matvec(&v);
        for (x, b) in a.iter_mut().zip(&self.block_b) {
            *x = (*x + *b).tanh();
        }
        let (_, g) = self.head.forward(&a);
        let z = self.lm_head.matvec(&g);
        Ok((a, z))
    }

    pub fn greedy(&self, ctx: &[Token]) -> Result<Token> {
        let (_, z) = self.forward(ctx)?;
        Ok(argmax(&z) as Token)
    }
}

/// Seeded temperature sampler around a draft model. Greedy drafting is the
/// default in the round protocol; this exists for experiments.
#[derive(Debug, Clone)]
pub struct TemperatureDraft<T> {
    model: DraftModel<T>,
    temperature: T,
    rng: ChaCha8Rng,
}

impl<T: Scalar> TemperatureDraft<T> {
    pub fn new(model: DraftModel<T>, temperature: T, seed: u64) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(crate::error::Error::Domain(format!(
                "sampling temperature must be > 0, got {temperature}"
            )));
        }
        Ok(Self { model, temperature, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn sample_next(&mut self, ctx: &[Token]) -> Result<Token> {
        let (_, z) = self.model.forward(ctx)?;
        let scaled: Vec<T> = z.iter().map(|v| *v / self.temperature).collect();
        let probs = softmax(&scaled);
        let u = T::cast(self.rng.gen::<f64>());
        let mut acc = T::zero();
        for (i, p) in probs.iter().enumerate() {
            acc += *p;
            if u < acc {
                return Ok(i as Token);
            }
        }
        Ok((probs.len() - 1) as Token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::family::FamilyConfig;

    fn base() -> TargetModel<f64> {
        TargetModel::base(&FamilyConfig { seed: 7, ..FamilyConfig::default() }).unwrap()
    }

    #[test]
    fn untrained_draft_is_deterministic() {
        let b = base();
        let d1 = DraftModel::untrained(&b, 3);
        let d2 = DraftModel::untrained(&b, 3);
        assert_eq!(d1.forward(&[3, 1, 4]).unwrap(), d2.forward(&[3, 1, 4]).unwrap());
        let d3 = DraftModel::untrained(&b, 4);
        assert_ne!(d1.forward(&[3, 1, 4]).unwrap().1, d3.forward(&[3, 1, 4]).unwrap().1);
    }

    #[test]
    fn untrained_head_gives_near_uniform_logits() {
        let b = base();
        let d = DraftModel::untrained(&b, 3);
        let (_, z) = d.forward(&[3, 1, 4]).unwrap();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
        // w2 is initialized at 1e-2 scale; logit spread stays well below the
        // trained regime (where the hand-measured variance is > 0.1).
        assert!(var < 1e-2, "untrained logit variance {var}");
        let p = softmax(&z);
        let uniform = 1.0 / p.len() as f64;
        assert!(p.iter().all(|v| (v - uniform).abs() < 0.2 * uniform));
    }

    #[test]
    fn draft_shares_anchor_and_head_with_target() {
        let b = base();
        let d = DraftModel::untrained(&b, 3);
        assert!(Arc::ptr_eq(d.anchor(), b.anchor()));
        assert!(Arc::ptr_eq(d.lm_head(), b.lm_head()));
    }

    #[test]
    fn draft_rejects_out_of_vocab() {
        let b = base();
        let d = DraftModel::untrained(&b, 3);
        assert!(d.forward(&[64]).is_err());
        assert!(d.greedy(&[2, 99]).is_err());
    }

    #[test]
    fn temperature_sampler_is_seeded() {
        let b = base();
        let d = DraftModel::untrained(&b, 3);
        let mut s1 = TemperatureDraft::new(d.clone(), 1.0, 11).unwrap();
        let mut s2 = TemperatureDraft::new(d, 1.0, 11).unwrap();
        let a: Vec<Token> = (0..50).map(|_| s1.sample_next(&[3, 1, 4]).unwrap()).collect();
        let b2: Vec<Token> = (0..50).map(|_| s2.sample_next(&[3, 1, 4]).unwrap()).collect();
        assert_eq!(a, b2);
        assert!(a.iter().any(|t| *t != a[0]), "temperature 1 should not be deterministic");
    }

    #[test]
    fn unanchored_draft_forward_works() {
        let b = base();
        let u = UnanchoredDraft::untrained(&b, 5);
        let (a, z) = u.forward(&[3, 1, 4]).unwrap();
        assert_eq!(a.len(), 16);
        assert_eq!(z.len(), 64);
    }
}
