//! The anchored target model family.
//!
//! A family is pinned by one seed: a windowed feature basis (the stand-in for
//! the backbone stack), a frozen anchor block, and a frozen vocabulary
//! projection. Fine-tuned versions differ only in a low-level adapter applied
//! to the backbone features; the anchor and the vocabulary head are shared
//! by reference across every version, so freezing is structural rather than
//! a training-time promise.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Token;

use super::embed::{FeatureBasis, TARGET_WINDOW};
use super::math::{argmax, Mat};

/// Token vocabulary: indices in `[0, size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab {
    size: usize,
}

impl Default for Vocab {
    fn default() -> Self {
        Self { size: 64 }
    }
}

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config(format!("vocab size must be >= 2, got {size}")));
        }
        if size > u16::MAX as usize + 1 {
            return Err(Error::Config(format!(
                "vocab size {size} exceeds the 16-bit token index"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, t: Token) -> bool {
        (t as usize) < self.size
    }
}

/// Dimensions and seed pinning one model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyConfig {
    pub vocab: usize,
    /// Feature dimension `d`.
    pub dim: usize,
    /// Draft head hidden width `h`.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { vocab: 64, dim: 16, hidden: 32, seed: 0 }
    }
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<Self> {
        Vocab::new(self.vocab)?;
        if self.dim < 2 {
            return Err(Error::Config(format!("feature dim must be >= 2, got {}", self.dim)));
        }
        if self.hidden < 1 {
            return Err(Error::Config(format!("hidden width must be >= 1, got {}", self.hidden)));
        }
        Ok(*self)
    }
}

/// Frozen tanh block shared between the target head and the draft.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorBlock<T> {
    weight: Mat<T>,
    bias: Vec<T>,
}

impl<T: Scalar> AnchorBlock<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut h = self.weight.matvec(x);
        for (v, b) in h.iter_mut().zip(&self.bias) {
            *v = (*v + *b).tanh();
        }
        h
    }

    pub fn weight(&self) -> &Mat<T> {
        &self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn from_parts(weight: Mat<T>, bias: Vec<T>) -> Result<Self> {
        if weight.rows() != weight.cols() || weight.rows() != bias.len() {
            return Err(Error::Codec("anchor block shape mismatch".into()));
        }
        Ok(Self { weight, bias })
    }
}

/// Backbone state of one target version: the shared feature basis plus this
/// version's adapter perturbation (zero for the base version).
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneVersion<T> {
    version_id: u32,
    basis: Arc<FeatureBasis<T>>,
    adapter: Option<Mat<T>>,
    param_count: usize,
}

impl<T: Scalar> BackboneVersion<T> {
    pub fn version_id(&self) -> u32 {
        self.version_id
    }

    pub fn adapter(&self) -> Option<&Mat<T>> {
        self.adapter.as_ref()
    }

    pub fn basis(&self) -> &FeatureBasis<T> {
        &self.basis
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }
}

/// Cloud-side target model: versioned backbone, frozen anchor, frozen head.
#[derive(Debug, Clone)]
pub struct TargetModel<T> {
    config: FamilyConfig,
    backbone: BackboneVersion<T>,
    anchor: Arc<AnchorBlock<T>>,
    /// `vocab x dim` vocabulary projection.
    lm_head: Arc<Mat<T>>,
}

impl<T: Scalar> TargetModel<T> {
    /// Builds the base (version 0) model of a family.
    pub fn base(config: &FamilyConfig) -> Result<Self> {
        let config = config.validate()?;
        let d = config.dim;
        let basis = FeatureBasis::new(config.seed, config.vocab, TARGET_WINDOW, d);

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xA11C_0B10_C4_u64);
        let weight = Mat::random(d, d, 1.0 / (d as f64).sqrt(), &mut rng);
        let bias = Mat::<T>::random(d, 1, 0.1, &mut rng).data().to_vec();
        let anchor = AnchorBlock { weight, bias };

        let mut head_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x11EA_D000_u64);
        let lm_head = Mat::random(config.vocab, d, 1.0 / (d as f64).sqrt(), &mut head_rng);

        let param_count = basis.table().len() + d * d;
        Ok(Self {
            config,
            backbone: BackboneVersion {
                version_id: 0,
                basis: Arc::new(basis),
                adapter: None,
                param_count,
            },
            anchor: Arc::new(anchor),
            lm_head: Arc::new(lm_head),
        })
    }

    /// Derives the next version by adding `magnitude` times a seeded random
    /// direction of unit spectral norm to the adapter. The anchor and the
    /// vocabulary head are shared untouched.
    pub fn fine_tune(&self, magnitude: T, task_seed: u64) -> Result<Self> {
        if !magnitude.is_finite() || magnitude < T::zero() {
            return Err(Error::Domain(format!(
                "fine-tune magnitude must be >= 0, got {magnitude}"
            )));
        }
        let d = self.config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed ^ 0xADA3_7E55_u64);
        let direction = Mat::<T>::random(d, d, 1.0, &mut rng);
        let sigma = direction.spectral_norm();
        let mut adapter = match &self.backbone.adapter {
            Some(a) => a.clone(),
            None => Mat::zeros(d, d),
        };
        if sigma > T::zero() {
            adapter.add_scaled(&direction, magnitude / sigma);
        }
        Ok(Self {
            config: self.config,
            backbone: BackboneVersion {
                version_id: self.backbone.version_id + 1,
                basis: Arc::clone(&self.backbone.basis),
                adapter: Some(adapter),
                param_count: self.backbone.param_count + d * d,
            },
            anchor: Arc::clone(&self.anchor),
            lm_head: Arc::clone(&self.lm_head),
        })
    }

    /// Full forward pass: backbone features (with the adapter path), the
    /// post-anchor hidden state, and the vocabulary logits.
    pub fn forward(&self, ctx: &[Token]) -> Result<(Vec<T>, Vec<T>)> {
        let mut u = self.backbone.basis.features(ctx)?;
        if let Some(adapter) = &self.backbone.adapter {
            let delta = adapter.matvec(&u);
            for (x, dx) in u.iter_mut().zip(&delta) {
                *x += *dx;
            }
        }
        let h = self.anchor.apply(&u);
        let z = self.lm_head.matvec(&h);
        Ok((h, z))
    }

    /// Argmax next token.
    pub fn greedy(&self, ctx: &[Token]) -> Result<Token> {
        let (_, z) = self.forward(ctx)?;
        Ok(argmax(&z) as Token)
    }

    pub fn config(&self) -> &FamilyConfig {
        &self.config
    }

    pub fn version_id(&self) -> u32 {
        self.backbone.version_id
    }

    pub fn backbone(&self) -> &BackboneVersion<T> {
        &self.backbone
    }

    pub fn anchor(&self) -> &Arc<AnchorBlock<T>> {
        &self.anchor
    }

    pub fn lm_head(&self) -> &Arc<Mat<T>> {
        &self.lm_head
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TargetModel<f64> {
        TargetModel::base(&FamilyConfig { seed: 7, ..FamilyConfig::default() }).unwrap()
    }

    #[test]
    fn base_version_is_zero_with_no_adapter() {
        let m = base();
        assert_eq!(m.version_id(), 0);
        assert!(m.backbone().adapter().is_none());
    }

    #[test]
    fn forward_is_deterministic_and_in_range() {
        let m = base();
        let (h1, z1) = m.forward(&[3, 1, 4]).unwrap();
        let (h2, z2) = m.forward(&[3, 1, 4]).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(z1, z2);
        assert_eq!(z1.len(), 64);
        assert!(h1.iter().all(|v| v.abs() <= 1.0));
        assert!((m.greedy(&[3, 1, 4]).unwrap() as usize) < 64);
    }

    #[test]
    fn zero_magnitude_fine_tune_preserves_outputs() {
        let m = base();
        let tuned = m.fine_tune(0.0, 99).unwrap();
        assert_eq!(tuned.version_id(), 1);
        for ctx in [[3u16, 1, 4].as_slice(), &[0], &[63, 63, 63, 63, 63]] {
            assert_eq!(m.forward(ctx).unwrap(), tuned.forward(ctx).unwrap());
        }
    }

    #[test]
    fn fine_tune_shares_anchor_and_head_bit_identically() {
        let m = base();
        let tuned = m.fine_tune(1.0, 5).unwrap().fine_tune(0.5, 6).unwrap();
        assert!(Arc::ptr_eq(m.anchor(), tuned.anchor()));
        assert!(Arc::ptr_eq(m.lm_head(), tuned.lm_head()));
        assert_eq!(tuned.version_id(), 2);
    }

    #[test]
    fn fine_tune_adapter_has_requested_spectral_norm() {
        let m = base();
        let tuned = m.fine_tune(1.5, 11).unwrap();
        let norm = tuned.backbone().adapter().unwrap().spectral_norm();
        assert!((norm - 1.5).abs() < 1e-6, "spectral norm {norm}");
    }

    #[test]
    fn nonzero_magnitude_changes_some_outputs() {
        let m = base();
        let tuned = m.fine_tune(1.0, 5).unwrap();
        let mut changed = 0;
        for a in 0..16u16 {
            for b in 0..16u16 {
                if m.greedy(&[a, b, a]).unwrap() != tuned.greedy(&[a, b, a]).unwrap() {
                    changed += 1;
                }
            }
        }
        assert!(changed > 0, "magnitude-1 fine-tune changed no greedy outputs");
    }

    #[test]
    fn rejects_out_of_vocab_context() {
        let m = base();
        assert!(m.forward(&[64]).is_err());
        assert!(m.forward(&[]).is_err());
    }
}
