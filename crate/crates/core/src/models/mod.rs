//! Desk-scale model family for the round protocol.
//!
//! The cloud target is a seeded windowed-embedding backbone (with a
//! per-version adapter), a frozen tanh anchor block, and a frozen vocabulary
//! projection. The edge draft shares the anchor and the projection by
//! reference and adds a small trainable head over a shorter-window proxy of
//! the same embedding, so it stays meaningfully weaker than the target while
//! living in the same feature space. Synthetic hash-chain pairs provide a
//! dialable acceptance rate for protocol and policy tests that do not need
//! trained models.

mod acceptance;
mod checkpoint;
mod corpus;
mod draft;
mod embed;
mod family;
mod loss;
pub mod math;
mod synthetic;
mod train;

pub use acceptance::measure_acceptance;
pub use checkpoint::{draft_from_checkpoint, draft_to_checkpoint, Checkpoint, NamedTensor, FORMAT_VERSION, MAGIC};
pub use corpus::Corpus;
pub use draft::{DraftHead, DraftModel, TemperatureDraft, UnanchoredDraft};
pub use embed::{FeatureBasis, DRAFT_WINDOW, RECENCY_DECAY, TARGET_WINDOW};
pub use family::{AnchorBlock, BackboneVersion, FamilyConfig, TargetModel, Vocab};
pub use loss::{kd_term, loss_feat, loss_kd, softmax};
pub use synthetic::{bernoulli_pair, BernoulliDraft, SyntheticTarget};
pub use train::{
    build_anchored_batch, build_unanchored_batch, head_loss_and_gradients, train_draft,
    train_unanchored, unanchored_loss_and_gradients, HeadGradients, TrainSample, TrainingConfig,
    TrainingReport, UnanchoredGradients,
};

use crate::error::Result;
use crate::protocol::{Drafter, TargetOracle};
use crate::scalar::Scalar;
use crate::Token;

impl<T: Scalar> TargetOracle<T> for TargetModel<T> {
    fn greedy_next(&self, ctx: &[Token]) -> Result<Token> {
        self.greedy(ctx)
    }

    fn kv_feature(&self, ctx: &[Token]) -> Result<Vec<T>> {
        Ok(self.forward(ctx)?.0)
    }
}

impl<T: Scalar> Drafter for DraftModel<T> {
    fn propose_next(&mut self, ctx: &[Token]) -> Result<Token> {
        self.greedy(ctx)
    }
}

impl<T: Scalar> Drafter for UnanchoredDraft<T> {
    fn propose_next(&mut self, ctx: &[Token]) -> Result<Token> {
        self.greedy(ctx)
    }
}

impl<T: Scalar> Drafter for TemperatureDraft<T> {
    fn propose_next(&mut self, ctx: &[Token]) -> Result<Token> {
        self.sample_next(ctx)
    }
}
