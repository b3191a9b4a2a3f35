//! One-time offline draft training.
//!
//! The draft head (and, at training time only, the feature projection `w_p`)
//! is fit by plain gradient descent on
//!
//! ```text
//! L = lambda1 * mean ||w_p g - h_t||^2  +  lambda2 * mean T^2 KL(p_t || p_d)
//! ```
//!
//! against the frozen base target as teacher. Backpropagation is written out
//! by hand and checked against central finite differences in the test suite.
//! The anchor block and the vocabulary head never receive gradients; they are
//! not even reachable from the parameter structs updated here.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::corpus::Corpus;
use super::draft::{DraftHead, DraftModel, UnanchoredDraft};
use super::embed::{FeatureBasis, DRAFT_WINDOW};
use super::family::TargetModel;
use super::loss::{kd_term, softmax};
use super::math::{add_scaled_vec, Mat};

/// Hyperparameters of the offline distillation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig<T> {
    /// Weight of the feature-regression loss.
    pub lambda1: T,
    /// Weight of the softened KL loss.
    pub lambda2: T,
    /// Distillation temperature.
    pub temperature: T,
    /// Gradient descent step size.
    pub lr: T,
    pub steps: usize,
    /// Sequences per batch.
    pub batch: usize,
    /// Context positions consumed per sequence.
    pub seq_len: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainingConfig<T> {
    fn default() -> Self {
        Self {
            lambda1: T::one(),
            lambda2: T::one(),
            temperature: T::cast(1.5),
            lr: T::cast(0.05),
            steps: 2500,
            batch: 8,
            seq_len: 16,
            seed: 0xF1E,
        }
    }
}

impl<T: Scalar> TrainingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > T::zero()) {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.lambda1 < T::zero() || self.lambda2 < T::zero() {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        if self.lambda1 == T::zero() && self.lambda2 == T::zero() {
            return Err(Error::Config("at least one loss weight must be > 0".into()));
        }
        if !(self.lr > T::zero()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch < 1 || self.seq_len < 2 {
            return Err(Error::Config("batch must be >= 1 and seq_len >= 2".into()));
        }
        Ok(())
    }
}

/// One training example: the student's (frozen-path) input plus the teacher's
/// hidden state and logits for the same context.
#[derive(Debug, Clone)]
pub struct TrainSample<T> {
    pub student_input: Vec<T>,
    pub teacher_h: Vec<T>,
    pub teacher_z: Vec<T>,
}

/// Gradients of the combined loss for the trainable groups of the anchored
/// draft: the two-layer head and the projection.
#[derive(Debug, Clone)]
pub struct HeadGradients<T> {
    pub w1: Mat<T>,
    pub b1: Vec<T>,
    pub w2: Mat<T>,
    pub b2: Vec<T>,
    pub w_p: Mat<T>,
}

/// Loss and analytic gradients over a batch, for the anchored draft.
///
/// `student_input` must already be the anchor output for each context; the
/// anchor and `lm_head` are treated as constants (no gradients exist for
/// them, structurally).
pub fn head_loss_and_gradients<T: Scalar>(
    head: &DraftHead<T>,
    w_p: &Mat<T>,
    lm_head: &Mat<T>,
    batch: &[TrainSample<T>],
    lambda1: T,
    lambda2: T,
    temperature: T,
) -> Result<(T, HeadGradients<T>)> {
    if batch.is_empty() {
        return Err(Error::Contract("training batch must be non-empty".into()));
    }
    let hidden = head.w1.rows();
    let dim = head.w1.cols();
    let mut grads = HeadGradients {
        w1: Mat::zeros(hidden, dim),
        b1: vec![T::zero(); hidden],
        w2: Mat::zeros(dim, hidden),
        b2: vec![T::zero(); dim],
        w_p: Mat::zeros(w_p.rows(), w_p.cols()),
    };
    let mut total_loss = T::zero();
    let two = T::cast(2.0);

    for sample in batch {
        if sample.student_input.len() != dim || sample.teacher_h.len() != w_p.rows() {
            return Err(Error::Contract("training sample dims do not match the head".into()));
        }
        let (r, g) = head.forward(&sample.student_input);

        // combined output-side gradient dL/dg for this sample
        let mut dg = vec![T::zero(); dim];

        if lambda1 > T::zero() {
            let mut err = w_p.matvec(&g);
            for (e, t) in err.iter_mut().zip(&sample.teacher_h) {
                *e -= *t;
            }
            let mut sq = T::zero();
            for e in &err {
                sq += *e * *e;
            }
            total_loss += lambda1 * sq;
            grads.w_p.add_outer(&err, &g, lambda1 * two);
            add_scaled_vec(&mut dg, &w_p.matvec_t(&err), lambda1 * two);
        }

        if lambda2 > T::zero() {
            let z = lm_head.matvec(&g);
            total_loss += lambda2 * kd_term(&sample.teacher_z, &z, temperature)?;
            let scale = |v: &[T]| v.iter().map(|x| *x / temperature).collect::<Vec<T>>();
            let p = softmax(&scale(&sample.teacher_z));
            let s = softmax(&scale(&z));
            // dKD/dz = temperature * (s - p)
            let dz: Vec<T> = s
                .iter()
                .zip(&p)
                .map(|(si, pi)| lambda2 * temperature * (*si - *pi))
                .collect();
            add_scaled_vec(&mut dg, &lm_head.matvec_t(&dz), T::one());
        }

        // backprop through the head
        grads.w2.add_outer(&dg, &r, T::one());
        add_scaled_vec(&mut grads.b2, &dg, T::one());
        let dr = head.w2.matvec_t(&dg);
        let dq: Vec<T> = dr.iter().zip(&r).map(|(d, ri)| *d * (T::one() - *ri * *ri)).collect();
        grads.w1.add_outer(&dq, &sample.student_input, T::one());
        add_scaled_vec(&mut grads.b1, &dq, T::one());
    }

    let inv_n = T::one() / T::cast(batch.len() as f64);
    for m in [&mut grads.w1, &mut grads.w2, &mut grads.w_p] {
        for v in m.data_mut() {
            *v *= inv_n;
        }
    }
    for v in grads.b1.iter_mut().chain(grads.b2.iter_mut()) {
        *v *= inv_n;
    }
    Ok((total_loss * inv_n, grads))
}

/// Progress record of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingReport<T> {
    /// Combined loss on the held-out evaluation batch before any update.
    pub initial_loss: T,
    /// Same batch, final parameters.
    pub final_loss: T,
    pub steps: usize,
}

fn draw_contexts<'c>(
    corpus: &'c Corpus,
    rng: &mut ChaCha8Rng,
    n_seqs: usize,
    seq_len: usize,
) -> Vec<&'c [crate::Token]> {
    let mut contexts = Vec::with_capacity(n_seqs * seq_len);
    for _ in 0..n_seqs {
        let seq = &corpus.sequences()[rng.gen_range(0..corpus.len())];
        let limit = seq.len().min(seq_len);
        for j in 1..limit {
            contexts.push(&seq[..j]);
        }
    }
    contexts
}

/// Builds anchored-draft training samples: the student input is the frozen
/// anchor applied to the proxy features.
pub fn build_anchored_batch<T: Scalar>(
    base: &TargetModel<T>,
    proxy: &FeatureBasis<T>,
    corpus: &Corpus,
    rng: &mut ChaCha8Rng,
    n_seqs: usize,
    seq_len: usize,
) -> Result<Vec<TrainSample<T>>> {
    draw_contexts(corpus, rng, n_seqs, seq_len)
        .into_iter()
        .map(|ctx| {
            let (teacher_h, teacher_z) = base.forward(ctx)?;
            let student_input = base.anchor().apply(&proxy.features(ctx)?);
            Ok(TrainSample { student_input, teacher_h, teacher_z })
        })
        .collect()
}

fn sgd_step<T: Scalar>(head: &mut DraftHead<T>, w_p: &mut Mat<T>, grads: &HeadGradients<T>, lr: T) {
    head.w1.add_scaled(&grads.w1, -lr);
    add_scaled_vec(&mut head.b1, &grads.b1, -lr);
    head.w2.add_scaled(&grads.w2, -lr);
    add_scaled_vec(&mut head.b2, &grads.b2, -lr);
    w_p.add_scaled(&grads.w_p, -lr);
}

/// Trains an anchored draft against the base target (teacher) and returns it
/// with the training report. `w_p` is training-time machinery and is
/// discarded here. Deterministic for a fixed `(corpus, config)`.
pub fn train_draft<T: Scalar>(
    base: &TargetModel<T>,
    corpus: &Corpus,
    cfg: &TrainingConfig<T>,
) -> Result<(DraftModel<T>, TrainingReport<T>)> {
    cfg.validate()?;
    if base.version_id() != 0 {
        return Err(Error::Contract(format!(
            "draft training requires the base (version 0) target, got version {}",
            base.version_id()
        )));
    }
    if corpus.vocab() != base.vocab_size() {
        return Err(Error::Contract(format!(
            "corpus vocabulary {} does not match the model family's {}",
            corpus.vocab(),
            base.vocab_size()
        )));
    }
    let fam = base.config();
    let proxy = FeatureBasis::new(fam.seed, fam.vocab, DRAFT_WINDOW, fam.dim);
    let mut head = DraftHead::random(fam.dim, fam.hidden, cfg.seed ^ 0x48EAD);
    let mut w_p = Mat::identity(fam.dim);

    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xE7A1);
    let eval_batch = build_anchored_batch(base, &proxy, corpus, &mut eval_rng, cfg.batch.max(4), cfg.seq_len)?;
    let eval_loss = |head: &DraftHead<T>, w_p: &Mat<T>| -> Result<T> {
        Ok(head_loss_and_gradients(
            head,
            w_p,
            base.lm_head(),
            &eval_batch,
            cfg.lambda1,
            cfg.lambda2,
            cfg.temperature,
        )?
        .0)
    };
    let initial_loss = eval_loss(&head, &w_p)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for step in 0..cfg.steps {
        let batch = build_anchored_batch(base, &proxy, corpus, &mut rng, cfg.batch, cfg.seq_len)?;
        let (loss, grads) = head_loss_and_gradients(
            &head,
            &w_p,
            base.lm_head(),
            &batch,
            cfg.lambda1,
            cfg.lambda2,
            cfg.temperature,
        )?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        sgd_step(&mut head, &mut w_p, &grads, cfg.lr);
    }
    let final_loss = eval_loss(&head, &w_p)?;

    let draft = DraftModel::from_parts(
        proxy,
        std::sync::Arc::clone(base.anchor()),
        head,
        std::sync::Arc::clone(base.lm_head()),
    );
    Ok((draft, TrainingReport { initial_loss, final_loss, steps: cfg.steps }))
}

/// Gradients for the unanchored control draft, which additionally trains its
/// own context block and vocabulary projection.
#[derive(Debug, Clone)]
pub struct UnanchoredGradients<T> {
    pub block_w: Mat<T>,
    pub block_b: Vec<T>,
    pub head: HeadGradients<T>,
    pub lm_head: Mat<T>,
}

/// Loss and gradients for the unanchored draft. `student_input` is the raw
/// proxy feature vector; the block output is recomputed here because the
/// block itself is trainable.
pub fn unanchored_loss_and_gradients<T: Scalar>(
    model: &UnanchoredDraft<T>,
    w_p: &Mat<T>,
    batch: &[TrainSample<T>],
    lambda1: T,
    lambda2: T,
    temperature: T,
) -> Result<(T, UnanchoredGradients<T>)> {
    if batch.is_empty() {
        return Err(Error::Contract("training batch must be non-empty".into()));
    }
    let dim = model.block_w.rows();
    let hidden = model.head.w1.rows();
    let vocab = model.lm_head.rows();
    let mut grads = UnanchoredGradients {
        block_w: Mat::zeros(dim, dim),
        block_b: vec![T::zero(); dim],
        head: HeadGradients {
            w1: Mat::zeros(hidden, dim),
            b1: vec![T::zero(); hidden],
            w2: Mat::zeros(dim, hidden),
            b2: vec![T::zero(); dim],
            w_p: Mat::zeros(w_p.rows(), w_p.cols()),
        },
        lm_head: Mat::zeros(vocab, dim),
    };
    let mut total_loss = T::zero();
    let two = T::cast(2.0);

    for sample in batch {
        let v = &sample.student_input;
        let mut a = model.block_w.matvec(v);
        for (x, b) in a.iter_mut().zip(&model.block_b) {
            *x = (*x + *b).tanh();
        }
        let (r, g) = model.head.forward(&a);

        let mut dg = vec![T::zero(); dim];

        if lambda1 > T::zero() {
            let mut err = w_p.matvec(&g);
            for (e, t) in err.iter_mut().zip(&sample.teacher_h) {
                *e -= *t;
            }
            let mut sq = T::zero();
            for e in &err {
                sq += *e * *e;
            }
            total_loss += lambda1 * sq;
            grads.head.w_p.add_outer(&err, &g, lambda1 * two);
            add_scaled_vec(&mut dg, &w_p.matvec_t(&err), lambda1 * two);
        }

        if lambda2 > T::zero() {
            let z = model.lm_head.matvec(&g);
            total_loss += lambda2 * kd_term(&sample.teacher_z, &z, temperature)?;
            let scale = |v: &[T]| v.iter().map(|x| *x / temperature).collect::<Vec<T>>();
            let p = softmax(&scale(&sample.teacher_z));
            let s = softmax(&scale(&z));
            let dz: Vec<T> = s
                .iter()
                .zip(&p)
                .map(|(si, pi)| lambda2 * temperature * (*si - *pi))
                .collect();
            grads.lm_head.add_outer(&dz, &g, T::one());
            add_scaled_vec(&mut dg, &model.lm_head.matvec_t(&dz), T::one());
        }

        grads.head.w2.add_outer(&dg, &r, T::one());
        add_scaled_vec(&mut grads.head.b2, &dg, T::one());
        let dr = model.head.w2.matvec_t(&dg);
        let dq: Vec<T> = dr.iter().zip(&r).map(|(d, ri)| *d * (T::one() - *ri * *ri)).collect();
        grads.head.w1.add_outer(&dq, &a, T::one());
        add_scaled_vec(&mut grads.head.b1, &dq, T::one());

        let da = model.head.w1.matvec_t(&dq);
        let dpre: Vec<T> = da.iter().zip(&a).map(|(d, ai)| *d * (T::one() - *ai * *ai)).collect();
        grads.block_w.add_outer(&dpre, v, T::one());
        add_scaled_vec(&mut grads.block_b, &dpre, T::one());
    }

    let inv_n = T::one() / T::cast(batch.len() as f64);
    for m in [
        &mut grads.block_w,
        &mut grads.head.w1,
        &mut grads.head.w2,
        &mut grads.head.w_p,
        &mut grads.lm_head,
    ] {
        for v in m.data_mut() {
            *v *= inv_n;
        }
    }
    for v in grads
        .block_b
        .iter_mut()
        .chain(grads.head.b1.iter_mut())
        .chain(grads.head.b2.iter_mut())
    {
        *v *= inv_n;
    }
    Ok((total_loss * inv_n, grads))
}

/// Builds unanchored-draft training samples (raw proxy features as input).
pub fn build_unanchored_batch<T: Scalar>(
    base: &TargetModel<T>,
    proxy: &FeatureBasis<T>,
    corpus: &Corpus,
    rng: &mut ChaCha8Rng,
    n_seqs: usize,
    seq_len: usize,
) -> Result<Vec<TrainSample<T>>> {
    draw_contexts(corpus, rng, n_seqs, seq_len)
        .into_iter()
        .map(|ctx| {
            let (teacher_h, teacher_z) = base.forward(ctx)?;
            Ok(TrainSample { student_input: proxy.features(ctx)?, teacher_h, teacher_z })
        })
        .collect()
}

/// Trains the unanchored control draft with the same objective and budget.
pub fn train_unanchored<T: Scalar>(
    base: &TargetModel<T>,
    corpus: &Corpus,
    cfg: &TrainingConfig<T>,
) -> Result<(UnanchoredDraft<T>, TrainingReport<T>)> {
    cfg.validate()?;
    if base.version_id() != 0 {
        return Err(Error::Contract("training requires the base (version 0) target".into()));
    }
    let mut model = UnanchoredDraft::untrained(base, cfg.seed ^ 0xBA5E);
    let mut w_p = Mat::identity(base.config().dim);

    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xE7A1);
    let eval_batch =
        build_unanchored_batch(base, &model.proxy, corpus, &mut eval_rng, cfg.batch.max(4), cfg.seq_len)?;
    let initial_loss = unanchored_loss_and_gradients(
        &model, &w_p, &eval_batch, cfg.lambda1, cfg.lambda2, cfg.temperature,
    )?
    .0;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for step in 0..cfg.steps {
        let batch =
            build_unanchored_batch(base, &model.proxy, corpus, &mut rng, cfg.batch, cfg.seq_len)?;
        let (loss, grads) = unanchored_loss_and_gradients(
            &model, &w_p, &batch, cfg.lambda1, cfg.lambda2, cfg.temperature,
        )?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        model.block_w.add_scaled(&grads.block_w, -cfg.lr);
        add_scaled_vec(&mut model.block_b, &grads.block_b, -cfg.lr);
        model.head.w1.add_scaled(&grads.head.w1, -cfg.lr);
        add_scaled_vec(&mut model.head.b1, &grads.head.b1, -cfg.lr);
        model.head.w2.add_scaled(&grads.head.w2, -cfg.lr);
        add_scaled_vec(&mut model.head.b2, &grads.head.b2, -cfg.lr);
        model.lm_head.add_scaled(&grads.lm_head, -cfg.lr);
        w_p.add_scaled(&grads.head.w_p, -cfg.lr);
    }
    let final_loss = unanchored_loss_and_gradients(
        &model, &w_p, &eval_batch, cfg.lambda1, cfg.lambda2, cfg.temperature,
    )?
    .0;
    Ok((model, TrainingReport { initial_loss, final_loss, steps: cfg.steps }))
}
