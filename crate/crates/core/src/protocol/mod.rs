//! Draft/verify round state machine.
//!
//! One round: the edge drafts `k` tokens autoregressively, ships them uplink
//! as a [`codec::DraftBlockMsg`], the cloud verifies them left to right
//! against the target model's greedy choice, rolls its KV session back to the
//! accepted prefix, appends a correction token, and returns the outcome.
//! Every round commits at least one token (the correction), and because
//! acceptance is exact argmax equality the committed stream is always
//! identical to decoding the target model alone.

pub mod codec;

pub use codec::{DraftBlockMsg, Message, VerifyResultMsg};

use crate::error::{Error, Result};
use crate::latency::{self, LatencyParams, StepBreakdown};
use crate::scalar::Scalar;
use crate::Token;

/// Proposes draft tokens. Mutable so sampled drafters can own RNG state.
pub trait Drafter {
    fn propose_next(&mut self, ctx: &[Token]) -> Result<Token>;
}

/// The authoritative model the cloud verifies with.
pub trait TargetOracle<T> {
    /// Greedy (argmax) next token given the context.
    fn greedy_next(&self, ctx: &[Token]) -> Result<Token>;

    /// Per-position cached state for the KV session: the feature vector the
    /// target computes after ingesting `ctx.last()`.
    fn kv_feature(&self, ctx: &[Token]) -> Result<Vec<T>>;
}

/// Cloud-side per-user session: committed tokens plus one cached feature
/// vector per position. Entry `i` always equals what a fresh session would
/// compute from `tokens[0..=i]`, which is what makes rollback-by-truncation
/// sound.
#[derive(Debug, Clone, PartialEq)]
pub struct KvSession<T> {
    session_id: u32,
    tokens: Vec<Token>,
    features: Vec<Vec<T>>,
}

impl<T: Scalar> KvSession<T> {
    pub fn new(session_id: u32) -> Self {
        Self { session_id, tokens: Vec::new(), features: Vec::new() }
    }

    pub fn id(&self) -> u32 {
        self.session_id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn features(&self) -> &[Vec<T>] {
        &self.features
    }

    /// Appends one token, computing its cached feature from the context that
    /// now ends with it.
    pub fn extend(&mut self, target: &dyn TargetOracle<T>, token: Token) -> Result<()> {
        self.tokens.push(token);
        match target.kv_feature(&self.tokens) {
            Ok(f) => {
                self.features.push(f);
                Ok(())
            }
            Err(e) => {
                self.tokens.pop();
                Err(e)
            }
        }
    }

    /// Seeds a fresh session with an already-committed prompt.
    pub fn seed_prompt(&mut self, target: &dyn TargetOracle<T>, prompt: &[Token]) -> Result<()> {
        for &t in prompt {
            self.extend(target, t)?;
        }
        Ok(())
    }

    /// Discards every entry past `accepted_len`. Truncation equals rebuilding
    /// from scratch over the kept prefix because entries never depend on what
    /// came after them.
    pub fn rollback(&mut self, accepted_len: usize) {
        self.tokens.truncate(accepted_len);
        self.features.truncate(accepted_len);
    }

    /// Rebuilds an equivalent session from a token list; the oracle that the
    /// rollback invariant is tested against.
    pub fn rebuild(session_id: u32, target: &dyn TargetOracle<T>, tokens: &[Token]) -> Result<Self> {
        let mut s = Self::new(session_id);
        s.seed_prompt(target, tokens)?;
        Ok(s)
    }
}

/// Autoregressive draft of `k` tokens from the drafter.
pub fn draft_block(drafter: &mut dyn Drafter, ctx: &[Token], k: u32) -> Result<Vec<Token>> {
    if k < 1 {
        return Err(Error::Contract(format!("draft_block requires k >= 1, got {k}")));
    }
    let mut full = ctx.to_vec();
    let mut out = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let t = drafter.propose_next(&full)?;
        out.push(t);
        full.push(t);
    }
    Ok(out)
}

/// Cloud-side greedy verification of one draft block.
///
/// Scans positions left to right; a draft token is accepted iff it equals the
/// target's argmax given the committed context plus the accepted prefix. The
/// session is extended optimistically with the whole block (the parallel KV
/// computation), rolled back to the accepted prefix, and extended with the
/// correction token, leaving it exactly `tau + 1` entries longer.
pub fn verify_block<T: Scalar>(
    target: &dyn TargetOracle<T>,
    session: &mut KvSession<T>,
    msg: &DraftBlockMsg,
) -> Result<VerifyResultMsg> {
    if msg.session_id != session.id() {
        return Err(Error::Contract(format!(
            "message for session {} delivered to session {}",
            msg.session_id,
            session.id()
        )));
    }
    if msg.seq_offset != session.len() as u64 {
        return Err(Error::SessionDesync { expected: session.len() as u64, got: msg.seq_offset });
    }
    if msg.tokens.is_empty() {
        return Err(Error::Contract("draft block must carry at least one token".into()));
    }
    let offset = session.len();
    for &t in &msg.tokens {
        session.extend(target, t)?;
    }
    let mut tau = 0usize;
    for (j, &t) in msg.tokens.iter().enumerate() {
        let expected = target.greedy_next(&session.tokens()[..offset + j])?;
        if t == expected {
            tau += 1;
        } else {
            break;
        }
    }
    session.rollback(offset + tau);
    let correction = target.greedy_next(session.tokens())?;
    session.extend(target, correction)?;
    Ok(VerifyResultMsg {
        session_id: msg.session_id,
        seq_offset: msg.seq_offset,
        accepted: tau as u16,
        correction,
    })
}

/// What one round committed and what it cost on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    /// Tokens drafted this round (0 for cloud-only rounds).
    pub k_used: u32,
    /// Accepted draft tokens.
    pub tau: u32,
    /// Accepted prefix plus the correction token; always `tau + 1` long.
    pub emitted: Vec<Token>,
    pub bytes_up: usize,
    pub bytes_down: usize,
}

/// Runs one full draft/verify round: draft, encode, uplink (timed with the
/// actual encoded bit length), verify, downlink, and commit on both sides.
pub fn run_round<T: Scalar>(
    drafter: &mut dyn Drafter,
    edge_ctx: &mut Vec<Token>,
    target: &dyn TargetOracle<T>,
    session: &mut KvSession<T>,
    k: u32,
    rate: T,
    params: &LatencyParams<T>,
) -> Result<(RoundOutcome, StepBreakdown<T>)> {
    if edge_ctx.len() != session.len() {
        return Err(Error::SessionDesync {
            expected: session.len() as u64,
            got: edge_ctx.len() as u64,
        });
    }
    let tokens = draft_block(drafter, edge_ctx, k)?;
    let msg = DraftBlockMsg {
        session_id: session.id(),
        seq_offset: edge_ctx.len() as u64,
        tokens,
    };
    let up_bytes = codec::encode(&Message::Draft(msg))?;
    // The cloud sees only wire bytes; decode what was actually sent.
    let Message::Draft(received) = codec::decode(&up_bytes)? else {
        return Err(Error::Codec("uplink decoded to a non-draft message".into()));
    };
    let result = verify_block(target, session, &received)?;
    let down_bytes = codec::encode(&Message::Verify(result))?;
    let Message::Verify(result) = codec::decode(&down_bytes)? else {
        return Err(Error::Codec("downlink decoded to a non-verify message".into()));
    };

    let tau = result.accepted as usize;
    let mut emitted: Vec<Token> = received.tokens[..tau].to_vec();
    emitted.push(result.correction);
    edge_ctx.extend_from_slice(&emitted);

    let t_up = latency::uplink_time_bits(T::cast((up_bytes.len() * 8) as f64), rate, params)?;
    let breakdown = StepBreakdown::new(
        latency::edge_time(k, params),
        t_up,
        latency::cloud_time(k, params),
        params.t_down,
    );
    Ok((
        RoundOutcome {
            k_used: k,
            tau: tau as u32,
            emitted,
            bytes_up: up_bytes.len(),
            bytes_down: down_bytes.len(),
        },
        breakdown,
    ))
}

/// One autoregressive round with no drafting: the edge pays a header-only
/// uplink request and zero edge compute, the cloud generates exactly one
/// token, and the result comes back downlink.
pub fn run_cloud_only_round<T: Scalar>(
    edge_ctx: &mut Vec<Token>,
    target: &dyn TargetOracle<T>,
    session: &mut KvSession<T>,
    rate: T,
    params: &LatencyParams<T>,
) -> Result<(RoundOutcome, StepBreakdown<T>)> {
    if edge_ctx.len() != session.len() {
        return Err(Error::SessionDesync {
            expected: session.len() as u64,
            got: edge_ctx.len() as u64,
        });
    }
    let offset = session.len() as u64;
    let correction = target.greedy_next(session.tokens())?;
    session.extend(target, correction)?;
    let result = VerifyResultMsg { session_id: session.id(), seq_offset: offset, accepted: 0, correction };
    let down_bytes = codec::encode(&Message::Verify(result))?;
    let Message::Verify(result) = codec::decode(&down_bytes)? else {
        return Err(Error::Codec("downlink decoded to a non-verify message".into()));
    };
    edge_ctx.push(result.correction);

    let t_up = latency::uplink_time_bits(params.header_bits, rate, params)?;
    let breakdown = StepBreakdown::new(
        T::zero(),
        t_up,
        latency::cloud_time(0, params),
        params.t_down,
    );
    Ok((
        RoundOutcome {
            k_used: 0,
            tau: 0,
            emitted: vec![result.correction],
            bytes_up: (params.header_bits.as_f64() / 8.0).round() as usize,
            bytes_down: down_bytes.len(),
        },
        breakdown,
    ))
}

/// Decodes `n` tokens from the target model alone. This is the oracle the
/// losslessness property compares the round protocol against: it never
/// touches the draft, the codec, or the session machinery.
pub fn greedy_decode<T: Scalar>(
    target: &dyn TargetOracle<T>,
    prompt: &[Token],
    n: usize,
) -> Result<Vec<Token>> {
    let mut ctx = prompt.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = target.greedy_next(&ctx)?;
        out.push(t);
        ctx.push(t);
    }
    Ok(out)
}
