//! Acceptance-rate measurement through the real verification path.

use crate::error::Result;
use crate::protocol::{verify_block, DraftBlockMsg, Drafter, KvSession, TargetOracle};
use crate::scalar::Scalar;
use crate::Token;

/// Mean accepted fraction `tau / k` over draft/verify rounds.
///
/// Prompts are decoded in turn, each continuing its own session, until
/// `rounds` rounds have been verified. Acceptance is measured with the same
/// `verify_block` semantics the live protocol uses.
pub fn measure_acceptance<T: Scalar>(
    drafter: &mut dyn Drafter,
    target: &dyn TargetOracle<T>,
    prompts: &[Vec<Token>],
    k: u32,
    rounds: usize,
) -> Result<T> {
    assert!(k >= 1 && rounds >= 1 && !prompts.is_empty());
    let per_prompt = rounds.div_ceil(prompts.len());
    let mut total_ratio = 0.0f64;
    let mut done = 0usize;
    'outer: for (i, prompt) in prompts.iter().enumerate() {
        let mut session = KvSession::new(i as u32);
        session.seed_prompt(target, prompt)?;
        let mut ctx = prompt.clone();
        for _ in 0..per_prompt {
            let tokens = crate::protocol::draft_block(drafter, &ctx, k)?;
            let msg = DraftBlockMsg { session_id: i as u32, seq_offset: ctx.len() as u64, tokens };
            let result = verify_block(target, &mut session, &msg)?;
            let tau = result.accepted as usize;
            let mut emitted: Vec<Token> = msg.tokens[..tau].to_vec();
            emitted.push(result.correction);
            ctx.extend_from_slice(&emitted);
            total_ratio += tau as f64 / k as f64;
            done += 1;
            if done == rounds {
                break 'outer;
            }
        }
    }
    Ok(T::cast(total_ratio / done as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::family::{FamilyConfig, TargetModel};
    use crate::models::synthetic::bernoulli_pair;
    use crate::protocol::Drafter;

    /// Drafter that always proposes the target's own greedy continuation.
    struct Echo<'a, T>(&'a TargetModel<T>);

    impl<T: crate::scalar::Scalar> Drafter for Echo<'_, T> {
        fn propose_next(&mut self, ctx: &[Token]) -> Result<Token> {
            self.0.greedy(ctx)
        }
    }

    fn prompts(n: usize, len: usize, vocab: u16) -> Vec<Vec<Token>> {
        (0..n)
            .map(|i| (0..len).map(|j| ((i * 7 + j * 13) % vocab as usize) as Token).collect())
            .collect()
    }

    #[test]
    fn echo_draft_is_fully_accepted() {
        let base = TargetModel::base(&FamilyConfig { seed: 7, ..FamilyConfig::default() }).unwrap();
        let mut drafter = Echo(&base);
        let acc: f64 =
            measure_acceptance(&mut drafter, &base, &prompts(4, 4, 64), 4, 40).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn bernoulli_half_at_k_one() {
        let (mut draft, target) = bernoulli_pair(0.5, 64, 77).unwrap();
        let acc: f64 =
            measure_acceptance(&mut draft, &target, &prompts(8, 4, 64), 1, 20_000).unwrap();
        assert!((acc - 0.5).abs() < 0.02, "acceptance {acc}");
    }
}
