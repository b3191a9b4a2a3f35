// Scratch harness for dialing in the toy family. Not part of the deliverable.

use flexspec_core::models::{
    train_draft, train_unanchored, Corpus, FamilyConfig, TargetModel, TrainingConfig,
};
use flexspec_core::sim::{version_shift_eval, ShiftEvalConfig};

fn main() {
    let t0 = std::time::Instant::now();
    for seed in [1u64, 2, 3] {
        let family = FamilyConfig { seed, ..FamilyConfig::default() };
        let base = TargetModel::<f64>::base(&family).unwrap();
        let corpus = Corpus::markov(family.vocab, 5000, 32, seed ^ 0xC0).unwrap();
        let cfg = TrainingConfig { seed: seed ^ 0xF1E, ..TrainingConfig::default() };

        let (anchored, rep_a) = train_draft(&base, &corpus, &cfg).unwrap();
        let (unanchored, rep_u) = train_unanchored(&base, &corpus, &cfg).unwrap();
        println!(
            "seed {seed}: anchored loss {:.4} -> {:.4}, unanchored {:.4} -> {:.4}  [{:?}]",
            rep_a.initial_loss, rep_a.final_loss, rep_u.initial_loss, rep_u.final_loss, t0.elapsed()
        );

        let eval = ShiftEvalConfig { task_seed: seed ^ 0x7A5C, eval_seed: seed ^ 0xE7A1, ..ShiftEvalConfig::default() };
        let rows = version_shift_eval(&anchored, &unanchored, &base, &[0.0, 0.5, 1.0, 2.0], &eval).unwrap();
        for r in &rows {
            println!(
                "  magnitude {:>4}: anchored {:.3}  unanchored {:.3}",
                r.magnitude, r.anchored, r.unanchored
            );
        }

        // Intrinsic drift: how much does the evolved target's greedy path
        // disagree with the base on random contexts?
        for m in [0.5, 1.0, 2.0] {
            let tuned = base.fine_tune(m, seed ^ 0x7A5C).unwrap();
            let mut agree = 0;
            let mut total = 0;
            for a in 0..32u16 {
                for b in 0..32u16 {
                    let ctx = [a, b, (a + b) % 64];
                    if base.greedy(&ctx).unwrap() == tuned.greedy(&ctx).unwrap() {
                        agree += 1;
                    }
                    total += 1;
                }
            }
            println!("  base-vs-evolved({m}) greedy agreement: {:.3}", agree as f64 / total as f64);
        }
    }
    println!("total {:?}", t0.elapsed());
}
