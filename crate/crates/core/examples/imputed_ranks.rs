//! Imputed ranks for a small censored sample: the self-consistent estimator
//! of the residual distribution, the per-observation ranks under two scores,
//! and the rank-sum identity.

use rankaft::data::CensoredSample;
use rankaft::rankest::EstimatingContext;
use rankaft::scores::ScoreFunction;

fn main() {
    let sample = CensoredSample::new(
        vec![0.3, 1.1, 0.7, 1.9, 1.1, 2.4, 0.2, 1.6],
        vec![true, false, true, true, true, false, false, true],
        vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
    )
    .unwrap();
    let beta = [0.4];
    for score in [ScoreFunction::wilcoxon(), ScoreFunction::shifted_logrank(sample.n())] {
        let ctx = EstimatingContext::new(&sample, &score, &beta).unwrap();
        println!("score {}", score.label());
        println!("  residual distribution (t, F):");
        for (t, _, f) in ctx.cdf().jumps() {
            println!("    {t:>7.3} {f:.4}");
        }
        let ranks = ctx.imputed_ranks();
        for (i, r) in ranks.iter().enumerate() {
            println!("  obs {i}: e = {:>6.3} delta = {} rank = {r:.4}", ctx.view().e[i], sample.delta()[i] as u8);
        }
        let sum: f64 = ranks.iter().sum();
        println!("  sum of ranks {sum:.12} = n (A(1) - A(0)) = {:.12}", sample.n() as f64 * score.total());
    }
}
