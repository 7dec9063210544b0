//! The estimating function computed two ways: as a rank-weighted covariate
//! sum and as a weighted logrank statistic over the risk sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankaft::data::CensoredSample;
use rankaft::rankest::EstimatingContext;
use rankaft::scores::ScoreFunction;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 60;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), (rng.random_range(0..3)) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] - 0.5 * r[1] + rng.random::<f64>()).collect();
    let delta: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
    let sample = CensoredSample::new(y, delta, rows).unwrap();
    let beta = [0.8, -0.3];
    let scores = [
        ScoreFunction::wilcoxon(),
        ScoreFunction::shifted_logrank(n),
        ScoreFunction::winsorized_normal(0.05).unwrap(),
        ScoreFunction::generalized_f(3.0, 3.0).unwrap(),
    ];
    for score in &scores {
        let ctx = EstimatingContext::new(&sample, score, &beta).unwrap();
        let r = ctx.psi_rank_form();
        let w = ctx.psi_wlr_form();
        println!("{:<24} rank form {:>10.6} {:>10.6}   logrank form {:>10.6} {:>10.6}", score.label(), r[0], r[1], w[0], w[1]);
    }
}
