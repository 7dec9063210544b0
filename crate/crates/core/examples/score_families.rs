//! Built-in score functions: values, bounds and jump averages over a
//! coarse step CDF.

use rankaft::scores::{ScoreFunction, ScoreSpec};
use rankaft::stepcdf::StepCdf;

fn main() {
    let scores = vec![
        ScoreFunction::wilcoxon(),
        ScoreFunction::logrank(),
        ScoreFunction::shifted_logrank(200),
        ScoreFunction::normal(),
        ScoreFunction::winsorized_normal(0.05).unwrap(),
        ScoreSpec::parse("genf:m1=1,m2=10").unwrap().build(200).unwrap(),
        ScoreSpec::parse("genf:m1=10,m2=1").unwrap().build(200).unwrap(),
        ScoreSpec::parse("genf:m1=3,m2=3").unwrap().build(200).unwrap(),
    ];
    let cdf = StepCdf::from_parts(vec![0.0, 1.0, 2.0], vec![0.25, 0.75, 1.0]).unwrap();
    println!("{:<28} {:>8} {:>8} {:>8}   {:>8} {:>8} {:>8}", "score", "a(0.1)", "a(0.5)", "a(0.9)", "g(0)", "g(1)", "g(2)");
    for s in &scores {
        let (lo, hi) = s.bounds();
        println!(
            "{:<28} {:>8.4} {:>8.4} {:>8.4}   {:>8.4} {:>8.4} {:>8.4}  bounds [{lo:.3}, {hi:.3}]",
            s.label(),
            s.a(0.1),
            s.a(0.5),
            s.a(0.9),
            cdf.gamma_a(0.0, s),
            cdf.gamma_a(1.0, s),
            cdf.gamma_a(2.0, s)
        );
    }
    let custom = ScoreFunction::custom("cubic", |u: f64| u * u * u, None);
    println!("custom cubic: A(1) - A(0) = {:.6}", custom.total());
}
