//! Population pieces of the rank-variance decomposition against the empirical
//! variance of the Wilcoxon estimating function, censored and uncensored.

use rankaft::simlab::{population_rank_moments, sigma_decomposition_check, DecompConfig, SimDesign};

fn show(name: &str, m: &[Vec<f64>]) {
    println!("{name:>14}: [{:.5} {:.5}; {:.5} {:.5}]", m[0][0], m[0][1], m[1][0], m[1][1]);
}

fn main() {
    let censored = SimDesign::default();
    let uncensored = SimDesign { censor_mu: f64::INFINITY, ..SimDesign::default() };
    for (design, b) in [(&censored, 0.0), (&censored, 1.0), (&uncensored, 0.0)] {
        let cfg = DecompConfig { enabled: true, draws: 20_000, batches: 20, replicates: 2000, b };
        println!("censor_mu = {}, beta0 = ({b}, {})", design.censor_mu, -b);
        let r = sigma_decomposition_check(design, &cfg, 7, true).expect("decomposition");
        show("Sigma_X/12", &r.sigma_x_over_12);
        show("Sigma_1", &r.sigma1);
        show("Sigma_1 closed", &r.sigma1_closed);
        show("Sigma_2", &r.sigma2);
        show("Sigma_1 - _2", &r.difference);
        show("empirical", r.sigma_emp.as_ref().unwrap());
        show("empirical SE", r.sigma_emp_se.as_ref().unwrap());
        println!(
            "  empirical matches: {}  Sigma_2 psd: {}  Sigma_1 = Sigma_X/12: {}",
            r.empirical_matches(3.0),
            r.sigma2_psd(3.0),
            r.sigma1_matches_sigma_x(3.0)
        );
        let m = population_rank_moments(design, &[b, -b], 100_000, 7);
        println!(
            "  rank mean {:.5} (se {:.5}), variance {:.5} vs {:.5}",
            m.mean, m.mean_se, m.variance, m.variance_target
        );
    }
}
