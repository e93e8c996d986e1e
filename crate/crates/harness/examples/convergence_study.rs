//! Convergence statistics across excitation modes: pass rates of the
//! 0.1-accuracy target, error quantiles per parameter block, and the
//! Monte Carlo gain variance. Reproduces the covariance-inflation numbers
//! discussed in the README.

use aid_harness::config::{ExperimentConfig, Mode};
use aid_harness::montecarlo::monte_carlo;
use nalgebra::DVector;

fn stats(cfg: &ExperimentConfig, runs: u64, label: &str) {
    let mc = monte_carlo(cfg, runs).unwrap();
    let truth = cfg.truth().unwrap().flatten();
    let mut max_errs: Vec<f64> = Vec::new();
    let mut b_errs: Vec<f64> = Vec::new();
    let mut d_errs: Vec<f64> = Vec::new();
    for r in &mc.runs {
        let th = DVector::from_vec(r.theta_final.clone());
        let diff = &th - &truth;
        max_errs.push(diff.amax());
        b_errs.push(diff.rows(0, 4).amax());
        d_errs.push(diff.rows(4, 3).amax());
    }
    max_errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    b_errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d_errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pass = max_errs.iter().filter(|&&e| e < 0.1).count();
    println!(
        "{label}: pass {}/{} | max-err median {:.3} p90 {:.3} worst {:.3} | B med {:.3} | D med {:.3} | gain var {:.3e}",
        pass,
        runs,
        max_errs[max_errs.len() / 2],
        max_errs[(max_errs.len() * 9) / 10],
        max_errs[max_errs.len() - 1],
        b_errs[b_errs.len() / 2],
        d_errs[d_errs.len() / 2],
        mc.gain_variance
    );
}

fn main() {
    let base = ExperimentConfig::default();
    stats(&ExperimentConfig { mode: Mode::OptimalBaseline, ..base.clone() }, 50, "baseline N=4000");
    stats(&ExperimentConfig { mode: Mode::FixedWhite, ..base.clone() }, 50, "fixed-white N=4000");
    stats(&ExperimentConfig { mode: Mode::Adaptive, ..base.clone() }, 16, "adaptive N=4000");
    stats(
        &ExperimentConfig { mode: Mode::Adaptive, n_steps: 16000, ..base.clone() },
        4,
        "adaptive N=16000",
    );
}
