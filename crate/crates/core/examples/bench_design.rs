//! Timing and solution survey of the input-design program at parameter
//! estimates along the identification path.

use aid_core::design::{solve_design, DesignConfig};
use aid_core::model::ModelParams;
use aid_core::sdp::SolveOptions;
use std::time::Instant;

fn main() {
    let cfg = DesignConfig::l2_gain_default();
    let opts = SolveOptions::default();
    let cases = [
        ("zero", ModelParams::ararx(&[0.0; 4], &[0.0; 3])),
        ("mid", ModelParams::ararx(&[0.5, 0.3, 0.1, 0.15], &[-0.6, 0.4, -0.1])),
        ("star", ModelParams::ararx(&[0.9, 0.6, 0.2, 0.3], &[-1.2, 0.75, -0.2])),
    ];
    for (name, theta) in &cases {
        let out = solve_design(theta, 0.1, &cfg, &opts).unwrap();
        let t0 = Instant::now();
        let n = 500;
        for _ in 0..n {
            let _ = solve_design(theta, 0.1, &cfg, &opts).unwrap();
        }
        let dt = t0.elapsed().as_secs_f64() / n as f64;
        println!(
            "{name}: r0 = {:.6}, fallback = {}, newton = {:?}, {:.3} ms/solve",
            out.r.r[0],
            out.fallback,
            out.solution.as_ref().map(|s| s.newton_steps),
            dt * 1e3
        );
        println!("   r = {:?}", out.r.r);
    }
}
