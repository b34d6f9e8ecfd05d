use lagrep::solver::{chamber_scan, ScanMode, ScanOptions, SolveOptions};
use lagrep::Tolerances;
use std::time::Instant;

fn main() {
    let tol = Tolerances::default();
    for index in [2i64, 3, 4] {
        let t0 = Instant::now();
        let opts = ScanOptions {
            resolution: 0.05,
            wall_margin: 0.02,
            mode: ScanMode::Exhaustive,
            solve: SolveOptions { restarts: 50, max_iters: 2000, seed: 20, ..SolveOptions::default() },
        };
        let report = chamber_scan(2, index, &opts, &tol).unwrap();
        println!(
            "I={} total={} agree={} rate={:.5} elapsed={:.1}s",
            index, report.total, report.agreements, report.agreement_rate,
            t0.elapsed().as_secs_f64()
        );
        for d in report.disagreements.iter().take(5) {
            println!("  disagree: {:?} feas={} u={:.2e} l={:.2e}", d.alpha, d.feasible, d.unitary_residual, d.lagrangian_residual);
        }
    }
}
