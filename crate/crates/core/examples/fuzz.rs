//! A short randomized cross-check run; prints the summary counts.

use mpec_cq::fuzz::{run_fuzz, FuzzConfig};

fn main() {
    let s = run_fuzz(&FuzzConfig { iterations: 20, seed: 7, ..Default::default() });
    println!(
        "affine points: {}, SVC points: {}, forced: {}/{}",
        s.affine_points, s.bho_points, s.forced_points, s.forced_attempts
    );
    println!("closed-form LICQ branches: {:?}", s.licq_cases_all);
    println!("stationarity classes: {:?}", s.stationarity_classes);
    println!("violations: {}", s.violations.len());
    std::process::exit(i32::from(!s.passed()));
}
