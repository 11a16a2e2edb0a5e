//! Runs the three built-in counterexamples and prints each verdict table.

use mpec_cq::cq::{check_all, DEFAULT_BIACTIVE_CAP};
use mpec_cq::fixtures::all;
use mpec_cq::model::{classify_active, Tolerances};

fn main() -> mpec_cq::error::Result<()> {
    let tol = Tolerances::default();
    for f in all() {
        let active = classify_active(&f.eval, &tol)?;
        let report = check_all(&f.eval, &active, &tol, DEFAULT_BIACTIVE_CAP)?;
        println!("{} (biactive {:?})", f.name, active.biactive);
        for v in &report.verdicts {
            println!("  {:<16} {:?}", v.cq.to_string(), v.verdict);
        }
    }
    Ok(())
}
