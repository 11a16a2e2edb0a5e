//! Classifies the origin of the two-variable example for a few objective
//! gradients; each lands in a different stationarity class.

use mpec_cq::cq::DEFAULT_BIACTIVE_CAP;
use mpec_cq::fixtures::e2;
use mpec_cq::model::{classify_active, Tolerances};
use mpec_cq::stationarity::classify_stationarity;

fn main() -> mpec_cq::error::Result<()> {
    let tol = Tolerances::default();
    let f = e2();
    let active = classify_active(&f.eval, &tol)?;
    for grad_f in [vec![1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]] {
        let v = classify_stationarity(&f.eval, &active, &grad_f, &tol, DEFAULT_BIACTIVE_CAP)?;
        println!("grad f = {grad_f:?}: {:?}", v.strongest_class);
    }
    Ok(())
}
