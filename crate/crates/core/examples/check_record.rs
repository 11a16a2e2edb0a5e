//! Checks a hand-written evaluation record: one complementarity pair in the
//! plane with both functions active at the origin.

use mpec_cq::model::Tolerances;
use mpec_cq::report::{run_check, to_json, CheckInput};

const RECORD: &str = r#"{
  "n": 2, "m": 0, "p": 0, "l": 1,
  "point": [0, 0],
  "g_vals": [], "h_vals": [],
  "G_vals": [0], "H_vals": [0],
  "g_grads": [], "h_grads": [],
  "G_grads": [[1, 0]], "H_grads": [[0, 1]],
  "affine": true
}"#;

fn main() -> mpec_cq::error::Result<()> {
    let input = CheckInput::parse(RECORD, None)?;
    let report = run_check(&input, None, &Tolerances::default(), 12, false)?;
    print!("{}", to_json(&report.cq));
    Ok(())
}
