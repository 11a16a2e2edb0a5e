//! Compares the closed-form LICQ verdict with the generic rank test on a
//! point where one zero dual sits exactly on the margin.

use mpec_cq::bho::{analyze_bho_point, assemble_feasible_point, BhoInstance};
use mpec_cq::cq::{CqName, DEFAULT_BIACTIVE_CAP};
use mpec_cq::model::Tolerances;

fn main() -> mpec_cq::error::Result<()> {
    let tol = Tolerances::default();
    let inst = BhoInstance::from_rows(
        vec![vec![vec![1.0, 1.0]]],
        vec![vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![2.0 / 3.0, 2.0 / 3.0]]],
    )?;
    let point = assemble_feasible_point(&inst, 10.0, &[1.0, 0.25, 0.0], &tol)?.point;
    let a = analyze_bho_point(&inst, &point, &tol, DEFAULT_BIACTIVE_CAP)?;
    println!("lambda1 = {:?}, lambda3_plus = {:?}", a.lambda_psi.lambda1, a.lambda_psi.lambda3_plus);
    println!(
        "closed form: {:?} (case {:?}, reduced coupling {:?})",
        a.licq_theorem.verdict.verdict, a.licq_theorem.case, a.licq_theorem.a_hat
    );
    println!("generic:     {:?}", a.cq.verdict(CqName::MpecLicq));
    println!("rank of the stacked active rows: {} of {}", a.gamma.rank, a.gamma.rows);
    Ok(())
}
