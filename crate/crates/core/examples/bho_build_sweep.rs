//! Builds the SVC hyperparameter instance from the bundled CSV and sweeps a
//! log grid of `C`, printing the validation error and LICQ per point.

use mpec_cq::bho::{BhoInstance, Dataset, FoldSplit};
use mpec_cq::cq::{CqName, DEFAULT_BIACTIVE_CAP};
use mpec_cq::model::Tolerances;
use mpec_cq::report::{log_grid, run_sweep};

fn main() -> mpec_cq::error::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/toy.csv");
    let ds = Dataset::from_csv_path(path.as_ref())?;
    let split = FoldSplit::new(ds.len(), 3, 4, 8, 0)?;
    let inst = BhoInstance::from_dataset(&ds, &split)?;
    println!("n = {}", inst.n());
    let sweep = run_sweep(&inst, &log_grid(1e-2, 1e2, 9)?, &Tolerances::default(), DEFAULT_BIACTIVE_CAP, false);
    for e in &sweep.entries {
        match &e.report {
            Some(r) => {
                let bho = r.bho.as_ref().expect("SVC report");
                let licq = r.cq.as_ref().and_then(|c| c.verdict(CqName::MpecLicq));
                println!("C = {:>9.4}  error = {:.3}  LICQ {:?}", e.c, bho.validation_error, licq);
            }
            None => println!("C = {:>9.4}  {}", e.c, e.error.as_deref().unwrap_or("no report")),
        }
    }
    Ok(())
}
