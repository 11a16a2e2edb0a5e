//! Feasible points of the SVC hyperparameter MPEC.

use serde::{Deserialize, Serialize};

use super::instance::BhoInstance;
use crate::error::{Error, Result};
use crate::model::{check_feasibility, Tolerances};

/// `v = (C, zeta, z, alpha, xi)`; serialized with exactly these keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhoPoint {
    #[serde(rename = "C")]
    pub c: f64,
    pub zeta: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
    pub xi: Vec<f64>,
}

impl BhoPoint {
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * (self.zeta.len() + self.alpha.len()));
        v.push(self.c);
        v.extend(&self.zeta);
        v.extend(&self.z);
        v.extend(&self.alpha);
        v.extend(&self.xi);
        v
    }

    pub fn from_vector(inst: &BhoInstance, v: &[f64]) -> Result<Self> {
        if v.len() != inst.n() {
            return Err(Error::Dimension(format!("vector of length {} for n = {}", v.len(), inst.n())));
        }
        let (nv, nt) = (inst.n_val(), inst.n_train());
        let take = |from: usize, len: usize| v[from..from + len].to_vec();
        Ok(Self {
            c: v[0],
            zeta: take(inst.col_zeta(0), nv),
            z: take(inst.col_z(0), nv),
            alpha: take(inst.col_alpha(0), nt),
            xi: take(inst.col_xi(0), nt),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.to_vector().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point".into()));
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembledPoint {
    pub point: BhoPoint,
    /// Validation indices whose margin `(A B^T alpha)_i` is within
    /// `activity_eps` of zero.
    pub boundary_validation: Vec<usize>,
}

/// Completes lower-level duals into a feasible point:
/// `xi = max(0, 1 - K alpha)`, `z = max(0, -M alpha)` and `zeta_i = 1`
/// exactly when validation margin `i` is below `-activity_eps`.
pub fn assemble_feasible_point(inst: &BhoInstance, c: f64, alpha: &[f64], tol: &Tolerances) -> Result<AssembledPoint> {
    if alpha.len() != inst.n_train() {
        return Err(Error::Dimension(format!("{} duals for {} training samples", alpha.len(), inst.n_train())));
    }
    let a = nalgebra::DVector::from_column_slice(alpha);
    let k_alpha = inst.bbt() * &a;
    let margins = inst.abt() * &a;
    let xi: Vec<f64> = k_alpha.iter().map(|&v| (1.0 - v).max(0.0)).collect();
    let z: Vec<f64> = margins.iter().map(|&q| (-q).max(0.0)).collect();
    let zeta: Vec<f64> = margins.iter().map(|&q| if q < -tol.activity_eps { 1.0 } else { 0.0 }).collect();
    let boundary_validation =
        margins.iter().enumerate().filter(|(_, q)| q.abs() <= tol.activity_eps).map(|(i, _)| i).collect();
    let point = BhoPoint { c, zeta, z, alpha: alpha.to_vec(), xi };
    let eval = inst.evaluate(&point)?;
    let feas = check_feasibility(&eval, tol)?;
    if let Some(v) = feas.violating_constraints.first() {
        let (block, index) = inst.block_of_pair(v.index);
        return Err(Error::InfeasibleConstruction {
            family: format!("{:?} in block {block}", v.family),
            index,
            residual: v.residual,
        });
    }
    Ok(AssembledPoint { point, boundary_validation })
}

/// Objective value `c^T v`: the summed `zeta` over `T m1`.
pub fn validation_error(inst: &BhoInstance, point: &BhoPoint) -> f64 {
    point.zeta.iter().sum::<f64>() / inst.n_val() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bho::solver::{solve_lower_level, QpOptions};

    fn inst() -> BhoInstance {
        // One fold, two validation samples, one training sample.
        BhoInstance::from_rows(vec![vec![vec![1.0], vec![-1.0]]], vec![vec![vec![2.0]]]).unwrap()
    }

    #[test]
    fn one_of_two_wrong() {
        let i = inst();
        let alpha = solve_lower_level(&i, 10.0, &QpOptions::default()).unwrap();
        assert!((alpha[0] - 0.25).abs() < 1e-12);
        let p = assemble_feasible_point(&i, 10.0, &alpha, &Tolerances::default()).unwrap();
        assert_eq!(p.point.zeta, vec![0.0, 1.0]);
        assert_eq!(p.point.z, vec![0.0, 0.5]);
        assert_eq!(validation_error(&i, &p.point), 0.5);
        assert!(p.boundary_validation.is_empty());
    }

    #[test]
    fn zero_c_flags_every_validation_point() {
        let i = inst();
        let p = assemble_feasible_point(&i, 0.0, &[0.0], &Tolerances::default()).unwrap();
        assert_eq!(p.point.xi, vec![1.0]);
        assert_eq!(p.boundary_validation, vec![0, 1]);
        assert_eq!(validation_error(&i, &p.point), 0.0);
    }

    #[test]
    fn non_optimal_duals_are_rejected() {
        // alpha = 1 > C violates C - alpha >= 0.
        let i = inst();
        let err = assemble_feasible_point(&i, 0.5, &[1.0], &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleConstruction { .. }));
    }

    #[test]
    fn vector_round_trip_and_json_keys() {
        let i = inst();
        let p = BhoPoint { c: 1.0, zeta: vec![0.0, 1.0], z: vec![0.0, 2.0], alpha: vec![0.5], xi: vec![0.0] };
        assert_eq!(BhoPoint::from_vector(&i, &p.to_vector()).unwrap(), p);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"C\":1.0"));
        assert_eq!(BhoPoint::from_json(&s).unwrap(), p);
    }
}
