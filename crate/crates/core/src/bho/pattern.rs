//! Refined index sets of a feasible point.
//!
//! Training samples split by the state of `(alpha_i, r_i, xi_i)`, where
//! `r = K alpha - 1 + xi` is the block-3 residual:
//!
//! | set          | `alpha_i`     | `r_i` | `xi_i` |
//! |--------------|---------------|-------|--------|
//! | `lambda1`    | 0             | 0     | 0      |
//! | `lambda2`    | 0             | > 0   | 0      |
//! | `lambda3_plus` | in `(0, C)` | 0     | 0      |
//! | `lambda3_c`  | C             | 0     | 0      |
//! | `lambda_u`   | C             | 0     | > 0    |
//!
//! Validation samples are correctly classified (`psi2`: `zeta = 0`,
//! `q > 0`, `z = 0`) or misclassified (`psi3`: `zeta = 1`, `q = 0`, `z > 0`)
//! where `q = M alpha + z`. Anything else means a validation margin sits on
//! the decision boundary and is reported through [`AssumptionFlags`].

use serde::{Deserialize, Serialize};

use super::instance::BhoInstance;
use super::point::BhoPoint;
use crate::error::{Error, Result};
use crate::model::{ActivePattern, Tolerances};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    /// `zeta_i = 0` and `q_i = 0`: biactive in block 1.
    pub i_gh1: Vec<usize>,
    /// `zeta_i = 1` and `z_i = 0`: biactive in block 2.
    pub i_gh2: Vec<usize>,
    /// Validation indices in neither `psi2` nor `psi3`.
    pub unclassified_validation: Vec<usize>,
    /// `C` within tolerance of zero, so `alpha = 0` and `alpha = C` coincide.
    pub degenerate_c: bool,
}

impl AssumptionFlags {
    pub fn is_clean(&self) -> bool {
        self.i_gh1.is_empty() && self.i_gh2.is_empty() && self.unclassified_validation.is_empty() && !self.degenerate_c
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaPsiPattern {
    pub lambda1: Vec<usize>,
    pub lambda2: Vec<usize>,
    pub lambda3_plus: Vec<usize>,
    pub lambda3_c: Vec<usize>,
    pub lambda_u: Vec<usize>,
    pub psi2: Vec<usize>,
    pub psi3: Vec<usize>,
    /// Biactive pairs of block 3; equals `lambda1`.
    pub i_gh3: Vec<usize>,
    /// Biactive pairs of block 4; equals `lambda3_c`.
    pub i_gh4: Vec<usize>,
    pub flags: AssumptionFlags,
}

impl LambdaPsiPattern {
    /// `lambda3_plus` and `lambda3_c` merged and sorted.
    pub fn lambda3(&self) -> Vec<usize> {
        sorted_union(&[&self.lambda3_plus, &self.lambda3_c])
    }
}

pub(crate) fn sorted_union(sets: &[&[usize]]) -> Vec<usize> {
    let mut v: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn classify_lambda_psi(inst: &BhoInstance, point: &BhoPoint, tol: &Tolerances) -> Result<LambdaPsiPattern> {
    inst.check_point_dims(point)?;
    let eps = tol.activity_eps;
    let near = |x: f64, y: f64| (x - y).abs() <= eps;
    let c = point.c;
    let alpha = nalgebra::DVector::from_column_slice(&point.alpha);
    let k_alpha = inst.bbt() * &alpha;
    let margins = inst.abt() * &alpha;

    let mut pat = LambdaPsiPattern::default();
    pat.flags.degenerate_c = c <= eps;
    for j in 0..inst.n_train() {
        let (a, xi) = (point.alpha[j], point.xi[j]);
        let r = k_alpha[j] - 1.0 + xi;
        let (a0, ac, r0, x0) = (near(a, 0.0), near(a, c), near(r, 0.0), near(xi, 0.0));
        let target = if a0 && r0 && x0 {
            &mut pat.lambda1
        } else if a0 && r > eps && x0 {
            &mut pat.lambda2
        } else if a > eps && a < c - eps && r0 && x0 {
            &mut pat.lambda3_plus
        } else if ac && r0 && x0 {
            &mut pat.lambda3_c
        } else if ac && r0 && xi > eps {
            &mut pat.lambda_u
        } else {
            return Err(Error::LambdaClassification(j));
        };
        target.push(j);
    }
    for i in 0..inst.n_val() {
        let (zeta, z) = (point.zeta[i], point.z[i]);
        let q = margins[i] + z;
        let (zeta0, zeta1, q0, z0) = (near(zeta, 0.0), near(zeta, 1.0), near(q, 0.0), near(z, 0.0));
        if zeta0 && q > eps && z0 {
            pat.psi2.push(i);
        } else if zeta1 && q0 && z > eps {
            pat.psi3.push(i);
        } else {
            pat.flags.unclassified_validation.push(i);
            if zeta0 && q0 {
                pat.flags.i_gh1.push(i);
            }
            if zeta1 && z0 {
                pat.flags.i_gh2.push(i);
            }
        }
    }
    pat.i_gh3 = pat.lambda1.clone();
    pat.i_gh4 = pat.lambda3_c.clone();
    Ok(pat)
}

/// Active sets `I_G`, `I_H`, `I_GH` of each of the four blocks, in block-local
/// indices, read off a generic [`ActivePattern`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndexSets {
    pub g_only: [Vec<usize>; 4],
    pub h_only: [Vec<usize>; 4],
    pub biactive: [Vec<usize>; 4],
}

impl BlockIndexSets {
    pub fn from_active(inst: &BhoInstance, active: &ActivePattern) -> Self {
        let mut s = Self::default();
        let put = |dst: &mut [Vec<usize>; 4], src: &[usize]| {
            for &k in src {
                let (b, i) = inst.block_of_pair(k);
                dst[(b - 1) as usize].push(i);
            }
        };
        put(&mut s.g_only, &active.g_only);
        put(&mut s.h_only, &active.h_only);
        put(&mut s.biactive, &active.biactive);
        for v in s.g_only.iter_mut().chain(s.h_only.iter_mut()).chain(s.biactive.iter_mut()) {
            v.sort_unstable();
        }
        s
    }
}

/// Compares the generic per-block active sets with what the refined pattern
/// predicts. Returns one message per disagreeing set.
pub fn check_index_relations(pat: &LambdaPsiPattern, blocks: &BlockIndexSets) -> Vec<String> {
    let l = |sets: &[&[usize]]| sorted_union(sets);
    let expected: [(&str, &[usize], Vec<usize>); 12] = [
        ("I_H1", &blocks.h_only[0], pat.psi2.clone()),
        ("I_G1", &blocks.g_only[0], pat.psi3.clone()),
        ("I_GH1", &blocks.biactive[0], vec![]),
        ("I_H2", &blocks.h_only[1], pat.psi2.clone()),
        ("I_G2", &blocks.g_only[1], pat.psi3.clone()),
        ("I_GH2", &blocks.biactive[1], vec![]),
        ("I_H3", &blocks.h_only[2], pat.lambda2.clone()),
        ("I_G3", &blocks.g_only[2], l(&[&pat.lambda3_plus, &pat.lambda3_c, &pat.lambda_u])),
        ("I_GH3", &blocks.biactive[2], pat.lambda1.clone()),
        ("I_H4", &blocks.h_only[3], l(&[&pat.lambda1, &pat.lambda2, &pat.lambda3_plus])),
        ("I_G4", &blocks.g_only[3], pat.lambda_u.clone()),
        ("I_GH4", &blocks.biactive[3], pat.lambda3_c.clone()),
    ];
    expected
        .into_iter()
        .filter(|(_, got, want)| *got != want.as_slice())
        .map(|(name, got, want)| format!("{name}: generic {got:?}, predicted {want:?}"))
        .collect()
}
