//! The single-level MPEC obtained from cross-validated L1-loss SVC.
//!
//! Variables are stacked as `v = (C, zeta, z, alpha, xi)` with
//! `zeta, z in R^{T m1}` and `alpha, xi in R^{T m2}`, so `n = 2T(m1 + m2) + 1`.
//! With `K = B B^T` and `M = A B^T` the `n - 1` complementarity pairs
//! `0 <= G(v) _|_ H(v) >= 0` come in four blocks:
//!
//! | block | `G`                     | `H`    | size    |
//! |-------|-------------------------|--------|---------|
//! | 1     | `M alpha + z`           | `zeta` | `T m1`  |
//! | 2     | `1 - zeta`              | `z`    | `T m1`  |
//! | 3     | `K alpha - 1 + xi`      | `alpha`| `T m2`  |
//! | 4     | `C - alpha`             | `xi`   | `T m2`  |
//!
//! Hence `H(v) = Q v` with `Q = [0 | I]`, `G(v) = P v + a`, and the objective
//! is `c^T v = (1 / (T m1)) sum zeta`, the average validation error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FoldSplit};
use super::point::BhoPoint;
use crate::error::{Error, Result};
use crate::kernels::dense::to_rows;
use crate::model::{AffineMap, AffineMpec, PointEvaluation};

/// Serialized form: the per-fold signed sample rows `y_k x_k^T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceData {
    pub folds: usize,
    pub m1: usize,
    pub m2: usize,
    pub features: usize,
    pub validation_rows: Vec<Vec<Vec<f64>>>,
    pub training_rows: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "InstanceData", try_from = "InstanceData")]
pub struct BhoInstance {
    data: InstanceData,
    /// Block-diagonal `(T m1) x (T p)`.
    a: DMatrix<f64>,
    /// Block-diagonal `(T m2) x (T p)`.
    b: DMatrix<f64>,
    abt: DMatrix<f64>,
    bbt: DMatrix<f64>,
}

impl From<BhoInstance> for InstanceData {
    fn from(i: BhoInstance) -> Self {
        i.data
    }
}

impl TryFrom<InstanceData> for BhoInstance {
    type Error = Error;

    fn try_from(d: InstanceData) -> Result<Self> {
        BhoInstance::from_rows(d.validation_rows, d.training_rows)
    }
}

fn block_diag(blocks: &[Vec<Vec<f64>>], rows_per: usize, p: usize) -> DMatrix<f64> {
    let t = blocks.len();
    let mut m = DMatrix::zeros(t * rows_per, t * p);
    for (f, block) in blocks.iter().enumerate() {
        for (r, row) in block.iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                m[(f * rows_per + r, f * p + c)] = x;
            }
        }
    }
    m
}

impl BhoInstance {
    /// Builds the instance from per-fold signed rows. Every fold must have
    /// the same validation and training sizes and all rows one length.
    pub fn from_rows(validation_rows: Vec<Vec<Vec<f64>>>, training_rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let folds = validation_rows.len();
        if folds == 0 || training_rows.len() != folds {
            return Err(Error::Dimension(
                "validation and training rows must cover the same positive fold count".into(),
            ));
        }
        let m1 = validation_rows[0].len();
        let m2 = training_rows[0].len();
        if m1 == 0 || m2 == 0 {
            return Err(Error::InsufficientData("every fold needs validation and training samples".into()));
        }
        let p = validation_rows[0][0].len();
        for (t, (v, tr)) in validation_rows.iter().zip(&training_rows).enumerate() {
            if v.len() != m1 || tr.len() != m2 {
                return Err(Error::Dimension(format!(
                    "fold {t} has sizes ({}, {}), expected ({m1}, {m2})",
                    v.len(),
                    tr.len()
                )));
            }
            if v.iter().chain(tr).any(|r| r.len() != p) {
                return Err(Error::Dimension(format!("fold {t} has rows not of length {p}")));
            }
            if v.iter().chain(tr).flatten().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("rows of fold {t}")));
            }
        }
        let a = block_diag(&validation_rows, m1, p);
        let b = block_diag(&training_rows, m2, p);
        let abt = &a * b.transpose();
        let bbt = &b * b.transpose();
        let data = InstanceData { folds, m1, m2, features: p, validation_rows, training_rows };
        Ok(Self { data, a, b, abt, bbt })
    }

    pub fn from_dataset(ds: &Dataset, split: &FoldSplit) -> Result<Self> {
        ds.validate()?;
        let signed = |idx: &[usize]| -> Vec<Vec<f64>> {
            idx.iter().map(|&k| ds.features[k].iter().map(|x| ds.labels[k] * x).collect()).collect()
        };
        let validation = split.validation.iter().map(|v| signed(v)).collect();
        let training = split.training.iter().map(|v| signed(v)).collect();
        Self::from_rows(validation, training)
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn folds(&self) -> usize {
        self.data.folds
    }

    pub fn m1(&self) -> usize {
        self.data.m1
    }

    pub fn m2(&self) -> usize {
        self.data.m2
    }

    pub fn features(&self) -> usize {
        self.data.features
    }

    /// Number of validation samples over all folds, `T m1`.
    pub fn n_val(&self) -> usize {
        self.data.folds * self.data.m1
    }

    /// Number of training samples over all folds, `T m2`.
    pub fn n_train(&self) -> usize {
        self.data.folds * self.data.m2
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        2 * (self.n_val() + self.n_train()) + 1
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `A B^T`, validation against training.
    pub fn abt(&self) -> &DMatrix<f64> {
        &self.abt
    }

    /// `B B^T`, the training Gram matrix.
    pub fn bbt(&self) -> &DMatrix<f64> {
        &self.bbt
    }

    pub fn fold_of_training(&self, j: usize) -> usize {
        j / self.data.m2
    }

    /// Gram block of one fold.
    pub fn fold_gram(&self, t: usize) -> DMatrix<f64> {
        let m2 = self.data.m2;
        self.bbt.view((t * m2, t * m2), (m2, m2)).into_owned()
    }

    pub fn col_c(&self) -> usize {
        0
    }

    pub fn col_zeta(&self, i: usize) -> usize {
        1 + i
    }

    pub fn col_z(&self, i: usize) -> usize {
        1 + self.n_val() + i
    }

    pub fn col_alpha(&self, j: usize) -> usize {
        1 + 2 * self.n_val() + j
    }

    pub fn col_xi(&self, j: usize) -> usize {
        1 + 2 * self.n_val() + self.n_train() + j
    }

    /// Index of the `i`-th pair of block `k` (1..=4) among all `n - 1` pairs.
    pub fn pair(&self, block: u8, i: usize) -> usize {
        let (v, t) = (self.n_val(), self.n_train());
        match block {
            1 => i,
            2 => v + i,
            3 => 2 * v + i,
            4 => 2 * v + t + i,
            _ => panic!("complementarity blocks are numbered 1 to 4"),
        }
    }

    /// Inverse of [`Self::pair`].
    pub fn block_of_pair(&self, k: usize) -> (u8, usize) {
        let (v, t) = (self.n_val(), self.n_train());
        if k < v {
            (1, k)
        } else if k < 2 * v {
            (2, k - v)
        } else if k < 2 * v + t {
            (3, k - 2 * v)
        } else {
            (4, k - 2 * v - t)
        }
    }

    /// Linear part of `G`, an `(n - 1) x n` matrix.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let (v, t, n) = (self.n_val(), self.n_train(), self.n());
        let mut p = DMatrix::zeros(n - 1, n);
        for i in 0..v {
            let r = self.pair(1, i);
            p[(r, self.col_z(i))] = 1.0;
            for j in 0..t {
                p[(r, self.col_alpha(j))] = self.abt[(i, j)];
            }
            p[(self.pair(2, i), self.col_zeta(i))] = -1.0;
        }
        for j in 0..t {
            let r = self.pair(3, j);
            for k in 0..t {
                p[(r, self.col_alpha(k))] = self.bbt[(j, k)];
            }
            p[(r, self.col_xi(j))] = 1.0;
            let r = self.pair(4, j);
            p[(r, self.col_c())] = 1.0;
            p[(r, self.col_alpha(j))] = -1.0;
        }
        p
    }

    /// `Q = [0 | I_{n-1}]`, so that `H(v) = Q v`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut q = DMatrix::zeros(n - 1, n);
        for k in 0..n - 1 {
            q[(k, k + 1)] = 1.0;
        }
        q
    }

    /// Objective vector: `1 / (T m1)` on the `zeta` block.
    pub fn c_vec(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n()];
        let w = 1.0 / self.n_val() as f64;
        for i in 0..self.n_val() {
            c[self.col_zeta(i)] = w;
        }
        c
    }

    /// Constant part of `G`: `(0, 1, -1, 0)` blockwise.
    pub fn a_vec(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n() - 1];
        for i in 0..self.n_val() {
            a[self.pair(2, i)] = 1.0;
        }
        for j in 0..self.n_train() {
            a[self.pair(3, j)] = -1.0;
        }
        a
    }

    /// The instance as a generic affine MPEC (no `g`, no `h`).
    pub fn as_affine_mpec(&self) -> AffineMpec {
        AffineMpec {
            n: self.n(),
            g: AffineMap::empty(),
            h: AffineMap::empty(),
            comp_g: AffineMap { matrix: to_rows(&self.p_matrix()), offset: self.a_vec() },
            comp_h: AffineMap { matrix: to_rows(&self.q_matrix()), offset: vec![0.0; self.n() - 1] },
        }
    }

    /// Evaluates `G`, `H` and their gradients at a point.
    pub fn evaluate(&self, point: &BhoPoint) -> Result<PointEvaluation> {
        self.check_point_dims(point)?;
        self.as_affine_mpec().evaluate(&point.to_vector())
    }

    pub fn check_point_dims(&self, point: &BhoPoint) -> Result<()> {
        if point.zeta.len() != self.n_val()
            || point.z.len() != self.n_val()
            || point.alpha.len() != self.n_train()
            || point.xi.len() != self.n_train()
        {
            return Err(Error::Dimension(format!(
                "point blocks ({}, {}, {}, {}) do not match T m1 = {}, T m2 = {}",
                point.zeta.len(),
                point.z.len(),
                point.alpha.len(),
                point.xi.len(),
                self.n_val(),
                self.n_train()
            )));
        }
        Ok(())
    }

    /// Multiplies training sample `j` (global index) by `factor`.
    pub fn scale_training_row(&mut self, j: usize, factor: f64) -> Result<()> {
        if j >= self.n_train() {
            return Err(Error::Dimension(format!("training index {j} out of range")));
        }
        let (t, r) = (j / self.data.m2, j % self.data.m2);
        self.data.training_rows[t][r].iter_mut().for_each(|x| *x *= factor);
        *self = Self::from_rows(self.data.validation_rows.clone(), self.data.training_rows.clone())?;
        Ok(())
    }

    /// Replaces training sample `dst` with a copy of sample `src` of the same fold.
    pub fn duplicate_training_row(&mut self, src: usize, dst: usize) -> Result<()> {
        if src >= self.n_train() || dst >= self.n_train() || self.fold_of_training(src) != self.fold_of_training(dst) {
            return Err(Error::Dimension("duplicate rows must be valid indices of one fold".into()));
        }
        let m2 = self.data.m2;
        let row = self.data.training_rows[src / m2][src % m2].clone();
        self.data.training_rows[dst / m2][dst % m2] = row;
        *self = Self::from_rows(self.data.validation_rows.clone(), self.data.training_rows.clone())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BhoInstance {
        BhoInstance::from_rows(
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, -1.0]]],
            vec![vec![vec![2.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 1.0], vec![-1.0, 0.5]]],
        )
        .unwrap()
    }

    #[test]
    fn dimension_identity() {
        let inst = tiny();
        assert_eq!(inst.n(), 2 * 2 * (1 + 2) + 1);
        assert_eq!(inst.p_matrix().shape(), (12, 13));
        assert_eq!(inst.q_matrix().shape(), (12, 13));
    }

    #[test]
    fn grams_are_block_diagonal() {
        let inst = tiny();
        assert_eq!(inst.bbt()[(0, 2)], 0.0);
        assert_eq!(inst.abt()[(0, 2)], 0.0);
        assert_eq!(inst.bbt()[(0, 0)], 4.0);
        assert_eq!(inst.abt()[(0, 0)], 2.0);
    }

    #[test]
    fn objective_vector() {
        let inst = tiny();
        let c = inst.c_vec();
        assert_eq!(c.iter().sum::<f64>(), 1.0);
        assert_eq!(c[inst.col_zeta(1)], 0.5);
        assert_eq!(c[0], 0.0);
    }

    #[test]
    fn pair_index_round_trip() {
        let inst = tiny();
        for k in 0..inst.n() - 1 {
            let (b, i) = inst.block_of_pair(k);
            assert_eq!(inst.pair(b, i), k);
        }
    }

    #[test]
    fn json_round_trip() {
        let inst = tiny();
        let s = serde_json::to_string(&inst).unwrap();
        let back: BhoInstance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inst);
    }
}
