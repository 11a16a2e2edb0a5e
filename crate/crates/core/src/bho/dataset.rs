//! Labelled samples and their deterministic split into cross-validation folds.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    /// Each label is `-1.0` or `+1.0`.
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let d = Self { features, labels };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::InsufficientData("dataset is empty".into()));
        }
        if self.features.len() != self.labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let p = self.dim();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("sample {i} has {} features, expected {p}", row.len())));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("features of sample {i}")));
            }
        }
        if let Some(i) = self.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Parse(format!("label of sample {i} is {}, expected -1 or +1", self.labels[i])));
        }
        Ok(())
    }

    /// Reads CSV with the label in the last column. Labels may be `-1/+1` or
    /// `0/1`; a first row that does not parse as numbers is taken as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("csv line {}: {e}", line + 1)))?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("csv line {}: {e}", line + 1))),
            };
            let Some((&y, x)) = values.split_last() else { continue };
            let y = if y == 1.0 {
                1.0
            } else if y == -1.0 || y == 0.0 {
                -1.0
            } else {
                return Err(Error::Parse(format!("csv line {}: label {y} not in {{-1, 0, 1}}", line + 1)));
            };
            features.push(x.to_vec());
            labels.push(y);
        }
        Self::new(features, labels)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.features.iter().zip(&self.labels) {
            for v in x {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", *y as i32));
        }
        out
    }
}

/// Validation and training sample indices per fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: usize,
    pub m1: usize,
    pub m2: usize,
    pub seed: u64,
    pub validation: Vec<Vec<usize>>,
    pub training: Vec<Vec<usize>>,
}

impl FoldSplit {
    /// Shuffles `0..n` with ChaCha8 and carves it into folds.
    ///
    /// With one fold, validation takes the first `m1` shuffled samples and
    /// training the next `m2`. With `T >= 2` folds the shuffled order is cut
    /// into `T` equal chunks; fold `t` validates on the first `m1` samples of
    /// chunk `t` and trains on the first `m2` samples of the remaining chunks
    /// in order. Samples not reached by these rules are dropped.
    pub fn new(n: usize, folds: usize, m1: usize, m2: usize, seed: u64) -> Result<Self> {
        if folds == 0 || m1 == 0 || m2 == 0 {
            return Err(Error::InsufficientData("folds, m1 and m2 must all be positive".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (validation, training) = if folds == 1 {
            if n < m1 + m2 {
                return Err(Error::InsufficientData(format!("{n} samples cannot supply m1 + m2 = {}", m1 + m2)));
            }
            (vec![order[..m1].to_vec()], vec![order[m1..m1 + m2].to_vec()])
        } else {
            let chunk = n / folds;
            if chunk < m1 || (folds - 1) * chunk < m2 {
                return Err(Error::InsufficientData(format!(
                    "{n} samples in {folds} folds give chunks of {chunk}, too small for m1 = {m1}, m2 = {m2}"
                )));
            }
            let chunks: Vec<&[usize]> = order.chunks(chunk).take(folds).collect();
            let mut validation = Vec::with_capacity(folds);
            let mut training = Vec::with_capacity(folds);
            for t in 0..folds {
                validation.push(chunks[t][..m1].to_vec());
                let rest: Vec<usize> =
                    chunks.iter().enumerate().filter(|(s, _)| *s != t).flat_map(|(_, c)| c.iter().copied()).collect();
                training.push(rest[..m2].to_vec());
            }
            (validation, training)
        };
        Ok(Self { folds, m1, m2, seed, validation, training })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_binary_labels() {
        let text = "x1,x2,label\n1.0,2.0,1\n-1.0,0.5,0\n";
        let d = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels, vec![1.0, -1.0]);
        assert_eq!(d.features[1], vec![-1.0, 0.5]);
    }

    #[test]
    fn csv_without_header() {
        let d = Dataset::from_csv_reader("0.1,-1\n0.2,1\n".as_bytes()).unwrap();
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn bad_label_rejected() {
        assert!(Dataset::from_csv_reader("0.1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Dataset::from_csv_reader("0.1,0.2,1\n0.3,1\n".as_bytes()).is_err());
    }

    #[test]
    fn single_fold_split() {
        let s = FoldSplit::new(10, 1, 3, 4, 7).unwrap();
        assert_eq!(s.validation[0].len(), 3);
        assert_eq!(s.training[0].len(), 4);
        assert!(s.validation[0].iter().all(|i| !s.training[0].contains(i)));
    }

    #[test]
    fn multi_fold_split_is_disjoint_per_fold_and_deterministic() {
        let s = FoldSplit::new(20, 3, 2, 5, 11).unwrap();
        for t in 0..3 {
            assert_eq!(s.validation[t].len(), 2);
            assert_eq!(s.training[t].len(), 5);
            assert!(s.validation[t].iter().all(|i| !s.training[t].contains(i)));
        }
        assert_eq!(s, FoldSplit::new(20, 3, 2, 5, 11).unwrap());
    }

    #[test]
    fn too_few_samples() {
        assert!(FoldSplit::new(5, 1, 3, 3, 0).is_err());
        assert!(FoldSplit::new(6, 3, 3, 1, 0).is_err());
    }
}
