//! Supervision targets built from labels: the block-diagonal structure matrix
//! `H` and the one-hot label matrix `L`.
//!
//! Columns follow dataset order. `H` is block-diagonal only after sorting the
//! columns by class; row blocks are laid out in class order.

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StructureTargets {
    /// `s × n` binary structure target.
    pub h: DMatrix<f64>,
    /// `c × n` one-hot labels.
    pub l: DMatrix<f64>,
    /// Rows of `H` owned by each class, in class order.
    pub block_rows: Vec<usize>,
}

impl StructureTargets {
    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn classes(&self) -> usize {
        self.l.nrows()
    }

    pub fn samples(&self) -> usize {
        self.h.ncols()
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// `L[i, j] = 1` iff `labels[j] == i`.
pub fn build_label_matrix(labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    check_labels(labels, classes)?;
    let mut l = DMatrix::zeros(classes, labels.len());
    for (j, &label) in labels.iter().enumerate() {
        l[(label, j)] = 1.0;
    }
    Ok(l)
}

/// Block sizes for [`build_structure_matrix`]: `Some(k)` gives every class
/// `k` rows, `None` gives each class as many rows as it has samples.
pub fn block_sizes(labels: &[usize], classes: usize, uniform: Option<usize>) -> Result<Vec<usize>> {
    check_labels(labels, classes)?;
    match uniform {
        Some(0) => Err(Error::InvalidData("block rows must be ≥ 1".into())),
        Some(k) => Ok(vec![k; classes]),
        None => {
            let mut counts = vec![0; classes];
            for &l in labels {
                counts[l] += 1;
            }
            match counts.iter().position(|&n| n == 0) {
                Some(class) => Err(Error::EmptyClass(class)),
                None => Ok(counts),
            }
        }
    }
}

/// `H[p, j] = 1` iff row `p` lies in the row block of class `labels[j]`.
pub fn build_structure_matrix(
    labels: &[usize],
    classes: usize,
    block_rows: &[usize],
) -> Result<DMatrix<f64>> {
    check_labels(labels, classes)?;
    if block_rows.len() != classes {
        return Err(Error::dims(
            "build_structure_matrix",
            format!("{classes} block sizes"),
            format!("{}", block_rows.len()),
        ));
    }
    if block_rows.contains(&0) {
        return Err(Error::InvalidData("block rows must be ≥ 1".into()));
    }
    let mut offsets = Vec::with_capacity(classes + 1);
    offsets.push(0);
    for &k in block_rows {
        offsets.push(offsets.last().unwrap() + k);
    }
    let s = offsets[classes];
    let mut h = DMatrix::zeros(s, labels.len());
    for (j, &label) in labels.iter().enumerate() {
        h.view_mut((offsets[label], j), (block_rows[label], 1)).fill(1.0);
    }
    Ok(h)
}

/// Both targets for a training set.
pub fn build_targets(data: &Dataset, uniform_block_rows: Option<usize>) -> Result<StructureTargets> {
    let block_rows = block_sizes(data.labels(), data.classes(), uniform_block_rows)?;
    Ok(StructureTargets {
        h: build_structure_matrix(data.labels(), data.classes(), &block_rows)?,
        l: build_label_matrix(data.labels(), data.classes())?,
        block_rows,
    })
}
